// Sentence markup and relation-arc geometry. Highlight ranges come from
// the server's token offsets verbatim; this module only slices strings.

import type { DocSentence, DocTriple } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Sentence text with <mark> elements around server-provided entity spans. */
export function sentenceHtml(sentence: DocSentence): string {
  const spans = [...sentence.entities].sort((a, b) => a.start - b.start);
  const parts: string[] = [];
  let cursor = 0;
  for (const span of spans) {
    if (span.start < cursor) continue; // defensive: ignore overlaps
    parts.push(escapeHtml(sentence.text.slice(cursor, span.start)));
    const surface = escapeHtml(sentence.text.slice(span.start, span.end));
    parts.push(
      `<mark class="entity ${span.type}" data-start="${span.start}" ` +
        `data-end="${span.end}">${surface}</mark>`,
    );
    cursor = span.end;
  }
  parts.push(escapeHtml(sentence.text.slice(cursor)));
  return parts.join("");
}

export interface ArcEndpoints {
  itemId: string;
  polarity: "positive" | "negative";
  geneMid: number; // character midpoints within the sentence text
  estimateMid: number;
}

/** One arc per triple; a sentence with two genes and one estimate yields
 * two distinct arcs. */
export function arcEndpoints(sentence: DocSentence): ArcEndpoints[] {
  return sentence.triples.map((t: DocTriple) => ({
    itemId: t.item_id,
    polarity: t.polarity,
    geneMid: (t.gene_chars[0] + t.gene_chars[1]) / 2,
    estimateMid: (t.estimate_chars[0] + t.estimate_chars[1]) / 2,
  }));
}

/** Quadratic arc between two x positions above a baseline. */
export function arcPath(x1: number, x2: number, baseline: number, lift: number): string {
  const left = Math.min(x1, x2);
  const right = Math.max(x1, x2);
  const mid = (left + right) / 2;
  const height = Math.max(baseline - lift, 2);
  return `M ${left.toFixed(1)} ${baseline.toFixed(1)} ` +
    `Q ${mid.toFixed(1)} ${height.toFixed(1)} ${right.toFixed(1)} ${baseline.toFixed(1)}`;
}

export function arcSvg(
  arcs: { path: string; polarity: string; itemId: string }[],
  width: number,
  height: number,
): string {
  const paths = arcs
    .map(
      (a) =>
        `<path class="arc arc-${a.polarity}" data-item="${escapeHtml(a.itemId)}" d="${a.path}"/>`,
    )
    .join("");
  return `<svg class="arcs" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">${paths}</svg>`;
}
