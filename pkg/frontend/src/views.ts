// HTML builders. Pure string functions so the rendering logic is testable
// without a browser; main.ts owns actual DOM mounting and events.

import { escapeHtml, sentenceHtml } from "./highlights.js";
import { QueueState, selectedItem } from "./state.js";
import type {
  DocumentView,
  DocSentence,
  EditFields,
  ReviewItem,
  SentencePayload,
  TriplePayload,
} from "./types.js";

function confidencePct(value: number): string {
  return `${(100 * value).toFixed(1)}%`;
}

export function queueItemHtml(item: ReviewItem, selected: boolean): string {
  const classes = ["queue-item", selected ? "selected" : "", item.kind].join(" ").trim();
  let body: string;
  if (item.kind === "risk_triple") {
    const p = item.payload as TriplePayload;
    body =
      `<span class="gene">${escapeHtml(p.gene)}</span>` +
      `<span class="estimate">${escapeHtml(p.estimate)}</span>` +
      `<span class="polarity polarity-${p.polarity}">${p.polarity}</span>`;
  } else {
    const p = item.payload as SentencePayload;
    body = `<span class="snippet">${escapeHtml(p.text)}</span>`;
  }
  return (
    `<li class="${classes}" data-item="${escapeHtml(item.item_id)}" ` +
    `data-pmid="${escapeHtml(item.pmid)}">` +
    `<span class="pmid">${escapeHtml(item.pmid)}</span>${body}` +
    `<span class="confidence">${confidencePct(item.confidence)}</span></li>`
  );
}

export function queueListHtml(state: QueueState): string {
  if (state.items.length === 0) {
    return `<p class="empty">queue is empty</p>`;
  }
  const selected = selectedItem(state);
  const rows = state.items
    .map((item) => queueItemHtml(item, selected?.item_id === item.item_id))
    .join("");
  return `<ul class="queue">${rows}</ul>`;
}

export function bannerHtml(message: string | null): string {
  if (!message) return "";
  return `<div class="banner" role="alert">${escapeHtml(message)}</div>`;
}

// The edit form is constrained to the KB table columns.
export function editFormHtml(item: ReviewItem): string {
  const p = item.payload as TriplePayload;
  const metricOptions = ["OR", "RR", "HR"]
    .map((m) => `<option value="${m}"${m === "OR" ? " selected" : ""}>${m}</option>`)
    .join("");
  return `
<form class="edit-form" data-item="${escapeHtml(item.item_id)}">
  <label>Gene <input name="gene" value="${escapeHtml(p.gene)}"></label>
  <label>Cancer <input name="cancer" value=""></label>
  <label>Race <input name="race" value=""></label>
  <label>Metric <select name="metric">${metricOptions}</select></label>
  <label>Estimate <input name="estimate" value="${escapeHtml(p.estimate)}"></label>
  <label>Max Age <input name="max_age" type="number" min="0"></label>
  <label>Total Carriers <input name="total_carriers" type="number" min="0"></label>
  <div class="edit-actions">
    <button type="submit" data-action="save">save as edited</button>
    <button type="button" data-action="cancel">cancel</button>
  </div>
</form>`.trim();
}

export function editFieldsFromForm(data: FormData): EditFields {
  const fields: EditFields = {};
  const text = (name: string) => {
    const value = data.get(name);
    return typeof value === "string" && value.trim() !== "" ? value.trim() : undefined;
  };
  const gene = text("gene");
  if (gene) fields.gene = gene;
  const cancer = text("cancer");
  if (cancer) fields.cancer = cancer;
  const race = text("race");
  if (race) fields.race = race;
  const metric = text("metric");
  if (metric === "OR" || metric === "RR" || metric === "HR") fields.metric = metric;
  const estimate = text("estimate");
  if (estimate) fields.estimate = estimate;
  const maxAge = text("max_age");
  if (maxAge) fields.max_age = Number(maxAge);
  const carriers = text("total_carriers");
  if (carriers) fields.total_carriers = Number(carriers);
  return fields;
}

function tripleChipHtml(t: DocSentence["triples"][number]): string {
  return (
    `<button class="triple-chip polarity-${t.polarity}" data-item="${escapeHtml(t.item_id)}" ` +
    `data-sent="${t.sent_id}">` +
    `${escapeHtml(t.gene)} &middot; ${escapeHtml(t.estimate)} &middot; ${t.polarity}` +
    `</button>`
  );
}

export function documentHtml(view: DocumentView): string {
  const total = view.sentences.reduce((n, s) => n + s.triples.length, 0);
  const sentences = view.sentences
    .map((s) => {
      const classes = ["sentence"];
      if (s.ascertainment?.predicted) classes.push("ascertainment");
      const arcsSlot = s.triples.length
        ? `<div class="arc-slot" data-sent="${s.sent_id}"></div>`
        : "";
      const chips = s.triples.map(tripleChipHtml).join("");
      return (
        `<div class="${classes.join(" ")}" data-sent="${s.sent_id}" id="sent-${s.sent_id}">` +
        `${arcsSlot}<span class="section-tag">${escapeHtml(s.section)}</span>` +
        `<span class="text">${sentenceHtml(s)}</span>` +
        (chips ? `<div class="chips">${chips}</div>` : "") +
        `</div>`
      );
    })
    .join("");
  const note = total === 0 ? `<p class="empty">no predictions for this document</p>` : "";
  return `<h2>PMID ${escapeHtml(view.pmid)}</h2>${note}<div class="doc">${sentences}</div>`;
}

export function emptyDocumentHtml(pmid: string): string {
  return `<h2>PMID ${escapeHtml(pmid)}</h2><p class="empty">document not found</p>`;
}
