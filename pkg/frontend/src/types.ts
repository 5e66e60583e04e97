// Shapes mirror the review service JSON exactly; the client never derives
// or re-scores anything the server already provides.

export type ItemKind = "ascertainment_sentence" | "risk_triple";
export type ItemStatus = "pending" | "accepted" | "edited" | "rejected";
export type Polarity = "positive" | "negative";

export interface TriplePayload {
  pmid: string;
  sent_id: number;
  gene: string;
  estimate: string;
  polarity: Polarity;
  confidence: number;
  window: [number, number];
  gene_span: [number, number];
  estimate_span: [number, number];
}

export interface SentencePayload {
  pmid: string;
  sent_id: number;
  text: string;
  score: number;
}

export interface ReviewItem {
  item_id: string;
  pmid: string;
  kind: ItemKind;
  payload: (TriplePayload | SentencePayload) & Record<string, unknown>;
  confidence: number;
  status: ItemStatus;
  edited_payload: Record<string, unknown> | null;
  decided_by: string | null;
  decided_at: string | null;
}

export interface QueueFilters {
  pmid?: string;
  kind?: ItemKind;
  minConfidence?: number;
}

export interface EntityHighlight {
  token_start: number;
  token_end: number;
  start: number; // char offsets into the sentence text, server-derived
  end: number;
  type: "germline_mutation" | "risk_estimate";
}

export interface DocTriple extends TriplePayload {
  item_id: string;
  gene_chars: [number, number];
  estimate_chars: [number, number];
}

export interface DocSentence {
  sent_id: number;
  section: string;
  text: string;
  ascertainment: { score: number; predicted: boolean } | null;
  entities: EntityHighlight[];
  triples: DocTriple[];
}

export interface DocumentView {
  pmid: string;
  sentences: DocSentence[];
}

export interface KBEmitResult {
  path: string;
  n_rows: number;
  rows: Record<string, string>[];
  problems: string[];
}

// The edit form is constrained to the KB table columns.
export interface EditFields {
  gene?: string;
  cancer?: string;
  race?: string;
  metric?: "OR" | "RR" | "HR";
  estimate?: string;
  max_age?: number | null;
  total_carriers?: number | null;
}

export function isTriple(item: ReviewItem): boolean {
  return item.kind === "risk_triple";
}
