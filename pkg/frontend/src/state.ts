// Queue view state. Pure functions over immutable snapshots: the rendered
// list always mirrors the last /queue response (no client-side re-scoring
// or re-ordering), decisions only apply from server responses, and errors
// surface as a non-blocking banner without touching the item list.

import type { QueueFilters, ReviewItem } from "./types.js";

export interface QueueState {
  items: ReviewItem[];
  filters: QueueFilters;
  selected: number; // index into items; -1 when empty
  banner: string | null;
  openDocument: string | null; // pmid shown in the document panel
  editing: string | null; // item_id with the edit form open
}

export function initialState(): QueueState {
  return {
    items: [],
    filters: {},
    selected: -1,
    banner: null,
    openDocument: null,
    editing: null,
  };
}

function clampSelection(items: ReviewItem[], wanted: number): number {
  if (items.length === 0) return -1;
  return Math.min(Math.max(wanted, 0), items.length - 1);
}

export function withItems(state: QueueState, items: ReviewItem[]): QueueState {
  const previous = selectedItem(state);
  let selected = previous
    ? items.findIndex((i) => i.item_id === previous.item_id)
    : -1;
  if (selected < 0) selected = clampSelection(items, state.selected);
  return { ...state, items: [...items], selected, banner: null };
}

export function withFilters(state: QueueState, filters: QueueFilters): QueueState {
  return { ...state, filters: { ...filters } };
}

export function moveSelection(state: QueueState, delta: number): QueueState {
  return { ...state, selected: clampSelection(state.items, state.selected + delta) };
}

export function selectedItem(state: QueueState): ReviewItem | null {
  if (state.selected < 0 || state.selected >= state.items.length) return null;
  return state.items[state.selected];
}

/** Apply a server /decision response: the item leaves the pending view. */
export function applyServerDecision(state: QueueState, decided: ReviewItem): QueueState {
  if (decided.status === "pending") return state;
  return removeItem(state, decided.item_id);
}

/** A 409 means someone already decided the item; drop it from the view. */
export function applyConflict(state: QueueState, itemId: string, message: string): QueueState {
  return withBanner(removeItem(state, itemId), message);
}

function removeItem(state: QueueState, itemId: string): QueueState {
  const index = state.items.findIndex((i) => i.item_id === itemId);
  if (index < 0) return state;
  const items = state.items.filter((i) => i.item_id !== itemId);
  const selected = clampSelection(items, state.selected > index ? state.selected - 1 : state.selected);
  const editing = state.editing === itemId ? null : state.editing;
  return { ...state, items, selected, editing };
}

export function withBanner(state: QueueState, banner: string | null): QueueState {
  return { ...state, banner };
}

export function withDocument(state: QueueState, pmid: string | null): QueueState {
  return { ...state, openDocument: pmid };
}

export function withEditing(state: QueueState, itemId: string | null): QueueState {
  return { ...state, editing: itemId };
}
