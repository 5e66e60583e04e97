// DOM shell: mounts the queue and document panels, forwards events to the
// controller, and re-renders from state. All review semantics live in
// controller/state; this file only touches the DOM.

import { ApiClient, ApiError } from "./api.js";
import { decideItem, decideSelected, refreshQueue } from "./controller.js";
import { arcPath, arcSvg } from "./highlights.js";
import { actionForKey } from "./keyboard.js";
import {
  QueueState,
  initialState,
  moveSelection,
  selectedItem,
  withBanner,
  withDocument,
  withEditing,
  withFilters,
} from "./state.js";
import type { DocumentView, EditFields, QueueFilters } from "./types.js";
import {
  bannerHtml,
  documentHtml,
  editFieldsFromForm,
  editFormHtml,
  emptyDocumentHtml,
  queueListHtml,
} from "./views.js";

const client = new ApiClient("", localStorage.getItem("reviewer") ?? "anonymous");
let state: QueueState = initialState();
let documentCache: DocumentView | null = null;

const queuePanel = document.getElementById("queue-panel")!;
const docPanel = document.getElementById("document-panel")!;
const bannerSlot = document.getElementById("banner-slot")!;
const editSlot = document.getElementById("edit-slot")!;
const filterForm = document.getElementById("filter-form") as HTMLFormElement;
const emitButton = document.getElementById("emit-kb") as HTMLButtonElement;
const emitResult = document.getElementById("emit-result")!;

function setState(next: QueueState): void {
  state = next;
  render();
}

function render(): void {
  queuePanel.innerHTML = queueListHtml(state);
  bannerSlot.innerHTML = bannerHtml(state.banner);
  const editing = state.editing
    ? state.items.find((i) => i.item_id === state.editing)
    : null;
  editSlot.innerHTML = editing ? editFormHtml(editing) : "";
  editSlot.classList.toggle("open", Boolean(editing));
  renderDocument();
}

function renderDocument(): void {
  if (!state.openDocument) {
    docPanel.innerHTML = `<p class="empty">select an item to inspect its document</p>`;
    return;
  }
  if (documentCache && documentCache.pmid === state.openDocument) {
    docPanel.innerHTML = documentHtml(documentCache);
    requestAnimationFrame(drawArcs);
  }
}

async function openDocument(pmid: string): Promise<void> {
  try {
    documentCache = await client.document(pmid);
    setState(withDocument(state, pmid));
  } catch (err) {
    documentCache = null;
    if (err instanceof ApiError && err.status === 404) {
      setState(withDocument(state, pmid));
      docPanel.innerHTML = emptyDocumentHtml(pmid);
    } else {
      setState(withBanner(state, "service unreachable"));
    }
  }
}

function drawArcs(): void {
  if (!documentCache) return;
  for (const sentence of documentCache.sentences) {
    if (!sentence.triples.length) continue;
    const container = docPanel.querySelector<HTMLElement>(
      `.sentence[data-sent="${sentence.sent_id}"]`,
    );
    const slot = container?.querySelector<HTMLElement>(".arc-slot");
    const textSpan = container?.querySelector<HTMLElement>(".text");
    if (!container || !slot || !textSpan) continue;
    const base = slot.getBoundingClientRect();
    const markCenter = (charStart: number): number | null => {
      const mark = textSpan.querySelector<HTMLElement>(
        `mark[data-start="${charStart}"]`,
      );
      if (!mark) return null;
      const rect = mark.getBoundingClientRect();
      return rect.left + rect.width / 2 - base.left;
    };
    const arcs = [];
    for (const triple of sentence.triples) {
      const x1 = markCenter(triple.gene_chars[0]);
      const x2 = markCenter(triple.estimate_chars[0]);
      if (x1 === null || x2 === null) continue;
      arcs.push({
        path: arcPath(x1, x2, 22, 4),
        polarity: triple.polarity,
        itemId: triple.item_id,
      });
    }
    slot.innerHTML = arcSvg(arcs, Math.max(base.width, 10), 24);
  }
}

function flashSentence(sentId: number): void {
  const el = docPanel.querySelector<HTMLElement>(`#sent-${sentId}`);
  if (!el) return;
  el.scrollIntoView({ behavior: "smooth", block: "center" });
  el.classList.remove("flash");
  void el.offsetWidth; // restart the animation
  el.classList.add("flash");
}

async function decide(
  status: "accepted" | "rejected" | "edited",
  edited?: EditFields,
): Promise<void> {
  setState(await decideSelected(state, client, status, edited));
}

document.addEventListener("keydown", (event) => {
  const target = event.target as HTMLElement;
  if (target.tagName === "INPUT" || target.tagName === "SELECT") return;
  const action = actionForKey(event.key);
  if (!action) return;
  event.preventDefault();
  switch (action.kind) {
    case "move":
      setState(moveSelection(state, action.delta));
      break;
    case "accept":
      void decide("accepted");
      break;
    case "reject":
      void decide("rejected");
      break;
    case "edit": {
      const item = selectedItem(state);
      if (item && item.kind === "risk_triple") {
        setState(withEditing(state, item.item_id));
      }
      break;
    }
    case "open-document": {
      const item = selectedItem(state);
      if (item) void openDocument(item.pmid);
      break;
    }
    case "close":
      setState(withEditing(state, null));
      break;
  }
});

queuePanel.addEventListener("click", (event) => {
  const li = (event.target as HTMLElement).closest<HTMLElement>("li.queue-item");
  if (!li) return;
  const index = state.items.findIndex((i) => i.item_id === li.dataset.item);
  if (index >= 0) {
    setState({ ...state, selected: index });
    void openDocument(li.dataset.pmid!);
  }
});

docPanel.addEventListener("click", (event) => {
  const chip = (event.target as HTMLElement).closest<HTMLElement>(".triple-chip");
  if (chip) flashSentence(Number(chip.dataset.sent));
  const arc = (event.target as HTMLElement).closest<SVGPathElement>("path.arc");
  if (arc) {
    const sent = arc.closest<HTMLElement>(".sentence");
    if (sent) flashSentence(Number(sent.dataset.sent));
  }
});

editSlot.addEventListener("submit", (event) => {
  event.preventDefault();
  const form = event.target as HTMLFormElement;
  const itemId = form.dataset.item!;
  const fields = editFieldsFromForm(new FormData(form));
  void (async () => {
    setState(await decideItem(withEditing(state, null), client, itemId, "edited", fields));
  })();
});

editSlot.addEventListener("click", (event) => {
  const button = (event.target as HTMLElement).closest<HTMLButtonElement>(
    "button[data-action='cancel']",
  );
  if (button) setState(withEditing(state, null));
});

filterForm.addEventListener("submit", (event) => {
  event.preventDefault();
  const data = new FormData(filterForm);
  const filters: QueueFilters = {};
  const pmid = data.get("pmid");
  if (typeof pmid === "string" && pmid.trim()) filters.pmid = pmid.trim();
  const kind = data.get("kind");
  if (kind === "risk_triple" || kind === "ascertainment_sentence") {
    filters.kind = kind;
  }
  const minConf = data.get("min_confidence");
  if (typeof minConf === "string" && minConf.trim()) {
    filters.minConfidence = Number(minConf);
  }
  void refreshQueue(withFilters(state, filters), client).then(setState);
});

emitButton.addEventListener("click", () => {
  void (async () => {
    try {
      const result = await client.emitKb();
      emitResult.textContent =
        `${result.n_rows} row(s) -> ${result.path}` +
        (result.problems.length ? ` (${result.problems.length} skipped)` : "");
    } catch {
      setState(withBanner(state, "emit failed: service unreachable"));
    }
  })();
});

void refreshQueue(state, client).then(setState);
