// Actions shared by the keyboard handlers, buttons, and the end-to-end
// tests. Every mutation round-trips through the server; the returned state
// reflects only what the server confirmed.

import { ApiClient, ApiError } from "./api.js";
import {
  QueueState,
  applyConflict,
  applyServerDecision,
  selectedItem,
  withBanner,
  withItems,
} from "./state.js";
import type { EditFields, ItemStatus } from "./types.js";

export async function refreshQueue(
  state: QueueState,
  client: ApiClient,
): Promise<QueueState> {
  try {
    const items = await client.queue(state.filters);
    return withItems(state, items);
  } catch (err) {
    return withBanner(state, describe(err));
  }
}

export async function decideItem(
  state: QueueState,
  client: ApiClient,
  itemId: string,
  status: Exclude<ItemStatus, "pending">,
  edited?: EditFields,
): Promise<QueueState> {
  try {
    const decided = await client.decide(itemId, status, edited);
    return applyServerDecision(state, decided);
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      return applyConflict(state, itemId, "already decided elsewhere");
    }
    // Offline or server error: banner only, no local state mutation.
    return withBanner(state, describe(err));
  }
}

export async function decideSelected(
  state: QueueState,
  client: ApiClient,
  status: Exclude<ItemStatus, "pending">,
  edited?: EditFields,
): Promise<QueueState> {
  const item = selectedItem(state);
  if (!item) return state;
  return decideItem(state, client, item.item_id, status, edited);
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `server error ${err.status}: ${err.message}`;
  if (err instanceof Error) return `service unreachable: ${err.message}`;
  return "service unreachable";
}
