// Keyboard-first triage: j/k move, a accept, r reject, e edit, o/Enter
// opens the document for the selected item, Escape closes the edit form.

export type UiAction =
  | { kind: "move"; delta: number }
  | { kind: "accept" }
  | { kind: "reject" }
  | { kind: "edit" }
  | { kind: "open-document" }
  | { kind: "close" };

export function actionForKey(key: string): UiAction | null {
  switch (key) {
    case "j":
    case "ArrowDown":
      return { kind: "move", delta: 1 };
    case "k":
    case "ArrowUp":
      return { kind: "move", delta: -1 };
    case "a":
      return { kind: "accept" };
    case "r":
      return { kind: "reject" };
    case "e":
      return { kind: "edit" };
    case "o":
    case "Enter":
      return { kind: "open-document" };
    case "Escape":
      return { kind: "close" };
    default:
      return null;
  }
}
