/**
 * Keyboard shortcuts: 1 marks the example relevant, 0 marks it not
 * relevant. The mapping is pure so it can be tested without a DOM; the
 * KeyboardEvent adapter lives at the bottom.
 */

export interface KeyInput {
  key: string;
  ctrlKey: boolean;
  metaKey: boolean;
  altKey: boolean;
  targetTag: string | null;
}

export function keyToVerdict(key: string): boolean | null {
  if (key === "1") {
    return true;
  }
  if (key === "0") {
    return false;
  }
  return null;
}

const EDITABLE_TAGS = new Set(["INPUT", "TEXTAREA", "SELECT"]);

/** Null when the keystroke should be ignored: modifier held or typing in a field. */
export function verdictFromEvent(input: KeyInput): boolean | null {
  if (input.ctrlKey || input.metaKey || input.altKey) {
    return null;
  }
  if (input.targetTag !== null && EDITABLE_TAGS.has(input.targetTag.toUpperCase())) {
    return null;
  }
  return keyToVerdict(input.key);
}

export function fromKeyboardEvent(event: KeyboardEvent): KeyInput {
  return {
    key: event.key,
    ctrlKey: event.ctrlKey,
    metaKey: event.metaKey,
    altKey: event.altKey,
    targetTag: event.target instanceof Element ? event.target.tagName : null,
  };
}
