import { describe, expect, it } from "vitest";

import { keyToVerdict, verdictFromEvent } from "../src/keyboard.js";
import type { KeyInput } from "../src/keyboard.js";

function input(overrides: Partial<KeyInput> = {}): KeyInput {
  return {
    key: "1",
    ctrlKey: false,
    metaKey: false,
    altKey: false,
    targetTag: null,
    ...overrides,
  };
}

describe("keyToVerdict", () => {
  it("maps 1 to relevant", () => {
    expect(keyToVerdict("1")).toBe(true);
  });

  it("maps 0 to not relevant", () => {
    expect(keyToVerdict("0")).toBe(false);
  });

  it.each(["2", "9", "Enter", " ", "y", "n", ""])("ignores %j", (key) => {
    expect(keyToVerdict(key)).toBeNull();
  });
});

describe("verdictFromEvent", () => {
  it("accepts a bare 1 keypress", () => {
    expect(verdictFromEvent(input({ key: "1" }))).toBe(true);
  });

  it("accepts a bare 0 keypress", () => {
    expect(verdictFromEvent(input({ key: "0" }))).toBe(false);
  });

  it.each([
    { ctrlKey: true },
    { metaKey: true },
    { altKey: true },
  ])("ignores keys with a modifier held: %o", (mod) => {
    expect(verdictFromEvent(input(mod))).toBeNull();
  });

  it.each(["INPUT", "TEXTAREA", "SELECT", "input"])(
    "ignores keys typed into a %s field",
    (tag) => {
      expect(verdictFromEvent(input({ targetTag: tag }))).toBeNull();
    },
  );

  it.each(["BODY", "BUTTON", "P", "DIV"])("handles keys with focus on %s", (tag) => {
    expect(verdictFromEvent(input({ key: "0", targetTag: tag }))).toBe(false);
  });

  it("ignores non-verdict keys regardless of target", () => {
    expect(verdictFromEvent(input({ key: "Escape" }))).toBeNull();
  });
});
