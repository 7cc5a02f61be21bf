import { describe, expect, it } from "vitest";

import {
  dragVertex,
  ensureClosed,
  hitTestEdge,
  hitTestVertex,
  insertOnEdge,
  isClosed,
  isSimple,
  validateRing,
  vertexCount,
} from "../src/polygon.js";
import type { PixelRing } from "../src/types.js";

const square = (): PixelRing => [
  [10, 10],
  [50, 10],
  [50, 50],
  [10, 50],
  [10, 10],
];

describe("ring closure", () => {
  it("detects closed and open rings", () => {
    expect(isClosed(square())).toBe(true);
    expect(isClosed(square().slice(0, 4))).toBe(false);
    expect(isClosed([])).toBe(false);
  });

  it("ensureClosed appends the first vertex", () => {
    const open = square().slice(0, 4);
    const closed = ensureClosed(open);
    expect(isClosed(closed)).toBe(true);
    expect(closed.length).toBe(5);
    expect(ensureClosed(closed)).toBe(closed);
  });

  it("counts distinct vertices", () => {
    expect(vertexCount(square())).toBe(4);
    expect(vertexCount(square().slice(0, 4))).toBe(4);
  });
});

describe("validation", () => {
  it("accepts a simple closed ring", () => {
    expect(validateRing(square()).ok).toBe(true);
  });

  it("rejects open rings with a message", () => {
    const v = validateRing(square().slice(0, 4));
    expect(v.ok).toBe(false);
    expect(v.message).toMatch(/closed/);
  });

  it("rejects too-small rings", () => {
    expect(validateRing([[0, 0], [1, 1], [0, 0]]).ok).toBe(false);
  });

  it("rejects self-intersecting rings", () => {
    const bowtie: PixelRing = [
      [0, 0],
      [40, 40],
      [40, 0],
      [0, 40],
      [0, 0],
    ];
    expect(isSimple(bowtie)).toBe(false);
    const v = validateRing(bowtie);
    expect(v.ok).toBe(false);
    expect(v.message).toMatch(/intersect/);
  });

  it("rejects duplicate vertices", () => {
    const dup: PixelRing = [
      [0, 0],
      [10, 0],
      [10, 0],
      [10, 10],
      [0, 0],
    ];
    expect(validateRing(dup).ok).toBe(false);
  });
});

describe("editing", () => {
  it("vertex drag keeps the ring closed", () => {
    const moved = dragVertex(square(), 1, [60, 12]);
    expect(moved[1]).toEqual([60, 12]);
    expect(isClosed(moved)).toBe(true);
    expect(validateRing(moved).ok).toBe(true);
  });

  it("dragging the shared endpoint moves both copies", () => {
    const moved = dragVertex(square(), 0, [5, 5]);
    expect(moved[0]).toEqual([5, 5]);
    expect(moved[moved.length - 1]).toEqual([5, 5]);
    expect(isClosed(moved)).toBe(true);
  });

  it("drag does not mutate the input ring", () => {
    const original = square();
    dragVertex(original, 2, [99, 99]);
    expect(original[2]).toEqual([50, 50]);
  });

  it("insert-on-edge adds a vertex and keeps validity", () => {
    const grown = insertOnEdge(square(), 0, [30, 10]);
    expect(grown.length).toBe(6);
    expect(grown[1]).toEqual([30, 10]);
    expect(validateRing(grown).ok).toBe(true);
    expect(vertexCount(grown)).toBe(5);
  });

  it("rejects out-of-range indices", () => {
    expect(() => dragVertex(square(), 9, [0, 0])).toThrow(RangeError);
    expect(() => insertOnEdge(square(), 4, [0, 0])).toThrow(RangeError);
  });
});

describe("hit testing", () => {
  it("finds the nearest vertex within the radius", () => {
    expect(hitTestVertex(square(), [51, 49])).toBe(2);
    expect(hitTestVertex(square(), [30, 30])).toBe(-1);
  });

  it("finds the nearest edge within the radius", () => {
    expect(hitTestEdge(square(), [30, 11])).toBe(0);
    expect(hitTestEdge(square(), [49, 30])).toBe(1);
    expect(hitTestEdge(square(), [30, 30])).toBe(-1);
  });
});
