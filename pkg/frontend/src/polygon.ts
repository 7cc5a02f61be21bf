/** Pure polygon-editing operations on closed pixel rings.
 *
 * Every operation preserves the two editor invariants: the ring stays closed
 * (first point === last point) and keeps at least 4 points (3 distinct
 * vertices plus the closing duplicate). Validation mirrors the server's
 * rules so an edit that passes here is accepted there.
 */

import type { PixelPoint, PixelRing } from "./types.js";

export function isClosed(ring: PixelRing): boolean {
  if (ring.length < 2) return false;
  const [a, b] = [ring[0], ring[ring.length - 1]];
  return a[0] === b[0] && a[1] === b[1];
}

export function ensureClosed(ring: PixelRing): PixelRing {
  if (ring.length === 0) return ring;
  return isClosed(ring) ? ring : [...ring, [ring[0][0], ring[0][1]]];
}

/** Distinct vertices, not counting the closing duplicate. */
export function vertexCount(ring: PixelRing): number {
  return isClosed(ring) ? ring.length - 1 : ring.length;
}

function orient(p: PixelPoint, q: PixelPoint, r: PixelPoint): number {
  const v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
  return v > 0 ? 1 : v < 0 ? -1 : 0;
}

function onSegment(p: PixelPoint, q: PixelPoint, r: PixelPoint): boolean {
  return (
    Math.min(p[0], r[0]) <= q[0] && q[0] <= Math.max(p[0], r[0]) &&
    Math.min(p[1], r[1]) <= q[1] && q[1] <= Math.max(p[1], r[1])
  );
}

function segmentsCross(a: PixelPoint, b: PixelPoint, c: PixelPoint, d: PixelPoint): boolean {
  const o1 = orient(a, b, c);
  const o2 = orient(a, b, d);
  const o3 = orient(c, d, a);
  const o4 = orient(c, d, b);
  if (o1 !== o2 && o3 !== o4) return true;
  if (o1 === 0 && onSegment(a, c, b)) return true;
  if (o2 === 0 && onSegment(a, d, b)) return true;
  if (o3 === 0 && onSegment(c, a, d)) return true;
  if (o4 === 0 && onSegment(c, b, d)) return true;
  return false;
}

/** Simple polygon check: no two non-adjacent edges intersect. */
export function isSimple(ring: PixelRing): boolean {
  if (!isClosed(ring)) return false;
  const n = ring.length - 1; // edges
  for (let i = 0; i < n; i++) {
    for (let j = i + 1; j < n; j++) {
      const adjacent = j === i + 1 || (i === 0 && j === n - 1);
      if (adjacent) continue;
      if (segmentsCross(ring[i], ring[i + 1], ring[j], ring[j + 1])) {
        return false;
      }
    }
  }
  return true;
}

export interface RingValidation {
  ok: boolean;
  message: string;
}

export function validateRing(ring: PixelRing): RingValidation {
  if (!isClosed(ring)) {
    return { ok: false, message: "ring must be closed" };
  }
  if (ring.length < 4) {
    return { ok: false, message: "ring needs at least 3 vertices" };
  }
  const seen = new Set<string>();
  for (let i = 0; i < ring.length - 1; i++) {
    const key = `${ring[i][0]},${ring[i][1]}`;
    if (seen.has(key)) {
      return { ok: false, message: "ring has duplicate vertices" };
    }
    seen.add(key);
  }
  if (!isSimple(ring)) {
    return { ok: false, message: "ring is self-intersecting" };
  }
  return { ok: true, message: "" };
}

/** Move one vertex; moving the shared first/last vertex moves both copies. */
export function dragVertex(ring: PixelRing, index: number, to: PixelPoint): PixelRing {
  if (index < 0 || index >= ring.length) {
    throw new RangeError(`vertex index ${index} out of range`);
  }
  const out = ring.map(([c, r]) => [c, r] as PixelPoint);
  out[index] = [to[0], to[1]];
  const last = out.length - 1;
  if (index === 0) out[last] = [to[0], to[1]];
  if (index === last) out[0] = [to[0], to[1]];
  return out;
}

/** Insert a new vertex after edge `edgeIndex` (edge i runs ring[i]->ring[i+1]). */
export function insertOnEdge(ring: PixelRing, edgeIndex: number, at: PixelPoint): PixelRing {
  if (edgeIndex < 0 || edgeIndex >= ring.length - 1) {
    throw new RangeError(`edge index ${edgeIndex} out of range`);
  }
  const out = ring.map(([c, r]) => [c, r] as PixelPoint);
  out.splice(edgeIndex + 1, 0, [at[0], at[1]]);
  return out;
}

/** Nearest vertex within `radius` px of a point, or -1. */
export function hitTestVertex(ring: PixelRing, p: PixelPoint, radius = 6): number {
  let best = -1;
  let bestDist = radius;
  for (let i = 0; i < ring.length - 1; i++) {
    const d = Math.hypot(ring[i][0] - p[0], ring[i][1] - p[1]);
    if (d <= bestDist) {
      best = i;
      bestDist = d;
    }
  }
  return best;
}

/** Nearest edge within `radius` px of a point, or -1. */
export function hitTestEdge(ring: PixelRing, p: PixelPoint, radius = 4): number {
  let best = -1;
  let bestDist = radius;
  for (let i = 0; i < ring.length - 1; i++) {
    const [a, b] = [ring[i], ring[i + 1]];
    const len2 = (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2;
    let t = len2 === 0 ? 0 : ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / len2;
    t = Math.max(0, Math.min(1, t));
    const d = Math.hypot(a[0] + t * (b[0] - a[0]) - p[0], a[1] + t * (b[1] - a[1]) - p[1]);
    if (d <= bestDist) {
      best = i;
      bestDist = d;
    }
  }
  return best;
}
