/** Pixel <-> map conversion through the clip's geotransform sidecar.
 *
 * Mirrors the server's convention: map x grows with column, map y shrinks
 * with row (pixel_size_y is negative), origin at the clip's top-left corner.
 */

import type { ClipTransform, MapPoint, PixelPoint, PixelRing } from "./types.js";

export function pixelToMap(t: ClipTransform, col: number, row: number): MapPoint {
  return [t.origin_x + col * t.pixel_size_x, t.origin_y + row * t.pixel_size_y];
}

export function mapToPixel(t: ClipTransform, x: number, y: number): PixelPoint {
  // + 0 normalizes the -0 that division by a negative pixel size produces
  return [
    (x - t.origin_x) / t.pixel_size_x + 0,
    (y - t.origin_y) / t.pixel_size_y + 0,
  ];
}

/** GeoJSON exterior ring (map coords) -> closed pixel ring. */
export function ringToPixels(t: ClipTransform, ring: number[][]): PixelRing {
  return ring.map(([x, y]) => mapToPixel(t, x, y));
}

/** Closed pixel ring -> GeoJSON Polygon coordinates (exterior only). */
export function ringToGeoJson(t: ClipTransform, ring: PixelRing): number[][][] {
  return [ring.map(([c, r]) => pixelToMap(t, c, r))];
}

/** Max round-trip error in pixels for a ring; the sidecar transforms we use
 * are exact binary fractions, so this should be ~0 and must stay < 0.5. */
export function roundTripErrorPx(t: ClipTransform, ring: PixelRing): number {
  let worst = 0;
  for (const [c, r] of ring) {
    const [x, y] = pixelToMap(t, c, r);
    const [c2, r2] = mapToPixel(t, x, y);
    worst = Math.max(worst, Math.abs(c2 - c), Math.abs(r2 - r));
  }
  return worst;
}
