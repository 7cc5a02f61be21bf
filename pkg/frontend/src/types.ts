/** Shared domain types for the review workbench. */

/** Affine geotransform sidecar shipped next to each clip PNG. */
export interface ClipTransform {
  origin_x: number;
  origin_y: number;
  pixel_size_x: number;
  pixel_size_y: number;
  crs_id: string;
}

/** A point in clip pixel space: [col, row]. */
export type PixelPoint = [number, number];

/** A point in map space: [x, y]. */
export type MapPoint = [number, number];

/** Closed ring of pixel-space vertices (first point repeated last). */
export type PixelRing = PixelPoint[];

export type ProposalStatus = "pending" | "approved" | "edited" | "rejected";

export type DecisionAction = "approve" | "reject" | "edit";

/** Proposal as served by GET /sessions/{id}/proposals. */
export interface ProposalDto {
  proposal_id: string;
  clip_id: string;
  status: ProposalStatus;
  score: number;
  polygon: { type: "Polygon"; coordinates: number[][][] };
  clip_url: string;
  mask_url: string;
  transform: ClipTransform | null;
}

/** Proposal prepared for rendering: geometry converted to pixel space. */
export interface ProposalView {
  proposalId: string;
  clipId: string;
  clipUrl: string;
  maskUrl: string;
  score: number;
  status: ProposalStatus;
  /** Exterior ring in clip pixel coordinates, closed. */
  vertices: PixelRing;
  transform: ClipTransform;
}

export interface SessionProgress {
  pending: number;
  decided: number;
  total: number;
}

export interface PhaseReport {
  phase: number;
  counts: { train: number; val: number; test: number };
  total: number;
  provenance: Record<string, number>;
  labels: number;
  parent_phase: number | null;
}
