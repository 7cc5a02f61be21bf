/** Review queue state machine: optimistic decisions with rollback on 409.
 *
 * - One decision per proposal, ever (idempotency guard keyed by proposal_id);
 *   a second submission is refused locally before any network call.
 * - Decisions apply optimistically; a 409 (someone else decided first) rolls
 *   the card back and refreshes the queue from the server.
 * - Edit submissions are validated client-side (closed, simple ring) so bad
 *   geometry never reaches the server.
 */

import { ApiClient, ApiError } from "./api.js";
import { ringToGeoJson, ringToPixels } from "./geo.js";
import { validateRing } from "./polygon.js";
import type {
  DecisionAction,
  PixelRing,
  ProposalDto,
  ProposalStatus,
  ProposalView,
} from "./types.js";

export interface DecisionResult {
  accepted: boolean;
  conflict: boolean;
  message: string;
}

function toView(dto: ProposalDto): ProposalView {
  if (!dto.transform) {
    throw new Error(`proposal ${dto.proposal_id} has no clip transform`);
  }
  return {
    proposalId: dto.proposal_id,
    clipId: dto.clip_id,
    clipUrl: dto.clip_url,
    maskUrl: dto.mask_url,
    score: dto.score,
    status: dto.status,
    vertices: ringToPixels(dto.transform, dto.polygon.coordinates[0]),
    transform: dto.transform,
  };
}

export class ReviewQueue {
  proposals: ProposalView[] = [];
  private submitted = new Set<string>();
  private inFlight = new Set<string>();
  refreshCount = 0;

  constructor(
    private api: ApiClient,
    private sessionId: string,
    public reviewer: string,
  ) {}

  get pending(): ProposalView[] {
    return this.proposals.filter((p) => p.status === "pending");
  }

  async refresh(): Promise<void> {
    const views: ProposalView[] = [];
    let page = 1;
    for (;;) {
      const body = await this.api.fetchProposals(this.sessionId, page);
      views.push(...body.proposals.map(toView));
      if (views.length >= body.total || body.proposals.length === 0) break;
      page += 1;
    }
    this.proposals = views;
    this.refreshCount += 1;
  }

  find(proposalId: string): ProposalView | undefined {
    return this.proposals.find((p) => p.proposalId === proposalId);
  }

  async submitDecision(
    proposalId: string,
    action: DecisionAction,
    editedRing?: PixelRing,
  ): Promise<DecisionResult> {
    const view = this.find(proposalId);
    if (!view) {
      return { accepted: false, conflict: false, message: "unknown proposal" };
    }
    if (this.submitted.has(proposalId) || this.inFlight.has(proposalId)) {
      return {
        accepted: false,
        conflict: false,
        message: "decision already submitted for this proposal",
      };
    }
    let polygon: number[][][] | undefined;
    if (action === "edit") {
      if (!editedRing) {
        return { accepted: false, conflict: false, message: "edit needs a polygon" };
      }
      const check = validateRing(editedRing);
      if (!check.ok) {
        return { accepted: false, conflict: false, message: check.message };
      }
      polygon = ringToGeoJson(view.transform, editedRing);
    }

    // optimistic update: the card leaves the pending queue immediately
    const previous: ProposalStatus = view.status;
    const optimistic: ProposalStatus =
      action === "approve" ? "approved" : action === "reject" ? "rejected" : "edited";
    view.status = optimistic;
    if (action === "edit" && editedRing) view.vertices = editedRing;
    this.inFlight.add(proposalId);
    try {
      await this.api.decide(proposalId, action, this.reviewer, polygon);
      this.submitted.add(proposalId);
      return { accepted: true, conflict: false, message: "" };
    } catch (err) {
      view.status = previous; // roll back the optimistic update
      if (err instanceof ApiError && err.status === 409) {
        this.submitted.add(proposalId); // decided elsewhere; never retry
        await this.refresh();
        return { accepted: false, conflict: true, message: err.detail };
      }
      throw err;
    } finally {
      this.inFlight.delete(proposalId);
    }
  }
}
