/** Single-page review workbench, served statically by the curator service. */

import { ApiClient } from "./api.js";
import { PolygonEditor } from "./editor.js";
import { formatProgress, loadProgress } from "./progress.js";
import { ReviewQueue } from "./queue.js";
import type { PixelRing, ProposalView } from "./types.js";

const REVIEW_PHASE = 2;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export class App {
  private api = new ApiClient("");
  private queue!: ReviewQueue;
  private sessionId = "";
  private editors = new Map<string, PolygonEditor>();

  constructor(private root: HTMLElement) {}

  async start(): Promise<void> {
    const reviewer = window.prompt("Reviewer name?", "reviewer") || "reviewer";
    const session = await this.api.openSession(REVIEW_PHASE, ["synth"]);
    this.sessionId = session.session_id;
    this.queue = new ReviewQueue(this.api, this.sessionId, reviewer);
    await this.queue.refresh();
    await this.render();
  }

  private async render(): Promise<void> {
    this.root.replaceChildren();
    this.editors.clear();

    const panel = el("div", "progress-panel");
    const model = await loadProgress(this.api, this.sessionId);
    for (const line of formatProgress(model)) {
      panel.appendChild(el("div", "progress-line", line));
    }
    this.root.appendChild(panel);

    const pending = this.queue.pending;
    if (pending.length === 0) {
      const empty = el("div", "empty-state");
      empty.appendChild(el("h2", undefined, "Queue is empty"));
      empty.appendChild(
        el("p", undefined, "No pending proposals for this session."),
      );
      this.root.appendChild(empty);
      return;
    }
    const cards = el("div", "cards");
    for (const view of pending) {
      cards.appendChild(this.renderCard(view));
    }
    this.root.appendChild(cards);
  }

  private renderCard(view: ProposalView): HTMLElement {
    const card = el("div", "card");
    card.dataset.proposalId = view.proposalId;
    card.appendChild(
      el("div", "card-title", `${view.clipId} — score ${view.score}`),
    );
    const canvas = el("canvas");
    canvas.width = 256;
    canvas.height = 256;
    card.appendChild(canvas);
    const editor = new PolygonEditor(canvas, view);
    this.editors.set(view.proposalId, editor);

    const message = el("div", "message");
    const buttons = el("div", "buttons");
    const mk = (label: string, handler: () => Promise<void> | void) => {
      const b = el("button", undefined, label);
      b.addEventListener("click", () => void handler());
      buttons.appendChild(b);
    };
    mk("Approve", () => this.decide(view.proposalId, "approve", message));
    mk("Save edit", async () => {
      if (!editor.valid) {
        message.textContent = editor.validationMessage;
        return;
      }
      await this.decide(view.proposalId, "edit", message, editor.ring);
    });
    mk("Reject", () => this.decide(view.proposalId, "reject", message));
    mk("Toggle mask", () => editor.toggleMask());
    card.appendChild(buttons);
    card.appendChild(message);
    return card;
  }

  private async decide(
    proposalId: string,
    action: "approve" | "reject" | "edit",
    message: HTMLElement,
    ring?: PixelRing,
  ): Promise<void> {
    const result = await this.queue.submitDecision(proposalId, action, ring);
    if (result.accepted) {
      await this.render(); // card leaves the queue, counters advance
    } else if (result.conflict) {
      message.textContent = "Already decided elsewhere — queue refreshed.";
      await this.render();
    } else {
      message.textContent = result.message;
    }
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const app = new App(document.getElementById("app") as HTMLElement);
  void app.start();
}
