/** Canvas polygon editor: vertex drag, insert-on-edge, mask overlay toggle. */

import {
  dragVertex,
  hitTestEdge,
  hitTestVertex,
  insertOnEdge,
  validateRing,
} from "./polygon.js";
import type { PixelPoint, PixelRing, ProposalView } from "./types.js";

export class PolygonEditor {
  ring: PixelRing;
  showMask = false;
  private ctx: CanvasRenderingContext2D;
  private clipImage = new Image();
  private maskImage = new Image();
  private dragging = -1;
  onChange: (ring: PixelRing) => void = () => {};

  constructor(
    private canvas: HTMLCanvasElement,
    private view: ProposalView,
  ) {
    this.ring = view.vertices.map(([c, r]) => [c, r] as PixelPoint);
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
    this.clipImage.onload = () => this.draw();
    this.maskImage.onload = () => this.draw();
    this.clipImage.src = view.clipUrl;
    this.maskImage.src = view.maskUrl;
    canvas.addEventListener("pointerdown", (e) => this.onDown(e));
    canvas.addEventListener("pointermove", (e) => this.onMove(e));
    canvas.addEventListener("pointerup", () => this.onUp());
    canvas.addEventListener("dblclick", (e) => this.onDouble(e));
  }

  get valid(): boolean {
    return validateRing(this.ring).ok;
  }

  get validationMessage(): string {
    return validateRing(this.ring).message;
  }

  toggleMask(): void {
    this.showMask = !this.showMask;
    this.draw();
  }

  private eventPoint(e: MouseEvent): PixelPoint {
    const rect = this.canvas.getBoundingClientRect();
    const sx = this.canvas.width / rect.width;
    const sy = this.canvas.height / rect.height;
    return [(e.clientX - rect.left) * sx, (e.clientY - rect.top) * sy];
  }

  private onDown(e: PointerEvent): void {
    this.dragging = hitTestVertex(this.ring, this.eventPoint(e));
    if (this.dragging >= 0) this.canvas.setPointerCapture(e.pointerId);
  }

  private onMove(e: PointerEvent): void {
    if (this.dragging < 0) return;
    this.ring = dragVertex(this.ring, this.dragging, this.eventPoint(e));
    this.draw();
  }

  private onUp(): void {
    if (this.dragging < 0) return;
    this.dragging = -1;
    this.onChange(this.ring);
    this.draw();
  }

  private onDouble(e: MouseEvent): void {
    const p = this.eventPoint(e);
    const edge = hitTestEdge(this.ring, p);
    if (edge >= 0) {
      this.ring = insertOnEdge(this.ring, edge, p);
      this.onChange(this.ring);
      this.draw();
    }
  }

  draw(): void {
    const { width, height } = this.canvas;
    this.ctx.clearRect(0, 0, width, height);
    if (this.clipImage.complete && this.clipImage.naturalWidth > 0) {
      this.ctx.drawImage(this.clipImage, 0, 0, width, height);
    }
    if (this.showMask && this.maskImage.complete && this.maskImage.naturalWidth > 0) {
      this.ctx.globalAlpha = 0.35;
      this.ctx.drawImage(this.maskImage, 0, 0, width, height);
      this.ctx.globalAlpha = 1.0;
    }
    const ok = this.valid;
    this.ctx.strokeStyle = ok ? "#27b36a" : "#e04545";
    this.ctx.lineWidth = 2;
    this.ctx.beginPath();
    this.ring.forEach(([c, r], i) => {
      if (i === 0) this.ctx.moveTo(c, r);
      else this.ctx.lineTo(c, r);
    });
    this.ctx.stroke();
    this.ctx.fillStyle = "#ffffff";
    for (let i = 0; i < this.ring.length - 1; i++) {
      const [c, r] = this.ring[i];
      this.ctx.beginPath();
      this.ctx.arc(c, r, 4, 0, 2 * Math.PI);
      this.ctx.fill();
      this.ctx.stroke();
    }
    void this.view;
  }
}
