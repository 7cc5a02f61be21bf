/** Progress panel model: session counters plus per-phase dataset sizes. */

import { ApiClient } from "./api.js";
import type { PhaseReport, SessionProgress } from "./types.js";

export interface ProgressModel {
  progress: SessionProgress;
  reports: PhaseReport[];
  stale: boolean;
}

export async function loadProgress(
  api: ApiClient,
  sessionId: string,
  phases: number[] = [1, 2, 3],
): Promise<ProgressModel> {
  let progress: SessionProgress = { pending: 0, decided: 0, total: 0 };
  let stale = false;
  try {
    progress = await api.getProgress(sessionId);
  } catch {
    stale = true;
  }
  const reports: PhaseReport[] = [];
  for (const phase of phases) {
    try {
      reports.push(await api.getReport(phase));
    } catch {
      /* phase not created yet */
    }
  }
  return { progress, reports, stale };
}

export function formatProgress(model: ProgressModel): string[] {
  const lines = [
    `Reviewed ${model.progress.decided} / ${model.progress.total} proposals` +
      ` (${model.progress.pending} pending)`,
  ];
  for (const r of model.reports) {
    lines.push(
      `Phase ${r.phase}: ${r.total} clips ` +
        `(train ${r.counts.train}, val ${r.counts.val}, test ${r.counts.test}), ` +
        `${r.labels} labels`,
    );
  }
  if (model.stale) lines.push("progress data may be stale (fetch failed)");
  return lines;
}
