"""Active-learning label curation: versioned phase datasets, a proposal queue
with human decisions, and phase promotion.

Storage is a plain directory: an append-only JSON-lines journal is the source
of truth and replaying it reconstructs the exact store state; clips and masks
live beside it as PNGs. Mutations serialize through one writer lock with
compare-and-set semantics on proposal status, so concurrent reviewers can
race on the same proposal and exactly one decision wins.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .geo import InvalidInputError, ParcelLabel, Polygon, rasterize
from .io import _polygon_from_coords, _polygon_to_coords
from .metrics import seg_score
from .preprocess import (SplitManifest, clip_cell_id, list_clip_ids,
                         load_clip_pair)
from .segmenter import (AdapterError, SegmenterConfig, extract_proposals,
                        infer, mean_prob_under, threshold_map)

PROPOSAL_STATUSES = ("pending", "approved", "edited", "rejected")
SUPPRESS_IOU = 0.5  # proposals overlapping an existing label this much are dropped


class CuratorError(RuntimeError):
    pass


class NotFoundError(CuratorError):
    pass


class ConflictError(CuratorError):
    """Optimistic-concurrency conflict: the proposal was already decided."""


class PendingProposalsError(CuratorError):
    pass


@dataclass
class Proposal:
    proposal_id: str
    clip_id: str
    polygon: Polygon
    score: int
    phase: int
    status: str = "pending"
    decided_by: str | None = None
    decided_at: str | None = None
    geometry_hash: str = ""

    def to_dict(self) -> dict:
        return {
            "proposal_id": self.proposal_id,
            "clip_id": self.clip_id,
            "polygon": _polygon_to_coords(self.polygon),
            "score": self.score,
            "phase": self.phase,
            "status": self.status,
            "decided_by": self.decided_by,
            "decided_at": self.decided_at,
            "geometry_hash": self.geometry_hash,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Proposal":
        return cls(
            proposal_id=d["proposal_id"], clip_id=d["clip_id"],
            polygon=_polygon_from_coords(d["polygon"]), score=d["score"],
            phase=d["phase"], status=d["status"], decided_by=d.get("decided_by"),
            decided_at=d.get("decided_at"), geometry_hash=d.get("geometry_hash", ""),
        )


@dataclass
class Session:
    session_id: str
    phase: int
    cell_ids: "list[str]"
    active: bool = True


@dataclass
class PhaseDataset:
    phase: int
    manifest: SplitManifest
    label_ids: "list[str]" = field(default_factory=list)
    parent_phase: int | None = None
    created_at: str = ""


def polygon_geometry_hash(poly: Polygon) -> str:
    payload = json.dumps(_polygon_to_coords(poly), sort_keys=True).encode()
    return hashlib.sha1(payload).hexdigest()


def _label_to_dict(lab: ParcelLabel) -> dict:
    return {
        "id": lab.id,
        "polygon": _polygon_to_coords(lab.polygon),
        "maturity": lab.maturity,
        "provenance": lab.provenance,
        "phase": lab.phase,
    }


def _label_from_dict(d: dict) -> ParcelLabel:
    return ParcelLabel(id=d["id"], polygon=_polygon_from_coords(d["polygon"]),
                       maturity=d["maturity"], provenance=d["provenance"],
                       phase=d["phase"])


class LabelStore:
    """Event-sourced store rooted at a directory with a journal.jsonl."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.journal_path = self.root / "journal.jsonl"
        self._lock = threading.Lock()
        self.labels: "dict[str, ParcelLabel]" = {}
        self.proposals: "dict[str, Proposal]" = {}
        self.phases: "dict[int, PhaseDataset]" = {}
        self.sessions: "dict[str, Session]" = {}
        if self.journal_path.exists():
            with self.journal_path.open() as f:
                for line in f:
                    if line.strip():
                        self._apply(json.loads(line))

    @property
    def clips_root(self) -> Path:
        return self.root

    # -- journal --------------------------------------------------------------

    def _record(self, event: dict) -> None:
        """Append to the journal, then apply. Caller holds the lock."""
        with self.journal_path.open("a") as f:
            f.write(json.dumps(event, sort_keys=True) + "\n")
            f.flush()
        self._apply(event)

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "phase_created":
            self.phases[event["phase"]] = PhaseDataset(
                phase=event["phase"],
                manifest=SplitManifest.from_dict(event["manifest"]),
                label_ids=list(event.get("label_ids", [])),
                parent_phase=event.get("parent_phase"),
                created_at=event.get("created_at", ""),
            )
        elif kind == "label_added":
            lab = _label_from_dict(event["label"])
            self.labels[lab.id] = lab
            phase = self.phases.get(lab.phase)
            if phase is not None and lab.id not in phase.label_ids:
                phase.label_ids.append(lab.id)
        elif kind == "session_opened":
            s = Session(session_id=event["session_id"], phase=event["phase"],
                        cell_ids=list(event["cell_ids"]))
            self.sessions[s.session_id] = s
        elif kind == "proposal_enqueued":
            p = Proposal.from_dict(event["proposal"])
            self.proposals[p.proposal_id] = p
        elif kind == "decision":
            p = self.proposals[event["proposal_id"]]
            p.status = event["status"]
            p.decided_by = event["reviewer"]
            p.decided_at = event["decided_at"]
            if event.get("polygon") is not None:
                p.polygon = _polygon_from_coords(event["polygon"])
            if p.status in ("approved", "edited"):
                lab = ParcelLabel(
                    id=f"label_{p.proposal_id}", polygon=p.polygon,
                    maturity="unknown", provenance="model_approved",
                    phase=p.phase)
                self.labels[lab.id] = lab
        else:
            raise InvalidInputError(f"unknown journal event {kind!r}")

    def state_digest(self) -> str:
        """Canonical hash of the reconstructed state, for replay checks."""
        state = {
            "labels": sorted((_label_to_dict(v) for v in self.labels.values()),
                             key=lambda d: d["id"]),
            "proposals": sorted((p.to_dict() for p in self.proposals.values()),
                                key=lambda d: d["proposal_id"]),
            "phases": {
                str(k): {
                    "manifest": v.manifest.to_dict(),
                    "label_ids": sorted(v.label_ids),
                    "parent_phase": v.parent_phase,
                    "created_at": v.created_at,
                }
                for k, v in sorted(self.phases.items())
            },
        }
        return hashlib.sha256(
            json.dumps(state, sort_keys=True).encode()).hexdigest()

    # -- setup ----------------------------------------------------------------

    def create_phase(self, manifest: SplitManifest,
                     labels: "list[ParcelLabel] | None" = None,
                     parent_phase: int | None = None) -> PhaseDataset:
        with self._lock:
            if manifest.phase in self.phases:
                raise ConflictError(f"phase {manifest.phase} already exists")
            if parent_phase is not None:
                self._check_test_split(self.phases[parent_phase].manifest, manifest)
            self._record({
                "event": "phase_created",
                "phase": manifest.phase,
                "manifest": manifest.to_dict(),
                "label_ids": [lab.id for lab in labels or []],
                "parent_phase": parent_phase,
                "created_at": _now(),
            })
            for lab in labels or []:
                self._record({"event": "label_added", "label": _label_to_dict(lab)})
            return self.phases[manifest.phase]

    def add_label(self, label: ParcelLabel) -> None:
        with self._lock:
            self._record({"event": "label_added", "label": _label_to_dict(label)})

    @staticmethod
    def _check_test_split(parent: SplitManifest, child: SplitManifest) -> None:
        if sorted(parent.clip_ids("test")) != sorted(child.clip_ids("test")):
            raise InvalidInputError("test split must be identical across phases")

    # -- sessions & proposals ---------------------------------------------------

    def open_session(self, phase: int, cell_ids: "list[str]") -> Session:
        with self._lock:
            for s in self.sessions.values():
                if s.phase == phase and s.active:
                    return s  # one active session per phase
            session = Session(session_id=uuid.uuid4().hex[:12], phase=phase,
                              cell_ids=[str(c) for c in cell_ids])
            self._record({
                "event": "session_opened",
                "session_id": session.session_id,
                "phase": session.phase,
                "cell_ids": session.cell_ids,
            })
            return self.sessions[session.session_id]

    def session_progress(self, session_id: str) -> dict:
        session = self.sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"unknown session {session_id}")
        props = [p for p in self.proposals.values() if p.phase == session.phase]
        pending = sum(1 for p in props if p.status == "pending")
        return {"pending": pending, "decided": len(props) - pending,
                "total": len(props)}

    def generate_proposals(self, session_id: str, cfg: SegmenterConfig,
                           clips_root=None) -> "tuple[int, list[dict]]":
        """Segment the session's unlabeled clips and enqueue proposals.

        Returns (enqueued count, per-clip error records). Proposals that
        duplicate an earlier geometry or overlap an existing label at
        IoU > 0.5 are suppressed.
        """
        session = self.sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"unknown session {session_id}")
        clips_root = Path(clips_root) if clips_root else self.clips_root
        existing_hashes = {(p.clip_id, p.geometry_hash) for p in self.proposals.values()}
        enqueued = 0
        errors = []
        for clip_id in list_clip_ids(clips_root):
            if clip_cell_id(clip_id) not in session.cell_ids:
                continue
            pair = load_clip_pair(clips_root, clip_id)
            try:
                pmap = infer(pair.image, cfg, clip_id=clip_id)
            except AdapterError as exc:
                errors.append({"clip_id": clip_id, "error": str(exc)})
                continue
            proposals = extract_proposals(
                pmap, cfg, pair.image.transform, phase=session.phase,
                id_prefix=f"{clip_id}_prop")
            w, h = pair.image.width, pair.image.height
            label_masks = [
                rasterize([lab.polygon], pair.image.transform, w, h)
                for lab in self.labels.values()
                if lab.provenance in ("expert", "model_approved")
            ]
            for prop_label in proposals:
                pmask = rasterize([prop_label.polygon], pair.image.transform, w, h)
                if any(seg_score(pmask, lm).iou > SUPPRESS_IOU for lm in label_masks):
                    continue
                ghash = polygon_geometry_hash(prop_label.polygon)
                if (clip_id, ghash) in existing_hashes:
                    continue
                existing_hashes.add((clip_id, ghash))
                proposal = Proposal(
                    proposal_id=uuid.uuid4().hex[:12],
                    clip_id=clip_id,
                    polygon=prop_label.polygon,
                    score=mean_prob_under(pmap, pmask),
                    phase=session.phase,
                    geometry_hash=ghash,
                )
                with self._lock:
                    self._record({"event": "proposal_enqueued",
                                  "proposal": proposal.to_dict()})
                enqueued += 1
        return enqueued, errors

    def enqueue_proposal(self, proposal: Proposal) -> None:
        with self._lock:
            self._record({"event": "proposal_enqueued",
                          "proposal": proposal.to_dict()})

    def list_proposals(self, status: str | None = None,
                       phase: int | None = None) -> "list[Proposal]":
        out = [p for p in self.proposals.values()
               if (status is None or p.status == status)
               and (phase is None or p.phase == phase)]
        return sorted(out, key=lambda p: p.proposal_id)

    def decide(self, proposal_id: str, action: str, reviewer: str,
               polygon: Polygon | None = None) -> Proposal:
        """Apply one reviewer decision; loses any race with an earlier one."""
        if action not in ("approve", "reject", "edit"):
            raise InvalidInputError(f"unknown action {action!r}")
        if action == "edit":
            if polygon is None:
                raise InvalidInputError("edit decisions need a replacement polygon")
            if not polygon.is_simple():
                raise InvalidInputError("edited polygon is self-intersecting")
        with self._lock:
            prop = self.proposals.get(proposal_id)
            if prop is None:
                raise NotFoundError(f"unknown proposal {proposal_id}")
            if prop.status != "pending":
                raise ConflictError(
                    f"proposal {proposal_id} already {prop.status}")
            status = {"approve": "approved", "reject": "rejected",
                      "edit": "edited"}[action]
            self._record({
                "event": "decision",
                "proposal_id": proposal_id,
                "status": status,
                "reviewer": reviewer,
                "decided_at": _now(),
                "polygon": _polygon_to_coords(polygon) if polygon else None,
            })
            return self.proposals[proposal_id]

    # -- phases ---------------------------------------------------------------

    def promote_phase(self, from_phase: int,
                      new_entries: "list[dict] | None" = None,
                      allow_pending: bool = False) -> PhaseDataset:
        """Freeze phase ``from_phase + 1`` from the current working set.

        Approved/edited proposal clips are appended to the manifest (their
        split comes from ``new_entries`` when given, defaulting to train);
        extra entries (e.g. synthetic clips) are appended verbatim. The test
        split is carried over unchanged.
        """
        if from_phase not in (1, 2):
            raise InvalidInputError("can only promote from phase 1 or 2")
        with self._lock:
            if from_phase not in self.phases:
                raise NotFoundError(f"phase {from_phase} does not exist")
            pending = [p for p in self.proposals.values()
                       if p.phase == from_phase + 1 and p.status == "pending"]
            if pending and not allow_pending:
                raise PendingProposalsError(
                    f"{len(pending)} proposals still pending; decide or abandon them")

            parent = self.phases[from_phase]
            entries = [dict(e) for e in parent.manifest.entries]
            present = {e["clip_id"] for e in entries}
            split_hint = {e["clip_id"]: e["split"] for e in (new_entries or [])}
            extra = [e for e in (new_entries or []) if e["clip_id"] not in present
                     and e.get("provenance") != "model_approved"]

            approved_clips = sorted({
                p.clip_id for p in self.proposals.values()
                if p.phase == from_phase + 1 and p.status in ("approved", "edited")
            })
            for clip_id in approved_clips:
                if clip_id in present:
                    continue
                entries.append({
                    "clip_id": clip_id,
                    "split": split_hint.get(clip_id, "train"),
                    "provenance": "model_approved",
                })
                present.add(clip_id)
            for e in extra:
                if e["clip_id"] in present:
                    continue
                entries.append({"clip_id": e["clip_id"], "split": e["split"],
                                "provenance": e.get("provenance", "expert")})
                present.add(e["clip_id"])

            manifest = SplitManifest(phase=from_phase + 1, entries=entries)
            self._check_test_split(parent.manifest, manifest)
            label_ids = sorted(set(parent.label_ids)
                               | {lab.id for lab in self.labels.values()
                                  if lab.phase == from_phase + 1})
            self._record({
                "event": "phase_created",
                "phase": from_phase + 1,
                "manifest": manifest.to_dict(),
                "label_ids": label_ids,
                "parent_phase": from_phase,
                "created_at": _now(),
            })
            return self.phases[from_phase + 1]

    def dataset_report(self, phase: int) -> dict:
        ds = self.phases.get(phase)
        if ds is None:
            raise NotFoundError(f"phase {phase} does not exist")
        counts = ds.manifest.counts
        provenance: "dict[str, int]" = {}
        for e in ds.manifest.entries:
            provenance[e.get("provenance", "expert")] = \
                provenance.get(e.get("provenance", "expert"), 0) + 1
        return {
            "phase": phase,
            "counts": counts,
            "total": ds.manifest.total,
            "provenance": provenance,
            "labels": len(ds.label_ids),
            "parent_phase": ds.parent_phase,
        }


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()) + f".{int(time.time_ns() % 1_000_000_000):09d}"
