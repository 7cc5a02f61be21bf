"""Development server with a seeded demo store, used by the review UI tests.

``python -m agavescan.devserver --port 8787 --store /tmp/demo`` builds a
small store with one phase-1 dataset and three pending proposals on a
synthetic clip, then serves the curator API on the given port.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from .curator import LabelStore, Proposal, polygon_geometry_hash
from .geo import ParcelLabel, Polygon
from .preprocess import SplitManifest, save_clip_pair
from .segmenter import SegmenterConfig
from .synth import SYNTH_TRANSFORM, generate_batch


def _rect(c0, r0, c1, r1) -> Polygon:
    tf = SYNTH_TRANSFORM
    return Polygon(tuple(tf.pixel_to_map(c, r)
                         for c, r in [(c0, r0), (c1, r0), (c1, r1), (c0, r1), (c0, r0)]))


def seed_store(root) -> LabelStore:
    store = LabelStore(root)
    pairs, _ = generate_batch(2, seed=11, profile="agave")
    for pair in pairs:
        save_clip_pair(store.clips_root, pair)
    clip_id = pairs[0].clip_id

    manifest = SplitManifest(phase=1, entries=[
        {"clip_id": pairs[0].clip_id, "split": "train", "provenance": "expert"},
        {"clip_id": pairs[1].clip_id, "split": "val", "provenance": "expert"},
    ])
    expert = ParcelLabel(id="expert_0", polygon=_rect(8, 8, 40, 40),
                         maturity="mature", provenance="expert", phase=1)
    store.create_phase(manifest, labels=[expert])
    store.open_session(2, ["synth"])
    for i, (c0, r0) in enumerate([(60, 60), (120, 60), (60, 140)]):
        poly = _rect(c0, r0, c0 + 48, r0 + 48)
        store.enqueue_proposal(Proposal(
            proposal_id=f"demo_prop_{i}",
            clip_id=clip_id,
            polygon=poly,
            score=200 - 10 * i,
            phase=2,
            geometry_hash=polygon_geometry_hash(poly),
        ))
    return store


def main(argv=None) -> None:
    import uvicorn

    from .service import create_app

    ap = argparse.ArgumentParser()
    ap.add_argument("--store", required=True)
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8787)
    ap.add_argument("--ui-dir", default=None)
    args = ap.parse_args(argv)

    store = seed_store(Path(args.store))
    app = create_app(store, SegmenterConfig(), ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
