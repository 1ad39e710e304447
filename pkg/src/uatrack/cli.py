"""Command-line surface: simulate / track / eval / augment / train / stats.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import formats
from .augment import (augment_detections, build_plan, default_jitter, sample,
                      source_anchor_weights, target_anchor_weights)
from .contrastive import TrainConfig, train_embedder
from .errors import UatrackError
from .metrics import id_switches, pseudo_accuracy, uncertainty_separation
from .simulator import ScenarioConfig, generate
from .tracker import Tracklet, TrackerConfig, track_sequence
from .uncertainty import UncertaintyMargins

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    p = _Parser(prog="uatrack", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic scenario")
    sim.add_argument("--config", help="scenario config file (key = value)")
    sim.add_argument("--out", required=True, help="output directory")

    trk = sub.add_parser("track", help="run the tracker over a bundle")
    trk.add_argument("--dets", required=True)
    trk.add_argument("--embs", required=True)
    trk.add_argument("--out", required=True)
    trk.add_argument("--utl", choices=["on", "off"], default="on")
    trk.add_argument("--m1", type=float, default=0.5)
    trk.add_argument("--m2", type=float, default=0.05)
    trk.add_argument("--beta", type=float, default=0.1)
    trk.add_argument("--K", type=int, default=5)
    trk.add_argument("--log")

    ev = sub.add_parser("eval", help="evaluate a run against ground truth")
    ev.add_argument("--results", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--log", required=True)
    ev.add_argument("--report", required=True)
    ev.add_argument("--max-age", type=int, default=100)

    aug = sub.add_parser("augment", help="emit a tracklet-guided augmentation plan")
    aug.add_argument("--bundle", required=True)
    aug.add_argument("--frame", type=int, required=True)
    aug.add_argument("--seed", type=int, required=True)
    aug.add_argument("--jitter", type=float, default=None)

    tr = sub.add_parser("train", help="train the linear embedder on a bundle")
    tr.add_argument("--bundle", required=True)
    tr.add_argument("--epochs", type=int, required=True)
    tr.add_argument("--lr", type=float, required=True)
    tr.add_argument("--seed", type=int, required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--sampling", choices=["uncertainty", "random"],
                    default="uncertainty")

    st = sub.add_parser("stats", help="print the uncertainty separation report")
    st.add_argument("--log", required=True)
    st.add_argument("--gt", required=True)
    return p


def _load_bundle(dets_path, embs_path):
    frames = formats.read_detections(dets_path)
    frames, _warned = formats.read_embeddings(embs_path, frames)
    return frames


def _tracklets_from_log(log) -> list[Tracklet]:
    """Rebuild tracklet composition (frame, det_index, delta) from a log.

    Boxes/embeddings are not in the log; the metrics only need identity and
    delta, so placeholder geometry is used."""
    from .geometry import BoundingBox
    from .tracker import TrackRecord
    by_id: dict[int, Tracklet] = {}
    box = BoundingBox(0.0, 0.0, 1.0, 1.0)
    for row in sorted(log, key=lambda r: (r.frame, r.track_id)):
        rec = TrackRecord(frame=row.frame, det_index=row.det_index, box=box,
                          embedding=np.zeros(1), delta=row.delta)
        if row.track_id in by_id:
            by_id[row.track_id].append(rec)
        else:
            by_id[row.track_id] = Tracklet(row.track_id, rec)
    return [by_id[k] for k in sorted(by_id)]


def cmd_simulate(args) -> int:
    cfg = formats.parse_scenario_config(args.config) if args.config else ScenarioConfig()
    frames, gt = generate(cfg)
    os.makedirs(args.out, exist_ok=True)
    indexed = [(i + 1, dets) for i, dets in enumerate(frames)]
    formats.write_detections(indexed, os.path.join(args.out, "det.txt"))
    formats.write_vectors(indexed, os.path.join(args.out, "emb.csv"), "embedding")
    formats.write_vectors(indexed, os.path.join(args.out, "raw.csv"), "raw")
    formats.write_ground_truth(gt, os.path.join(args.out, "gt.txt"))
    formats.write_scenario_config(cfg, os.path.join(args.out, "config.txt"))
    return 0


def cmd_track(args) -> int:
    frames = _load_bundle(args.dets, args.embs)
    cfg = TrackerConfig(margins=UncertaintyMargins(m1=args.m1, m2=args.m2),
                        beta=args.beta, K=args.K, utl_enabled=args.utl == "on")
    tracklets, log = track_sequence(frames, cfg)
    formats.write_results(tracklets, args.out)
    if args.log:
        formats.write_log(log, args.log)
    return 0


def cmd_eval(args) -> int:
    if not os.path.exists(args.results):
        raise UatrackError(f"results file not found: {args.results}")
    gt = formats.read_ground_truth(args.gt)
    log = formats.read_log(args.log)
    tracklets = _tracklets_from_log(log)
    curve = pseudo_accuracy(tracklets, gt, max_age=args.max_age)
    sep = uncertainty_separation(log, gt)
    ids = id_switches(tracklets, gt)
    lines = [f"id_switches: {ids}"] + sep.lines()
    lines += [f"pseudo_accuracy {s}: {acc:.6f}" for s, acc in curve.points]
    formats.atomic_write(args.report, lines)
    for line in lines[:7]:
        print(line)
    return 0


def cmd_augment(args) -> int:
    frames = _load_bundle(os.path.join(args.bundle, "det.txt"),
                          os.path.join(args.bundle, "emb.csv"))
    upto = [fd for fd in frames if fd[0] <= args.frame]
    tracklets, _log = track_sequence(upto, TrackerConfig())
    rng = np.random.default_rng(args.seed)
    sw = source_anchor_weights(tracklets, args.frame)
    anchor_id = sample(sw, rng)
    anchor = next(t for t in tracklets if t.id == anchor_id)
    target = sample(target_anchor_weights(anchor, args.frame), rng)
    jitter = args.jitter if args.jitter is not None else default_jitter(
        anchor.box_at(args.frame))
    plan = build_plan(anchor, args.frame, target, jitter, rng)
    t = plan.transform
    print(f"source_track_id: {plan.source_track_id}")
    print(f"target_frame: {plan.target_frame}")
    print("transform: " + " ".join(f"{v:.6f}" for v in
                                   (t.m11, t.m12, t.m13, t.m21, t.m22, t.m23)))
    dets = dict(frames)[args.frame]
    for d in augment_detections(dets, plan):
        print(f"box {d.det_index}: {d.box.cx:.6f} {d.box.cy:.6f} "
              f"{d.box.w:.6f} {d.box.h:.6f}")
    return 0


def cmd_train(args) -> int:
    frames = _load_bundle(os.path.join(args.bundle, "det.txt"),
                          os.path.join(args.bundle, "emb.csv"))
    frames = formats.read_raw_features(os.path.join(args.bundle, "raw.csv"), frames)
    det_lists = [dets for _, dets in frames]
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, seed=args.seed,
                      anchor_sampling=args.sampling)
    embedder, losses = train_embedder(det_lists, cfg)
    embedder.save(args.out)
    for i, loss in enumerate(losses, start=1):
        print(f"epoch {i}: mean_loss {loss:.6f}")
    return 0


def cmd_stats(args) -> int:
    gt = formats.read_ground_truth(args.gt)
    log = formats.read_log(args.log)
    for line in uncertainty_separation(log, gt).lines():
        print(line)
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "track": cmd_track,
    "eval": cmd_eval,
    "augment": cmd_augment,
    "train": cmd_train,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (UatrackError, OSError) as exc:
        print(f"uatrack {args.command}: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
