"""Diagnostic statistics over a completed tracking run.

Correctness of an association is anchored to the tracklet's birth identity:
a record is correct iff its detection's true id equals the true id of the
detection that founded the tracklet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingGroundTruth
from .tracker import LogRow, STAGE_BIRTH, Tracklet


def gt_index(gt) -> dict[tuple[int, int], int]:
    return {(g.frame, g.det_index): g.true_id for g in gt}


def _resolve(lookup, frame: int, det_index: int) -> int:
    try:
        return lookup[(frame, det_index)]
    except KeyError:
        raise MissingGroundTruth(f"no ground truth for (frame={frame}, det={det_index})")


@dataclass
class AccuracyCurve:
    points: list  # (tracklet age s, accuracy) with ages strictly increasing

    def at(self, age: int) -> float:
        for s, acc in self.points:
            if s == age:
                return acc
        raise KeyError(age)


@dataclass
class SeparationReport:
    wrong_total: int
    wrong_flagged_uncertain: int
    correct_total: int
    correct_flagged_certain: int

    @property
    def wrong_uncertain_rate(self) -> float:
        return self.wrong_flagged_uncertain / self.wrong_total if self.wrong_total else 0.0

    @property
    def correct_certain_rate(self) -> float:
        return self.correct_flagged_certain / self.correct_total if self.correct_total else 0.0

    def lines(self) -> list[str]:
        return [
            f"wrong_total: {self.wrong_total}",
            f"wrong_flagged_uncertain: {self.wrong_flagged_uncertain}",
            f"wrong_uncertain_rate: {self.wrong_uncertain_rate:.6f}",
            f"correct_total: {self.correct_total}",
            f"correct_flagged_certain: {self.correct_flagged_certain}",
            f"correct_certain_rate: {self.correct_certain_rate:.6f}",
        ]


def pseudo_accuracy(tracklets: list[Tracklet], gt, max_age: int) -> AccuracyCurve:
    """Birth-anchored identity accuracy as a function of tracklet age.

    accuracy(s) aggregates, over every tracklet of age >= s, whether its
    record at age s still carries the birth identity (age 0 = birth)."""
    lookup = gt_index(gt)
    correct = np.zeros(max_age + 1)
    total = np.zeros(max_age + 1)
    for trk in tracklets:
        birth = trk.records[0]
        birth_id = _resolve(lookup, birth.frame, birth.det_index)
        for age, rec in enumerate(trk.records[:max_age + 1]):
            total[age] += 1
            if _resolve(lookup, rec.frame, rec.det_index) == birth_id:
                correct[age] += 1
    points = [(s, correct[s] / total[s]) for s in range(1, max_age + 1) if total[s] > 0]
    return AccuracyCurve(points=points)


def uncertainty_separation(log: list[LogRow], gt) -> SeparationReport:
    """Fig-3a-style split: how many wrong associations carry delta > 0 and
    how many correct ones carry delta <= 0. Birth rows define each track's
    reference identity."""
    lookup = gt_index(gt)
    birth_id: dict[int, int] = {}
    for row in log:
        if row.stage == STAGE_BIRTH and row.track_id not in birth_id:
            birth_id[row.track_id] = _resolve(lookup, row.frame, row.det_index)
    wrong_total = wrong_flagged = correct_total = correct_flagged = 0
    for row in log:
        if row.stage == STAGE_BIRTH:
            continue
        true_id = _resolve(lookup, row.frame, row.det_index)
        if row.track_id not in birth_id:
            raise MissingGroundTruth(f"no birth row for track {row.track_id}")
        if true_id == birth_id[row.track_id]:
            correct_total += 1
            if row.delta <= 0:
                correct_flagged += 1
        else:
            wrong_total += 1
            if row.delta > 0:
                wrong_flagged += 1
    return SeparationReport(wrong_total=wrong_total,
                            wrong_flagged_uncertain=wrong_flagged,
                            correct_total=correct_total,
                            correct_flagged_certain=correct_flagged)


def id_switches(tracklets: list[Tracklet], gt) -> int:
    """Transitions of the assigned tracklet id along each GT trajectory."""
    lookup = gt_index(gt)
    per_traj: dict[int, list[tuple[int, int]]] = {}
    for trk in tracklets:
        for rec in trk.records:
            true_id = _resolve(lookup, rec.frame, rec.det_index)
            per_traj.setdefault(true_id, []).append((rec.frame, trk.id))
    switches = 0
    for obs in per_traj.values():
        obs.sort()
        for (_, a), (_, b) in zip(obs, obs[1:]):
            if a != b:
                switches += 1
    return switches


@dataclass
class SimilarityDeltaSummary:
    count: int
    mean: float
    fraction_positive: float
    histogram: list  # (bin_low, bin_high, count)

    def lines(self) -> list[str]:
        out = [f"count: {self.count}",
               f"mean_delta: {self.mean:.6f}",
               f"fraction_positive: {self.fraction_positive:.6f}"]
        out += [f"bin {lo:.3f} {hi:.3f}: {c}" for lo, hi, c in self.histogram]
        return out


def similarity_delta(frames, gt, embedder=None, bins: int = 20) -> SimilarityDeltaSummary:
    """Margin between the true next-frame match (c+) and the strongest
    distractor (c-): positive means the embedding separates identities.

    With an embedder given, embeddings are recomputed from raw features;
    otherwise the detections' stored embeddings are used."""
    lookup = gt_index(gt)

    def emb(det):
        return embedder.embed(det.raw) if embedder is not None else det.embedding

    deltas: list[float] = []
    for cur, nxt in zip(frames, frames[1:]):
        if not cur or len(nxt) < 2:
            continue
        nxt_by_id = {}
        for d in nxt:
            nxt_by_id[_resolve(lookup, d.frame, d.det_index)] = d
        nxt_embs = {tid: emb(d) for tid, d in nxt_by_id.items()}
        for d in cur:
            tid = _resolve(lookup, d.frame, d.det_index)
            if tid not in nxt_by_id:
                continue
            q = emb(d)
            c_pos = float(q @ nxt_embs[tid])
            c_neg = max(float(q @ e) for t2, e in nxt_embs.items() if t2 != tid)
            deltas.append(c_pos - c_neg)
    if not deltas:
        return SimilarityDeltaSummary(0, 0.0, 0.0, [])
    arr = np.asarray(deltas)
    counts, edges = np.histogram(arr, bins=bins, range=(-2.0, 2.0))
    hist = [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]
    return SimilarityDeltaSummary(count=len(deltas), mean=float(arr.mean()),
                                  fraction_positive=float((arr > 0).mean()),
                                  histogram=hist)
