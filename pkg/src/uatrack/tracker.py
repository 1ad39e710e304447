"""Per-frame association pipeline with uncertainty verification and
rectification, plus tracklet lifecycle management.

Per frame: cosine similarity matrix -> Hungarian assignment -> (when
enabled) verification of every matched pair via the uncertainty metric ->
rectification of the dissolved/unmatched pool with K-frame averaged
similarity gated by IoU -> propagation (births, lost handling).
"""

from __future__ import annotations


from dataclasses import dataclass, field

import numpy as np

from .assignment import Matching, hungarian_max
from .errors import DimensionMismatch, InvalidConfig, OutOfOrderFrame
from .geometry import BoundingBox, iou
from .uncertainty import (AssociationVerdict, UncertaintyMargins,
                          association_uncertainty, second_best)

STAGE_BIRTH = 0
STAGE_ASSOC = 1
STAGE_RECTIFIED = 2


@dataclass
class Detection:
    frame: int
    det_index: int
    box: BoundingBox
    confidence: float
    embedding: np.ndarray
    raw: np.ndarray | None = None  # appearance feature for embedder training


@dataclass
class TrackRecord:
    frame: int
    det_index: int
    box: BoundingBox
    embedding: np.ndarray
    delta: float
    confidence: float = 1.0


class Tracklet:
    """Identity-labeled sequence of per-frame records with a delta history."""

    def __init__(self, tid: int, record: TrackRecord, ema_alpha: float | None = None):
        self.id = tid
        self.records: list[TrackRecord] = [record]
        self.state = "active"
        self.lost_age = 0
        self._ema_alpha = ema_alpha
        self._ema = record.embedding.copy()

    def append(self, record: TrackRecord) -> None:
        if record.frame <= self.records[-1].frame:
            raise OutOfOrderFrame(
                f"track {self.id}: frame {record.frame} after {self.records[-1].frame}")
        self.records.append(record)
        if self._ema_alpha is not None:
            a = self._ema_alpha
            mixed = a * self._ema + (1.0 - a) * record.embedding
            self._ema = mixed / np.linalg.norm(mixed)

    @property
    def last_box(self) -> BoundingBox:
        return self.records[-1].box

    @property
    def last_frame(self) -> int:
        return self.records[-1].frame

    def representative(self) -> np.ndarray:
        if self._ema_alpha is not None:
            return self._ema
        return self.records[-1].embedding

    def recent_embeddings(self, k: int) -> list[np.ndarray]:
        return [r.embedding for r in self.records[-k:]]

    def deltas(self) -> list[float]:
        return [r.delta for r in self.records]

    def box_at(self, frame: int) -> BoundingBox | None:
        for r in self.records:
            if r.frame == frame:
                return r.box
        return None

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class TrackerConfig:
    margins: UncertaintyMargins = field(default_factory=UncertaintyMargins)
    beta: float = 0.1           # IoU gate for rectification
    K: int = 5                  # rectification history window
    det_conf_min: float = 0.6   # new-track confidence gate
    max_lost: int = 30          # frames a lost track stays matchable
    sim_floor: float = float("-inf")
    utl_enabled: bool = True
    ema_alpha: float | None = None  # None -> most recent embedding

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise InvalidConfig(f"beta must be in [0,1), got {self.beta}")
        if self.K < 1:
            raise InvalidConfig(f"K must be >= 1, got {self.K}")
        if self.max_lost < 0:
            raise InvalidConfig(f"max_lost must be >= 0, got {self.max_lost}")


@dataclass
class LogRow:
    """One association decision; stage 0 = birth, 1 = direct match, 2 = rectified."""
    frame: int
    det_index: int
    track_id: int
    c1: float
    c2: float
    sigma: float
    gamma: float
    delta: float
    stage: int


@dataclass
class AssociationOutcome:
    frame: int
    matched: list[tuple[int, int]]      # (det row, track id)
    born: list[int]                     # new track ids
    log_rows: list[LogRow] = field(default_factory=list)


class TrackerState:
    def __init__(self, cfg: TrackerConfig):
        self.cfg = cfg
        self.tracks: list[Tracklet] = []     # active + lost, creation order
        self.finished: list[Tracklet] = []   # removed tracks
        self.next_id = 1
        self.last_frame: int | None = None

    def all_tracklets(self) -> list[Tracklet]:
        return sorted(self.tracks + self.finished, key=lambda t: t.id)


def build_similarity(tracks: list[Tracklet], dets: list[Detection],
                     cfg: TrackerConfig) -> np.ndarray:
    """Rows index detections, cols index tracks; entries are cosine
    similarities (dot products of unit-norm embeddings)."""
    if not tracks or not dets:
        return np.zeros((len(dets), len(tracks)))
    dim = dets[0].embedding.shape[0]
    for d in dets:
        if d.embedding.shape[0] != dim:
            raise DimensionMismatch(
                f"detection embedding dim {d.embedding.shape[0]} != {dim}")
    reps = []
    for t in tracks:
        rep = t.representative()
        if rep.shape[0] != dim:
            raise DimensionMismatch(f"track {t.id} embedding dim {rep.shape[0]} != {dim}")
        reps.append(rep)
    det_mat = np.stack([d.embedding for d in dets])
    return det_mat @ np.stack(reps).T


def verify(matching: Matching, sim: np.ndarray, cfg: TrackerConfig):
    """Split matched pairs into certain pairs (with verdicts) and an
    uncertain pool; the pool also absorbs all unmatched rows/cols.

    Dissolved pairs are returned with their verdicts as well so that every
    association decision can be logged, even the ones that do not survive."""
    certain: list[tuple[int, int, AssociationVerdict]] = []
    dissolved: list[tuple[int, int, AssociationVerdict]] = []
    pool_rows = list(matching.unmatched_rows)
    pool_cols = list(matching.unmatched_cols)
    for r, c in matching.pairs:
        c1 = float(sim[r, c])
        c2 = second_best(sim[r], c)
        verdict = association_uncertainty(c1, c2, cfg.margins)
        if verdict.uncertain:
            dissolved.append((r, c, verdict))
            pool_rows.append(r)
            pool_cols.append(c)
        else:
            certain.append((r, c, verdict))
    return certain, dissolved, sorted(pool_rows), sorted(pool_cols)


def rectify(pool_rows: list[int], pool_cols: list[int], dets: list[Detection],
            tracks: list[Tracklet], cfg: TrackerConfig) -> list[tuple[int, int]]:
    """Re-match the uncertain pool with K-frame averaged similarity, IoU-gated.

    A zero entry (failed gate) is a forbidden match; the Hungarian floor of 0
    enforces that. Tracks shorter than K average over what they have."""
    if not pool_rows or not pool_cols:
        return []
    cprime = np.zeros((len(pool_rows), len(pool_cols)))
    for i, r in enumerate(pool_rows):
        det = dets[r]
        for j, c in enumerate(pool_cols):
            trk = tracks[c]
            if iou(det.box, trk.last_box) <= cfg.beta:
                continue
            hist = trk.recent_embeddings(cfg.K)
            cprime[i, j] = float(np.mean([det.embedding @ e for e in hist]))
    matched = hungarian_max(cprime, floor=0.0)
    return [(pool_rows[i], pool_cols[j]) for i, j in matched.pairs]


def step(state: TrackerState, frame: int, dets: list[Detection]) -> AssociationOutcome:
    """Advance the tracker by one frame and return the association outcome."""
    cfg = state.cfg
    if state.last_frame is not None and frame <= state.last_frame:
        raise OutOfOrderFrame(f"frame {frame} after {state.last_frame}")
    state.last_frame = frame

    tracks = state.tracks
    sim = build_similarity(tracks, dets, cfg)
    matching = hungarian_max(sim, floor=cfg.sim_floor)

    outcome = AssociationOutcome(frame=frame, matched=[], born=[])
    accepted: list[tuple[int, int, AssociationVerdict, int]] = []  # (+stage)

    if cfg.utl_enabled:
        certain, dissolved, pool_rows, pool_cols = verify(matching, sim, cfg)
        for r, c, verdict in certain:
            accepted.append((r, c, verdict, STAGE_ASSOC))
        # dissolved pairs are decisions too: log them, but do not propagate
        for r, c, verdict in sorted(dissolved, key=lambda x: (x[0], x[1])):
            outcome.log_rows.append(LogRow(frame, dets[r].det_index, tracks[c].id,
                                           verdict.c1, verdict.c2, verdict.sigma,
                                           verdict.gamma, verdict.delta, STAGE_ASSOC))
        for r, c in rectify(pool_rows, pool_cols, dets, tracks, cfg):
            # delta is recomputed from the original similarity row so the
            # tracklet's delta history stays on one scale
            verdict = association_uncertainty(float(sim[r, c]),
                                              second_best(sim[r], c), cfg.margins)
            accepted.append((r, c, verdict, STAGE_RECTIFIED))
    else:
        for r, c in matching.pairs:
            verdict = association_uncertainty(float(sim[r, c]),
                                              second_best(sim[r], c), cfg.margins)
            accepted.append((r, c, verdict, STAGE_ASSOC))

    matched_rows = set()
    matched_cols = set()
    for r, c, verdict, stage in sorted(accepted, key=lambda x: (x[0], x[1])):
        det = dets[r]
        trk = tracks[c]
        trk.append(TrackRecord(frame=frame, det_index=det.det_index, box=det.box,
                               embedding=det.embedding, delta=verdict.delta,
                               confidence=det.confidence))
        trk.state = "active"
        trk.lost_age = 0
        matched_rows.add(r)
        matched_cols.add(c)
        outcome.matched.append((r, trk.id))
        outcome.log_rows.append(LogRow(frame, det.det_index, trk.id, verdict.c1,
                                       verdict.c2, verdict.sigma, verdict.gamma,
                                       verdict.delta, stage))

    # births
    born: list[Tracklet] = []
    for r, det in enumerate(dets):
        if r in matched_rows or det.confidence < cfg.det_conf_min:
            continue
        trk = Tracklet(state.next_id,
                       TrackRecord(frame=frame, det_index=det.det_index, box=det.box,
                                   embedding=det.embedding, delta=0.0,
                                   confidence=det.confidence),
                       ema_alpha=cfg.ema_alpha)
        state.next_id += 1
        born.append(trk)
        outcome.born.append(trk.id)
        outcome.log_rows.append(LogRow(frame, det.det_index, trk.id,
                                       0.0, 0.0, 0.0, 0.0, 0.0, STAGE_BIRTH))

    # lost handling
    survivors = []
    for c, trk in enumerate(tracks):
        if c in matched_cols:
            survivors.append(trk)
            continue
        trk.state = "lost"
        trk.lost_age += 1
        if trk.lost_age > cfg.max_lost:
            state.finished.append(trk)
        else:
            survivors.append(trk)
    state.tracks = survivors + born
    return outcome


def track_sequence(frames, cfg: TrackerConfig | None = None):
    """Fold `step` over an ordered sequence of per-frame detection lists.

    `frames` is a sequence of (frame_index, detections) pairs or plain
    detection lists (then frames are numbered 1..N). Returns all tracklets,
    including removed ones, and one log row per association decision."""
    if cfg is None:
        cfg = TrackerConfig()
    state = TrackerState(cfg)
    log: list[LogRow] = []
    for pos, entry in enumerate(frames):
        if isinstance(entry, tuple):
            frame, dets = entry
        else:
            frame, dets = pos + 1, entry
        outcome = step(state, frame, dets)
        log.extend(outcome.log_rows)
    return state.all_tracklets(), log
