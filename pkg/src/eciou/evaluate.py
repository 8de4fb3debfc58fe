"""Detection evaluation on record files.

Two protocol shapes: KITTI-style greedy matching by IoU or EC-IoU affinity
with AP40 over 40 recall points, and nuScenes-style center-distance
matching with mean IoU / EC-IoU reported over the true positives.

Record files are whitespace-separated, one box per line:

    frame_id class x y z l w h theta [score]

with meters/radians, a score in [0, 1] on predictions only, and `#`
starting a comment.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .geometry import Box3D
from .metrics import ec_iou_3d, ec_iou_bev, iou_3d, iou_bev
from .weighting import WeightConfig

PREDICTIONS = "predictions"
GROUND_TRUTHS = "ground-truths"

IOU_AFFINITY = "iou"
EC_IOU_AFFINITY = "ec-iou"

MODE_3D = "3d"
MODE_BEV = "bev"

# Official-protocol-style strict thresholds; anything else defaults to 0.5.
DEFAULT_THRESHOLDS = {"car": 0.7, "pedestrian": 0.5}
FALLBACK_THRESHOLD = 0.5
DEFAULT_TP_DISTANCE = 2.0

RECALL_POINTS = 40


class RecordParseError(ValueError):
    """A record file line could not be parsed; carries the line number."""

    def __init__(self, path: str, line_number: int, message: str):
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = path
        self.line_number = line_number


class UndefinedAPError(ValueError):
    """AP is undefined because the class has zero ground truths."""


@dataclass(frozen=True)
class DetectionRecord:
    frame_id: str
    class_label: str
    box: Box3D
    score: float | None = None

    @property
    def is_prediction(self) -> bool:
        return self.score is not None


def parse_records(path: str, kind: str) -> list[DetectionRecord]:
    """Read a record file; kind selects predictions (scored) or ground truths."""
    if kind not in (PREDICTIONS, GROUND_TRUTHS):
        raise ValueError(f"kind must be {PREDICTIONS!r} or {GROUND_TRUTHS!r}")
    want_score = kind == PREDICTIONS
    n_fields = 10 if want_score else 9
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            fields = text.split()
            if len(fields) != n_fields:
                raise RecordParseError(
                    path, line_number,
                    f"expected {n_fields} fields for {kind}, got {len(fields)}",
                )
            frame_id, label = fields[0], fields[1]
            try:
                x, y, z, l, w, h, theta = (float(v) for v in fields[2:9])
                score = float(fields[9]) if want_score else None
            except ValueError as exc:
                raise RecordParseError(path, line_number, f"bad number: {exc}") from exc
            if want_score and not 0.0 <= score <= 1.0:
                raise RecordParseError(path, line_number, f"score {score} outside [0, 1]")
            try:
                box = Box3D(x=x, y=y, l=l, w=w, theta=theta, z=z, h=h)
            except ValueError as exc:
                raise RecordParseError(path, line_number, str(exc)) from exc
            records.append(DetectionRecord(frame_id, label, box, score))
    return records


@dataclass(frozen=True)
class MatchResult:
    """One frame's matching outcome; matches are (pred, gt, affinity)."""

    matches: tuple[tuple[DetectionRecord, DetectionRecord, float], ...]
    false_positives: tuple[DetectionRecord, ...]
    false_negatives: tuple[DetectionRecord, ...]


def _affinity(
    pred: DetectionRecord, gt: DetectionRecord, affinity: str, cfg: WeightConfig, mode: str
) -> float:
    if mode == MODE_BEV:
        if affinity == IOU_AFFINITY:
            return iou_bev(pred.box, gt.box).value
        if affinity == EC_IOU_AFFINITY:
            return ec_iou_bev(pred.box, gt.box, cfg).value
    elif mode == MODE_3D:
        if affinity == IOU_AFFINITY:
            return iou_3d(pred.box, gt.box).value
        if affinity == EC_IOU_AFFINITY:
            return ec_iou_3d(pred.box, gt.box, cfg).value
    else:
        raise ValueError(f"unknown metric mode {mode!r}")
    raise ValueError(f"unknown affinity {affinity!r}")


def _by_score(preds: list[DetectionRecord]) -> list[DetectionRecord]:
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].score, i))
    return [preds[i] for i in order]


def match_greedy(
    preds: list[DetectionRecord],
    gts: list[DetectionRecord],
    affinity: str,
    threshold: float,
    cfg: WeightConfig,
    mode: str = MODE_3D,
) -> MatchResult:
    """Score-greedy one-to-one matching within a single frame and class.

    Predictions are processed in descending score; each claims the still
    unmatched ground truth with the highest affinity, provided it reaches
    the threshold. mode selects 3D (volume) or BEV (footprint) affinity.
    """
    taken = [False] * len(gts)
    matches = []
    fps = []
    for pred in _by_score(preds):
        best, best_aff = -1, -1.0
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            a = _affinity(pred, gt, affinity, cfg, mode)
            if a >= threshold and a > best_aff:
                best, best_aff = j, a
        if best >= 0:
            taken[best] = True
            matches.append((pred, gts[best], best_aff))
        else:
            fps.append(pred)
    fns = tuple(gt for j, gt in enumerate(gts) if not taken[j])
    return MatchResult(tuple(matches), tuple(fps), fns)


def average_precision_40(frame_results: list[MatchResult]) -> float:
    """AP sampled at the 40 recall points i/40, with max-interpolated precision."""
    scored: list[tuple[float, bool]] = []
    n_gt = 0
    for result in frame_results:
        n_gt += len(result.matches) + len(result.false_negatives)
        scored.extend((m[0].score, True) for m in result.matches)
        scored.extend((fp.score, False) for fp in result.false_positives)
    if n_gt == 0:
        raise UndefinedAPError("no ground truths in class")
    scored.sort(key=lambda item: -item[0])
    recalls = []
    precisions = []
    tp = 0
    for rank, (_, is_tp) in enumerate(scored, start=1):
        tp += int(is_tp)
        recalls.append(tp / n_gt)
        precisions.append(tp / rank)
    total = 0.0
    for i in range(1, RECALL_POINTS + 1):
        r = i / RECALL_POINTS
        best = max((p for p, rec in zip(precisions, recalls) if rec >= r - 1e-12), default=0.0)
        total += best
    return total / RECALL_POINTS


@dataclass(frozen=True)
class TPMeans:
    """Mean 3D IoU / EC-IoU over center-distance true positives."""

    mean_iou: float | None
    mean_ec_iou: float | None
    matched: int


def tp_metric_means(
    preds: list[DetectionRecord],
    gts: list[DetectionRecord],
    center_dist_threshold: float,
    cfg: WeightConfig,
) -> TPMeans:
    """Match by BEV center distance (greedy by score, nearest first), then
    average the 3D metrics over the matched pairs. Means are None with no TPs."""
    if center_dist_threshold <= 0.0:
        raise ValueError("center_dist_threshold must be positive")
    pairs: list[tuple[DetectionRecord, DetectionRecord]] = []
    by_frame: dict[str, tuple[list[DetectionRecord], list[DetectionRecord]]] = {}
    for gt in gts:
        by_frame.setdefault(gt.frame_id, ([], []))[1].append(gt)
    for pred in preds:
        by_frame.setdefault(pred.frame_id, ([], []))[0].append(pred)
    for frame_id in sorted(by_frame):
        frame_preds, frame_gts = by_frame[frame_id]
        taken = [False] * len(frame_gts)
        for pred in _by_score(frame_preds):
            best, best_dist = -1, math.inf
            for j, gt in enumerate(frame_gts):
                if taken[j]:
                    continue
                dist = math.hypot(pred.box.x - gt.box.x, pred.box.y - gt.box.y)
                if dist <= center_dist_threshold and dist < best_dist:
                    best, best_dist = j, dist
            if best >= 0:
                taken[best] = True
                pairs.append((pred, frame_gts[best]))
    if not pairs:
        return TPMeans(None, None, 0)
    ious = [iou_3d(p.box, g.box).value for p, g in pairs]
    ec_ious = [ec_iou_3d(p.box, g.box, cfg).value for p, g in pairs]
    return TPMeans(sum(ious) / len(ious), sum(ec_ious) / len(ec_ious), len(pairs))


@dataclass(frozen=True)
class ClassReport:
    ap40: float | None
    ec_ap40: float | None
    mean_iou: float | None
    mean_ec_iou: float | None
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class EvalReport:
    classes: dict[str, ClassReport] = field(default_factory=dict)
    map40: float | None = None
    ec_map40: float | None = None

    def to_json(self) -> str:
        payload = {
            "classes": {
                name: {
                    "ap40": rep.ap40,
                    "ec_ap40": rep.ec_ap40,
                    "mean_iou": rep.mean_iou,
                    "mean_ec_iou": rep.mean_ec_iou,
                    "tp": rep.tp,
                    "fp": rep.fp,
                    "fn": rep.fn,
                }
                for name, rep in self.classes.items()
            },
            "map40": self.map40,
            "ec_map40": self.ec_map40,
        }
        return json.dumps(payload, indent=2, sort_keys=False)


def _frames(records: list[DetectionRecord]) -> list[str]:
    return sorted({r.frame_id for r in records})


def _match_class(
    preds: list[DetectionRecord],
    gts: list[DetectionRecord],
    affinity: str,
    threshold: float,
    cfg: WeightConfig,
    mode: str,
) -> list[MatchResult]:
    results = []
    for frame_id in _frames(preds + gts):
        results.append(
            match_greedy(
                [p for p in preds if p.frame_id == frame_id],
                [g for g in gts if g.frame_id == frame_id],
                affinity,
                threshold,
                cfg,
                mode,
            )
        )
    return results


def evaluate_detections(
    preds: list[DetectionRecord],
    gts: list[DetectionRecord],
    classes: list[str],
    cfg: WeightConfig,
    thresholds: dict[str, float] | None = None,
    tp_distance: float = DEFAULT_TP_DISTANCE,
    count_affinity: str = IOU_AFFINITY,
    mode: str = MODE_3D,
) -> EvalReport:
    """Full per-class report: AP40 under both affinities, TP-metric means,
    and TP/FP/FN counts taken from the count_affinity matching."""
    thresholds = thresholds or {}
    class_reports: dict[str, ClassReport] = {}
    aps = []
    ec_aps = []
    for label in classes:
        threshold = thresholds.get(label, DEFAULT_THRESHOLDS.get(label, FALLBACK_THRESHOLD))
        cls_preds = [p for p in preds if p.class_label == label]
        cls_gts = [g for g in gts if g.class_label == label]
        per_affinity: dict[str, list[MatchResult]] = {}
        ap_values: dict[str, float | None] = {}
        for affinity in (IOU_AFFINITY, EC_IOU_AFFINITY):
            results = _match_class(cls_preds, cls_gts, affinity, threshold, cfg, mode)
            per_affinity[affinity] = results
            try:
                ap_values[affinity] = average_precision_40(results)
            except UndefinedAPError:
                ap_values[affinity] = None
        counted = per_affinity[count_affinity]
        tp = sum(len(r.matches) for r in counted)
        fp = sum(len(r.false_positives) for r in counted)
        fn = sum(len(r.false_negatives) for r in counted)
        means = tp_metric_means(cls_preds, cls_gts, tp_distance, cfg)
        class_reports[label] = ClassReport(
            ap40=ap_values[IOU_AFFINITY],
            ec_ap40=ap_values[EC_IOU_AFFINITY],
            mean_iou=means.mean_iou,
            mean_ec_iou=means.mean_ec_iou,
            tp=tp,
            fp=fp,
            fn=fn,
        )
        if ap_values[IOU_AFFINITY] is not None:
            aps.append(ap_values[IOU_AFFINITY])
        if ap_values[EC_IOU_AFFINITY] is not None:
            ec_aps.append(ap_values[EC_IOU_AFFINITY])
    return EvalReport(
        classes=class_reports,
        map40=sum(aps) / len(aps) if aps else None,
        ec_map40=sum(ec_aps) / len(ec_aps) if ec_aps else None,
    )
