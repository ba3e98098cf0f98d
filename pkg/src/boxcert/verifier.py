"""End-to-end robustness verification with branch-and-bound over t.

A query asks whether, for every image in a perturbation family, the
detector still outputs a single correct detection: highest-confidence box
above the class threshold, correct class, IoU with the ground truth at
least tau_iou.  Each branch node concretizes its parameter sub-interval,
propagates bounds through the network, selects every anchor that could be
the top-scoring box, bounds the candidates' IoU and class scores, and
decides ROBUST / NONROBUST / UNKNOWN.  UNKNOWN nodes bisect at the
midpoint, lower half first, until the depth or time budget runs out.

A NONROBUST node proves that every parameter value inside it fails, so its
midpoint is a concrete counterexample; it is re-checked against the plain
forward pass before the verdict is returned.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from boxcert.boxes import GroundTruth, interval_decode_corners, iou, offset_interval_to_region
from boxcert.intervals import Interval, IntervalTensor, sigmoid
from boxcert.iou_bounds import IoUInterval, baseline_iou_bounds, optimal_iou_bounds
from boxcert.model import ModelBundle, predict
from boxcert.perturbations import InputSet, PerturbationSpec, bisect, build_input_set, concretize
from boxcert.propagation import propagate

ROBUST = "ROBUST"
NONROBUST = "NONROBUST"
UNKNOWN = "UNKNOWN"

CLASS_AGREE = "agree"
CLASS_WRONG = "provably_wrong"
CLASS_AMBIGUOUS = "ambiguous"

BOUNDING_METHODS = ("optimal", "baseline")
PROPAGATION_METHODS = ("ibp", "backsub")

# past this many candidate boxes, skip IoU bounding and bisect immediately
CANDIDATE_LIMIT = 32


class InvalidQueryError(Exception):
    """The query is malformed or the clean image is already misdetected."""


@dataclass(frozen=True)
class VerificationQuery:
    model: ModelBundle
    image: np.ndarray
    ground_truth: GroundTruth
    tau_iou: float
    tau_class: float
    perturbation: PerturbationSpec
    max_depth: int = 20
    timeout: float = 1800.0
    bounding: str = "optimal"
    propagation: str = "backsub"


@dataclass(frozen=True)
class CandidateBox:
    box_index: int
    conf_bounds: Interval
    class_bounds: tuple[Interval, ...]
    offset_bounds: tuple[Interval, Interval, Interval, Interval]
    iou_bounds: IoUInterval


@dataclass(frozen=True)
class HighestBoxBounds:
    iou: IoUInterval
    score: Interval
    class_verdict: str
    candidates: tuple[CandidateBox, ...]
    truncated: bool = False


@dataclass(frozen=True)
class Counterexample:
    t: float
    image: np.ndarray
    criterion: str  # "no_detection" | "class" | "iou"


@dataclass
class BranchRecord:
    path: str
    depth: int
    t_lo: float
    t_hi: float
    status: str
    prop_time: float
    bound_time: float
    n_candidates: int


@dataclass
class Verdict:
    status: str
    branches_explored: int
    max_depth_reached: int
    wall_time: float
    counterexample: Optional[Counterexample] = None
    branch_log: list[BranchRecord] = field(default_factory=list)
    timed_out: bool = False


def correctness_violation(
    model: ModelBundle,
    image: np.ndarray,
    g: GroundTruth,
    tau_iou: float,
    tau_class: float,
) -> Optional[str]:
    """Name of the violated correctness condition, or None if all hold."""
    det = predict(model, image, tau_class)
    if det is None:
        return "no_detection"
    if det.class_id != g.class_id:
        return "class"
    if iou(det.box, g.box) < tau_iou:
        return "iou"
    return None


def candidate_indices(conf_lo: np.ndarray, conf_hi: np.ndarray) -> np.ndarray:
    """Boxes whose upper confidence reaches the best lower confidence."""
    return np.flatnonzero(conf_hi >= conf_lo.max())


def _provable_class(class_bounds: tuple[Interval, ...]) -> Optional[int]:
    """Index whose lower bound beats every other upper bound, if any."""
    if len(class_bounds) == 1:
        return 0
    los = np.array([b.lo for b in class_bounds])
    his = np.array([b.hi for b in class_bounds])
    c = int(np.argmax(los))
    others = np.delete(his, c)
    if los[c] > others.max():
        return c
    return None


def get_highest_box(
    model: ModelBundle,
    output_bounds: IntervalTensor,
    g: GroundTruth,
    bounding: str,
    max_candidates: Optional[int] = None,
) -> HighestBoxBounds:
    """Aggregate IoU/score/class bounds over all possible top-scoring boxes.

    Score bounds aggregate the objectness confidence over every box (not
    just candidates): the selected box's confidence always dominates each
    box's lower bound and never exceeds the global upper bound.
    """
    if bounding not in BOUNDING_METHODS:
        raise ValueError(f"unknown bounding method {bounding!r}")
    head = model.head
    obj_idx = head.layout[:, 4]
    conf_lo = sigmoid(output_bounds.lo[obj_idx])
    conf_hi = sigmoid(output_bounds.hi[obj_idx])
    score = Interval(float(conf_lo.max()), float(conf_hi.max()))
    cand = candidate_indices(conf_lo, conf_hi)
    if max_candidates is not None and cand.size > max_candidates:
        return HighestBoxBounds(
            iou=IoUInterval(0.0, 1.0), score=score, class_verdict=CLASS_AMBIGUOUS,
            candidates=(), truncated=True,
        )
    candidates = []
    agree_all = True
    wrong_all = True
    iou_lo, iou_hi = 1.0, 0.0
    for i in cand:
        i = int(i)
        o_bounds = tuple(output_bounds.at(int(k)) for k in head.offset_indices(i))
        cls_bounds = tuple(
            Interval(float(sigmoid(output_bounds.lo[int(k)])), float(sigmoid(output_bounds.hi[int(k)])))
            for k in head.class_indices(i)
        )
        anchor, scale, variances = head.decoder_args(i)
        if bounding == "optimal":
            region = offset_interval_to_region(head.decoder_kind, o_bounds, anchor, scale, variances)
            ib = optimal_iou_bounds(region, g)
        else:
            corners = interval_decode_corners(head.decoder_kind, o_bounds, anchor, scale, variances)
            ib = baseline_iou_bounds(corners, g)
        candidates.append(
            CandidateBox(
                box_index=i,
                conf_bounds=Interval(float(conf_lo[i]), float(conf_hi[i])),
                class_bounds=cls_bounds,
                offset_bounds=o_bounds,
                iou_bounds=ib,
            )
        )
        iou_lo = min(iou_lo, ib.lo)
        iou_hi = max(iou_hi, ib.hi)
        provable = _provable_class(cls_bounds)
        if provable != g.class_id:
            agree_all = False
        if provable is None or provable == g.class_id:
            wrong_all = False
    if agree_all:
        verdict = CLASS_AGREE
    elif wrong_all:
        verdict = CLASS_WRONG
    else:
        verdict = CLASS_AMBIGUOUS
    return HighestBoxBounds(
        iou=IoUInterval(iou_lo, iou_hi),
        score=score,
        class_verdict=verdict,
        candidates=tuple(candidates),
    )


def decide(
    iou_bounds: IoUInterval,
    score: Interval,
    class_verdict: str,
    tau_iou: float,
    tau_class: float,
) -> str:
    if iou_bounds.lo >= tau_iou and score.lo >= tau_class and class_verdict == CLASS_AGREE:
        return ROBUST
    if iou_bounds.hi < tau_iou or score.hi < tau_class or class_verdict == CLASS_WRONG:
        return NONROBUST
    return UNKNOWN


def _validate_query(query: VerificationQuery) -> None:
    if not 0.0 < query.tau_iou <= 1.0:
        raise InvalidQueryError(f"tau_iou must be in (0, 1], got {query.tau_iou}")
    if not 0.0 < query.tau_class < 1.0:
        raise InvalidQueryError(f"tau_class must be in (0, 1), got {query.tau_class}")
    if query.bounding not in BOUNDING_METHODS:
        raise InvalidQueryError(f"unknown bounding method {query.bounding!r}")
    if query.propagation not in PROPAGATION_METHODS:
        raise InvalidQueryError(f"unknown propagation method {query.propagation!r}")
    if query.max_depth < 0:
        raise InvalidQueryError(f"max_depth must be >= 0, got {query.max_depth}")
    violation = correctness_violation(
        query.model, query.image, query.ground_truth, query.tau_iou, query.tau_class
    )
    if violation is not None:
        raise InvalidQueryError(
            f"clean image is already misdetected (violates {violation!r}); "
            "queries require a correct unperturbed prediction"
        )


def verify(query: VerificationQuery) -> Verdict:
    """Depth-first branch-and-bound over the perturbation parameter."""
    start = time.perf_counter()
    _validate_query(query)
    root = build_input_set(query.image, query.perturbation)
    stack: list[tuple[str, InputSet]] = [("", root)]
    log: list[BranchRecord] = []
    explored = 0
    max_depth_seen = 0
    any_open = False
    timed_out = False

    while stack:
        if time.perf_counter() - start > query.timeout:
            timed_out = True
            any_open = True
            break
        path, node = stack.pop()
        depth = len(path)
        explored += 1
        max_depth_seen = max(max_depth_seen, depth)

        t0 = time.perf_counter()
        bounds = propagate(query.model, concretize(node), query.propagation)
        t1 = time.perf_counter()
        hb = get_highest_box(
            query.model, bounds, query.ground_truth, query.bounding,
            max_candidates=CANDIDATE_LIMIT,
        )
        t2 = time.perf_counter()
        status = UNKNOWN if hb.truncated else decide(
            hb.iou, hb.score, hb.class_verdict, query.tau_iou, query.tau_class
        )
        log.append(
            BranchRecord(
                path=path, depth=depth, t_lo=node.t_interval.lo, t_hi=node.t_interval.hi,
                status=status, prop_time=t1 - t0, bound_time=t2 - t1,
                n_candidates=len(hb.candidates),
            )
        )
        if status == ROBUST:
            continue
        if status == NONROBUST:
            t_mid = node.t_interval.mid
            image = node.realize(t_mid)
            criterion = correctness_violation(
                query.model, image, query.ground_truth, query.tau_iou, query.tau_class
            )
            if criterion is None:
                raise RuntimeError(
                    "soundness violation: NONROBUST node midpoint re-check passed "
                    f"(path={path!r}, t={t_mid})"
                )
            return Verdict(
                status=NONROBUST,
                branches_explored=explored,
                max_depth_reached=max_depth_seen,
                wall_time=time.perf_counter() - start,
                counterexample=Counterexample(t=t_mid, image=image, criterion=criterion),
                branch_log=log,
                timed_out=timed_out,
            )
        # UNKNOWN: split if budget remains, lower half explored first
        if depth < query.max_depth and node.t_interval.width > 0:
            lo_half, hi_half = bisect(node)
            stack.append((path + "1", hi_half))
            stack.append((path + "0", lo_half))
        else:
            any_open = True

    status = UNKNOWN if any_open else ROBUST
    return Verdict(
        status=status,
        branches_explored=explored,
        max_depth_reached=max_depth_seen,
        wall_time=time.perf_counter() - start,
        counterexample=None,
        branch_log=log,
        timed_out=timed_out,
    )
