"""Recurrent segmentation scheduler and runtime budget model.

Frame 0 and every k-th frame run the accurate priming network; every other
frame runs the small approximating network on a downsampled frame and fuses
its upsampled scores with the previous frame's scores through the thin
ensemble network. The priming period k therefore trades runtime for
quality; k = inf primes only the first frame.
"""
from __future__ import annotations

import csv
import math
import time
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import ClassTable, LabelMap, ScoreMap, VideoSequence, argmax_labels
from .metrics import ConfusionMatrix, MetricsReport, accumulate, compute_report
from .nn.layers import _axis_matrix
from .nn.loss import masked_cross_entropy_batch
from .nn.net import NetParams, NetSpec, Network, backward_batch, forward_batch, init_params
from .nn.optim import SgdOptimizer, TrainConfig
from .nn.presets import passthrough_ensemble_params, random_ensemble_params


@dataclass(frozen=True)
class ScheduleConfig:
    """Priming period k (math.inf primes only frame 0) and the downsample
    factor for the approximating branch."""

    priming_period: float = math.inf
    downsample_factor: int = 4

    def __post_init__(self) -> None:
        k = self.priming_period
        if not (math.isinf(k) or (float(k).is_integer() and k >= 1)):
            raise ValueError(f"priming period must be an integer >= 1 or inf, got {k}")
        if self.downsample_factor < 1:
            raise ValueError("downsample factor must be >= 1")

    def primed(self, t: int) -> bool:
        if math.isinf(self.priming_period):
            return t == 0
        return t % int(self.priming_period) == 0

    def primed_count(self, length: int) -> int:
        if math.isinf(self.priming_period):
            return 1
        return (length - 1) // int(self.priming_period) + 1


@dataclass(frozen=True)
class CostModel:
    """Per-network forward costs in any consistent unit (seconds, FLOPs, ...)."""

    cost_prime: float
    cost_approx: float
    cost_ensemble: float

    def __post_init__(self) -> None:
        for name in ("cost_prime", "cost_approx", "cost_ensemble"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class FrameCost:
    frame: int
    primed: bool
    cost: float


@dataclass(frozen=True)
class PipelineNets:
    priming: Network
    approx: Network
    ensemble: Network

    def validate(self, table: ClassTable) -> None:
        c = table.num_scored
        if self.priming.spec.out_channels != c:
            raise ValueError(f"priming net emits {self.priming.spec.out_channels} channels, table has {c}")
        if self.approx.spec.out_channels != c:
            raise ValueError(f"approximating net emits {self.approx.spec.out_channels} channels, table has {c}")
        if self.ensemble.spec.in_channels != 2 * c or self.ensemble.spec.out_channels != c:
            raise ValueError("ensemble net must map 2C channels to C channels")


@dataclass(frozen=True)
class SegmentationResult:
    labels: Tuple[LabelMap, ...]
    scores: Tuple[ScoreMap, ...]
    costs: Tuple[FrameCost, ...]


def _resize_batch(xb: np.ndarray, th: int, tw: int) -> np.ndarray:
    mh = _axis_matrix(xb.shape[1], th)
    mw = _axis_matrix(xb.shape[2], tw)
    out = np.einsum("ih,bhwc->biwc", mh, xb)
    return np.einsum("jw,biwc->bijc", mw, out)


def _softmax(x: np.ndarray) -> np.ndarray:
    """Per-pixel class probabilities; the state passed between frames.

    Normalizing the ensemble's inputs to [0, 1] keeps its conditioning
    independent of the other networks' logit scale.
    """
    z = np.exp(x - x.max(axis=3, keepdims=True))
    return z / z.sum(axis=3, keepdims=True)


def _softmax_vjp(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    """d(loss)/d(logits) given probabilities p and d(loss)/d(p)."""
    dot = (p * g).sum(axis=3, keepdims=True)
    return p * (g - dot)


def _resize_batch_adjoint(dy: np.ndarray, sh: int, sw: int) -> np.ndarray:
    mh = _axis_matrix(sh, dy.shape[1])
    mw = _axis_matrix(sw, dy.shape[2])
    out = np.einsum("jw,bijc->biwc", mw, dy)
    return np.einsum("ih,biwc->bhwc", mh, out)


def _approx_input_dims(h: int, w: int, factor: int) -> Tuple[int, int]:
    return math.ceil(h / factor), math.ceil(w / factor)


def segment_sequence(
    seq: VideoSequence,
    nets: PipelineNets,
    sched: ScheduleConfig,
    table: ClassTable,
    costs: Optional[CostModel] = None,
) -> SegmentationResult:
    """Run the recurrent pipeline over one sequence, frame by frame.

    The per-frame cost trace is produced when a cost model is given. Score
    maps are resized to the frame dimensions if a net's layer chain changes
    them (odd sizes under downsample/upsample stages).
    """
    if not seq.frames:
        raise ValueError("cannot segment an empty sequence")
    nets.validate(table)
    h, w = seq.frames[0].image.height, seq.frames[0].image.width

    labels: List[LabelMap] = []
    scores: List[ScoreMap] = []
    trace: List[FrameCost] = []
    prev: Optional[np.ndarray] = None  # probability state from the last frame
    for t, frame in enumerate(seq.frames):
        xb = frame.image.data[None]
        if sched.primed(t):
            s, _ = forward_batch(nets.priming.spec, nets.priming.params, xb)
            cost = costs.cost_prime if costs else 0.0
        else:
            th, tw = _approx_input_dims(h, w, sched.downsample_factor)
            a, _ = forward_batch(nets.approx.spec, nets.approx.params, _resize_batch(xb, th, tw))
            up = _resize_batch(a, h, w)
            s, _ = forward_batch(nets.ensemble.spec, nets.ensemble.params,
                                 np.concatenate([prev, _softmax(up)], axis=3))
            cost = (costs.cost_approx + costs.cost_ensemble) if costs else 0.0
        if s.shape[1:3] != (h, w):
            s = _resize_batch(s, h, w)
        prev = _softmax(s)
        sm = ScoreMap(s[0])
        scores.append(sm)
        labels.append(argmax_labels(sm, table))
        if costs:
            trace.append(FrameCost(frame=t, primed=sched.primed(t), cost=cost))
    return SegmentationResult(tuple(labels), tuple(scores), tuple(trace))


def approx_only_labels(
    seq: VideoSequence,
    approx: Network,
    downsample_factor: int,
    table: ClassTable,
) -> List[LabelMap]:
    """Frame-by-frame labels from the approximating branch alone (no
    recurrence, no ensemble): downsample, score, upsample, argmax."""
    if not seq.frames:
        raise ValueError("cannot segment an empty sequence")
    h, w = seq.frames[0].image.height, seq.frames[0].image.width
    th, tw = _approx_input_dims(h, w, downsample_factor)
    out = []
    for frame in seq.frames:
        a, _ = forward_batch(approx.spec, approx.params, _resize_batch(frame.image.data[None], th, tw))
        up = _resize_batch(a, h, w)
        out.append(argmax_labels(ScoreMap(up[0]), table))
    return out


def amortized_relative_runtime(
    sched: ScheduleConfig, costs: CostModel, sequence_length: int
) -> float:
    """Mean per-frame cost under the schedule, normalized by the priming cost.

    Computed in exact rational arithmetic and rounded once, so degenerate
    cases (k=1, ratios expressible in binary) come out exact.
    """
    if sequence_length < 1:
        raise ValueError("sequence length must be >= 1")
    p = sched.primed_count(sequence_length)
    q = sequence_length - p
    total = Fraction(p) * Fraction(costs.cost_prime)
    total += Fraction(q) * (Fraction(costs.cost_approx) + Fraction(costs.cost_ensemble))
    return float(total / (Fraction(sequence_length) * Fraction(costs.cost_prime)))


def budget_curve(
    costs: CostModel, periods: Sequence[float], sequence_length: int
) -> List[Tuple[float, float]]:
    """One (period, relative runtime) row per priming period."""
    out = []
    for k in periods:
        sched = ScheduleConfig(priming_period=k)
        out.append((k, amortized_relative_runtime(sched, costs, sequence_length)))
    return out


def _gather_labeled_frames(train_set: Sequence[VideoSequence]):
    items = []
    for si, seq in enumerate(train_set):
        for fi, frame in enumerate(seq.frames):
            if frame.label is None:
                raise ValueError(f"sequence {si} frame {fi} has no label")
            items.append((frame.image.data, frame.label.data))
    if not items:
        raise ValueError("training set contains no frames")
    return items


def _batches_by_shape(items, order, batch_size):
    """Group indices into batches of equal spatial dims, preserving order."""
    buckets: Dict[tuple, List[int]] = {}
    for idx in order:
        buckets.setdefault(items[idx][0].shape, []).append(idx)
    batches = []
    for _, idxs in sorted(buckets.items()):
        for i in range(0, len(idxs), batch_size):
            batches.append(idxs[i : i + batch_size])
    return batches


def train_priming(
    train_set: Sequence[VideoSequence],
    spec: NetSpec,
    config: TrainConfig,
    table: ClassTable,
    log_fn=None,
) -> NetParams:
    """Frame-independent training of the priming network with masked
    cross-entropy; deterministic for a fixed config seed."""
    if spec.out_channels != table.num_scored:
        raise ValueError("priming spec does not emit one channel per scored class")
    items = _gather_labeled_frames(train_set)
    rng = np.random.default_rng(config.seed)
    params = init_params(spec, config.seed)
    opt = SgdOptimizer(config)
    for epoch in range(config.epochs):
        order = rng.permutation(len(items))
        losses = []
        for batch in _batches_by_shape(items, order, config.batch_size):
            xb = np.stack([items[i][0] for i in batch])
            yb = np.stack([items[i][1] for i in batch])
            s, caches = forward_batch(spec, params, xb)
            loss, ds = masked_cross_entropy_batch(s, yb, table)
            grads, _ = backward_batch(spec, params, caches, ds)
            params = opt.step(params, _clip_grads(grads))
            losses.append(loss)
        if log_fn:
            log_fn(epoch, float(np.mean(losses)))
    return params


def _add_grads(acc, extra):
    if acc is None:
        return extra
    return tuple(
        None if a is None else (a[0] + e[0], a[1] + e[1]) for a, e in zip(acc, extra)
    )


GRAD_CLIP_NORM = 10.0


def _clip_grads(grads, max_norm: float = GRAD_CLIP_NORM):
    """Scale the whole gradient to a bounded global norm.

    From-scratch training on these small stacks occasionally hits batches
    whose raw step is large enough to dead-zone the net; a fixed bound keeps
    SGD in the stable regime without touching the update rule itself.
    """
    total = 0.0
    for g in grads:
        if g is not None:
            total += float((g[0] * g[0]).sum()) + float((g[1] * g[1]).sum())
    norm = math.sqrt(total)
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return tuple(
        None if g is None else (g[0] * scale, g[1] * scale) for g in grads
    )


def train_joint(
    train_set: Sequence[VideoSequence],
    priming: Network,
    approx_netspec: NetSpec,
    ensemble_netspec: NetSpec,
    sched: ScheduleConfig,
    config: TrainConfig,
    table: ClassTable,
    unroll_len: int = 1,
    ensemble_init: str = "passthrough_noise",
    log_fn=None,
) -> Tuple[NetParams, NetParams]:
    """Jointly train the approximating and ensemble networks with the
    priming network frozen.

    Sequences run in schedule order; the loss lands on every non-primed
    frame's fused scores, with gradients flowing through the ensemble, the
    upsampling, and the approximating net. The carried state is detached, so
    recurrence is truncated at ``unroll_len`` steps (1 = no flow across
    frames; larger windows backpropagate each loss through that many recent
    steps, reusing their cached activations).

    ensemble_init: "passthrough_noise" (default) starts at the exact
    pass-through of the upsampled scores plus a small seeded perturbation;
    "passthrough" is the exact map; "random" is fan-in random.
    """
    if unroll_len < 1:
        raise ValueError("unroll length must be >= 1")
    c = table.num_scored
    if priming.spec.out_channels != c or approx_netspec.out_channels != c:
        raise ValueError("network class counts do not match the class table")
    if ensemble_netspec.in_channels != 2 * c or ensemble_netspec.out_channels != c:
        raise ValueError("ensemble net must map 2C channels to C channels")
    if ensemble_init == "passthrough_noise":
        ens_params = passthrough_ensemble_params(c, noise=0.02, seed=config.seed)
    elif ensemble_init == "passthrough":
        ens_params = passthrough_ensemble_params(c)
    elif ensemble_init == "random":
        ens_params = random_ensemble_params(c, config.seed)
    else:
        raise ValueError(f"unknown ensemble init {ensemble_init!r}")
    approx_params = init_params(approx_netspec, config.seed)

    for si, seq in enumerate(train_set):
        for fi, frame in enumerate(seq.frames):
            if frame.label is None:
                raise ValueError(f"sequence {si} frame {fi} has no label")
    if not train_set:
        raise ValueError("training set is empty")

    rng = np.random.default_rng(config.seed)
    opt_a = SgdOptimizer(config)
    opt_e = SgdOptimizer(config)

    seq_items = [
        (np.stack([fr.image.data for fr in seq.frames]),
         np.stack([fr.label.data for fr in seq.frames]))
        for seq in train_set
    ]
    num_frames = min(imgs.shape[0] for imgs, _ in seq_items)

    for epoch in range(config.epochs):
        order = rng.permutation(len(seq_items))
        groups = _batches_by_shape(
            [(imgs[0], None) for imgs, _ in seq_items], order, config.batch_size
        )
        losses = []
        for group in groups:
            imgs = [seq_items[i][0] for i in group]
            labs = [seq_items[i][1] for i in group]
            h, w = imgs[0].shape[1], imgs[0].shape[2]
            th, tw = _approx_input_dims(h, w, sched.downsample_factor)
            prev = None
            window: deque = deque(maxlen=unroll_len - 1)
            for t in range(num_frames):
                xb = np.stack([im[t] for im in imgs])
                if sched.primed(t):
                    s, _ = forward_batch(priming.spec, priming.params, xb)
                    prev = _softmax(s)
                    window.clear()  # gradient cannot flow past a primed frame
                    continue
                yb = np.stack([lb[t] for lb in labs])
                a, cache_a = forward_batch(approx_netspec, approx_params, _resize_batch(xb, th, tw))
                up = _resize_batch(a, h, w)
                p_up = _softmax(up)
                ein = np.concatenate([prev, p_up], axis=3)
                s, cache_e = forward_batch(ensemble_netspec, ens_params, ein)
                loss, ds = masked_cross_entropy_batch(s, yb, table)
                losses.append(loss)

                g_e, d_ein = backward_batch(ensemble_netspec, ens_params, cache_e, ds)
                d_prev = d_ein[..., :c]  # grad w.r.t. the carried probabilities
                d_up = _softmax_vjp(p_up, d_ein[..., c:])
                g_a, _ = backward_batch(
                    approx_netspec, approx_params, cache_a, _resize_batch_adjoint(d_up, th, tw)
                )
                for rec_a, rec_e, rec_state, rec_pup in reversed(window):
                    d_s = _softmax_vjp(rec_state, d_prev)
                    g_e2, d_ein2 = backward_batch(ensemble_netspec, ens_params, rec_e, d_s)
                    d_up2 = _softmax_vjp(rec_pup, d_ein2[..., c:])
                    g_a2, _ = backward_batch(
                        approx_netspec, approx_params, rec_a,
                        _resize_batch_adjoint(d_up2, th, tw),
                    )
                    g_e = _add_grads(g_e, g_e2)
                    g_a = _add_grads(g_a, g_a2)
                    d_prev = d_ein2[..., :c]

                approx_params = opt_a.step(approx_params, _clip_grads(g_a))
                ens_params = opt_e.step(ens_params, _clip_grads(g_e))
                state = _softmax(s)
                if unroll_len > 1:
                    window.append((cache_a, cache_e, state, p_up))
                prev = state
        if log_fn:
            log_fn(epoch, float(np.mean(losses)) if losses else 0.0)
    return approx_params, ens_params


def evaluate_sequences(
    seqs: Sequence[VideoSequence],
    nets: PipelineNets,
    sched: ScheduleConfig,
    table: ClassTable,
) -> Tuple[MetricsReport, ConfusionMatrix]:
    """Aggregate confusion over every labeled frame of every sequence."""
    cm = ConfusionMatrix.empty(table.num_scored)
    for seq in seqs:
        result = segment_sequence(seq, nets, sched, table)
        for frame, pred in zip(seq.frames, result.labels):
            if frame.label is not None:
                cm = accumulate(cm, frame.label, pred, table)
    return compute_report(cm, table), cm


def per_frame_confusions(
    seqs: Sequence[VideoSequence],
    nets: PipelineNets,
    sched: ScheduleConfig,
    table: ClassTable,
) -> List[ConfusionMatrix]:
    """Confusion matrices aggregated by frame position across sequences."""
    length = min(len(seq) for seq in seqs)
    cms = [ConfusionMatrix.empty(table.num_scored) for _ in range(length)]
    for seq in seqs:
        result = segment_sequence(seq, nets, sched, table)
        for t in range(length):
            if seq.frames[t].label is not None:
                cms[t] = accumulate(cms[t], seq.frames[t].label, result.labels[t], table)
    return cms


def evaluate_approx_only(
    seqs: Sequence[VideoSequence],
    approx: Network,
    downsample_factor: int,
    table: ClassTable,
) -> Tuple[MetricsReport, ConfusionMatrix]:
    cm = ConfusionMatrix.empty(table.num_scored)
    for seq in seqs:
        preds = approx_only_labels(seq, approx, downsample_factor, table)
        for frame, pred in zip(seq.frames, preds):
            if frame.label is not None:
                cm = accumulate(cm, frame.label, pred, table)
    return compute_report(cm, table), cm


def calibrate_cost_model(
    nets: PipelineNets,
    frame_height: int,
    frame_width: int,
    downsample_factor: int,
    repeats: int = 30,
    seed: int = 0,
) -> CostModel:
    """Measure each network's forward time on one synthetic frame.

    The median over ``repeats`` runs resists scheduler jitter. The result is
    machine-specific by design; persist it next to any report that quotes
    relative runtimes.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rng = np.random.default_rng(seed)
    xb = rng.random((1, frame_height, frame_width, 3))
    th, tw = _approx_input_dims(frame_height, frame_width, downsample_factor)
    ds = _resize_batch(xb, th, tw)
    a, _ = forward_batch(nets.approx.spec, nets.approx.params, ds)
    up = _softmax(_resize_batch(a, frame_height, frame_width))
    ein = np.concatenate([up, up], axis=3)

    def med(fn) -> float:
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        return float(np.median(times))

    t_prime = med(lambda: forward_batch(nets.priming.spec, nets.priming.params, xb))
    t_approx = med(lambda: forward_batch(nets.approx.spec, nets.approx.params, ds))
    t_ens = med(lambda: forward_batch(nets.ensemble.spec, nets.ensemble.params, ein))
    tiny = 1e-9
    return CostModel(max(t_prime, tiny), max(t_approx, tiny), max(t_ens, tiny))


def write_cost_trace_csv(
    traces: Sequence[Tuple[str, Sequence[FrameCost]]], path: str
) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sequence", "frame", "primed", "cost"])
        for name, trace in traces:
            for fc in trace:
                w.writerow([name, str(fc.frame), str(int(fc.primed)), repr(fc.cost)])


def _fmt_period(k: float) -> str:
    return "inf" if math.isinf(k) else str(int(k))


def write_budget_csv(curve: Sequence[Tuple[float, float]], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "relative_runtime"])
        for k, rel in curve:
            w.writerow([_fmt_period(k), repr(rel)])
