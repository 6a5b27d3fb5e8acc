"""Analytic cost model: multiply-accumulate and parameter counting.

FLOPs figures follow the multiply-accumulate (MAC) convention: one MAC per
conv/fully-connected weight application.  Batch-norm and activation FLOPs
are not counted; squeeze-excitation FLOPs are.  Parameters cover conv
weights (bias-free, batch-norm follows every conv), batch-norm scale/shift,
squeeze-excitation weights and biases, and the classifier weights and bias.

Besides the plan walker, :class:`CostModel` precomputes per-stage lookup
tables over the value grids of a search space so that whole batches of
codes can be costed with a handful of array gathers; this is the hot path
of candidate sampling.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _core
from .space import Code, NetworkPlan, SearchSpace, StageSpec, decode


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class CostReport:
    flops: int
    params: int
    per_stage: Tuple[Tuple[int, int, int], ...]  # (stage_id, flops, params)


@dataclass(frozen=True)
class Constraint:
    metric: str  # "flops" | "params"
    threshold: int

    def __post_init__(self):
        if self.metric not in ("flops", "params"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")


def _conv(cin: int, cout: int, k: int, h_out: int, groups: int = 1,
          bn: bool = True) -> Tuple[int, int]:
    macs = k * k * (cin // groups) * cout * h_out * h_out
    params = k * k * (cin // groups) * cout + (2 * cout if bn else 0)
    return macs, params


def _se(channels: int, reduced: int) -> Tuple[int, int]:
    # two 1x1 convs with biases on the pooled 1x1 map
    macs = 2 * channels * reduced
    params = 2 * channels * reduced + reduced + channels
    return macs, params


def _block_cost(kind: str, cin: int, cout: int, inner: int, stride: int,
                kernel: int, se_ratio: float, h_in: int) -> Tuple[int, int, int]:
    """Cost of one block; returns (flops, params, h_out)."""
    h_out = _ceil_div(h_in, stride)
    f = p = 0
    if kind == "basic":
        if stride != 1 or cin != cout:
            df, dp = _conv(cin, cout, 1, h_out)
            f, p = f + df, p + dp
        for c_from, c_to, s in ((cin, cout, stride), (cout, cout, 1)):
            df, dp = _conv(c_from, c_to, kernel, h_out)
            f, p = f + df, p + dp
    elif kind == "bottleneck":
        if stride != 1 or cin != cout:
            df, dp = _conv(cin, cout, 1, h_out)
            f, p = f + df, p + dp
        df, dp = _conv(cin, inner, 1, h_in)
        f, p = f + df, p + dp
        df, dp = _conv(inner, inner, kernel, h_out)
        f, p = f + df, p + dp
        df, dp = _conv(inner, cout, 1, h_out)
        f, p = f + df, p + dp
    elif kind == "mbconv":
        expanded = cin * inner
        if inner != 1:
            df, dp = _conv(cin, expanded, 1, h_in)
            f, p = f + df, p + dp
        df, dp = _conv(expanded, expanded, kernel, h_out, groups=expanded)
        f, p = f + df, p + dp
        if se_ratio > 0:
            df, dp = _se(expanded, max(1, int(cin * se_ratio)))
            f, p = f + df, p + dp
        df, dp = _conv(expanded, cout, 1, h_out)
        f, p = f + df, p + dp
    else:
        raise ValueError(f"unknown block kind {kind!r}")
    return f, p, h_out


def _stage_cost(stage: StageSpec, h_in: int) -> Tuple[int, int, int]:
    f = p = 0
    cin, h = stage.in_channels, h_in
    for b in range(stage.repeats):
        s = stage.stride if b == 0 else 1
        df, dp, h = _block_cost(stage.kind, cin, stage.out_channels,
                                stage.inner, s, stage.kernel,
                                stage.se_ratio, h)
        cin = stage.out_channels
        f, p = f + df, p + dp
    return f, p, h


def count(plan: NetworkPlan) -> CostReport:
    per_stage: List[Tuple[int, int, int]] = []
    h = _ceil_div(plan.resolution, plan.stem.stride)
    f, p = _conv(3, plan.stem.out_channels, plan.stem.kernel, h)
    if plan.stem.maxpool:
        h = _ceil_div(h, 2)
    per_stage.append((1, f, p))

    for stage in plan.stages:
        f, p, h = _stage_cost(stage, h)
        per_stage.append((stage.stage_id, f, p))

    hf = hp = 0
    if plan.head.conv_channels:
        last_out = plan.stages[-1].out_channels
        hf, hp = _conv(last_out, plan.head.conv_channels, 1, h)
    hf += plan.head.classifier_in * plan.head.classifier_out
    hp += plan.head.classifier_in * plan.head.classifier_out \
        + plan.head.classifier_out
    per_stage.append((plan.stages[-1].stage_id + 1, hf, hp))

    return CostReport(flops=sum(r[1] for r in per_stage),
                      params=sum(r[2] for r in per_stage),
                      per_stage=tuple(per_stage))


def cost_of(code: Sequence[int], space: SearchSpace) -> CostReport:
    return count(decode(code, space))


def satisfies(code: Sequence[int], space: SearchSpace,
              constraint: Constraint,
              model: Optional["CostModel"] = None) -> bool:
    if model is not None:
        value = model.metric_of(tuple(code), constraint.metric)
    else:
        report = cost_of(code, space)
        value = getattr(report, constraint.metric)
    return value <= constraint.threshold


def stage_profile(code: Sequence[int], space: SearchSpace):
    """Per-stage (stage_id, flops, params, flops_share) rows."""
    report = cost_of(code, space)
    total = float(report.flops)
    return [(sid, f, p, f / total) for sid, f, p in report.per_stage]


def stage_profile_csv(code: Sequence[int], space: SearchSpace) -> str:
    lines = ["stage,flops,params,flops_share"]
    for sid, f, p, share in stage_profile(code, space):
        lines.append(f"{sid},{f},{p},{share:.9f}")
    return "\n".join(lines) + "\n"


class CostModel:
    """Grid-indexed cost tables for one search space.

    Every searched stage touches at most four code dimensions (previous
    channels, own channels, repeats, bottleneck/expansion), so its flops
    and params fit in a small dense table indexed by grid positions.  A
    whole code costs a base term plus one gather per stage, which is what
    makes batched feasibility counting cheap.
    """

    def __init__(self, space: SearchSpace):
        self.space = space
        lay = space.layout
        self._value_index: List[Dict[int, int]] = [
            {v: i for i, v in enumerate(d.values)} for d in space.dims]

        # spatial size entering each searched stage is code-independent
        h = _ceil_div(space.input_resolution, lay.stem_stride)
        if lay.stem_pool:
            h = _ceil_div(h, 2)
        for fs in lay.fixed_stages:
            h = _ceil_div(h, fs.stride)
        h_in = []
        for stride in lay.strides:
            h_in.append(h)
            h = _ceil_div(h, stride)
        self._head_h = h

        n = len(lay.stage_ids)
        base_f = base_p = 0

        # stem: fixed width, or a 1-dim table following the first C dim
        stem_tables: List[Tuple[np.ndarray, np.ndarray, Tuple[int, ...]]] = []
        h_stem = _ceil_div(space.input_resolution, lay.stem_stride)
        if lay.stem_channels is not None:
            f, p = _conv(3, lay.stem_channels, lay.stem_kernel, h_stem)
            base_f, base_p = base_f + f, base_p + p
            cin0 = lay.stem_channels
        else:
            grid = space.dims[0].values
            tf = np.empty(len(grid), dtype=np.int64)
            tp = np.empty(len(grid), dtype=np.int64)
            for i, c in enumerate(grid):
                tf[i], tp[i] = _conv(3, c, lay.stem_kernel, h_stem)
            stem_tables.append((tf, tp, (0,)))
            cin0 = None  # first searched stage reads its own C dim

        h_fixed = _ceil_div(h_stem, 2) if lay.stem_pool else h_stem
        for fs in lay.fixed_stages:
            stage = StageSpec(fs.stage_id, lay.block_kind, fs.repeats,
                              lay.stem_channels, fs.out_channels,
                              fs.expansion, fs.stride, fs.kernel,
                              lay.se_ratio)
            f, p, h_fixed = _stage_cost(stage, h_fixed)
            base_f, base_p = base_f + f, base_p + p
            cin0 = fs.out_channels

        self._tables = list(stem_tables)
        for i, sid in enumerate(lay.stage_ids):
            dim_ids: List[int] = []
            if i > 0:
                dim_ids.append(i - 1)  # previous stage channels
            dim_ids += [i, n + i]
            if lay.block_kind in ("bottleneck", "mbconv"):
                dim_ids.append(2 * n + i)
            shape = tuple(len(space.dims[d].values) for d in dim_ids)
            tf = np.empty(shape, dtype=np.int64)
            tp = np.empty(shape, dtype=np.int64)
            for pos in product(*(range(s) for s in shape)):
                vals = [space.dims[d].values[j] for d, j in zip(dim_ids, pos)]
                if i > 0:
                    cin, cout, reps = vals[0], vals[1], vals[2]
                    extra = vals[3] if len(vals) > 3 else 0
                else:
                    cout, reps = vals[0], vals[1]
                    extra = vals[2] if len(vals) > 2 else 0
                    cin = cin0 if cin0 is not None else cout
                if lay.block_kind == "bottleneck":
                    inner = extra * cout // 8
                elif lay.block_kind == "mbconv":
                    inner = extra
                else:
                    inner = 0
                stage = StageSpec(sid, lay.block_kind, reps, cin, cout,
                                  inner, lay.strides[i], lay.kernels[i],
                                  lay.se_ratio)
                tf[pos], tp[pos], _ = _stage_cost(stage, h_in[i])
            self._tables.append((tf, tp, tuple(dim_ids)))

        # head: depends only on the last searched C dim
        grid = space.dims[n - 1].values
        tf = np.empty(len(grid), dtype=np.int64)
        tp = np.empty(len(grid), dtype=np.int64)
        for i, c in enumerate(grid):
            f = p = 0
            if lay.head_conv_channels:
                f, p = _conv(c, lay.head_conv_channels, 1, self._head_h)
            cls_in = lay.head_conv_channels if lay.head_conv_channels else c
            f += cls_in * space.num_classes
            p += cls_in * space.num_classes + space.num_classes
            tf[i], tp[i] = f, p
        self._tables.append((tf, tp, (n - 1,)))

        self._base = {"flops": base_f, "params": base_p}
        self._gather = {
            "flops": _core.prepare_tables(
                [(tf, dims) for tf, _, dims in self._tables]),
            "params": _core.prepare_tables(
                [(tp, dims) for _, tp, dims in self._tables]),
        }

    # -- index handling -------------------------------------------------

    def index_of(self, code: Sequence[int]) -> np.ndarray:
        return np.array([vi[v] for vi, v in zip(self._value_index, code)],
                        dtype=np.int64)

    def indices_of(self, codes: Sequence[Code]) -> np.ndarray:
        out = np.empty((len(codes), self.space.m), dtype=np.int64)
        for r, code in enumerate(codes):
            for c, (vi, v) in enumerate(zip(self._value_index, code)):
                out[r, c] = vi[v]
        return out

    # -- costing --------------------------------------------------------

    def metric_of(self, code: Sequence[int], metric: str = "flops") -> int:
        try:
            idx = self.index_of(code)
        except KeyError:
            # off-grid code: fall back to the plan walker
            report = cost_of(code, self.space)
            return getattr(report, metric)
        return int(self.batch_metric(idx[None, :], metric)[0])

    def batch_metric(self, idx: np.ndarray, metric: str = "flops") -> np.ndarray:
        return _core.gather_cost(self._base[metric], self._gather[metric], idx)

    def satisfies_indices(self, idx: np.ndarray,
                          constraint: Constraint) -> np.ndarray:
        return self.batch_metric(idx, constraint.metric) <= constraint.threshold
