"""Candidate set construction under a cost constraint.

Sampling fixes code dimensions left to right; each value is drawn with
probability proportional to the (estimated) number of feasible completions
behind it.  The estimate branches fully over the next three undecided
dimensions and collapses deeper ones to their median value times the grid
size, so it is exact whenever at most three dimensions remain undecided.
When that collapse zeroes out every value of a step (the median tail
overshoots a tight budget), the sampler re-counts with the tail pinned at
its minimum so feasible values keep nonzero weight.
Sampled codes are then pushed to the constraint boundary one grid step at
a time, in random dimension order, and deduplicated.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cost import Constraint, CostModel
from .errors import CodeValidationError, DiversityExhausted, InfeasibleSpace
from .space import (Code, SearchSpace, StandardizationStats, format_code,
                    parse_code, preset_space, validate)

DEFAULT_MAX_RESTARTS = 1000
DEFAULT_ATTEMPT_FACTOR = 50


@dataclass(frozen=True)
class Prefix:
    """The first ``len(values)`` fixed elements of a code being sampled."""

    values: Code

    @property
    def next_dim(self) -> int:
        return len(self.values)


@dataclass
class CandidateSet:
    space: SearchSpace
    codes: Tuple[Code, ...]
    stats: StandardizationStats
    constraint: Constraint
    seed: Optional[int] = None
    exhausted: bool = False

    def __len__(self) -> int:
        return len(self.codes)


def estimate_size(prefix: Sequence[int], space: SearchSpace,
                  constraint: Constraint, depth: int = 0,
                  model: Optional[CostModel] = None) -> int:
    """Recursive feasible-completion estimate for a code prefix.

    Depth counts recursion levels from this call: the next three undecided
    dimensions branch over their full grids, deeper ones recurse only on
    their median value and multiply by the grid size.  A complete prefix
    contributes 1 when it satisfies the constraint.
    """
    if model is None:
        model = CostModel(space)
    prefix = tuple(prefix)
    if len(prefix) == space.m:
        return int(model.metric_of(prefix, constraint.metric)
                   <= constraint.threshold)
    dim = space.dims[len(prefix)]
    if depth <= 2:
        return sum(
            estimate_size(prefix + (v,), space, constraint, depth + 1, model)
            for v in dim.values)
    return estimate_size(prefix + (dim.median,), space, constraint,
                         depth + 1, model) * len(dim.values)


class _Sampler:
    """Shared per-build state: cost model and per-prefix count cache."""

    def __init__(self, space: SearchSpace, constraint: Constraint,
                 model: Optional[CostModel] = None):
        self.space = space
        self.constraint = constraint
        self.model = model if model is not None else CostModel(space)
        self._counts: Dict[Code, np.ndarray] = {}
        self._cumsums: Dict[Code, np.ndarray] = {}

    def step_cumsum(self, prefix: Code) -> np.ndarray:
        cached = self._cumsums.get(prefix)
        if cached is None:
            cached = np.cumsum(self.step_counts(prefix))
            self._cumsums[prefix] = cached
        return cached

    def step_counts(self, prefix: Code) -> np.ndarray:
        """Estimated completions per candidate value of the next dimension.

        Equals ``estimate_size(prefix + (v,), depth=0)`` for every v, via
        one vectorized feasibility pass over the branching grid.
        """
        cached = self._counts.get(prefix)
        if cached is not None:
            return cached
        space, m = self.space, self.space.m
        i = len(prefix)
        # the child estimate branches dims i+1..i+3 fully: with dim i
        # itself that is a grid over dims i..j_full
        j_full = min(i + 3, m - 1)
        grid_dims = list(range(i, j_full + 1))
        shape = tuple(len(space.dims[d].values) for d in grid_dims)
        n_rows = int(np.prod(shape))

        idx = np.empty((n_rows, m), dtype=np.int64)
        for d, v in enumerate(prefix):
            idx[:, d] = space.dims[d].values.index(v)
        grids = np.indices(shape).reshape(len(grid_dims), n_rows)
        for g, d in enumerate(grid_dims):
            idx[:, d] = grids[g]
        multiplier = 1
        for d in range(j_full + 1, m):
            idx[:, d] = len(space.dims[d].values) // 2  # median index
            multiplier *= len(space.dims[d].values)

        feasible = self.model.satisfies_indices(idx, self.constraint)
        counts = feasible.reshape(shape[0], -1).sum(axis=1) * multiplier
        if j_full + 1 < m and not counts.any():
            # on tight constraints the median completion can overshoot
            # for every branch even when the space is feasible; fall back
            # to pinning the unbranched tail at its minimum, which (cost
            # being monotone) counts a value iff its cheapest completion
            # fits and so never strands a draw mid-code
            idx[:, j_full + 1:] = 0
            feasible = self.model.satisfies_indices(idx, self.constraint)
            counts = feasible.reshape(shape[0], -1).sum(axis=1) * multiplier
        counts = counts.astype(np.int64)
        self._counts[prefix] = counts
        return counts


def sample_code(space: SearchSpace, constraint: Constraint,
                rng: np.random.Generator,
                model: Optional[CostModel] = None,
                max_restarts: int = DEFAULT_MAX_RESTARTS,
                sampler: Optional[_Sampler] = None) -> Code:
    """Draw one feasible code by sequential completion-weighted sampling."""
    if sampler is None:
        sampler = _Sampler(space, constraint, model)
    for _ in range(max_restarts):
        values: Code = ()
        for i in range(space.m):
            cumsum = sampler.step_cumsum(values)
            total = int(cumsum[-1])
            if total == 0:
                break  # dead end: restart the whole draw
            # inverse-cdf draw proportional to the completion counts
            j = int(np.searchsorted(cumsum, rng.random() * total,
                                    side="right"))
            values = values + (space.dims[i].values[j],)
        else:
            return values
    raise InfeasibleSpace(
        f"no feasible code found in {max_restarts} restarts")


def maximize_code(code: Sequence[int], space: SearchSpace,
                  constraint: Constraint, rng: np.random.Generator,
                  model: Optional[CostModel] = None) -> Code:
    """Advance random dimensions one grid step each while feasible.

    Cost is monotone in every dimension, so a dimension that cannot
    advance now never becomes advanceable again and is dropped.
    """
    if model is None:
        model = CostModel(space)
    idx = model.index_of(code)
    active = [d for d in range(space.m)
              if idx[d] + 1 < len(space.dims[d].values)]
    while active:
        pos = int(rng.integers(len(active)))
        d = active[pos]
        idx[d] += 1
        if model.batch_metric(idx[None, :], constraint.metric)[0] \
                <= constraint.threshold:
            if idx[d] + 1 >= len(space.dims[d].values):
                active.pop(pos)
        else:
            idx[d] -= 1
            active.pop(pos)
    return tuple(space.dims[d].values[int(i)] for d, i in enumerate(idx))


def is_maximal(code: Sequence[int], space: SearchSpace,
               constraint: Constraint,
               model: Optional[CostModel] = None) -> bool:
    """Exhaustive single-step check used by audits and tests."""
    if model is None:
        model = CostModel(space)
    code = tuple(code)
    for d in range(space.m):
        values = space.dims[d].values
        i = values.index(code[d])
        if i + 1 < len(values):
            bumped = code[:d] + (values[i + 1],) + code[d + 1:]
            if model.metric_of(bumped, constraint.metric) \
                    <= constraint.threshold:
                return False
    return True


def build(space: SearchSpace, constraint: Constraint, target_size: int,
          rng: np.random.Generator, model: Optional[CostModel] = None,
          seed: Optional[int] = None,
          attempt_factor: int = DEFAULT_ATTEMPT_FACTOR) -> CandidateSet:
    """Sample, maximize and deduplicate codes until ``target_size`` are
    collected (or attempts run out, which flags the partial set)."""
    if target_size < 1:
        raise ValueError("target_size must be >= 1")
    sampler = _Sampler(space, constraint, model)
    seen = set()
    ordered: List[Code] = []
    attempts = 0
    max_attempts = attempt_factor * target_size
    while len(ordered) < target_size and attempts < max_attempts:
        attempts += 1
        code = sample_code(space, constraint, rng, sampler=sampler)
        code = maximize_code(code, space, constraint, rng,
                             model=sampler.model)
        if code not in seen:
            seen.add(code)
            ordered.append(code)
    exhausted = len(ordered) < target_size
    if exhausted:
        warnings.warn(
            f"candidate diversity exhausted: {len(ordered)} distinct "
            f"maximal codes after {attempts} attempts "
            f"(requested {target_size})", stacklevel=2)
    stats = StandardizationStats.from_codes(ordered)
    return CandidateSet(space=space, codes=tuple(ordered), stats=stats,
                        constraint=constraint, seed=seed,
                        exhausted=exhausted)


# --- candidate set files -----------------------------------------------------


def save_candidates(cands: CandidateSet, path: str) -> None:
    seed = "none" if cands.seed is None else str(cands.seed)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# family={cands.space.preset} "
                 f"metric={cands.constraint.metric} "
                 f"threshold={cands.constraint.threshold} seed={seed}\n")
        for code in cands.codes:
            fh.write(format_code(code, cands.space) + "\n")


def load_candidates(path: str,
                    space: Optional[SearchSpace] = None) -> CandidateSet:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing candidate-set header")
        fields = dict(tok.split("=", 1)
                      for tok in header[1:].split() if "=" in tok)
        if space is None:
            space = preset_space(fields["family"])
        constraint = Constraint(fields["metric"], int(fields["threshold"]))
        seed = None if fields.get("seed") in (None, "none") \
            else int(fields["seed"])
        codes = []
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            code = parse_code(line, space)
            violations = validate(code, space)
            if violations:
                raise CodeValidationError(violations)
            codes.append(code)
    stats = StandardizationStats.from_codes(codes)
    return CandidateSet(space=space, codes=tuple(codes), stats=stats,
                        constraint=constraint, seed=seed)
