"""Iterated batch search over a constrained candidate set.

Each iteration retrains the metric refiner (from iteration 2 on),
clusters the refined candidate set with a growing cluster count, snaps
centroids to unevaluated candidates, and picks a batch by greedy
EI/EEI.  Every step appends a JSON record to an append-only journal so
interrupted runs resume at the last complete iteration and replay
byte-identically.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, TextIO, Tuple

import numpy as np

from . import cluster, gp
from .candidates import CandidateSet, build
from .cost import Constraint, cost_of
from .errors import ConfigError
from .refine import LinearRefiner, RefinerConfig, train
from .space import (Code, SearchSpace, format_code, original_code,
                    preset_space, standardize_all, to_external)


@dataclass(frozen=True)
class SearchConfig:
    family: str
    metric: str = "flops"
    threshold: Optional[int] = None  # None: cost of the original code
    candidate_size: int = 10000
    iterations: int = 4
    batch_size: int = 16
    mc_samples: int = 128
    eta: float = 0.1
    seed: int = 0
    input_resolution: Optional[int] = None
    fixed_stage_scale: float = 1.0
    refiner: RefinerConfig = field(default_factory=RefinerConfig)

    def __post_init__(self):
        if self.iterations < 1 or self.batch_size < 1:
            raise ConfigError("iterations and batch_size must be >= 1")
        if self.candidate_size < self.batch_size * self.iterations:
            raise ConfigError(
                "candidate_size must cover the full evaluation budget")

    def space(self) -> SearchSpace:
        return preset_space(self.family,
                            input_resolution=self.input_resolution,
                            fixed_stage_scale=self.fixed_stage_scale)

    def constraint(self, space: SearchSpace) -> Constraint:
        threshold = self.threshold
        if threshold is None:
            report = cost_of(original_code(space), space)
            threshold = getattr(report, self.metric)
        return Constraint(self.metric, int(threshold))

    def to_payload(self) -> Dict:
        payload = asdict(self)
        payload["refiner"] = asdict(self.refiner)
        return payload

    @classmethod
    def from_payload(cls, payload: Dict) -> "SearchConfig":
        payload = dict(payload)
        payload["refiner"] = RefinerConfig(**payload.get("refiner", {}))
        return cls(**payload)


@dataclass(frozen=True)
class Observation:
    index: int  # position in the candidate set
    code: Code
    accuracy: float
    iteration: int


@dataclass(frozen=True)
class SearchResult:
    config: SearchConfig
    history: Tuple[Observation, ...]  # iteration order, then eval order
    best: Observation
    per_iteration_best: Tuple[float, ...]

    def sorted_history(self) -> List[Observation]:
        """Within each iteration, ascending accuracy (reporting order)."""
        out: List[Observation] = []
        for it in range(1, self.config.iterations + 1):
            batch = [o for o in self.history if o.iteration == it]
            out.extend(sorted(batch, key=lambda o: o.accuracy))
        return out


# --- journal -----------------------------------------------------------------


def candidates_digest(cands: CandidateSet) -> str:
    h = hashlib.sha256()
    for code in cands.codes:
        h.update(",".join(str(v) for v in code).encode())
        h.update(b"\n")
    return h.hexdigest()


class Journal:
    """Append-only JSON-lines record stream, flushed per record."""

    def __init__(self, path: Optional[str], append: bool = False):
        self.path = path
        self._fh: Optional[TextIO] = None
        if path is not None:
            self._fh = open(path, "a" if append else "w", encoding="utf-8")

    def append(self, record_type: str, iteration: int, payload: Dict) -> None:
        if self._fh is None:
            return
        rec = {"record_type": record_type, "iteration": iteration,
               "payload": payload}
        self._fh.write(json.dumps(rec, sort_keys=True) + "\n")
        self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def read_journal(path: str) -> List[Dict]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    records = []
    for pos, line in enumerate(lines):
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            if pos == len(lines) - 1:
                break  # partial trailing record from an interrupted write
            raise
    return records


def _rng(seed: int, *key: int) -> np.random.Generator:
    # independent streams per (iteration, purpose); replay needs no
    # generator state to be carried across iterations
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))

_CANDIDATE_STREAM = 0
_REFINE_STREAM = 1
_CLUSTER_STREAM = 2
_ACQUIRE_STREAM = 3
_RANDOM_STREAM = 4


def build_candidates(config: SearchConfig,
                     space: Optional[SearchSpace] = None) -> CandidateSet:
    if space is None:
        space = config.space()
    constraint = config.constraint(space)
    rng = _rng(config.seed, _CANDIDATE_STREAM)
    return build(space, constraint, config.candidate_size, rng,
                 seed=config.seed)


# --- main loop ---------------------------------------------------------------


def _backfill(reps: List[int], need: int, refined: np.ndarray,
              clustering: cluster.Clustering, evaluated: set) -> List[int]:
    """Top up a short representative pool with the next-nearest
    unevaluated candidates (distance to their own centroid)."""
    taken = set(reps) | evaluated
    pool = np.flatnonzero([i not in taken for i in range(len(refined))])
    if len(pool) == 0:
        return reps
    cent = clustering.centroids[clustering.assignment[pool]]
    dist = np.sum((refined[pool] - cent) ** 2, axis=1)
    order = pool[np.argsort(dist, kind="stable")]
    return reps + [int(i) for i in order[:need - len(reps)]]


def run(config: SearchConfig, evaluator,
        journal_path: Optional[str] = None,
        candidates: Optional[CandidateSet] = None,
        _restored: Optional[List[Observation]] = None) -> SearchResult:
    """Full search; see the module docstring for the per-iteration plan."""
    space = config.space()
    if candidates is None:
        candidates = build_candidates(config, space)
    cands = candidates
    n = len(cands.codes)
    z = standardize_all(cands.codes, cands.stats)

    journal = Journal(journal_path, append=bool(_restored))
    observations: List[Observation] = list(_restored or [])
    start_iteration = 1 + max((o.iteration for o in observations), default=0)
    if not observations:
        journal.append("config", 0, config.to_payload())
        journal.append("candidates", 0,
                       {"size": n, "digest": candidates_digest(cands),
                        "exhausted": cands.exhausted})
    try:
        for it in range(start_iteration, config.iterations + 1):
            evaluated = {o.index for o in observations}
            obs_y = [o.accuracy for o in observations]

            if it == 1:
                refiner = LinearRefiner.identity(space.m, config.refiner)
            else:
                pairs = [(z[o.index], o.accuracy) for o in observations]
                refiner = train(pairs, config.refiner,
                                _rng(config.seed, _REFINE_STREAM, it))
            journal.append("refiner", it,
                           {"trained": refiner.trained,
                            "weight": refiner.weight.tolist()})
            refined = refiner.refine(z)

            k = cluster.schedule(it, n, config.batch_size)
            clustering = cluster.kmeans(
                refined, k, _rng(config.seed, _CLUSTER_STREAM, it))
            reps = cluster.representatives(clustering, refined, evaluated)
            journal.append("clustering", it,
                           {"k": k, "inertia": clustering.inertia,
                            "iterations": clustering.iterations,
                            "representatives": reps})

            if it == 1:
                batch = reps[:config.batch_size]
                extra = {"source": "representatives"}
            else:
                sigma = gp.sigma_heuristic(
                    refiner.refine(z[[o.index for o in observations]]),
                    obs_y,
                    [i for i, o in enumerate(observations)
                     if o.iteration == 1])
                model = gp.fit(refined[[o.index for o in observations]],
                               obs_y, sigma, config.eta)
                want = min(config.batch_size, len(reps))
                picks = gp.select_batch(
                    model, refined[reps], want, config.mc_samples,
                    _rng(config.seed, _ACQUIRE_STREAM, it))
                batch = [reps[j] for j in picks]
                extra = {"source": "acquisition", "sigma": sigma,
                         "tau": model.tau}
            if len(batch) < config.batch_size:
                batch = _backfill(batch, config.batch_size, refined,
                                  clustering, evaluated)
            journal.append("batch", it, dict(indices=batch, **extra))

            codes = [cands.codes[i] for i in batch]
            accs = evaluator.evaluate_batch(codes)
            for idx, code, acc in zip(batch, codes, accs):
                obs = Observation(index=idx, code=code, accuracy=float(acc),
                                  iteration=it)
                observations.append(obs)
                journal.append("evaluation", it,
                               {"index": idx,
                                "code": list(to_external(code, space)),
                                "accuracy": obs.accuracy})

        best = max(observations, key=lambda o: o.accuracy)
        per_it = tuple(
            max(o.accuracy for o in observations if o.iteration == it)
            for it in range(1, config.iterations + 1))
        journal.append("result", config.iterations,
                       {"best_code": list(to_external(best.code, space)),
                        "best_accuracy": best.accuracy})
    finally:
        journal.close()
    return SearchResult(config=config, history=tuple(observations),
                        best=best, per_iteration_best=per_it)


def random_search(config: SearchConfig, evaluator,
                  journal_path: Optional[str] = None,
                  candidates: Optional[CandidateSet] = None) -> SearchResult:
    """Same budget, uniform draws from the candidate set, no surrogate."""
    space = config.space()
    if candidates is None:
        candidates = build_candidates(config, space)
    cands = candidates
    rng = _rng(config.seed, _RANDOM_STREAM)
    budget = config.iterations * config.batch_size
    chosen = rng.choice(len(cands.codes), size=budget, replace=False)

    journal = Journal(journal_path)
    journal.append("config", 0,
                   dict(config.to_payload(), baseline="random"))
    journal.append("candidates", 0,
                   {"size": len(cands.codes),
                    "digest": candidates_digest(cands),
                    "exhausted": cands.exhausted})
    observations: List[Observation] = []
    try:
        for it in range(1, config.iterations + 1):
            batch = [int(i) for i in
                     chosen[(it - 1) * config.batch_size:
                            it * config.batch_size]]
            journal.append("batch", it,
                           {"indices": batch, "source": "random"})
            codes = [cands.codes[i] for i in batch]
            accs = evaluator.evaluate_batch(codes)
            for idx, code, acc in zip(batch, codes, accs):
                obs = Observation(index=idx, code=code, accuracy=float(acc),
                                  iteration=it)
                observations.append(obs)
                journal.append("evaluation", it,
                               {"index": idx,
                                "code": list(to_external(code, space)),
                                "accuracy": obs.accuracy})
        best = max(observations, key=lambda o: o.accuracy)
        per_it = tuple(
            max(o.accuracy for o in observations if o.iteration == it)
            for it in range(1, config.iterations + 1))
        journal.append("result", config.iterations,
                       {"best_code": list(to_external(best.code, space)),
                        "best_accuracy": best.accuracy})
    finally:
        journal.close()
    return SearchResult(config=config, history=tuple(observations),
                        best=best, per_iteration_best=per_it)


# --- resume ------------------------------------------------------------------


def resume(journal_path: str, evaluator,
           candidates: Optional[CandidateSet] = None) -> SearchResult:
    """Continue an interrupted search from its journal.

    The journal is truncated back to the last complete iteration; later
    iterations re-run from the restored observations and derived seeds,
    reproducing what an uninterrupted run would have written.
    """
    records = read_journal(journal_path)
    if not records or records[0]["record_type"] != "config":
        raise ConfigError(f"{journal_path}: not a search journal")
    config = SearchConfig.from_payload(records[0]["payload"])

    space = config.space()
    if candidates is None:
        candidates = build_candidates(config, space)
    cand_rec = next((r for r in records if r["record_type"] == "candidates"),
                    None)
    if cand_rec is not None and \
            cand_rec["payload"]["digest"] != candidates_digest(candidates):
        raise ConfigError("journal was written against a different "
                          "candidate set")

    restored: List[Observation] = []
    keep = 0
    for it in range(1, config.iterations + 1):
        evals = [r for r in records
                 if r["record_type"] == "evaluation"
                 and r["iteration"] == it]
        if len(evals) < config.batch_size:
            break
        for r in evals:
            idx = int(r["payload"]["index"])
            restored.append(Observation(
                index=idx, code=candidates.codes[idx],
                accuracy=float(r["payload"]["accuracy"]), iteration=it))
        keep = it

    # rewrite the journal as the prefix up to the last complete iteration
    prefix = [r for r in records
              if r["iteration"] <= keep and r["record_type"] != "result"]
    with open(journal_path, "w", encoding="utf-8") as fh:
        for rec in prefix:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    return run(config, evaluator, journal_path=journal_path,
               candidates=candidates, _restored=restored)


# --- reporting ---------------------------------------------------------------


def write_trajectory(result: SearchResult, space: SearchSpace,
                     path: str) -> None:
    """CSV of evaluations sorted within each iteration by accuracy."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "rank", "accuracy", "code"])
        for it in range(1, result.config.iterations + 1):
            batch = sorted((o for o in result.history if o.iteration == it),
                           key=lambda o: o.accuracy)
            for rank, obs in enumerate(batch, start=1):
                writer.writerow([it, rank, repr(obs.accuracy),
                                 format_code(obs.code, space)])
