"""Accuracy evaluators behind one batch interface.

The synthetic oracle scores codes with a smooth bump over standardized
codes, deterministic per (code, seed), so full searches run in seconds
and the exact optimum over a candidate set is a full scan away.  The
external protocol hands batches to a user command through request and
response files for real training runs.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .candidates import CandidateSet
from .errors import EvaluationTimeout, EvaluatorFailure, MalformedResponse
from .space import (Code, SearchSpace, StandardizationStats, standardize,
                    standardize_all, to_external)

ORACLE_BASE = 70.0
ORACLE_AMPLITUDE = 8.0
RUGGED_AMPLITUDES = (8.0, 5.0, 3.0)


def _code_hash(code: Code, seed: int, tag: str = "") -> int:
    payload = f"{seed}|{tag}|{','.join(str(v) for v in code)}"
    digest = hashlib.blake2b(payload.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass
class SyntheticOracle:
    """Deterministic stand-in for trained-network accuracy.

    The optimum is the candidate with the highest seeded hash; accuracy
    decays with standardized-code distance from it.  The rugged variant
    adds two more bumps at the next two hash winners.
    """

    space: SearchSpace
    stats: StandardizationStats
    optima: Tuple[np.ndarray, ...]  # standardized bump centers
    amplitudes: Tuple[float, ...]
    optimum_code: Code
    seed: int
    noise_scale: float = 0.0
    base: float = ORACLE_BASE

    @classmethod
    def for_candidates(cls, cands: CandidateSet, seed: int,
                       noise_scale: float = 0.0,
                       rugged: bool = False) -> "SyntheticOracle":
        keys = [_code_hash(code, seed, "optimum") for code in cands.codes]
        order = sorted(range(len(keys)), key=lambda i: keys[i], reverse=True)
        n_bumps = 3 if rugged else 1
        centers = tuple(standardize(cands.codes[i], cands.stats)
                        for i in order[:n_bumps])
        amps = RUGGED_AMPLITUDES[:n_bumps] if rugged else (ORACLE_AMPLITUDE,)
        return cls(space=cands.space, stats=cands.stats, optima=centers,
                   amplitudes=tuple(amps), optimum_code=cands.codes[order[0]],
                   seed=seed, noise_scale=noise_scale)

    def accuracy(self, code: Sequence[int]) -> float:
        code = tuple(code)
        z = standardize(code, self.stats)
        m = self.space.m
        acc = self.base
        for center, amp in zip(self.optima, self.amplitudes):
            acc += amp * math.exp(
                -float(np.sum((z - center) ** 2)) / (2.0 * m))
        if self.noise_scale > 0.0:
            rng = np.random.default_rng(_code_hash(code, self.seed, "noise"))
            acc += self.noise_scale * float(rng.standard_normal())
        return acc

    def evaluate_batch(self, codes: Sequence[Code]) -> List[float]:
        return [self.accuracy(code) for code in codes]

    def full_scan(self, codes: Sequence[Code]) -> np.ndarray:
        """Accuracy of every code; vectorized for the noise-free case."""
        if self.noise_scale > 0.0:
            return np.asarray([self.accuracy(c) for c in codes])
        z = standardize_all(codes, self.stats)
        acc = np.full(len(z), self.base)
        for center, amp in zip(self.optima, self.amplitudes):
            acc += amp * np.exp(
                -np.sum((z - center) ** 2, axis=1) / (2.0 * self.space.m))
        return acc


@dataclass
class ExternalEvaluator:
    """File-exchange protocol around a user-supplied training command.

    A batch is written as one request file of JSON records (id, family,
    code, constraint), the command is run with the request and response
    paths substituted, and the response file is polled for matching
    (id, accuracy) records.
    """

    space: SearchSpace
    command: str  # template with {request} and {response} placeholders
    exchange_dir: str
    metric: str = "flops"
    threshold: Optional[int] = None
    poll_interval: float = 1.0
    timeout: float = 3600.0
    _next_id: int = field(default=0, repr=False)
    _batch_no: int = field(default=0, repr=False)

    def evaluate_batch(self, codes: Sequence[Code]) -> List[float]:
        os.makedirs(self.exchange_dir, exist_ok=True)
        request = os.path.join(self.exchange_dir,
                               f"request_{self._batch_no:04d}.jsonl")
        response = os.path.join(self.exchange_dir,
                                f"response_{self._batch_no:04d}.jsonl")
        self._batch_no += 1

        ids = []
        with open(request, "w", encoding="utf-8") as fh:
            for code in codes:
                rec = {"id": self._next_id,
                       "family": self.space.preset,
                       "code": list(to_external(code, self.space)),
                       "metric": self.metric,
                       "threshold": self.threshold}
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
                ids.append(self._next_id)
                self._next_id += 1

        argv = [tok.format(request=request, response=response)
                for tok in shlex.split(self.command)]
        proc = subprocess.run(argv, capture_output=True, text=True)
        if proc.returncode != 0:
            raise EvaluatorFailure(
                f"command exited {proc.returncode}: {proc.stderr.strip()}")

        deadline = time.monotonic() + self.timeout
        while not os.path.exists(response):
            if time.monotonic() >= deadline:
                raise EvaluationTimeout(
                    f"no response file after {self.timeout}s: {response}")
            time.sleep(self.poll_interval)
        return self._parse_response(response, ids)

    @staticmethod
    def _parse_response(path: str, ids: List[int]) -> List[float]:
        got = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    rid, acc = int(rec["id"]), float(rec["accuracy"])
                except (ValueError, KeyError, TypeError) as exc:
                    raise MalformedResponse(f"bad record {line!r}") from exc
                if rid in got:
                    raise MalformedResponse(f"duplicate id {rid}")
                if not math.isfinite(acc):
                    raise MalformedResponse(f"non-finite accuracy, id {rid}")
                got[rid] = acc
        missing = [i for i in ids if i not in got]
        if missing:
            raise MalformedResponse(f"response missing ids {missing}")
        return [got[i] for i in ids]
