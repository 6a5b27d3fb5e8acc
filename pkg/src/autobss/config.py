"""Flat dotted-key configuration files for search runs.

Format: one `key = value` pair per line, `#` comments, no sections.
Unknown keys are rejected so typos fail loudly instead of silently
running with defaults.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

from .errors import ConfigError
from .refine import RefinerConfig
from .search import SearchConfig

_BOOL = {"true": True, "false": False, "yes": True, "no": False,
         "1": True, "0": False}


@dataclass(frozen=True)
class EvaluatorSpec:
    kind: str = "synthetic"  # synthetic | external
    seed: Optional[int] = None  # synthetic: defaults to the search seed
    noise_scale: float = 0.0
    rugged: bool = False
    command: str = ""
    exchange_dir: str = ""
    poll_interval: float = 1.0
    timeout: float = 3600.0


@dataclass(frozen=True)
class RunSpec:
    search: SearchConfig
    evaluator: EvaluatorSpec
    journal: Optional[str] = None
    trajectory: Optional[str] = None


def parse_pairs(text: str, source: str = "<config>") -> Dict[str, str]:
    pairs: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or key in pairs:
            raise ConfigError(f"{source}:{lineno}: empty or repeated key")
        pairs[key] = value
    return pairs


def _convert(key: str, value: str, kind):
    try:
        if kind is bool:
            return _BOOL[value.lower()]
        return kind(value)
    except (ValueError, KeyError) as exc:
        raise ConfigError(
            f"bad value for {key}: {value!r} (expected {kind.__name__})"
        ) from exc


_SEARCH_KEYS = {
    "family": str, "metric": str, "threshold": int,
    "candidate_size": int, "iterations": int, "batch_size": int,
    "mc_samples": int, "eta": float, "seed": int,
    "input_resolution": int, "fixed_stage_scale": float,
}
_REFINER_KEYS = {
    "learning_rate": float, "steps": int, "quadruplets_per_step": int,
    "denominator_floor": float, "grad_clip": float,
    "holdout_quadruplets": int,
}
_EVALUATOR_KEYS = {
    "kind": str, "seed": int, "noise_scale": float, "rugged": bool,
    "command": str, "exchange_dir": str, "poll_interval": float,
    "timeout": float,
}
_OUTPUT_KEYS = {"journal": str, "trajectory": str}


def load_run_spec(path: str) -> RunSpec:
    with open(path, encoding="utf-8") as fh:
        pairs = parse_pairs(fh.read(), source=path)

    search_kw, refiner_kw, eval_kw, out_kw = {}, {}, {}, {}
    for key, value in pairs.items():
        if key in _SEARCH_KEYS:
            search_kw[key] = _convert(key, value, _SEARCH_KEYS[key])
        elif key.startswith("refiner.") and key[8:] in _REFINER_KEYS:
            sub = key[8:]
            refiner_kw[sub] = _convert(key, value, _REFINER_KEYS[sub])
        elif key.startswith("evaluator.") and key[10:] in _EVALUATOR_KEYS:
            sub = key[10:]
            eval_kw[sub] = _convert(key, value, _EVALUATOR_KEYS[sub])
        elif key.startswith("output.") and key[7:] in _OUTPUT_KEYS:
            out_kw[key[7:]] = value
        else:
            raise ConfigError(f"{path}: unknown key {key!r}")

    if "family" not in search_kw:
        raise ConfigError(f"{path}: missing required key 'family'")
    evaluator = EvaluatorSpec(**eval_kw)
    if evaluator.kind not in ("synthetic", "external"):
        raise ConfigError(f"evaluator.kind must be synthetic or external, "
                          f"got {evaluator.kind!r}")
    if evaluator.kind == "external" and not evaluator.command:
        raise ConfigError("external evaluator requires evaluator.command")
    search = SearchConfig(refiner=RefinerConfig(**refiner_kw), **search_kw)
    return RunSpec(search=search, evaluator=evaluator,
                   journal=out_kw.get("journal"),
                   trajectory=out_kw.get("trajectory"))
