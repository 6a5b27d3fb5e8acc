"""Linear metric refining of standardized codes.

A single weight matrix, initialized to the identity, maps standardized
codes so that ratios of Euclidean distances track ratios of accuracy
gaps.  Training minimizes the squared mismatch of those two ratios over
randomly drawn quadruplets of evaluated codes; distances under the
trained map equal a Mahalanobis distance (matrix W^T W) on the inputs.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateQuadruplet, TooFewObservations


@dataclass(frozen=True)
class RefinerConfig:
    learning_rate: float = 1e-3
    steps: int = 2000
    quadruplets_per_step: int = 16
    denominator_floor: float = 1e-6
    grad_clip: float = 10.0
    holdout_quadruplets: int = 256


@dataclass(frozen=True)
class Quadruplet:
    """Four distinct evaluated codes with their accuracies."""

    x: np.ndarray  # (4, m) standardized codes
    y: np.ndarray  # (4,) accuracies

    def check(self, floor: float) -> None:
        if abs(self.y[2] - self.y[3]) < floor:
            raise DegenerateQuadruplet("accuracy-gap denominator below floor")
        if np.linalg.norm(self.x[2] - self.x[3]) < floor:
            raise DegenerateQuadruplet("distance denominator below floor")


@dataclass(frozen=True)
class LinearRefiner:
    weight: np.ndarray
    config: RefinerConfig = field(default_factory=RefinerConfig)
    trained: bool = False

    @classmethod
    def identity(cls, m: int,
                 config: Optional[RefinerConfig] = None) -> "LinearRefiner":
        return cls(weight=np.eye(m), config=config or RefinerConfig())

    def refine(self, z: np.ndarray) -> np.ndarray:
        """Apply the linear map to one vector or a batch (rows)."""
        z = np.asarray(z, dtype=float)
        return z @ self.weight.T


def loss(q: Quadruplet, refiner: LinearRefiner) -> float:
    """Squared mismatch between the accuracy-gap ratio and the refined
    distance ratio of a quadruplet."""
    q.check(refiner.config.denominator_floor)
    xr = q.x @ refiner.weight.T
    ry = abs(q.y[0] - q.y[1]) / abs(q.y[2] - q.y[3])
    rx = np.linalg.norm(xr[0] - xr[1]) / np.linalg.norm(xr[2] - xr[3])
    return float((ry - rx) ** 2)


def loss_gradient(q: Quadruplet,
                  refiner: LinearRefiner) -> Tuple[float, np.ndarray]:
    """Loss and its analytic gradient with respect to the weight matrix."""
    q.check(refiner.config.denominator_floor)
    W = refiner.weight
    d01 = q.x[0] - q.x[1]
    d23 = q.x[2] - q.x[3]
    w01, w23 = W @ d01, W @ d23
    n01, n23 = np.linalg.norm(w01), np.linalg.norm(w23)
    ry = abs(q.y[0] - q.y[1]) / abs(q.y[2] - q.y[3])
    rx = n01 / n23
    # d rx / dW; the numerator distance can legitimately be 0
    if n01 == 0.0:
        grad_rx = np.zeros_like(W)
    else:
        grad_rx = (np.outer(w01, d01) / (n01 * n23)
                   - (n01 / n23 ** 3) * np.outer(w23, d23))
    grad = -2.0 * (ry - rx) * grad_rx
    return float((ry - rx) ** 2), grad


def _draw_quadruplet(x: np.ndarray, y: np.ndarray, floor: float,
                     rng: np.random.Generator,
                     max_tries: int = 200) -> Optional[Quadruplet]:
    n = len(y)
    for _ in range(max_tries):
        sel = rng.choice(n, size=4, replace=False)
        q = Quadruplet(x[sel], y[sel])
        if abs(q.y[2] - q.y[3]) >= floor \
                and np.linalg.norm(q.x[2] - q.x[3]) >= floor:
            return q
    return None


def _batch_loss_grad(W: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Vectorized loss/gradient over a batch of quadruplets.

    ``xs`` is (b, 4, m), ``ys`` is (b, 4); quadruplets are pre-screened
    to be non-degenerate.
    """
    d01 = xs[:, 0] - xs[:, 1]
    d23 = xs[:, 2] - xs[:, 3]
    w01 = d01 @ W.T
    w23 = d23 @ W.T
    n01 = np.linalg.norm(w01, axis=1)
    n23 = np.linalg.norm(w23, axis=1)
    ry = np.abs(ys[:, 0] - ys[:, 1]) / np.abs(ys[:, 2] - ys[:, 3])
    rx = n01 / n23
    resid = ry - rx
    safe01 = np.where(n01 == 0.0, 1.0, n01)
    coef01 = np.where(n01 == 0.0, 0.0, -2.0 * resid / (safe01 * n23))
    coef23 = np.where(n01 == 0.0, 0.0, 2.0 * resid * n01 / n23 ** 3)
    grad = (np.einsum("b,bi,bj->ij", coef01, w01, d01)
            + np.einsum("b,bi,bj->ij", coef23, w23, d23)) / len(ys)
    return float(np.mean(resid ** 2)), grad


def train(observations: Sequence[Tuple[np.ndarray, float]],
          config: RefinerConfig,
          rng: np.random.Generator) -> LinearRefiner:
    """SGD on quadruplet loss, starting from the identity map.

    Returns the identity refiner (with a warning) when every quadruplet
    is degenerate, and falls back to the identity if training failed to
    improve the held-out loss.
    """
    if len(observations) < 4:
        raise TooFewObservations(
            f"need >= 4 observations, got {len(observations)}")
    x = np.asarray([obs[0] for obs in observations], dtype=float)
    y = np.asarray([obs[1] for obs in observations], dtype=float)
    m = x.shape[1]
    floor = config.denominator_floor
    identity = LinearRefiner.identity(m, config)

    holdout = []
    for _ in range(config.holdout_quadruplets):
        q = _draw_quadruplet(x, y, floor, rng)
        if q is None:
            break
        holdout.append(q)
    if not holdout:
        warnings.warn("all quadruplets degenerate; refiner left at identity",
                      stacklevel=2)
        return identity

    def holdout_loss(refiner: LinearRefiner) -> float:
        return float(np.mean([loss(q, refiner) for q in holdout]))

    initial = holdout_loss(identity)
    W = np.eye(m)
    batch = config.quadruplets_per_step
    for _ in range(config.steps):
        quads = [_draw_quadruplet(x, y, floor, rng) for _ in range(batch)]
        quads = [q for q in quads if q is not None]
        if not quads:
            break
        xs = np.stack([q.x for q in quads])
        ys = np.stack([q.y for q in quads])
        _, grad = _batch_loss_grad(W, xs, ys)
        gnorm = np.linalg.norm(grad)
        if gnorm > config.grad_clip:
            grad = grad * (config.grad_clip / gnorm)
        W = W - config.learning_rate * grad

    trained = LinearRefiner(weight=W, config=config, trained=True)
    if not np.all(np.isfinite(W)) or holdout_loss(trained) > initial:
        warnings.warn("refiner training did not improve held-out loss; "
                      "keeping identity", stacklevel=2)
        return identity
    return trained
