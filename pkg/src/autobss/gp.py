"""Gaussian-process surrogate with expected-improvement acquisitions.

The kernel is a unit-amplitude RBF; targets are affinely standardized to
mean 0 and variance 1 + eta^2 so the noisy-observation model matches a
zero-mean prior.  Batch selection is greedy: plain expected improvement
(EI) for the first pick, then the Monte-Carlo expectation of EI under
sequentially conditioned fantasy outcomes (EEI) for the rest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_solve, cholesky
from scipy.special import ndtr

from .errors import DuplicateInput, InsufficientCenters, NonPositiveDefinite

DEFAULT_ETA = 0.1
_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def _chol_spd(mat: np.ndarray) -> np.ndarray:
    for jitter in _JITTERS:
        try:
            return cholesky(mat + jitter * np.eye(len(mat)), lower=True)
        except np.linalg.LinAlgError:
            continue
    raise NonPositiveDefinite(
        f"factorization failed at max jitter {_JITTERS[-1]}")


def rbf_kernel(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    sq = (np.sum(a ** 2, axis=1)[:, None] - 2.0 * a @ b.T
          + np.sum(b ** 2, axis=1)[None, :])
    return np.exp(-np.maximum(sq, 0.0) / (2.0 * sigma ** 2))


@dataclass(frozen=True)
class GpModel:
    x: np.ndarray  # (n, m) refined codes
    y: np.ndarray  # (n,) standardized targets
    y_raw: np.ndarray
    sigma: float
    eta: float
    shift: float
    scale: float
    chol: np.ndarray  # lower factor of K + eta^2 I
    alpha: np.ndarray  # (K + eta^2 I)^-1 y

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def tau(self) -> float:
        return float(np.max(self.y))


def fit(x: np.ndarray, y: Sequence[float], sigma: float,
        eta: float = DEFAULT_ETA) -> GpModel:
    """Standardize targets to mean 0, variance 1 + eta^2, and factor the
    Gram matrix for posterior queries."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y_raw = np.asarray(y, dtype=float)
    if len(x) != len(y_raw) or len(y_raw) < 1:
        raise ValueError("need equally many codes and accuracies, >= 1")
    uniq = {tuple(row) for row in x}
    if len(uniq) != len(x):
        raise DuplicateInput("identical codes in surrogate training set")

    n = len(y_raw)
    shift = float(y_raw.mean())
    std = float(y_raw.std())
    if n == 1 or std == 0.0:
        scale = 1.0
    else:
        scale = math.sqrt(1.0 + eta ** 2) / std
    y_std = (y_raw - shift) * scale

    gram = rbf_kernel(x, x, sigma) + eta ** 2 * np.eye(n)
    lower = _chol_spd(gram)
    alpha = cho_solve((lower, True), y_std)
    return GpModel(x=x, y=y_std, y_raw=y_raw, sigma=sigma, eta=eta,
                   shift=shift, scale=scale, chol=lower, alpha=alpha)


def posterior(model: GpModel,
              query: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at each query row."""
    query = np.atleast_2d(np.asarray(query, dtype=float))
    k = rbf_kernel(query, model.x, model.sigma)  # (q, n)
    mu = k @ model.alpha
    v = cho_solve((model.chol, True), k.T)  # (n, q)
    var = 1.0 - np.sum(k * v.T, axis=1)
    return mu, np.maximum(var, 0.0)


def sigma_heuristic(obs_x: np.ndarray, obs_y: Sequence[float],
                    first_iteration: Sequence[int]) -> float:
    """Kernel bandwidth from the distance scale of high-discrepancy pairs.

    The mean accuracy discrepancy over first-iteration pairs sets a gap
    threshold; distances of all observation pairs above it are sorted and
    the one at position floor(l/20) is halved.  When no pair clears the
    threshold, half the median pairwise distance is used instead.
    """
    obs_x = np.atleast_2d(np.asarray(obs_x, dtype=float))
    obs_y = np.asarray(obs_y, dtype=float)
    n = len(obs_y)
    if n < 2:
        raise ValueError("need at least two observations")
    iu = np.triu_indices(n, k=1)
    gaps = np.abs(obs_y[iu[0]] - obs_y[iu[1]])
    dists = np.linalg.norm(obs_x[iu[0]] - obs_x[iu[1]], axis=1)

    first = np.asarray(list(first_iteration), dtype=int)
    fy = obs_y[first]
    fi = np.triu_indices(len(fy), k=1)
    mean_gap = float(np.abs(fy[fi[0]] - fy[fi[1]]).mean()) \
        if len(fy) >= 2 else 0.0

    selected = np.sort(dists[gaps > mean_gap])
    if len(selected) == 0:
        sigma = float(np.median(dists)) / 2.0
    else:
        sigma = float(selected[len(selected) // 20]) / 2.0
    return max(sigma, 1e-8)


def _ei_values(mu: np.ndarray, s: np.ndarray, tau) -> np.ndarray:
    """Closed-form EI, elementwise; s = posterior standard deviation."""
    mu = np.asarray(mu, dtype=float)
    s = np.asarray(s, dtype=float)
    diff = mu - tau
    out = np.maximum(diff, 0.0)
    pos = s > 0.0
    if np.any(pos):
        z = np.where(pos, diff / np.where(pos, s, 1.0), 0.0)
        pdf = np.exp(-0.5 * z ** 2) / math.sqrt(2.0 * math.pi)
        out = np.where(pos, diff * ndtr(z) + s * pdf, out)
    return out


def ei(model: GpModel, x: np.ndarray, tau: Optional[float] = None) -> float:
    """Expected improvement of one point over the incumbent."""
    if tau is None:
        tau = model.tau
    mu, var = posterior(model, x)
    return float(_ei_values(mu, np.sqrt(var), tau)[0])


def _augmented(model: GpModel, pending: np.ndarray):
    """Factorization and fantasy-draw pieces for train + pending inputs."""
    x_aug = np.vstack([model.x, pending])
    gram = rbf_kernel(x_aug, x_aug, model.sigma) \
        + model.eta ** 2 * np.eye(len(x_aug))
    l_aug = _chol_spd(gram)

    # posterior of the pending observations given the training data
    k_p = rbf_kernel(pending, model.x, model.sigma)
    mu_p = k_p @ model.alpha
    v = cho_solve((model.chol, True), k_p.T)
    cov_p = rbf_kernel(pending, pending, model.sigma) - k_p @ v \
        + model.eta ** 2 * np.eye(len(pending))
    l_p = _chol_spd(cov_p)
    return x_aug, l_aug, mu_p, l_p


def _eei_many(model: GpModel, query: np.ndarray, tau: float,
              pending: np.ndarray, mc_samples: int,
              rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo EEI for every query row, sharing fantasy draws."""
    x_aug, l_aug, mu_p, l_p = _augmented(model, pending)
    j = len(pending)
    # lower-triangular draw == sequential conditioning on earlier fantasies
    fantasies = mu_p[:, None] + l_p @ rng.standard_normal((j, mc_samples))
    taus = np.maximum(tau, fantasies.max(axis=0))  # (R,)

    y_aug = np.concatenate(
        [np.repeat(model.y[:, None], mc_samples, axis=1), fantasies])
    alphas = cho_solve((l_aug, True), y_aug)  # (n+j, R)

    k_q = rbf_kernel(query, x_aug, model.sigma)  # (q, n+j)
    mu_q = k_q @ alphas  # (q, R)
    v = cho_solve((l_aug, True), k_q.T)
    var_q = np.maximum(1.0 - np.sum(k_q * v.T, axis=1), 0.0)  # (q,)
    s_q = np.sqrt(var_q)[:, None]
    return _ei_values(mu_q, np.broadcast_to(s_q, mu_q.shape),
                      taus[None, :]).mean(axis=1)


def eei(model: GpModel, x: np.ndarray, tau: Optional[float] = None,
        pending: Optional[np.ndarray] = None, mc_samples: int = 128,
        rng: Optional[np.random.Generator] = None) -> float:
    """Expected EI under fantasy outcomes for the pending points.

    With no pending points this is exactly :func:`ei`.
    """
    if tau is None:
        tau = model.tau
    if pending is None or len(pending) == 0:
        return ei(model, x, tau)
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    query = np.atleast_2d(np.asarray(x, dtype=float))
    pending = np.atleast_2d(np.asarray(pending, dtype=float))
    return float(_eei_many(model, query, tau, pending, mc_samples, rng)[0])


def select_batch(model: GpModel, centers: np.ndarray, batch_size: int,
                 mc_samples: int = 128,
                 rng: Optional[np.random.Generator] = None) -> List[int]:
    """Greedy batch pick over candidate centers; returns center indices.

    First pick maximizes EI; later picks maximize EEI given the picks so
    far, with one shared set of fantasy draws per pick.  Ties break to
    the lowest index.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if len(centers) < batch_size:
        raise InsufficientCenters(
            f"{len(centers)} centers < batch size {batch_size}")
    if rng is None:
        rng = np.random.default_rng(0)
    tau = model.tau

    mu, var = posterior(model, centers)
    scores = _ei_values(mu, np.sqrt(var), tau)
    picks = [int(np.argmax(scores))]
    while len(picks) < batch_size:
        pending = centers[picks]
        scores = _eei_many(model, centers, tau, pending, mc_samples, rng)
        scores[picks] = -np.inf
        picks.append(int(np.argmax(scores)))
    return picks
