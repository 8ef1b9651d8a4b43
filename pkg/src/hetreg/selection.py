"""Penalized cost, variance proxy and argmin selection of the adaptive estimator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .basis import (
    DesignGrid,
    FourierCoeffs,
    SampledFunction,
    discrete_fourier,
    trig_series,
)
from .weights import TuningSequences, WeightIndex, default_sequences, weight_family

__all__ = [
    "CostTerms",
    "EstimatorOutput",
    "varsigma_hat",
    "cost_terms",
    "cost",
    "select",
    "estimate",
]


class CostTerms(NamedTuple):
    """The three displayed pieces of J_n; their sum is the cost."""

    quadratic: float  # sum lam^2 theta_hat^2
    cross: float      # -2 sum lam theta_tilde
    penalty: float    # rho |lam|^2 varsigma_hat / n

    @property
    def total(self) -> float:
        return self.quadratic + self.cross + self.penalty


@dataclass
class EstimatorOutput:
    """Everything the selection step produces, including per-candidate costs."""

    coeffs: FourierCoeffs
    selected: WeightIndex
    lambda_hat: np.ndarray
    varsigma_hat: float
    costs: dict[WeightIndex, float]
    estimate: SampledFunction


def varsigma_hat(coeffs: FourierCoeffs, l_n: int) -> float:
    """Tail energy sum_{j > l_n} theta_hat_j^2, the noise-level proxy."""
    if not (1 <= l_n < coeffs.n):
        raise ValueError(f"need 1 <= l_n < n, got l_n={l_n}, n={coeffs.n}")
    return float(np.sum(coeffs.theta_hat[l_n:] ** 2))


def cost_terms(
    lam,
    coeffs: FourierCoeffs,
    varsigma: float,
    rho: float,
    theta_tilde=None,
) -> CostTerms:
    """Decomposed cost J_n(lam).

    `theta_tilde` defaults to theta_hat^2 - varsigma/n, the asymptotically
    unbiased surrogate for theta_hat * theta; tests may pass the exact
    product to recover the quadratic-loss identity.
    """
    lam = np.asarray(lam, dtype=float)
    th = coeffs.theta_hat
    if lam.shape != th.shape:
        raise ValueError("weight vector and coefficients must share length")
    if theta_tilde is None:
        theta_tilde = th**2 - varsigma / coeffs.n
    quadratic = float(np.sum(lam**2 * th**2))
    cross = -2.0 * float(np.sum(lam * theta_tilde))
    penalty = rho * float(np.sum(lam**2)) * varsigma / coeffs.n
    return CostTerms(quadratic, cross, penalty)


def cost(lam, coeffs: FourierCoeffs, varsigma: float, rho: float) -> float:
    return cost_terms(lam, coeffs, varsigma, rho).total


def select(
    family: list[tuple[WeightIndex, np.ndarray]],
    coeffs: FourierCoeffs,
    seqs: TuningSequences,
) -> EstimatorOutput:
    """argmin of J_n over the family; ties go to the smaller (beta, t).

    All candidates are evaluated (no early stopping) with shared vectorized
    sums, so the costs map supports an exhaustive audit.
    """
    if not family:
        raise ValueError("weight family must be nonempty")
    vs = varsigma_hat(coeffs, seqs.l_n)
    th = coeffs.theta_hat
    theta_tilde = th**2 - vs / coeffs.n
    W = np.stack([lam for _, lam in family])
    W2 = W**2
    costs_vec = W2 @ (th**2) - 2.0 * (W @ theta_tilde) + seqs.rho * W2.sum(axis=1) * vs / coeffs.n
    # family is enumerated in (beta, t) order and argmin returns the first
    # minimizer, which is the lexicographic tie rule
    best = int(np.argmin(costs_vec))
    alpha_hat, lam_hat = family[best]
    weighted = lam_hat * th
    est = SampledFunction(lambda x: trig_series(weighted, x), name="adaptive")
    return EstimatorOutput(
        coeffs=coeffs,
        selected=alpha_hat,
        lambda_hat=lam_hat,
        varsigma_hat=vs,
        costs={alpha: float(c) for (alpha, _), c in zip(family, costs_vec)},
        estimate=est,
    )


def estimate(
    Y,
    grid: DesignGrid,
    seqs: TuningSequences | None = None,
    family: list[tuple[WeightIndex, np.ndarray]] | None = None,
) -> EstimatorOutput:
    """Full pipeline: transform, noise proxy, weight family, selection."""
    if seqs is None:
        seqs = default_sequences(grid.n)
    if family is None:
        family = weight_family(grid.n, seqs)
    coeffs = discrete_fourier(Y, grid)
    return select(family, coeffs, seqs)
