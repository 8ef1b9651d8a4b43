"""Pinsker-type weight family and the slowly varying tuning sequences.

The family is a finite grid Lambda = {lambda_(beta,t)} over smoothness
beta = 1..k* and scale t = eps, 2 eps, ..., m eps with m = [1/eps^2]; each
member shrinks empirical Fourier coefficients with the taper
(1 - (j/omega)^beta)_+ above a small head of untouched frequencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

__all__ = [
    "WeightIndex",
    "TuningSequences",
    "default_sequences",
    "a_beta",
    "omega",
    "pinsker_weights",
    "weight_family",
]


class WeightIndex(NamedTuple):
    beta: int
    t: float


@dataclass(frozen=True)
class TuningSequences:
    """Grid steps and penalty constants used by the selection rule."""

    eps: float
    k_star: int
    m: int
    l_n: int
    L_n: float
    rho: float
    omega_bar: float = 0.0
    k_bar: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.eps <= 1.0):
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if not (0.0 < self.rho <= 1.0 / 3.0):
            raise ValueError(f"rho must lie in (0, 1/3], got {self.rho}")
        if self.k_star < 1 or self.m < 1:
            raise ValueError("k_star and m must be >= 1")

    def with_rho(self, rho: float) -> "TuningSequences":
        """Force the penalty coefficient, keeping L_n = 1/rho - 3 consistent."""
        return replace(self, rho=rho, L_n=1.0 / rho - 3.0)


def default_sequences(
    n: int,
    k_bar: float = 0.0,
    omega_bar: float = 0.0,
    L_n: float | None = None,
    rho: float | None = None,
) -> TuningSequences:
    """Defaults eps = 1/ln n, k* = [k_bar + sqrt(ln n)], m = [1/eps^2].

    L_n defaults to sqrt(ln n) (any slowly increasing sequence is allowed);
    passing `rho` overrides the penalty coefficient directly.
    """
    if n < 3 or n % 2 == 0:
        raise ValueError(f"need odd n >= 3, got {n}")
    log_n = math.log(n)
    eps = 1.0 / log_n
    k_star = max(1, int(k_bar + math.sqrt(log_n)))
    m = int(1.0 / eps**2)
    l_n = int(n ** (1.0 / 3.0) + 1.0)
    if l_n >= n:
        raise ValueError(f"l_n={l_n} must stay below n={n}")
    if rho is None:
        if L_n is None:
            L_n = math.sqrt(log_n)
        rho = 1.0 / (3.0 + L_n)
    else:
        L_n = 1.0 / rho - 3.0
    return TuningSequences(
        eps=eps, k_star=k_star, m=m, l_n=l_n, L_n=L_n, rho=rho,
        omega_bar=omega_bar, k_bar=k_bar,
    )


def a_beta(beta: int) -> float:
    """A_beta = (beta+1)(2 beta+1) / (beta pi^(2 beta))."""
    if beta < 1:
        raise ValueError(f"beta must be >= 1, got {beta}")
    return (beta + 1.0) * (2.0 * beta + 1.0) / (beta * math.pi ** (2.0 * beta))


def omega(alpha: WeightIndex, n: int, seqs: TuningSequences) -> float:
    """Cutoff frequency omega_bar + (A_beta t n)^(1/(2 beta + 1))."""
    beta, t = alpha
    if beta < 1 or t <= 0.0 or n < 3:
        raise ValueError(f"invalid weight index {alpha} or n={n}")
    return seqs.omega_bar + (a_beta(beta) * t * n) ** (1.0 / (2.0 * beta + 1.0))


def pinsker_weights(alpha: WeightIndex, n: int, seqs: TuningSequences) -> np.ndarray:
    """Length-n weight vector: flat head, polynomial taper, zero tail.

    Frequencies above n are silently truncated; the estimator only ever
    uses n coefficients.
    """
    if n < 3 or n % 2 == 0:
        raise ValueError(f"need odd n >= 3, got {n}")
    om = omega(alpha, n, seqs)
    j0 = int(om * seqs.eps)
    j = np.arange(1, n + 1, dtype=float)
    lam = np.zeros(n)
    lam[j <= j0] = 1.0
    mid = (j > j0) & (j <= om)
    lam[mid] = 1.0 - (j[mid] / om) ** alpha.beta
    return lam


def weight_family(n: int, seqs: TuningSequences) -> list[tuple[WeightIndex, np.ndarray]]:
    """All k* x m members, enumerated in increasing (beta, t) order."""
    family = []
    for beta in range(1, seqs.k_star + 1):
        for i in range(1, seqs.m + 1):
            alpha = WeightIndex(beta, i * seqs.eps)
            family.append((alpha, pinsker_weights(alpha, n, seqs)))
    return family
