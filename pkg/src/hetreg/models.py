"""Heteroscedastic data generation: scale operators, noise menu, smooth cutoff.

Scale models carry g(x, S) together with the Frechet derivative of g^2 and,
when available, the exact integrated scale varsigma(S) = int g^2(x, S) dx.
All quadrature in this package is composite Simpson on 2^14 + 1 fixed points,
which keeps every numeric result deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .basis import DesignGrid, SampledFunction, as_sampled

__all__ = [
    "SIMPSON_PANELS",
    "substream",
    "simpson_integral",
    "mollifier",
    "mollifier_cdf",
    "ScaleModel",
    "NoiseSpec",
    "l_star",
    "econometric_scale",
    "homogeneous_scale",
    "generate_observations",
    "smooth_cutoff",
    "nonperiodic_transform",
]

SIMPSON_PANELS = 2**14  # fixed panel count for every quadrature in the package


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a (study, n, replicate, ...) coordinate.

    Built on SeedSequence spawn keys, so replicate r sees the same stream
    whether the run is serial or split across workers.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


def simpson_integral(f, a: float = 0.0, b: float = 1.0, panels: int = SIMPSON_PANELS) -> float:
    """Composite Simpson rule with an even, fixed number of panels."""
    if panels % 2:
        raise ValueError("panel count must be even")
    x = np.linspace(a, b, panels + 1)
    y = np.asarray(f(x), dtype=float)
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((b - a) / (3.0 * panels) * (w @ y))


def mollifier(u) -> np.ndarray:
    """Bump kernel c * exp(-1/(1-u^2)) on |u| < 1, normalized to unit integral."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ui**2))
    return out / _mollifier_norm()


@lru_cache(maxsize=1)
def _mollifier_norm() -> float:
    x = np.linspace(-1.0, 1.0, SIMPSON_PANELS + 1)
    y = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    y[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    w = np.ones(len(x))
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(2.0 / (3.0 * SIMPSON_PANELS) * (w @ y))


@lru_cache(maxsize=1)
def _mollifier_cdf_table() -> tuple[np.ndarray, np.ndarray]:
    from scipy.integrate import cumulative_simpson

    u = np.linspace(-1.0, 1.0, SIMPSON_PANELS + 1)
    cdf = cumulative_simpson(mollifier(u), x=u, initial=0.0)
    cdf /= cdf[-1]  # unit mass exactly, so ramps hit 0 and 1
    return u, cdf


def mollifier_cdf(t) -> np.ndarray:
    """int_{-1}^{min(t,1)} V(u) du, clamped to [0, 1] outside the support."""
    u, cdf = _mollifier_cdf_table()
    t = np.asarray(t, dtype=float)
    return np.interp(t, u, cdf, left=0.0, right=1.0)


@dataclass(frozen=True)
class ScaleModel:
    """Scale operator sigma_j(S) = g(x_j, S) with the derivative of g^2.

    g2(x, S) must stay bounded away from zero on the function class in use;
    frechet(x, S, f) is the linear response of g^2 at S in direction f.
    """

    g2: Callable[[np.ndarray, SampledFunction], np.ndarray]
    frechet: Optional[Callable[[np.ndarray, SampledFunction, SampledFunction], np.ndarray]] = None
    varsigma_exact: Optional[Callable[[SampledFunction], float]] = None
    name: str = ""

    def g(self, x, S) -> np.ndarray:
        return np.sqrt(self.g2(np.asarray(x, dtype=float), S))

    def varsigma(self, S) -> float:
        """int g^2(x, S) dx, exact when the model provides it."""
        if self.varsigma_exact is not None:
            return float(self.varsigma_exact(S))
        return simpson_integral(lambda x: self.g2(x, S))


def econometric_scale(c0: float, c1: float = 0.0, c2: float = 0.0, c3: float = 0.0) -> ScaleModel:
    """g^2(x, S) = c0 + c1 x + c2 S(x)^2 + c3 ||S||^2 with c0 > 0.

    The Frechet derivative is 2 c2 S(x) f(x) + 2 c3 int S f, and
    varsigma(S) = c0 + c1/2 + (c2 + c3) ||S||^2 in closed form.
    """
    if c0 <= 0.0:
        raise ValueError(f"c0 must be positive, got {c0}")
    if min(c1, c2, c3) < 0.0:
        raise ValueError("scale constants must be nonnegative")

    def g2(x, S):
        S = as_sampled(S)
        x = np.asarray(x, dtype=float)
        return c0 + c1 * x + c2 * S(x) ** 2 + c3 * S.l2_norm_sq()

    def frechet(x, S, f):
        S = as_sampled(S)
        f = as_sampled(f)
        cross = simpson_integral(lambda t: S(t) * f(t)) if c3 else 0.0
        return 2.0 * c2 * S(np.asarray(x, dtype=float)) * f(np.asarray(x, dtype=float)) + 2.0 * c3 * cross

    def varsigma_exact(S):
        return c0 + 0.5 * c1 + (c2 + c3) * as_sampled(S).l2_norm_sq()

    return ScaleModel(g2=g2, frechet=frechet, varsigma_exact=varsigma_exact,
                      name=f"econometric({c0},{c1},{c2},{c3})")


def homogeneous_scale(sigma: float = 1.0) -> ScaleModel:
    """Constant noise level; the Frechet derivative vanishes identically."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    s2 = float(sigma) ** 2
    return ScaleModel(
        g2=lambda x, S: np.full_like(np.asarray(x, dtype=float), s2),
        frechet=lambda x, S, f: np.zeros_like(np.asarray(x, dtype=float)),
        varsigma_exact=lambda S: s2,
        name=f"homogeneous({sigma})",
    )


@dataclass(frozen=True)
class NoiseSpec:
    """Centered unit-variance noise with finite fourth moment.

    kinds: gaussian, rademacher, uniform, student_t (df >= 5 so the fourth
    moment exists after normalizing to unit variance).
    """

    kind: str = "gaussian"
    df: int = 12

    KINDS = ("gaussian", "rademacher", "uniform", "student_t")
    _ALIASES = {"uniform_normalized": "uniform", "student_t_normalized": "student_t"}

    def __post_init__(self):
        object.__setattr__(self, "kind", self._ALIASES.get(self.kind, self.kind))
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "student_t" and self.df < 5:
            raise ValueError("student_t requires df >= 5")

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "rademacher":
            return rng.integers(0, 2, size=size) * 2.0 - 1.0
        if self.kind == "uniform":
            return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=size)
        return rng.standard_t(self.df, size=size) * math.sqrt((self.df - 2.0) / self.df)

    def fourth_moment(self) -> float:
        if self.kind == "gaussian":
            return 3.0
        if self.kind == "rademacher":
            return 1.0
        if self.kind == "uniform":
            return 9.0 / 5.0
        return 3.0 + 6.0 / (self.df - 4.0)

    @property
    def label(self) -> str:
        return f"student_t{self.df}" if self.kind == "student_t" else self.kind


def l_star(n: int) -> float:
    """Admissible fourth-moment level: slowly increasing, at least 3."""
    return max(3.0, math.log(n))


def generate_observations(S, scale: ScaleModel, noise: NoiseSpec, grid: DesignGrid, rng) -> np.ndarray:
    """y_j = S(x_j) + g(x_j, S) xi_j with xi i.i.d. from the noise spec."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    S = as_sampled(S)
    xi = noise.draw(rng, grid.n)
    return S.on_grid(grid) + scale.g(grid.points, S) * xi


def smooth_cutoff(a: float, b: float) -> SampledFunction:
    """Infinitely smooth bump equal to 1 on [a, b] and to 0 near 0 and 1.

    Built as the indicator of [a/2, b/2 + 1/2] convolved with the bump
    kernel at bandwidth eta = min(a, 1-b)/4, which keeps the plateau exact.
    """
    if not (0.0 < a < b < 1.0):
        raise ValueError(f"need 0 < a < b < 1, got a={a}, b={b}")
    a1 = a / 2.0
    b1 = b / 2.0 + 0.5
    eta = min(a, 1.0 - b) / 4.0

    def chi(x):
        x = np.asarray(x, dtype=float)
        return mollifier_cdf((x - a1) / eta) - mollifier_cdf((x - b1) / eta)

    return SampledFunction(chi, name=f"cutoff[{a},{b}]")


def nonperiodic_transform(
    Y,
    scale: ScaleModel,
    chi: SampledFunction,
    epsilon: float,
    grid: DesignGrid,
    rng,
) -> tuple[np.ndarray, ScaleModel]:
    """Taper the observations and regularize the noise floor.

    Returns y_j chi(x_j) + epsilon zeta_j with fresh standard Gaussian zeta,
    plus the induced scale model g~(x,S) = sqrt(g^2(x,S) chi^2(x) + eps^2),
    whose effective noise keeps zero mean and unit variance.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (grid.n,):
        raise ValueError(f"observation vector must have length n={grid.n}")
    zeta = rng.standard_normal(grid.n)
    Y_t = Y * chi.on_grid(grid) + epsilon * zeta

    eps2 = float(epsilon) ** 2

    def g2_t(x, S):
        x = np.asarray(x, dtype=float)
        return scale.g2(x, S) * chi(x) ** 2 + eps2

    def frechet_t(x, S, f):
        if scale.frechet is None:
            raise ValueError("base scale model has no Frechet derivative")
        x = np.asarray(x, dtype=float)
        return scale.frechet(x, S, f) * chi(x) ** 2

    def varsigma_t(S):
        return simpson_integral(lambda x: scale.g2(x, S) * chi(x) ** 2) + eps2

    tilted = ScaleModel(g2=g2_t, frechet=frechet_t, varsigma_exact=varsigma_t,
                        name=f"{scale.name}*chi+eps({epsilon})")
    return Y_t, tilted
