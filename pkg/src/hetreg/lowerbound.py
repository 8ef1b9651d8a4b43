"""Minimax lower-bound machinery: local kernel family, least favorable prior,
van Trees-type bound and Monte Carlo Bayes risk.

The interval is tiled by M blocks of width 2h; on each block a mollified
local trigonometric expansion is placed, and an independent centered
Gaussian prior over the coefficients turns the minimax problem into a
Bayesian one that the van Trees inequality bounds from below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .basis import DesignGrid, SampledFunction, basis_eval_matrix
from .models import (
    SIMPSON_PANELS,
    NoiseSpec,
    ScaleModel,
    mollifier_cdf,
    simpson_integral,
    substream,
)
from .theory import pinsker_constant

__all__ = [
    "mollified_indicator",
    "local_basis",
    "KernelFamily",
    "kernel_family",
    "kernel_function",
    "ebar",
    "lagrange_solution",
    "LeastFavorablePrior",
    "least_favorable_prior",
    "sample_prior",
    "ConditionsReport",
    "check_conditions_A",
    "conditions_trend",
    "van_trees_term",
    "VanTreesReport",
    "van_trees_bound",
    "prior_van_trees_bound",
    "prior_expected_norm_sq",
    "lower_bound_target",
    "bayes_risk_mc",
]


def mollified_indicator(eta: float, x) -> np.ndarray:
    """chi_eta: 1 on |x| <= 1-2 eta, 0 on |x| >= 1, smooth monotone ramps between."""
    if not (0.0 < eta < 0.5):
        raise ValueError(f"eta must lie in (0, 1/2), got {eta}")
    x = np.asarray(x, dtype=float)
    upper = (1.0 - eta - x) / eta
    lower = (-1.0 + eta - x) / eta
    return mollifier_cdf(upper) - mollifier_cdf(lower)


def local_basis(j: int, x) -> np.ndarray:
    """Orthonormal trigonometric basis of L2[-1,1]: e_1 = 1/sqrt(2), then
    cos(pi [j/2] x) for even j and sin(pi [j/2] x) for odd j."""
    if j < 1:
        raise ValueError(f"basis index must be >= 1, got {j}")
    x = np.asarray(x, dtype=float)
    if j == 1:
        return np.full_like(x, 1.0 / math.sqrt(2.0))
    arg = math.pi * (j // 2) * x
    return np.cos(arg) if j % 2 == 0 else np.sin(arg)


@dataclass(frozen=True)
class KernelFamily:
    """Geometry of the block-local expansion."""

    h: float
    N: int
    eta: float
    M: int = field(init=False)
    centers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.h <= 0.0 or self.N < 1:
            raise ValueError("need h > 0 and N >= 1")
        M = int(1.0 / (2.0 * self.h)) - 1
        if M < 1:
            raise ValueError(f"half-width h={self.h:.4g} leaves no interior block")
        object.__setattr__(self, "M", M)
        centers = 2.0 * self.h * np.arange(1, M + 1, dtype=float)
        centers.flags.writeable = False
        object.__setattr__(self, "centers", centers)

    def local_coord(self, m: int, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.centers[m - 1]) / self.h

    def element(self, m: int, j: int, x) -> np.ndarray:
        """D_{m,j}(x) = e_j(v_m(x)) chi_eta(v_m(x)); supported on one block."""
        v = self.local_coord(m, x)
        out = np.zeros_like(v)
        inside = np.abs(v) < 1.0
        vi = v[inside]
        out[inside] = local_basis(j, vi) * mollified_indicator(self.eta, vi)
        return out

    def design_tensor(self, x) -> np.ndarray:
        """(M, N, len(x)) values of every D_{m,j} at the points x."""
        x = np.asarray(x, dtype=float)
        out = np.zeros((self.M, self.N, len(x)))
        for m in range(1, self.M + 1):
            v = self.local_coord(m, x)
            inside = np.abs(v) < 1.0
            if not np.any(inside):
                continue
            vi = v[inside]
            chi = mollified_indicator(self.eta, vi)
            for j in range(1, self.N + 1):
                out[m - 1, j - 1, inside] = local_basis(j, vi) * chi
        return out


def kernel_family(h: float, N: int, eta: float = 0.05) -> KernelFamily:
    return KernelFamily(h=h, N=N, eta=eta)


def kernel_function(z, family: KernelFamily, x):
    """S_z(x) = sum_{m,j} z_{m,j} D_{m,j}(x); at most one block covers any x."""
    z = np.asarray(z, dtype=float)
    if z.shape != (family.M, family.N):
        raise ValueError(f"coefficient array must be {family.M} x {family.N}")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xf = np.atleast_1d(x).astype(float)
    tensor = family.design_tensor(xf)
    out = np.einsum("mj,mjx->x", z, tensor)
    return float(out[0]) if scalar else out.reshape(np.atleast_1d(x).shape)


@lru_cache(maxsize=32)
def _ebar_cached(j: int, eta: float, power: int) -> float:
    x = np.linspace(-1.0, 1.0, SIMPSON_PANELS + 1)
    y = local_basis(j, x) ** 2 * mollified_indicator(eta, x) ** power
    w = np.ones(len(x))
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(2.0 / (3.0 * SIMPSON_PANELS) * (w @ y))


def ebar(j: int, eta: float, power: int = 1) -> float:
    """int_{-1}^{1} e_j^2 chi_eta^power; power 1 and 2 are the two moments used."""
    return _ebar_cached(j, float(eta), int(power))


def lagrange_solution(R: float, N: int, k: int) -> tuple[float, np.ndarray]:
    """Water level a*(R) and y*_j = a* j^-k - 1 maximizing sum y/(1+y)
    under sum y_j j^(2k) <= R (the constraint is active at the optimum)."""
    j = np.arange(1, N + 1, dtype=float)
    a_star = (R + np.sum(j ** (2 * k))) / np.sum(j**k)
    return float(a_star), a_star * j ** (-float(k)) - 1.0


@dataclass(frozen=True)
class LeastFavorablePrior:
    """Gaussian prior theta_{m,j} = t_{m,j} zeta_{m,j} over the kernel family."""

    family: KernelFamily
    k: int
    r: float
    eps: float
    n: int
    t: np.ndarray            # (M, N) standard deviations
    y_star: np.ndarray       # (N,)
    a_star: float
    R_star: float
    h_star: float
    d_n: float
    N_nominal: int
    dropped_j: tuple
    g0_centers: np.ndarray
    varsigma_zero: float     # int g0^2

    @property
    def t_star(self) -> float:
        """max_m sum_j t_{m,j}, the uniform-size coefficient."""
        return float(np.max(np.sum(self.t, axis=1)))

    @property
    def eps_prime(self) -> float:
        return self.eps / (2.0 * self.k + self.eps * self.k + 1.0)

    def sup_bound(self) -> float:
        """Uniform bound sqrt(d_n) t* for |S_theta| on the clipping event."""
        return math.sqrt(self.d_n) * self.t_star


def _default_N(k: int, n: int, h_star: float) -> int:
    # the canonical [ln^4 n] + 1 choice is infeasible until astronomically
    # large n (h_n would exceed 1); the desk-scale cap keeps N = o(n^(1/(2k+1)))
    # so that h_n -> 0, and becomes inactive for very large n.
    canonical = int(math.log(n) ** 4) + 1
    cap = max(1, int(1.5 * n ** (1.0 / (2.0 * k + 1.0)) / math.log(n)))
    return min(canonical, cap)


def least_favorable_prior(
    k: int,
    r: float,
    n: int,
    eps: float = 0.2,
    g0: Callable[[np.ndarray], np.ndarray] | None = None,
    eta: float = 0.05,
    N_n: int | None = None,
) -> LeastFavorablePrior:
    """Construct the maximizing prior for sample size n.

    Frequencies whose optimal weight y*_j would be negative (a finite-n
    effect) are dropped from the top, re-solving the constrained problem on
    the retained set, which keeps the Lagrange structure intact.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    if k < 1 or r <= 0.0 or n < 3:
        raise ValueError("need k >= 1, r > 0, n >= 3")
    if g0 is None:
        g0 = lambda x: np.ones_like(np.asarray(x, dtype=float))
    varsigma_zero = simpson_integral(lambda x: np.asarray(g0(x), dtype=float) ** 2)
    two_k1 = 2.0 * k + 1.0
    c_eps = 2.0**two_k1 * (1.0 - eps) * r / (math.pi ** (2 * k) * varsigma_zero)
    upsilon = (1.0 + eps) * k / (c_eps * (k + 1.0) * two_k1)
    h_star = upsilon ** (1.0 / two_k1)

    N = int(N_n) if N_n is not None else _default_N(k, n, h_star)
    while N >= 1:
        h = h_star * n ** (-1.0 / two_k1) * N
        if int(1.0 / (2.0 * h)) - 1 >= 1:
            break
        N -= 1
    if N < 1:
        raise ValueError(f"no admissible block geometry at n={n}; increase n")

    family = KernelFamily(h=h, N=N, eta=eta)
    g0_centers = np.asarray(g0(family.centers), dtype=float)
    ghat0 = 2.0 * h * float(np.sum(g0_centers**2))
    R_star = 2.0**two_k1 * (1.0 - eps) * r * n * h**two_k1 / (math.pi ** (2 * k) * ghat0)

    # drop top frequencies whose weight would be negative, re-solving each time
    N_ret = N
    while N_ret >= 1:
        a_star, y_star = lagrange_solution(R_star, N_ret, k)
        if y_star[-1] >= 0.0:
            break
        N_ret -= 1
    if N_ret < 1:
        raise ValueError(f"prior weights all negative at n={n}")
    if N_ret < N:
        family = KernelFamily(h=h, N=N_ret, eta=eta)

    t = np.outer(g0_centers, np.sqrt(y_star)) / math.sqrt(n * h)
    return LeastFavorablePrior(
        family=family, k=k, r=r, eps=eps, n=n, t=t,
        y_star=y_star, a_star=a_star, R_star=R_star, h_star=h_star,
        d_n=math.sqrt(N), N_nominal=N, dropped_j=tuple(range(N_ret + 1, N + 1)),
        g0_centers=g0_centers, varsigma_zero=varsigma_zero,
    )


def sample_prior(prior: LeastFavorablePrior, rng) -> tuple[np.ndarray, bool]:
    """One Gaussian draw theta = t * zeta plus the clipping-event flag."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    zeta = rng.standard_normal(prior.t.shape)
    return prior.t * zeta, bool(np.max(zeta**2) <= prior.d_n)


class ConditionsReport(NamedTuple):
    n: int
    N: int
    M: int
    h: float
    a2_sum: float    # (d_n / h^(2k-1)) sum t^2 j^(2(k-1))
    a2_peak: float   # sqrt(d_n) t*
    a3_sum: float    # (1 / h^(2k-1)) sum t^2 j^(2k)
    a3_target: float  # (1 - eps) r (2/pi)^(2k)
    a4_sum: float    # (1 / h^(4k-2+eps0)) sum t^4 j^(4k)
    positivity_ok: bool


def check_conditions_A(prior: LeastFavorablePrior, eps0: float = 0.5) -> ConditionsReport:
    """Numeric values of the prior-size conditions at the prior's own n."""
    k, h = prior.k, prior.family.h
    j = np.arange(1, prior.family.N + 1, dtype=float)
    t2 = prior.t**2
    a2_sum = prior.d_n / h ** (2 * k - 1) * float(np.sum(t2 * j ** (2 * (k - 1))))
    a3_sum = 1.0 / h ** (2 * k - 1) * float(np.sum(t2 * j ** (2 * k)))
    a4_sum = 1.0 / h ** (4 * k - 2 + eps0) * float(np.sum(prior.t**4 * j ** (4 * k)))
    a3_target = (1.0 - prior.eps) * prior.r * (2.0 / math.pi) ** (2 * k)
    return ConditionsReport(
        n=prior.n, N=prior.family.N, M=prior.family.M, h=h,
        a2_sum=a2_sum, a2_peak=math.sqrt(prior.d_n) * prior.t_star,
        a3_sum=a3_sum, a3_target=a3_target, a4_sum=a4_sum,
        positivity_ok=bool(np.all(prior.y_star >= 0.0)),
    )


def conditions_trend(
    k: int, r: float, n_grid, eps: float = 0.2, g0=None, eta: float = 0.05, eps0: float = 0.5
) -> list[ConditionsReport]:
    """The conditions are asymptotic; report their values along an n-grid."""
    return [
        check_conditions_A(least_favorable_prior(k, r, n, eps=eps, g0=g0, eta=eta), eps0=eps0)
        for n in n_grid
    ]


def van_trees_term(tau_bar: float, fisher: float, bias: float, prior_sd: float) -> float:
    """One coordinate of the bound: tau_bar^2 / (F + B + t^-2)."""
    if prior_sd <= 0.0:
        raise ValueError("prior standard deviation must be positive")
    return tau_bar**2 / (fisher + bias + prior_sd**-2)


class VanTreesReport(NamedTuple):
    bound: float
    fisher: np.ndarray   # F_p, per coordinate
    bias: np.ndarray     # B_p, per coordinate
    tau_bar: np.ndarray
    prior_sd: np.ndarray


class _LinearCombo(SampledFunction):
    """sum_p z_p f_p with an exact L2 norm supplied via the Gram matrix."""

    def __init__(self, fns, z, gram=None):
        self._combo_fns = fns
        self._z = np.asarray(z, dtype=float)
        self._gram = gram
        super().__init__(self._eval, name="linear-combo")

    def _eval(self, x):
        out = np.zeros_like(np.asarray(x, dtype=float))
        for zp, fp in zip(self._z, self._combo_fns):
            if zp != 0.0:
                out += zp * fp(x)
        return out

    def l2_norm_sq(self) -> float:
        if self._gram is not None:
            return float(self._z @ self._gram @ self._z)
        return super().l2_norm_sq()


def van_trees_bound(
    sens_fns,
    tau_bar,
    prior_sd,
    scale: ScaleModel,
    grid: DesignGrid,
    mc_reps: int = 500,
    seed: int = 0,
    gram: np.ndarray | None = None,
) -> VanTreesReport:
    """Bayes-risk lower bound for the linear family S_z = sum_p z_p f_p with
    independent centered Gaussian prior of standard deviations prior_sd.

    F_p sums f_p^2(x_i) E g^-2(x_i, S_z) over design points; B_p averages the
    squared Frechet response of g^2 in direction f_p over the prior.  Both
    expectations run over `mc_reps` prior draws with a fixed substream.
    """
    if scale.frechet is None:
        raise ValueError("scale model without a Frechet derivative is unsupported")
    tau_bar = np.asarray(tau_bar, dtype=float)
    prior_sd = np.asarray(prior_sd, dtype=float)
    P = len(sens_fns)
    if tau_bar.shape != (P,) or prior_sd.shape != (P,):
        raise ValueError("tau_bar and prior_sd must match the number of directions")
    x = grid.points
    sens_design = np.stack([np.asarray(f(x), dtype=float) for f in sens_fns])
    rng = substream(seed, 11, grid.n, P)
    ginv2 = np.zeros(grid.n)
    bias = np.zeros(P)
    for _ in range(mc_reps):
        z = rng.standard_normal(P) * prior_sd
        S_z = _LinearCombo(sens_fns, z, gram=gram)
        g2 = np.asarray(scale.g2(x, S_z), dtype=float)
        ginv2 += 1.0 / g2
        for p, fp in enumerate(sens_fns):
            L = np.asarray(scale.frechet(x, S_z, fp), dtype=float)
            bias[p] += 0.5 * float(np.sum(L**2 / g2**2))
    ginv2 /= mc_reps
    bias /= mc_reps
    fisher = sens_design**2 @ ginv2
    bound = float(np.sum(tau_bar**2 / (fisher + bias + prior_sd**-2.0)))
    return VanTreesReport(bound, fisher, bias, tau_bar, prior_sd)


def _family_gram(family: KernelFamily) -> np.ndarray:
    """L2 Gram of the flattened D_{m,j}: block diagonal, h * int e_j e_j' chi^2."""
    N, eta, h = family.N, family.eta, family.h
    v = np.linspace(-1.0, 1.0, SIMPSON_PANELS + 1)
    w = np.ones(len(v))
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= 2.0 / (3.0 * SIMPSON_PANELS)
    E = np.stack([local_basis(j, v) * mollified_indicator(eta, v) for j in range(1, N + 1)])
    block = h * (E * w) @ E.T
    G = np.zeros((family.M * N, family.M * N))
    for m in range(family.M):
        G[m * N : (m + 1) * N, m * N : (m + 1) * N] = block
    return G


def _family_fns(family: KernelFamily) -> list[SampledFunction]:
    fns = []
    for m in range(1, family.M + 1):
        for j in range(1, family.N + 1):
            fns.append(SampledFunction(
                lambda x, m=m, j=j: family.element(m, j, x), name=f"D[{m},{j}]"
            ))
    return fns


def prior_van_trees_bound(
    prior: LeastFavorablePrior,
    scale: ScaleModel,
    grid: DesignGrid,
    mc_reps: int = 500,
    seed: int = 0,
) -> VanTreesReport:
    """Double-sum bound sum_{m,j} h ebar_j(chi)^2 / (F_{m,j} + B_{m,j} + t^-2)."""
    fam = prior.family
    tau_bar = np.array([
        math.sqrt(fam.h) * ebar(j, fam.eta, power=1)
        for _ in range(fam.M) for j in range(1, fam.N + 1)
    ])
    prior_sd = prior.t.ravel()
    return van_trees_bound(
        _family_fns(fam), tau_bar, prior_sd, scale, grid,
        mc_reps=mc_reps, seed=seed, gram=_family_gram(fam),
    )


def prior_expected_norm_sq(prior: LeastFavorablePrior) -> float:
    """E ||S_theta||^2 = sum t^2 h ebar_j(chi^2), by disjoint supports."""
    fam = prior.family
    e2 = np.array([ebar(j, fam.eta, power=2) for j in range(1, fam.N + 1)])
    return float(np.sum(prior.t**2 * fam.h * e2[None, :]))


def lower_bound_target(prior: LeastFavorablePrior) -> float:
    """Finite-eps target constant multiplying the Pinsker constant at S == 0."""
    k = prior.k
    gamma = pinsker_constant(k, prior.r, prior.varsigma_zero)
    return (
        (1.0 + prior.eps_prime)
        * (1.0 - prior.eps) ** (1.0 / (2.0 * k + 1.0))
        / (1.0 + prior.eps) ** (1.0 / (2.0 * k + 1.0))
        * gamma
    )


def bayes_risk_mc(
    estimator,
    prior: LeastFavorablePrior,
    scale: ScaleModel,
    grid: DesignGrid,
    reps: int = 500,
    seed: int = 0,
    noise: NoiseSpec | None = None,
) -> tuple[float, float]:
    """Average continuous-norm loss over prior draws and Gaussian noise.

    `estimator(Y, grid)` may return either a length-n vector of basis
    coefficients or a callable; the loss integral runs on the fixed Simpson
    grid.  Returns (mean, standard error).
    """
    if noise is None:
        noise = NoiseSpec("gaussian")
    fam = prior.family
    xq = np.linspace(0.0, 1.0, SIMPSON_PANELS + 1)
    wq = np.ones(len(xq))
    wq[1:-1:2] = 4.0
    wq[2:-1:2] = 2.0
    wq /= 3.0 * SIMPSON_PANELS
    Dq = fam.design_tensor(xq).reshape(fam.M * fam.N, -1)
    Dn = fam.design_tensor(grid.points).reshape(fam.M * fam.N, -1)
    Phi_q = None
    losses = np.empty(reps)
    for rep in range(reps):
        rng = substream(seed, 13, grid.n, rep)
        theta, _ = sample_prior(prior, rng)
        tflat = theta.ravel()
        S_design = tflat @ Dn
        S_quad = tflat @ Dq
        S_fn = SampledFunction(lambda x: kernel_function(theta, fam, x))
        xi = noise.draw(rng, grid.n)
        Y = S_design + np.sqrt(np.asarray(scale.g2(grid.points, S_fn), dtype=float)) * xi
        out = estimator(Y, grid)
        if isinstance(out, np.ndarray):
            if Phi_q is None:
                Phi_q = basis_eval_matrix(grid.n, xq)
            est_quad = Phi_q @ out
        else:
            est_quad = np.asarray(out(xq), dtype=float)
        losses[rep] = float(wq @ (est_quad - S_quad) ** 2)
    mean = float(np.mean(losses))
    se = float(np.std(losses, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return mean, se
