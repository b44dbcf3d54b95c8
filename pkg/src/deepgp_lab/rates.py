"""Closed-form rate calculus.

Everything here is a pure function of (structure, smoothness, sample size):
the downstream smoothness products alpha_i, the minimax rate, the per-family
concentration-rate solutions eps_n(alpha, beta, r), the structure-level rate
eps_n(eta), the doubly-exponential size penalty Psi_n, and the metric-entropy
constant Q1.

All logarithms are natural unless a base is written explicitly.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .structure import CompositionStructure

__all__ = [
    "RateProfile",
    "LogWeight",
    "RateResult",
    "alpha_exponents",
    "rate_exponent",
    "minimax_rate",
    "entropy_constant_Q1",
    "wavelet_resolution",
    "eps_alpha",
    "eps_structure",
    "psi_n",
    "smallest_solution_m",
    "WAVELET",
    "FBM",
    "STATIONARY",
]

WAVELET = "wavelet"
FBM = "fbm"
STATIONARY = "stationary"

_FAMILIES = (WAVELET, FBM, STATIONARY)

# Largest x with exp(x) finite in double precision.
_EXP_MAX = 709.0


@dataclass(frozen=True)
class LogWeight:
    """Log of a nonnegative weight; -inf encodes exact zero."""

    log_value: float

    @property
    def is_zero(self) -> bool:
        return self.log_value == -math.inf

    def __add__(self, other):
        o = other.log_value if isinstance(other, LogWeight) else float(other)
        return LogWeight(self.log_value + o)

    __radd__ = __add__


@dataclass(frozen=True)
class RateResult:
    value: float
    argmax_layers: tuple
    exponents: tuple


@dataclass(frozen=True)
class RateProfile:
    """Per-family constants behind the rate solutions.

    holder_radius is the smoothness-ball radius K.  besov_radius is the
    wavelet family's embedding constant K'.  spectral_c / spectral_d are the
    stationary family's spectral-measure constants C(r), D(r).  fbm_small_ball
    and fbm_rkhs are the fractional-Brownian small-ball constant c_X(r) and
    the user-set RKHS product K^2 L^2.
    """

    family: str = WAVELET
    holder_radius: float = 1.0
    besov_radius: float = 1.0
    spectral_c: float = 1.0
    spectral_d: float = 1.0
    fbm_small_ball: float = 8.0
    fbm_rkhs: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}; expected one of {_FAMILIES}")
        for name in ("holder_radius", "besov_radius", "spectral_c", "spectral_d",
                     "fbm_small_ball", "fbm_rkhs"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")

    # -- base (alpha = 1) solution constants: eps_n(1) <= c1' (log n)^{c2'} n^{-b/(2b+r)}

    def c1_prime(self, beta: float, r: int) -> float:
        if self.family == WAVELET:
            # Bounds the J-based base solution: J <= log2(n)/(2b+r) + 1/2 and
            # 2^{-J b} <= 2^{b/2} n^{-b/(2b+r)}; for n >= 3, 1/2 <= ln(n)/(2 ln 3).
            geom = (2.0**beta + 1.0) ** 2 / (2.0**beta - 1.0)
            jfac = (1.0 / (math.log(2.0) * (2 * beta + r)) + 1.0 / (2 * math.log(3.0))) ** 1.5
            val = self.besov_radius * geom * math.sqrt(r * 2.0**r) * 2.0 ** (beta / 2) * jfac
        elif self.family == FBM:
            c = 2.0 / math.sqrt(2.0 * math.pi)
            c_z = beta / (c ** (r / beta) * r) + 0.5
            val = self.fbm_small_ball + c_z + self.fbm_rkhs
        else:
            val = self.spectral_c + self.spectral_d
        return max(1.0, val)

    def c2_prime(self, beta: float, r: int) -> float:
        if self.family == WAVELET:
            return 1.5
        if self.family == FBM:
            return 0.0
        return (1.0 + r) * beta / (2.0 * beta + r)

    # -- lifted constants valid for every alpha in (0, 1]

    def c1(self, beta: float, r: int) -> float:
        floor_const = entropy_constant_Q1(beta, r, self.holder_radius) ** (beta / (2 * beta + r))
        if self.family == FBM:
            # The fBM solution holds for all alpha with the same constant.
            return max(self.c1_prime(beta, r), floor_const)
        c1p, c2p = self.c1_prime(beta, r), self.c2_prime(beta, r)
        return max(c1p**2 * (2 * beta + 1) ** (2 * c2p), floor_const)

    def c2(self, beta: float, r: int) -> float:
        if self.family == FBM:
            return 0.0
        return self.c2_prime(beta, r) * (2 * beta + 2)


def alpha_exponents(betas) -> np.ndarray:
    """alpha_i = prod_{l>i} min(beta_l, 1); alpha_q = 1 (empty product)."""
    b = np.asarray(betas, dtype=float)
    if b.size == 0 or np.any(b <= 0):
        raise ValidationError("betas must be nonempty and positive")
    capped = np.minimum(b, 1.0)
    # reverse cumulative product of the *downstream* entries
    rev = np.cumprod(capped[::-1])[::-1]
    alphas = np.empty_like(b)
    alphas[:-1] = rev[1:]
    alphas[-1] = 1.0
    return alphas


def rate_exponent(beta: float, alpha: float, t: float) -> float:
    """The exponent beta*alpha / (2*beta*alpha + t); increasing in beta*alpha."""
    x = beta * alpha
    return x / (2.0 * x + t)


def minimax_rate(eta: CompositionStructure, n: int) -> RateResult:
    """max_i n^{-beta_i alpha_i/(2 beta_i alpha_i + t_i)} with its argmax layers."""
    if n < 2:
        raise ValidationError("n must be >= 2")
    alphas = alpha_exponents(eta.betas)
    t = eta.graph.eff_dims[: eta.graph.q + 1]
    exps = tuple(rate_exponent(b, a, ti) for b, a, ti in zip(eta.betas, alphas, t))
    emin = min(exps)
    argmax = tuple(i for i, e in enumerate(exps) if e <= emin * (1 + 1e-12) + 1e-15)
    return RateResult(value=float(n) ** (-emin), argmax_layers=argmax, exponents=exps)


def entropy_constant_Q1(beta: float, r: int, K: float) -> float:
    """(1+eK) 4^{r+1} (beta+3)^{r+1} r^{r+1} (8 e K^2)^{r/beta}."""
    if beta <= 0 or r < 1 or K <= 0:
        raise ValidationError("need beta > 0, r >= 1, K > 0")
    e = math.e
    return (1 + e * K) * 4.0 ** (r + 1) * (beta + 3.0) ** (r + 1) * float(r) ** (r + 1) \
        * (8 * e * K * K) ** (r / beta)


def wavelet_resolution(n: int, beta: float, r: int) -> int:
    """Closest integer to log2(n)/(2 beta + r), ties away from zero, at least 1."""
    if n < 2:
        raise ValidationError("n must be >= 2")
    x = math.log2(n) / (2.0 * beta + r)
    j = math.floor(x + 0.5)  # half-away-from-zero for positive x
    return max(1, j)


def _wavelet_base(profile: RateProfile, beta: float, r: int, n: int) -> float:
    j = wavelet_resolution(n, beta, r)
    geom = (2.0**beta + 1.0) ** 2 / (2.0**beta - 1.0)
    return profile.besov_radius * geom * math.sqrt(r * 2.0**r) * j**1.5 * 2.0 ** (-j * beta)


def eps_alpha(profile: RateProfile, alpha: float, beta: float, r: int, n: int) -> float:
    """The family's rate solution eps_n(alpha, beta, r), floored from below.

    The floor Q1^{beta/(2 beta + r)} n^{-beta alpha/(2 beta alpha + r)} is the
    entropy lower bound that any admissible solution must dominate.
    """
    if n < 3:
        raise ValidationError("n must be >= 3")
    if not (0 < alpha <= 1):
        raise ValidationError("alpha must lie in (0, 1]")
    power = float(n) ** (-rate_exponent(beta, alpha, r))
    floor = entropy_constant_Q1(beta, r, profile.holder_radius) ** (beta / (2 * beta + r)) * power
    if profile.family == WAVELET and alpha == 1.0:
        return max(_wavelet_base(profile, beta, r, n), floor)
    val = profile.c1(beta, r) * math.log(n) ** profile.c2(beta, r) * power
    return max(val, floor)


@functools.lru_cache(maxsize=8192)
def _ctilde(profile: RateProfile, bounds, ts, grid_size, safety):
    grid = np.linspace(bounds[0], bounds[1], grid_size)
    c1_tilde = safety * max(profile.c1(float(b), t) for t in ts for b in grid)
    c2_tilde = safety * max(profile.c2(float(b), t) for t in ts for b in grid)
    return c1_tilde, c2_tilde


def eps_structure(eta: CompositionStructure, profile: RateProfile, n: int,
                  grid_size: int = 256, safety: float = 1.05) -> float:
    """Structure-level rate C~1 (log n)^{C~2} r_n(eta).

    The constants are suprema of C_j(beta, t_i) over layers i and a dense beta
    grid on the structure's bounds, inflated by a small safety factor.  The
    result dominates every per-layer eps_alpha(alpha_i, beta_i, t_i).
    """
    if n < 3:
        raise ValidationError("n must be >= 3")
    ts = tuple(sorted(set(eta.graph.eff_dims[: eta.graph.q + 1])))
    c1_tilde, c2_tilde = _ctilde(profile, tuple(eta.bounds), ts, grid_size, safety)
    rn = minimax_rate(eta, n).value
    val = c1_tilde * math.log(n) ** c2_tilde * rn

    alphas = alpha_exponents(eta.betas)
    t = eta.graph.eff_dims[: eta.graph.q + 1]
    lower = max(eps_alpha(profile, float(a), float(b), ti, n)
                for a, b, ti in zip(alphas, eta.betas, t))
    if val < lower * (1 - 1e-9):
        raise ValidationError(
            f"eps_structure {val} fell below the per-layer maximum {lower}; "
            "beta grid or safety factor too small"
        )
    return val


def psi_n(eta: CompositionStructure, profile: RateProfile, n: int) -> LogWeight:
    """log of e^{-Psi_n(eta)} with Psi_n = n eps_n(eta)^2 + e^{e^{|d|_1}}.

    The doubly-exponential term overflows double precision once |d|_1 >= 7;
    such structures get exact zero weight (-inf log weight).
    """
    m = eta.graph.num_nodes
    inner = math.exp(m) if m <= _EXP_MAX else math.inf
    if inner > _EXP_MAX:
        return LogWeight(-math.inf)
    eps = eps_structure(eta, profile, n)
    return LogWeight(-(n * eps * eps + math.exp(inner)))


def smallest_solution_m(profile: RateProfile, alpha: float, beta: float, r: int,
                        n: int) -> int:
    """Largest m with m * eps_m(1, beta, r)^{2 - 2 alpha} <= n.

    This is the sample-size substitution that turns the alpha = 1 solution into
    the minimal valid alpha-level solution eps_m(1)^alpha.
    """
    def g(m):
        return m * eps_alpha(profile, 1.0, beta, r, m) ** (2.0 - 2.0 * alpha)

    if g(3) > n:
        raise ValidationError("no m >= 3 satisfies the substitution inequality")
    hi = 3
    while g(hi) <= n:
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if g(mid) <= n:
            lo = mid
        else:
            hi = mid
    return lo
