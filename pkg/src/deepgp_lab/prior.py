"""The rate-penalized structure prior and the full deep-GP prior.

A draw is: a structure eta (sampled proportionally to gamma(eta) e^{-Psi_n(eta)}
over the enumerated space), then one conditioned path per (layer, output) node,
wired through the active sets and composed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ConditioningError, ValidationError
from .funcspace import ConditioningSpec, LayerFunction, compose
from .gp import ConditionedSampleStats, GpSpec, rng_for, sample_conditioned
from .rates import (FBM, STATIONARY, WAVELET, LogWeight, RateProfile,
                    alpha_exponents, eps_alpha, psi_n, wavelet_resolution)
from .structure import CompositionStructure, StructureSpace, enumerate_structures

__all__ = [
    "StructurePriorSpec",
    "DgpDraw",
    "structure_prior_weights",
    "sample_structure",
    "sample_dgp",
    "sample_prior",
    "conditioning_spec_for_layer",
]

# RNG key components (first slot of every spawn key)
_KEY_STRUCTURE = 0
_KEY_PATHS = 1

_BESOV_THRESHOLD = math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class StructurePriorSpec:
    space: StructureSpace
    profile: RateProfile
    n: int
    beta_grid: tuple = (1.0,)
    q_decay: float = 0.5
    width_decay: float = 0.5
    cond_k_prime: float = 2.0
    max_attempts: int = 1000
    gp_grid: int = 33

    def __post_init__(self):
        if self.n < 3:
            raise ValidationError("n must be >= 3")
        if not (0 < self.q_decay < 1) or not (0 < self.width_decay < 1):
            raise ValidationError("decay parameters must lie in (0, 1)")


def _log_geometric_truncated(k, decay, lo, hi):
    """log P(K = k) for a geometric(decay) renormalized to {lo..hi}."""
    support = np.arange(lo, hi + 1)
    logs = support * math.log(decay)
    return k * math.log(decay) - logsumexp(logs)


def _count_sets_with_max(t, d_in, d_out):
    """#{(S_1..S_d_out): nonempty subsets of [d_in], max_j |S_j| = t}."""
    def upto(s):
        return sum(math.comb(d_in, k) for k in range(1, s + 1))
    return upto(t) ** d_out - (upto(t - 1) ** d_out if t >= 1 else 0)


def gamma_log(eta: CompositionStructure, spec: StructurePriorSpec) -> float:
    """Unnormalized log of the factorized base density gamma(eta).

    gamma(q) geometric, gamma(d_i|q) truncated geometric, gamma(t_i|d) uniform
    on 1..d_i, gamma(S_i|t_i) uniform over configurations attaining t_i, and
    uniform beta on the grid.
    """
    g = eta.graph
    sp = spec.space
    logp = _log_geometric_truncated(g.q, spec.q_decay, 0, sp.max_q)
    for i in range(1, g.q + 1):  # hidden widths d_1..d_q
        logp += _log_geometric_truncated(g.dims[i], spec.width_decay, 1, sp.max_width)
    for i in range(g.q + 1):
        d_in, d_out = g.dims[i], g.dims[i + 1]
        t = g.eff_dims[i]
        logp += -math.log(d_in)  # t_i uniform on 1..d_i
        logp += -math.log(_count_sets_with_max(t, d_in, d_out))
        logp += -(math.log(len(spec.beta_grid)))  # beta_i uniform on the grid
    return logp


def structure_prior_weights(spec: StructurePriorSpec):
    """Normalized log-weights over the enumerated structure space.

    Each entry is (structure, LogWeight) with weight proportional to
    gamma(eta) e^{-Psi_n(eta)}; -inf entries carry exact zero mass.
    """
    structures = enumerate_structures(spec.space, spec.beta_grid)
    if not structures:
        raise ValidationError("no admissible structure in the space")
    pens = np.array([psi_n(eta, spec.profile, spec.n).log_value for eta in structures])
    # Shift the penalties by their maximum before adding gamma: penalties can be
    # astronomically large, and gamma (order 1) would otherwise be absorbed by
    # floating-point rounding for near-tied structures.
    finite_pens = pens[~np.isneginf(pens)]
    shift = float(np.max(finite_pens)) if finite_pens.size else 0.0
    logs = np.array([
        (p - shift if not np.isneginf(p) else -math.inf) + gamma_log(eta, spec)
        for eta, p in zip(structures, pens)
    ])
    if np.all(np.isneginf(logs)):
        raise ValidationError("every structure has zero prior weight (all too large)")
    norm = logsumexp(logs[~np.isneginf(logs)])
    return [(eta, LogWeight(lw - norm)) for eta, lw in zip(structures, logs)]


def _weights_array(weighted):
    logs = np.array([w.log_value for _, w in weighted])
    p = np.zeros_like(logs)
    finite = ~np.isneginf(logs)
    p[finite] = np.exp(logs[finite])
    p /= p.sum()
    return p


def sample_structure(spec: StructurePriorSpec, seed, weighted=None) -> CompositionStructure:
    if weighted is None:
        weighted = structure_prior_weights(spec)
    p = _weights_array(weighted)
    u = rng_for(seed, (_KEY_STRUCTURE,)).random()
    idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
    idx = min(idx, len(weighted) - 1)
    return weighted[idx][0]


def conditioning_spec_for_layer(eta: CompositionStructure, layer: int,
                                spec: StructurePriorSpec) -> ConditioningSpec:
    """Acceptance region for layer `layer`: sup ball + smoothness ball with slack."""
    alphas = alpha_exponents(eta.betas)
    beta = float(eta.betas[layer])
    t = int(eta.graph.eff_dims[layer])
    a = float(alphas[layer])
    slack = 2.0 * eps_alpha(spec.profile, a, beta, t, spec.n) ** (1.0 / a)
    if spec.profile.family == WAVELET:
        j = wavelet_resolution(spec.n, beta, t)
        grid_m = 2 ** (j + 1) + 1 if t == 1 else 2**j * 2 + 1
        return ConditioningSpec(
            beta=beta, r=t, K=(1.0 + spec.cond_k_prime) * _BESOV_THRESHOLD,
            slack=slack, mode="besov", grid_m=grid_m,
        )
    return ConditioningSpec(
        beta=beta, r=t, K=spec.profile.holder_radius, slack=slack,
        mode="holder", grid_m=spec.gp_grid,
    )


@dataclass(frozen=True)
class DgpDraw:
    structure: CompositionStructure
    layers: tuple  # LayerFunction per layer
    stats: dict  # (layer, output) -> ConditionedSampleStats

    def __call__(self, points):
        return compose(self.layers, points)

    @property
    def input_dim(self):
        return self.layers[0].in_dim


def sample_dgp(eta: CompositionStructure, spec: StructurePriorSpec, seed,
               key_prefix=()) -> DgpDraw:
    """One conditioned path per (layer, output) node, independent across nodes."""
    g = eta.graph
    layers, stats = [], {}
    for i in range(g.q + 1):
        t = int(g.eff_dims[i])
        cond = conditioning_spec_for_layer(eta, i, spec)
        gp_spec = GpSpec(family=spec.profile.family, beta=float(eta.betas[i]), r=t,
                         n=spec.n, seed=int(seed), grid=spec.gp_grid)
        components = []
        for j, s in enumerate(g.active_sets[i]):
            try:
                path, st = sample_conditioned(
                    gp_spec, cond, max_attempts=spec.max_attempts,
                    key=tuple(key_prefix) + (_KEY_PATHS, i, j),
                )
            except ConditioningError as exc:
                raise ConditioningError(
                    f"node (layer {i}, output {j + 1}): {exc}",
                    empirical_rate=exc.empirical_rate, node=(i, j),
                ) from exc
            path.range_clip = True
            components.append((path, s))
            stats[(i, j)] = st
        layers.append(LayerFunction(components, in_dim=g.dims[i]))
    return DgpDraw(structure=eta, layers=tuple(layers), stats=stats)


def sample_prior(spec: StructurePriorSpec, seed, weighted=None) -> DgpDraw:
    """Draw eta from the structure prior, then the conditioned paths."""
    eta = sample_structure(spec, seed, weighted=weighted)
    return sample_dgp(eta, spec, seed)
