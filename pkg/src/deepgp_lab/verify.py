"""Programmatic verification suites behind `deepgp-lab verify`.

Each check returns (name, ok, detail).  These are the same properties the test
suite asserts, packaged so they can run from the CLI without pytest.
"""

from __future__ import annotations

import math

import numpy as np

from . import funcspace, gp, rates, structure
from .rates import RateProfile

__all__ = ["run_suite", "SUITES"]


def _random_structure(rng, max_q=2, max_width=3, bounds=(0.3, 1.0)):
    q = int(rng.integers(0, max_q + 1))
    dims = [int(rng.integers(1, max_width + 1)) for _ in range(q + 1)] + [1]
    sets = []
    for i in range(q + 1):
        layer = []
        for _ in range(dims[i + 1]):
            size = int(rng.integers(1, dims[i] + 1))
            layer.append(tuple(sorted(rng.choice(dims[i], size=size, replace=False) + 1)))
        sets.append(tuple(layer))
    g = structure.make_graph(q, dims, sets)
    betas = tuple(float(rng.uniform(*bounds)) for _ in range(q + 1))
    return structure.CompositionStructure(graph=g, betas=betas, bounds=bounds)


def check_redundancy_rates(trials=200, seed=7):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        eta = _random_structure(rng)
        res = structure.reduce_redundant(eta)
        for n in (10**3, 10**6):
            a = rates.minimax_rate(eta, n).value
            b = rates.minimax_rate(res.structure, n).value
            worst = max(worst, abs(a - b) / a)
    return "redundancy-rate-equality", worst < 1e-12, f"worst relative error {worst:.3e}"


def check_eps_ratio(trials=1000, seed=11, n=10**5):
    rng = np.random.default_rng(seed)
    profile = RateProfile(family=rates.WAVELET)
    ok = True
    detail = ""
    delta = 1.0 / math.log(n) ** 2
    for k in range(trials):
        eta_lo = _random_structure(rng, bounds=(0.3, 2.0))
        if eta_lo.graph.num_nodes > 12:
            continue
        hi_betas = tuple(min(b + float(rng.uniform(0, delta)), eta_lo.bounds[1])
                         for b in eta_lo.betas)
        eta_hi = structure.CompositionStructure(graph=eta_lo.graph, betas=hi_betas,
                                                bounds=eta_lo.bounds)
        e_hi = rates.eps_structure(eta_hi, profile, n)
        e_lo = rates.eps_structure(eta_lo, profile, n)
        q_bound = math.exp(eta_lo.bounds[1])
        if not (e_hi <= e_lo * (1 + 1e-12) and e_lo <= q_bound * e_hi * (1 + 1e-12)):
            ok = False
            detail = f"violated at trial {k}: {e_hi} vs {e_lo}"
            break
    return "rate-comparison-sandwich", ok, detail or "all pairs within the e^{beta+} band"


def check_floor(trials=200, seed=13):
    rng = np.random.default_rng(seed)
    ok = True
    for fam in (rates.WAVELET, rates.FBM, rates.STATIONARY):
        profile = RateProfile(family=fam)
        for _ in range(trials):
            beta = float(rng.uniform(0.3, 0.95 if fam == rates.FBM else 2.0))
            alpha = float(rng.uniform(0.2, 1.0))
            r = int(rng.integers(1, 4))
            n = int(rng.integers(10, 10**6))
            if n < 3:
                continue
            val = rates.eps_alpha(profile, alpha, beta, r, n)
            floor = rates.entropy_constant_Q1(beta, r, profile.holder_radius) ** (
                beta / (2 * beta + r)) * n ** (-rates.rate_exponent(beta, alpha, r))
            if val < floor * (1 - 1e-12):
                ok = False
    return "entropy-floor", ok, "eps_alpha always dominates the entropy floor"


def check_besov_acceptance(draws=2000, seed=5):
    spec = gp.GpSpec(family=rates.WAVELET, beta=1.0, r=1, n=10**4, seed=seed)
    thr = 3.0 * math.sqrt(2.0 * math.log(2.0))
    hits = 0
    for k in range(draws):
        p = gp.sample_wavelet(spec, key=(k,))
        if funcspace.besov_norm(p, 1.0) <= thr:
            hits += 1
    rate = hits / draws
    sigma = math.sqrt((2 / 3) * (1 / 3) / draws)
    ok = rate >= 2.0 / 3.0 - 3 * sigma
    return "besov-acceptance-bound", ok, f"empirical {rate:.4f} vs bound 2/3"


def check_fbm_origin(seed=3):
    spec = gp.GpSpec(family=rates.FBM, beta=0.5, r=1, n=100, seed=seed, grid=33)
    p = gp.sample_fbm(spec)
    v = float(p.pre_release[len(p.axes[0]) // 2])
    return "fbm-pinned-at-origin", v == 0.0, f"pre-release value at 0 is {v}"


def check_holder_examples():
    xs = np.linspace(-1, 1, 257)
    f_lin = funcspace.GridPath(axes=(xs,), values=xs / 2)
    f_sq = funcspace.GridPath(axes=(xs,), values=xs**2)
    n1 = funcspace.holder_norm_empirical(f_lin, 1.0, grid_m=257).value
    n2 = funcspace.holder_norm_empirical(f_sq, 1.0, grid_m=257).value
    ok = abs(n1 - 1.0) < 0.02 and abs(n2 - 6.0) < 0.3
    return "holder-norm-examples", ok, f"x/2 -> {n1:.4f} (exp 1), x^2 -> {n2:.4f} (exp 6)"


def check_composition_bound(trials=100, seed=17):
    rng = np.random.default_rng(seed)
    K = 1.0
    ok = True

    def rand_layer():
        # wavelet draw rescaled into the radius-K smoothness ball (the bound
        # is only promised for layers inside the ball)
        spec = gp.GpSpec(family=rates.WAVELET, beta=1.0, r=1, n=256,
                         seed=int(rng.integers(2**32)))
        p = gp.sample_wavelet(spec)
        norm = funcspace.holder_norm_empirical(p, 1.0, grid_m=129).value
        scale = min(1.0, 0.95 * K / max(norm, 1e-12))
        p = funcspace.WaveletPath(r=1, levels=[scale * lv for lv in p.levels],
                                  range_clip=True)
        return p

    for k in range(trials):
        h0, h0t = rand_layer(), rand_layer()
        h1, h1t = rand_layer(), rand_layer()
        layers = [funcspace.LayerFunction([(h0, (1,))], 1),
                  funcspace.LayerFunction([(h1, (1,))], 1)]
        layers_t = [funcspace.LayerFunction([(h0t, (1,))], 1),
                    funcspace.LayerFunction([(h1t, (1,))], 1)]
        bound, gap = funcspace.composition_gap_bound(
            layers, layers_t, betas=(1.0, 1.0), K=K, eta_slacks=(0.0 + 1e-12, 1e-12))
        pts = np.linspace(-1, 1, 401)[:, None]
        if bound < gap(pts) * (1 - 1e-9):
            ok = False
    return "composition-gap-bound", ok, "bound dominates measured gap on random 2-layer pairs"


SUITES = {
    "rates": (check_eps_ratio, check_redundancy_rates, check_floor),
    "gp": (check_besov_acceptance, check_fbm_origin),
    "funcspace": (check_holder_examples, check_composition_bound),
}
SUITES["all"] = SUITES["rates"] + SUITES["gp"] + SUITES["funcspace"]


def run_suite(name):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return [check() for check in SUITES[name]]
