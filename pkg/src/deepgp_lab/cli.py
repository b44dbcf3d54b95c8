"""Command-line entry point: rates / sample / prior / fit / diagnose / verify.

All outputs are written atomically (temp file + rename) into the --out
directory; a manifest.json records the config hash, seed, and version.
Reals are printed with 17 significant digits so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__, funcspace, gp, inference, prior, rates, structure, verify
from .errors import DeepGpError, NumericError, ValidationError

_SCHEMA_VERSION = 1

_ALLOWED_KEYS = {
    "rates": {"schema_version", "structure", "family", "n_list", "profile"},
    "sample": {"schema_version", "family", "beta", "r", "n", "count",
               "conditioned", "k_prime", "grid", "profile"},
    "prior": {"schema_version", "space", "family", "n", "beta_grid", "draws",
              "profile"},
    "fit": {"schema_version", "space", "family", "n", "beta_grid", "truth",
            "posterior", "profile"},
    "diagnose": {"schema_version", "space", "family", "n", "beta_grid", "truth",
                 "posterior", "profile", "n_list", "C"},
}


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _atomic_write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, os.path.join(out_dir, name))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(out_dir, name, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(out_dir, name, "\n".join(lines) + "\n")


def _load_config(path, command):
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed JSON config: {exc}") from exc
    if cfg.get("schema_version") != _SCHEMA_VERSION:
        raise ValidationError(f"schema_version must be {_SCHEMA_VERSION}")
    unknown = set(cfg) - _ALLOWED_KEYS[command]
    if unknown:
        raise ValidationError(f"unknown config fields for {command}: {sorted(unknown)}")
    return cfg


def _profile(cfg):
    kwargs = dict(cfg.get("profile", {}))
    return rates.RateProfile(family=cfg["family"], **kwargs)


def _space(cfg):
    s = cfg["space"]
    return structure.StructureSpace(
        input_dim=int(s["input_dim"]), max_q=int(s["max_q"]),
        max_width=int(s["max_width"]), max_nodes=int(s.get("max_nodes", 16)),
        beta_bounds=tuple(s.get("beta_bounds", (0.5, 1.0))),
    )


def _prior_spec(cfg, seed):
    return prior.StructurePriorSpec(
        space=_space(cfg), profile=_profile(cfg), n=int(cfg["n"]),
        beta_grid=tuple(cfg.get("beta_grid", (1.0,))),
    )


def _manifest(out_dir, command, config_path, seed):
    digest = ""
    if config_path:
        with open(config_path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
    _atomic_write(out_dir, "manifest.json", json.dumps({
        "command": command,
        "config_sha256": digest,
        "seed": seed,
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommands

def _cmd_rates(cfg, seed, out_dir):
    eta = structure.structure_from_dict(cfg["structure"])
    profile = _profile(cfg)
    rows = []
    for n in cfg["n_list"]:
        n = int(n)
        rn = rates.minimax_rate(eta, n)
        eps = rates.eps_structure(eta, profile, n)
        lw = rates.psi_n(eta, profile, n).log_value
        rows.append((n, rn.value, eps, lw, ";".join(str(i) for i in rn.argmax_layers)))
    _write_csv(out_dir, "rates.csv",
               ("n", "r_n", "eps_n", "log_prior_weight", "argmax_layers"), rows)


def _cmd_sample(cfg, seed, out_dir):
    spec = gp.GpSpec(family=cfg["family"], beta=float(cfg["beta"]), r=int(cfg["r"]),
                     n=int(cfg["n"]), seed=seed, grid=int(cfg.get("grid", 33)))
    count = int(cfg.get("count", 1))
    conditioned = bool(cfg.get("conditioned", False))
    paths, rows = [], []
    for k in range(count):
        if conditioned:
            kp = float(cfg.get("k_prime", 2.0))
            cond = funcspace.ConditioningSpec(
                beta=spec.beta, r=spec.r,
                K=(1.0 + kp) * np.sqrt(2.0 * np.log(2.0)),
                slack=1.0, mode="besov" if cfg["family"] == rates.WAVELET else "holder",
                grid_m=int(cfg.get("grid", 33)),
            )
            path, st = gp.sample_conditioned(spec, cond, key=(k,))
            attempts, rate = st.attempts, st.empirical_rate
        else:
            path = gp.sample_path(spec, key=(k, 1))
            attempts, rate = 1, 1.0
        pts = funcspace.grid_points(spec.r, 33)
        sup = float(np.max(np.abs(path(pts))))
        if isinstance(path, funcspace.WaveletPath):
            bnorm = funcspace.besov_norm(path, spec.beta)
            hnorm = float("nan")
        else:
            bnorm = float("nan")
            hnorm = funcspace.holder_norm_empirical(path, min(spec.beta, 2.0),
                                                    grid_m=33).value
        paths.append(funcspace.path_to_dict(path))
        rows.append((k, attempts, rate, bnorm, hnorm, sup))
    _atomic_write(out_dir, "paths.json", json.dumps(paths, sort_keys=True) + "\n")
    _write_csv(out_dir, "stats.csv",
               ("index", "attempts", "acceptance_rate", "besov_norm",
                "holder_norm", "sup_norm"), rows)


def _cmd_prior(cfg, seed, out_dir):
    spec = _prior_spec(cfg, seed)
    weighted = prior.structure_prior_weights(spec)
    rows = []
    for idx, (eta, lw) in enumerate(weighted):
        w = 0.0 if lw.is_zero else float(np.exp(lw.log_value))
        rows.append((idx, json.dumps(structure.structure_to_dict(eta), sort_keys=True)
                     .replace(",", ";"), lw.log_value, w))
    _write_csv(out_dir, "weights.csv", ("index", "structure", "log_weight", "weight"),
               rows)
    draws = []
    for k in range(int(cfg.get("draws", 0))):
        d = prior.sample_prior(spec, seed + k, weighted=weighted)
        draws.append({
            "structure": structure.structure_to_dict(d.structure),
            "layers": [[funcspace.path_to_dict(p) for p, _ in layer.components]
                       for layer in d.layers],
        })
    if draws:
        _atomic_write(out_dir, "draws.json", json.dumps(draws, sort_keys=True) + "\n")


def _truth(cfg, spec, seed):
    t = cfg["truth"]
    if t["type"] == "zero":
        f = lambda X: np.zeros(len(X))
        weighted = prior.structure_prior_weights(spec)
        return f, weighted[0][0]
    if t["type"] == "prior_draw":
        d = prior.sample_prior(spec, int(t.get("seed", seed + 999)))
        return d, d.structure
    raise ValidationError(f"unknown truth type {t['type']!r}")


def _posterior_config(cfg, seed):
    p = dict(cfg.get("posterior", {}))
    p.setdefault("seed", seed)
    return inference.PosteriorConfig(**p)


def _cmd_fit(cfg, seed, out_dir):
    spec = _prior_spec(cfg, seed)
    f_star, eta_star = _truth(cfg, spec, seed)
    data = inference.generate_data(f_star, n=int(cfg["n"]), seed=seed,
                                   input_dim=eta_star.graph.dims[0], eta_star=eta_star)
    trace = inference.run_mcmc(data, spec, _posterior_config(cfg, seed))
    rows = [(t, int(trace.structure_idx[t]), trace.log_lik[t], trace.l2_error[t],
             trace.besov[t], trace.sup[t]) for t in range(len(trace.log_lik))]
    _write_csv(out_dir, "trace.csv",
               ("iteration", "structure_index", "log_lik", "l2_error", "besov_norm",
                "sup_norm"), rows)
    _write_csv(out_dir, "summary.csv",
               ("n", "pcn_acceptance", "structure_acceptance", "median_l2_error"),
               [(data.n, trace.pcn_acceptance, trace.structure_acceptance,
                 float(np.median(trace.post_burn(trace.l2_error))))])


def _cmd_diagnose(cfg, seed, out_dir):
    from dataclasses import replace
    spec = _prior_spec(cfg, seed)
    f_star, eta_star = _truth(cfg, spec, seed)
    config = _posterior_config(cfg, seed)
    C = float(cfg.get("C", 2.0))
    n_list = [int(n) for n in cfg["n_list"]]
    mass_rows, contr_rows = [], []
    for n in n_list:
        spec_n = replace(spec, n=n)
        data = inference.generate_data(f_star, n=n, seed=seed + n,
                                       input_dim=eta_star.graph.dims[0],
                                       eta_star=eta_star)
        trace = inference.run_mcmc(data, spec_n, config)
        mass = inference.model_mass(trace, spec_n, eta_star, C=C)
        mass_rows.append((n, C, mass))
        contr_rows.append((n, float(np.median(trace.post_burn(trace.l2_error))),
                           rates.eps_structure(eta_star, spec.profile, n),
                           rates.minimax_rate(eta_star, n).value))
    _write_csv(out_dir, "model_mass.csv", ("n", "C", "mass"), mass_rows)
    _write_csv(out_dir, "contraction.csv",
               ("n", "median_l2_error", "eps_n", "minimax_rate"), contr_rows)


def _cmd_verify(suite, out_dir):
    results = verify.run_suite(suite)
    rows = []
    ok_all = True
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        rows.append((name, int(ok), detail.replace(",", ";")))
        ok_all = ok_all and ok
    _write_csv(out_dir, "verify.csv", ("check", "ok", "detail"), rows)
    return ok_all


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="deepgp-lab")
    parser.add_argument("command",
                        choices=["rates", "sample", "prior", "fit", "diagnose",
                                 "verify"])
    parser.add_argument("--config", default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("DEEPGP_LAB_THREADS", "1")))
    parser.add_argument("--out", default=".")
    parser.add_argument("--suite", default="all")
    args = parser.parse_args(argv)

    try:
        if args.command == "verify":
            ok = _cmd_verify(args.suite, args.out)
            _manifest(args.out, args.command, args.config, args.seed)
            return 0 if ok else 2
        if args.config is None:
            raise ValidationError(f"{args.command} requires --config")
        cfg = _load_config(args.config, args.command)
        handler = {"rates": _cmd_rates, "sample": _cmd_sample, "prior": _cmd_prior,
                   "fit": _cmd_fit, "diagnose": _cmd_diagnose}[args.command]
        handler(cfg, args.seed, args.out)
        _manifest(args.out, args.command, args.config, args.seed)
        return 0
    except (ValidationError, KeyError, FileNotFoundError) as exc:
        print(json.dumps({"error": "validation", "detail": str(exc)}), file=sys.stderr)
        return 1
    except (NumericError, DeepGpError) as exc:
        print(json.dumps({"error": "numeric", "detail": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
