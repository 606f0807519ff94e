"""Command-line front end: JSON config in, CSV/JSON tables out.

Outputs are deterministic given (config, seed): no timestamps, floats
printed with 17 significant digits, files written atomically.  Exit codes:
0 success, 2 config error, 3 domain error (lambda outside the admissible
interval or a quadrature/domain failure), 4 oracle tolerance breach.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from . import __version__
from . import tails as tailsmod
from .fockoracle import (bch_check, bogoliubov_action_defect, build_space,
                         mgf_oracle)
from .genfun import (QuadratureSpec, cumulants,
                     fourth_central_printed_combination, log_mgf_closed,
                     log_mgf_grid)
from .lattice import Lattice, build_lattice, lattice_from_vectors
from .observable import (certified_domain, log_mgf_diagonal_sequence,
                         log_mgf_general, observable_from_csv,
                         observable_mean, observable_random, solve_F)
from .scattering import PotentialSpec, scattering_length, solve_scattering
from .spectrum import (SpectrumKernel, build_kernel, depletion_mean,
                       depletion_variance)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_ORACLE = 4

_CSV_OBS_MODE_CAP = 64
_DESK_VECTORS = {1: [(1, 0, 0)], 2: [(1, 0, 0), (0, 1, 0)]}


class ConfigError(Exception):
    pass


class OracleBreach(Exception):
    pass


@dataclass
class RunConfig:
    potential: PotentialSpec
    convention: str
    cutoff_m: int
    lambda_min: float
    lambda_max: float
    lambda_count: int
    quadrature: QuadratureSpec
    observable: dict
    oracle: dict | None
    output_format: str
    output_path: str | None
    n_list: list | None
    seed: int
    sha256: str


def _parse_potential(raw) -> PotentialSpec:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError("potential must be an object with a 'kind'")
    kind = raw["kind"]
    try:
        if kind == "zero":
            return PotentialSpec(kind="zero")
        if kind == "square_well":
            return PotentialSpec(kind="square_well", v=float(raw["v"]),
                                 radius=float(raw["radius"]))
        if kind == "gaussian_truncated":
            return PotentialSpec(kind="gaussian_truncated", v=float(raw["v"]),
                                 width=float(raw["width"]),
                                 radius=float(raw["radius"]))
        if kind == "direct":
            return PotentialSpec(kind="direct", a=float(raw["a"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad potential parameters: {exc}") from exc
    raise ConfigError(f"unknown potential kind {kind!r}")


def parse_config(path: str, seed_override: int | None = None,
                 out_override: str | None = None) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    sha = hashlib.sha256(blob).hexdigest()
    try:
        raw = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    potential = _parse_potential(raw.get("potential", {"kind": "zero"}))
    convention = raw.get("convention", "paper")
    if convention not in ("paper", "standard"):
        raise ConfigError(f"convention must be 'paper' or 'standard', got {convention!r}")
    try:
        cutoff_m = int(raw["cutoff_m"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("cutoff_m (integer >= 1) is required") from exc
    if cutoff_m < 1:
        raise ConfigError("cutoff_m must be >= 1")

    grid = raw.get("lambda_grid", {"min": -0.5, "max": 0.5, "count": 11})
    try:
        lmin, lmax = float(grid["min"]), float(grid["max"])
        count = int(grid["count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad lambda_grid: {exc}") from exc
    if count < 1 or lmax < lmin:
        raise ConfigError("lambda_grid needs count >= 1 and max >= min")

    q = raw.get("quadrature", {})
    try:
        quad = QuadratureSpec(tol=float(q.get("tol", 1e-10)),
                              max_panels=int(q.get("max_panels", 200)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad quadrature: {exc}") from exc

    obs = raw.get("observable", {"kind": "none"})
    if not isinstance(obs, dict) or obs.get("kind") not in (
            "none", "identity", "csv", "random"):
        raise ConfigError("observable.kind must be none|identity|csv|random")
    if obs["kind"] == "csv" and not obs.get("path"):
        raise ConfigError("observable.kind=csv requires a 'path'")
    if obs["kind"] == "random" and int(obs.get("pairs", 2)) not in (1, 2):
        raise ConfigError("observable.random supports pairs in {1, 2}")

    oracle = raw.get("oracle")
    if oracle is not None:
        if not isinstance(oracle, dict) or "pairs" not in oracle or "n_max" not in oracle:
            raise ConfigError("oracle needs 'pairs' and 'n_max' (or omit it)")

    out = raw.get("output", {})
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("output.format must be csv or json")
    out_path = out_override if out_override is not None else out.get("path")

    n_list = raw.get("n_list")
    if n_list is not None:
        try:
            n_list = [float(x) for x in n_list]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad n_list: {exc}") from exc

    seed = seed_override if seed_override is not None else int(raw.get("seed", 0))
    return RunConfig(potential=potential, convention=convention, cutoff_m=cutoff_m,
                     lambda_min=lmin, lambda_max=lmax, lambda_count=count,
                     quadrature=quad, observable=obs, oracle=oracle,
                     output_format=fmt, output_path=out_path, n_list=n_list,
                     seed=seed, sha256=sha)


def _pipeline(cfg: RunConfig) -> tuple[float, float, Lattice, SpectrumKernel]:
    """potential -> effective scattering quantity -> lattice -> kernel."""
    a_eff = scattering_length(cfg.potential, convention=cfg.convention)
    a16pi = 16.0 * math.pi * a_eff
    lat = build_lattice(cfg.cutoff_m)
    return a_eff, a16pi, lat, build_kernel(lat, a16pi)


def _desk_kernel(cfg: RunConfig, pairs: int, a16pi: float):
    lat = lattice_from_vectors(_DESK_VECTORS[pairs])
    return lat, build_kernel(lat, a16pi)


def _lambda_grid(cfg: RunConfig, limit: float, warnings: list) -> np.ndarray:
    lams = np.linspace(cfg.lambda_min, cfg.lambda_max, cfg.lambda_count)
    if not math.isfinite(limit):
        return lams
    keep = np.abs(lams) < limit
    if not np.all(keep):
        warnings.append(f"lambda grid clipped to (+-{limit:.9g}): "
                        f"dropped {int(np.sum(~keep))} of {lams.size} points")
    return lams[keep]


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _render(cfg: RunConfig, command: str, columns: list, rows: list,
            extra_meta: dict, warnings: list) -> str:
    meta = {"version": __version__, "command": command,
            "config_sha256": cfg.sha256, "seed": cfg.seed,
            "convention": cfg.convention, "cutoff_m": cfg.cutoff_m}
    meta.update(extra_meta)
    meta["warnings"] = warnings
    if cfg.output_format == "json":
        body = {"meta": meta,
                "rows": [dict(zip(columns, row)) for row in rows]}
        return json.dumps(body, indent=2) + "\n"
    lines = []
    for key, val in meta.items():
        if key == "warnings":
            lines.append(f"# warnings={'|'.join(val)}")
        else:
            lines.append(f"# {key}={_fmt(val)}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def _write_atomic(path: str, text: str) -> None:
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target), prefix=".tmp-out-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(cfg, command, columns, rows, extra_meta, warnings) -> None:
    text = _render(cfg, command, columns, rows, extra_meta, warnings)
    if cfg.output_path:
        _write_atomic(cfg.output_path, text)
    else:
        sys.stdout.write(text)


def cmd_scattering(cfg: RunConfig) -> int:
    pot = cfg.potential
    a_eff, a16pi, _, k = _pipeline(cfg)
    if pot.kind in ("zero", "direct"):
        a = pot.a if pot.kind == "direct" else 0.0
        row = [pot.kind, a, a, a_eff, 0.0]
    else:
        sol = solve_scattering(pot, r_max=4.0 * pot.support_radius, n_grid=4096)
        row = [pot.kind, sol.a_std, sol.a_paper, a_eff, sol.residual]
    _emit(cfg, "scattering",
          ["kind", "a_std", "a_paper", "a_effective", "residual"], [row],
          {"lambda0": k.lambda0, "a16pi": a16pi}, [])
    return EXIT_OK


def cmd_genfun(cfg: RunConfig) -> int:
    warnings: list = []
    _, a16pi, _, k = _pipeline(cfg)
    lams = _lambda_grid(cfg, k.lambda0 * (1.0 - 1e-9) if math.isfinite(k.lambda0)
                        else math.inf, warnings)
    quad_vals = log_mgf_grid(k, lams, cfg.quadrature)
    rows = []
    for lam, qv in zip(lams, quad_vals):
        cv = log_mgf_closed(k, float(lam)).value
        rows.append([float(lam), float(qv), cv, abs(float(qv) - cv), math.exp(cv)])
    _emit(cfg, "genfun",
          ["lambda", "log_mgf_quadrature", "log_mgf_closed", "abs_diff", "mgf"],
          rows, {"lambda0": k.lambda0, "a16pi": a16pi}, warnings)
    return EXIT_OK


def cmd_moments(cfg: RunConfig) -> int:
    _, a16pi, _, k = _pipeline(cfg)
    cum = cumulants(k, 4)
    mu, var = cum.kappa[1], cum.kappa[2]
    c3, c4 = cum.central[3], cum.central[4]
    printed = fourth_central_printed_combination(k)
    row = [mu, var, c3, c4, printed, abs(c4 - printed),
           "yes" if abs(c4 - printed) > 1e-10 * max(1.0, abs(c4)) else "no"]
    _emit(cfg, "moments",
          ["mean", "variance", "central3", "central4",
           "printed_fourth_combination", "printed_discrepancy",
           "printed_disagrees"],
          [row], {"lambda0": k.lambda0, "a16pi": a16pi}, [])
    return EXIT_OK


def cmd_tails(cfg: RunConfig, n_list=None) -> int:
    warnings: list = []
    _, a16pi, _, k = _pipeline(cfg)
    mu = depletion_mean(k)
    sigma = math.sqrt(depletion_variance(k))
    ns = n_list if n_list is not None else cfg.n_list
    if ns is None:
        ns = [mu + j * sigma for j in range(4)]
    columns = ["bound_type", "n", "lambda_star", "exponent", "bound",
               "m", "epsilon", "second_moment", "fourth_moment", "note"]
    rows = []
    for n in ns:
        for maker, label in ((tailsmod.chernoff_bound, "chernoff"),
                             (tailsmod.quadratic_bound, "quadratic")):
            b = maker(k, float(n))
            rows.append([label, b.n, b.lambda_star, b.exponent, b.bound,
                         "", "", "", "", b.note])
    if sigma > 0.0:
        wit = tailsmod.nonconcentration_witness(k, cumulants(k, 4).central[4])
        rows.append(["witness", wit.n, "", "", "", wit.m, wit.epsilon,
                     wit.second_moment, wit.fourth_moment, ""])
    else:
        warnings.append("witness skipped: zero-variance depletion")
    _emit(cfg, "tails", columns, rows,
          {"lambda0": k.lambda0, "a16pi": a16pi, "mean": mu,
           "sigma": sigma}, warnings)
    return EXIT_OK


def cmd_observable(cfg: RunConfig) -> int:
    warnings: list = []
    a_eff, a16pi, lat, k = _pipeline(cfg)
    kind = cfg.observable["kind"]
    columns = ["lambda", "log_mgf_o", "mean_o", "certified_domain",
               "fp_residual", "symmetry_residual", "exchange_residual"]
    rows = []

    if kind == "none":
        raise ConfigError("the observable command needs observable.kind != none")

    if kind == "identity":
        # Full-lattice route: identity weights reduce to the diagonal
        # sequence, checked against the closed form per grid point.
        limit = k.lambda0 * (1.0 - 1e-9) if math.isfinite(k.lambda0) else math.inf
        lams = _lambda_grid(cfg, limit, warnings)
        tau = np.ones(k.size)
        mu_o = depletion_mean(k)
        for lam in lams:
            val = log_mgf_diagonal_sequence(k, tau, float(lam), cfg.quadrature)
            closed = log_mgf_closed(k, float(lam)).value
            rows.append([float(lam), val, mu_o, k.lambda0,
                         abs(val - closed), 0.0, 0.0])
        _emit(cfg, "observable", columns, rows,
              {"lambda0": k.lambda0, "a16pi": a16pi, "observable": "identity"},
              warnings)
        return EXIT_OK

    if kind == "random":
        pairs = int(cfg.observable.get("pairs", 2))
        dlat, dk = _desk_kernel(cfg, pairs, a16pi)
        seed = int(cfg.observable.get("seed", cfg.seed))
        ensemble = cfg.observable.get("ensemble", "real-parity")
        obs = observable_random(dlat, seed, ensemble=ensemble)
        work_k = dk
    else:  # csv
        if lat.size > _CSV_OBS_MODE_CAP:
            raise ConfigError(f"csv observables need <= {_CSV_OBS_MODE_CAP} modes "
                              f"(cutoff_m={cfg.cutoff_m} gives {lat.size})")
        obs = observable_from_csv(lat, cfg.observable["path"])
        work_k = k

    dom = certified_domain(work_k, obs)
    limit = min(dom, work_k.lambda0) * (1.0 - 1e-9)
    lams = _lambda_grid(cfg, limit, warnings)
    mu_o = observable_mean(work_k, obs)
    for lam in lams:
        val = log_mgf_general(work_k, obs, float(lam), cfg.quadrature)
        if lam != 0.0:
            sol = solve_F(work_k, obs, float(lam))
            res = (sol.residual, sol.symmetry_residual, sol.exchange_residual)
        else:
            res = (0.0, 0.0, 0.0)
        rows.append([float(lam), val, mu_o, dom, *res])
    _emit(cfg, "observable", columns, rows,
          {"lambda0": work_k.lambda0, "a16pi": a16pi, "observable": kind},
          warnings)
    return EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    if cfg.oracle is None:
        raise ConfigError("the oracle command needs an 'oracle' config section")
    try:
        pairs = int(cfg.oracle["pairs"])
        n_max = int(cfg.oracle["n_max"])
        space = build_space(pairs, n_max)
        # the 1-pair diagnostics (BCH / generator action) need enough shells
        # for their 1e-8 tolerances; dim stays tiny for a single pair
        space1 = build_space(1, min(max(n_max, 20), 30))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    _, a16pi, _, _ = _pipeline(cfg)
    dlat, dk = _desk_kernel(cfg, pairs, a16pi)
    dlat1, dk1 = _desk_kernel(cfg, 1, a16pi)
    nu_by_pair = [float(dk.nu[i]) for i, _ in dk.lattice.pairs]
    nu1 = [float(dk1.nu[i]) for i, _ in dk1.lattice.pairs]
    lam = 0.25 * min(dk.lambda0, 2.0)

    rows = []
    breach = False

    def record(check: str, value: float, tol: float, detail: str = "") -> None:
        nonlocal breach
        ok = value <= tol
        breach = breach or not ok
        rows.append([check, value, tol, "pass" if ok else "FAIL", detail])

    try:
        mg1 = mgf_oracle(space1, nu1, np.eye(2), lam)
        closed1 = log_mgf_closed(dk1, lam).value
        record("mgf_1pair_vs_closed", abs(math.log(mg1.value) - closed1),
               max(1e-10, 10.0 * mg1.truncation_estimate),
               f"lambda={lam:.6g}")
        record("mgf_1pair_truncation", mg1.truncation_estimate, 1e-6)

        mg = mgf_oracle(space, nu_by_pair, np.eye(2 * pairs), lam)
        closed = log_mgf_closed(dk, lam).value
        record(f"mgf_{pairs}pair_vs_closed", abs(math.log(mg.value) - closed),
               max(1e-8, 10.0 * mg.truncation_estimate), f"lambda={lam:.6g}")

        rng = np.random.default_rng(cfg.seed)
        h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        h = 0.5 * (h + h.conj().T)
        # |O| <= 1 keeps the double exponential well-conditioned in float64;
        # at |O| ~ 1 and high occupation the conjugation product amplifies
        # rounding as e^{2 occ |O|} and the measurement loses meaning
        h *= 0.25 / np.linalg.norm(h, 2)
        record("bch_defect", bch_check(space1, h, 0), 1e-8,
               f"n_max={space1.n_max};norm=0.25")
        record("bogoliubov_action_defect",
               bogoliubov_action_defect(space1, nu1, 0), 1e-8,
               f"occupation<= {space1.n_max // 2}")
    except ValueError as exc:
        rows.append(["oracle_failure", math.inf, 0.0, "FAIL", str(exc)])
        breach = True

    _emit(cfg, "oracle", ["check", "value", "tolerance", "status", "detail"],
          rows, {"lambda0": dk.lambda0, "a16pi": a16pi,
                 "oracle_pairs": pairs, "oracle_n_max": n_max}, [])
    if breach:
        raise OracleBreach("oracle validation breached tolerance")
    return EXIT_OK


_COMMANDS = {
    "scattering": cmd_scattering,
    "genfun": cmd_genfun,
    "moments": cmd_moments,
    "tails": cmd_tails,
    "observable": cmd_observable,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bose-genfun",
        description="Quantum-depletion generating functions, tail bounds, "
                    "and Fock-space validation tables.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        if name == "tails":
            p.add_argument("--n-list", default=None,
                           help="comma-separated thresholds overriding config")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config, seed_override=args.seed,
                           out_override=args.out)
        if args.command == "tails" and getattr(args, "n_list", None):
            ns = [float(x) for x in args.n_list.split(",")]
            return cmd_tails(cfg, n_list=ns)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleBreach as exc:
        print(f"oracle breach: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (ValueError, ArithmeticError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
