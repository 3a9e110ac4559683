"""Command-line front end: ``freewalk <subcommand> [flags]``.

Exit status: 0 success, 1 validation error, 2 numerical failure, 3 a failed
acceptance check in ``report``.  Diagnostics go to stderr as one JSON object
per line.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import freeprod as fp
from . import singularity as sg
from .errors import FreewalkError, NumericalError, ValidationError
from .lattice import (
    GREEN_TOL,
    factor_singular_constants,
    lazy_srw,
    load_factor,
    theta_of_factor,
)
from .provenance import TOOL_VERSION, canonical_json, config_hash
from .series import default_threads, green_series_freeprod, monte_carlo, qn_sequence

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_CHECK = 0, 1, 2, 3

PRESETS = {"3-5": (3, 5), "3-6": (3, 6)}

# overridable through --tol NAME=VALUE
DEFAULT_TOLERANCES: dict[str, float] = {
    "eps_critical": fp.EPS_CRITICAL,
    "alpha_tol": 1e-10,
    "alpha_delta": 0.01,
    "ratio_drift": sg.RATIO_DRIFT,
    "ratio_closed_form": sg.CLOSED_FORM_RATIO,
    "chain_drift": sg.CHAIN_DRIFT,
    "chain_closed_form": sg.CLOSED_FORM_CHAIN,
    "exponent_drift": sg.EXPONENT_DRIFT,
    "tauberian_a_floor": sg.TAUBERIAN_A_FLOOR,
    "mc_sigmas": 4.0,
}
# fixed, recorded for reproducibility only
FIXED_TOLERANCES = {"green_quadrature": GREEN_TOL}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


@dataclass
class RunConfig:
    command: str
    config_path: str | None
    preset: str | None
    out: Path
    tolerances: dict[str, float]
    seed: int
    precision: str
    threads: int
    args: dict[str, Any] = field(default_factory=dict)

    def effective(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "config_path": self.config_path,
            "preset": self.preset,
            "seed": self.seed,
            "precision": self.precision,
            "threads": self.threads,
            "tolerances": {**self.tolerances, **FIXED_TOLERANCES},
            "args": self.args,
        }


def _diag(level: str, event: str, **fields) -> None:
    print(canonical_json({"level": level, "event": event, **fields}), file=sys.stderr)


def _parse_tol(items: Sequence[str]) -> dict[str, float]:
    tol = dict(DEFAULT_TOLERANCES)
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--tol expects NAME=VALUE, got {item!r}")
        if name not in tol:
            raise ValidationError(f"unknown tolerance {name!r}; known: {sorted(tol)}")
        try:
            tol[name] = float(value)
        except ValueError as exc:
            raise ValidationError(f"tolerance {name} needs a number, got {value!r}") from exc
    return tol


def _threads(arg: int | None) -> int:
    if arg is not None:
        if arg < 1:
            raise ValidationError("--threads must be >= 1")
        return arg
    try:
        return default_threads()
    except ValueError as exc:
        raise ValidationError(f"FREEWALK_THREADS is not an integer: {os.environ.get('FREEWALK_THREADS')!r}") from exc


def _preset_config(name: str, alpha: Any = "1/2") -> fp.FreeProductConfig:
    d1, d2 = PRESETS[name]
    return fp.make_config(lazy_srw(d1), lazy_srw(d2), alpha)


def _load_config(rc: RunConfig, alpha: str | None = None) -> fp.FreeProductConfig:
    if rc.config_path:
        try:
            with open(rc.config_path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object")
        cfg = fp.config_from_json(doc)
    else:
        cfg = _preset_config(rc.preset or "3-5")
    if alpha is not None:
        cfg = fp.make_config(cfg.factor1, cfg.factor2, alpha)
    return cfg


def _write(rc: RunConfig, name: str, text: str) -> Path:
    rc.out.mkdir(parents=True, exist_ok=True)
    path = rc.out / name
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    _diag("info", "wrote", path=str(path))
    return path


def _artifact(rc: RunConfig, payload: dict, cfg: fp.FreeProductConfig | None = None) -> str:
    doc = {"tool_version": TOOL_VERSION, "run": rc.effective(), **payload}
    if cfg is not None:
        doc["config"] = cfg.to_json()
        doc["config_hash"] = config_hash(cfg.to_json())
    return canonical_json(doc, indent=2) + "\n"


def _sidecar(rc: RunConfig, name: str, cfg: fp.FreeProductConfig, extra: dict) -> None:
    _write(rc, name, _artifact(rc, extra, cfg))


def _solution_payload(cfg: fp.FreeProductConfig, sol: fp.SpectralSolution) -> dict:
    mom = fp.moments_I_J(cfg, sol.R, sol)
    rec = fp.solution_record(sol, mom)
    rec["alpha"] = cfg.alpha
    rec["alpha_c"] = fp.theta_bar(cfg).alpha_c
    return rec


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_inspect_factor(rc: RunConfig) -> int:
    a = rc.args
    if a.get("factor"):
        try:
            m = load_factor(a["factor"])
        except OSError as exc:
            raise ValidationError(f"cannot read factor: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"factor is not valid JSON: {exc}") from exc
    else:
        m = lazy_srw(int(a.get("dimension") or 3))
    payload: dict[str, Any] = {"factor": m.to_json(), "aperiodic": m.aperiodic}
    if m.dimension >= 3:
        payload["theta"] = theta_of_factor(m)
    if m.dimension in (3, 4, 5, 6) and m.aperiodic:
        sc = factor_singular_constants(m)
        payload["singular_constants"] = {
            "law": sc.law,
            "derivative": sc.derivative,
            "constant": sc.constant,
            "drift": sc.drift,
            "karamata_constant": sc.karamata_constant,
            "llt_constant": sc.llt_constant,
        }
    _write(rc, "factor.json", _artifact(rc, payload))
    return EXIT_OK


def cmd_classify(rc: RunConfig) -> int:
    cfg = _load_config(rc, rc.args.get("alpha"))
    sol = fp.classify(cfg, rc.tolerances["eps_critical"])
    _write(rc, "classification.json", _artifact(rc, {"solution": _solution_payload(cfg, sol)}, cfg))
    return EXIT_OK


def _alpha_star(rc: RunConfig, cfg: fp.FreeProductConfig) -> fp.AlphaStar:
    return fp.find_alpha_star(
        cfg.factor1, cfg.factor2, tol=rc.tolerances["alpha_tol"], delta=rc.tolerances["alpha_delta"]
    )


def _alpha_star_payload(cfg: fp.FreeProductConfig, ast: fp.AlphaStar) -> dict:
    crit = cfg.with_alpha(ast.alpha)
    return {
        "alpha_star": ast.alpha,
        "bracket": list(ast.bracket),
        "root_count": ast.root_count,
        "iterations": ast.iterations,
        "solution": _solution_payload(crit, ast.solution),
    }


def cmd_alpha_star(rc: RunConfig) -> int:
    cfg = _load_config(rc)
    ast = _alpha_star(rc, cfg)
    _write(rc, "alpha_star.json", _artifact(rc, _alpha_star_payload(cfg, ast), cfg))
    return EXIT_OK


def series_csv(series, R: float) -> str:
    q = qn_sequence(series, R)
    c = series.as_float()
    # rational mode keeps c_n exact; q_tilde_n involves R and stays float
    exact = isinstance(series.coefficients, tuple)
    cells = [str(x) for x in series.coefficients] if exact else [repr(float(x)) for x in c]
    lines = ["n,c_n,q_tilde_n"]
    lines += [f"{n},{cells[n]},{float(q.coefficients[n])!r}" for n in range(len(c))]
    return "\n".join(lines) + "\n"


def cmd_green_series(rc: RunConfig) -> int:
    cfg = _load_config(rc, rc.args.get("alpha"))
    N = int(rc.args.get("N") or 2000)
    exact = rc.precision == "rational"
    series = green_series_freeprod(cfg, N, exact=exact)
    sol = fp.classify(cfg, rc.tolerances["eps_critical"])
    _write(rc, "series.csv", series_csv(series, sol.R))
    q = qn_sequence(series, sol.R)
    _sidecar(rc, "series.meta.json", cfg, {
        "N": N, "R": sol.R, "classification": sol.classification,
        "qn_burn_in": q.burn_in, "qn_violations": list(q.violations),
    })
    return EXIT_OK


def cmd_simulate(rc: RunConfig) -> int:
    cfg = _load_config(rc, rc.args.get("alpha"))
    ns = rc.args.get("n") or [6, 10, 20]
    trials = int(rc.args.get("trials") or 10**6)
    results = [monte_carlo(cfg, int(n), trials, rc.seed, rc.threads).to_json() for n in ns]
    # cross-check against the coefficient series
    series = green_series_freeprod(cfg, max(max(ns), 1)).as_float()
    for res in results:
        c = float(series[res["n"]])
        res["series_value"] = c
        res["within_sigmas"] = abs(res["estimate"] - c) <= rc.tolerances["mc_sigmas"] * max(res["stderr"], 1e-300)
    _write(rc, "simulate.json", _artifact(rc, {"results": results}, cfg))
    return EXIT_OK


def singularity_checks(rc: RunConfig, cfg: fp.FreeProductConfig, k_max_deep: int, tag: str = "") -> tuple[dict, bool]:
    """Profiles, ratio laws, model fit and second-order chain at ``cfg``'s critical weight."""
    tol = rc.tolerances
    ast = _alpha_star(rc, cfg)
    crit = cfg.with_alpha(ast.alpha)
    shallow = sg.build_profile(crit, 4, 20, threads=rc.threads)
    deep = sg.build_profile(crit, 4, k_max_deep, threads=rc.threads)
    _write(rc, f"profile{tag}.csv", sg.profile_csv(shallow))
    _write(rc, f"profile_deep{tag}.csv", sg.profile_csv(deep))
    ratio = sg.check_ratio_laws(shallow, threshold=tol["ratio_drift"], closed_form_tol=tol["ratio_closed_form"])
    fit = sg.fit_green_singularity(deep, threshold=tol["exponent_drift"])
    fit_shallow = sg.fit_green_singularity(sg.build_profile(crit, 4, 22, threads=rc.threads),
                                           threshold=tol["exponent_drift"])
    chain = sg.check_second_order_chain(crit, deep, threshold=tol["chain_drift"],
                                        closed_form_tol=tol["chain_closed_form"])
    payload = {
        "alpha_star": ast.alpha,
        "constants": sg.second_order_constants(crit),
        "ratio_laws": [r.to_json() for r in ratio],
        "green_fit": fit.to_json(),
        "green_fit_default_grid": fit_shallow.to_json(),
        "second_order_chain": [r.to_json() for r in chain],
        "profiles": {"ratio_laws": [4, 20], "deep": [4, k_max_deep]},
    }
    ok = all(r.verdict for r in ratio) and fit.verdict and all(r.verdict for r in chain)
    return payload, ok


def cmd_singularity(rc: RunConfig) -> int:
    cfg = _load_config(rc)
    payload, _ = singularity_checks(rc, cfg, int(rc.args.get("k_max_deep") or sg.DEEP_K_MAX))
    _write(rc, "singularity.json", _artifact(rc, payload, cfg))
    return EXIT_OK


def _report_one(rc: RunConfig, preset: str, k_max_deep: int) -> tuple[dict, dict[str, bool]]:
    cfg = _preset_config(preset)
    tol = rc.tolerances
    checks: dict[str, bool] = {}
    f1, f2 = cfg.factors
    lo = fp.psi_at_theta_bar(f1, f2, 0.01)
    alpha_c = fp.theta_bar(cfg).alpha_c
    hi = fp.psi_at_theta_bar(f1, f2, alpha_c)
    ast = _alpha_star(rc, cfg)
    sol = ast.solution
    crit = cfg.with_alpha(ast.alpha)
    mom = fp.moments_I_J(crit, sol.R, sol)
    checks["sign_structure"] = lo > 0 > hi and 0.01 < ast.alpha < alpha_c and abs(sol.psi_at_theta_bar) < 1e-10
    checks["theorem_properties"] = sol.degenerate_along == (2,) and mom.divergent and not mom.spectrally_positive_recurrent
    checks["degeneracy_marker"] = abs(sol.zeta_at_R[1] - 1) < 1e-6 and sol.zeta_at_R[0] < 1 - 1e-3
    below = fp.classify(cfg.with_alpha(ast.alpha - 0.05), tol["eps_critical"])
    above = fp.classify(cfg.with_alpha(ast.alpha + 0.05), tol["eps_critical"])
    checks["trichotomy"] = (
        below.classification == fp.DEGENERATE_CONVERGENT
        and above.classification == fp.NON_DEGENERATE_DIVERGENT
        and above.theta < above.theta_bar
    )
    sing, _ = singularity_checks(rc, cfg, k_max_deep, tag=f"_{preset}")
    d = f2.dimension
    if d == 5:
        checks["ratio_laws"] = all(r["verdict"] == "pass" for r in sing["ratio_laws"])
        fit = sing["green_fit"]
        checks["green_law"] = (
            fit["model"] == sg.MODEL_THIRD
            and 0.28 <= fit["exponents"]["a"] <= 0.38
            and fit["details"]["residual_factor"][sg.MODEL_HALF] >= 2
        )
    else:
        fit = sing["green_fit"]
        checks["green_law"] = fit["model"] == sg.MODEL_XLOG
    checks["second_order_chain"] = all(r["verdict"] == "pass" for r in sing["second_order_chain"])
    ndd = cfg.with_alpha(ast.alpha + 0.05)
    series = green_series_freeprod(ndd, 2000)
    _write(rc, f"series_ndd_{preset}.csv", series_csv(series, above.R))
    tf = sg.tauberian_fit(series, above.R, a_floor=tol["tauberian_a_floor"])
    checks["tauberian_ndd"] = tf.model == "b0" and 1.35 <= tf.exponents["a"] <= 1.65
    payload = {
        "preset": preset,
        "psi_theta_bar_at_0.01": lo,
        "psi_theta_bar_at_alpha_c": hi,
        "alpha_c": alpha_c,
        "alpha_star": _alpha_star_payload(cfg, ast),
        "below": below.classification,
        "above": {"classification": above.classification, "theta": above.theta, "theta_bar": above.theta_bar},
        "singularity": sing,
        "tauberian_ndd": tf.to_json(),
        "checks": checks,
    }
    return payload, checks


def cmd_report(rc: RunConfig) -> int:
    k_max_deep = int(rc.args.get("k_max_deep") or sg.DEEP_K_MAX)
    out: dict[str, Any] = {}
    failed = []
    for preset in PRESETS:
        payload, checks = _report_one(rc, preset, k_max_deep)
        out[preset] = payload
        failed += [f"{preset}:{k}" for k, ok in checks.items() if not ok]
    out["failed_checks"] = failed
    _write(rc, "report.json", _artifact(rc, out))
    for name in failed:
        _diag("error", "check_failed", check=name)
    return EXIT_CHECK if failed else EXIT_OK


COMMANDS = {
    "inspect-factor": cmd_inspect_factor,
    "classify": cmd_classify,
    "alpha-star": cmd_alpha_star,
    "green-series": cmd_green_series,
    "simulate": cmd_simulate,
    "singularity": cmd_singularity,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="free-product config JSON (factor1, factor2, alpha)")
    common.add_argument("--preset", choices=sorted(PRESETS), help="lazy SRW factors (d1-d2); default 3-5")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--precision", choices=("float", "rational"), default="float")
    common.add_argument("--threads", type=int, default=None)

    parser = _Parser(prog="freewalk", description="Random walks on free products of lattices.")
    parser.add_argument("--version", action="version", version=f"freewalk {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("inspect-factor", parents=[common], help="validate a factor, theta and singular constants")
    p.add_argument("--factor", help="factor JSON file")
    p.add_argument("--dimension", type=int, help="lazy SRW dimension when no file is given")
    p = sub.add_parser("classify", parents=[common], help="trichotomy at a given alpha")
    p.add_argument("--alpha")
    sub.add_parser("alpha-star", parents=[common], help="critical weight search")
    p = sub.add_parser("green-series", parents=[common], help="return-probability coefficients as CSV")
    p.add_argument("--alpha")
    p.add_argument("--N", type=int, default=2000)
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo return probabilities")
    p.add_argument("--alpha")
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--trials", type=int, default=10**6)
    p = sub.add_parser("singularity", parents=[common], help="critical profile and singular-law checks")
    p.add_argument("--k-max-deep", type=int, default=sg.DEEP_K_MAX)
    p = sub.add_parser("report", parents=[common], help="full pipeline for the (3,5) and (3,6) presets")
    p.add_argument("--k-max-deep", type=int, default=sg.DEEP_K_MAX)
    return parser


_COMMON_KEYS = {"command", "config", "preset", "out", "tol", "seed", "precision", "threads"}


def run(argv: Sequence[str] | None = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        if ns.config and ns.preset:
            raise ValidationError("--config and --preset are mutually exclusive")
        if ns.seed < 0 or ns.seed >= 2**64:
            raise ValidationError("--seed must be an unsigned 64-bit integer")
        rc = RunConfig(
            command=ns.command,
            config_path=ns.config,
            preset=ns.preset,
            out=Path(ns.out),
            tolerances=_parse_tol(ns.tol),
            seed=ns.seed,
            precision=ns.precision,
            threads=_threads(ns.threads),
            args={k: v for k, v in vars(ns).items() if k not in _COMMON_KEYS},
        )
        return COMMANDS[ns.command](rc)
    except ValidationError as exc:
        _diag("error", "validation", kind=type(exc).__name__, message=str(exc))
        return EXIT_VALIDATION
    except (NumericalError, FreewalkError) as exc:
        _diag("error", "numerical", kind=type(exc).__name__, message=str(exc))
        return EXIT_NUMERICAL
    except (ValueError, ArithmeticError) as exc:
        _diag("error", "numerical", kind=type(exc).__name__, message=str(exc))
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
