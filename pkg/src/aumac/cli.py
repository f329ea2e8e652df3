"""Command-line front end: bound evaluation, trade-off sweeps, simulation,
and the verification suites, with byte-stable CSV/JSON emission."""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from typing import Any, Dict, List, Optional

import numpy as np

from . import bound, lemma_lab, tradeoff, wrapsim
from .config import BudgetError, SystemConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_BUDGET = 4

CSV_HEADER = "variant,ka,alpha,eb_n0_db,p_opt,p_prime,bound,evaluations,status"


def _fmt(x: float) -> str:
    """Floats at 10 significant digits, stable across runs and platforms."""
    if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
        return "nan"
    return f"{x:.10g}"


def _load_config(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _system_config(raw: Dict[str, Any]) -> SystemConfig:
    return SystemConfig(
        n=int(raw["n"]),
        payload_bits=float(raw["payload_bits"]),
        ka=int(raw["ka"]),
        alpha=float(raw["alpha"]),
        epsilon=float(raw["epsilon"]),
        p=float(raw.get("p", raw.get("p_prime", 1.0))),
        p_prime=float(raw.get("p_prime", raw.get("p", 1.0))),
    )


def _search_settings(raw: Dict[str, Any]) -> bound.SearchSettings:
    over = raw.get("search", {})
    return dataclasses.replace(bound.DEFAULT_SEARCH, **over)


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("AUMAC_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _write_text(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _error_json(message: str) -> str:
    return json.dumps({"error": message}, sort_keys=True) + "\n"


def cmd_bound(args) -> int:
    try:
        raw = _load_config(args.config)
        cfg = _system_config(raw)
        variant = raw.get("variant", "thm1")
        settings = _search_settings(raw)
    except (OSError, KeyError, ValueError, TypeError) as err:
        _write_text(args.output, _error_json(str(err)))
        return EXIT_CONFIG
    start = time.perf_counter()
    res = bound.evaluate_bound(cfg, variant, settings)
    elapsed = time.perf_counter() - start
    payload = {
        "variant": res.variant,
        "total": res.total,
        "p0": res.p0,
        "log_sum_unclamped": res.log_sum_unclamped,
        "infeasible_cells": [list(c) for c in res.infeasible_cells],
        "per_s": [
            {
                "s": ps.s,
                "log_weight": ps.log_weight,
                "log_first_term": ps.log_first_term,
                "per_s1": [
                    {"s1": c.s1, "log_multiplier": c.log_multiplier,
                     "log_term": c.log_term, "feasible": c.feasible}
                    for c in ps.per_s1
                ],
                "log_s_total": ps.log_s_total,
            }
            for ps in res.per_s_terms
        ],
        "wall_time_s": round(elapsed, 3),
    }
    _write_text(args.output, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def format_tradeoff_csv(points: List[tradeoff.TradeoffPoint]) -> str:
    rows = [CSV_HEADER]
    ordered = sorted(points, key=lambda p: (p.variant, p.alpha, p.ka))
    for p in ordered:
        rows.append(
            ",".join([
                p.variant,
                str(p.ka),
                _fmt(p.alpha),
                _fmt(p.eb_n0_db),
                _fmt(p.p_opt),
                _fmt(p.p_prime),
                _fmt(p.bound_at_solution),
                str(p.evaluations),
                p.status,
            ])
        )
    return "\n".join(rows) + "\n"


def cmd_tradeoff(args) -> int:
    try:
        raw = _load_config(args.config)
        spec = tradeoff.SweepSpec(
            n=int(raw["n"]),
            payload_bits=float(raw["payload_bits"]),
            epsilon=float(raw["epsilon"]),
            ka_values=tuple(int(k) for k in raw["ka_values"]),
            alpha_values=tuple(float(a) for a in raw["alpha_values"]),
            variants=tuple(raw.get("variants", ["thm1"])),
            tol_db=float(raw.get("tol_db", 0.02)),
            search=_search_settings(raw),
        )
    except (OSError, KeyError, ValueError, TypeError) as err:
        _write_text(args.output, _error_json(str(err)))
        return EXIT_CONFIG
    points = tradeoff.run_sweep(spec, workers=_workers(args))
    _write_text(args.output, format_tradeoff_csv(points))
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        raw = _load_config(args.config)
        cfg = _system_config(raw)
        trials = int(raw.get("trials", 1000))
        m = int(raw.get("codebook_size", cfg.m))
        delays = wrapsim.DelayVector(
            tuple(int(d) for d in raw.get("delays", [0] * cfg.ka)), cfg.dm
        )
        variant = raw.get("delay_info", "without")
        seed = int(raw.get("seed", args.seed))
    except (OSError, KeyError, ValueError, TypeError) as err:
        _write_text(args.output, _error_json(str(err)))
        return EXIT_CONFIG
    try:
        est = wrapsim.estimate_pupe(
            cfg, delays, trials, seed, variant=variant, m=m, keep_records=True
        )
    except BudgetError as err:
        _write_text(args.output, _error_json(str(err)))
        return EXIT_BUDGET
    analytic = bound.evaluate_bound(cfg, "thm2" if variant == "with" else "thm1")
    sigma = est.ci_halfwidth / 1.96
    verdict = (
        "bound_holds"
        if analytic.total >= 1.0 or est.pupe_hat <= analytic.total + 3.0 * sigma
        else "bound_violated"
    )
    summary = {
        "pupe_hat": est.pupe_hat,
        "ci_halfwidth": est.ci_halfwidth,
        "trials": est.trials,
        "analytic_bound": analytic.total,
        "verdict": verdict,
    }
    lines = ["trial,delays,decoded,errors"]
    for rec in est.records:
        lines.append(
            f"{rec.trial},{';'.join(map(str, rec.delays))},"
            f"{';'.join(map(str, rec.decoded))},{rec.user_errors}"
        )
    _write_text(args.output, "\n".join(lines) + "\n")
    _write_text(args.summary, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _verify_suites(selector: Optional[str], seed: int) -> List[Dict[str, Any]]:
    rng = np.random.Generator(np.random.Philox(key=seed))
    verdicts: List[Dict[str, Any]] = []

    def want(name: str) -> bool:
        return selector is None or selector == name

    if want("trace_inequality"):
        xs = np.concatenate([[0.0], np.logspace(-9, 6, 10_000)])
        gaps = lemma_lab.trace_inequality_gap(xs)
        verdicts.append({
            "check": "trace_inequality",
            "passed": bool((gaps >= -1e-12).all()),
            "min_gap": float(gaps.min()),
        })
    if want("mgf"):
        failures = 0
        for _ in range(100):
            dim = int(rng.integers(2, 6))
            g = rng.normal(size=(dim, dim))
            sigma = lemma_lab.SymMatrix(g @ g.T)
            a = rng.uniform(0.0, 0.5, size=dim)
            exact = lemma_lab.quadratic_form_mgf(sigma, a)
            draws = rng.multivariate_normal(np.zeros(dim), sigma.entries, size=40_000)
            vals = np.exp(-np.einsum("ij,j,ij->i", draws, a, draws))
            mc = float(vals.mean())
            se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
            if abs(mc - exact) > 3.0 * max(se, 1e-12):
                failures += 1
        verdicts.append({"check": "mgf", "passed": failures == 0,
                         "failures": failures})
    if want("gershgorin"):
        failures = 0
        for _ in range(50):
            n = int(rng.integers(4, 13))
            s1 = int(rng.integers(1, 4))
            p = float(rng.uniform(0.1, 2.0))
            d_true = [int(x) for x in rng.integers(0, n, size=s1)]
            d_hat = [(d + int(rng.integers(1, n))) % n for d in d_true]
            sigma = lemma_lab.delay_mismatch_covariance(n, p, d_true, d_hat)
            f1 = float(rng.uniform(0.01, 0.25))
            f2 = float(rng.uniform(0.0, f1))
            dm = n // 3
            a = np.array([f2] * dm + [f1] * (n - dm))
            rep = lemma_lab.gershgorin_check(sigma, a, s1, p, f1)
            if not rep.passed:
                failures += 1
        verdicts.append({"check": "gershgorin", "passed": failures == 0,
                         "failures": failures})
    if want("lemma1_bracket"):
        from .verify_bracket import run_bracket_sweep

        rep = run_bracket_sweep(seed=seed, per_branch=20)
        verdicts.append({"check": "lemma1_bracket", "passed": rep["passed"],
                         **{k: v for k, v in rep.items() if k != "passed"}})
    return verdicts


def cmd_verify(args) -> int:
    verdicts = _verify_suites(args.suite, args.seed)
    if not verdicts:
        _write_text(args.output, _error_json(f"unknown suite {args.suite!r}"))
        return EXIT_CONFIG
    _write_text(args.output, json.dumps(verdicts, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if all(v["passed"] for v in verdicts) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aumac",
        description="Finite-blocklength PUPE bounds for the asynchronous "
                    "unsourced multiple-access channel with wrap-decoding.",
    )
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: AUMAC_WORKERS or 1)")
    parser.add_argument("--seed", type=int, default=2024)
    sub = parser.add_subparsers(dest="command", required=True)

    p_bound = sub.add_parser("bound", help="evaluate one PUPE bound")
    p_bound.add_argument("config")
    p_bound.add_argument("-o", "--output", default=None)
    p_bound.set_defaults(func=cmd_bound)

    p_trade = sub.add_parser("tradeoff", help="solve an Eb/N0-vs-ka sweep")
    p_trade.add_argument("config")
    p_trade.add_argument("-o", "--output", default=None)
    p_trade.set_defaults(func=cmd_tradeoff)

    p_sim = sub.add_parser("simulate", help="toy Monte Carlo PUPE estimate")
    p_sim.add_argument("config")
    p_sim.add_argument("-o", "--output", default=None)
    p_sim.add_argument("--summary", default="-")
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="run the verification suites")
    p_ver.add_argument("--suite", default=None,
                       help="one of: trace_inequality, mgf, gershgorin, "
                            "lemma1_bracket (default: all)")
    p_ver.add_argument("-o", "--output", default=None)
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
