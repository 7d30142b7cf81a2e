"""Command-line front end.

Exit codes: 0 success, 1 invalid arguments or configuration, 2 numerical
failure (degenerate channel after the retry budget, failed self-check).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .checks import (
    ALIGNMENT_TOL,
    RECOVERY_TOL,
    no_csit_recovery_error,
    partial_csit_recovery_error,
    run_all,
)
from .config import (
    PRESETS,
    SCHEDULER_CHOICES,
    load_config,
    manifest_lines,
    merge,
    preset,
    render_csv,
    validate,
)
from .dof import (
    SymbolAllocation,
    default_allocation,
    enumerate_allocations,
    region_feasible,
    sum_dof_no_csit,
    sum_dof_partial_csit,
)
from .errors import DegenerateChannelError, SingularMatrixError
from .linalg import numerical_rank
from .multicell import MulticellScenario, multicell_samples, summarize_multicell
from .network import STREAM_SCHEDULE, NetworkConfig, sample_channels, stream
from .no_csit import build_no_csit, ul_matrix
from .partial_csit import build_partial_csit, verify_lemma1
from .rates import SingleCellScenario, single_cell_samples, summarize


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _point(text: str) -> tuple[Fraction, Fraction]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("point must be d_d,d_u")
    try:
        return Fraction(parts[0].strip()), Fraction(parts[1].strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad point {text!r}") from exc


def _network_flags(p: argparse.ArgumentParser, required: bool = False, defaults=(None,) * 4):
    for flag, default in zip(("--kd", "--ku", "--md", "--mu"), defaults):
        p.add_argument(flag, type=int, default=default, required=required)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fdbia", description="Blind IA for full-duplex cells with reconfigurable BS antennas.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("dof", help="closed-form sum DoF for one topology, or the fig3 sweep")
    _network_flags(p)
    p.add_argument("--preset", choices=["fig3"])
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("region", help="test a (DL, UL) DoF pair against the no-CSIT outer region")
    _network_flags(p, defaults=(1, None, 1, None))
    p.add_argument("--point", type=_point, required=True)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("scheme-check", help="noiseless recovery and rank checks on random draws")
    _network_flags(p, defaults=(2, 2, 2, 2))
    p.add_argument("--model", choices=["no-csit", "partial-csit", "both"], default="both")
    p.add_argument("--alloc", type=_ints, help="n_d,n_u for the partial-CSIT scheme")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("verify", help="run the invariant suites")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")

    for name, helptext in (("rate-sweep", "single-cell Monte Carlo sum rates"),
                           ("multicell", "seven-cell wrap-around sum rates")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config")
        p.add_argument("--preset", choices=[k for k, v in PRESETS.items() if v["command"] == name])
        _network_flags(p)
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--residual-si", type=float, dest="residual_si_power")
        p.add_argument("--out")
        p.add_argument("--json", action="store_true")
        if name == "rate-sweep":
            p.add_argument("--snr-grid", type=_floats)
        else:
            p.add_argument("--J-grid", type=_ints, dest="j_grid")
            p.add_argument("--scheduler", choices=SCHEDULER_CHOICES)
            p.add_argument("--alpha", type=float, dest="alpha_pl")
            p.add_argument("--pref-db", type=float, dest="p_ref_db")
    return parser


# -- helpers ---------------------------------------------------------------------------------


def _cfg_from_flags(args) -> NetworkConfig:
    vals = [getattr(args, k) for k in ("kd", "ku", "md", "mu")]
    if any(v is None for v in vals):
        raise UsageError("--kd, --ku, --md and --mu are required")
    return NetworkConfig(*vals)


def _emit(args, command: str, config: dict, seed, header, rows, json_rows, notes=()) -> None:
    outputs = [args.out] if getattr(args, "out", None) else []
    manifest = manifest_lines(command, config, seed, __version__, outputs) + [f"# assumption: {n}" for n in notes]
    text = render_csv(header, rows, manifest)
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    if args.json:
        print(json.dumps({"command": command, "config": config, "seed": seed, "assumptions": list(notes),
                          "rows": json_rows},
                         indent=2, sort_keys=True, default=str))
    elif not getattr(args, "out", None):
        sys.stdout.write(text)


def _frac(x: Fraction | None) -> str:
    return "" if x is None else str(x)


# -- commands --------------------------------------------------------------------------------


def cmd_dof(args) -> int:
    if args.preset == "fig3":
        rows = []
        for k in PRESETS["fig3"]["sweep"]:
            cfg = NetworkConfig(k, k, k, k)
            b = sum_dof_partial_csit(cfg)
            rows.append((k, _frac(sum_dof_no_csit(cfg)), _frac(b.lower), _frac(b.upper), _frac(b.exact), 1))
        header = ("K", "no_csit", "partial_lower", "partial_upper", "partial_exact", "hd")
        _emit(args, "dof", {"preset": "fig3"}, None, header, rows, [dict(zip(header, r)) for r in rows])
        return 0
    cfg = _cfg_from_flags(args)
    b = sum_dof_partial_csit(cfg)
    no = sum_dof_no_csit(cfg)
    hd = min(max(cfg.k_d, cfg.k_u), 1)
    best = ""
    if cfg.k_d and cfg.k_u and enumerate_allocations(cfg):
        a = default_allocation(cfg)
        best = f"({a.n_d},{a.n_u})"
    rows = [
        ("no-csit", _frac(no), _frac(no), _frac(no), ""),
        ("partial-csit", _frac(b.lower), _frac(b.upper), _frac(b.exact), best),
        ("hd-tdd", hd, hd, hd, ""),
    ]
    header = ("model", "lower", "upper", "exact", "best_allocation")
    _emit(args, "dof", {"network": cfg.as_dict()}, None, header, rows, [dict(zip(header, r)) for r in rows])
    return 0


def cmd_region(args) -> int:
    cfg = _cfg_from_flags(args)
    d_d, d_u = args.point
    ok = region_feasible(d_d, d_u, cfg)
    verdict = "feasible" if ok else "infeasible"
    if args.json:
        print(json.dumps({"point": [str(d_d), str(d_u)], "l_u": cfg.l_u, "verdict": verdict}))
    else:
        print(f"({d_d}, {d_u}) with L_u = {cfg.l_u}: {verdict}")
    return 0


def cmd_scheme_check(args) -> int:
    cfg = _cfg_from_flags(args)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.alloc is not None and len(args.alloc) != 2:
        raise UsageError("--alloc takes n_d,n_u")
    both_sides = cfg.k_d >= 1 and cfg.k_u >= 1
    run_no = args.model in ("no-csit", "both") and both_sides
    alloc = None
    if args.model in ("partial-csit", "both") and both_sides and enumerate_allocations(cfg):
        alloc = SymbolAllocation(*args.alloc) if args.alloc else default_allocation(cfg)
        alloc.check(cfg.l_d, cfg.l_u)
    if not run_no and alloc is None:
        raise UsageError("no scheme applies to this topology (needs K_d, K_u >= 1; partial CSIT needs L_d L_u >= 2)")

    report: dict = {"network": cfg.as_dict(), "trials": args.trials, "seed": args.seed}
    ok = True
    if run_no:
        p = build_no_csit(cfg)
        align = float(np.abs(p.W1.conj().T @ p.w2).max(initial=0.0))
        worst, ranks = 0.0, []
        for t in range(args.trials):
            cr = sample_channels(cfg, args.seed, t)
            worst = max(worst, no_csit_recovery_error(cfg, cr, stream(args.seed, t, STREAM_SCHEDULE)))
            ranks.append(numerical_rank(ul_matrix(p, cr)))
        report["no_csit"] = {
            "alignment_residual": align,
            "rank_R_min": min(ranks),
            "rank_R_expected": cfg.l_u,
            "max_rel_error": worst,
        }
        ok &= align <= ALIGNMENT_TOL and worst <= RECOVERY_TOL and min(ranks) == cfg.l_u
    if alloc is not None:
        worst, bad, res_a, res_b, rank_p, rank_q = 0.0, 0, 0.0, 0.0, [], []
        align = 0.0
        for t in range(args.trials):
            cr = sample_channels(cfg, args.seed, t)
            worst = max(worst, partial_csit_recovery_error(cfg, cr, alloc, stream(args.seed, t, STREAM_SCHEDULE)))
            rep = verify_lemma1(cfg, cr, alloc)
            bad += not rep.holds(alloc, cfg)
            res_a, res_b = max(res_a, rep.residual_A), max(res_b, rep.residual_B)
            rank_p.append(rep.rank_P)
            rank_q.append(rep.rank_Q)
            if t == 0:
                pc = build_partial_csit(cfg, cr, alloc)
                align = float(np.abs(pc.W3.conj().T @ pc.W4).max())
        report["partial_csit"] = {
            "allocation": [alloc.n_d, alloc.n_u],
            "alignment_residual": align,
            "rank_P_min": min(rank_p),
            "rank_P_expected": cfg.l_d * alloc.n_d,
            "rank_Q_min": min(rank_q),
            "rank_Q_required": cfg.l_u * alloc.n_u,
            "identity_residual_A_max": res_a,
            "identity_residual_B_max": res_b,
            "rank_claim_failures": bad,
            "max_rel_error": worst,
        }
        ok &= align <= ALIGNMENT_TOL and worst <= RECOVERY_TOL and bad == 0
    report["ok"] = bool(ok)
    if args.json:
        print(json.dumps(report, sort_keys=True))
    else:
        for key, value in report.items():
            if isinstance(value, dict):
                print(f"{key}:")
                for k, v in value.items():
                    print(f"  {k}: {v}")
            else:
                print(f"{key}: {value}")
    return 0 if ok else 2


def cmd_verify(args) -> int:
    results = run_all(args.trials, args.seed)
    if args.json:
        print(json.dumps([dataclasses.asdict(r) for r in results]))
    else:
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return 0 if all(r.passed for r in results) else 2


def _resolve(args, command: str) -> dict:
    layers = []
    if args.preset:
        layers.append(preset(args.preset, command))
    if args.config:
        layers.append(load_config(args.config))
    flags: dict = {"network": {}, "simulation": {}, "multicell": {}}
    for flag, key in (("kd", "k_d"), ("ku", "k_u"), ("md", "m_d"), ("mu", "m_u")):
        if getattr(args, flag) is not None:
            flags["network"][key] = getattr(args, flag)
    for key in ("trials", "seed", "residual_si_power"):
        if getattr(args, key) is not None:
            flags["simulation"][key] = getattr(args, key)
    if command == "rate-sweep" and args.snr_grid is not None:
        flags["simulation"]["snr_grid_db"] = args.snr_grid
    if command == "multicell":
        for key in ("j_grid", "scheduler", "alpha_pl", "p_ref_db"):
            if getattr(args, key) is not None:
                flags["multicell"][key] = getattr(args, key)
    layers.append(validate({k: v for k, v in flags.items() if v}))
    config = merge(*layers)
    keep = ("network", "simulation") + (("multicell",) if command == "multicell" else ())
    config = {k: config[k] for k in keep}
    if command == "multicell":
        config["simulation"].pop("snr_grid_db", None)
    return config


def cmd_rate_sweep(args) -> int:
    config = _resolve(args, "rate-sweep")
    net, sim = config["network"], config["simulation"]
    scenario = SingleCellScenario(
        NetworkConfig(**net), trials=sim["trials"], seed=sim["seed"],
        residual_si_power=sim["residual_si_power"],
    )
    grid = sim["snr_grid_db"]
    rows = summarize(grid, single_cell_samples(scenario, grid))
    header = ("snr_db", "system", "mean_sum_rate", "stderr", "gap_vs_hd", "gap_stderr")
    table = [(r.point, r.system, r.mean_sum_rate, r.stderr, r.gap, r.gap_stderr) for r in rows]
    _emit(args, "rate-sweep", config, sim["seed"], header, table, [dataclasses.asdict(r) for r in rows])
    return 0


def cmd_multicell(args) -> int:
    config = _resolve(args, "multicell")
    net, sim, mc = config["network"], config["simulation"], config["multicell"]
    schedulers = ["max-snr", "round-robin"] if mc["scheduler"] == "both" else [mc["scheduler"]]
    scenario = MulticellScenario(
        NetworkConfig(**net), j=min(mc["j_grid"]), alpha_pl=mc["alpha_pl"], p_ref_db=mc["p_ref_db"],
        scheduler=schedulers[0], residual_si_power=sim["residual_si_power"],
        trials=sim["trials"], seed=sim["seed"],
    )
    rows = summarize_multicell(multicell_samples(scenario, mc["j_grid"], schedulers))
    header = ("J", "scheduler", "system", "mean_sum_rate", "stderr", "gap_vs_hd", "gap_stderr")
    table = [(r.j, r.scheduler, r.system, r.mean_sum_rate, r.stderr, r.gap, r.gap_stderr) for r in rows]
    _emit(args, "multicell", config, sim["seed"], header, table, [dataclasses.asdict(r) for r in rows],
          notes=[f"bs_bs_channel = {scenario.echo()['bs_bs_channel']}"])
    return 0


COMMANDS = {
    "dof": cmd_dof,
    "region": cmd_region,
    "scheme-check": cmd_scheme_check,
    "verify": cmd_verify,
    "rate-sweep": cmd_rate_sweep,
    "multicell": cmd_multicell,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (DegenerateChannelError, SingularMatrixError) as exc:
        print(f"fdbia: numerical failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"fdbia: invalid configuration: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
