"""Command-line surface: simulate, analyze, scenario, moments-check."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .activation import moments, verify_stochastic_moments
from .config import load_config
from .errors import DiffusionError, ParseError, ValidationError
from .scenarios import PRESETS, emit_csv, emit_psd_csv, run_scenario


def _add_common(parser, include_runs=True):
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--eta", type=float, default=None, help="override the regularization strength")
    parser.add_argument("--horizon", type=int, default=None, help="override the iteration count")
    if include_runs:
        parser.add_argument("--runs", type=int, default=None, help="override the Monte-Carlo run count")
    parser.add_argument("--output-dir", type=Path, default=Path("."), help="directory for CSV output")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffusion-lms",
        description="Multitask diffusion LMS over asynchronous networks: "
        "simulation and closed-form performance analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte-Carlo simulation only")
    sim.add_argument("--config", type=Path, required=True)
    _add_common(sim)

    ana = sub.add_parser("analyze", help="closed-form analysis only")
    ana.add_argument("--config", type=Path, required=True)
    _add_common(ana, include_runs=False)

    scen = sub.add_parser("scenario", help="run a named preset end to end")
    scen.add_argument("name", choices=PRESETS)
    _add_common(scen)
    scen.add_argument(
        "--theory",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="force the theory pass on or off",
    )

    chk = sub.add_parser("moments-check", help="verify activation-moment stochasticity")
    chk.add_argument("--config", type=Path, required=True)
    return parser


def _emit(result, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    if result.sim is not None:
        main = emit_csv(result, out_dir / f"{result.name}.csv", which="async")
        print(f"wrote {main}")
    if result.sync_sim is not None:
        sync = emit_csv(result, out_dir / f"{result.name}-sync.csv", which="sync")
        print(f"wrote {sync}")
    if result.alpha_final is not None:
        psd = emit_psd_csv(result, out_dir / f"{result.name}-psd.csv")
        print(f"wrote {psd}")


def _print_reports(result) -> None:
    if result.mean_report is not None:
        rep = result.mean_report
        print(f"mean:        rho(B) = {rep.rho:.6g} "
              f"({'stable' if rep.stable else 'UNSTABLE'}), "
              f"uniform-step bound {rep.sufficient_bound:.6g}")
    if result.ms_report is not None:
        rep = result.ms_report
        print(f"mean-square: rho(F) = {rep.rho:.6g} "
              f"({'stable' if rep.stable else 'UNSTABLE'}), "
              f"uniform-step bound {rep.sufficient_bound:.6g}")
    if result.zeta_star is not None:
        import numpy as np

        print(f"steady-state network MSD: {10 * np.log10(result.zeta_star):.3f} dB")
    if result.bias is not None:
        import numpy as np

        print(f"asymptotic mean-bias norm: {np.linalg.norm(result.bias):.6g}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = load_config(args.config)
            result = run_scenario(cfg, runs=args.runs, horizon=args.horizon,
                                  seed=args.seed, eta=args.eta, mode="simulate")
            _emit(result, args.output_dir)
        elif args.command == "analyze":
            cfg = load_config(args.config)
            result = run_scenario(cfg, horizon=args.horizon, seed=args.seed,
                                  eta=args.eta, mode="theory", compare_sync=False)
            _print_reports(result)
            if result.theory_msd is not None:
                out = emit_csv(result, args.output_dir / f"{result.name}-theory.csv")
                print(f"wrote {out}")
        elif args.command == "scenario":
            mode = None
            if args.theory is True:
                mode = "both"
            elif args.theory is False:
                mode = "simulate"
            result = run_scenario(args.name, runs=args.runs, horizon=args.horizon,
                                  seed=args.seed, eta=args.eta, mode=mode)
            _emit(result, args.output_dir)
            _print_reports(result)
        elif args.command == "moments-check":
            cfg = load_config(args.config)
            if cfg.is_spectrum:
                from .spectrum import build_spectrum_model

                net, params = build_spectrum_model(cfg.spectrum)
            else:
                net, params = cfg.net, cfg.params
            report = verify_stochastic_moments(moments(params, net))
            print(f"combination second-moment column sums: max deviation "
                  f"{report.a_colsum_dev:.3e}")
            print(f"regularization second-moment row sums: max deviation "
                  f"{report.p_rowsum_dev:.3e}")
            print(f"minimum entries: {report.a_min_entry:.3e} (combination), "
                  f"{report.p_min_entry:.3e} (regularization)")
            print("PASS" if report.passed else "FAIL")
            return 0 if report.passed else 2
    except (ParseError, ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DiffusionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _write_theory_csv(result, path: Path) -> None:
    from .engine import to_db

    theory_db = to_db(result.theory_msd)
    lines = ["iteration,msd_sim_db,msd_theory_db"]
    lines += [f"{i},,{format(v, '.9g')}" for i, v in enumerate(theory_db)]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    sys.exit(main())
