"""Command-line interface: ``ris-isac {selftest,calibrate,curve,optimize}``.

Failures print a single ``error: <Kind>: <message>`` line on stderr and exit
with status 2 (model/configuration errors) or 1 (I/O and other errors).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import harness, selftest
from .config import ScenarioConfig, load_config
from .errors import RisIsacError


def _config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    return cfg.replace(
        master_seed=args.seed,
        trials_calibration=args.trials_cal,
        trials_detection=args.trials_det,
        cnr_db=getattr(args, "cnr_db", None),
    )


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON scenario file (defaults used when omitted)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo chunks")
    p.add_argument("--trials-cal", type=int, help="H0 trials per threshold calibration")
    p.add_argument("--trials-det", type=int, help="H1 trials per detection-probability estimate")
    p.add_argument("--cnr-db", type=float, help="clutter-to-noise ratio override (dB)")


def cmd_selftest(args) -> int:
    return 0 if selftest.run_all(seed=args.seed or 0) else 1


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    cal = harness.calibrate_point(cfg, args.snr_db, args.scheme, threads=args.threads)
    print(f"threshold={cal.threshold:.10g}")
    print(f"realized_pfa={cal.realized_pfa:.6g}")
    print(f"ci95=[{cal.ci[0]:.6g}, {cal.ci[1]:.6g}]")
    return 0


def cmd_curve(args) -> int:
    cfg = _config(args)

    def progress(row):
        if args.verbose:
            print(",".join(f"{v:.6g}" for v in row.values()), file=sys.stderr)

    table = harness.run_curve(cfg, threads=args.threads, progress=progress)
    harness.emit_csv(table, args.out)
    if args.json:
        harness.emit_json(table, args.json)
    return 0


def cmd_optimize(args) -> int:
    cfg = _config(args)
    scenario = harness.Scenario(cfg)
    snr = cfg.snr_grid_db[-1] if args.snr_db is None else args.snr_db
    st = scenario.setups(snr)[args.scheme]
    sol = st.solution
    doc = {
        "snr_db": snr,
        "scheme": args.scheme,
        "phases": np.round(st.phases.psi, 12).tolist(),
        "precoder": [[float(z.real), float(z.imag)] for z in sol.p],
        "objective": sol.objective,
        "comm_snr": sol.comm_snr,
        "case_fired": sol.case_fired.value,
        "kkt_residual": sol.kkt_residual,
        "rank": sol.rank,
        "discarded_gain": sol.discarded_gain,
    }
    print(json.dumps(doc, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ris-isac", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("selftest", help="run the built-in oracle checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("calibrate", help="calibrate the detector threshold at one SNR")
    _add_common(p)
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--scheme", default="optimized", choices=harness.SCHEMES)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("curve", help="sweep the SNR grid and write the detection curves")
    _add_common(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--json", help="optional JSON output path")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("optimize", help="print the optimised RIS phases and precoder")
    _add_common(p)
    p.add_argument("--snr-db", type=float, help="SNR point (default: last grid point)")
    p.add_argument("--scheme", default="optimized", choices=harness.SCHEMES)
    p.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RisIsacError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        where = f" ({exc.filename})" if exc.filename else ""
        print(f"error: IOError: {exc.strerror or exc}{where}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
