"""Command line: ``crisisnet run | synth | heatmap``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import PipelineConfig, format_config, parse_config, with_overrides
from .errors import ConfigError, DataError, NumericalError, StageError
from .marketdata import write_bars
from .output import read_matrix_csv, write_heatmap
from .synthetic import synthesize

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _cmd_run(args) -> int:
    from .pipeline import run_pipeline

    cfg = parse_config(args.config)
    features = tuple(f.strip() for f in args.lstm_features.split(",")) if args.lstm_features else None
    try:
        cfg = with_overrides(
            cfg,
            log_returns=True if args.log_returns else None,
            lag=args.lag,
            zeta=args.zeta,
            ridge_lambda=args.ridge_lambda,
            seq_len=args.seq_len,
            lstm_features=features,
            output_dir=args.out,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    art = run_pipeline(cfg)
    print(f"wrote {len(art.files)} artifacts to {art.output_dir}")
    for key in ("test_rho", "test_rmse"):
        if key in art.summary:
            print(f"{key}: {art.summary[key]:.6g}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    if args.securities < 2 or args.days < 10:
        raise ConfigError("synth needs --securities >= 2 and --days >= 10")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bars, truth = synthesize(args.securities, args.days, args.seed)
    write_bars(bars, out / "bars.csv")
    (out / "truth.json").write_text(json.dumps(truth.to_dict(), indent=2) + "\n", encoding="utf-8")
    cfg = PipelineConfig(data="bars.csv", output_dir="run", seed=args.seed, crisis_dates=tuple(truth.crisis_dates))
    (out / "pipeline.cfg").write_text(format_config(cfg), encoding="utf-8")
    print(f"wrote {len(bars)} bars for {args.securities} securities to {out}")
    return EXIT_OK


def _cmd_heatmap(args) -> int:
    M = read_matrix_csv(args.inp)
    if args.fill_empty is not None:
        M = np.where(np.isnan(M), args.fill_empty, M)
    write_heatmap(M, args.out)
    print(f"wrote {M.shape[1]}x{M.shape[0]} heatmap to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crisisnet", description="Multilayer market networks and crisis forecasting.")
    p.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the full pipeline from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="override output_dir")
    r.add_argument("--log-returns", action="store_true")
    r.add_argument("--lag", type=int)
    r.add_argument("--zeta", type=float)
    r.add_argument("--ridge-lambda", type=float)
    r.add_argument("--seq-len", type=int)
    r.add_argument("--lstm-features", help="comma-separated feature keys")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("synth", help="write a synthetic bar panel with planted structure")
    s.add_argument("--securities", type=int, default=20)
    s.add_argument("--days", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_synth)

    h = sub.add_parser("heatmap", help="render a matrix CSV as a PPM heatmap")
    h.add_argument("--in", dest="inp", required=True)
    h.add_argument("--out", required=True)
    h.add_argument("--fill-empty", type=float, help="value substituted for empty cells")
    h.set_defaults(func=_cmd_heatmap)
    return p


def _exit_code(exc) -> int:
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, ConfigError):
        return EXIT_CONFIG
    if isinstance(cause, (NumericalError, ArithmeticError)):
        return EXIT_NUMERIC
    return EXIT_DATA


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StageError, DataError, NumericalError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
