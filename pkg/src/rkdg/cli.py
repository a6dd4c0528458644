"""Command line front-end.

    rkdg solve CONFIG [--out DIR] [--workers N] [--vtk-every N]
    rkdg study CONFIG --levels N [--out DIR] [--workers N]
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .dgop import OperatorError
from .models.base import ModelError
from .run import convergence_study, run
from .timeint import SolverError


def build_parser():
    p = argparse.ArgumentParser(prog="rkdg", description="Runge-Kutta discontinuous Galerkin solver")
    p.add_argument("-v", "--verbose", action="store_true", help="log every time step")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run one configuration")
    s.add_argument("config", help="INI configuration file")
    s.add_argument("--out", default=None, help="output directory (default: output.directory)")
    s.add_argument("--workers", type=int, default=1, help="threads for the element loops")
    s.add_argument("--vtk-every", type=int, default=None, help="write VTK every N steps (0: never)")

    st = sub.add_parser("study", help="convergence study on dyadically refined grids")
    st.add_argument("config", help="INI configuration file")
    st.add_argument("--levels", type=int, required=True, help="number of grids")
    st.add_argument("--out", default=None, help="output directory for the CSV table")
    st.add_argument("--workers", type=int, default=1)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = load_config(args.config)
        out = args.out or cfg.output_dir
        if args.command == "solve":
            if args.vtk_every is not None and args.vtk_every < 0:
                raise ConfigError("--vtk-every must be >= 0")
            report = run(cfg, out, args.workers, args.vtk_every)
            print(report.summary())
            for f in report.files[-3:]:
                print(f"wrote {f}")
        else:
            if args.levels < 1:
                raise ConfigError("--levels must be >= 1")
            header, rows = convergence_study(cfg, args.levels, out, args.workers)
            print(",".join(header))
            for row in rows:
                print(",".join(str(v) for v in row))
    except (ConfigError, ModelError, OperatorError, SolverError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
