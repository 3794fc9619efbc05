"""Command-line entry point.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import InputError, NumericalError
from .pipeline import STAGES, PipelineConfig
from .synth import SynthSpec, generate


def _parser():
    p = argparse.ArgumentParser(prog="tempmort", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synthgen", help="generate the synthetic dataset and a config")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, default=SynthSpec.seed)
    s.add_argument("--start-year", type=int, default=SynthSpec.start_year)
    s.add_argument("--end-year", type=int, default=SynthSpec.end_year)
    s.add_argument("--horizon-end", type=int, default=SynthSpec.horizon_end)
    s.add_argument("--n-models", type=int, default=SynthSpec.n_models)
    s.add_argument("--n-sims", type=int, default=None, help="n_sims written to the config")

    for name in STAGES:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--out", default=None, help="override the output directory")
    return p


def run(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "synthgen":
        spec = SynthSpec(start_year=args.start_year, end_year=args.end_year,
                         horizon_end=args.horizon_end, n_models=args.n_models, seed=args.seed)
        cfg = generate(args.out, spec)
        if args.n_sims is not None:
            cfg["n_sims"] = args.n_sims
            (Path(args.out) / "config.json").write_text(json.dumps(cfg, indent=1) + "\n",
                                                         encoding="utf-8")
        print(Path(args.out) / "config.json")
        return 0
    cfg = PipelineConfig.load(args.config, seed=args.seed, out=args.out, threads=args.threads)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    for path in STAGES[args.command](cfg):
        print(path)
    return 0


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    command = (argv if argv is not None else sys.argv[1:])[:1]
    stage = command[0] if command else "?"
    try:
        return run(argv)
    except FileNotFoundError as exc:
        print(f"tempmort {stage}: input error: {exc}", file=sys.stderr)
        return 2
    except (InputError, ValueError, KeyError) as exc:
        print(f"tempmort {stage}: input error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"tempmort {stage}: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
