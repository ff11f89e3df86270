"""Command-line entry point.

    hofdboost run --model ishigami --basis fourier --L 8 --n 300 --reps 50 --out runs/ishi
    hofdboost convergence --model ishigami --n-list 250,1000,4000 --out runs/conv

Exit codes: 0 success, 2 configuration error, 3 every replicate failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import BadCorrelation, ConfigError, HofdError
from .experiment import AllReplicatesFailed, ExperimentConfig, convergence_study, default_jobs, run_experiment
from .sensitivity import subset_label

EXIT_CONFIG = 2
EXIT_ALL_FAILED = 3


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",")]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", default="ishigami", help="ishigami, gsobol or csv:PATH")
    p.add_argument("--L", type=int, default=8, help="non-constant basis functions per input")
    p.add_argument("--basis", choices=["legendre", "fourier", "hermite"], default="fourier")
    p.add_argument("--selector", choices=["boost", "foba", "lasso"], default="boost")
    p.add_argument("--gamma", type=float, default=0.7)
    p.add_argument("--kmax", type=int, default=500, dest="k_max")
    p.add_argument("--kmax-rule", choices=["cp", "fixed", "log"], default="cp")
    p.add_argument("--log-c", type=float, default=10.0, help="k = ceil(C log n2) for --kmax-rule log")
    p.add_argument("--cp-mode", choices=["standardized", "paper-literal"], default="standardized")
    p.add_argument("--eps", type=float, default=1e-2, help="FoBa stopping threshold")
    p.add_argument("--delta", type=float, default=0.5, help="FoBa backward slack")
    p.add_argument("--lasso-n-lambdas", type=int, default=100)
    p.add_argument("--lasso-ratio", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", type=float, default=0.5, help="fraction of rows used to build atoms")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--correlation", type=float, default=None, metavar="RHO",
                   help="Gaussian copula with equal pairwise correlation RHO")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--degeneracy-threshold", type=float, default=1e-12)
    p.add_argument("--ishigami-a", type=float, default=7.0)
    p.add_argument("--ishigami-b", type=float, default=0.1)
    p.add_argument("--gsobol-a", type=_float_list, default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hofdboost", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replicated sensitivity experiment")
    _add_common(run)
    run.add_argument("--n", type=int, default=300)
    run.add_argument("--reps", type=int, default=1)
    run.add_argument("--fresh-sample", action="store_true",
                     help="estimate indices on a third, independent sample")
    run.add_argument("--write-traces", action="store_true")
    run.add_argument("--manifest", default=None, help="rerun the experiment recorded in a manifest.json")

    conv = sub.add_parser("convergence", help="error versus sample size")
    _add_common(conv)
    conv.add_argument("--n-list", type=_int_list, default=[250, 1000, 4000])
    conv.add_argument("--reps", type=int, default=20)
    conv.add_argument("--n-test", type=int, default=10_000)
    return parser


def _config_from_args(args) -> ExperimentConfig:
    fields = dict(
        model=args.model, L=args.L, basis=args.basis, selector=args.selector, gamma=args.gamma,
        k_max=args.k_max, kmax_rule=args.kmax_rule, log_c=args.log_c, cp_mode=args.cp_mode,
        eps=args.eps, delta=args.delta, lasso_n_lambdas=args.lasso_n_lambdas,
        lasso_ratio=args.lasso_ratio, seed=args.seed, split=args.split,
        jobs=args.jobs or default_jobs(), out=args.out, correlation=args.correlation,
        noise=args.noise, degeneracy_threshold=args.degeneracy_threshold,
        ishigami_a=args.ishigami_a, ishigami_b=args.ishigami_b, reps=args.reps,
    )
    if args.gsobol_a is not None:
        fields["gsobol_a"] = args.gsobol_a
    if args.command == "run":
        fields.update(n=args.n, fresh_sample=args.fresh_sample, write_traces=args.write_traces)
    else:
        fields["n"] = max(args.n_list)
    return ExperimentConfig(**fields)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run" and args.manifest:
            with open(args.manifest) as fh:
                cfg = ExperimentConfig.from_dict(json.load(fh)["config"])
            if args.out is not None:
                cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "out": args.out})
        else:
            cfg = _config_from_args(args)
        if args.command == "run":
            report = run_experiment(cfg)
            print(f"{len(report.succeeded)}/{cfg.reps} replicates, median |beta|_0 = "
                  f"{report.median('n_nonzero'):g}")
            for u, med, q25, q75 in report.summary():
                print(f"S_{subset_label(u):<6} median {med:.4f}  [{q25:.4f}, {q75:.4f}]")
        else:
            rows = convergence_study(cfg, args.n_list, reps=args.reps, n_test=args.n_test, out=cfg.out)
            print("n, hogs_error_median, oos_error_median")
            for n, h, o in rows:
                print(f"{n}, {h:.6g}, {o:.6g}")
    except AllReplicatesFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED
    except (ConfigError, BadCorrelation, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HofdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED
    return 0


if __name__ == "__main__":
    sys.exit(main())
