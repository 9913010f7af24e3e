"""Command line for seeded, reproducible transport experiments.

Subcommands: ``coot`` (two-matrix coupling pair), ``gw`` (similarity-matrix
coupling), ``cocluster``, ``hda`` (cross-domain label propagation),
``election`` (rank-disagreement distance) and ``gen`` (simulated block
data). Every run writes CSV artifacts plus a ``report.json`` into ``--out``;
identical command lines with the same seed produce byte-identical CSVs.

Exit codes: 0 ok, 1 usage, 2 I/O, 3 numeric/domain, 4 did not converge
(suppressed by ``--allow-maxiter``).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import apps, fileio
from .coot import CootProblem, solve_coot
from .core import CooptError, DomainError, LOSSES, as_histogram
from .fileio import RunReport, Stopwatch
from .gw import solve_gw_dc, sqeuclid_matrix

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3
EXIT_NOT_CONVERGED = 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_common(p, jobs=True, restarts=True, stochastic=False):
    # seed is mandatory wherever randomness is involved: always for commands
    # with random initializations, otherwise only once restarts kick in
    p.add_argument("--seed", type=int, required=stochastic, default=None,
                   help="RNG seed (mandatory for stochastic runs)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    if restarts:
        p.add_argument("--restarts", type=int, default=1)
    if jobs:
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel restart workers; result independent of this")
    p.add_argument("--heatmaps", action="store_true", help="also write PGM heatmaps")
    p.add_argument("--allow-maxiter", action="store_true",
                   help="exit 0 even when the iteration cap was hit")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coopt", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coot", help="couple samples and features of two matrices")
    p.add_argument("--x", type=Path, required=True)
    p.add_argument("--y", type=Path, required=True)
    p.add_argument("--loss", choices=sorted(LOSSES), default="sq")
    p.add_argument("--eps1", type=float, default=0.0, help="entropic strength, sample coupling")
    p.add_argument("--eps2", type=float, default=0.0, help="entropic strength, feature coupling")
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--wx", type=Path, default=None, help="sample weights for --x (CSV)")
    p.add_argument("--wy", type=Path, default=None, help="sample weights for --y (CSV)")
    p.add_argument("--vx", default=None,
                   help="feature weights for --x: CSV path or 'mean' (column-mean weighting)")
    p.add_argument("--vy", default=None, help="feature weights for --y: CSV path or 'mean'")
    _add_common(p)

    p = sub.add_parser("gw", help="couple two similarity matrices with one plan")
    p.add_argument("--x", type=Path, required=True)
    p.add_argument("--y", type=Path, required=True)
    p.add_argument("--points", action="store_true",
                   help="inputs are point clouds; build squared-Euclidean matrices")
    p.add_argument("--loss", choices=sorted(LOSSES), default="sq")
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-9)
    _add_common(p, jobs=False)

    p = sub.add_parser("cocluster", help="joint row/column clustering")
    p.add_argument("--x", type=Path, required=True)
    p.add_argument("-g", type=int, required=True, help="row clusters")
    p.add_argument("-m", type=int, required=True, help="column clusters")
    p.add_argument("--eps1", type=float, default=0.1)
    p.add_argument("--eps2", type=float, default=0.1)
    p.add_argument("--outer-iter", type=int, default=30)
    p.add_argument("--inner-iter", type=int, default=20)
    p.add_argument("--truth", type=Path, default=None,
                   help="directory holding rows.csv/cols.csv ground truth")
    _add_common(p, jobs=False, restarts=False, stochastic=True)

    p = sub.add_parser("hda", help="propagate labels across heterogeneous domains")
    p.add_argument("--xs", type=Path, required=True, help="source data matrix")
    p.add_argument("--xt", type=Path, required=True, help="target data matrix")
    p.add_argument("--ys", type=Path, required=True, help="source labels (one int per line)")
    p.add_argument("--yt-partial", type=Path, default=None,
                   help="partial target labels; -1 marks unlabeled")
    p.add_argument("--penalty", default="auto",
                   help="class-mismatch penalty: 'auto' or a positive number")
    p.add_argument("--loss", choices=sorted(LOSSES), default="sq")
    p.add_argument("--eps1", type=float, default=0.0)
    p.add_argument("--eps2", type=float, default=0.0)
    _add_common(p)

    p = sub.add_parser("election", help="rank-disagreement distance between elections")
    p.add_argument("--x", type=Path, required=True, help="voter-by-candidate rank matrix")
    p.add_argument("--y", type=Path, required=True)
    _add_common(p)

    p = sub.add_parser("gen", help="generate simulated block data")
    p.add_argument("--preset", choices=sorted(apps.BLOCK_PRESETS), default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("-g", type=int, default=None)
    p.add_argument("-m", type=int, default=None)
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--unequal", action="store_true", help="ramped cluster proportions")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, default=Path("."))
    return parser


def _feature_weights(flag, X, name):
    """Resolve a feature-weight flag: None (uniform), 'mean', or a CSV path."""
    if flag is None or flag == "uniform":
        return None
    if flag == "mean":
        means = X.mean(axis=0)
        if np.any(means <= 0):
            raise DomainError(f"{name}: column-mean weighting needs positive column means")
        return as_histogram(means / means.sum(), name)
    return as_histogram(fileio.read_weights_csv(flag), name)


def _echo_config(args) -> dict:
    skip = {"command"}
    return {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in sorted(vars(args).items())
        if k not in skip
    }


def _finish(args, report: RunReport, converged: bool) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    report.write(args.out / "report.json")
    print(report.to_json(), end="")
    if converged or getattr(args, "allow_maxiter", False):
        return EXIT_OK
    return EXIT_NOT_CONVERGED


def _write_coupling_artifacts(args, outputs, couplings):
    args.out.mkdir(parents=True, exist_ok=True)
    for stem, plan in couplings:
        csv_path = args.out / f"{stem}.csv"
        fileio.write_matrix_csv(csv_path, plan)
        outputs.append(str(csv_path))
        if getattr(args, "heatmaps", False):
            pgm_path = args.out / f"{stem}.pgm"
            fileio.export_heatmap(plan, pgm_path)
            outputs.append(str(pgm_path))


def cmd_coot(args) -> int:
    clock = Stopwatch()
    X = fileio.read_matrix_csv(args.x)
    Y = fileio.read_matrix_csv(args.y)
    problem = CootProblem(
        X, Y,
        w=None if args.wx is None else as_histogram(fileio.read_weights_csv(args.wx), "wx"),
        wp=None if args.wy is None else as_histogram(fileio.read_weights_csv(args.wy), "wy"),
        v=_feature_weights(args.vx, X, "vx"),
        vp=_feature_weights(args.vy, Y, "vy"),
        loss=LOSSES[args.loss],
        eps_samples=args.eps1,
        eps_features=args.eps2,
        max_iter=args.max_iter,
        tol=args.tol,
    )
    sol = solve_coot(problem, restarts=args.restarts, seed=args.seed, jobs=args.jobs)
    outputs = []
    _write_coupling_artifacts(args, outputs, [
        ("pi_s", sol.sample_coupling.plan), ("pi_v", sol.feature_coupling.plan)])
    report = RunReport("coot", args.seed, sol.cost, sol.iterations, sol.converged,
                       clock.millis(), outputs, _echo_config(args))
    return _finish(args, report, sol.converged)


def cmd_gw(args) -> int:
    clock = Stopwatch()
    X = fileio.read_matrix_csv(args.x)
    Y = fileio.read_matrix_csv(args.y)
    if args.points:
        C, C2 = sqeuclid_matrix(X), sqeuclid_matrix(Y)
    else:
        C, C2 = X, Y
    sol = solve_gw_dc(C, C2, loss=LOSSES[args.loss], eps=args.eps,
                      max_iter=args.max_iter, tol=args.tol,
                      restarts=args.restarts, seed=args.seed)
    outputs = []
    _write_coupling_artifacts(args, outputs, [("pi", sol.coupling.plan)])
    report = RunReport("gw", args.seed, sol.cost, sol.iterations, sol.converged,
                       clock.millis(), outputs, _echo_config(args))
    return _finish(args, report, sol.converged)


def cmd_cocluster(args) -> int:
    clock = Stopwatch()
    X = fileio.read_matrix_csv(args.x)
    clustering = apps.cocluster(
        X, args.g, args.m, eps1=args.eps1, eps2=args.eps2,
        outer_iter=args.outer_iter, seed=args.seed, inner_iter=args.inner_iter,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    outputs = []
    for name, data in (("row_labels", clustering.row_labels),
                       ("col_labels", clustering.col_labels)):
        path = args.out / f"{name}.csv"
        fileio.write_labels_csv(path, data)
        outputs.append(str(path))
    xc_path = args.out / "xc.csv"
    fileio.write_matrix_csv(xc_path, clustering.summary)
    outputs.append(str(xc_path))
    _write_coupling_artifacts(args, outputs, [
        ("pi_s", clustering.solution.sample_coupling.plan),
        ("pi_v", clustering.solution.feature_coupling.plan)])
    extra = {}
    if args.truth is not None:
        true_rows = fileio.read_labels_csv(args.truth / "rows.csv")
        true_cols = fileio.read_labels_csv(args.truth / "cols.csv")
        extra["cce"] = apps.cce(clustering.row_labels, true_rows,
                                clustering.col_labels, true_cols)
    converged = clustering.converged and clustering.solution.converged
    report = RunReport("cocluster", args.seed, clustering.solution.cost,
                       clustering.solution.iterations, converged, clock.millis(),
                       outputs, _echo_config(args), extra)
    return _finish(args, report, converged)


def cmd_hda(args) -> int:
    clock = Stopwatch()
    Xs = fileio.read_matrix_csv(args.xs)
    Xt = fileio.read_matrix_csv(args.xt)
    ys = fileio.read_labels_csv(args.ys)
    yt = None if args.yt_partial is None else fileio.read_labels_csv(args.yt_partial)
    if args.penalty == "auto":
        penalty = None
    else:
        try:
            penalty = float(args.penalty)
        except ValueError:
            raise DomainError(f"--penalty must be 'auto' or a number, got {args.penalty!r}")
    result = apps.hda_pipeline(
        Xs, Xt, ys, target_labels=yt, loss=LOSSES[args.loss],
        eps1=args.eps1, eps2=args.eps2, restarts=args.restarts,
        seed=args.seed, jobs=args.jobs, penalty=penalty,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    outputs = []
    labels_path = args.out / "labels.csv"
    fileio.write_labels_csv(labels_path, result.labels)
    outputs.append(str(labels_path))
    scores_path = args.out / "scores.csv"
    fileio.write_matrix_csv(scores_path, result.scores)
    outputs.append(str(scores_path))
    _write_coupling_artifacts(args, outputs, [
        ("pi_s", result.solution.sample_coupling.plan),
        ("pi_v", result.solution.feature_coupling.plan)])
    report = RunReport("hda", args.seed, result.solution.cost,
                       result.solution.iterations, result.solution.converged,
                       clock.millis(), outputs, _echo_config(args))
    return _finish(args, report, result.solution.converged)


def cmd_election(args) -> int:
    clock = Stopwatch()
    E = fileio.read_matrix_csv(args.x)
    E2 = fileio.read_matrix_csv(args.y)
    distance, sol = apps.election_solution(E, E2, restarts=args.restarts,
                                           seed=args.seed, jobs=args.jobs)
    outputs = []
    _write_coupling_artifacts(args, outputs, [
        ("pi_s", sol.sample_coupling.plan), ("pi_v", sol.feature_coupling.plan)])
    report = RunReport("election", args.seed, distance, sol.iterations,
                       sol.converged, clock.millis(), outputs, _echo_config(args))
    return _finish(args, report, sol.converged)


def cmd_gen(args) -> int:
    clock = Stopwatch()
    if args.preset is not None:
        config = apps.BLOCK_PRESETS[args.preset]
    else:
        required = {"--n": args.n, "--d": args.d, "-g": args.g, "-m": args.m}
        missing = [k for k, val in required.items() if val is None]
        if missing:
            raise DomainError(f"gen needs --preset or all of {sorted(required)}; "
                              f"missing {missing}")
        make = apps._unequal if args.unequal else apps._equal
        config = apps.BlockConfig(args.n, args.d, args.g, args.m,
                                  make(args.g), make(args.m), args.separation)
    X, rows, cols = apps.generate_blocks(config, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    outputs = []
    for name, writer, data in (("X.csv", fileio.write_matrix_csv, X),
                               ("rows.csv", fileio.write_labels_csv, rows),
                               ("cols.csv", fileio.write_labels_csv, cols)):
        path = args.out / name
        writer(path, data)
        outputs.append(str(path))
    report = RunReport("gen", args.seed, None, 0, True, clock.millis(),
                       outputs, _echo_config(args))
    return _finish(args, report, True)


_COMMANDS = {
    "coot": cmd_coot,
    "gw": cmd_gw,
    "cocluster": cmd_cocluster,
    "hda": cmd_hda,
    "election": cmd_election,
    "gen": cmd_gen,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "seed", None) is None:
        if getattr(args, "restarts", 1) > 1:
            print(f"coopt {args.command}: error: --seed is required with --restarts > 1",
                  file=sys.stderr)
            return EXIT_USAGE
        args.seed = 0
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"coopt {args.command}: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CooptError as exc:
        print(f"coopt {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
