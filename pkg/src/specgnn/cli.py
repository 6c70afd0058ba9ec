"""``specgnn`` command line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

import argparse
import logging
import sys

import numpy as np

from .errors import SpecGNNError

log = logging.getLogger("specgnn")


def _eps_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from exc


def cmd_run(args):
    from .experiment import load_config, run_experiment, summarize

    cfg = load_config(args.config)
    if args.gamma is not None:
        cfg.train.gamma = args.gamma
    if args.eps is not None:
        cfg.sweep.eps = args.eps
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.sweep.trials = args.trials
    if args.out is not None:
        cfg.out = args.out
    cfg.validate()
    records = run_experiment(cfg, cfg.out)
    for model, by_eps in summarize(records).items():
        for eps, entry in by_eps.items():
            print(
                f"{model:8s} eps={float(eps):<8.4g} metric={entry['metric_mean']:.4f}"
                f"±{entry['metric_std']:.4f} dev={entry['deviation_trunk_mean']:.4g}"
            )
    print(f"wrote {len(records)} records to {cfg.out}")
    return 0


def cmd_gradcheck(args):
    from .data import Dataset
    from .graph import normalize_shift, sbm_generate
    from .linalg import jacobi_eigh
    from .model import init_params
    from .training import LossSpec, finite_diff_check

    worst = 0.0
    spec = LossSpec("classification", args.gamma, "sr")
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)
        g = normalize_shift(sbm_generate(args.n, 2, 0.8, 0.3, seed=seed))
        eig = jacobi_eigh(g.shift)
        p = init_params(args.n, args.L, args.F, args.K, 3, seed=seed, coeff_scale=0.5)
        batch = Dataset(rng.standard_normal((4, args.n)), rng.integers(0, 3, 4), np.full(4, -1))
        err = finite_diff_check(p, g.shift, eig.eigenvalues, batch, spec, step=args.step)
        worst = max(worst, err)
        print(f"seed {seed:3d}: max relative error {err:.3e}")
    ok = worst <= args.tol
    print(f"{'PASS' if ok else 'FAIL'}: worst {worst:.3e} (tolerance {args.tol:g})")
    return 0 if ok else 4


def cmd_eig(args):
    from .graph import load_graph
    from .linalg import jacobi_eigh

    graph = load_graph(args.graph)
    eig = jacobi_eigh(graph.shift)
    print(f"# n={graph.n} kind={graph.kind}")
    for lam in eig.eigenvalues:
        print(f"{lam:.17g}")
    return 0


def cmd_data_movielens(args):
    from .data import build_movie_graph, load_movielens
    from .graph import save_graph

    table = load_movielens(args.path)
    print(f"records={len(table)} users={table.num_users} movies={table.num_movies} "
          f"duplicates={table.duplicates}")
    graph, _ = build_movie_graph(table, args.movies, args.k)
    deg = graph.degrees()
    print(f"graph nodes={graph.n} edges={graph.num_edges} "
          f"min_degree={deg.min()} max_degree={deg.max()}")
    if args.graph_out:
        save_graph(graph, args.graph_out)
        print(f"wrote {args.graph_out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="specgnn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a perturbation-sweep experiment")
    run.add_argument("--config", required=True, help="JSON experiment config")
    run.add_argument("--gamma", type=float)
    run.add_argument("--eps", type=_eps_list, help="comma-separated eps values")
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--out")
    run.set_defaults(func=cmd_run)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient check")
    gc.add_argument("--seeds", type=int, default=20)
    gc.add_argument("--n", type=int, default=10)
    gc.add_argument("--L", type=int, default=2)
    gc.add_argument("--F", type=int, default=3)
    gc.add_argument("--K", type=int, default=2)
    gc.add_argument("--gamma", type=float, default=0.1)
    gc.add_argument("--step", type=float, default=1e-6)
    gc.add_argument("--tol", type=float, default=1e-4)
    gc.set_defaults(func=cmd_gradcheck)

    eig = sub.add_parser("eig", help="eigenvalues of a saved graph")
    eig.add_argument("--graph", required=True)
    eig.set_defaults(func=cmd_eig)

    data = sub.add_parser("data", help="dataset utilities")
    dsub = data.add_subparsers(dest="dataset", required=True)
    ml = dsub.add_parser("movielens", help="inspect MovieLens-100k and its movie graph")
    ml.add_argument("--path", required=True, help="u.data file or its directory")
    ml.add_argument("--movies", type=int, default=400)
    ml.add_argument("--k", type=int, default=10)
    ml.add_argument("--graph-out", help="save the movie graph here")
    ml.set_defaults(func=cmd_data_movielens)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
    )
    try:
        return args.func(args)
    except SpecGNNError as exc:
        print(f"specgnn: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
