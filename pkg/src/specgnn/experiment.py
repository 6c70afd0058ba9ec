"""Three-model comparison under graph perturbations.

A run trains a vanilla GNN (``none``), the plain spectral-penalty baseline
(``plain-spectral``) and the SR-GNN (``sr``) from a shared initialisation on
each trial, then evaluates every model on the same perturbed operators.
"""

import csv
import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import build_movie_graph, load_movielens, movie_dataset, source_localization_dataset
from .errors import ConfigError, DataError
from .graph import normalize_shift, perturb, sbm_generate
from .linalg import jacobi_eigh
from .model import (
    bank_response_constants,
    gnn_forward,
    init_params,
    spectral_outputs,
    stability_constant,
    trunk,
)
from .training import LossSpec, TrainConfig, evaluate_metric, train

log = logging.getLogger(__name__)

MODEL_TAGS = {"none": "gnn", "plain-spectral": "gnn-reg", "sr": "sr-gnn"}


# ---------------------------------------------------------------------------
# configuration


@dataclass
class GraphConfig:
    n: int = 50
    communities: int = 5
    p_intra: float = 0.8
    p_inter: float = 0.2
    movielens_path: str = None
    n_movies: int = 400
    k: int = 10


@dataclass
class DataConfig:
    train: int = 10_000
    valid: int = 2_500
    test: int = 2_500
    t_max: int = 5
    noise_std: float = 1e-3
    target_movie: int = None
    split: list = field(default_factory=lambda: [0.8, 0.1])


@dataclass
class ModelConfig:
    L: int = 2
    F: int = 32
    K: int = 5
    init_scale: float = None


@dataclass
class TrainSection:
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    gamma: float = 0.1
    batch: int = 100
    iterations: int = 3000
    grad_tol: float = 1e-8
    valid_every: int = 100
    optimizer: str = "adam"


@dataclass
class SweepConfig:
    eps: list = None
    trials: int = 10
    perturbation: str = "dense"
    draws: int = 1


@dataclass
class ExperimentConfig:
    task: str = "source-loc"
    seed: int = 0
    out: str = "results"
    modes: list = field(default_factory=lambda: ["none", "plain-spectral", "sr"])
    graph: GraphConfig = field(default_factory=GraphConfig)
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainSection = field(default_factory=TrainSection)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        if self.sweep.eps is None:
            top = 0.01 if self.task == "source-loc" else 0.1
            self.sweep.eps = np.linspace(0.0, top, 6).tolist()
        self.validate()

    def validate(self):
        if self.task not in ("source-loc", "movielens"):
            raise ConfigError(f"task must be 'source-loc' or 'movielens', got {self.task!r}")
        eps = [float(e) for e in self.sweep.eps]
        if not eps or min(eps) < 0:
            raise ConfigError("sweep.eps must be a non-empty list of non-negative values")
        if eps != sorted(eps):
            raise ConfigError("sweep.eps must be sorted ascending")
        if self.sweep.trials < 1:
            raise ConfigError("sweep.trials must be at least 1")
        if self.sweep.draws < 1:
            raise ConfigError("sweep.draws must be at least 1")
        if not self.modes:
            raise ConfigError("modes must list at least one regularizer mode")
        for m in self.modes:
            if m not in MODEL_TAGS:
                raise ConfigError(f"unknown mode {m!r}; choose from {list(MODEL_TAGS)}")
        if len(set(self.modes)) != len(self.modes):
            raise ConfigError("modes must not repeat")
        if min(self.model.L, self.model.F) < 1 or self.model.K < 0:
            raise ConfigError("model needs L >= 1, F >= 1, K >= 0")
        if self.train.gamma < 0:
            raise ConfigError("train.gamma must be non-negative")
        if self.task == "movielens" and not self.graph.movielens_path:
            raise ConfigError("movielens task needs graph.movielens_path")

    @property
    def eps_values(self):
        return [float(e) for e in self.sweep.eps]

    def to_dict(self):
        return dataclasses.asdict(self)


def _section(cls, raw, where):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return cls(**raw)


def config_from_dict(raw):
    """Build an :class:`ExperimentConfig`; unknown keys are errors."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    sections = {
        "graph": GraphConfig,
        "data": DataConfig,
        "model": ModelConfig,
        "train": TrainSection,
        "sweep": SweepConfig,
    }
    kwargs = {}
    for name, cls in sections.items():
        if name in raw:
            kwargs[name] = _section(cls, raw.pop(name), name)
    top = {"task", "seed", "out", "modes"}
    unknown = sorted(set(raw) - top)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    try:
        return ExperimentConfig(**raw, **kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class ResultRecord:
    model: str
    eps: float
    seed: int
    metric: float
    deviation_trunk: float
    deviation_out: float
    max_z: list
    C_U: float
    C_L: float
    C_bound: float


def _task_outputs(params, S, dataset, task):
    out, _ = gnn_forward(params, S, dataset.X)
    if task == "regression":
        return out[np.arange(len(dataset)), dataset.target_index][:, None]
    return out


def perturbation_seeds(seed, draws):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(draws)]


def stability_eval(params, S, eps, test_set, trials=1, seed=0, mode="dense", task=None):
    """Metric and output deviation on perturbed copies of ``S``.

    ``trials`` perturbations ``S + E`` with ``||E|| = eps`` are drawn from
    ``seed``; identical seeds give identical operators, which is how paired
    comparisons across models are made.  Returns a dict with the mean
    ``metric`` on the perturbed graphs and the mean per-sample l2 deviations
    of the trunk features (``deviation_trunk``) and of the task outputs
    (``deviation_out``: logits, or the predicted rating for regression).
    """
    task = task or test_set.task
    S = np.asarray(S, dtype=np.float64)
    base_trunk = trunk(params, S, test_set.X).reshape(len(test_set), -1)
    base_out = _task_outputs(params, S, test_set, task)
    metrics, dev_t, dev_o = [], [], []
    for s in perturbation_seeds(seed, trials):
        S_p = perturb(S, eps, mode=mode, seed=s)
        metrics.append(evaluate_metric(params, S_p, test_set, task))
        tr = trunk(params, S_p, test_set.X).reshape(len(test_set), -1)
        dev_t.append(np.mean(np.linalg.norm(tr - base_trunk, axis=1)))
        out = _task_outputs(params, S_p, test_set, task)
        dev_o.append(np.mean(np.linalg.norm(out - base_out, axis=1)))
    return {
        "metric": float(np.mean(metrics)),
        "deviation_trunk": float(np.mean(dev_t)),
        "deviation_out": float(np.mean(dev_o)),
    }


# ---------------------------------------------------------------------------
# orchestration


def trial_seeds(seed, trials):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(trials)]


def _sub_seeds(trial_seed):
    names = ("graph", "data", "init", "train", "perturb")
    states = np.random.SeedSequence(trial_seed).spawn(len(names))
    return {k: int(s.generate_state(1)[0]) for k, s in zip(names, states)}


@dataclass
class TrialSetup:
    S: np.ndarray
    eigenvalues: np.ndarray
    train: object
    valid: object
    test: object
    task: str
    out_dim: int
    p0: object = None
    seeds: dict = None


class _MovieCache:
    """Loads ratings and builds the movie graph once per run."""

    def __init__(self, cfg):
        self.cfg = cfg
        self._value = None

    def get(self):
        if self._value is None:
            g = self.cfg.graph
            table = load_movielens(g.movielens_path)
            graph, index = build_movie_graph(table, g.n_movies, g.k)
            eig = jacobi_eigh(graph.shift)
            self._value = (table, graph, index, eig)
        return self._value


def _setup_data(cfg, seeds, movies):
    d = cfg.data
    if cfg.task == "source-loc":
        g = cfg.graph
        graph = normalize_shift(
            sbm_generate(g.n, g.communities, g.p_intra, g.p_inter, seed=seeds["graph"])
        )
        eig = jacobi_eigh(graph.shift)
        tr, va, te = source_localization_dataset(
            graph, (d.train, d.valid, d.test), d.t_max, d.noise_std, seed=seeds["data"]
        )
        return graph.shift, eig.eigenvalues, (tr, va, te), "classification", g.communities
    table, graph, index, eig = movies.get()
    tr, va, te = movie_dataset(table, index, d.target_movie, tuple(d.split), seed=seeds["data"])
    if min(len(tr), len(va), len(te)) == 0:
        raise DataError("a MovieLens split is empty; adjust data.split")
    return graph.shift, eig.eigenvalues, (tr, va, te), "regression", graph.n


def prepare_trial(cfg, trial_seed, movies=None):
    """Graph, datasets and shared initial parameters for one trial."""
    movies = movies or _MovieCache(cfg)
    seeds = _sub_seeds(trial_seed)
    S, lam, (tr, va, te), task, out_dim = _setup_data(cfg, seeds, movies)
    m = cfg.model
    p0 = init_params(S.shape[0], m.L, m.F, m.K, out_dim, seed=seeds["init"],
                     coeff_scale=m.init_scale)
    return TrialSetup(S, lam, tr, va, te, task, out_dim, p0, seeds)


def make_train_config(cfg, mode, setup):
    t = cfg.train
    return TrainConfig(
        batch_size=t.batch,
        iterations=t.iterations,
        grad_tol=t.grad_tol,
        seed=setup.seeds["train"],
        valid_every=t.valid_every,
        loss=LossSpec(setup.task, t.gamma, mode),
        alpha=t.alpha,
        beta1=t.beta1,
        beta2=t.beta2,
        optimizer=t.optimizer,
    )


def run_trial(cfg, trial_seed, movies=None):
    """Train every configured model for one trial and evaluate the sweep.

    Returns ``(records, histories)`` where ``histories`` maps model tag to
    its :class:`~specgnn.training.History`.
    """
    setup = prepare_trial(cfg, trial_seed, movies)
    n = setup.S.shape[0]
    m = cfg.model
    records, histories = [], {}
    for mode in cfg.modes:
        tag = MODEL_TAGS[mode]
        start = time.perf_counter()
        params, hist = train(make_train_config(cfg, mode, setup), setup.p0, setup.S,
                             setup.eigenvalues, setup.train, setup.valid)
        log.info("trial %d: trained %s in %.1fs", trial_seed, tag, time.perf_counter() - start)
        histories[tag] = hist
        consts = bank_response_constants(params.bank)
        max_z = spectral_outputs(params.bank, setup.eigenvalues).max_z.tolist()
        c_bound = stability_constant(n, m.L, m.F, consts.C_L, consts.C_U)
        for eps in cfg.eps_values:
            ev = stability_eval(
                params, setup.S, eps, setup.test, trials=cfg.sweep.draws,
                seed=setup.seeds["perturb"], mode=cfg.sweep.perturbation, task=setup.task,
            )
            records.append(ResultRecord(
                tag, eps, trial_seed, ev["metric"], ev["deviation_trunk"],
                ev["deviation_out"], max_z, consts.C_U, consts.C_L, float(c_bound),
            ))
    return records, histories


def run_experiment(cfg, out_dir=None):
    """Run all trials, write result files when ``out_dir`` is given.

    Returns the list of :class:`ResultRecord`, sorted by (model, eps, seed).
    """
    movies = _MovieCache(cfg)
    records, histories = [], {}
    for ts in trial_seeds(cfg.seed, cfg.sweep.trials):
        recs, hists = run_trial(cfg, ts, movies)
        records.extend(recs)
        for tag, h in hists.items():
            histories[(tag, ts)] = h
    records.sort(key=lambda r: (r.model, r.eps, r.seed))
    if out_dir is not None:
        emit_results(records, out_dir, histories, L=cfg.model.L)
    return records


# ---------------------------------------------------------------------------
# output


def results_header(L):
    return (
        ["model", "eps", "seed", "metric", "deviation_trunk", "deviation_out"]
        + [f"max_z_l{l + 1}" for l in range(L)]
        + ["C_U", "C_L", "C_bound"]
    )


def _f(v):
    return f"{v:.17g}"


def summarize(records):
    """Per-model, per-eps mean and (population) std of every numeric field."""
    groups = {}
    for r in records:
        groups.setdefault(r.model, {}).setdefault(_f(r.eps), []).append(r)
    summary = {}
    for model, by_eps in groups.items():
        summary[model] = {}
        for eps, recs in by_eps.items():
            entry = {"trials": len(recs)}
            for name in ("metric", "deviation_trunk", "deviation_out"):
                vals = np.array([getattr(r, name) for r in recs])
                entry[f"{name}_mean"] = float(np.mean(vals))
                entry[f"{name}_std"] = float(np.std(vals))
            summary[model][eps] = entry
    return summary


def emit_results(records, path, histories=None, L=None):
    """Write ``results.csv``, ``summary.json`` and per-model training curves."""
    if not records:
        raise DataError("no records to write")
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc}") from exc
    L = L or len(records[0].max_z)
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(results_header(L))
        for r in records:
            w.writerow(
                [r.model, _f(r.eps), r.seed, _f(r.metric), _f(r.deviation_trunk),
                 _f(r.deviation_out)]
                + [_f(z) for z in r.max_z]
                + [_f(r.C_U), _f(r.C_L), _f(r.C_bound)]
            )
    (out / "summary.json").write_text(json.dumps(summarize(records), indent=2, sort_keys=True))
    for (tag, seed), hist in sorted((histories or {}).items()):
        hist.to_csv(out / f"history_{tag}_{seed}.csv")
    return out
