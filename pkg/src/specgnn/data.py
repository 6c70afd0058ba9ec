"""Task data: diffused-source classification, MovieLens-100k ratings, metrics."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .graph import Graph, knn_sparsify
from .linalg import shift_power_apply


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    y: float
    target_index: int = -1


@dataclass
class Dataset:
    """Samples stored column-wise.

    ``X`` is ``(m, n)``; ``y`` holds class indices (classification) or
    ratings (regression); ``target_index`` is ``-1`` for classification and
    the masked node for regression.  ``provenance`` keeps per-sample
    generation details (source node, diffusion time, user id...).
    """

    X: np.ndarray
    y: np.ndarray
    target_index: np.ndarray
    task: str = "classification"
    split: str = "train"
    num_classes: int = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        self.target_index = np.asarray(self.target_index, dtype=np.intp)
        m = self.X.shape[0]
        if self.y.shape != (m,) or self.target_index.shape != (m,):
            raise DataError("X, y and target_index lengths disagree")
        if not np.all(np.isfinite(self.X)):
            raise DataError("signals contain non-finite values")

    def __len__(self):
        return self.X.shape[0]

    def __iter__(self):
        for x, y, t in zip(self.X, self.y, self.target_index):
            yield Sample(x, y, int(t))

    @property
    def n(self):
        return self.X.shape[1]

    def subset(self, idx, split=None):
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(
            self.X[idx],
            self.y[idx],
            self.target_index[idx],
            self.task,
            split or self.split,
            self.num_classes,
            {k: np.asarray(v)[idx] for k, v in self.provenance.items()},
        )


def _split_sizes(sizes):
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != 3 or min(sizes) < 1:
        raise ConfigError(f"split sizes must be three positive counts, got {sizes}")
    return sizes


def source_localization_dataset(graph, sizes, t_max=5, noise_std=1e-3, seed=None):
    """Diffused Kronecker deltas labelled by the community of their source.

    One source node per community is chosen at random and kept fixed.  Each
    sample draws a source uniformly, a diffusion time uniformly in
    ``0..t_max`` and returns ``S^t delta_s`` plus Gaussian noise.

    Returns ``(train, valid, test)`` datasets with disjoint sample ids.
    """
    if not isinstance(graph, Graph) or graph.communities is None:
        raise DataError("source localization needs a graph with community labels")
    if t_max < 0:
        raise ConfigError(f"t_max must be non-negative, got {t_max}")
    sizes = _split_sizes(sizes)
    rng = np.random.default_rng(seed)
    labels = np.asarray(graph.communities)
    communities = np.unique(labels)
    sources = np.array([rng.choice(np.flatnonzero(labels == c)) for c in communities])

    total = sum(sizes)
    which = rng.integers(0, len(sources), size=total)
    times = rng.integers(0, t_max + 1, size=total)
    noise = rng.standard_normal((total, graph.n)) * noise_std

    # all S^t delta_s for the fixed sources, t = 0..t_max
    deltas = np.zeros((graph.n, len(sources)))
    deltas[sources, np.arange(len(sources))] = 1.0
    diffused = np.stack(shift_power_apply(graph.shift, t_max, deltas, trace=True))
    X = diffused[times, :, which] + noise
    y = np.searchsorted(communities, labels[sources[which]])

    prov = {"sample_id": np.arange(total), "source": sources[which], "t": times}
    full = Dataset(
        X, y, np.full(total, -1), "classification", "all", len(communities), prov
    )
    cut = np.cumsum(sizes)
    return (
        full.subset(np.arange(0, cut[0]), "train"),
        full.subset(np.arange(cut[0], cut[1]), "valid"),
        full.subset(np.arange(cut[1], cut[2]), "test"),
    )


# ---------------------------------------------------------------------------
# MovieLens


@dataclass
class RatingsTable:
    """MovieLens ratings with per-movie counts.

    Duplicate ``(user, movie)`` records keep the last rating;
    ``duplicates`` counts how many were overwritten.
    """

    users: np.ndarray
    movies: np.ndarray
    ratings: np.ndarray
    timestamps: np.ndarray
    duplicates: int = 0

    def __len__(self):
        return self.users.size

    @property
    def num_users(self):
        return int(np.unique(self.users).size)

    @property
    def num_movies(self):
        return int(np.unique(self.movies).size)

    def movie_counts(self):
        ids, counts = np.unique(self.movies, return_counts=True)
        return dict(zip(ids.tolist(), counts.tolist()))


def _resolve_udata(path):
    path = Path(path)
    if path.is_dir():
        for cand in (path / "u.data", path / "ml-100k" / "u.data"):
            if cand.exists():
                return cand
        raise DataError(f"no u.data found under {path}")
    if not path.exists():
        raise DataError(f"ratings file not found: {path}")
    return path


def load_movielens(path):
    """Parse a MovieLens ``u.data`` file (or a directory containing one)."""
    path = _resolve_udata(path)
    records = {}
    raw = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 tab-separated fields")
            try:
                u, m, r, ts = (int(p) for p in parts)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-integer field") from exc
            if not 1 <= r <= 5:
                raise DataError(f"{path}:{lineno}: rating {r} outside 1..5")
            raw += 1
            records[(u, m)] = (r, ts)
    if not records:
        raise DataError(f"{path} holds no ratings")
    keys = np.array(list(records.keys()), dtype=np.int64)
    vals = np.array(list(records.values()), dtype=np.int64)
    return RatingsTable(keys[:, 0], keys[:, 1], vals[:, 0], vals[:, 1], raw - len(records))


def rating_matrix(table, movie_ids):
    """Dense ``(num_users, len(movie_ids))`` matrix, zero where unrated.

    Rows follow ascending user id; the user ids are returned alongside.
    """
    users = np.unique(table.users)
    col = {m: j for j, m in enumerate(movie_ids)}
    R = np.zeros((users.size, len(movie_ids)))
    rows = np.searchsorted(users, table.users)
    for r, m, v in zip(rows, table.movies, table.ratings):
        j = col.get(int(m))
        if j is not None:
            R[r, j] = v
    return R, users


def pearson_similarity(R):
    """Pearson correlation between columns of ``R`` over co-rating users.

    Zeros mean "unrated".  Each pair uses the means of both movies over the
    users who rated both; pairs with fewer than two co-raters, or with zero
    variance on the overlap, get similarity 0.  The diagonal is 1.
    """
    mask = (R > 0).astype(np.float64)
    R = R * mask
    co = mask.T @ mask
    s1 = R.T @ mask  # s1[a, b]: sum of a's ratings over users rating both
    sq = (R * R).T @ mask
    cross = R.T @ R
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_a = s1 / co
        mean_b = s1.T / co
        cov = cross - co * mean_a * mean_b
        var_a = sq - co * mean_a**2
        var_b = sq.T - co * mean_b**2
        rho = cov / np.sqrt(var_a * var_b)
    tiny = 1e-9 * np.maximum(sq, sq.T)
    valid = (co >= 2) & (var_a > tiny) & (var_b > tiny)
    W = np.where(valid, rho, 0.0)
    W = np.clip(0.5 * (W + W.T), -1.0, 1.0)
    np.fill_diagonal(W, 1.0)
    return W


def top_movies(table, n_movies):
    """Ids of the ``n_movies`` most-rated movies (ties to the lower id)."""
    counts = table.movie_counts()
    if n_movies > len(counts):
        raise DataError(f"asked for {n_movies} movies but only {len(counts)} are rated")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return np.array([m for m, _ in ranked[:n_movies]], dtype=np.int64)


def build_movie_graph(table, n_movies=400, k=10):
    """Pearson kNN similarity graph over the most-rated movies.

    Negative correlations are clipped to zero before sparsification.
    Returns the normalised :class:`Graph` (``names`` holds movie ids) and a
    ``{movie_id: node}`` index map.
    """
    if k < 1:
        raise ConfigError("k must be at least 1")
    movie_ids = top_movies(table, n_movies)
    R, _ = rating_matrix(table, movie_ids)
    W = np.clip(pearson_similarity(R), 0.0, None)
    np.fill_diagonal(W, 0.0)
    g = knn_sparsify(W, k)
    graph = Graph(g.shift, g.kind, names=movie_ids)
    return graph, {int(m): i for i, m in enumerate(movie_ids)}


def movie_dataset(table, index_map, target_movie=None, split=(0.8, 0.1), seed=None):
    """One regression sample per user who rated ``target_movie``.

    The signal is the user's ratings over the graph's movies with the target
    entry zeroed; the label is the hidden rating.  Users are shuffled by
    ``seed`` and cut into train/valid/test by the given fractions.
    """
    if target_movie is None:
        counts = table.movie_counts()
        target_movie = max(index_map, key=lambda m: (counts.get(m, 0), -m))
    if target_movie not in index_map:
        raise DataError(f"movie {target_movie} is not a graph node")
    movie_ids = np.array(sorted(index_map, key=index_map.get))
    R, users = rating_matrix(table, movie_ids)
    t = index_map[target_movie]
    who = np.flatnonzero(R[:, t] > 0)
    if who.size == 0:
        raise DataError(f"nobody rated movie {target_movie}")
    X = R[who].copy()
    y = X[:, t].copy()
    X[:, t] = 0.0
    prov = {"user": users[who], "target_movie": np.full(who.size, target_movie)}
    full = Dataset(X, y, np.full(who.size, t), "regression", "all", None, prov)

    f_train, f_valid = split
    if f_train <= 0 or f_valid < 0 or f_train + f_valid >= 1:
        raise ConfigError(f"invalid split fractions {split}")
    perm = np.random.default_rng(seed).permutation(who.size)
    n_train = int(round(f_train * who.size))
    n_valid = int(round(f_valid * who.size))
    return (
        full.subset(perm[:n_train], "train"),
        full.subset(perm[n_train : n_train + n_valid], "valid"),
        full.subset(perm[n_train + n_valid :], "test"),
    )


# ---------------------------------------------------------------------------
# metrics


def _pair(pred, labels):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if pred.size == 0:
        raise DataError("empty prediction set")
    if pred.size != labels.size:
        raise DataError(f"{pred.size} predictions for {labels.size} labels")
    return pred, labels


def accuracy(predicted, labels):
    pred, labels = _pair(predicted, labels)
    return float(np.mean(pred == labels))


def rmse(predictions, labels):
    pred, labels = _pair(predictions, labels)
    return float(np.sqrt(np.mean((pred - labels) ** 2)))


# ---------------------------------------------------------------------------
# text serialisation


def save_dataset(dataset, path):
    """One sample per line: ``y target_index x_1 ... x_n`` (17 digits)."""
    with open(path, "w") as fh:
        for x, y, t in zip(dataset.X, dataset.y, dataset.target_index):
            fh.write(f"{y:.17g} {t} " + " ".join(f"{v:.17g}" for v in x) + "\n")


def load_dataset(path, split="train", num_classes=None):
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    ys, ts, xs = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                ys.append(float(parts[0]))
                ts.append(int(parts[1]))
                xs.append([float(v) for v in parts[2:]])
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not xs or len({len(x) for x in xs}) != 1:
        raise DataError(f"{path}: empty file or ragged rows")
    ts = np.array(ts)
    task = "classification" if np.all(ts == -1) else "regression"
    if task == "classification" and num_classes is None:
        num_classes = int(max(ys)) + 1
    return Dataset(np.array(xs), np.array(ys), ts, task, split, num_classes)
