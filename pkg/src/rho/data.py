"""Dataset I/O, split sampling, contamination, and the synthetic generator.

Dataset directory layout:
    edges.csv      one "src,dst" pair per line; a "src,dst" header is optional
    features.csv   one row of comma-separated floats per node
    features.bin   optional binary alternative to features.csv (see below)
    labels.csv     one 0/1 label per line (1 = anomaly)
    split.json     optional: {"labeled": [node ids], ...}

When features.bin is present it takes precedence over features.csv. Its
format is an 8-byte magic string "RHOFEAT1", two little-endian uint64 values
(rows, cols), then rows*cols little-endian float64 values in row-major
order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .exceptions import GenerationError, InputError
from .graph import Graph, build_graph, node_homophily

FEATURES_MAGIC = b"RHOFEAT1"

# Anomalies wire most of their edges across the label boundary; their own
# homophily target is fixed low rather than exposed as a knob.
ANOMALY_HOMOPHILY = 0.1

WIRING_ATTEMPTS = 20
HOMOPHILY_TOLERANCE = 0.05

# Log-scale spread of the normal-node degree distribution and of the
# per-anomaly share of incoming cross-label stubs. Heavy tails on both sides
# keep high-degree normals and low-degree anomalies in every sample, so
# degree alone never separates the classes even though anomalies absorb the
# cross-label stub demand.
DEGREE_SPREAD = 1.25
ANOMALY_SHARE_SPREAD = 1.25

REGIME_PRESETS = {"80-20": 0.8, "50-50": 0.5, "20-80": 0.2}


@dataclass(frozen=True)
class Split:
    """Labeled training nodes and the disjoint test set covering the rest."""

    labeled: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        self.labeled.setflags(write=False)
        self.test.setflags(write=False)


@dataclass
class Dataset:
    """A graph with node features, 0/1 anomaly labels, and an optional split."""

    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    split: Split | None = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.graph.n
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise InputError(f"features have {self.features.shape[0]} rows "
                             f"but the graph has {n} nodes")
        if self.labels.shape != (n,):
            raise InputError(f"labels have {self.labels.shape[0]} entries "
                             f"but the graph has {n} nodes")
        if not np.isin(self.labels, (0, 1)).all():
            raise InputError("labels must be 0 or 1")
        if self.split is not None:
            _validate_split(self.split, n)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])


def _validate_split(split: Split, n: int) -> None:
    labeled, test = split.labeled, split.test
    if labeled.size and (labeled.min() < 0 or labeled.max() >= n):
        raise InputError("split labeled ids out of range")
    combined = np.concatenate([labeled, test])
    if np.unique(combined).size != combined.size:
        raise InputError("split labeled and test sets overlap or repeat ids")
    if combined.size != n:
        raise InputError("split does not cover every node exactly once")


def _parse_numeric_line(line: str, path: str, lineno: int, kind: str):
    parts = line.split(",")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise InputError(f"{path}:{lineno}: cannot parse {kind} line {line!r}") from None


def _read_edges(path: Path) -> np.ndarray:
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if lineno == 1 and line.replace(" ", "") == "src,dst":
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected 'src,dst', got {line!r}")
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise InputError(f"{path}:{lineno}: cannot parse edge {line!r}") from None
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def _read_features_csv(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            values = _parse_numeric_line(line, str(path), lineno, "feature")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise InputError(f"{path}:{lineno}: row has {len(values)} values, "
                                 f"expected {width}")
            rows.append(values)
    if not rows:
        raise InputError(f"{path}: no feature rows")
    return np.asarray(rows, dtype=np.float64)


def _read_labels(path: Path) -> np.ndarray:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line not in ("0", "1"):
                raise InputError(f"{path}:{lineno}: label must be 0 or 1, got {line!r}")
            out.append(int(line))
    if not out:
        raise InputError(f"{path}: no labels")
    return np.asarray(out, dtype=np.int64)


def write_binary_features(path, features: np.ndarray) -> None:
    """Write a feature matrix in the documented binary format."""
    arr = np.ascontiguousarray(features, dtype="<f8")
    if arr.ndim != 2:
        raise InputError("binary feature files hold 2-D matrices")
    with open(path, "wb") as fh:
        fh.write(FEATURES_MAGIC)
        fh.write(struct.pack("<QQ", arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def read_binary_features(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(FEATURES_MAGIC))
        if magic != FEATURES_MAGIC:
            raise InputError(f"{path} is not a binary feature file (bad magic)")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise InputError(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).copy()


def load_dataset(path) -> Dataset:
    """Load a dataset directory; attaches split.json when present."""
    root = Path(path)
    if not root.is_dir():
        raise InputError(f"dataset directory {root} does not exist")
    for required in ("edges.csv", "labels.csv"):
        if not (root / required).is_file():
            raise InputError(f"dataset directory {root} is missing {required}")
    if not (root / "features.bin").is_file() and not (root / "features.csv").is_file():
        raise InputError(f"dataset directory {root} is missing features.csv or features.bin")

    labels = _read_labels(root / "labels.csv")
    if (root / "features.bin").is_file():
        features = read_binary_features(root / "features.bin")
    else:
        features = _read_features_csv(root / "features.csv")
    if features.shape[0] != labels.shape[0]:
        raise InputError(f"features have {features.shape[0]} rows but labels.csv "
                         f"has {labels.shape[0]} entries")

    n = labels.shape[0]
    graph = build_graph(_read_edges(root / "edges.csv"), n)

    split = None
    split_path = root / "split.json"
    if split_path.is_file():
        with open(split_path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        labeled = np.asarray(sorted(payload["labeled"]), dtype=np.int64)
        test = np.setdiff1d(np.arange(n, dtype=np.int64), labeled)
        split = Split(labeled=labeled, test=test)

    return Dataset(graph=graph, features=features, labels=labels, split=split)


def save_dataset(dataset: Dataset, path, binary_features: bool = False) -> None:
    """Write a dataset directory in the documented layout."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    g = dataset.graph
    with open(root / "edges.csv", "w", encoding="utf-8") as fh:
        fh.write("src,dst\n")
        for u in range(g.n):
            for v in g.neighbors(u):
                if u < v:  # each undirected edge once
                    fh.write(f"{u},{v}\n")
    if binary_features:
        write_binary_features(root / "features.bin", dataset.features)
    else:
        with open(root / "features.csv", "w", encoding="utf-8") as fh:
            for row in dataset.features:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    with open(root / "labels.csv", "w", encoding="utf-8") as fh:
        for y in dataset.labels:
            fh.write(f"{y}\n")
    if dataset.split is not None:
        with open(root / "split.json", "w", encoding="utf-8") as fh:
            json.dump({"labeled": dataset.split.labeled.tolist()}, fh)


def sample_split(labels, labeled_percent: float, seed: int) -> Split:
    """Sample floor(labeled_percent% of the normal nodes) as labeled normals.

    Anomalies are never sampled; every remaining node lands in the test set.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if not 0.0 < labeled_percent < 100.0:
        raise InputError(f"labeled_percent must lie in (0, 100), got {labeled_percent}")
    normals = np.flatnonzero(labels == 0)
    if normals.size == 0:
        raise InputError("cannot sample a split: no normal nodes")
    count = int(np.floor(labeled_percent / 100.0 * normals.size))
    if count < 1:
        raise InputError(f"labeled_percent={labeled_percent} of {normals.size} "
                         "normal nodes yields an empty labeled set")
    rng = np.random.default_rng(seed)
    labeled = np.sort(rng.choice(normals, size=count, replace=False))
    test = np.setdiff1d(np.arange(labels.size, dtype=np.int64), labeled)
    return Split(labeled=labeled, test=test)


def inject_contamination(dataset: Dataset, rate: float, seed: int) -> Dataset:
    """Move floor(rate * |labeled|) hidden anomalies from test into labeled.

    The moved nodes keep true label 1 but training will treat them as
    normal; they disappear from the test set. rate 0 returns the dataset
    unchanged.
    """
    if not 0.0 <= rate < 1.0:
        raise InputError(f"contamination rate must lie in [0, 1), got {rate}")
    if dataset.split is None:
        raise InputError("dataset has no split to contaminate")
    count = int(np.floor(rate * dataset.split.labeled.size))
    if count == 0:
        return dataset
    test = dataset.split.test
    candidates = test[dataset.labels[test] == 1]
    if count > candidates.size:
        raise InputError(f"cannot move {count} anomalies into the labeled set: "
                         f"only {candidates.size} available")
    rng = np.random.default_rng(seed)
    moved = rng.choice(candidates, size=count, replace=False)
    labeled = np.sort(np.concatenate([dataset.split.labeled, moved]))
    remaining = np.setdiff1d(test, moved)
    return replace(dataset, split=Split(labeled=labeled, test=remaining))


@dataclass
class SynthSpec:
    """Parameters of the mixed-homophily synthetic generator.

    Normal nodes form two latent groups: a fraction ``low_homophily_fraction``
    wires to hit ``low_homophily`` and the rest wires to hit
    ``high_homophily`` (homophily measured against the 0/1 anomaly labels,
    so low-homophily normals sit next to many anomalies). Features follow
    three Gaussians: the two normal groups sit at opposite small offsets
    along one direction while anomalies are mean-shifted by
    ``class_separation`` along an orthogonal direction with doubled noise.
    """

    n: int
    anomaly_rate: float = 0.05
    low_homophily_fraction: float = 0.5
    high_homophily: float = 0.9
    low_homophily: float = 0.5
    mean_degree: float = 8.0
    feature_dim: int = 16
    class_separation: float = 2.0
    noise_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 4:
            raise InputError(f"n must be at least 4, got {self.n}")
        if not 0.0 <= self.anomaly_rate < 1.0:
            raise InputError(f"anomaly_rate must lie in [0, 1), got {self.anomaly_rate}")
        if not 0.0 <= self.low_homophily_fraction <= 1.0:
            raise InputError("low_homophily_fraction must lie in [0, 1], "
                             f"got {self.low_homophily_fraction}")
        for name in ("high_homophily", "low_homophily"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise InputError(f"{name} must lie strictly inside (0, 1), got {value}")
        if not self.mean_degree > 0:
            raise InputError(f"mean_degree must be positive, got {self.mean_degree}")
        if self.feature_dim < 1:
            raise InputError(f"feature_dim must be positive, got {self.feature_dim}")
        if self.class_separation < 0:
            raise InputError(f"class_separation must be nonnegative, got {self.class_separation}")
        if not self.noise_scale > 0:
            raise InputError(f"noise_scale must be positive, got {self.noise_scale}")


def regime_spec(preset: str, n: int, seed: int = 0, **overrides) -> SynthSpec:
    """SynthSpec for a named mixing regime: '80-20', '50-50', or '20-80'.

    The name states (low-homophily %, high-homophily %) of the normal class.
    """
    if preset not in REGIME_PRESETS:
        raise InputError(f"unknown regime preset {preset!r}; "
                         f"choose from {sorted(REGIME_PRESETS)}")
    return SynthSpec(n=n, seed=seed,
                     low_homophily_fraction=REGIME_PRESETS[preset], **overrides)


def _pair_stubs(rng: np.random.Generator, stubs: np.ndarray) -> np.ndarray:
    shuffled = rng.permutation(stubs)
    if shuffled.size % 2:
        shuffled = shuffled[:-1]
    pairs = shuffled.reshape(-1, 2)
    return pairs[pairs[:, 0] != pairs[:, 1]]


def _wire_edges(rng: np.random.Generator, groups: np.ndarray,
                spec: SynthSpec) -> np.ndarray:
    """One wiring attempt.

    Normal nodes draw heavy-tailed degrees and split their stubs into
    same-label stubs (matched among normals) and cross-label stubs (each
    landing on a uniformly random anomaly) so the node-level expectation
    matches the group homophily target. Anomalies receive the cross stubs
    and then wire internal anomaly-anomaly edges, proportional to what each
    received, sized so the anomaly group's same-label fraction lands on its
    own low target.
    """
    n = groups.size
    normal = np.flatnonzero(groups != 2)
    anomalous = np.flatnonzero(groups == 2)
    mu = np.log(spec.mean_degree) - 0.5 * DEGREE_SPREAD ** 2
    degree = np.maximum(
        np.rint(rng.lognormal(mu, DEGREE_SPREAD, size=n)), 1.0).astype(np.int64)
    target = np.where(groups == 1, spec.low_homophily, spec.high_homophily)
    same = rng.binomial(degree, target)
    cross = degree - same

    blocks = [_pair_stubs(rng, np.repeat(normal, same[normal]))]
    normal_demand = np.repeat(normal, cross[normal])
    if normal_demand.size and anomalous.size:
        share = rng.lognormal(0.0, ANOMALY_SHARE_SPREAD, size=anomalous.size)
        landing = rng.choice(anomalous, size=normal_demand.size,
                             p=share / share.sum())
        blocks.append(np.column_stack([normal_demand, landing]))
        inflow = np.bincount(landing, minlength=n)[anomalous].astype(float)
        ratio = ANOMALY_HOMOPHILY / (1.0 - ANOMALY_HOMOPHILY)
        internal = int(round(ratio * normal_demand.size))
        if internal >= 2 and inflow.sum() > 0:
            stubs = rng.choice(anomalous, size=internal, p=inflow / inflow.sum())
            blocks.append(_pair_stubs(rng, stubs))
    blocks = [b for b in blocks if b.size]
    if not blocks:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(blocks, axis=0)


def _group_mean_homophily(graph: Graph, labels: np.ndarray,
                          member_ids: np.ndarray) -> float:
    report = node_homophily(graph, labels)
    mask = np.isin(report.node_ids, member_ids)
    if not mask.any():
        return float("nan")
    return float(report.values[mask].mean())


def synth_dataset(spec: SynthSpec, return_report: bool = False):
    """Generate a mixed-homophily dataset; deterministic given spec.seed.

    Wiring retries up to a bounded budget until every nonempty group's
    realized mean node homophily lands within ±0.05 of its target (the
    anomaly group is held to its fixed low target whenever it has at least
    two members, the minimum for internal edges to exist), then raises
    GenerationError. Returns the Dataset, or (Dataset, report dict) when
    ``return_report`` is set.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    n_anom = int(np.floor(spec.anomaly_rate * n))
    n_norm = n - n_anom
    n_low = int(round(spec.low_homophily_fraction * n_norm))
    n_high = n_norm - n_low

    if n_norm == 0:
        raise GenerationError("anomaly_rate leaves no normal nodes")
    if n_anom == 0:
        needs_cross = (n_high > 0 and spec.high_homophily < 1.0) or \
                      (n_low > 0 and spec.low_homophily < 1.0)
        if needs_cross:
            raise GenerationError(
                "homophily targets below 1 need anomalies to wire against, "
                "but anomaly_rate yields none")

    groups = np.concatenate([
        np.zeros(n_high, dtype=np.int64),
        np.ones(n_low, dtype=np.int64),
        np.full(n_anom, 2, dtype=np.int64),
    ])
    labels = (groups == 2).astype(np.int64)
    high_ids = np.flatnonzero(groups == 0)
    low_ids = np.flatnonzero(groups == 1)
    anom_ids = np.flatnonzero(groups == 2)

    graph = None
    realized = {}
    for attempt in range(1, WIRING_ATTEMPTS + 1):
        candidate = build_graph(_wire_edges(rng, groups, spec), n)
        realized = {
            "high": _group_mean_homophily(candidate, labels, high_ids),
            "low": _group_mean_homophily(candidate, labels, low_ids),
            "anomaly": _group_mean_homophily(candidate, labels, anom_ids),
        }
        ok = True
        if n_high > 0 and not abs(realized["high"] - spec.high_homophily) <= HOMOPHILY_TOLERANCE:
            ok = False
        if n_low > 0 and not abs(realized["low"] - spec.low_homophily) <= HOMOPHILY_TOLERANCE:
            ok = False
        if n_anom >= 2 and not abs(realized["anomaly"] - ANOMALY_HOMOPHILY) <= HOMOPHILY_TOLERANCE:
            ok = False
        if ok:
            graph = candidate
            break
    if graph is None:
        raise GenerationError(
            f"could not reach homophily targets high={spec.high_homophily} "
            f"low={spec.low_homophily} anomaly={ANOMALY_HOMOPHILY} within "
            f"±{HOMOPHILY_TOLERANCE} after {WIRING_ATTEMPTS} attempts "
            f"(last realized: {realized})")

    m = spec.feature_dim
    if m >= 2:
        basis, _ = np.linalg.qr(rng.standard_normal((m, 2)))
        normal_axis, anomaly_axis = basis[:, 0], basis[:, 1]
    else:
        normal_axis = anomaly_axis = np.ones(1)
    means = np.stack([
        0.3 * spec.class_separation * normal_axis,
        -0.3 * spec.class_separation * normal_axis,
        spec.class_separation * anomaly_axis,
    ])
    noise_mult = np.where(groups == 2, 2.0, 1.0)
    features = means[groups] + spec.noise_scale * noise_mult[:, None] \
        * rng.standard_normal((n, m))

    dataset = Dataset(graph=graph, features=features, labels=labels, split=None)
    if not return_report:
        return dataset
    report = {
        "n": n,
        "anomaly_count": n_anom,
        "group_counts": {"high": n_high, "low": n_low, "anomaly": n_anom},
        "group_fractions": {
            "low": n_low / n_norm,
            "high": n_high / n_norm,
        },
        "target_homophily": {"high": spec.high_homophily, "low": spec.low_homophily,
                             "anomaly": ANOMALY_HOMOPHILY},
        "realized_homophily": realized,
        "mean_degree_realized": float(graph.degrees.mean()),
        "attempts": attempt,
        "seed": spec.seed,
    }
    return dataset, report
