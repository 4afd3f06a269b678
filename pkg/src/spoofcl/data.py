"""Benchmark tasks: definitions, synthetic generation, feature files, selection.

Two ways of cutting a balanced task out of a labelled pool are provided:
uniform random selection, and committee-entropy selection where a set of
expert classifiers votes on every pool sample and the most disputed
samples go to the evaluation split first.
"""

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError
from .nn import BONAFIDE, SPOOF, forward, init_model
from .rng import derive_rng
from .training import TrainConfig, fit

LABEL_TOKENS = {"bonafide": BONAFIDE, "spoof": SPOOF}
LABEL_NAMES = {v: k for k, v in LABEL_TOKENS.items()}


@dataclass(eq=False)
class FeatureSample:
    id: str
    label: int
    features: np.ndarray
    origin: str = ""

    def __eq__(self, other):
        # origin is provenance metadata, not part of sample identity
        if not isinstance(other, FeatureSample):
            return NotImplemented
        return (self.id == other.id and self.label == other.label
                and np.array_equal(self.features, other.features))


@dataclass(frozen=True)
class SyntheticShift:
    """Parameters of one task's class-conditional Gaussian features.

    Class means sit at ``center -/+ separation/2 * u`` for bonafide/spoof,
    where ``center`` is ``domain_offset`` along a unit vector keyed by
    ``condition`` and ``u`` combines a shared spoof direction, a language
    direction whose sign is ``language_sign`` and a per-``attack``
    direction. Noise is isotropic with std ``cov_scale``; a
    ``label_noise`` fraction of each class is drawn from the other
    class's distribution.
    """

    condition: int = 0
    attack: int = 0
    language_sign: int = 1
    domain_offset: float = 4.0
    separation: float = 4.0
    shared_weight: float = 1.5
    attack_weight: float = 0.5
    cov_scale: float = 1.0
    label_noise: float = 0.0
    geometry_seed: int = 0

    def __post_init__(self):
        if self.language_sign not in (1, -1):
            raise DataError(f"language_sign must be +1 or -1, got {self.language_sign}")
        if not self.cov_scale > 0:
            raise DataError(f"cov_scale must be positive, got {self.cov_scale}")
        if not 0.0 <= self.label_noise < 0.5:
            raise DataError(f"label_noise must lie in [0, 0.5), got {self.label_noise}")


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    name: str
    language_tag: str = ""
    condition_tag: str = ""
    train_count: int = 2000
    eval_count: int = 5000
    shift: Optional[SyntheticShift] = field(default_factory=SyntheticShift)
    path: Optional[str] = None
    committee_path: Optional[str] = None

    def __post_init__(self):
        for name in ("train_count", "eval_count"):
            v = getattr(self, name)
            if v <= 0 or v % 2:
                raise DataError(f"task {self.task_id}: {name} must be positive and even, got {v}")
        if self.shift is None and self.path is None:
            raise DataError(f"task {self.task_id}: needs synthetic shift parameters or a feature file path")

    @property
    def per_class(self) -> int:
        return (self.train_count + self.eval_count) // 2


@dataclass
class TaskDataset:
    spec: TaskSpec
    train: list
    eval: list

    def __post_init__(self):
        self._arrays = {}

    def _split_arrays(self, split: str):
        if split not in self._arrays:
            samples = getattr(self, split)
            x = np.stack([s.features for s in samples]).astype(np.float64)
            y = np.array([s.label for s in samples], dtype=np.int64)
            self._arrays[split] = (x, y)
        return self._arrays[split]

    def train_arrays(self):
        return self._split_arrays("train")

    def eval_arrays(self):
        return self._split_arrays("eval")


# Table-1 style sequence: language alternation and acoustic condition per task.
DEFAULT_TASK_META = [
    ("Chinese", "Human"),
    ("English", "Real world"),
    ("Chinese", "Low-quality/Partially fake"),
    ("English", "No significant noise"),
    ("English", "Logical access"),
    ("English", "Logical access"),
    ("English", "Human"),
    ("Chinese", "Human/Partially fake"),
]

LANGUAGE_SIGN = {"Chinese": 1, "English": -1}

# condition tag -> (center id, noise std, label-noise rate)
CONDITION_SHIFT = {
    "Human": (0, 1.0, 0.0),
    "Real world": (1, 1.4, 0.04),
    "Low-quality/Partially fake": (2, 1.25, 0.04),
    "No significant noise": (3, 0.7, 0.0),
    "Logical access": (4, 1.0, 0.02),
    "Human/Partially fake": (5, 1.1, 0.02),
}


def default_task_specs(train_count: int = 2000, eval_count: int = 5000):
    specs = []
    for i, (lang, cond) in enumerate(DEFAULT_TASK_META, start=1):
        center, cov, noise = CONDITION_SHIFT[cond]
        shift = SyntheticShift(condition=center, attack=i, language_sign=LANGUAGE_SIGN[lang],
                               cov_scale=cov, label_noise=noise)
        specs.append(TaskSpec(i, f"Task{i}", lang, cond, train_count, eval_count, shift))
    return specs


def _unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def shift_geometry(shift: SyntheticShift, dim: int):
    """(domain center, unit class direction) for a shift in ``dim`` dimensions."""
    g = shift.geometry_seed
    shared = _unit(derive_rng(g, "geometry", "shared", dim), dim)
    language = _unit(derive_rng(g, "geometry", "language", dim), dim)
    attack = _unit(derive_rng(g, "geometry", "attack", shift.attack, dim), dim)
    center = shift.domain_offset * _unit(derive_rng(g, "geometry", "center", shift.condition, dim), dim)
    u = shift.shared_weight * shared + shift.language_sign * language + shift.attack_weight * attack
    return center, u / np.linalg.norm(u)


def sample_synthetic_features(shift: SyntheticShift, dim: int, labels, rng) -> np.ndarray:
    labels = np.asarray(labels)
    center, u = shift_geometry(shift, dim)
    drawn_as = labels.copy()
    if shift.label_noise > 0:
        for cls in (BONAFIDE, SPOOF):
            idx = np.flatnonzero(labels == cls)
            n_flip = int(round(shift.label_noise * len(idx)))
            flip = rng.choice(idx, size=n_flip, replace=False)
            drawn_as[flip] = 1 - cls
    sign = np.where(drawn_as == SPOOF, 0.5, -0.5)[:, None]
    noise = shift.cov_scale * rng.standard_normal((len(labels), dim))
    return center + sign * shift.separation * u + noise


def _balanced_labels(n: int) -> np.ndarray:
    return np.repeat(np.array([BONAFIDE, SPOOF]), n // 2)


def generate_synthetic_pool(spec: TaskSpec, dim: int, per_class: int, rng, prefix: str):
    labels = _balanced_labels(2 * per_class)
    x = sample_synthetic_features(spec.shift, dim, labels, rng)
    origin = f"synthetic:{spec.name}"
    return [FeatureSample(f"{prefix}{k:06d}", int(labels[k]), x[k], origin) for k in range(len(labels))]


def generate_synthetic_task(spec: TaskSpec, seed: int, dim: int = 128) -> TaskDataset:
    """Balanced train/eval splits drawn fresh from the task's distribution."""
    if spec.shift is None:
        raise DataError(f"task {spec.task_id} has no synthetic shift parameters")
    rng = derive_rng(seed, "synthetic", spec.task_id)
    tag = f"t{spec.task_id}"
    train = generate_synthetic_pool(spec, dim, spec.train_count // 2, rng, f"{tag}-train-")
    eval_ = generate_synthetic_pool(spec, dim, spec.eval_count // 2, rng, f"{tag}-eval-")
    return TaskDataset(spec, train, eval_)


# ---------------------------------------------------------------------------
# feature files


def load_feature_file(path):
    """Parse a feature file.

    Grammar (UTF-8, one record per line)::

        file    := { comment | blank } header { comment | blank | row }
        comment := '#' any-text
        header  := 'dim=' positive-integer
        row     := id ',' label { ',' float }      (exactly dim floats)
        label   := 'bonafide' | 'spoof'

    Ids are unique and non-empty; floats must be finite. Errors name the
    offending line number.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read feature file {path}: {exc}") from exc
    dim = None
    samples, seen = [], set()
    origin = f"file:{path.name}"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if dim is None:
            key, sep, value = line.partition("=")
            if key.strip() != "dim" or not sep:
                raise DataError(f"{path}:{lineno}: expected header 'dim=<d>', got {line!r}")
            try:
                dim = int(value.strip())
            except ValueError:
                raise DataError(f"{path}:{lineno}: invalid dimension {value.strip()!r}") from None
            if dim < 1:
                raise DataError(f"{path}:{lineno}: dimension must be positive, got {dim}")
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != dim + 2:
            raise DataError(f"{path}:{lineno}: expected {dim} features, got {len(parts) - 2}")
        sid, token = parts[0], parts[1]
        if not sid:
            raise DataError(f"{path}:{lineno}: empty sample id")
        if sid in seen:
            raise DataError(f"{path}:{lineno}: duplicate sample id {sid!r}")
        if token not in LABEL_TOKENS:
            raise DataError(f"{path}:{lineno}: unknown label {token!r} (expected bonafide or spoof)")
        try:
            feats = np.array([float(p) for p in parts[2:]], dtype=np.float64)
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: malformed feature value ({exc})") from None
        if not np.all(np.isfinite(feats)):
            raise DataError(f"{path}:{lineno}: non-finite feature value")
        seen.add(sid)
        samples.append(FeatureSample(sid, LABEL_TOKENS[token], feats, origin))
    if dim is None:
        raise DataError(f"{path}: missing 'dim=<d>' header")
    return samples


def write_feature_file(path, samples, comment: Optional[str] = None):
    if not samples:
        raise DataError("refusing to write an empty feature file")
    dim = len(samples[0].features)
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"dim={dim}")
    for s in samples:
        if len(s.features) != dim:
            raise DataError(f"sample {s.id} has {len(s.features)} features, expected {dim}")
        vals = ",".join(repr(float(v)) for v in s.features)
        lines.append(f"{s.id},{LABEL_NAMES[int(s.label)]},{vals}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# selection


def _by_class(pool):
    out = {BONAFIDE: [], SPOOF: []}
    for s in pool:
        out[int(s.label)].append(s)
    return out


def _check_pool(groups, spec: TaskSpec):
    need = spec.per_class
    for cls, members in groups.items():
        if len(members) < need:
            raise DataError(f"task {spec.task_id}: pool has {len(members)} {LABEL_NAMES[cls]} samples, "
                            f"needs {need}")


def random_split_select(pool, spec: TaskSpec, seed: int) -> TaskDataset:
    """Uniform balanced selection: eval drawn first, train from the remainder."""
    groups = _by_class(pool)
    _check_pool(groups, spec)
    rng = derive_rng(seed, "random-select", spec.task_id)
    n_eval, n_train = spec.eval_count // 2, spec.train_count // 2
    train, eval_ = [], []
    for cls in (BONAFIDE, SPOOF):
        members = groups[cls]
        order = rng.permutation(len(members))
        eval_.extend(members[j] for j in order[:n_eval])
        train.extend(members[j] for j in order[n_eval:n_eval + n_train])
    return TaskDataset(spec, train, eval_)


@dataclass(frozen=True)
class CommitteeVote:
    sample_id: str
    n_real: int
    n_fake: int

    @property
    def size(self) -> int:
        return self.n_real + self.n_fake


def committee_entropy(vote: CommitteeVote, log=math.log) -> float:
    """Entropy of the committee's real/fake vote split (0 log 0 = 0).

    ``log`` selects the logarithm; natural log by default.
    """
    if vote.n_real < 0 or vote.n_fake < 0:
        raise DataError(f"negative vote count for {vote.sample_id}")
    n = vote.size
    if n < 1:
        raise DataError(f"sample {vote.sample_id}: committee size must be at least 1")
    h = 0.0
    for count in (vote.n_real, vote.n_fake):
        if count:
            p = count / n
            h -= p * log(p)
    return h


def informative_select(pool, votes, spec: TaskSpec, log=math.log) -> TaskDataset:
    """Most-disputed-first selection, ranked per class.

    Within each class, samples are ordered by committee entropy
    (descending, ties by ascending id); the first ``eval_count/2`` go to
    eval and the next ``train_count/2`` to train.
    """
    missing = [s.id for s in pool if s.id not in votes]
    if missing:
        raise DataError(f"no committee vote for sample {missing[0]!r} ({len(missing)} missing)")
    groups = _by_class(pool)
    _check_pool(groups, spec)
    n_eval, n_train = spec.eval_count // 2, spec.train_count // 2
    train, eval_ = [], []
    for cls in (BONAFIDE, SPOOF):
        ranked = sorted(groups[cls], key=lambda s: (-committee_entropy(votes[s.id], log), s.id))
        eval_.extend(ranked[:n_eval])
        train.extend(ranked[n_eval:n_eval + n_train])
    return TaskDataset(spec, train, eval_)


class Expert:
    """A trained committee member casting hard real/fake votes."""

    def __init__(self, model):
        self.model = model

    def predict(self, features) -> np.ndarray:
        return np.argmax(forward(self.model, features), axis=1)

    def accuracy(self, samples) -> float:
        x = np.stack([s.features for s in samples])
        y = np.array([s.label for s in samples])
        return float(np.mean(self.predict(x) == y))


COMMITTEE_TRAIN = TrainConfig(lr=0.01, momentum=0.9, batch_size=32, epochs=30)


def train_committee(external_pools, n: int, seed: int, hidden_width: int = 32,
                    cfg: TrainConfig = COMMITTEE_TRAIN):
    """Train ``n`` independently seeded experts; expert ``i`` uses pool ``i mod len(pools)``."""
    if n < 1:
        raise DataError(f"committee size must be at least 1, got {n}")
    if not external_pools or any(len(p) == 0 for p in external_pools):
        raise DataError("committee training needs non-empty external pools")
    experts = []
    for i in range(n):
        pool = external_pools[i % len(external_pools)]
        x = np.stack([s.features for s in pool])
        y = np.array([s.label for s in pool])
        init_seed = int(derive_rng(seed, "committee-init", i).integers(2 ** 63))
        model = init_model(x.shape[1], hidden_width, init_seed)
        model = fit(model, x, y, cfg, derive_rng(seed, "committee-train", i))
        experts.append(Expert(model))
    return experts


def committee_votes(experts, pool):
    x = np.stack([s.features for s in pool])
    fake = np.zeros(len(pool), dtype=np.int64)
    for expert in experts:
        fake += expert.predict(x) == SPOOF
    n = len(experts)
    return {s.id: CommitteeVote(s.id, int(n - f), int(f)) for s, f in zip(pool, fake)}


def build_task(spec: TaskSpec, seed: int, dim: int = 128, selection: str = "random",
               committee_size: int = 5, pool_factor: float = 2.0) -> TaskDataset:
    """Materialise one task under the configured selection mode.

    Synthetic tasks under random selection are drawn directly at the
    target sizes. Informative selection over synthetic tasks draws an
    oversized pool plus an independent external pool for the committee.
    File tasks select from the file's rows; informative mode needs the
    task's ``committee_path`` as the external pool.
    """
    if selection not in ("random", "informative"):
        raise DataError(f"unknown selection mode {selection!r}")
    if spec.path is not None:
        pool = load_feature_file(spec.path)
        if selection == "random":
            return random_split_select(pool, spec, seed)
        if spec.committee_path is None:
            raise DataError(f"task {spec.task_id}: informative selection needs committee_path")
        external = [load_feature_file(spec.committee_path)]
    else:
        if selection == "random":
            return generate_synthetic_task(spec, seed, dim)
        per_class = int(math.ceil(pool_factor * spec.per_class))
        pool = generate_synthetic_pool(spec, dim, per_class, derive_rng(seed, "pool", spec.task_id),
                                       f"t{spec.task_id}-pool-")
        ext_spec = replace(spec, name=f"{spec.name}-external")
        external = [generate_synthetic_pool(ext_spec, dim, spec.train_count // 2,
                                            derive_rng(seed, "external", spec.task_id),
                                            f"t{spec.task_id}-ext-")]
    experts = train_committee(external, committee_size, int(derive_rng(seed, "committee", spec.task_id)
                                                           .integers(2 ** 63)))
    return informative_select(pool, committee_votes(experts, pool), spec)
