"""Spoof scoring, equal error rate and the task-by-task EER matrix.

Score polarity: higher score means more likely spoof. A bonafide sample
scoring at or above the threshold is a false accept; a spoof sample
below it is a false reject.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError
from .nn import BONAFIDE, SPOOF, forward, softmax


@dataclass(frozen=True)
class ScoreSet:
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if s.ndim != 1 or s.shape != y.shape:
            raise EvaluationError("scores and labels must be 1-d arrays of equal length")
        if not np.all(np.isfinite(s)):
            raise EvaluationError("scores must be finite")
        if not np.all((y == BONAFIDE) | (y == SPOOF)):
            raise EvaluationError("labels must be 0 (bonafide) or 1 (spoof)")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return len(self.scores)


def far_frr_curve(scores: ScoreSet):
    """FAR and FRR at each distinct score, then at +inf.

    Returns ``(thresholds, far, frr)``; the final point (threshold +inf)
    always has FAR = 0 and FRR = 1.
    """
    s, y = scores.scores, scores.labels
    n_bona = int(np.sum(y == BONAFIDE))
    n_spoof = int(np.sum(y == SPOOF))
    if n_bona == 0 or n_spoof == 0:
        raise EvaluationError("EER needs at least one bonafide and one spoof score")
    thresholds = np.unique(s)
    # counts strictly below each threshold
    bona_below = np.searchsorted(np.sort(s[y == BONAFIDE]), thresholds, side="left")
    spoof_below = np.searchsorted(np.sort(s[y == SPOOF]), thresholds, side="left")
    far = np.append(1.0 - bona_below / n_bona, 0.0)
    frr = np.append(spoof_below / n_spoof, 1.0)
    return np.append(thresholds, np.inf), far, frr


def crossing_point(far, frr) -> float:
    """Value where the linearly interpolated FAR and FRR curves meet."""
    diff = np.asarray(far) - np.asarray(frr)
    # diff is non-increasing, starts >= 0 and ends at -1
    k = int(np.argmax(diff <= 0))
    if diff[k] == 0 or k == 0:
        return float(far[k])
    t = diff[k - 1] / (diff[k - 1] - diff[k])
    return float(far[k - 1] + t * (far[k] - far[k - 1]))


def compute_eer(scores: ScoreSet) -> float:
    """Equal error rate in percent."""
    _, far, frr = far_frr_curve(scores)
    return 100.0 * crossing_point(far, frr)


def score_features(model, features) -> np.ndarray:
    return softmax(forward(model, features))[:, SPOOF]


def score_dataset(model, eval_set) -> ScoreSet:
    """Spoof-class softmax probability for each sample.

    ``eval_set`` is a list of samples or a ``(features, labels)`` pair.
    """
    if isinstance(eval_set, tuple):
        x, y = eval_set
    else:
        x = np.stack([s.features for s in eval_set])
        y = np.array([s.label for s in eval_set])
    return ScoreSet(score_features(model, x), y)


@dataclass
class EvalMatrix:
    """``eer[t, k]``: EER (%) on task ``k`` after training through task ``t``."""

    eer: np.ndarray
    task_names: tuple

    def __post_init__(self):
        self.eer = np.asarray(self.eer, dtype=np.float64)
        t = len(self.task_names)
        if self.eer.shape != (t, t):
            raise EvaluationError(f"matrix shape {self.eer.shape} does not match {t} task names")

    @property
    def n_tasks(self) -> int:
        return len(self.task_names)

    def __eq__(self, other):
        if not isinstance(other, EvalMatrix):
            return NotImplemented
        return tuple(self.task_names) == tuple(other.task_names) and np.array_equal(self.eer, other.eer)


def build_eval_matrix(snapshots, tasks) -> EvalMatrix:
    """Evaluate every snapshot on every task's eval split, future tasks included."""
    if len(snapshots) != len(tasks):
        raise EvaluationError(f"{len(snapshots)} snapshots for {len(tasks)} tasks")
    if not tasks:
        raise EvaluationError("no tasks to evaluate")
    eval_sets = [task.eval_arrays() for task in tasks]
    eer = np.empty((len(tasks), len(tasks)))
    for t, model in enumerate(snapshots):
        for k, data in enumerate(eval_sets):
            eer[t, k] = compute_eer(score_dataset(model, data))
    return EvalMatrix(eer, tuple(task.spec.name for task in tasks))


@dataclass(frozen=True)
class Summary:
    avg_final: float
    final: tuple
    backward_transfer: float


def summarize(matrix: EvalMatrix) -> Summary:
    """Final-row average (lower is better) and backward transfer.

    Backward transfer is the mean over earlier tasks of the EER change
    between finishing that task and finishing the last one; positive
    values mean forgetting. A one-task matrix has zero transfer.
    """
    eer = np.asarray(matrix.eer, dtype=np.float64)
    if eer.size == 0 or eer.ndim != 2 or eer.shape[0] != eer.shape[1]:
        raise EvaluationError("summarize needs a square non-empty matrix")
    final = eer[-1]
    t = eer.shape[0]
    bwt = float(np.mean(final[:-1] - np.diag(eer)[:-1])) if t > 1 else 0.0
    return Summary(float(np.mean(final)), tuple(float(v) for v in final), bwt)
