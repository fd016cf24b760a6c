"""The two minimized objectives: G-mean error and false-positive-rate gap.

Error f1 = 1 - sqrt(TPR * TNR) rewards balanced precision on both classes.
Unfairness f2 = |P(yhat != y | z=0, y=0) - P(yhat != y | z=1, y=0)| is the
disparate-mistreatment gap: false positive rates must match across the
protected groups.  Both live in [0, 1] and are undefined (a hard error, not
a silent clamp) when a class or a group's negatives are absent.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, UndefinedRateError
from .tree import DecisionTree, predict


class ObjectiveVector(NamedTuple):
    f1: float  # G-mean error on [0, 1]
    f2: float  # FPR difference on [0, 1]


@dataclass(frozen=True)
class GroupConfusion:
    """Instance counts for every (group z, label y, prediction yhat) cell."""

    cells: tuple  # indexed [z][y][yhat]

    @classmethod
    def from_labels(cls, y, yhat, z):
        y, yhat, z = (np.asarray(a) for a in (y, yhat, z))
        cells = tuple(
            tuple(
                tuple(int(((z == g) & (y == t) & (yhat == p)).sum()) for p in (0, 1))
                for t in (0, 1)
            )
            for g in (0, 1)
        )
        return cls(cells=cells)

    @property
    def total(self):
        return sum(self.cells[g][t][p] for g in (0, 1) for t in (0, 1) for p in (0, 1))

    def false_positive_rate(self, group: int) -> float:
        negatives = self.cells[group][0][0] + self.cells[group][0][1]
        if negatives == 0:
            raise UndefinedRateError(f"group z={group} has no negative instances")
        return self.cells[group][0][1] / negatives


def gmean_error(y, yhat) -> float:
    """1 - sqrt(TPR * TNR); needs both classes present in y."""
    y = np.asarray(y)
    yhat = np.asarray(yhat)
    pos = y == 1
    neg = y == 0
    n_pos = int(pos.sum())
    n_neg = int(neg.sum())
    if n_pos == 0 or n_neg == 0:
        missing = "positive" if n_pos == 0 else "negative"
        raise UndefinedRateError(f"no {missing} instances: G-mean undefined")
    tpr = float((yhat[pos] == 1).sum()) / n_pos
    tnr = float((yhat[neg] == 0).sum()) / n_neg
    return 1.0 - float(np.sqrt(tpr * tnr))


def fpr_diff(y, yhat, z) -> float:
    """Absolute gap between the groups' false positive rates."""
    confusion = GroupConfusion.from_labels(y, yhat, z)
    return abs(confusion.false_positive_rate(0) - confusion.false_positive_rate(1))


def evaluate(tree: DecisionTree, data) -> ObjectiveVector:
    """Predict a dataset and score both objectives."""
    yhat = predict(tree, data.features)
    return ObjectiveVector(f1=gmean_error(data.y, yhat), f2=fpr_diff(data.y, yhat, data.z))


#: score_text values the COMPAS convention treats as "will re-offend"
COMPAS_POSITIVE_SCORES = ("Medium", "High")


def compas_baseline(data, scores, positive_scores=COMPAS_POSITIVE_SCORES) -> ObjectiveVector:
    """Objectives of the external COMPAS predictor on the given partition.

    ``scores`` are raw risk labels (score_text) aligned with the partition's
    rows; any value outside ``positive_scores`` (including missing) counts as
    a negative prediction.
    """
    if scores is None:
        raise ConfigError("COMPAS baseline requested but the dataset has no score column")
    scores = np.asarray(scores, dtype=object)
    if len(scores) != data.n:
        raise ConfigError(f"{len(scores)} scores for {data.n} rows")
    yhat = np.isin(scores, np.asarray(list(positive_scores), dtype=object)).astype(np.int8)
    return ObjectiveVector(f1=gmean_error(data.y, yhat), f2=fpr_diff(data.y, yhat, data.z))
