from __future__ import annotations
from dataclasses import dataclass, field
from functools import cached_property
import math
from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from typing_extensions import Self
import numpy as np

from noisy_label_dist.nlyfile import NlyBuilder, NlyDocument
from noisy_label_dist.util import ConfigError, argmaxRows

# Indexing conventions:
# * Instances u are rows of Dataset.features, 0..U-1.
# * Groups i are positions in Dataset.groups, 0..N-1.
# * Classes m are columns of Dataset.noisyDists, 0..M-1.
# * Membership pairs (i, u) with u in G_i are enumerated group-major; pair p
#   is row p of VariationalParams.eta and of Dataset.pairs.

@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    """
    U x D feature matrix, row u is x_u.
    """

    groups: tuple[np.ndarray, ...]
    """
    N index arrays; groups[i] holds the members of G_i.
    """

    noisyDists: np.ndarray
    """
    N x M observed noisy label distributions s_i. Rows are not required to lie on the simplex.
    """

    trueLabels: np.ndarray | None = None
    """
    Optional hidden labels y_u, only used for scoring.
    """

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        noisy = np.asarray(self.noisyDists, dtype=float)
        groups = tuple(np.asarray(g, dtype=int).reshape(-1) for g in self.groups)

        if features.ndim != 2:
            raise ConfigError("features must be a matrix")
        if noisy.ndim != 2:
            raise ConfigError("noisyDists must be a matrix")
        if noisy.shape[1] < 2:
            raise ConfigError("need at least two classes")
        if len(groups) != noisy.shape[0]:
            raise ConfigError(f"{len(groups)} groups but {noisy.shape[0]} noisy distributions")
        if not np.all(np.isfinite(features)) or not np.all(np.isfinite(noisy)):
            raise ConfigError("features and noisy distributions must be finite")

        U = features.shape[0]
        for idx, group in enumerate(groups):
            if len(group) == 0:
                raise ConfigError(f"group {idx} is empty")
            if group.min() < 0 or group.max() >= U:
                raise ConfigError(f"group {idx} has a member outside [0, {U})")
            if len(np.unique(group)) != len(group):
                raise ConfigError(f"group {idx} lists a member twice")

        labels = self.trueLabels
        if labels is not None:
            labels = np.asarray(labels, dtype=int).reshape(-1)
            if labels.shape[0] != U:
                raise ConfigError("trueLabels must have one entry per instance")
            if np.any(labels < 0) or np.any(labels >= noisy.shape[1]):
                raise ConfigError("trueLabels outside the class range")

        object.__setattr__(self, "features", features)
        object.__setattr__(self, "noisyDists", noisy)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "trueLabels", labels)

    @property
    def numInstances(self) -> int:
        return self.features.shape[0]

    @property
    def numFeatures(self) -> int:
        return self.features.shape[1]

    @property
    def numGroups(self) -> int:
        return len(self.groups)

    @property
    def numClasses(self) -> int:
        return self.noisyDists.shape[1]

    @cached_property
    def groupSizes(self) -> np.ndarray:
        return np.array([len(g) for g in self.groups], dtype=int)

    @cached_property
    def pairs(self) -> np.ndarray:
        """
        P x 2 array of membership pairs (i, u), group-major.
        """
        if self.numGroups == 0:
            return np.zeros((0, 2), dtype=int)
        return np.array([(i, u) for i, g in enumerate(self.groups) for u in g], dtype=int)

    @property
    def pairGroups(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def pairInstances(self) -> np.ndarray:
        return self.pairs[:, 1]

    @cached_property
    def pairPositions(self) -> np.ndarray:
        """
        Position of each pair's member within its group.
        """
        if self.numGroups == 0:
            return np.zeros(0, dtype=int)
        return np.concatenate([np.arange(len(g)) for g in self.groups])

    def withoutLabels(self) -> Self:
        return Dataset(features=self.features, groups=self.groups, noisyDists=self.noisyDists)

    def subsetGroups(self, idx) -> Self:
        """
        Keeps every instance but only the selected group observations.
        """
        idx = np.asarray(idx, dtype=int)
        return Dataset(
            features=self.features,
            groups=tuple(self.groups[i] for i in idx),
            noisyDists=self.noisyDists[idx].reshape((len(idx), self.numClasses)),
            trueLabels=self.trueLabels
        )

    def toBuilder(self) -> NlyBuilder:
        builder = NlyBuilder("dataset")
        builder.scalar("classes", self.numClasses)
        builder.matrix("features", self.features)
        builder.ragged("groups", self.groups)
        builder.matrix("noisy_dists", self.noisyDists)
        if self.trueLabels is not None:
            builder.intvector("true_labels", self.trueLabels)
        return builder

    @classmethod
    def from_document(cls, doc: NlyDocument):
        doc.expectKind("dataset")
        noisy = doc["noisy_dists"]
        if noisy.shape[0] == 0:
            noisy = noisy.reshape((0, doc["classes"]))
        return cls(
            features=doc["features"],
            groups=tuple(doc["groups"]),
            noisyDists=noisy,
            trueLabels=doc.get("true_labels")
        )

    @classmethod
    def from_file(cls, path):
        return cls.from_document(NlyDocument.from_file(path))

@dataclass(frozen=True, kw_only=True)
class Hyperparams:
    alphaW: float = 1.0
    """
    Precision of the Gaussian prior on each weight vector.
    """

    alphaS: float = 100.0
    """
    Precision of the Gaussian around the mean group-dependent label vector.
    """

    alphaC0: float = 1.0
    """
    Dirichlet concentration off the confusion diagonal.
    """

    alphaC1: float = 10.0
    """
    Dirichlet concentration on the confusion diagonal.
    """

    def __post_init__(self):
        for name in ("alphaW", "alphaS", "alphaC0", "alphaC1"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {value}")
        if self.alphaC0 < 1 or self.alphaC1 < 1:
            raise ConfigError("Dirichlet concentrations must be at least 1")

    def asDict(self) -> dict:
        return {"alpha_w": self.alphaW, "alpha_s": self.alphaS, "alpha_c0": self.alphaC0, "alpha_c1": self.alphaC1}

@dataclass(frozen=True)
class ModelParams:
    weights: np.ndarray
    """
    M x D, row m is w_m.
    """

    confusion: np.ndarray
    """
    M x M row-stochastic, entry (m, l) is the probability that class m is observed as l.
    """

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        confusion = np.asarray(self.confusion, dtype=float)
        if weights.ndim != 2 or confusion.shape != (weights.shape[0], weights.shape[0]):
            raise ConfigError("weights must be M x D and confusion M x M")
        if not np.all(np.isfinite(weights)):
            raise ConfigError("weights must be finite")
        if np.any(confusion < 0) or np.max(np.abs(confusion.sum(axis=1) - 1.0)) > 1e-12:
            raise ConfigError("confusion rows must lie on the simplex")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "confusion", confusion)

    @property
    def numClasses(self) -> int:
        return self.weights.shape[0]

    def toBuilder(self, hyper: Hyperparams | None = None) -> NlyBuilder:
        builder = NlyBuilder("model")
        builder.matrix("weights", self.weights)
        builder.matrix("confusion", self.confusion)
        if hyper is not None:
            for key, value in hyper.asDict().items():
                builder.scalar(key, float(value))
        return builder

    @classmethod
    def from_document(cls, doc: NlyDocument):
        doc.expectKind("model")
        return cls(weights=doc["weights"], confusion=doc["confusion"])

    @classmethod
    def from_file(cls, path):
        return cls.from_document(NlyDocument.from_file(path))

@dataclass(frozen=True)
class VariationalParams:
    zeta: np.ndarray
    """
    U x M, row u is q(y_u).
    """

    eta: np.ndarray
    """
    P x M, row p is q(t_iu) for the membership pair pairs[p].
    """

    pairs: np.ndarray
    """
    P x 2 membership pairs (i, u) the rows of eta belong to.
    """

    onSimplex: bool = field(default=True, repr=False, compare=False)
    """
    Require every row of zeta and eta to be a distribution. Finite-difference
    checks turn this off to evaluate the bound at perturbed points.
    """

    def __post_init__(self):
        if self.eta.shape[0] != self.pairs.shape[0]:
            raise ConfigError("eta needs exactly one row per membership pair")
        if self.eta.shape[0] > 0 and self.eta.shape[1] != self.zeta.shape[1]:
            raise ConfigError("eta and zeta disagree on the number of classes")
        if self.onSimplex:
            for name, rows in (("zeta", self.zeta), ("eta", self.eta)):
                if rows.shape[0] > 0 and (np.any(~(rows >= 0)) or np.max(np.abs(rows.sum(axis=1) - 1.0)) > 1e-9):
                    raise ConfigError(f"{name} rows must lie on the simplex")

    @cached_property
    def pairIndex(self) -> dict[tuple[int, int], int]:
        return {(int(i), int(u)): p for p, (i, u) in enumerate(self.pairs)}

    def etaFor(self, i: int, u: int) -> np.ndarray:
        key = (int(i), int(u))
        if key not in self.pairIndex:
            raise KeyError(f"no eta entry for group {i}, instance {u}")
        return self.eta[self.pairIndex[key]]

@dataclass
class FitResult:
    params: ModelParams
    varparams: VariationalParams
    elboTrace: list[float]
    converged: bool
    sweeps: int

    flaggedSweeps: list[int] = field(default_factory=list)
    """
    Sweeps in which an iterative update fell back or hit its iteration cap.
    """

    updateTrace: list[tuple[str, float]] = field(default_factory=list)
    """
    ELBO after every individual update, only filled when auditing monotonicity.
    """

    gradientChecks: list = field(default_factory=list)
    """
    Finite-difference checks at the fitted point, when requested.
    """

    @property
    def predictedLabels(self) -> np.ndarray:
        return argmaxRows(self.varparams.zeta)
