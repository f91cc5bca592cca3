"""
Synthetic data drawn from the generative process of the model.

All randomness comes from one numpy Generator backed by PCG64 and seeded
from GenConfig.seed, consumed in a fixed order, so a seed fully determines
the output within this implementation.
"""

from dataclasses import dataclass, field
import numpy as np

from noisy_label_dist.model import Dataset, Hyperparams, ModelParams, VariationalParams
from noisy_label_dist.model.density import classLogits, makeBeta, softmax
from noisy_label_dist.nlyfile import NlyBuilder, NlyDocument
from noisy_label_dist.util import ConfigError

def makeRng(seed: int, stream: int | None = None) -> np.random.Generator:
    """
    PCG64 generator for a seed; distinct streams of one seed are independent.
    """
    if not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if stream is None:
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))

@dataclass(frozen=True, kw_only=True)
class GenConfig:
    U: int = 100
    N: int = 1000
    groupSize: int = 30
    M: int = 4
    D: int = 10
    hyper: Hyperparams = field(default_factory=lambda: Hyperparams(alphaW=1.0, alphaS=100.0, alphaC0=1.0, alphaC1=10.0))
    seed: int = 1

    confusion: np.ndarray | None = None
    """
    Fixed confusion matrix; when set the Dirichlet draw is skipped.
    """

    singletonGroups: bool = False
    """
    One group per instance, G_i = {i}; N and groupSize are ignored.
    """

    clampSimplex: bool = False
    """
    Clip generated noisy distributions at zero and renormalize them.
    """

    def __post_init__(self):
        for name in ("U", "N", "groupSize", "D"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.M < 2:
            raise ConfigError("M must be at least 2")
        if not self.singletonGroups and self.groupSize > self.U:
            raise ConfigError(f"group size {self.groupSize} exceeds the number of instances {self.U}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.confusion is not None:
            confusion = np.asarray(self.confusion, dtype=float)
            if confusion.shape != (self.M, self.M) or np.any(confusion < 0) or np.max(np.abs(confusion.sum(axis=1) - 1)) > 1e-12:
                raise ConfigError("fixed confusion must be an M x M row-stochastic matrix")
            object.__setattr__(self, "confusion", confusion)

    @property
    def numGroups(self) -> int:
        return self.U if self.singletonGroups else self.N

@dataclass(frozen=True)
class SyntheticTruth:
    trueWeights: np.ndarray
    trueConfusion: np.ndarray
    trueLabels: np.ndarray

    trueGroupCounts: np.ndarray
    """
    N x M label counts per group; divided by the group size these are z_i.
    """

    groupDepLabels: np.ndarray
    """
    t_iu for every membership pair, aligned with Dataset.pairs.
    """

    @property
    def trueGroupDists(self) -> np.ndarray:
        return self.trueGroupCounts / self.trueGroupCounts.sum(axis=1, keepdims=True)

    @property
    def params(self) -> ModelParams:
        return ModelParams(weights=self.trueWeights, confusion=self.trueConfusion)

    def toBuilder(self) -> NlyBuilder:
        return (
            NlyBuilder("truth")
            .matrix("true_weights", self.trueWeights)
            .matrix("true_confusion", self.trueConfusion)
            .intvector("true_labels", self.trueLabels)
            .intmatrix("true_group_counts", self.trueGroupCounts)
            .intvector("group_dep_labels", self.groupDepLabels)
        )

    @classmethod
    def from_document(cls, doc: NlyDocument):
        doc.expectKind("truth")
        return cls(
            trueWeights=doc["true_weights"],
            trueConfusion=doc["true_confusion"],
            trueLabels=doc["true_labels"],
            trueGroupCounts=doc["true_group_counts"],
            groupDepLabels=doc["group_dep_labels"]
        )

    @classmethod
    def from_file(cls, path):
        return cls.from_document(NlyDocument.from_file(path))

def sampleDirichlet(concentration, rng: np.random.Generator) -> np.ndarray:
    concentration = np.asarray(concentration, dtype=float)
    if np.any(~(concentration > 0)):
        raise ConfigError("Dirichlet concentrations must be positive")
    gammas = rng.standard_gamma(concentration)
    total = gammas.sum()
    if total == 0:
        # every gamma underflowed; only possible for tiny concentrations
        out = np.zeros_like(gammas)
        out[np.argmax(concentration)] = 1.0
        return out
    return gammas / total

def sampleCategorical(p, rng: np.random.Generator) -> int:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise ConfigError("categorical probabilities must lie on the simplex")
    return int(sampleCategoricalRows(p[None, :], rng)[0])

def sampleCategoricalRows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Inverse-CDF draw of one class per row.
    """
    cdf = np.cumsum(probs, axis=1)
    draws = rng.random(probs.shape[0]) * cdf[:, -1]
    idx = (cdf <= draws[:, None]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)

def sampleGroup(U: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    size distinct instances, uniformly, via a partial Fisher-Yates shuffle.
    """
    perm = np.arange(U)
    for k in range(size):
        j = int(rng.integers(k, U))
        perm[k], perm[j] = perm[j], perm[k]
    return np.sort(perm[:size])

def generate(config: GenConfig) -> tuple[Dataset, SyntheticTruth]:
    rng = makeRng(config.seed)
    hyper = config.hyper
    U, M, D = config.U, config.M, config.D

    # 1. class parameters
    weights = rng.normal(0.0, hyper.alphaW ** -0.5, size=(M, D))
    if config.confusion is not None:
        confusion = config.confusion.copy()
    else:
        beta = makeBeta(hyper.alphaC0, hyper.alphaC1, M)
        confusion = np.array([sampleDirichlet(beta[m], rng) for m in range(M)])

    # 2. instances and their true labels
    features = rng.normal(0.0, 1.0, size=(U, D))
    labels = sampleCategoricalRows(softmax(classLogits(weights, features)), rng)

    # 3. groups, group-dependent labels and noisy distributions
    if config.singletonGroups:
        groups = tuple(np.array([u]) for u in range(U))
    else:
        groups = tuple(sampleGroup(U, config.groupSize, rng) for _ in range(config.N))

    pairInstances = np.concatenate(groups)
    pairGroups = np.repeat(np.arange(len(groups)), [len(g) for g in groups])
    groupDepLabels = sampleCategoricalRows(confusion[labels[pairInstances]], rng)

    N = len(groups)
    depCounts = np.zeros((N, M), dtype=int)
    np.add.at(depCounts, (pairGroups, groupDepLabels), 1)
    trueCounts = np.zeros((N, M), dtype=int)
    np.add.at(trueCounts, (pairGroups, labels[pairInstances]), 1)

    sizes = np.array([len(g) for g in groups])
    noisy = depCounts / sizes[:, None] + rng.normal(0.0, hyper.alphaS ** -0.5, size=(N, M))
    if config.clampSimplex:
        noisy = clampToSimplex(noisy)

    dataset = Dataset(features=features, groups=groups, noisyDists=noisy, trueLabels=labels)
    truth = SyntheticTruth(
        trueWeights=weights,
        trueConfusion=confusion,
        trueLabels=labels,
        trueGroupCounts=trueCounts,
        groupDepLabels=groupDepLabels
    )
    return dataset, truth

def clampToSimplex(rows: np.ndarray) -> np.ndarray:
    clipped = np.maximum(rows, 0.0)
    totals = clipped.sum(axis=1, keepdims=True)
    uniform = np.full_like(clipped, 1.0 / clipped.shape[1])
    return np.where(totals > 0, clipped / np.where(totals > 0, totals, 1.0), uniform)

def sampleInstances(truth: SyntheticTruth, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """
    Fresh labelled instances from the true classifier, for inductive scoring.
    """
    D = truth.trueWeights.shape[1]
    features = rng.normal(0.0, 1.0, size=(count, D))
    labels = sampleCategoricalRows(softmax(classLogits(truth.trueWeights, features)), rng)
    return features, labels

def randomProblem(rng: np.random.Generator, U=4, N=2, M=3, D=3, maxGroupSize=3, hyper: Hyperparams | None = None):
    """
    A small random instance with random parameters and responsibilities.

    Used by the numerical checks; group sizes are drawn in [1, maxGroupSize].
    """
    groups = []
    for _ in range(N):
        size = int(rng.integers(1, min(maxGroupSize, U) + 1))
        groups.append(np.sort(rng.choice(U, size=size, replace=False)))
    dataset = Dataset(
        features=rng.normal(size=(U, D)),
        groups=tuple(groups),
        noisyDists=rng.dirichlet(np.ones(M), size=N) + rng.normal(0, 0.05, size=(N, M))
    )
    if hyper is None:
        hyper = Hyperparams(
            alphaW=float(rng.uniform(0.5, 2.0)),
            alphaS=float(rng.uniform(1.0, 20.0)),
            alphaC0=float(rng.uniform(1.0, 2.0)),
            alphaC1=float(rng.uniform(1.0, 5.0))
        )
    params = ModelParams(
        weights=rng.normal(size=(M, D)),
        confusion=normalizeRows(rng.dirichlet(np.ones(M) * 2, size=M))
    )
    varparams = VariationalParams(
        zeta=normalizeRows(rng.dirichlet(np.ones(M), size=U)),
        eta=normalizeRows(rng.dirichlet(np.ones(M), size=len(dataset.pairs))).reshape((len(dataset.pairs), M)),
        pairs=dataset.pairs
    )
    return dataset, params, varparams, hyper

def normalizeRows(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    return rows / rows.sum(axis=1, keepdims=True)
