"""
Regression baselines that map an instance's features to the noisy
distribution of every group it belongs to, then label an instance by the
largest predicted component.

Features are used as given; standardize real data before fitting.
"""

from dataclasses import dataclass, field
import numpy as np
import scipy.linalg

from noisy_label_dist.model import Dataset
from noisy_label_dist.nlyfile import NlyBuilder, NlyDocument
from noisy_label_dist.util import ConfigError, RankDeficiencyError, argmaxRows, warn

@dataclass(frozen=True)
class RegressionPairs:
    inputs: np.ndarray
    """
    One row x_u per membership pair (i, u).
    """

    targets: np.ndarray
    """
    The matching s_i per membership pair.
    """

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ConfigError("inputs and targets need the same number of rows")

    @property
    def count(self) -> int:
        return self.inputs.shape[0]

@dataclass
class LinearModel:
    coef: np.ndarray
    """
    M x D.
    """

    intercept: np.ndarray
    converged: bool = True
    objectiveTrace: list[float] = field(default_factory=list)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.coef.T + self.intercept

    def toBuilder(self, method: str) -> NlyBuilder:
        return (
            NlyBuilder("baseline")
            .scalar("method", method)
            .matrix("coef", self.coef)
            .vector("intercept", self.intercept)
            .scalar("converged", self.converged)
        )

    @classmethod
    def from_document(cls, doc: NlyDocument):
        doc.expectKind("baseline")
        return cls(coef=doc["coef"], intercept=doc["intercept"], converged=doc["converged"])

@dataclass(frozen=True, kw_only=True)
class MtenSolverConfig:
    maxIters: int = 1000
    tol: float = 1e-8

def buildPairs(dataset: Dataset) -> RegressionPairs:
    return RegressionPairs(
        inputs=dataset.features[dataset.pairInstances],
        targets=dataset.noisyDists[dataset.pairGroups]
    )

def centered(pairs: RegressionPairs):
    xMean = pairs.inputs.mean(axis=0)
    yMean = pairs.targets.mean(axis=0)
    return pairs.inputs - xMean, pairs.targets - yMean, xMean, yMean

def ridgeFit(pairs: RegressionPairs, lam: float) -> LinearModel:
    """
    Independent ridge regression per output dimension, (X^T X + lam I) w = X^T y on centered data.
    """
    if lam < 0:
        raise ConfigError("ridge penalty must be nonnegative")
    if pairs.count == 0:
        raise ConfigError("no regression pairs")
    X, Y, xMean, yMean = centered(pairs)
    D = X.shape[1]

    gram = X.T @ X + lam * np.eye(D)
    if lam == 0 and np.linalg.matrix_rank(X) < D:
        raise RankDeficiencyError("design matrix is rank deficient, use a positive ridge penalty")
    coef = scipy.linalg.solve(gram, X.T @ Y, assume_a="pos").T
    return LinearModel(coef=coef, intercept=yMean - coef @ xMean)

def mtenObjective(X, Y, coef, alpha, l1Ratio) -> float:
    n = X.shape[0]
    residual = Y - X @ coef.T
    return float(
        np.sum(residual ** 2) / (2 * n)
        + alpha * l1Ratio * np.sum(np.linalg.norm(coef, axis=0))
        + alpha * (1 - l1Ratio) / 2 * np.sum(coef ** 2)
    )

def mtenAlphaMax(pairs: RegressionPairs, l1Ratio: float) -> float:
    """
    Smallest alpha at which every feature column is zero.
    """
    X, Y, _, _ = centered(pairs)
    return float(np.max(np.linalg.norm(X.T @ Y, axis=1)) / (X.shape[0] * l1Ratio))

def mtenFit(pairs: RegressionPairs, alpha: float, l1Ratio: float, solver: MtenSolverConfig = MtenSolverConfig()) -> LinearModel:
    """
    Multi-task elastic net by cyclic block coordinate descent.

    Minimizes (1/2n)||Y - X W^T||^2 + alpha l1Ratio sum_d ||W[:, d]||
    + alpha (1 - l1Ratio)/2 ||W||^2 on centered data; each block is one
    feature's coefficients across all outputs.
    """
    if alpha < 0 or not 0 <= l1Ratio <= 1:
        raise ConfigError("need alpha >= 0 and l1Ratio in [0, 1]")
    if pairs.count == 0:
        raise ConfigError("no regression pairs")
    X, Y, xMean, yMean = centered(pairs)
    n, D = X.shape
    M = Y.shape[1]

    coef = np.zeros((M, D))
    residual = Y.copy()
    colNorms = np.sum(X ** 2, axis=0) / n
    l1 = alpha * l1Ratio
    l2 = alpha * (1 - l1Ratio)

    trace = [mtenObjective(X, Y, coef, alpha, l1Ratio)]
    converged = False
    for _ in range(solver.maxIters):
        maxChange = 0.0
        for d in range(D):
            if colNorms[d] == 0:
                continue
            old = coef[:, d].copy()
            z = X[:, d] @ residual / n + colNorms[d] * old
            norm = np.linalg.norm(z)
            if norm <= l1:
                new = np.zeros(M)
            else:
                new = (1 - l1 / norm) * z / (colNorms[d] + l2)
            if np.any(new != old):
                residual -= np.outer(X[:, d], new - old)
                coef[:, d] = new
                maxChange = max(maxChange, float(np.max(np.abs(new - old))))
        trace.append(mtenObjective(X, Y, coef, alpha, l1Ratio))
        if maxChange < solver.tol:
            converged = True
            break

    if not converged:
        warn(f"multi-task elastic net did not converge in {solver.maxIters} sweeps")

    return LinearModel(coef=coef, intercept=yMean - coef @ xMean, converged=converged, objectiveTrace=trace)

def regressPredictLabel(model: LinearModel, x: np.ndarray) -> int | np.ndarray:
    x = np.asarray(x, dtype=float)
    labels = argmaxRows(model.predict(x))
    return int(labels[0]) if x.ndim == 1 else labels
