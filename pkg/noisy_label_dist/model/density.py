"""
Densities of the generative model and the variational lower bound.

Two forms of the expected observation term are supported:

* "meanfield": the exact expectation of -(alpha_s/2)||s_i - t_i||^2 under the
  factorized q, which is ||s_i - E[t_i]||^2 plus the variance of t_i. This is
  a true lower bound on the log marginal.
* "plugin": only ||s_i - E[t_i]||^2. It drops the variance and can therefore
  exceed the log marginal.
"""

import math
import numpy as np
from scipy.special import gammaln, logsumexp, softmax as scipySoftmax, xlogy

from noisy_label_dist.model import Dataset, Hyperparams, ModelParams, VariationalParams
from noisy_label_dist.util import ConfigError

S_TERMS = ("meanfield", "plugin")

LOG_2PI = math.log(2 * math.pi)
ENTROPY_FLOOR = 1e-300

def makeBeta(alphaC0: float, alphaC1: float, M: int) -> np.ndarray:
    if M < 2:
        raise ConfigError("need at least two classes")
    if alphaC0 < 1 or alphaC1 < 1:
        raise ConfigError("Dirichlet concentrations must be at least 1")
    beta = np.full((M, M), float(alphaC0))
    np.fill_diagonal(beta, float(alphaC1))
    return beta

def betaFor(hyper: Hyperparams, M: int) -> np.ndarray:
    return makeBeta(hyper.alphaC0, hyper.alphaC1, M)

def classLogits(weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    a_m = w_m . x for a single D-vector, or the U x M logit matrix for a U x D matrix.
    """
    weights = np.asarray(weights, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != weights.shape[1]:
        raise ConfigError(f"feature dimension {x.shape[-1]} does not match weights {weights.shape}")
    return x @ weights.T

def softmax(a: np.ndarray) -> np.ndarray:
    return scipySoftmax(np.asarray(a, dtype=float), axis=-1)

def softmaxRows(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Row softmax tolerating -inf entries.

    Rows where every entry is -inf come back uniform and are reported in
    the returned mask.
    """
    logits = np.atleast_2d(logits)
    rowMax = logits.max(axis=1, keepdims=True)
    degenerate = ~np.isfinite(rowMax[:, 0])
    shifted = np.where(degenerate[:, None], 0.0, logits - np.where(degenerate[:, None], 0.0, rowMax))
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs, degenerate

def groupMeans(eta: np.ndarray, dataset: Dataset) -> np.ndarray:
    """
    N x M matrix of E[t_i], the membership-averaged eta rows.
    """
    sums = np.zeros((dataset.numGroups, dataset.numClasses))
    np.add.at(sums, dataset.pairGroups, eta)
    if dataset.numGroups == 0:
        return sums
    return sums / dataset.groupSizes[:, None]

def expectedGroupDist(varparams: VariationalParams, i: int, group) -> np.ndarray:
    rows = np.array([varparams.etaFor(i, u) for u in group])
    return rows.mean(axis=0)

def logPriorWeights(weights: np.ndarray, alphaW: float) -> float:
    if not alphaW > 0:
        raise ConfigError("weight precision must be positive")
    weights = np.asarray(weights, dtype=float)
    M, D = weights.shape
    return M * (D / 2) * (math.log(alphaW) - LOG_2PI) - (alphaW / 2) * float(np.sum(weights ** 2))

def logPriorConfusion(confusion: np.ndarray, beta: np.ndarray) -> float:
    """
    Sum of row-wise Dirichlet log densities; -inf when a zero entry meets a concentration above one.
    """
    normalizer = np.sum(gammaln(beta.sum(axis=1))) - np.sum(gammaln(beta))
    return float(normalizer + np.sum(xlogy(beta - 1.0, confusion)))

def entropyRows(probs: np.ndarray) -> float:
    return float(-np.sum(probs * np.log(np.maximum(probs, ENTROPY_FLOOR))))

def pairCounts(zeta: np.ndarray, eta: np.ndarray, dataset: Dataset) -> np.ndarray:
    """
    M x M expected confusion counts sum_(i,u) zeta_u eta_iu^T.
    """
    return zeta[dataset.pairInstances].T @ eta

def elboTerms(params: ModelParams, varparams: VariationalParams, dataset: Dataset, hyper: Hyperparams, sTerm="meanfield") -> dict[str, float]:
    if sTerm not in S_TERMS:
        raise ConfigError(f"unknown observation term form: {sTerm}")

    W, C = params.weights, params.confusion
    zeta, eta = varparams.zeta, varparams.eta
    M = dataset.numClasses

    logits = classLogits(W, dataset.features)
    lse = logsumexp(logits, axis=1)

    alphaS = hyper.alphaS
    if dataset.numGroups > 0:
        residual = dataset.noisyDists - groupMeans(eta, dataset)
        observation = -(alphaS / 2) * float(np.sum(residual ** 2))
        observation += dataset.numGroups * (M / 2) * (math.log(alphaS) - LOG_2PI)
        if sTerm == "meanfield":
            sizes = dataset.groupSizes[dataset.pairGroups]
            variance = np.sum(eta * (1.0 - eta), axis=1) / sizes ** 2
            observation -= (alphaS / 2) * float(np.sum(variance))
    else:
        observation = 0.0

    with np.errstate(divide="ignore", invalid="ignore"):
        channel = float(np.sum(xlogy(pairCounts(zeta, eta, dataset), C)))

    return {
        "observation": observation,
        "channel": channel,
        "labels": float(np.sum(zeta * (logits - lse[:, None]))),
        "entropy_labels": entropyRows(zeta),
        "entropy_channel": entropyRows(eta),
        "prior_weights": logPriorWeights(W, hyper.alphaW),
        "prior_confusion": logPriorConfusion(C, betaFor(hyper, M)),
    }

def elbo(params: ModelParams, varparams: VariationalParams, dataset: Dataset, hyper: Hyperparams, sTerm="meanfield") -> float:
    return float(sum(elboTerms(params, varparams, dataset, hyper, sTerm=sTerm).values()))

def logPriors(params: ModelParams, hyper: Hyperparams) -> float:
    return logPriorWeights(params.weights, hyper.alphaW) + logPriorConfusion(params.confusion, betaFor(hyper, params.numClasses))
