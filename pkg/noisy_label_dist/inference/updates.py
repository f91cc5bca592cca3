"""
Coordinate updates of the variational lower bound.

Each update reads the current FitState and returns new values for one
block; FitState itself is only mutated by fit().
"""

from dataclasses import dataclass
import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, xlogy

from noisy_label_dist.model import Dataset, Hyperparams
from noisy_label_dist.model.density import ENTROPY_FLOOR, betaFor, classLogits, groupMeans, pairCounts, softmax, softmaxRows
from noisy_label_dist.util import warn

@dataclass(frozen=True, kw_only=True)
class WeightOptimizerConfig:
    steps: int = 100
    gradTol: float = 1e-6
    memory: int = 10

@dataclass(frozen=True, kw_only=True)
class EtaInnerConfig:
    maxIters: int = 20
    damping: float = 0.5
    tol: float = 1e-8

@dataclass
class EtaUpdateState:
    eta: np.ndarray
    """
    Working copy of eta, P x M.
    """

    multipliers: np.ndarray
    """
    Lagrange multiplier lambda_iu per pair, recovered from the normalizer of the last member update.
    """

    iterations: int = 0
    flagged: bool = False

def weightsGradient(weights: np.ndarray, zeta: np.ndarray, features: np.ndarray, alphaW: float) -> np.ndarray:
    probs = softmax(classLogits(weights, features))
    return (zeta - probs).T @ features - alphaW * weights

def weightsObjective(weights: np.ndarray, zeta: np.ndarray, features: np.ndarray, alphaW: float) -> float:
    logits = classLogits(weights, features)
    return float(np.sum(zeta * logits) - np.sum(logsumexp(logits, axis=1)) - (alphaW / 2) * np.sum(weights ** 2))

def updateWeights(state, dataset: Dataset, hyper: Hyperparams, config: WeightOptimizerConfig) -> tuple[np.ndarray, bool]:
    """
    MAP step for W with zeta fixed. Returns the new weights and whether the sweep should be flagged.
    """
    M, D = state.weights.shape
    X, zeta, alphaW = dataset.features, state.zeta, hyper.alphaW

    def negative(flat):
        W = flat.reshape((M, D))
        return -weightsObjective(W, zeta, X, alphaW), -weightsGradient(W, zeta, X, alphaW).ravel()

    start = weightsObjective(state.weights, zeta, X, alphaW)
    res = minimize(
        negative,
        state.weights.ravel(),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": config.steps, "gtol": config.gradTol, "maxcor": config.memory, "ftol": 1e-15}
    )
    weights = res.x.reshape((M, D))
    flagged = False

    if res.status == 2 and np.max(np.abs(res.jac)) > config.gradTol:
        warn(f"weight line search failed ({res.message}), continuing with gradient ascent")
        weights = gradientAscent(weights, zeta, X, alphaW, config)
        flagged = True

    if weightsObjective(weights, zeta, X, alphaW) < start:
        weights = state.weights.copy()
        flagged = True

    return weights, flagged

def gradientAscent(weights, zeta, features, alphaW, config: WeightOptimizerConfig) -> np.ndarray:
    value = weightsObjective(weights, zeta, features, alphaW)
    step = 1.0 / max(1.0, float(np.sum(features ** 2)))
    for k in range(config.steps):
        grad = weightsGradient(weights, zeta, features, alphaW)
        if np.max(np.abs(grad)) < config.gradTol:
            break
        # diminishing step, halved until the objective improves
        trial = step / (1 + k)
        for _ in range(30):
            candidate = weights + trial * grad
            candidateValue = weightsObjective(candidate, zeta, features, alphaW)
            if candidateValue >= value:
                weights, value = candidate, candidateValue
                break
            trial /= 2
        else:
            break
    return weights

def updateConfusion(state, dataset: Dataset, hyper: Hyperparams) -> np.ndarray:
    M = dataset.numClasses
    # beta - 1 first: with beta = 1 a tiny count must survive
    unnormalized = pairCounts(state.zeta, state.eta, dataset) + (betaFor(hyper, M) - 1.0)
    totals = unnormalized.sum(axis=1, keepdims=True)
    uniform = np.full((M, M), 1.0 / M)
    return np.where(totals > 0, unnormalized / np.where(totals > 0, totals, 1.0), uniform)

def channelEvidence(eta: np.ndarray, confusion: np.ndarray, dataset: Dataset) -> np.ndarray:
    """
    U x M matrix of sum_(i: u in G_i) sum_l eta_iul log c_ml.
    """
    evidence = np.zeros((dataset.numInstances, dataset.numClasses))
    if len(eta) == 0:
        return evidence
    with np.errstate(divide="ignore"):
        perPair = np.sum(xlogy(eta[:, None, :], confusion[None, :, :]), axis=2)
    np.add.at(evidence, dataset.pairInstances, perPair)
    return evidence

def updateZeta(state, dataset: Dataset) -> tuple[np.ndarray, bool]:
    """
    Closed-form zeta update. The second value is True when some row had no feasible class and was reset to uniform.
    """
    logits = classLogits(state.weights, dataset.features) + channelEvidence(state.eta, state.confusion, dataset)
    zeta, degenerate = softmaxRows(logits)
    if np.any(degenerate):
        warn(f"{int(degenerate.sum())} instances have no class compatible with the confusion matrix")
    return zeta, bool(np.any(degenerate))

def labelEvidence(zeta: np.ndarray, confusion: np.ndarray) -> np.ndarray:
    """
    U x M matrix of sum_l zeta_ul log c_lm.
    """
    with np.errstate(divide="ignore"):
        return np.sum(xlogy(zeta[:, :, None], confusion[None, :, :]), axis=1)

def etaObjective(eta: np.ndarray, channel: np.ndarray, dataset: Dataset, alphaS: float, sTerm: str) -> float:
    """
    The eta-dependent part of the lower bound, channel given per pair.
    """
    residual = dataset.noisyDists - groupMeans(eta, dataset)
    value = -(alphaS / 2) * float(np.sum(residual ** 2))
    if sTerm == "meanfield":
        sizes = dataset.groupSizes[dataset.pairGroups]
        value -= (alphaS / 2) * float(np.sum(np.sum(eta * (1.0 - eta), axis=1) / sizes ** 2))
    with np.errstate(invalid="ignore"):
        value += float(np.sum(np.where(eta > 0, eta * channel, 0.0)))
    value -= float(np.sum(eta * np.log(np.maximum(eta, ENTROPY_FLOOR))))
    return value

def etaGradient(state, dataset: Dataset, hyper: Hyperparams, sTerm="meanfield") -> np.ndarray:
    """
    Partial derivatives of the lower bound with respect to each eta entry, treating entries as free variables.
    """
    eta = state.eta
    pg, pi = dataset.pairGroups, dataset.pairInstances
    sizes = dataset.groupSizes[pg].astype(float)[:, None]
    alphaS = hyper.alphaS

    grad = labelEvidence(state.zeta, state.confusion)[pi]
    grad = grad + (alphaS / sizes) * (dataset.noisyDists[pg] - groupMeans(eta, dataset)[pg])
    if sTerm == "meanfield":
        grad = grad - (alphaS / (2 * sizes ** 2)) * (1.0 - 2.0 * eta)
    return grad - np.log(np.maximum(eta, ENTROPY_FLOOR)) - 1.0

def updateEta(state, dataset: Dataset, hyper: Hyperparams, config: EtaInnerConfig, sTerm="meanfield") -> EtaUpdateState:
    eta = state.eta.copy()
    if len(eta) == 0:
        return EtaUpdateState(eta=eta, multipliers=np.zeros(0))

    channel = labelEvidence(state.zeta, state.confusion)[dataset.pairInstances]
    if sTerm == "meanfield":
        return etaGaussSeidel(eta, channel, dataset, hyper.alphaS, config)
    return etaDampedJacobi(eta, channel, dataset, hyper.alphaS, config)

def etaGaussSeidel(eta, channel, dataset: Dataset, alphaS: float, config: EtaInnerConfig) -> EtaUpdateState:
    # Under the mean-field observation term the bound is linear in a single
    # member's eta given the rest of its group, so each member update is an
    # exact maximizer. Members at the same position belong to different
    # groups and are updated together.
    pg = dataset.pairGroups
    sizes = dataset.groupSizes[pg].astype(float)[:, None]
    base = channel + (alphaS / sizes) * dataset.noisyDists[pg]
    coupling = alphaS / sizes ** 2
    byPosition = [np.flatnonzero(dataset.pairPositions == k) for k in range(int(dataset.groupSizes.max()))]
    multipliers = np.zeros(len(eta))

    state = EtaUpdateState(eta=eta, multipliers=multipliers)
    for iteration in range(1, config.maxIters + 1):
        sums = np.zeros((dataset.numGroups, dataset.numClasses))
        np.add.at(sums, pg, eta)

        maxChange = 0.0
        for sel in byPosition:
            groups = pg[sel]
            logits = base[sel] - coupling[sel] * (sums[groups] - eta[sel])
            new, degenerate = softmaxRows(logits)
            multipliers[sel] = 1.0 + coupling[sel, 0] / 2 - np.where(degenerate, 0.0, logsumexp(logits, axis=1))
            sums[groups] += new - eta[sel]
            maxChange = max(maxChange, float(np.max(np.abs(new - eta[sel]))))
            eta[sel] = new

        state.iterations = iteration
        if maxChange < config.tol:
            return state

    state.flagged = True
    return state

def etaDampedJacobi(eta, channel, dataset: Dataset, alphaS: float, config: EtaInnerConfig) -> EtaUpdateState:
    pg = dataset.pairGroups
    sizes = dataset.groupSizes[pg].astype(float)[:, None]
    gamma = config.damping

    best = eta.copy()
    bestValue = etaObjective(eta, channel, dataset, alphaS, "plugin")
    multipliers = np.zeros(len(eta))

    state = EtaUpdateState(eta=best, multipliers=multipliers)
    for iteration in range(1, config.maxIters + 1):
        logits = channel + (alphaS / sizes) * (dataset.noisyDists[pg] - groupMeans(eta, dataset)[pg])
        target, degenerate = softmaxRows(logits)
        new = (1.0 - gamma) * eta + gamma * target
        new /= new.sum(axis=1, keepdims=True)
        change = float(np.max(np.abs(new - eta)))
        eta = new

        value = etaObjective(eta, channel, dataset, alphaS, "plugin")
        if value >= bestValue:
            best, bestValue = eta.copy(), value
            state.multipliers = 1.0 - np.where(degenerate, 0.0, logsumexp(logits, axis=1))

        state.iterations = iteration
        if change < config.tol:
            state.eta = best
            return state

    warn(f"eta fixed point did not settle in {config.maxIters} iterations, keeping the best iterate")
    state.eta = best
    state.flagged = True
    return state
