from __future__ import annotations
from dataclasses import dataclass, field
import logging
import math
from typing import TYPE_CHECKING, Callable
if TYPE_CHECKING:
    from typing_extensions import Self
import numpy as np

from noisy_label_dist.datagen import makeRng, sampleDirichlet
from noisy_label_dist.model import Dataset, FitResult, Hyperparams, ModelParams, VariationalParams
from noisy_label_dist.model.density import S_TERMS, classLogits, elboTerms, softmax
from noisy_label_dist.util import ConfigError, NumericalError, argmaxRows, checkSimplexRows, error
from .gradcheck import GradientCheck, checkEtaGradient, checkWeightsGradient
from .updates import (
    EtaInnerConfig, EtaUpdateState, WeightOptimizerConfig, etaGradient, updateConfusion,
    updateEta, updateWeights, updateZeta, weightsGradient
)

log = logging.getLogger(__name__)

@dataclass(frozen=True, kw_only=True)
class FitConfig:
    maxSweeps: int = 500
    elboRelTol: float = 1e-7
    weightOptimizer: WeightOptimizerConfig = field(default_factory=WeightOptimizerConfig)
    etaInner: EtaInnerConfig = field(default_factory=EtaInnerConfig)
    initSeed: int = 0
    checkGradients: bool = False

    sTerm: str = "meanfield"
    """
    Form of the expected observation term, see model.density.
    """

    auditSimplex: bool = False
    """
    Check every simplex invariant after every update.
    """

    auditMonotone: bool = False
    """
    Record the bound after every individual update in FitResult.updateTrace.
    """

    clampZeta: bool = False
    """
    Hold zeta at its initial value.
    """

    def __post_init__(self):
        if self.maxSweeps < 1:
            raise ConfigError("maxSweeps must be at least 1")
        if not self.elboRelTol > 0 or not self.etaInner.tol > 0 or not self.weightOptimizer.gradTol > 0:
            raise ConfigError("tolerances must be positive")
        if not 0 < self.etaInner.damping <= 1:
            raise ConfigError("eta damping must lie in (0, 1]")
        if self.sTerm not in S_TERMS:
            raise ConfigError(f"sTerm must be one of {S_TERMS}")
        if not 0 <= self.initSeed < 2 ** 64:
            raise ConfigError("initSeed must be an unsigned 64-bit integer")

@dataclass
class FitState:
    weights: np.ndarray
    confusion: np.ndarray
    zeta: np.ndarray
    eta: np.ndarray

    def copy(self) -> Self:
        return FitState(self.weights.copy(), self.confusion.copy(), self.zeta.copy(), self.eta.copy())

    def maxChange(self, other: Self) -> float:
        return max(float(np.max(np.abs(a - b), initial=0.0)) for a, b in [
            (self.weights, other.weights),
            (self.confusion, other.confusion),
            (self.zeta, other.zeta),
            (self.eta, other.eta),
        ])

    def params(self) -> ModelParams:
        return ModelParams(weights=self.weights, confusion=self.confusion)

    def varparams(self, dataset: Dataset, onSimplex=True) -> VariationalParams:
        return VariationalParams(zeta=self.zeta, eta=self.eta, pairs=dataset.pairs, onSimplex=onSimplex)

def initialState(dataset: Dataset, config: FitConfig) -> FitState:
    """
    zeta near uniform with seeded Dirichlet jitter, eta copied from zeta, C half identity, W zero.
    """
    M, D, U = dataset.numClasses, dataset.numFeatures, dataset.numInstances
    rng = makeRng(config.initSeed)
    zeta = np.array([sampleDirichlet(np.full(M, 100.0), rng) for _ in range(U)]).reshape((U, M))
    confusion = 0.5 * np.eye(M) + 0.5 / M
    return FitState(
        weights=np.zeros((M, D)),
        confusion=confusion / confusion.sum(axis=1, keepdims=True),
        zeta=zeta,
        eta=zeta[dataset.pairInstances].copy()
    )

SweepObserver = Callable[[int, float, float], None]

def evaluateBound(state: FitState, dataset: Dataset, hyper: Hyperparams, sTerm: str, where: str) -> float:
    # non-finite rows are reported below as numerical failures
    terms = elboTerms(state.params(), state.varparams(dataset, onSimplex=False), dataset, hyper, sTerm=sTerm)
    bad = {name: value for name, value in terms.items() if not math.isfinite(value)}
    if bad:
        error(f"non-finite lower bound {where}: " + ", ".join(f"{k}={v}" for k, v in bad.items()), NumericalError)
    return float(sum(terms.values()))

def fit(dataset: Dataset, hyper: Hyperparams, config: FitConfig = FitConfig(), init: FitState | None = None, observer: SweepObserver | None = None) -> FitResult:
    if dataset.numInstances == 0:
        raise ConfigError("cannot fit a dataset without instances")

    state = init.copy() if init is not None else initialState(dataset, config)
    if state.zeta.shape != (dataset.numInstances, dataset.numClasses) or state.eta.shape[0] != len(dataset.pairs):
        raise ConfigError("initial state does not match the dataset")
    if init is not None:
        init.varparams(dataset)

    trace, flagged, updateTrace = [], [], []
    converged = False
    sweep = 0

    def audit(stage):
        if config.auditSimplex:
            checkSimplexRows(f"zeta after {stage} update", state.zeta)
            checkSimplexRows(f"eta after {stage} update", state.eta)
            checkSimplexRows(f"confusion after {stage} update", state.confusion)
        if config.auditMonotone:
            updateTrace.append((stage, evaluateBound(state, dataset, hyper, config.sTerm, f"after {stage} update")))

    if config.auditMonotone:
        updateTrace.append(("init", evaluateBound(state, dataset, hyper, config.sTerm, "at the initial state")))

    for sweep in range(1, config.maxSweeps + 1):
        before = state.copy()
        sweepFlagged = False

        etaState = updateEta(state, dataset, hyper, config.etaInner, sTerm=config.sTerm)
        state.eta = etaState.eta
        sweepFlagged |= etaState.flagged
        audit("eta")

        if not config.clampZeta:
            state.zeta, degenerate = updateZeta(state, dataset)
            sweepFlagged |= degenerate
        audit("zeta")

        state.confusion = updateConfusion(state, dataset, hyper)
        audit("confusion")

        state.weights, weightsFlagged = updateWeights(state, dataset, hyper, config.weightOptimizer)
        sweepFlagged |= weightsFlagged
        audit("weights")

        value = evaluateBound(state, dataset, hyper, config.sTerm, f"at sweep {sweep}")
        change = state.maxChange(before)
        if sweepFlagged:
            flagged.append(sweep)
        if observer is not None:
            observer(sweep, value, change)

        previous = trace[-1] if trace else None
        trace.append(value)
        if previous is not None and abs(value - previous) < config.elboRelTol * abs(previous):
            converged = True
            break

    log.debug(f"fit finished after {sweep} sweeps, converged={converged}, elbo={trace[-1]}")

    result = FitResult(
        params=state.params(),
        varparams=state.varparams(dataset),
        elboTrace=trace,
        converged=converged,
        sweeps=sweep,
        flaggedSweeps=flagged,
        updateTrace=updateTrace
    )
    if config.checkGradients:
        result.gradientChecks = gradientChecksAt(state, dataset, hyper, config)
    return result

def gradientChecksAt(state: FitState, dataset: Dataset, hyper: Hyperparams, config: FitConfig, maxCoords=20) -> list[GradientCheck]:
    rng = makeRng(config.initSeed)
    return [
        checkWeightsGradient(state, dataset, hyper, weightsGradient, rng=rng, maxCoords=maxCoords, sTerm=config.sTerm),
        checkEtaGradient(state, dataset, hyper, etaGradient, rng=rng, maxCoords=maxCoords, sTerm=config.sTerm),
    ]

def predict(params: ModelParams, x: np.ndarray) -> int | np.ndarray:
    """
    Most probable class for one feature vector, or one class per row of a matrix.
    """
    x = np.asarray(x, dtype=float)
    labels = argmaxRows(classLogits(params.weights, x))
    return int(labels[0]) if x.ndim == 1 else labels

def groupPredictor(params: ModelParams, features: np.ndarray):
    """
    Expected noisy distribution of a group under the MAP parameters, C^T mean_u softmax(a_u).
    """
    probs = softmax(classLogits(params.weights, features))

    def predictGroup(members) -> np.ndarray:
        return params.confusion.T @ probs[np.asarray(members)].mean(axis=0)

    return predictGroup
