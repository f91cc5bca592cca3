"""
Hyperparameter selection by cross-validation over groups.

Folds split the group observations only; every instance stays visible to
every fit. A grid point is scored by the mean squared error between the
held-out noisy distributions and the fitted model's prediction of them.
"""

from dataclasses import dataclass, field
import logging
from typing import Any, Callable
import numpy as np

from noisy_label_dist.baselines import MtenSolverConfig, buildPairs, mtenFit, ridgeFit
from noisy_label_dist.datagen import makeRng
from noisy_label_dist.inference import FitConfig, fit, groupPredictor
from noisy_label_dist.model import Dataset, Hyperparams
from noisy_label_dist.util import ConfigError

log = logging.getLogger(__name__)

GroupPredictor = Callable[[np.ndarray], np.ndarray]
FitProcedure = Callable[[Dataset, Any], GroupPredictor]

@dataclass(frozen=True, kw_only=True)
class CvSpec:
    grid: list
    folds: int = 3
    seed: int = 0

    strength: Callable[[Any], float] = field(default=lambda point: 0.0)
    """
    Regularization strength of a grid point; ties in the criterion go to the strongest.
    """

    def __post_init__(self):
        if len(self.grid) == 0:
            raise ConfigError("empty cross-validation grid")
        if self.folds < 2:
            raise ConfigError("need at least two folds")

@dataclass
class CvOutcome:
    best: Any
    scores: list[float]

def foldAssignment(numGroups: int, folds: int, seed: int) -> list[np.ndarray]:
    """
    Held-out group indices for each fold; sizes differ by at most one.
    """
    if numGroups < folds:
        raise ConfigError(f"{numGroups} groups cannot be split into {folds} folds")
    order = makeRng(seed).permutation(numGroups)
    return [np.sort(part) for part in np.array_split(order, folds)]

def heldOutError(dataset: Dataset, heldOut: np.ndarray, predictGroup: GroupPredictor) -> float:
    errors = [np.mean((dataset.noisyDists[i] - predictGroup(dataset.groups[i])) ** 2) for i in heldOut]
    return float(np.mean(errors))

def crossValidate(dataset: Dataset, spec: CvSpec, fitProcedure: FitProcedure) -> CvOutcome:
    folds = foldAssignment(dataset.numGroups, spec.folds, spec.seed)
    allGroups = np.arange(dataset.numGroups)

    scores = []
    for point in spec.grid:
        foldScores = []
        for heldOut in folds:
            train = dataset.subsetGroups(np.setdiff1d(allGroups, heldOut))
            foldScores.append(heldOutError(dataset, heldOut, fitProcedure(train, point)))
        scores.append(float(np.mean(foldScores)))
        log.debug(f"cv point {point}: {scores[-1]:.6g}")

    lowest = min(scores)
    tied = [k for k, score in enumerate(scores) if score <= lowest + 1e-12 * max(1.0, abs(lowest))]
    bestIdx = max(tied, key=lambda k: (spec.strength(spec.grid[k]), -k))
    return CvOutcome(best=spec.grid[bestIdx], scores=scores)

def modelProcedure(config: FitConfig = FitConfig()) -> FitProcedure:
    def procedure(train: Dataset, hyper: Hyperparams) -> GroupPredictor:
        result = fit(train, hyper, config)
        return groupPredictor(result.params, train.features)
    return procedure

def linearGroupPredictor(model, features) -> GroupPredictor:
    outputs = model.predict(features)

    def predictGroup(members) -> np.ndarray:
        return outputs[np.asarray(members)].mean(axis=0)

    return predictGroup

def ridgeProcedure() -> FitProcedure:
    def procedure(train: Dataset, lam: float) -> GroupPredictor:
        return linearGroupPredictor(ridgeFit(buildPairs(train), lam), train.features)
    return procedure

def mtenProcedure(solver: MtenSolverConfig = MtenSolverConfig()) -> FitProcedure:
    def procedure(train: Dataset, point: tuple[float, float]) -> GroupPredictor:
        alpha, l1Ratio = point
        return linearGroupPredictor(mtenFit(buildPairs(train), alpha, l1Ratio, solver), train.features)
    return procedure

def modelStrength(hyper: Hyperparams) -> float:
    return hyper.alphaW

def ridgeStrength(lam: float) -> float:
    return lam

def mtenStrength(point: tuple[float, float]) -> float:
    return point[0]

def defaultRidgeGrid() -> list[float]:
    return [float(v) for v in np.logspace(-3, 3, 7)]

def defaultMtenGrid() -> list[tuple[float, float]]:
    return [(float(alpha), l1Ratio) for alpha in np.logspace(-3, 3, 7) for l1Ratio in (0.1, 0.5, 0.9)]

def defaultModelGrid(alphaS=100.0, alphaC0=1.0) -> list[Hyperparams]:
    return [
        Hyperparams(alphaW=alphaW, alphaS=alphaS, alphaC0=alphaC0, alphaC1=alphaC1)
        for alphaW in (1.0, 10.0)
        for alphaC1 in (1.0, 10.0, 100.0)
    ]
