from dataclasses import dataclass
import numpy as np

from noisy_label_dist.model import Dataset, Hyperparams, ModelParams, VariationalParams
from noisy_label_dist.model.density import elbo

@dataclass(frozen=True)
class GradientCheck:
    name: str
    maxRelError: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.maxRelError < self.tolerance)

def relativeError(analytic, numeric) -> np.ndarray:
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    return np.abs(analytic - numeric) / np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))

def finiteDifference(fun, x: np.ndarray, coords, steps) -> np.ndarray:
    """
    Central differences of fun at x along the given flat coordinates.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros(len(coords))
    for k, (idx, h) in enumerate(zip(coords, steps)):
        plus = x.copy().ravel()
        minus = x.copy().ravel()
        plus[idx] += h
        minus[idx] -= h
        out[k] = (fun(plus.reshape(x.shape)) - fun(minus.reshape(x.shape))) / (2 * h)
    return out

def checkWeightsGradient(state, dataset: Dataset, hyper: Hyperparams, gradientFn, rng=None, maxCoords=None, sTerm="meanfield", h=1e-5, tol=1e-5) -> GradientCheck:
    def objective(W):
        return elbo(ModelParams(W, state.confusion), VariationalParams(state.zeta, state.eta, dataset.pairs), dataset, hyper, sTerm=sTerm)

    coords = selectCoords(state.weights.size, rng, maxCoords)
    numeric = finiteDifference(objective, state.weights, coords, [h] * len(coords))
    analytic = gradientFn(state.weights, state.zeta, dataset.features, hyper.alphaW).ravel()[coords]
    return GradientCheck("weights gradient", float(np.max(relativeError(analytic, numeric), initial=0.0)), tol)

def checkEtaGradient(state, dataset: Dataset, hyper: Hyperparams, gradientFn, rng=None, maxCoords=None, sTerm="meanfield", h=1e-5, tol=1e-5) -> GradientCheck:
    params = ModelParams(state.weights, state.confusion)

    def objective(eta):
        return elbo(params, VariationalParams(state.zeta, eta, dataset.pairs, onSimplex=False), dataset, hyper, sTerm=sTerm)

    flatEta = state.eta.ravel()
    candidates = np.flatnonzero(flatEta > 1e-4)
    coords = candidates[selectCoords(len(candidates), rng, maxCoords)]
    # keep the step well inside the positive orthant, where the entropy is smooth
    steps = np.minimum(h, 1e-3 * flatEta[coords])
    numeric = finiteDifference(objective, state.eta, coords, steps)
    analytic = gradientFn(state, dataset, hyper, sTerm).ravel()[coords]
    return GradientCheck("eta gradient", float(np.max(relativeError(analytic, numeric), initial=0.0)), tol)

def selectCoords(size: int, rng, maxCoords) -> np.ndarray:
    if maxCoords is None or size <= maxCoords:
        return np.arange(size)
    return np.sort(rng.choice(size, size=maxCoords, replace=False))
