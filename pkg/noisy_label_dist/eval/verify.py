"""
Numerical self-checks of the implemented objective and its updates.
"""

from dataclasses import dataclass
import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from noisy_label_dist.datagen import makeRng, randomProblem
from noisy_label_dist.inference import FitConfig, FitState, fit
from noisy_label_dist.inference.gradcheck import checkEtaGradient, checkWeightsGradient
from noisy_label_dist.inference.updates import WeightOptimizerConfig, etaGradient, updateWeights, weightsGradient
from noisy_label_dist.model.density import elbo, logPriors, softmax
from noisy_label_dist.model.enumeration import exactLogMarginal
from noisy_label_dist.nlyfile import NlyBuilder
from noisy_label_dist.util import NlyError

@dataclass(frozen=True)
class VerificationItem:
    name: str
    passed: bool
    measured: float
    tolerance: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: measured {self.measured:.3e} (tolerance {self.tolerance:.1e})"

@dataclass
class VerificationReport:
    seed: int
    items: list[VerificationItem]

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    def toText(self) -> str:
        return "\n".join(item.line() for item in self.items) + "\n"

    def toBuilder(self) -> NlyBuilder:
        builder = NlyBuilder("verification").scalar("seed", int(self.seed)).scalar("passed", self.passed)
        for k, item in enumerate(self.items):
            builder.scalar(f"item{k}_name", item.name)
            builder.scalar(f"item{k}_passed", item.passed)
            builder.scalar(f"item{k}_measured", float(item.measured))
            builder.scalar(f"item{k}_tolerance", float(item.tolerance))
        return builder

def stateOf(params, varparams) -> FitState:
    return FitState(params.weights.copy(), params.confusion.copy(), varparams.zeta.copy(), varparams.eta.copy())

def smallProblem(rng):
    return randomProblem(
        rng,
        U=int(rng.integers(2, 6)),
        N=int(rng.integers(1, 4)),
        M=int(rng.integers(2, 4)),
        D=int(rng.integers(1, 5)),
        maxGroupSize=3
    )

def enumerableProblem(rng):
    # at most 3 instances and 4 memberships keep exact enumeration cheap
    return randomProblem(rng, U=int(rng.integers(1, 4)), N=int(rng.integers(1, 3)), M=int(rng.integers(2, 4)), D=2, maxGroupSize=2)

def newtonLogisticMap(features: np.ndarray, targets: np.ndarray, alphaW: float, iters=100, tol=1e-12) -> np.ndarray:
    """
    MAP multinomial logistic regression with soft targets by damped Newton steps on the full Hessian.
    """
    U, D = features.shape
    M = targets.shape[1]
    W = np.zeros((M, D))

    def objective(W):
        logits = features @ W.T
        return float(np.sum(targets * logits) - np.sum(logsumexp(logits, axis=1)) - alphaW / 2 * np.sum(W ** 2))

    for _ in range(iters):
        probs = softmax(features @ W.T)
        grad = (targets - probs).T @ features - alphaW * W
        if np.max(np.abs(grad)) < tol:
            break
        hessian = -alphaW * np.eye(M * D)
        for u in range(U):
            curvature = np.diag(probs[u]) - np.outer(probs[u], probs[u])
            hessian -= np.kron(curvature, np.outer(features[u], features[u]))
        step = scipy.linalg.solve(-hessian, grad.ravel(), assume_a="pos").reshape((M, D))
        value, scale = objective(W), 1.0
        while objective(W + scale * step) < value and scale > 1e-10:
            scale /= 2
        W = W + scale * step
    return W

def monotoneViolation(updateTrace: list[tuple[str, float]]) -> float:
    """
    Largest decrease of the bound across one update, scaled by the update's allowance.

    Closed-form updates may lose 1e-9 absolute, iterative ones 1e-6 relative;
    a value above one is a violation.
    """
    worst = 0.0
    for (_, before), (stage, after) in zip(updateTrace, updateTrace[1:]):
        drop = before - after
        allowance = 1e-9 if stage in ("zeta", "confusion") else 1e-6 * max(1.0, abs(before))
        worst = max(worst, drop / allowance)
    return worst

def verificationSuite(seed=0, etaGradientFn=etaGradient, instances=20) -> VerificationReport:
    rng = makeRng(seed)
    items = []

    for sTerm in ("meanfield", "plugin"):
        wErr, etaErr = 0.0, 0.0
        for _ in range(instances):
            dataset, params, varparams, hyper = smallProblem(rng)
            state = stateOf(params, varparams)
            wErr = max(wErr, checkWeightsGradient(state, dataset, hyper, weightsGradient, sTerm=sTerm).maxRelError)
            etaErr = max(etaErr, checkEtaGradient(state, dataset, hyper, etaGradientFn, sTerm=sTerm).maxRelError)
        items.append(VerificationItem(f"weights gradient vs finite differences ({sTerm})", wErr < 1e-5, wErr, 1e-5))
        items.append(VerificationItem(f"eta gradient vs finite differences ({sTerm})", etaErr < 1e-5, etaErr, 1e-5))

    slack = -np.inf
    for _ in range(10):
        dataset, params, varparams, hyper = enumerableProblem(rng)
        exact = exactLogMarginal(params, dataset, hyper)
        slack = max(slack, elbo(params, varparams, dataset, hyper) - logPriors(params, hyper) - exact)
        fitted = fit(dataset, hyper, FitConfig(maxSweeps=20, initSeed=int(rng.integers(2 ** 32))))
        exactFitted = exactLogMarginal(fitted.params, dataset, hyper)
        slack = max(slack, fitted.elboTrace[-1] - logPriors(fitted.params, hyper) - exactFitted)
    items.append(VerificationItem("lower bound minus priors does not exceed the exact log marginal", slack <= 1e-9, slack, 1e-9))

    violation, simplexOk = 0.0, True
    for _ in range(instances):
        dataset, _, _, hyper = randomProblem(rng, U=int(rng.integers(3, 11)), N=int(rng.integers(1, 11)), M=int(rng.integers(2, 5)), D=3, maxGroupSize=4)
        try:
            result = fit(dataset, hyper, FitConfig(maxSweeps=30, auditMonotone=True, auditSimplex=True, initSeed=int(rng.integers(2 ** 32))))
        except NlyError:
            simplexOk = False
            continue
        violation = max(violation, monotoneViolation(result.updateTrace))
    items.append(VerificationItem("bound never decreases across an update (scaled violation)", violation <= 1.0, violation, 1.0))
    items.append(VerificationItem("simplex invariants hold after every update", simplexOk, 0.0 if simplexOk else 1.0, 1.0))

    supervised = 0.0
    for _ in range(5):
        dataset, params, _, hyper = smallProblem(rng)
        labels = rng.integers(0, dataset.numClasses, size=dataset.numInstances)
        onehot = np.eye(dataset.numClasses)[labels]
        state = FitState(np.zeros_like(params.weights), params.confusion, onehot, np.zeros((len(dataset.pairs), dataset.numClasses)))
        weights, _ = updateWeights(state, dataset, hyper, WeightOptimizerConfig(steps=1000, gradTol=1e-10))
        reference = newtonLogisticMap(dataset.features, onehot, hyper.alphaW)
        supervised = max(supervised, float(np.max(np.abs(weights - reference))))
    items.append(VerificationItem("one-hot zeta reduces the weight step to MAP logistic regression", supervised < 1e-4, supervised, 1e-4))

    return VerificationReport(seed=seed, items=items)
