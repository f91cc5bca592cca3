import numpy as np
import pytest
from scipy.special import logsumexp

from noisy_label_dist.datagen import makeRng, randomProblem
from noisy_label_dist.inference import FitState
from noisy_label_dist.inference.updates import (
    EtaInnerConfig, WeightOptimizerConfig, etaGradient, etaObjective, labelEvidence, updateConfusion,
    updateEta, updateWeights, updateZeta, weightsGradient, weightsObjective
)
from noisy_label_dist.model import Dataset, Hyperparams, ModelParams, VariationalParams
from noisy_label_dist.model.density import elbo, softmax

def stateFor(params, varparams) -> FitState:
    return FitState(params.weights.copy(), params.confusion.copy(), varparams.zeta.copy(), varparams.eta.copy())

def bound(state, dataset, hyper, sTerm="meanfield"):
    return elbo(state.params(), state.varparams(dataset), dataset, hyper, sTerm=sTerm)

def singleton(s, M=2):
    return Dataset(features=np.zeros((1, 1)), groups=(np.array([0]),), noisyDists=np.array([s], dtype=float).reshape((1, M)))

def test_weightsGradient_matches_finite_differences():
    rng = makeRng(4)
    dataset, params, varparams, hyper = randomProblem(rng, U=5, N=2, M=3, D=4)
    W = params.weights
    grad = weightsGradient(W, varparams.zeta, dataset.features, hyper.alphaW)
    h = 1e-5
    for idx in np.ndindex(W.shape):
        plus, minus = W.copy(), W.copy()
        plus[idx] += h
        minus[idx] -= h
        numeric = (weightsObjective(plus, varparams.zeta, dataset.features, hyper.alphaW) - weightsObjective(minus, varparams.zeta, dataset.features, hyper.alphaW)) / (2 * h)
        assert grad[idx] == pytest.approx(numeric, rel=1e-6, abs=1e-7)

def test_updateWeights_reaches_stationary_point():
    rng = makeRng(5)
    dataset, params, varparams, hyper = randomProblem(rng, U=8, N=3, M=3, D=3)
    state = stateFor(params, varparams)
    before = weightsObjective(state.weights, state.zeta, dataset.features, hyper.alphaW)
    weights, flagged = updateWeights(state, dataset, hyper, WeightOptimizerConfig())
    assert not flagged
    assert weightsObjective(weights, state.zeta, dataset.features, hyper.alphaW) >= before
    assert np.max(np.abs(weightsGradient(weights, state.zeta, dataset.features, hyper.alphaW))) < 1e-5

def test_updateWeights_strong_prior_shrinks_to_zero():
    rng = makeRng(6)
    dataset, params, varparams, _ = randomProblem(rng, U=6, N=2, M=3, D=3)
    state = stateFor(params, varparams)
    weights, _ = updateWeights(state, dataset, Hyperparams(alphaW=1e8), WeightOptimizerConfig())
    assert np.linalg.norm(weights) < 1e-3

def test_updateConfusion_prior_mode_without_groups():
    dataset = Dataset(features=np.zeros((2, 1)), groups=(), noisyDists=np.zeros((0, 2)))
    state = FitState(np.zeros((2, 1)), np.full((2, 2), 0.5), np.full((2, 2), 0.5), np.zeros((0, 2)))
    C = updateConfusion(state, dataset, Hyperparams(alphaC0=2.0, alphaC1=3.0))
    assert np.allclose(C, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]])

def test_updateConfusion_aligned_one_hot():
    dataset = Dataset(features=np.zeros((2, 1)), groups=(np.array([0, 1]),), noisyDists=np.array([[1.0, 0.0]]))
    onehot = np.array([[1.0, 0.0], [1.0, 0.0]])
    state = FitState(np.zeros((2, 1)), np.full((2, 2), 0.5), onehot, onehot.copy())
    C = updateConfusion(state, dataset, Hyperparams(alphaC0=1.0, alphaC1=1.0))
    assert np.allclose(C[0], [1.0, 0.0])
    # no evidence for class 1 and a flat prior
    assert np.allclose(C[1], [0.5, 0.5])

def test_updateConfusion_tiny_counts_with_flat_prior():
    dataset = Dataset(features=np.zeros((1, 1)), groups=(np.array([0]),), noisyDists=np.array([[1.0, 0.0]]))
    zeta = np.array([[1e-17, 1.0]])
    eta = np.array([[1.0, 0.0]])
    state = FitState(np.zeros((2, 1)), np.full((2, 2), 0.5), zeta, eta)
    C = updateConfusion(state, dataset, Hyperparams(alphaC0=1.0, alphaC1=1.0))
    # row 0 has evidence of order 1e-17 and must not fall back to uniform
    assert np.allclose(C, [[1.0, 0.0], [1.0, 0.0]])
    # every observed transition keeps positive mass, so the channel term stays finite
    state.confusion = C
    assert np.isfinite(bound(state, dataset, Hyperparams(alphaC0=1.0, alphaC1=1.0)))

def test_updateConfusion_matches_grid_search():
    rng = makeRng(8)
    for _ in range(3):
        dataset, params, varparams, hyper = randomProblem(rng, U=4, N=2, M=2, D=2)
        state = stateFor(params, varparams)
        C = updateConfusion(state, dataset, hyper)
        assert np.allclose(C.sum(axis=1), 1.0, atol=1e-12)
        grid = np.linspace(1e-4, 1 - 1e-4, 9999)
        for row in range(2):
            def value(p):
                trial = state.confusion.copy()
                trial[row] = [p, 1 - p]
                state.confusion = trial
                return bound(state, dataset, hyper)
            best = grid[int(np.argmax([value(p) for p in grid]))]
            state.confusion = C.copy()
            assert C[row, 0] == pytest.approx(best, abs=1e-3)

def test_updateZeta_evidence_free_and_noiseless():
    dataset = Dataset(features=np.array([[1.0, -1.0], [0.0, 0.0]]), groups=(np.array([1]),), noisyDists=np.array([[0.0, 1.0, 0.0]]))
    W = np.array([[0.5, 0.1], [-0.3, 0.2], [0.0, 0.0]])
    state = FitState(W, np.eye(3), np.full((2, 3), 1 / 3), np.array([[0.0, 1.0, 0.0]]))
    zeta, degenerate = updateZeta(state, dataset)
    assert not degenerate
    assert np.allclose(zeta[0], softmax(W @ dataset.features[0]), atol=1e-15)
    assert np.allclose(zeta[1], [0.0, 1.0, 0.0])

def test_updateZeta_redundant_normalizer_cancels():
    rng = makeRng(9)
    dataset, params, varparams, hyper = randomProblem(rng, U=5, N=3, M=3, D=2)
    state = stateFor(params, varparams)
    zeta, _ = updateZeta(state, dataset)
    logits = dataset.features @ state.weights.T
    evidence = np.zeros_like(logits)
    for p, (i, u) in enumerate(dataset.pairs):
        evidence[u] += np.log(state.confusion) @ state.eta[p]
    withNormalizer = logits - logsumexp(logits, axis=1, keepdims=True) + evidence
    assert np.allclose(zeta, softmax(withNormalizer), atol=1e-12)

def test_updateZeta_all_classes_impossible():
    dataset = Dataset(features=np.zeros((1, 1)), groups=(np.array([0]), np.array([0])), noisyDists=np.zeros((2, 2)))
    # eta demands class 0 from row 1 and class 1 from row 0 of an identity channel
    state = FitState(np.zeros((2, 1)), np.eye(2), np.full((1, 2), 0.5), np.array([[1.0, 0.0], [0.0, 1.0]]))
    zeta, degenerate = updateZeta(state, dataset)
    assert degenerate
    assert np.allclose(zeta, 0.5)

def test_updateEta_singleton_matches_grid_search():
    dataset = singleton([0.7, 0.1])
    hyper = Hyperparams(alphaS=2.0)
    state = FitState(np.zeros((2, 1)), np.full((2, 2), 0.5), np.full((1, 2), 0.5), np.full((1, 2), 0.5))
    new = updateEta(state, dataset, hyper, EtaInnerConfig()).eta
    assert np.allclose(new[0], softmax(2.0 * np.array([0.7, 0.1])), atol=1e-12)

    channel = labelEvidence(state.zeta, state.confusion)[dataset.pairInstances]
    grid = np.linspace(1e-6, 1 - 1e-6, 100001)
    values = [etaObjective(np.array([[p, 1 - p]]), channel, dataset, hyper.alphaS, "meanfield") for p in grid]
    assert new[0, 0] == pytest.approx(grid[int(np.argmax(values))], abs=1e-4)

def test_updateEta_vanishing_alpha_s_is_channel_posterior():
    rng = makeRng(10)
    dataset, params, varparams, _ = randomProblem(rng, U=4, N=2, M=3, D=2)
    hyper = Hyperparams(alphaS=1e-12)
    state = stateFor(params, varparams)
    new = updateEta(state, dataset, hyper, EtaInnerConfig()).eta
    expected = softmax(labelEvidence(state.zeta, state.confusion)[dataset.pairInstances])
    assert np.allclose(new, expected, atol=1e-9)

@pytest.mark.parametrize("sTerm", ["meanfield", "plugin"])
def test_updateEta_keeps_simplex_and_bound(sTerm):
    rng = makeRng(12)
    for _ in range(10):
        dataset, params, varparams, hyper = randomProblem(rng, U=6, N=4, M=3, D=2, maxGroupSize=4)
        state = stateFor(params, varparams)
        before = bound(state, dataset, hyper, sTerm)
        update = updateEta(state, dataset, hyper, EtaInnerConfig(maxIters=200), sTerm=sTerm)
        assert np.max(np.abs(update.eta.sum(axis=1) - 1)) < 1e-12
        assert np.all(update.eta >= 0)
        state.eta = update.eta
        assert bound(state, dataset, hyper, sTerm) >= before - 1e-9

def test_updateEta_stationarity_multipliers():
    rng = makeRng(13)
    dataset, params, varparams, hyper = randomProblem(rng, U=5, N=3, M=3, D=2, maxGroupSize=3)
    state = stateFor(params, varparams)
    update = updateEta(state, dataset, hyper, EtaInnerConfig(maxIters=500, tol=1e-13))
    assert not update.flagged
    state.eta = update.eta
    # the gradient on each simplex is the constant -lambda_iu at the maximizer
    grad = etaGradient(state, dataset, hyper)
    assert np.allclose(grad + update.multipliers[:, None], 0.0, atol=1e-8)
