import numpy as np
import pytest

from noisy_label_dist.datagen import GenConfig, generate, makeRng
from noisy_label_dist.eval.cv import (
    CvSpec, crossValidate, defaultModelGrid, defaultMtenGrid, defaultRidgeGrid, foldAssignment,
    heldOutError, modelProcedure, ridgeProcedure, ridgeStrength
)
from noisy_label_dist.inference import FitConfig
from noisy_label_dist.model import Dataset, Hyperparams
from noisy_label_dist.util import ConfigError

def smallDataset(seed=0):
    dataset, _ = generate(GenConfig(U=30, N=24, groupSize=5, M=3, D=3, seed=seed))
    return dataset.withoutLabels()

def test_foldAssignment_partitions_groups():
    folds = foldAssignment(4, 2, seed=0)
    assert [len(f) for f in folds] == [2, 2]
    assert sorted(np.concatenate(folds).tolist()) == [0, 1, 2, 3]
    folds = foldAssignment(10, 3, seed=1)
    assert sorted(len(f) for f in folds) == [3, 3, 4]
    with pytest.raises(ConfigError):
        foldAssignment(2, 3, seed=0)

def test_cvSpec_validation():
    with pytest.raises(ConfigError):
        CvSpec(grid=[])
    with pytest.raises(ConfigError):
        CvSpec(grid=[1.0], folds=1)

def test_crossValidate_single_point():
    dataset = smallDataset()
    outcome = crossValidate(dataset, CvSpec(grid=[0.3]), ridgeProcedure())
    assert outcome.best == 0.3
    assert len(outcome.scores) == 1

def test_crossValidate_fewer_groups_than_folds():
    dataset = smallDataset().subsetGroups([0, 1])
    with pytest.raises(ConfigError):
        crossValidate(dataset, CvSpec(grid=[1.0], folds=3), ridgeProcedure())

def test_heldOutError_perfect_oracle():
    dataset = smallDataset()
    lookup = {tuple(g): s for g, s in zip(dataset.groups, dataset.noisyDists)}
    assert heldOutError(dataset, np.arange(dataset.numGroups), lambda members: lookup[tuple(members)]) == 0.0

def test_crossValidate_averages_fold_scores():
    dataset = smallDataset().subsetGroups([0, 1, 2, 3])
    calls = []

    def procedure(train, point):
        calls.append(train.numGroups)
        return lambda members: np.full(dataset.numClasses, point)

    outcome = crossValidate(dataset, CvSpec(grid=[0.0, 0.5], folds=2), procedure)
    assert calls == [2, 2, 2, 2]
    expected = [float(np.mean((dataset.noisyDists - v) ** 2)) for v in (0.0, 0.5)]
    assert outcome.scores == pytest.approx(expected)

def test_crossValidate_ties_prefer_strongest_regularization():
    dataset = smallDataset()
    constant = lambda train, point: (lambda members: np.zeros(dataset.numClasses))
    outcome = crossValidate(dataset, CvSpec(grid=[0.1, 10.0, 1.0], strength=ridgeStrength), constant)
    assert outcome.best == 10.0

def test_crossValidate_model_grid():
    dataset = smallDataset()
    grid = [Hyperparams(alphaW=1.0, alphaC1=10.0), Hyperparams(alphaW=10.0, alphaC1=10.0)]
    outcome = crossValidate(dataset, CvSpec(grid=grid, folds=2), modelProcedure(FitConfig(maxSweeps=10)))
    assert outcome.best in grid
    assert all(np.isfinite(outcome.scores))

def test_default_grids():
    assert len(defaultRidgeGrid()) == 7
    assert defaultRidgeGrid()[0] == pytest.approx(1e-3)
    assert len(defaultMtenGrid()) == 21
    assert all(h.alphaS == 100.0 for h in defaultModelGrid())

@pytest.mark.slow
def test_crossValidate_ranks_generating_hyperparams_high():
    grid = defaultModelGrid()
    generating = GenConfig().hyper
    ranks = []
    for seed in range(1, 6):
        dataset, _ = generate(GenConfig(U=60, N=60, groupSize=10, M=3, D=3, seed=seed))
        outcome = crossValidate(dataset.withoutLabels(), CvSpec(grid=grid, folds=3, seed=seed), modelProcedure(FitConfig(maxSweeps=30)))
        order = np.argsort(outcome.scores, kind="stable")
        ranks.append(int(np.flatnonzero(order == grid.index(generating))[0]))
    # 0-based ranks; the top half of six points is ranks 0..2
    assert np.mean(ranks) < len(grid) / 2
