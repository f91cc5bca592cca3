import itertools
import math
import numpy as np
from scipy.special import logsumexp

from noisy_label_dist.model import Dataset, Hyperparams, ModelParams
from noisy_label_dist.model.density import LOG_2PI, classLogits
from noisy_label_dist.util import ConfigError

MAX_ASSIGNMENTS = 10 ** 6

def exactLogMarginal(params: ModelParams, dataset: Dataset, hyper: Hyperparams) -> float:
    """
    log sum_{T,Y} p(S|T) p(T|Y,C) p(Y|W,X) by visiting every joint label assignment.

    Priors on W and C are not included. Given Y the groups are independent,
    so each group's sum over its own T is taken before multiplying across
    groups; every (T, Y) combination still contributes exactly once.
    """
    M = dataset.numClasses
    U = dataset.numInstances
    P = int(dataset.groupSizes.sum()) if dataset.numGroups > 0 else 0
    if (U + P) * math.log(M) > math.log(MAX_ASSIGNMENTS) + 1e-9:
        raise ConfigError(f"{M}^{U + P} assignments is too many to enumerate")

    logits = classLogits(params.weights, dataset.features)
    logLabels = logits - logsumexp(logits, axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        logC = np.log(params.confusion)

    alphaS = hyper.alphaS
    normalizer = (M / 2) * (math.log(alphaS) - LOG_2PI)

    # observation log density for every channel assignment of every group
    groupTables = []
    for i, group in enumerate(dataset.groups):
        n = len(group)
        assignments = np.array(list(itertools.product(range(M), repeat=n)), dtype=int)
        means = np.zeros((len(assignments), M))
        for k in range(n):
            means[np.arange(len(assignments)), assignments[:, k]] += 1.0 / n
        logS = normalizer - (alphaS / 2) * np.sum((dataset.noisyDists[i] - means) ** 2, axis=1)
        groupTables.append((group, assignments, logS))

    totals = []
    for labels in itertools.product(range(M), repeat=U):
        labels = np.array(labels, dtype=int)
        total = float(np.sum(logLabels[np.arange(U), labels]))
        for group, assignments, logS in groupTables:
            channel = np.sum(logC[labels[group][None, :], assignments], axis=1)
            total += float(logsumexp(logS + channel))
        totals.append(total)

    return float(logsumexp(totals))
