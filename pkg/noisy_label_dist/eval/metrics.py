import numpy as np

from noisy_label_dist.util import ConfigError

def accuracy(predicted, truth) -> float:
    predicted = np.asarray(predicted).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if predicted.shape != truth.shape:
        raise ConfigError(f"cannot score {predicted.shape[0]} predictions against {truth.shape[0]} labels")
    if truth.shape[0] == 0:
        raise ConfigError("nothing to score")
    return float(np.mean(predicted == truth))
