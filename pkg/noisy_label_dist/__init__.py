from noisy_label_dist.model import Dataset, FitResult, Hyperparams, ModelParams, VariationalParams
from noisy_label_dist.datagen import GenConfig, SyntheticTruth, generate
from noisy_label_dist.inference import FitConfig, fit, predict
from noisy_label_dist.baselines import mtenFit, regressPredictLabel, ridgeFit

def nlyCommand():
    import sys
    from noisy_label_dist.cli import main

    sys.exit(main())
