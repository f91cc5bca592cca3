import numpy as np

from noisy_label_dist.datagen import makeRng
from noisy_label_dist.eval.verify import newtonLogisticMap, verificationSuite
from noisy_label_dist.inference.updates import etaGradient, weightsGradient
from noisy_label_dist.nlyfile import NlyDocument

def test_verificationSuite_passes():
    report = verificationSuite(seed=0)
    assert report.passed, report.toText()
    names = [item.name for item in report.items]
    assert any("lower bound" in name for name in names)
    assert any("logistic" in name for name in names)

def test_verificationSuite_catches_flipped_eta_gradient():
    def flipped(state, dataset, hyper, sTerm="meanfield"):
        return -etaGradient(state, dataset, hyper, sTerm)

    report = verificationSuite(seed=0, etaGradientFn=flipped, instances=3)
    failed = [item.name for item in report.items if not item.passed]
    assert failed
    assert all("eta gradient" in name for name in failed)

def test_verificationSuite_report_document():
    report = verificationSuite(seed=1, instances=2)
    doc = NlyDocument.from_str(report.toBuilder().toString()).expectKind("verification")
    assert doc["passed"] == report.passed
    assert doc["item0_name"] == report.items[0].name

def test_newtonLogisticMap_is_stationary():
    rng = makeRng(0)
    X = rng.normal(size=(12, 3))
    targets = np.eye(3)[rng.integers(0, 3, size=12)]
    W = newtonLogisticMap(X, targets, 0.7)
    assert np.max(np.abs(weightsGradient(W, targets, X, 0.7))) < 1e-9
