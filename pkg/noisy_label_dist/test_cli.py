import os
import numpy as np
import pytest

from noisy_label_dist.cli import main
from noisy_label_dist.inference import predict
from noisy_label_dist.model import Dataset, ModelParams
from noisy_label_dist.nlyfile import NlyDocument

GEN = ["generate", "--u", "30", "--n", "20", "--group-size", "5", "--m", "3", "--d", "3", "--seed", "4"]

def read(path):
    with open(path, "rb") as f:
        return f.read()

def generated(tmp_path, name="data"):
    out = tmp_path / name
    assert main(GEN + ["--out", str(out)]) == 0
    return out

def test_generate_writes_files_and_summary(tmp_path, capsys):
    out = generated(tmp_path)
    assert (out / "dataset.nly").exists() and (out / "truth.nly").exists()
    assert "generated U=30 N=20 M=3 D=3 seed=4" in capsys.readouterr().out
    dataset = Dataset.from_file(out / "dataset.nly")
    assert dataset.numGroups == 20

def test_generate_is_byte_identical(tmp_path):
    a = generated(tmp_path, "a")
    b = generated(tmp_path, "b")
    assert read(a / "dataset.nly") == read(b / "dataset.nly")
    assert read(a / "truth.nly") == read(b / "truth.nly")

def test_generate_structured_summary(tmp_path, capsys):
    assert main(GEN + ["--out", str(tmp_path), "--format", "structured"]) == 0
    doc = NlyDocument.from_str(capsys.readouterr().out).expectKind("summary")
    assert doc["U"] == 30 and doc["seed"] == 4

def test_generate_rejects_oversized_groups(tmp_path):
    assert main(["generate", "--group-size", "200", "--u", "100", "--out", str(tmp_path)]) == 2
    assert not (tmp_path / "dataset.nly").exists()

def test_fit_round_trip_and_determinism(tmp_path):
    data = generated(tmp_path)
    args = ["fit", str(data / "dataset.nly"), "--max-sweeps", "15", "--truth", str(data / "truth.nly")]
    assert main(args + ["--out", str(tmp_path / "f1")]) == 0
    assert main(args + ["--out", str(tmp_path / "f2")]) == 0
    assert read(tmp_path / "f1" / "model.nly") == read(tmp_path / "f2" / "model.nly")
    assert read(tmp_path / "f1" / "fit.nly") == read(tmp_path / "f2" / "fit.nly")

    dataset = Dataset.from_file(data / "dataset.nly")
    params = ModelParams.from_file(tmp_path / "f1" / "model.nly")
    report = NlyDocument.from_file(tmp_path / "f1" / "fit.nly").expectKind("fit")
    assert 0.0 <= report["accuracy"] <= 1.0
    assert len(report["elbo_trace"]) == report["sweeps"]
    assert np.array_equal(report["predicted_labels"], np.argmax(report["zeta"], axis=1))
    assert predict(params, dataset.features).shape == (30,)

def test_fit_single_sweep(tmp_path):
    data = generated(tmp_path)
    assert main(["fit", str(data / "dataset.nly"), "--max-sweeps", "1", "--out", str(tmp_path / "fit")]) == 0
    report = NlyDocument.from_file(tmp_path / "fit" / "fit.nly")
    assert len(report["elbo_trace"]) == 1
    assert report["converged"] is False

def test_fit_check_gradients_lines(tmp_path, capsys):
    data = generated(tmp_path)
    capsys.readouterr()
    assert main(["fit", str(data / "dataset.nly"), "--max-sweeps", "5", "--check-gradients", "--out", str(tmp_path / "fit")]) == 0
    out = capsys.readouterr().out
    assert "PASS weights gradient" in out
    assert "PASS eta gradient" in out
    report = NlyDocument.from_file(tmp_path / "fit" / "fit.nly")
    assert report["check0_passed"] is True

def test_fit_missing_dataset(tmp_path):
    assert main(["fit", str(tmp_path / "nope.nly"), "--out", str(tmp_path)]) == 3

def test_fit_rejects_unknown_version(tmp_path):
    path = tmp_path / "bad.nly"
    path.write_text("nly/2 dataset\nend\n")
    assert main(["fit", str(path), "--out", str(tmp_path)]) == 3

def test_fit_config_file_precedence(tmp_path):
    data = generated(tmp_path)
    config = tmp_path / "fit.json"
    config.write_text('{\n  // keys are flag destinations\n  "max_sweeps": 1,\n  "alpha_c1": 5.0\n}\n')
    assert main(["fit", str(data / "dataset.nly"), "--config", str(config), "--out", str(tmp_path / "a")]) == 0
    assert len(NlyDocument.from_file(tmp_path / "a" / "fit.nly")["elbo_trace"]) == 1
    assert NlyDocument.from_file(tmp_path / "a" / "model.nly")["alpha_c1"] == 5.0

    assert main(["fit", str(data / "dataset.nly"), "--config", str(config), "--max-sweeps", "2", "--tol", "1e-300", "--out", str(tmp_path / "b")]) == 0
    assert len(NlyDocument.from_file(tmp_path / "b" / "fit.nly")["elbo_trace"]) == 2

def test_config_rejects_unknown_keys(tmp_path):
    data = generated(tmp_path)
    config = tmp_path / "bad.json"
    config.write_text('{"max_sweep": 3}')
    assert main(["fit", str(data / "dataset.nly"), "--config", str(config), "--out", str(tmp_path)]) == 2

@pytest.mark.parametrize("method", ["ridge", "mten"])
def test_baseline_command(tmp_path, method):
    data = generated(tmp_path)
    out = tmp_path / method
    assert main(["baseline", str(data / "dataset.nly"), "--method", method, "--out", str(out)]) == 0
    doc = NlyDocument.from_file(out / "baseline.nly").expectKind("baseline")
    assert doc["method"] == method
    assert len(doc["predicted_labels"]) == 30
    assert 0.0 <= doc["accuracy"] <= 1.0

def test_verify_command(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path)]) == 0
    assert "FAIL" not in capsys.readouterr().out
    assert NlyDocument.from_file(tmp_path / "verification.nly")["passed"] is True

def test_reproduce_method_filter(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("NLY_THREADS", "1")
    args = [
        "reproduce", "--seeds", "1", "--methods", "ridge", "--no-cv",
        "--u", "30", "--n", "30", "--group-size", "5", "--m", "3", "--d", "3",
        "--inductive-count", "20", "--out", str(tmp_path)
    ]
    assert main(args) == 0
    doc = NlyDocument.from_file(tmp_path / "report.nly").expectKind("report")
    assert doc["transductive_mean"].shape == (1, 3)
    assert np.all(doc["transductive_std"] == 0.0)
    assert (tmp_path / "report.txt").read_text() in capsys.readouterr().out

def test_reproduce_rejects_unknown_method(tmp_path):
    assert main(["reproduce", "--methods", "lasso", "--out", str(tmp_path)]) == 2

def test_baseline_warning_does_not_abort(tmp_path, capsys):
    data = generated(tmp_path)
    args = ["baseline", str(data / "dataset.nly"), "--method", "mten", "--mten-iters", "1", "--mten-tol", "1e-15"]
    assert main(args + ["--out", str(tmp_path / "m")]) == 0
    assert "did not converge" in capsys.readouterr().err

def test_fit_rejects_negative_seed(tmp_path):
    data = generated(tmp_path)
    assert main(["fit", str(data / "dataset.nly"), "--seed", "-1", "--out", str(tmp_path / "f")]) == 2

def test_verify_rejects_negative_seed(tmp_path):
    assert main(["verify", "--seed", "-1", "--out", str(tmp_path)]) == 2

def test_verbose_from_config_file(tmp_path, capsys):
    data = generated(tmp_path)
    capsys.readouterr()
    config = tmp_path / "verbose.json"
    config.write_text('{"verbose": true, "max_sweeps": 2}')
    assert main(["fit", str(data / "dataset.nly"), "--config", str(config), "--out", str(tmp_path / "f")]) == 0
    assert "fit finished after" in capsys.readouterr().err
