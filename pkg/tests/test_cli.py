"""End-to-end checks of the command-line interface.

Most tests call ``main`` in-process and parse the ``key = value`` output;
one subprocess test exercises the installed console script.
"""

import subprocess
import sys

import numpy as np
import pytest

from eigendebias.cli import main
from eigendebias.core import Ordering, eigendecompose, write_matrix, write_vector
from eigendebias.denoise import (
    GroundTruthDenoising,
    estimate_functional_md,
    observe,
    semicircle_b,
)
from eigendebias.pca import (
    SpikedModel,
    estimate_functional_pca,
    estimate_noise_pca,
    sample,
    sample_covariance,
)

SEED = 20260815


def run_cli(capsys, *argv):
    code = main([str(arg) for arg in argv])
    captured = capsys.readouterr()
    pairs = {}
    for line in captured.out.splitlines():
        key, sep, value = line.partition(" = ")
        if sep:
            pairs[key] = value
    return code, pairs, captured


# ---------------------------------------------------------------------------
# estimate-md
# ---------------------------------------------------------------------------


@pytest.fixture()
def md_inputs(tmp_path):
    model = GroundTruthDenoising.canonical(30, (9.0, 5.0), 0.5)
    observed = observe(model, SEED)
    a = (np.eye(30)[0] + np.eye(30)[1]) / np.sqrt(2.0)
    matrix_path = tmp_path / "observed.csv"
    a_path = tmp_path / "a.csv"
    write_matrix(matrix_path, observed.entries)
    write_vector(a_path, a)
    return observed, a, matrix_path, a_path


def test_estimate_md_matches_api(capsys, md_inputs):
    observed, a, matrix_path, a_path = md_inputs
    est = estimate_functional_md(observed, a, 1, 2, 0.5)
    code, out, _ = run_cli(
        capsys,
        "estimate-md", "--matrix", matrix_path, "--a", a_path,
        "--l", 1, "--rank", 2, "--sigma", 0.5,
    )
    assert code == 0
    assert out["correction_source"] == "bulk_sum"
    assert float(out["lambda_l"]) == est.lambda_l
    assert float(out["plugin"]) == est.plugin
    assert float(out["correction"]) == est.correction
    assert float(out["factor"]) == est.factor
    assert float(out["debiased"]) == est.debiased


def test_estimate_md_semicircle_flag(capsys, md_inputs):
    observed, a, matrix_path, a_path = md_inputs
    est = estimate_functional_md(observed, a, 1, 2, 0.5)
    expected = semicircle_b(est.lambda_l, 0.5, 30)
    code, out, _ = run_cli(
        capsys,
        "estimate-md", "--matrix", matrix_path, "--a", a_path,
        "--l", 1, "--rank", 2, "--sigma", 0.5, "--semicircle",
    )
    assert code == 0
    assert out["correction_source"] == "semicircle"
    assert float(out["correction"]) == expected
    assert float(out["debiased"]) == pytest.approx(
        np.sqrt(1.0 + expected) * est.plugin, rel=1e-15
    )


def test_estimate_md_missing_file_exits_2(capsys, tmp_path):
    a_path = tmp_path / "a.csv"
    write_vector(a_path, np.eye(3)[0])
    code, _, captured = run_cli(
        capsys,
        "estimate-md", "--matrix", tmp_path / "nope.csv", "--a", a_path,
        "--l", 1, "--rank", 1, "--sigma", 1.0,
    )
    assert code == 2
    assert "error:" in captured.err


def test_estimate_md_near_edge_exits_3(capsys, tmp_path):
    # top eigenvalue barely clears the bulk edge: the semicircle quadrature
    # diverges there and must surface as a numerical failure, not a number
    n = 25
    matrix = np.zeros((n, n))
    matrix[0, 0] = np.sqrt(n) * (2.0 + 2e-6)
    matrix_path = tmp_path / "edge.csv"
    a_path = tmp_path / "a.csv"
    write_matrix(matrix_path, matrix)
    write_vector(a_path, np.eye(n)[0])
    code, _, captured = run_cli(
        capsys,
        "estimate-md", "--matrix", matrix_path, "--a", a_path,
        "--l", 1, "--rank", 1, "--sigma", 1.0, "--semicircle",
    )
    assert code == 3
    assert "numerical failure:" in captured.err


# ---------------------------------------------------------------------------
# estimate-pca
# ---------------------------------------------------------------------------


@pytest.fixture()
def pca_inputs(tmp_path):
    model = SpikedModel.canonical(6, 40, (7.0,), 1.0)
    data = sample(model, SEED)
    data_path = tmp_path / "data.csv"
    a_path = tmp_path / "a.csv"
    write_matrix(data_path, data)
    write_vector(a_path, model.spike_vector(1))
    return model, data, data_path, a_path


def test_estimate_pca_matches_api(capsys, pca_inputs):
    model, data, data_path, a_path = pca_inputs
    est = estimate_functional_pca(data, model.spike_vector(1), 1, 1, 1.0)
    code, out, _ = run_cli(
        capsys,
        "estimate-pca", "--data", data_path, "--a", a_path,
        "--l", 1, "--rank", 1, "--sigma2", 1.0,
    )
    assert code == 0
    assert out["branch"] == "n_ge_p"
    assert float(out["lambda_l"]) == est.lambda_l
    assert float(out["plugin"]) == est.plugin
    assert float(out["correction"]) == est.correction
    assert float(out["debiased"]) == est.debiased
    assert "sigma2_estimated" not in out


def test_estimate_pca_noise_estimation(capsys, pca_inputs):
    model, data, data_path, a_path = pca_inputs
    spec = eigendecompose(sample_covariance(data), Ordering.BY_VALUE_DESC)
    sigma2 = estimate_noise_pca(spec, 1, data.shape[1])
    est = estimate_functional_pca(data, model.spike_vector(1), 1, 1, sigma2)
    code, out, _ = run_cli(
        capsys,
        "estimate-pca", "--data", data_path, "--a", a_path,
        "--l", 1, "--rank", 1, "--estimate-noise",
    )
    assert code == 0
    assert float(out["sigma2_estimated"]) == sigma2
    assert float(out["debiased"]) == est.debiased


def test_estimate_pca_noise_flags_are_exclusive(pca_inputs):
    _, _, data_path, a_path = pca_inputs
    with pytest.raises(SystemExit) as excinfo:
        main(
            [
                "estimate-pca", "--data", str(data_path), "--a", str(a_path),
                "--l", "1", "--rank", "1", "--sigma2", "1.0", "--estimate-noise",
            ]
        )
    assert excinfo.value.code == 2


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


def test_experiment_end_to_end(capsys, tmp_path):
    out_a = tmp_path / "a.csv"
    config = tmp_path / "study.cfg"
    config.write_text(
        "model_kind = denoise\n"
        "trials = 3\n"
        "seed = 11\n"
        f"output_path = {out_a}\n"
        "sweep = n=12 lambda=8.0 sigma=0.5\n"
        "sweep = n=16 lambda=8.0 sigma=0.5\n"
        "sweep = n=24 lambda=8.0 sigma=0.5\n"
    )
    code, out, captured = run_cli(capsys, "experiment", "--config", config)
    assert code == 0
    assert out_a.exists()
    lines = captured.out.splitlines()
    assert sum(1 for line in lines if line.startswith("instance=")) == 3
    assert "slope_debiased" in out
    assert lines[-1] == f"wrote {out_a}"

    out_b = tmp_path / "b.csv"
    code, _, _ = run_cli(
        capsys, "experiment", "--config", config, "--out", out_b, "--workers", 2
    )
    assert code == 0
    assert out_a.read_bytes() == out_b.read_bytes()


def test_experiment_missing_config_exits_2(capsys, tmp_path):
    code, _, captured = run_cli(
        capsys, "experiment", "--config", tmp_path / "absent.cfg"
    )
    assert code == 2
    assert "error:" in captured.err


# ---------------------------------------------------------------------------
# verify-master
# ---------------------------------------------------------------------------


def test_verify_master_reports_clean_run(capsys):
    code, out, _ = run_cli(
        capsys, "verify-master", "--trials", 10, "--n", 12, "--seed", 123
    )
    assert code == 0
    assert out["vector_trials"] == "10"
    assert out["general_trials"] == "10"
    assert out["failures"] == "0"
    assert float(out["worst_relative_gap"]) < 1e-8


# ---------------------------------------------------------------------------
# lowerbound
# ---------------------------------------------------------------------------


def test_lowerbound_rotation(capsys):
    code, out, _ = run_cli(
        capsys,
        "lowerbound", "rotation", "--p", 6, "--n", 60, "--lambdas", "4.0,2.0",
        "--sigma2", 1.0, "--l", 1, "--k", 2, "--cn", 0.0625,
    )
    assert code == 0
    assert float(out["theta_n"]) > 0.0
    assert float(out["kl"]) <= 1.0 / 16.0 + 1e-15
    assert float(out["kl_gap"]) < 1e-9
    assert float(out["frobenius_gap"]) >= 0.0


def test_lowerbound_rotation_equal_spikes_exits_2(capsys):
    code, _, captured = run_cli(
        capsys,
        "lowerbound", "rotation", "--p", 6, "--n", 60, "--lambdas", "3.0,3.0",
        "--sigma2", 1.0, "--l", 1, "--k", 2, "--cn", 0.0625,
    )
    assert code == 2
    assert "error:" in captured.err


def test_lowerbound_direction(capsys):
    code, out, _ = run_cli(
        capsys,
        "lowerbound", "direction", "--p", 8, "--n", 300, "--lambdas", "5.0",
        "--sigma2", 1.0, "--l", 1, "--cn", 0.0625, "--seed", 7,
    )
    assert code == 0
    assert 0.0 < float(out["delta_n"]) <= 1.0
    assert float(out["kl"]) <= 1.0 / 16.0 + 1e-15
    assert float(out["kl_gap"]) < 1e-7


def test_lowerbound_plugin(capsys):
    code, out, _ = run_cli(
        capsys,
        "lowerbound", "plugin", "--n", 40, "--lambdas", "63.0",
        "--sigma", 1.0, "--l", 1, "--trials", 30, "--seed", SEED,
    )
    assert code == 0
    assert out["trials"] == "30"
    assert float(out["bias_scale"]) > 0.0
    probs = [float(out[f"p_exceed_{t}"]) for t in (0.25, 0.5, 1.0)]
    assert all(0.0 <= p <= 1.0 for p in probs)
    assert probs[0] >= probs[1] >= probs[2]


def test_lowerbound_plugin_infeasible_exits_2(capsys):
    code, _, captured = run_cli(
        capsys,
        "lowerbound", "plugin", "--n", 40, "--lambdas", "1.0",
        "--sigma", 1.0, "--l", 1, "--trials", 5, "--seed", SEED,
    )
    assert code == 2
    assert "error:" in captured.err


# ---------------------------------------------------------------------------
# console script
# ---------------------------------------------------------------------------


def test_console_script_runs():
    proc = subprocess.run(
        ["eigendebias", "verify-master", "--trials", "5", "--n", "10", "--seed", "3"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert "failures = 0" in proc.stdout
