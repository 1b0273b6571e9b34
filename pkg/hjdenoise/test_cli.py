import json

import numpy as np
import pytest

from hjdenoise.cli import (
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_USAGE,
    RunManifest,
    load_observation,
    main,
    noise_kind_for,
    read_sidecar,
    residual_display,
)
from hjdenoise.errors import InputError
from hjdenoise.image_io import image_read, image_write
from hjdenoise.noise_sim import NoiseKind


@pytest.fixture
def clean(tmp_path):
    path = tmp_path / "clean.txt"
    assert main(["phantom", "--shape", "piecewise", "--rows", "8", "--cols", "8", "--out", str(path)]) == EXIT_OK
    return path


def add_noise(clean, out, *extra):
    return main(["noise", "--in", str(clean), "--out", str(out), "--model", "poisson-logtv",
                 "--t", "20", "--seed", "7", *extra])


def test_phantom_command(clean):
    image = image_read(clean)
    assert image.shape == (8, 8)
    assert image.min() == 0.2
    assert image.max() == 0.8


def test_noise_writes_observation_counts_and_sidecar(clean, tmp_path):
    out = tmp_path / "obs.txt"
    assert add_noise(clean, out) == EXIT_OK
    meta = read_sidecar(out)
    assert meta == {"kind": "poisson", "t": "20.0", "seed": "7", "rows": "8", "cols": "8",
                    "counts": "obs.txt.counts"}
    counts = image_read(tmp_path / "obs.txt.counts")
    np.testing.assert_array_equal(counts, np.round(counts))
    np.testing.assert_array_equal(image_read(out), counts / 20.0)


def test_noise_is_byte_identical_across_runs(clean, tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    first.mkdir()
    second.mkdir()
    assert add_noise(clean, first / "obs.txt") == EXIT_OK
    assert add_noise(clean, second / "obs.txt") == EXIT_OK
    for name in ("obs.txt", "obs.txt.counts", "obs.txt.meta"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_denoise_end_to_end(clean, tmp_path):
    obs, restored, report = tmp_path / "obs.txt", tmp_path / "restored.txt", tmp_path / "report.json"
    assert add_noise(clean, obs) == EXIT_OK
    code = main(["denoise", "--in", str(obs), "--model", "poisson-logtv", "--alpha", "0.5",
                 "--out", str(restored), "--report", str(report), "--max-iter", "20000"])
    assert code == EXIT_OK

    v_bar = image_read(restored)
    observed = image_read(tmp_path / "obs.txt.counts") / 20.0
    payload = json.loads(report.read_text())
    assert payload["converged"] is True
    assert payload["t"] == 20.0
    assert payload["residual_norm"] == pytest.approx(float(np.linalg.norm(observed - v_bar)), rel=1e-12)
    assert (tmp_path / "restored.residual.pgm").exists()


def test_denoise_constant_image_has_flat_residual(tmp_path):
    obs = tmp_path / "flat.txt"
    image_write(obs, np.full((4, 4), 2.0))
    residual = tmp_path / "flat_residual.pgm"
    code = main(["denoise", "--in", str(obs), "--t", "5", "--model", "mult-invtv", "--alpha", "0.3",
                 "--out", str(tmp_path / "out.txt"), "--residual-out", str(residual)])
    assert code == EXIT_OK
    assert set(np.unique(image_read(residual))) <= {127.0, 128.0}


def test_denoise_reports_non_convergence(clean, tmp_path):
    obs = tmp_path / "obs.txt"
    add_noise(clean, obs)
    code = main(["denoise", "--in", str(obs), "--model", "poisson-tv", "--alpha", "0.5",
                 "--out", str(tmp_path / "r.txt"), "--max-iter", "2"])
    assert code == EXIT_SOLVER


def test_usage_errors(clean, tmp_path):
    missing = tmp_path / "missing.txt"
    assert main(["denoise", "--in", str(missing), "--model", "poisson-tv", "--alpha", "0.5", "--t", "1",
                 "--out", str(tmp_path / "r.txt")]) == EXIT_USAGE
    # no sidecar and no --t
    assert main(["denoise", "--in", str(clean), "--model", "poisson-tv", "--alpha", "0.5",
                 "--out", str(tmp_path / "r.txt")]) == EXIT_USAGE
    assert main(["denoise", "--in", str(clean), "--model", "poisson-tv", "--alpha", "-1", "--t", "1",
                 "--out", str(tmp_path / "r.txt")]) == EXIT_USAGE
    assert main(["noise", "--in", str(clean), "--out", str(tmp_path / "o.txt"), "--kind",
                 "gamma_multiplicative", "--t", "2.5"]) == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["denoise", "--in", str(clean)])
    assert info.value.code == EXIT_USAGE


def test_compare_needs_two_models(clean, tmp_path):
    obs = tmp_path / "obs.txt"
    add_noise(clean, obs)
    assert main(["compare", "--in", str(obs), "--model-a", "poisson-tv", "--alpha-a", "0.1",
                 "--model-b", "poisson-tv"]) == EXIT_USAGE


def test_verify_bregman_suite(tmp_path):
    report = tmp_path / "bregman.csv"
    assert main(["verify", "--suite", "bregman", "--report", str(report)]) == EXIT_OK
    lines = report.read_text().splitlines()
    assert lines[0] == "suite,case,residual,tolerance,passed,detail"
    assert len(lines) > 1


def test_hj_eval_reports_sample(tmp_path):
    x, report = tmp_path / "x.txt", tmp_path / "hj.json"
    image_write(x, np.array([[1.0, 4.0]]))
    assert main(["hj-eval", "--in", str(x), "--t", "1", "--alpha", "0.3", "--report", str(report)]) == EXIT_OK
    payload = json.loads(report.read_text())
    expected = 1.3 * np.log(1.3) - 1.3 + 3.7 * np.log(3.7) - 3.7
    assert payload["S"] == pytest.approx(expected, abs=1e-8)
    assert payload["hamiltonian"] == "poisson_exp"


def test_hj_eval_uses_the_model_hamiltonian(tmp_path):
    x, report = tmp_path / "x.txt", tmp_path / "hj.json"
    image_write(x, np.array([[1.0, 3.0]]))
    assert main(["hj-eval", "--in", str(x), "--t", "1", "--alpha", "0.2", "--model", "mult-invtv",
                 "--report", str(report)]) == EXIT_OK
    payload = json.loads(report.read_text())
    assert payload["hamiltonian"] == "burg_neglog"
    assert payload["model"] == "mult-invtv"
    np.testing.assert_allclose(payload["v_admm"], [[1.2, 2.8]], atol=1e-6)
    np.testing.assert_allclose(payload["v_from_F"], [[1.2, 2.8]], atol=1e-2)


def test_load_observation_prefers_counts(tmp_path):
    obs = tmp_path / "obs.txt"
    image_write(obs, np.array([[0.1, 0.2]]))
    image_write(tmp_path / "obs.txt.counts", np.array([[1.0, 2.0]]))
    (tmp_path / "obs.txt.meta").write_text("t=10.0\ncounts=obs.txt.counts\n")
    x, t, observed = load_observation(obs, None)
    np.testing.assert_array_equal(x, [[1.0, 2.0]])
    assert t == 10.0
    np.testing.assert_array_equal(observed, [[0.1, 0.2]])
    (tmp_path / "obs.txt.meta").write_text("seed=3\n")
    with pytest.raises(InputError):
        load_observation(obs, None)


def test_helpers():
    assert noise_kind_for("poisson-tv") is NoiseKind.POISSON
    assert noise_kind_for("mult-logtv") is NoiseKind.GAMMA_MULTIPLICATIVE
    np.testing.assert_array_equal(residual_display(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])), [[1.0, 0.0]])
    with pytest.raises(ValueError):
        RunManifest(command="denoise")
