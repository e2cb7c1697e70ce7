"""Both kernel backends must agree to float64 reproduction accuracy."""

import numpy as np
import pytest

from polarview import _kernels

BACKENDS = [("numpy", False)] + ([("numba", True)] if _kernels.HAS_NUMBA else [])


def impl(name, use_numba):
    return getattr(_kernels, f"{name}_{'numba' if use_numba else 'numpy'}")


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(71)


def test_backend_reports_a_known_name():
    assert _kernels.backend() in ("numpy", "numba")


def test_warmup_runs():
    _kernels.warmup()


@pytest.mark.parametrize("name,use_numba", BACKENDS)
def test_decode_paths_agree(name, use_numba, rng):
    enc = rng.normal(0, 3, size=(500, 9))
    out = impl("decode_boxes", use_numba)(enc, 50.0, -5.0, 3.0)
    ref = _kernels.decode_boxes_numpy(enc, 50.0, -5.0, 3.0)
    np.testing.assert_allclose(out, ref, rtol=1e-15, atol=1e-300)
    # decoded invariants hold on both paths
    assert (out[:, 0] >= 0).all() and (out[:, 0] <= 50.0).all()
    np.testing.assert_allclose(out[:, 1] ** 2 + out[:, 2] ** 2, 1.0, atol=1e-12)
    assert (out[:, 4:7] > 0).all()


@pytest.mark.parametrize("name,use_numba", BACKENDS)
def test_cost_matrix_paths_agree(name, use_numba, rng):
    gt = np.column_stack(
        [rng.uniform(0, 50, 17), rng.uniform(-1, 1, 17), rng.uniform(-1, 1, 17)]
    )
    pred = np.column_stack(
        [rng.uniform(0, 50, 23), rng.uniform(-1, 1, 23), rng.uniform(-1, 1, 23)]
    )
    out = impl("polar_cost_matrix", use_numba)(gt, pred, 20.0)
    ref = _kernels.polar_cost_matrix_numpy(gt, pred, 20.0)
    assert out.shape == (17, 23)
    np.testing.assert_allclose(out, ref, rtol=1e-15, atol=0)


@pytest.mark.parametrize("name,use_numba", BACKENDS)
def test_bilinear_paths_agree(name, use_numba, rng):
    grid = rng.uniform(-2, 2, size=(9, 13, 4))
    pts = np.column_stack([rng.uniform(-3, 15, 300), rng.uniform(-3, 11, 300)])
    vals, valid = impl("bilinear_many", use_numba)(grid, pts)
    ref_vals, ref_valid = _kernels.bilinear_many_numpy(grid, pts)
    np.testing.assert_array_equal(valid, ref_valid)
    np.testing.assert_allclose(vals, ref_vals, rtol=1e-14, atol=1e-14)
    assert np.all(vals[~valid] == 0.0)


@pytest.mark.parametrize("name,use_numba", BACKENDS)
def test_pairwise_distance_paths_agree(name, use_numba, rng):
    a = rng.normal(0, 10, size=(40, 2))
    b = rng.normal(0, 10, size=(31, 2))
    out = impl("pairwise_distances", use_numba)(a, b)
    ref = _kernels.pairwise_distances_numpy(a, b)
    np.testing.assert_allclose(out, ref, rtol=1e-15, atol=0)
    assert out.min() >= 0.0


def test_env_flag_selects_numpy(tmp_path):
    # a fresh interpreter with POLARVIEW_NUMBA=0 must bind the numpy path
    import subprocess
    import sys

    code = "import polarview; print(polarview.backend())"
    result = subprocess.run(
        [sys.executable, "-c", code],
        env={"POLARVIEW_NUMBA": "0", "PATH": "/usr/bin:/bin"},
        capture_output=True,
        text=True,
        check=True,
    )
    assert result.stdout.strip() == "numpy"
