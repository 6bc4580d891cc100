import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kreinsl.core import (
    GridSpec,
    MatrixGrid,
    ParseError,
    SpectralData,
    TriangularKernel,
    ValidationError,
    bin_index,
    g2_norm,
    load_matrix_grid,
    load_spectral_data,
    resample_matrix_grid,
    save_matrix_grid,
    save_spectral_data,
    trapezoid_weights,
)


def test_gridspec_rejects_small_m():
    with pytest.raises(ValidationError):
        GridSpec(4)


def test_trapezoid_weights_m2_equivalent():
    w = trapezoid_weights(GridSpec(8))
    assert w[0] == w[-1] == 1.0 / 16
    assert np.all(w[1:-1] == 1.0 / 8)
    assert w.sum() == 1.0


def test_trapezoid_weights_sum_exact():
    for m in (8, 64, 257):
        assert trapezoid_weights(GridSpec(m)).sum() == pytest.approx(1.0, abs=0)


def test_trapezoid_exact_on_linear():
    spec = GridSpec(8)
    w = trapezoid_weights(spec)
    x = spec.points()
    assert abs(w @ x - 0.5) < 1e-15
    assert abs(w @ (3.0 * x - 1.0) - 0.5) < 1e-15


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=8, max_value=300),
       st.floats(-5, 5, allow_nan=False), st.floats(-5, 5, allow_nan=False))
def test_trapezoid_linear_property(m, a, b):
    spec = GridSpec(m)
    w = trapezoid_weights(spec)
    val = w @ (a * spec.points() + b)
    assert val == pytest.approx(a / 2.0 + b, rel=1e-12, abs=1e-12)


def test_hermitian_flag_checked():
    spec = GridSpec(8)
    vals = np.zeros((9, 2, 2), dtype=complex)
    vals[3, 0, 1] = 1e-3
    with pytest.raises(ValidationError):
        MatrixGrid(2, spec, vals, hermitian=True)
    MatrixGrid(2, spec, vals, hermitian=False)  # fine unflagged


def test_matrix_grid_immutable():
    g = MatrixGrid(1, GridSpec(8), np.zeros((9, 1, 1)))
    with pytest.raises(ValueError):
        g.values[0, 0, 0] = 1.0


def test_g2_norm_zero_kernel():
    spec = GridSpec(16)
    k = TriangularKernel(1, spec, np.zeros((17, 17, 1, 1)))
    assert g2_norm(k) == 0.0


def test_g2_norm_indicator_kernel():
    # K = 1 on the triangle (r = 1): slice norms peak at 1 on the x = 1 row
    spec = GridSpec(256)
    vals = np.tril(np.ones((257, 257)))[:, :, None, None]
    k = TriangularKernel(1, spec, vals)
    assert g2_norm(k) == pytest.approx(1.0, abs=1e-2)


def test_g2_norm_scaling():
    rng = np.random.default_rng(0)
    spec = GridSpec(16)
    vals = np.tril(rng.normal(size=(17, 17)))[:, :, None, None] * (1 + 0j)
    k = TriangularKernel(1, spec, vals)
    c = 3.7 - 1.2j
    kc = TriangularKernel(1, spec, c * vals)
    assert g2_norm(kc) == pytest.approx(abs(c) * g2_norm(k), rel=1e-12)


def test_triangular_kernel_zeroes_upper_part():
    spec = GridSpec(8)
    vals = np.ones((9, 9, 1, 1), dtype=complex)
    k = TriangularKernel(1, spec, vals)
    assert np.all(k.values[np.triu_indices(9, k=1)] == 0)


def _random_grid(seed, r=2, m=16, hermitian=False):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(m + 1, r, r)) + 1j * rng.normal(size=(m + 1, r, r))
    if hermitian:
        vals = (vals + np.conj(np.swapaxes(vals, -1, -2))) / 2.0
    return MatrixGrid(r, GridSpec(m), vals, hermitian=hermitian)


def test_matrix_grid_roundtrip_bit_exact(tmp_path):
    g = _random_grid(1, hermitian=True)
    path = tmp_path / "g.json"
    save_matrix_grid(g, path)
    g2 = load_matrix_grid(path)
    assert g2.r == g.r and g2.spec.m == g.spec.m and g2.hermitian == g.hermitian
    assert np.array_equal(g2.values, g.values)


def test_spectral_data_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(2)
    r = 2
    alphas = []
    for _ in range(5):
        b = rng.normal(size=(r, r)) + 1j * rng.normal(size=(r, r))
        alphas.append(b @ b.conj().T + 0.1 * np.eye(r))
    data = SpectralData(r, np.array([0.0, 3.1, 6.4, 9.2, 12.9]),
                        np.stack(alphas), includes_zero=True)
    path = tmp_path / "d.json"
    save_spectral_data(data, path)
    d2 = load_spectral_data(path)
    assert np.array_equal(d2.lambdas, data.lambdas)
    assert np.array_equal(d2.alphas, data.alphas)
    assert d2.includes_zero == data.includes_zero


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(8, 24))
def test_matrix_grid_roundtrip_property(tmp_path_factory, seed, m):
    g = _random_grid(seed, r=1, m=m)
    path = tmp_path_factory.mktemp("io") / "g.json"
    save_matrix_grid(g, path)
    assert np.array_equal(load_matrix_grid(path).values, g.values)


def test_non_monotone_lambda_named(tmp_path):
    doc = {
        "r": 1, "includes_zero": False,
        "entries": [{"lambda": 3.0, "alpha": [[[1.0, 0.0]]]},
                    {"lambda": 3.0, "alpha": [[[1.0, 0.0]]]}],
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError, match="non-increasing lambda at index 1"):
        load_spectral_data(path)


def test_non_hermitian_alpha_rejected(tmp_path):
    doc = {
        "r": 2, "includes_zero": False,
        "entries": [{"lambda": 3.0,
                     "alpha": [[[1.0, 0.0], [0.001, 0.0]],
                               [[0.0, 0.0], [1.0, 0.0]]]}],
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError, match="non-Hermitian norming matrix at index 0"):
        load_spectral_data(path)


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"r": 1,\n  "m": }')
    with pytest.raises(ParseError, match="line 2"):
        load_matrix_grid(path)


def test_missing_field_reported(tmp_path):
    path = tmp_path / "short.json"
    path.write_text('{"r": 1, "m": 8}')
    with pytest.raises(ParseError, match="values"):
        load_matrix_grid(path)


def test_includes_zero_requires_zero_lambda():
    with pytest.raises(ValidationError):
        SpectralData(1, np.array([1.0]), np.ones((1, 1, 1)), includes_zero=True)
    with pytest.raises(ValidationError, match="positive definite"):
        # rank-deficient alpha_0 is PSD but not positive definite
        SpectralData(2, np.array([0.0]), np.diag([1.0, 0.0])[None].astype(complex),
                     includes_zero=True)


def test_bin_index_boundaries():
    assert bin_index(1.0) == 1
    assert bin_index(1.5 * np.pi) == 1          # right-closed first bin
    assert bin_index(1.5 * np.pi + 1e-6) == 2
    assert bin_index(2 * np.pi) == 2
    assert bin_index(2.5 * np.pi) == 2          # ties go to the lower bin
    assert bin_index(np.pi) == 1


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=1e-6, max_value=400.0, allow_nan=False))
def test_bin_index_contains_lambda(lam):
    n = bin_index(lam)
    lo = 0.0 if n == 1 else np.pi * n - np.pi / 2
    hi = np.pi * n + np.pi / 2 + 1e-9 if n > 1 else 1.5 * np.pi + 1e-9
    assert lo - 1e-9 <= lam <= hi


def test_resample_identity_and_refinement():
    g = _random_grid(7, r=1, m=16, hermitian=False)
    assert resample_matrix_grid(g, GridSpec(16)) is g
    fine = resample_matrix_grid(g, GridSpec(32))
    assert np.array_equal(fine.values[::2], g.values)
    mids = (g.values[:-1] + g.values[1:]) / 2.0
    assert np.allclose(fine.values[1::2], mids, atol=1e-15)
