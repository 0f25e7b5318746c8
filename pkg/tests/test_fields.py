import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectral_gate.errors import DimensionError
from spectral_gate.fields import (
    Field,
    Grid,
    TensorShape,
    constant,
    export_field_csv,
    inner_product,
    load_field,
    norm,
    random_field,
    save_field,
    transform,
    zeros,
)

VEC3 = TensorShape(((3, 1),))
SCALAR = TensorShape(((1, 1),))


def test_tensor_shape_dim_and_offsets():
    s = TensorShape(((2, 2), (2, 1), (1, 1)))
    assert s.dim == 7
    assert s.offsets() == [0, 4, 6]
    assert s.doubled().dim == 14
    with pytest.raises(DimensionError):
        TensorShape(())


def test_grid_validation_and_wavevectors():
    with pytest.raises(DimensionError):
        Grid((1, 4))
    g = Grid((4, 6), cell=(2.0, 3.0))
    k = g.wavevectors()
    assert k.shape == (24, 2)
    # first axis spacing 2π/2, second 2π/3, fftfreq ordering
    np.testing.assert_allclose(np.unique(k[:, 0]), np.pi * np.array([-2, -1, 0, 1]))
    np.testing.assert_allclose(k[:6, 1], 2 * np.pi / 3 * np.array([0, 1, 2, -3, -2, -1]))


def test_field_rejects_bad_input():
    g = Grid((4, 4))
    with pytest.raises(DimensionError):
        Field(g, VEC3, np.zeros(10))
    with pytest.raises(DimensionError):
        Field(g, SCALAR, np.full(16, np.nan))


def test_field_is_immutable_copy():
    g = Grid((4, 4))
    raw = np.ones((4, 4, 1), dtype=complex)
    f = Field(g, SCALAR, raw)
    raw[0, 0, 0] = 5
    assert f.values[0, 0, 0] == 1
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 2


def test_inner_product_examples():
    g = Grid((8, 8))
    ones = constant(g, VEC3, 1.0)
    assert inner_product(ones, ones) == pytest.approx(3 + 0j, abs=1e-15)
    p = random_field(g, VEC3, 1)
    assert inner_product(p, zeros(g, VEC3)) == 0


def test_inner_product_against_double_loop():
    g = Grid((8, 8))
    p, q = random_field(g, VEC3, 1), random_field(g, VEC3, 2)
    total = 0j
    for i in range(8):
        for j in range(8):
            for c in range(3):
                total += p.values[i, j, c] * np.conj(q.values[i, j, c])
    assert abs(inner_product(p, q) - total / 64) <= 1e-13
    assert abs(inner_product(p, q) - np.conj(inner_product(q, p))) <= 1e-15


def test_norm_examples():
    g = Grid((8, 8))
    assert norm(zeros(g, SCALAR)) == 0
    assert norm(constant(g, SCALAR, 1.0)) == pytest.approx(1.0, abs=1e-15)
    p = random_field(g, VEC3, 3)
    direct = np.sqrt(sum(abs(v) ** 2 for v in p.values.ravel()) / 64)
    assert abs(norm(p) - direct) <= 1e-13


def test_inner_product_dimension_mismatch():
    g = Grid((4, 4))
    with pytest.raises(DimensionError):
        inner_product(zeros(g, VEC3), zeros(g, SCALAR))
    with pytest.raises(DimensionError):
        inner_product(zeros(g, SCALAR), zeros(Grid((4, 8)), SCALAR))


def test_transform_examples():
    g = Grid((8, 8))
    delta = np.zeros((8, 8, 1), dtype=complex)
    delta[0, 0, 0] = 1
    hat = transform(Field(g, SCALAR, delta)).values
    np.testing.assert_allclose(hat, np.full_like(hat, 1 / 8), atol=1e-15)
    x = g.coordinates()
    k = np.array([2 * np.pi * 3, 2 * np.pi * -2])
    wave = Field(g, SCALAR, np.exp(1j * x @ k))
    hat = np.abs(transform(wave).values[..., 0])
    assert np.count_nonzero(hat > 1e-10) == 1
    assert hat[3, -2] == pytest.approx(8.0)
    p = random_field(g, VEC3, 4)
    back = transform(transform(p), "inverse")
    assert np.max(np.abs(back.values - p.values)) <= 1e-13
    with pytest.raises(ValueError):
        transform(p, "sideways")


def test_random_field_determinism_and_statistics():
    g = Grid((8, 8))
    a, b = random_field(g, VEC3, 7), random_field(g, VEC3, 7)
    assert np.array_equal(a.values, b.values)
    assert norm(a - random_field(g, VEC3, 8)) > 0
    big = random_field(Grid((100, 100)), SCALAR, 0)
    assert abs(big.values.mean()) < 0.05


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), re=st.floats(-3, 3), im=st.floats(-3, 3))
def test_sesquilinearity_and_norm_scaling(seed, re, im):
    g = Grid((6, 5))
    a = complex(re, im)
    p, q, r = (random_field(g, VEC3, seed + i) for i in range(3))
    assert abs(inner_product(a * p + r, q) - (a * inner_product(p, q) + inner_product(r, q))) <= 1e-12
    assert abs(inner_product(p, a * q) - np.conj(a) * inner_product(p, q)) <= 1e-12
    assert abs(norm(a * p) - abs(a) * norm(p)) <= 1e-13 * max(1.0, abs(a) * norm(p))


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.sampled_from([(32, 32, 32), (5, 7), (16,)]))
def test_parseval(seed, n):
    g = Grid(n)
    p, q = random_field(g, SCALAR, seed), random_field(g, SCALAR, seed + 1)
    assert abs(inner_product(transform(p), transform(q)) - inner_product(p, q)) <= 1e-12
    assert abs(norm(transform(p)) - norm(p)) <= 1e-13


def test_binary_roundtrip_and_header(tmp_path):
    g = Grid((4, 3), cell=(1.0, 2.5))
    shape = TensorShape(((2, 1), (1, 1)))
    p = random_field(g, shape, 0)
    path = tmp_path / "f.sgf"
    save_field(p, path)
    raw = path.read_bytes()
    assert raw[:4] == b"SGF1"
    q = load_field(path)
    assert q.grid == g and q.shape == shape
    # complex64 storage
    np.testing.assert_allclose(q.values, p.values.astype(np.complex64), rtol=0, atol=0)
    assert len(raw) == 4 + 4 + 8 + 16 + 4 + 16 + 12 * 3 * 8


def test_csv_export(tmp_path):
    g = Grid((2, 2))
    p = constant(g, TensorShape(((2, 1),)), [1 + 2j, 3])
    path = tmp_path / "f.csv"
    export_field_csv(p, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x_index,component,re,im"
    assert lines[1] == "0,0,1,2"
    assert len(lines) == 1 + 4 * 2
