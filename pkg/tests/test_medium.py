import numpy as np
import pytest

from cemhelm.errors import MalformedRaster, NonPositiveValue
from cemhelm.grid import build_coarse_grid, build_fine_grid
from cemhelm.medium import (
    constant_medium,
    load_raster,
    save_raster,
    stilde_weights,
    synthesize_channels,
)


def test_load_constant_raster(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("2 2\n1.0 1.0\n1.0 1.0\n")
    med = load_raster(p)
    assert med.nx == med.ny == 2
    assert np.allclose(med.values, 1.0)


def test_load_high_contrast_raster(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("2 2\n1.0 0.001\n0.001 1.0\n")
    med = load_raster(p)
    assert med.contrast == pytest.approx(1e-3)
    assert med.epsilon == pytest.approx(np.sqrt(1e-3))


def test_raster_row_order_bottom_to_top(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("2 2\n1.0 2.0\n3.0 4.0\n")
    med = load_raster(p)
    # cell (i=0, j=0) is the first value of the first data row
    assert med.values[0] == 1.0
    assert med.values[2] == 3.0  # cell (0, 1): first value of second row


def test_zero_entry_rejected(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("2 1\n1.0 0.0\n")
    with pytest.raises(NonPositiveValue):
        load_raster(p)


@pytest.mark.parametrize(
    "content",
    ["", "2\n1 1\n", "2 2\n1 1\n", "2 2\n1 1\n1 1 1\n", "2 2\n1 a\n1 1\n"],
)
def test_malformed_rasters(tmp_path, content):
    p = tmp_path / "m.txt"
    p.write_text(content)
    with pytest.raises(MalformedRaster):
        load_raster(p)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    med = constant_medium(5, 3, 1.0)
    med.values[:] = rng.uniform(0.1, 2.0, med.values.size)
    p = tmp_path / "m.txt"
    save_raster(med, p)
    back = load_raster(p)
    assert np.array_equal(back.values, med.values)  # bit-exact
    assert (back.nx, back.ny) == (5, 3)


def test_constant_medium_cases():
    assert np.allclose(constant_medium(4, 4, 1.0).values, 1.0)
    assert np.allclose(constant_medium(3, 3, 0.25).values, 0.25)
    med = constant_medium(4, 2, 2.0)
    assert (med.nx, med.ny) == (4, 2)
    with pytest.raises(NonPositiveValue):
        constant_medium(2, 2, 0.0)


def test_synthesize_no_channels_is_constant():
    med = synthesize_channels(32, 32, seed=1, contrast=1e-3, channel_count=0)
    assert np.allclose(med.values, 1.0)


def test_synthesize_deterministic():
    a = synthesize_channels(64, 64, seed=9, contrast=1e-2, channel_count=5)
    b = synthesize_channels(64, 64, seed=9, contrast=1e-2, channel_count=5)
    assert np.array_equal(a.values, b.values)
    c = synthesize_channels(64, 64, seed=10, contrast=1e-2, channel_count=5)
    assert not np.array_equal(a.values, c.values)


def test_synthesize_low_fraction():
    med = synthesize_channels(200, 200, seed=7, contrast=1e-3, channel_count=8)
    frac = np.mean(med.values == 1e-3)
    assert 0.0 < frac < 0.5
    assert set(np.unique(med.values)) == {1e-3, 1.0}
    assert med.epsilon == pytest.approx(np.sqrt(1e-3))


def test_stilde_simplified_values():
    g = build_fine_grid(20, 20)
    med = constant_medium(20, 20, 1.0)
    w = stilde_weights(med, build_coarse_grid(g, 10))
    assert np.allclose(w.values, 2400.0)  # 24 * 10^2

    g2 = build_fine_grid(20, 20)
    med2 = constant_medium(20, 20, 1.0)
    med2.values[:] = 1e-3
    w2 = stilde_weights(med2, build_coarse_grid(g2, 20))
    assert np.allclose(w2.values, 24.0 * 400 * 1e-3)  # 9.6

    w3 = stilde_weights(constant_medium(4, 4, 1.0), build_coarse_grid(build_fine_grid(4, 4), 1))
    assert np.allclose(w3.values, 24.0)


def test_stilde_linear_in_coefficient():
    g = build_fine_grid(8, 8)
    c = build_coarse_grid(g, 4)
    rng = np.random.default_rng(2)
    med = constant_medium(8, 8, 1.0)
    med.values[:] = rng.uniform(0.5, 2.0, 64)
    doubled = constant_medium(8, 8, 1.0)
    doubled.values[:] = 2.0 * med.values
    assert np.allclose(
        stilde_weights(doubled, c).values, 2.0 * stilde_weights(med, c).values
    )


def test_stilde_lagrange_rule():
    g = build_fine_grid(8, 8)
    c = build_coarse_grid(g, 4)
    med = constant_medium(8, 8, 1.0)
    w = stilde_weights(med, c, rule="lagrange")
    # sum of squared hat gradients at a cell center, scaled by H^-2
    H = c.H
    r = c.ratio
    xi = 0.5 / r
    expected_corner = (2 * (1 - xi) ** 2 + 2 * xi**2) * 2 / H**2
    assert w.values[0] == pytest.approx(expected_corner)
    # bounded between 2/H^2 and 4/H^2 for unit coefficient
    assert np.all(w.values >= 2.0 / H**2 - 1e-12)
    assert np.all(w.values <= 4.0 / H**2 + 1e-12)
