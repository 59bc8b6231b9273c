import numpy as np
import pytest

from acousticam.regression import (
    RegressionModel,
    SingularDesignError,
    TargetSet,
    UnderdeterminedFitError,
    design_matrix,
    fit,
    normalize_pixel,
)


def naive_predict(coeffs, order, u, v, width, height):
    """Independent double-loop evaluation of the tensor-product polynomial."""
    x = (2.0 * u - width - 1.0) / (width - 1.0)
    y = (2.0 * v - height - 1.0) / (height - 1.0)
    n_pairs = coeffs.shape[1]
    out = np.zeros(n_pairs)
    for a in range(order + 1):
        for b in range(order + 1):
            out += (x**a) * (y**b) * coeffs[a * (order + 1) + b]
    return out


def grid_targets(width, height, n):
    us = np.linspace(1, width, n)
    vs = np.linspace(1, height, n)
    uu, vv = np.meshgrid(us, vs)
    return np.stack([uu.ravel(), vv.ravel()], axis=1)


def test_normalize_pixel_endpoints_and_midpoint():
    assert normalize_pixel(1, 320) == -1.0
    assert normalize_pixel(320, 320) == 1.0
    assert normalize_pixel(160.5, 320) == 0.0


def test_design_matrix_center_row():
    width, height = 321, 241  # odd so the exact center is a pixel
    row = design_matrix([[161.0, 121.0]], 4, width, height)
    expect = np.zeros(25)
    expect[0] = 1.0
    assert np.allclose(row[0], expect, atol=1e-15)


def test_design_matrix_corner_order():
    row = design_matrix([[1.0, 1.0]], 1, 320, 240)[0]
    # basis order (0,0), (0,1), (1,0), (1,1) at x = y = -1
    assert np.allclose(row, [1.0, -1.0, -1.0, 1.0])


def test_design_matrix_term_count():
    mat = design_matrix(grid_targets(320, 240, 5), 3, 320, 240)
    assert mat.shape == (25, 16)
    assert np.allclose(mat[:, 0], 1.0)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_fit_recovers_exact_polynomial(order):
    rng = np.random.default_rng(100 + order)
    n_pairs = 6
    coeffs = rng.normal(size=((order + 1) ** 2, n_pairs))
    targets = grid_targets(320, 240, order + 2)  # strictly overdetermined
    tdoas = design_matrix(targets, order, 320, 240) @ coeffs
    model = fit(TargetSet(targets, tdoas), order, 320, 240)
    assert np.max(np.abs(model.coeffs - coeffs)) < 1e-9


def test_fit_exactly_determined_warns_but_recovers():
    order = 2
    rng = np.random.default_rng(1)
    coeffs = rng.normal(size=(9, 3))
    targets = grid_targets(320, 240, 3)  # T = 9 = (L+1)^2
    tdoas = design_matrix(targets, order, 320, 240) @ coeffs
    with pytest.warns(UserWarning, match="exactly determined"):
        model = fit(TargetSet(targets, tdoas), order, 320, 240)
    assert np.max(np.abs(model.coeffs - coeffs)) < 1e-9


def test_fit_constant_field():
    tau0 = np.array([0.5, -1.25, 2.0])
    targets = grid_targets(320, 240, 4)
    tdoas = np.tile(tau0, (len(targets), 1))
    model = fit(TargetSet(targets, tdoas), 2, 320, 240)
    assert np.allclose(model.coeffs[0], tau0, atol=1e-12)
    assert np.max(np.abs(model.coeffs[1:])) < 1e-12
    assert np.allclose(model.predict(17.3, 200.1), tau0, atol=1e-12)


def test_predict_against_naive_oracle():
    order = 3
    rng = np.random.default_rng(42)
    coeffs = rng.normal(size=(16, 6))
    model = RegressionModel(order, coeffs, 320, 240)
    for _ in range(50):
        u = rng.uniform(-10, 330)
        v = rng.uniform(-10, 250)
        expect = naive_predict(coeffs, order, u, v, 320, 240)
        assert np.max(np.abs(model.predict(u, v) - expect)) < 1e-12


def test_predict_interpolates_fitted_targets():
    order = 2
    rng = np.random.default_rng(9)
    coeffs = rng.normal(size=(9, 4))
    targets = grid_targets(160, 120, 5)
    tdoas = design_matrix(targets, order, 160, 120) @ coeffs
    model = fit(TargetSet(targets, tdoas), order, 160, 120)
    for t in range(len(targets)):
        pred = model.predict(targets[t, 0], targets[t, 1])
        assert np.max(np.abs(pred - tdoas[t])) < 1e-9


def test_predict_consistent_with_design_matrix():
    order = 3
    rng = np.random.default_rng(17)
    coeffs = rng.normal(size=(16, 6))
    model = RegressionModel(order, coeffs, 320, 240)
    pts = np.stack([rng.uniform(1, 320, 30), rng.uniform(1, 240, 30)], axis=1)
    via_design = design_matrix(pts, order, 320, 240) @ coeffs
    via_predict = model.predict(pts[:, 0], pts[:, 1])
    assert np.max(np.abs(via_design - via_predict)) < 1e-12


def test_order_monotonicity_on_noiseless_data():
    # data generated at order 2 is recovered by any fit of order >= 2
    rng = np.random.default_rng(23)
    coeffs = rng.normal(size=(9, 5))
    targets = grid_targets(320, 240, 6)
    tdoas = design_matrix(targets, 2, 320, 240) @ coeffs
    for order in (2, 3, 4):
        model = fit(TargetSet(targets, tdoas), order, 320, 240)
        resid = model.predict(targets[:, 0], targets[:, 1]) - tdoas
        assert np.max(np.abs(resid)) < 1e-9


def test_mirror_symmetry_coefficient_parity():
    # flipping the image left-right and negating the TDOAs flips the sign
    # of coefficients with even x-exponent a and keeps odd-a ones
    order = 3
    rng = np.random.default_rng(31)
    coeffs = rng.normal(size=(16, 6))
    targets = grid_targets(320, 240, 6)
    tdoas = design_matrix(targets, order, 320, 240) @ coeffs
    mirrored = targets.copy()
    mirrored[:, 0] = 320 + 1 - mirrored[:, 0]
    model = fit(TargetSet(mirrored, -tdoas), order, 320, 240)
    for a in range(order + 1):
        for b in range(order + 1):
            row = a * (order + 1) + b
            assert model.coeffs[row] == pytest.approx(
                (-1.0) ** (a + 1) * coeffs[row], abs=1e-9
            )


def test_underdetermined_rejected():
    targets = grid_targets(320, 240, 3)  # 9 targets
    tdoas = np.zeros((9, 6))
    with pytest.raises(UnderdeterminedFitError):
        fit(TargetSet(targets, tdoas), 3, 320, 240)  # needs 16


def test_collinear_targets_rejected():
    # all targets on one horizontal line cannot determine y structure
    t = np.stack([np.linspace(1, 320, 12), np.full(12, 120.0)], axis=1)
    tdoas = np.zeros((12, 6))
    with pytest.raises(SingularDesignError, match="condition"):
        fit(TargetSet(t, tdoas), 2, 320, 240)


def test_duplicate_targets_accepted():
    targets = np.vstack([grid_targets(320, 240, 3)] * 2)  # every row twice
    rng = np.random.default_rng(77)
    coeffs = rng.normal(size=(4, 2))
    tdoas = design_matrix(targets, 1, 320, 240) @ coeffs
    model = fit(TargetSet(targets, tdoas), 1, 320, 240)
    assert np.max(np.abs(model.coeffs - coeffs)) < 1e-9


def test_ridge_parameter_shrinks_solution():
    rng = np.random.default_rng(3)
    targets = grid_targets(320, 240, 5)
    tdoas = rng.normal(size=(25, 6))
    plain = fit(TargetSet(targets, tdoas), 2, 320, 240)
    ridged = fit(TargetSet(targets, tdoas), 2, 320, 240, ridge=100.0)
    assert np.linalg.norm(ridged.coeffs) < np.linalg.norm(plain.coeffs)


def test_model_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(12)
    model = RegressionModel(3, rng.normal(size=(16, 6)), 320, 240, 16000.0)
    path = tmp_path / "model.txt"
    model.save(path)
    back = RegressionModel.load(path)
    assert back.order == 3
    assert back.width == 320 and back.height == 240
    assert back.sample_rate == 16000.0
    assert np.array_equal(back.coeffs, model.coeffs)  # 17 digits: bit-exact
    header = path.read_text().splitlines()[0].split()
    assert header[:5] == ["3", "4", "6", "320", "240"]


def test_target_set_validation():
    with pytest.raises(ValueError):
        TargetSet(np.zeros((3, 2)), np.zeros((2, 6)))  # row mismatch
    with pytest.raises(ValueError):
        TargetSet(np.zeros((3, 3)), np.zeros((3, 6)))  # not (u, v)
