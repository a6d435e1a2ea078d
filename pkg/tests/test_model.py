import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causticq.model import (BARBANIS, HamiltonianModel, ModelError, UnboundedDirectionError,
                            corner_angle, energy, equipotential_point, gradient, hessian,
                            load_model, potential, separable_levels, separable_spectrum)

coord = st.floats(-3.0, 3.0, allow_nan=False)
params = st.tuples(st.floats(0.3, 2.0), st.floats(0.3, 2.0), st.floats(-0.3, 0.3),
                   st.floats(0.5, 2.0))


def test_frequency_convention():
    # stiffness is m w^2, so the ground state of the uncoupled model is (wx + wy)/2
    md = HamiltonianModel(1.1, 1.0, 0.0)
    assert md.kx == pytest.approx(1.21)
    assert separable_spectrum(md, 0, 0) == pytest.approx(1.05, abs=1e-15)
    assert potential(md, (1.0, 0.0)) == pytest.approx(0.605)


@settings(max_examples=60, deadline=None)
@given(params, coord, coord)
def test_gradient_matches_finite_differences(p, x, y):
    md = HamiltonianModel(p[0], p[1], p[2], p[3])
    h = 1e-6
    fd = [(potential(md, (x + h, y)) - potential(md, (x - h, y))) / (2 * h),
          (potential(md, (x, y + h)) - potential(md, (x, y - h))) / (2 * h)]
    np.testing.assert_allclose(gradient(md, (x, y)), fd, atol=1e-7)


@settings(max_examples=60, deadline=None)
@given(params, coord, coord)
def test_hessian_symmetric_and_matches_gradient(p, x, y):
    md = HamiltonianModel(p[0], p[1], p[2], p[3])
    H = hessian(md, (x, y))
    assert H[0, 1] == H[1, 0]
    h = 1e-6
    col0 = (gradient(md, (x + h, y)) - gradient(md, (x - h, y))) / (2 * h)
    np.testing.assert_allclose(H[:, 0], col0, atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(coord, coord)
def test_mirror_symmetry_in_x(x, y):
    assert potential(BARBANIS, (x, y)) == potential(BARBANIS, (-x, y))


def test_energy_adds_kinetic_term():
    assert energy(BARBANIS, (0.0, 0.0), (1.0, 2.0)) == pytest.approx(2.5)


@pytest.mark.parametrize("kw", [{"omega_x": 0.0}, {"mass": -1.0}, {"hbar": float("nan")},
                                {"lam": float("inf")}])
def test_invalid_parameters(kw):
    with pytest.raises(ModelError):
        HamiltonianModel(**kw)


def test_separable_spectrum_rejects_coupling():
    with pytest.raises(ModelError):
        separable_spectrum(BARBANIS, 0, 0)


def test_separable_levels_sorted_and_complete():
    md = HamiltonianModel(1.1, 1.0, 0.0)
    levels = separable_levels(md, 5.3)
    E = [separable_spectrum(md, m, n) for m, n in levels]
    assert E == sorted(E)
    assert len(levels) == 13
    assert all(e <= 5.3 for e in E)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 2 * math.pi), st.floats(0.5, 6.0))
def test_equipotential_point_on_level(theta, E):
    q = equipotential_point(BARBANIS, E, (math.cos(theta), math.sin(theta)))
    assert potential(BARBANIS, q) == pytest.approx(E, rel=1e-12)


def test_equipotential_unbounded_direction():
    # above the saddle the cubic term wins along the diagonal
    md = HamiltonianModel(1.0, 1.0, -1.0)
    with pytest.raises(UnboundedDirectionError):
        equipotential_point(md, 50.0, (1.0, 1.0))


def test_corner_angle_quadrant():
    a = corner_angle(HamiltonianModel(1.1, 1.0, 0.0), 2, 2)
    assert math.pi / 2 < a < math.pi


def test_load_model_flat_and_nested(tmp_path):
    f = tmp_path / "m.json"
    f.write_text(json.dumps({"omega_x": 1.1, "omega_y": 1.0, "lambda": -0.11}))
    assert load_model(f) == BARBANIS
    f.write_text(json.dumps({"model": BARBANIS.to_dict()}))
    assert load_model(f) == BARBANIS
    f.write_text(json.dumps({"omega_z": 1.0}))
    with pytest.raises(ModelError):
        load_model(f)
