import numpy as np
import pytest

from afftri.field import FIELDS, EnergyWeights, phi
from afftri.mesh import InvalidMeshError, structured_square_mesh, uniform_interval_mesh, validate
from afftri.optimizer import (
    OptimizerConfig,
    fd_gradient,
    make_objective,
    optimize,
    pack_free,
    stationarity_check,
    unpack_free,
)
from afftri.whitney import FORMS

# brute-force scan of the single free knot for cubic1d, weights (1, 0): knot in
# [0.01, 0.99] at step 1e-5, energy by 10-point Gauss-Legendre per cell (exact
# for the degree-6 integrand).  Computed once with plain numpy, frozen here.
CUBIC_KNOT_SCAN = 0.59368


def alternating_start(n=8, amp=0.02):
    mesh = uniform_interval_mesh(0, 1, n)
    x = pack_free(mesh)
    return unpack_free(mesh, x + amp * np.where(np.arange(x.size) % 2 == 0, 1.0, -1.0))


def assert_trace_ok(result):
    phis = [r.phi for r in result.trace]
    assert all(b <= a for a, b in zip(phis, phis[1:]))
    assert all(r.min_volume > 0 for r in result.trace)


# --- pack / unpack --------------------------------------------------------


def test_pack_examples():
    assert pack_free(uniform_interval_mesh(0, 1, 4)).tolist() == [0.25, 0.5, 0.75]
    assert pack_free(structured_square_mesh(2)).tolist() == [0.5, 0.5]


@pytest.mark.parametrize("mesh", [uniform_interval_mesh(0, 1, 5), structured_square_mesh(3)])
def test_pack_round_trip(mesh):
    assert unpack_free(mesh, pack_free(mesh)) == mesh


def test_unpack_only_moves_free_vertices():
    mesh = structured_square_mesh(3)
    moved = unpack_free(mesh, pack_free(mesh) + 0.01)
    assert np.array_equal(moved.vertices[~mesh.free_mask], mesh.vertices[~mesh.free_mask])
    assert np.allclose(moved.vertices[mesh.free_mask], mesh.vertices[mesh.free_mask] + 0.01)


def test_unpack_length_mismatch():
    with pytest.raises(ValueError):
        unpack_free(uniform_interval_mesh(0, 1, 4), [0.5])


# --- fd_gradient ----------------------------------------------------------


def test_fd_gradient_quadratic():
    g = fd_gradient(lambda x: float(np.sum(x**2)), np.array([1.0, 2.0]))
    assert np.allclose(g, [2, 4], atol=1e-6)


def test_fd_gradient_vanishes_on_uniform_quad1d():
    mesh = uniform_interval_mesh(0, 1, 8)
    obj = make_objective(mesh, FIELDS["quad1d"], EnergyWeights(1, 1))
    assert np.max(np.abs(fd_gradient(obj, pack_free(mesh)))) < 1e-6


def test_fd_gradient_second_order():
    mesh = alternating_start()
    obj = make_objective(mesh, FIELDS["quad1d"], EnergyWeights(1, 1))
    x = pack_free(mesh)

    def richardson(h):
        return (4 * fd_gradient(obj, x, h / 2) - fd_gradient(obj, x, h)) / 3

    ref = richardson(2.5e-3)
    e1 = np.max(np.abs(fd_gradient(obj, x, 2e-2) - ref))
    e2 = np.max(np.abs(fd_gradient(obj, x, 1e-2) - ref))
    assert 3.5 <= e1 / e2 <= 4.5


def test_fd_gradient_one_sided_fallback():
    def obj(x):
        if x[0] < 0:
            raise InvalidMeshError("infeasible")
        return float(x[0] ** 2 + x[0])

    g = fd_gradient(obj, np.array([0.0]), 1e-6)
    assert g[0] == pytest.approx(1.0, abs=1e-5)


def test_fd_gradient_both_sides_infeasible():
    def obj(x):
        if x[0] != 0:
            raise InvalidMeshError("infeasible")
        return 0.0

    with pytest.raises(InvalidMeshError):
        fd_gradient(obj, np.array([0.0]))


def test_gradient_consistency_secant():
    rng = np.random.default_rng(11)
    base = uniform_interval_mesh(0, 1, 8)
    obj = make_objective(base, FIELDS["quad1d"], EnergyWeights(1, 1))
    for _ in range(3):
        x = pack_free(base) + rng.uniform(-0.02, 0.02, size=7)
        v = rng.normal(size=7)
        v /= np.linalg.norm(v)
        gv = fd_gradient(obj, x) @ v
        errs = [abs((obj(x + t * v) - obj(x - t * v)) / (2 * t) - gv) for t in (1e-2, 1e-3, 1e-4)]
        assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


# --- optimize -------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(backtrack_factor=1.0)
    with pytest.raises(ValueError):
        OptimizerConfig(armijo_c=0.0)
    with pytest.raises(ValueError):
        OptimizerConfig(gtol=-1)


def test_optimize_quad1d_symmetric():
    res = optimize(alternating_start(), FIELDS["quad1d"], EnergyWeights(1, 1))
    assert res.converged and res.iterations <= 500
    assert np.allclose(res.mesh.vertices[:, 0], np.arange(9) / 8, atol=1e-3)
    assert res.phi == pytest.approx(1 / 122880 + 1 / 192, rel=1e-6)
    assert_trace_ok(res)
    residual, ok = stationarity_check(res, FIELDS["quad1d"], EnergyWeights(1, 1), 1e-5)
    assert ok and residual < 1e-5


def test_optimize_cubic1d_matches_scan():
    res = optimize(uniform_interval_mesh(0, 1, 2), FIELDS["cubic1d"], EnergyWeights(1, 0))
    assert res.converged
    assert abs(res.mesh.vertices[1, 0] - CUBIC_KNOT_SCAN) <= 1e-3
    assert_trace_ok(res)


def test_optimize_affine_stops_immediately():
    res = optimize(structured_square_mesh(2), FIELDS["affine2d"], EnergyWeights(1, 1))
    assert res.reason == "gradient_tolerance" and res.iterations == 0
    assert res.phi <= 1e-14
    residual, ok = stationarity_check(res, FIELDS["affine2d"], EnergyWeights(1, 1), 1e-6)
    assert ok and residual <= 1e-12


def test_truncated_run_is_not_stationary():
    res = optimize(
        uniform_interval_mesh(0, 1, 2), FIELDS["cubic1d"], EnergyWeights(1, 0), OptimizerConfig(max_iters=1)
    )
    assert res.reason == "max_iters" and res.iterations == 1
    _, ok = stationarity_check(res, FIELDS["cubic1d"], EnergyWeights(1, 0), 1e-6)
    assert not ok


def test_optimize_2d_keeps_boundary_and_validity():
    mesh = structured_square_mesh(3)
    rng = np.random.default_rng(4)
    mesh = unpack_free(mesh, pack_free(mesh) + rng.uniform(-0.05, 0.05, size=8))
    res = optimize(mesh, FIELDS["quadsum2d"], EnergyWeights(1, 1), OptimizerConfig(max_iters=40))
    assert np.array_equal(res.mesh.vertices[~mesh.free_mask], mesh.vertices[~mesh.free_mask])
    assert validate(res.mesh).ok
    assert res.phi < res.trace[0].phi
    assert_trace_ok(res)


def test_whitney_optimize_decreases():
    mesh = structured_square_mesh(3)
    mesh = unpack_free(mesh, pack_free(mesh) + 0.04 * np.array([1, -1, -1, 1, 1, 1, -1, -1]))
    res = optimize(mesh, FORMS["x_dy"], EnergyWeights(1, 1), OptimizerConfig(max_iters=30))
    assert res.phi < res.trace[0].phi
    assert_trace_ok(res)
    assert validate(res.mesh).ok


def test_line_search_failure_is_reported():
    # with the floor at 100% of the current volumes no move is ever feasible
    mesh = alternating_start()
    cfg = OptimizerConfig(vol_floor_factor=1.0)
    res = optimize(mesh, FIELDS["quad1d"], EnergyWeights(1, 1), cfg)
    assert res.reason == "line_search_failure"
    assert res.mesh == mesh and len(res.trace) == 1


def test_optimize_is_deterministic():
    a = optimize(alternating_start(), FIELDS["quad1d"], EnergyWeights(1, 1))
    b = optimize(alternating_start(), FIELDS["quad1d"], EnergyWeights(1, 1))
    assert a.trace == b.trace
    assert a.mesh.vertices.tobytes() == b.mesh.vertices.tobytes()


def test_optimize_rejects_invalid_start():
    mesh = uniform_interval_mesh(0, 1, 8)
    v = mesh.vertices.copy()
    v[3] = 0.55
    with pytest.raises(InvalidMeshError):
        optimize(mesh.with_vertices(v), FIELDS["quad1d"], EnergyWeights())


def test_objective_matches_phi():
    mesh = alternating_start()
    obj = make_objective(mesh, FIELDS["quad1d"], EnergyWeights(1, 1))
    assert obj(pack_free(mesh)) == phi(mesh, FIELDS["quad1d"], EnergyWeights(1, 1))
