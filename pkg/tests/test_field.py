"""Field states: derivatives, invariants, measure initialization, sign split."""

import io
import math

import numpy as np
import pytest

from peakonlab.field import (FieldState, SignSplitViolation, check_dodo,
                             derive, init_from_measure, invariants,
                             misplaced_sign_mass, momentum_density,
                             read_states_csv, state_from_u, state_to_csv)
from peakonlab.grid import (GridFunction, SpatialGrid, linf_norm, trapz,
                            w11_norm)
from peakonlab.kernels import exp_convolve, peakon_profile


def gf(grid, values):
    return GridFunction(grid, values)


class TestDerive:
    def test_constant(self, coarse_grid):
        d = derive(gf(coarse_grid, np.full(coarse_grid.n_nodes, 3.7)))
        np.testing.assert_allclose(d.values, 0.0, atol=1e-13)

    def test_sine_second_order(self):
        errs = []
        for h in (0.02, 0.01):
            g = SpatialGrid.regular(-6, 6, h)
            d = derive(gf(g, np.sin(g.x)))
            errs.append(np.max(np.abs(d.values - np.cos(g.x))))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)

    def test_peakon_derivative_off_the_peak(self, coarse_grid):
        g = coarse_grid
        d = derive(gf(g, np.exp(-np.abs(g.x))))
        away = np.abs(g.x) > 2 * g.h
        expected = -np.sign(g.x[away]) * np.exp(-np.abs(g.x[away]))
        np.testing.assert_allclose(d.values[away], expected, atol=5 * g.h**2)


class TestMomentumDensity:
    def test_constant(self, coarse_grid):
        y = momentum_density(gf(coarse_grid, np.ones(coarse_grid.n_nodes)))
        np.testing.assert_allclose(y.values, 1.0, atol=1e-10)

    def test_fourier_symbol(self):
        k = 1.3
        g = SpatialGrid.regular(-40, 40, 0.01)
        y = momentum_density(gf(g, np.cos(k * g.x) / (1 + k * k)))
        mid = np.abs(g.x) < 20
        np.testing.assert_allclose(y.values[mid], np.cos(k * g.x[mid]),
                                   atol=2e-4)

    def test_roundtrip_second_order(self):
        errs = []
        for h in (0.02, 0.01):
            g = SpatialGrid.regular(-30, 30, h)
            u = gf(g, np.exp(-0.5 * g.x**2))
            back = exp_convolve(momentum_density(u))
            mid = np.abs(g.x) < 10
            errs.append(np.max(np.abs(back.values[mid] - u.values[mid])))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)

    def test_mollified_peakon_mass(self):
        g = SpatialGrid.regular(-30, 30, 0.01)
        state = init_from_measure([(2.0, 0.0)], g, n=32)
        assert np.min(state.y.values) > -2e-3
        assert trapz(state.y.values, g.h) == pytest.approx(2.0, abs=1e-4)


class TestInvariants:
    def test_zero_field(self, coarse_grid):
        s = state_from_u(gf(coarse_grid, np.zeros(coarse_grid.n_nodes)))
        triple = invariants(s)
        assert triple.M == triple.E == triple.F == 0.0

    def test_mollified_peakon_converges_to_closed_forms(self):
        # E -> 2c^2, F -> 4c^3/3, M -> 2c as mollification and grid refine
        targets = {"E": 2.0, "F": 4.0 / 3.0, "M": 2.0}
        errs = []
        for n, h in ((16, 0.01), (64, 0.0025)):
            g = SpatialGrid.regular(-20, 20, h)
            triple = invariants(init_from_measure([(2.0, 0.0)], g, n=n))
            errs.append({k: abs(getattr(triple, k) - v)
                         for k, v in targets.items()})
        # E and F converge at the mollification rate ~1/n, M is quadrature-exact
        for k in targets:
            assert errs[1][k] < errs[0][k] / 2
        assert errs[1]["E"] < 2e-2
        assert errs[1]["M"] < 1e-6
        assert errs[1]["F"] < 2e-2

    def test_two_peakon_energy_identity(self):
        # E = 2 sum_ij p_i p_j exp(-|q_i - q_j|) for exact superpositions
        p = np.array([0.8, 1.3])
        q = np.array([-4.0, 3.0])
        g = SpatialGrid.regular(-40, 40, 0.005)
        u = np.zeros(g.n_nodes)
        for pi, qi in zip(p, q):
            u += peakon_profile(g.x, pi, qi)
        E = invariants(state_from_u(gf(g, u))).E
        expected = 2.0 * np.sum(p[:, None] * p[None, :]
                                * np.exp(-np.abs(q[:, None] - q[None, :])))
        assert E == pytest.approx(expected, rel=2e-2)

    def test_quadrature_refinement_second_order(self):
        Es = []
        for h in (0.02, 0.01, 0.005):
            g = SpatialGrid.regular(-25, 25, h)
            Es.append(invariants(init_from_measure([(2.0, 0.0)], g, n=8)).E)
        assert abs(Es[0] - Es[2]) > 2.5 * abs(Es[1] - Es[2])

    def test_sobolev_inequality(self):
        g = SpatialGrid.regular(-30, 30, 0.01)
        for build in (lambda: init_from_measure([(2.0, 0.0)], g, n=16),
                      lambda: state_from_u(gf(g, np.exp(-0.5 * g.x**2)))):
            s = build()
            assert linf_norm(s.u.values) <= s.h1() / math.sqrt(2.0) * (1 + 1e-6)


class TestInitFromMeasure:
    def test_single_atom_approximates_peakon(self):
        g = SpatialGrid.regular(-25, 25, 0.005)
        errs = []
        for n in (16, 64):
            state = init_from_measure([(2.0, 0.0)], g, n=n)
            errs.append(np.max(np.abs(state.u.values - np.exp(-np.abs(g.x)))))
        assert errs[1] < 0.03
        assert errs[0] / errs[1] > 3.0

    def test_l1_bound_on_momentum(self):
        g = SpatialGrid.regular(-30, 30, 0.01)
        atoms = [(-0.5, -5.0), (2.0, 3.0)]
        state = init_from_measure(atoms, g, n=16, sign_split_x0=-1.0)
        total_variation = sum(abs(m) for m, _ in atoms)
        assert trapz(np.abs(state.y.values), g.h) <= total_variation * (1 + 2e-3)

    def test_w11_controlled_by_total_variation(self):
        # ||u||_W11 <= ||p||_L1 ||y||_M + ||p'||_L1 ||y||_M = 2 ||y||_M
        g = SpatialGrid.regular(-30, 30, 0.01)
        atoms = [(-1.0, -6.0), (0.5, 2.0), (1.5, 6.0)]
        state = init_from_measure(atoms, g, n=16, sign_split_x0=0.0)
        tv = sum(abs(m) for m, _ in atoms)
        assert w11_norm(state.u.values, state.ux.values, g.h) <= 2.0 * tv * (1 + 1e-2)

    def test_sign_split_ordering_enforced(self):
        g = SpatialGrid.regular(-30, 30, 0.02)
        init_from_measure([(-1.0, -5.0), (1.0, 5.0)], g, n=16,
                          sign_split_x0=0.0)  # accepted
        with pytest.raises(SignSplitViolation):
            init_from_measure([(1.0, -5.0), (-1.0, 5.0)], g, n=16,
                              sign_split_x0=0.0)

    def test_sign_split_of_built_state(self):
        g = SpatialGrid.regular(-30, 30, 0.01)
        state = init_from_measure([(-1.0, -5.0), (1.0, 5.0)], g, n=16,
                                  sign_split_x0=0.0)
        assert misplaced_sign_mass(state) < 5e-4

    def test_atoms_must_be_sorted(self):
        g = SpatialGrid.regular(-30, 30, 0.02)
        with pytest.raises(ValueError, match="sorted"):
            init_from_measure([(1.0, 5.0), (1.0, -5.0)], g, n=16)

    def test_atom_near_boundary_rejected(self):
        g = SpatialGrid.regular(-30, 30, 0.02)
        with pytest.raises(ValueError, match="boundary"):
            init_from_measure([(1.0, -29.99)], g, n=16)

    def test_smooth_part_sign_and_mass(self):
        g = SpatialGrid.regular(-30, 30, 0.01)
        bump = np.exp(-0.5 * ((g.x - 5.0) / 0.8) ** 2)
        state = init_from_measure([], g, n=16, smooth_part=gf(g, bump),
                                  sign_split_x0=0.0)
        assert trapz(state.y.values, g.h) == pytest.approx(
            trapz(bump, g.h), rel=1e-3)
        assert misplaced_sign_mass(state) < 5e-4


class TestSignSplitCheck:
    def test_exact_peakon_equality_case(self):
        g = SpatialGrid.regular(-30, 30, 0.01)
        s = state_from_u(gf(g, np.exp(-np.abs(g.x))))
        report = check_dodo(s, 0.0)
        assert report.passed
        assert report.max_violation_left < report.tolerance

    def test_well_ordered_pair_passes(self):
        g = SpatialGrid.regular(-40, 40, 0.01)
        u = -peakon_profile(g.x, 1.0, -5.0) + peakon_profile(g.x, 1.0, 5.0)
        assert check_dodo(state_from_u(gf(g, u)), 0.0).passed

    def test_wrong_order_reports_violation(self):
        g = SpatialGrid.regular(-40, 40, 0.01)
        u = peakon_profile(g.x, 1.0, -5.0) - peakon_profile(g.x, 1.0, 5.0)
        report = check_dodo(state_from_u(gf(g, u)), 0.0)
        assert not report.passed
        assert report.max_violation_left > 0.5


class TestSerialization:
    def test_roundtrip(self):
        g = SpatialGrid.regular(-20, 20, 0.05)
        state = init_from_measure([(2.0, 0.0)], g, n=8, sign_split_x0=-5.0)
        state = FieldState(t=1.25, u=state.u, ux=state.ux, y=state.y,
                           x0_marker=state.x0_marker)
        blob = state_to_csv(state, n=8)
        back = read_states_csv(io.StringIO(blob))
        assert len(back) == 1
        assert back[0].t == 1.25
        assert back[0].x0_marker == -5.0
        np.testing.assert_array_equal(back[0].u.values, state.u.values)
        np.testing.assert_array_equal(back[0].y.values, state.y.values)

    def test_multiple_blocks(self):
        g = SpatialGrid.regular(-20, 20, 0.1)
        s1 = init_from_measure([(2.0, 0.0)], g, n=4)
        s2 = FieldState(t=2.0, u=s1.u, ux=s1.ux, y=s1.y)
        blob = state_to_csv(s1) + state_to_csv(s2)
        back = read_states_csv(io.StringIO(blob))
        assert [s.t for s in back] == [0.0, 2.0]
