import numpy as np
import pytest

from mlswe.core import Grid, LayerConfig
from mlswe.physics import (PhysicsConfig, coriolis_step,
                           horizontal_viscosity_stable_dt,
                           horizontal_viscosity_step, vertical_viscosity_step)

HEPS = 1e-10


class TestVerticalViscosity:
    def test_disabled_is_identity(self, rng):
        lay = LayerConfig.uniform(4)
        u = rng.normal(size=(4, 6))
        h = rng.uniform(0.5, 2.0, 6)
        out = vertical_viscosity_step(u, h, lay, 0.0, 0.0, None, 0.3, HEPS)
        assert np.allclose(out, u, atol=1e-15)

    def test_momentum_conserved_without_friction(self, rng):
        lay = LayerConfig(np.array([0.2, 0.3, 0.5]))
        u = rng.normal(size=(3, 5))
        h = rng.uniform(0.5, 2.0, 5)
        out = vertical_viscosity_step(u, h, lay, 0.01, 0.0, None, 2.0, HEPS)
        before = np.tensordot(lay.weights, u, (0, 0)) * h
        after = np.tensordot(lay.weights, out, (0, 0)) * h
        assert np.allclose(after, before, rtol=1e-12)

    def test_friction_decays_momentum(self):
        lay = LayerConfig.uniform(3)
        h = np.ones(4)
        u = np.full((3, 4), 0.8)
        mom = [0.8]
        for _ in range(5):
            u = vertical_viscosity_step(u, h, lay, 0.01, 0.2, None, 1.0, HEPS)
            mom.append(float(np.tensordot(lay.weights, u, (0, 0))[0]))
        assert all(b < a for a, b in zip(mom, mom[1:]))
        assert mom[-1] > 0.0

    def test_wind_drives_top_layer_towards_wind(self):
        lay = LayerConfig.uniform(4)
        h = np.ones(3)
        u = np.zeros((4, 3))
        tops = [0.0]
        for _ in range(30):
            u = vertical_viscosity_step(u, h, lay, 0.003, 0.1, 6.0, 5.0, HEPS)
            tops.append(float(u[-1, 0]))
        assert all(b >= a - 1e-14 for a, b in zip(tops, tops[1:]))
        assert tops[-1] > 1.0
        assert u.max() <= 6.0 + 1e-12

    def test_max_principle_with_wind(self, rng):
        lay = LayerConfig.uniform(5)
        for _ in range(50):
            u = rng.uniform(-3, 3, (5, 4))
            h = rng.uniform(0.2, 2.0, 4)
            wind = float(rng.uniform(-5, 5))
            dt = float(rng.uniform(0.01, 100.0))
            out = vertical_viscosity_step(u, h, lay, 0.01, 0.3, wind, dt, HEPS)
            hi = max(u.max(), wind) + 1e-10
            lo = min(u.min(), wind) - 1e-10
            assert out.max() <= hi and out.min() >= lo

    def test_prescribed_stress_accelerates_top(self):
        lay = LayerConfig.uniform(3)
        h = np.full(2, 10.0)
        u = np.zeros((3, 2))
        stress = np.array([1e-4, -1e-4])
        out = vertical_viscosity_step(u, h, lay, 0.0, 0.0, None, 50.0, HEPS,
                                      stress=stress)
        # momentum input dt * stress lands in the top layer
        assert out[-1, 0] == pytest.approx(50.0 * 1e-4 / (10.0 / 3.0), rel=1e-12)
        assert out[-1, 1] < 0.0
        assert np.all(out[:-1] == 0.0)

    def test_dry_columns_untouched(self):
        lay = LayerConfig.uniform(2)
        h = np.array([1.0, 0.0])
        u = np.array([[0.5, 0.3], [0.1, 0.3]])
        out = vertical_viscosity_step(u, h, lay, 0.01, 0.1, None, 1.0, HEPS)
        assert np.all(out[:, 1] == u[:, 1])


class TestHorizontalViscosity:
    def test_disabled_identity(self, rng):
        grid = Grid(nx=6, dx=0.1)
        lay = LayerConfig.uniform(2)
        u = rng.normal(size=(2, 6))
        out = horizontal_viscosity_step(u, np.ones(6), lay, grid, 0.0, 0.1, HEPS)
        assert np.array_equal(out, u)

    def test_linear_profile_harmonic(self):
        # a linear profile has zero discrete Laplacian away from wrap effects
        grid = Grid(nx=8, dx=0.1, bc_x=("outflow", "outflow"))
        lay = LayerConfig.uniform(1)
        u = np.linspace(0.0, 1.0, 8)[None, :]
        nu = 0.003
        dt = 0.5 * horizontal_viscosity_stable_dt(grid, nu)
        out = horizontal_viscosity_step(u, np.ones(8), lay, grid, nu, dt, HEPS)
        assert np.abs(out[0, 1:-1] - u[0, 1:-1]).max() <= 1e-14

    def test_spike_smooths_and_conserves(self):
        grid = Grid(nx=9, dx=0.1)
        lay = LayerConfig.uniform(2)
        h = np.ones(9)
        u = np.zeros((2, 9))
        u[:, 4] = 1.0
        nu = 0.01
        dt = 0.9 * horizontal_viscosity_stable_dt(grid, nu)
        out = horizontal_viscosity_step(u, h, lay, grid, nu, dt, HEPS)
        assert out.max() < 1.0
        assert np.allclose(out.sum(axis=1), u.sum(axis=1), rtol=1e-13)

    def test_energy_dissipation(self, rng):
        grid = Grid(nx=10, dx=0.1)
        lay = LayerConfig.uniform(3)
        h = rng.uniform(0.5, 1.5, 10)
        u = rng.normal(size=(3, 10))
        nu = 0.005
        dt = horizontal_viscosity_stable_dt(grid, nu)
        out = horizontal_viscosity_step(u, h, lay, grid, nu, dt, HEPS)
        w = lay.weights[:, None]
        before = (w * h * u ** 2).sum()
        after = (w * h * out ** 2).sum()
        assert after <= before + 1e-13

    def test_stability_guard(self):
        grid = Grid(nx=6, dx=0.1)
        lay = LayerConfig.uniform(1)
        with pytest.raises(ValueError):
            horizontal_viscosity_step(np.zeros((1, 6)), np.ones(6), lay, grid,
                                      0.01, 10.0, HEPS)


class TestCoriolis:
    def test_zero_is_identity(self, rng):
        u = rng.normal(size=(3, 4))
        v = rng.normal(size=(3, 4))
        u2, v2 = coriolis_step(u, v, np.zeros(4), 10.0)
        assert np.array_equal(u2, u) and np.array_equal(v2, v)

    def test_quarter_turn(self):
        f = np.array([1.0])
        u, v = coriolis_step(np.array([1.0]), np.array([0.0]), f, np.pi / 2)
        assert u[0] == pytest.approx(0.0, abs=1e-15)
        assert v[0] == pytest.approx(-1.0, abs=1e-15)

    def test_speed_preserved(self, rng):
        u = rng.normal(size=(2, 5))
        v = rng.normal(size=(2, 5))
        f = rng.normal(size=5) * 1e-4
        u2, v2 = coriolis_step(u, v, f, 3600.0)
        assert np.allclose(u2 ** 2 + v2 ** 2, u ** 2 + v ** 2, rtol=1e-13)


class TestConfig:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            PhysicsConfig(nu=-1.0)

    def test_coriolis_field(self):
        grid = Grid(nx=4, dx=1.0, ny=3, dy=2.0)
        phys = PhysicsConfig(f0=1e-5, beta0=1e-6)
        f = phys.coriolis_field(grid)
        assert f.shape == (3, 4)
        assert np.allclose(f[:, 0], 1e-5 + 1e-6 * np.array([1.0, 3.0, 5.0]))
