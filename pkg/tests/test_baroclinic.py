import numpy as np
import pytest

from mlswe.baroclinic import (CorrectionCFLError, PredictedState, baroclinic_dt,
                              baroclinic_step, correction_explicit,
                              correction_implicit, exchange_terms,
                              interface_upwind, prediction_step,
                              rusanov_mass_flux, transported_flux,
                              upwind_height_mass_flux)
from mlswe.core import Grid, LayerConfig, SimState, mean_velocity

from conftest import random_wet_state


class TestMassFluxes:
    def test_rusanov_no_shear(self):
        h = np.array([[2.0, 1.0], [1.0, 3.0]])
        z = np.zeros_like(h)
        f = rusanov_mass_flux(h, h[:, ::-1], z, z)
        assert np.all(f == 0.0)

    def test_rusanov_single_entry(self):
        # (0.2 - 0.3)/2 - 0.3*(1 - 2)/2 = 0.1 with the speed bound 0.3
        f = rusanov_mass_flux(np.array([[2.0]]), np.array([[1.0]]),
                              np.array([[0.1]]), np.array([[-0.3]]))
        assert f[0, 0] == pytest.approx(0.1, abs=1e-15)

    def test_rusanov_consistency(self):
        h = np.array([[1.5], [0.5]])
        s = np.array([[0.2], [-0.6]])
        f = rusanov_mass_flux(h, h, s, s)
        assert np.allclose(f, h * s)

    def test_upwind_height_cases(self):
        # equal or larger left height takes the right-side transport
        f = upwind_height_mass_flux(np.array([[2.0]]), np.array([[1.0]]),
                                    np.array([[0.05]]), np.array([[-0.3]]))
        assert f[0, 0] == pytest.approx(-0.3, abs=1e-15)
        f = upwind_height_mass_flux(np.array([[1.0]]), np.array([[2.0]]),
                                    np.array([[0.1]]), np.array([[-0.15]]))
        assert f[0, 0] == pytest.approx(0.1, abs=1e-15)
        f = upwind_height_mass_flux(np.array([[1.0]]), np.array([[2.0]]),
                                    np.array([[0.0]]), np.array([[0.0]]))
        assert f[0, 0] == 0.0

    def test_transported_flux(self):
        assert transported_flux(np.array(0.1), np.array(3.0), np.array(99.0)) == pytest.approx(0.3)
        assert transported_flux(np.array(-0.1), np.array(99.0), np.array(3.0)) == pytest.approx(-0.3)
        assert transported_flux(np.array(0.0), np.array(5.0), np.array(7.0)) == 0.0

    def test_interface_upwind_sign_convention(self):
        lo, hi = np.array(1.0), np.array(2.0)
        assert interface_upwind(lo, hi, np.array(1.0)) == 2.0
        assert interface_upwind(lo, hi, np.array(-1.0)) == 1.0
        assert interface_upwind(lo, hi, np.array(0.0)) == 1.0


def oracle_prediction_periodic(h, u, T, w, dt, dx, flux="rusanov"):
    """Scalar reference for the transport-only update on a periodic row."""
    n, nx = u.shape
    ubar = [sum(w[a] * u[a][j] for a in range(n)) for j in range(nx)]
    sig = [[u[a][j] - ubar[j] for j in range(nx)] for a in range(n)]
    ha = [[w[a] * h[j] for j in range(nx)] for a in range(n)]
    F = [[0.0] * nx for _ in range(n)]
    for j in range(nx):
        jp = (j + 1) % nx
        if flux == "rusanov":
            amax = max(max(abs(sig[a][j]), abs(sig[a][jp])) for a in range(n))
            for a in range(n):
                F[a][j] = (0.5 * (ha[a][j] * sig[a][j] + ha[a][jp] * sig[a][jp])
                           - 0.5 * amax * (ha[a][jp] - ha[a][j]))
        else:
            for a in range(n):
                F[a][j] = (ha[a][j] * sig[a][j] if ha[a][j] < ha[a][jp]
                           else ha[a][jp] * sig[a][jp])
    lam = dt / dx
    h_star = np.zeros((n, nx))
    hu_star = np.zeros((n, nx))
    hT_star = np.zeros((n, nx))
    for a in range(n):
        for j in range(nx):
            jm = (j - 1) % nx
            h_star[a][j] = ha[a][j] - lam * (F[a][j] - F[a][jm])

            def carried(phi, iface):
                jp = (iface + 1) % nx
                return phi[a][iface] * max(F[a][iface], 0.0) + phi[a][jp] * min(F[a][iface], 0.0)

            hu_star[a][j] = ha[a][j] * u[a][j] - lam * (carried(u, j) - carried(u, jm))
            hT_star[a][j] = ha[a][j] * T[a][j] - lam * (carried(T, j) - carried(T, jm))
    return h_star, hu_star, hT_star


class TestPrediction:
    def test_uniform_barotropic_identity(self):
        grid = Grid(nx=5, dx=0.1)
        lay = LayerConfig.uniform(3)
        h = np.array([1.0, 1.2, 0.8, 1.1, 0.9])
        u = np.tile(np.array([0.3, -0.2, 0.5, 0.0, 1.0]), (3, 1))
        st = SimState(h=h, u=u, T=np.ones((3, 5)), zb=np.zeros(5))
        pred = prediction_step(st, grid, lay, 0.01)
        assert np.allclose(pred.h_half, h, atol=1e-15)
        assert np.allclose(pred.hu_star, lay.weights[:, None] * h * u, atol=1e-15)

    def test_lake_at_rest_identity(self):
        grid = Grid(nx=5, dx=0.1, bc_x=("wall", "wall"))
        lay = LayerConfig.uniform(2)
        zb = np.array([0.0, 0.3, 0.5, 0.2, 0.0])
        h = 1.0 - zb
        st = SimState(h=h, u=np.zeros((2, 5)), T=np.ones((2, 5)), zb=zb)
        pred = prediction_step(st, grid, lay, 0.01)
        assert np.array_equal(pred.h_half, h)

    @pytest.mark.parametrize("flux", ["rusanov", "height-upwind"])
    def test_three_cell_oracle(self, flux):
        grid = Grid(nx=3, dx=0.2)
        lay = LayerConfig.uniform(2)
        h = np.array([1.0, 1.5, 0.7])
        u = np.array([[0.4, -0.1, 0.2], [-0.2, 0.3, 0.1]])
        T = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        st = SimState(h=h, u=u, T=T, zb=np.zeros(3))
        dt = 0.05
        pred = prediction_step(st, grid, lay, dt, flux=flux)
        hs, hus, hTs = oracle_prediction_periodic(h, u, T, lay.weights, dt, grid.dx, flux)
        assert np.allclose(pred.h_star, hs, atol=1e-14)
        assert np.allclose(pred.hu_star, hus, atol=1e-14)
        assert np.allclose(pred.hT_star, hTs, atol=1e-14)

    def test_positivity_and_max_principle(self, rng):
        from mlswe.analysis import max_principle_violation

        for trial in range(200):
            state, grid, lay = random_wet_state(rng, nx=8,
                                                n_layers=int(rng.integers(1, 5)),
                                                shear=2.0)
            dt = baroclinic_dt(state, grid, lay, 0.45, 1e-10)
            dt = min(dt, 1.0)
            pred = prediction_step(state, grid, lay, dt)
            assert pred.h_star.min() >= -1e-15
            u_star = np.where(pred.h_star > 1e-14, pred.hu_star / np.maximum(pred.h_star, 1e-300), 0.0)
            assert max_principle_violation(state.u, u_star, grid, "space", sign_x=-1.0) <= 1e-10
            t_star = np.where(pred.h_star > 1e-14, pred.hT_star / np.maximum(pred.h_star, 1e-300), 0.0)
            assert max_principle_violation(state.T, t_star, grid, "space") <= 1e-10


class TestExchanges:
    def test_zero_when_fractions_hold(self):
        lay = LayerConfig.uniform(3)
        h_half = np.array([1.5, 2.0])
        pred = PredictedState(h_star=lay.weights[:, None] * h_half,
                              hu_star=np.zeros((3, 2)), hT_star=np.zeros((3, 2)),
                              h_half=h_half)
        g, closure = exchange_terms(pred, lay, 0.1, 1e-10)
        assert np.all(g == 0.0) and closure == 0.0

    def test_two_layer_value(self):
        # (0.5*1 - 0.4)/0.1 = 1.0 at the middle interface
        lay = LayerConfig.uniform(2)
        pred = PredictedState(h_star=np.array([[0.4], [0.6]]),
                              hu_star=np.zeros((2, 1)), hT_star=np.zeros((2, 1)),
                              h_half=np.array([1.0]))
        g, _ = exchange_terms(pred, lay, 0.1, 1e-10)
        assert np.allclose(g.ravel(), [0.0, 1.0, 0.0], atol=1e-12)

    def test_three_layer_values(self):
        # cumulative (l*h_half - h_star)/dt: -2, -1, then closure
        lay = LayerConfig.uniform(3)
        pred = PredictedState(h_star=np.array([[1.2], [0.9], [0.9]]),
                              hu_star=np.zeros((3, 1)), hT_star=np.zeros((3, 1)),
                              h_half=np.array([3.0]))
        g, closure = exchange_terms(pred, lay, 0.1, 1e-10)
        assert np.allclose(g.ravel(), [0.0, -2.0, -1.0, 0.0], atol=1e-12)
        assert closure <= 1e-12 * (np.abs(g).max() + 1.0 / 0.1)

    def test_closure_random(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 6))
            lay = LayerConfig.uniform(n)
            h_star = rng.uniform(0.1, 2.0, (n, 7))
            pred = PredictedState(h_star=h_star, hu_star=np.zeros((n, 7)),
                                  hT_star=np.zeros((n, 7)), h_half=h_star.sum(0))
            dt = float(rng.uniform(1e-4, 1.0))
            g, closure = exchange_terms(pred, lay, dt, 1e-10)
            assert closure <= 1e-12 * (np.abs(g).max() + 1.0 / dt)


def _two_layer_pred():
    lay = LayerConfig.uniform(2)
    pred = PredictedState(h_star=np.array([[0.4], [0.6]]),
                          hu_star=np.array([[0.4 * 1.0], [0.6 * 2.0]]),
                          hT_star=np.array([[0.4 * 8.0], [0.6 * 25.0]]),
                          h_half=np.array([1.0]))
    g = np.array([[0.0], [1.0], [0.0]])
    return lay, pred, g


class TestCorrections:
    def test_identity_without_exchange(self, rng):
        state, grid, lay = random_wet_state(rng, nx=6, n_layers=3)
        w = lay.weights[:, None]
        pred = PredictedState(h_star=w * state.h, hu_star=w * state.h * state.u,
                              hT_star=w * state.h * state.T, h_half=state.h.copy())
        g = np.zeros((4, 6))
        for corr in (correction_explicit, correction_implicit):
            u, v, T = corr(pred, g, lay, 0.1, 1e-10)
            assert np.allclose(u, state.u, atol=1e-14)
            assert np.allclose(T, state.T, atol=1e-14)

    def test_explicit_hand_values(self):
        lay, pred, g = _two_layer_pred()
        u, _, T = correction_explicit(pred, g, lay, 0.1, 1e-10)
        # donor is the upper layer: u -> (1.2, 2.0), T -> (11.4, 25)
        assert np.allclose(u.ravel(), [1.2, 2.0], atol=1e-14)
        assert np.allclose(T.ravel(), [11.4, 25.0], atol=1e-13)
        # column totals conserved
        assert (0.5 * u).sum() == pytest.approx(1.6, abs=1e-14)
        assert 8.0 - 1e-13 <= T.min() and T.max() <= 25.0 + 1e-13

    def test_implicit_matches_hand_solve(self):
        lay, pred, g = _two_layer_pred()
        u, _, T = correction_implicit(pred, g, lay, 0.1, 1e-10)
        assert np.allclose(u.ravel(), [1.2, 2.0], atol=1e-14)
        assert np.allclose(T.ravel(), [11.4, 25.0], atol=1e-13)

    def test_explicit_raises_on_large_dt(self):
        lay, pred, g = _two_layer_pred()
        with pytest.raises(CorrectionCFLError):
            correction_explicit(pred, g, lay, 10.0, 1e-10)

    def test_implicit_against_dense_solve(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 5))
            lay = LayerConfig.uniform(n)
            h_half = rng.uniform(0.5, 2.0, 1)
            h_star = rng.uniform(0.1, 1.0, (n, 1))
            h_star *= h_half / h_star.sum(0)
            u_star = rng.uniform(-2, 2, (n, 1))
            pred = PredictedState(h_star=h_star, hu_star=h_star * u_star,
                                  hT_star=h_star * u_star, h_half=h_half)
            dt = float(rng.uniform(0.01, 5.0))
            g, _ = exchange_terms(pred, lay, dt, 1e-10)
            u, _, _ = correction_implicit(pred, g, lay, dt, 1e-10)
            # dense assembly of the same linear system
            ha = lay.weights * h_half[0]
            mat = np.diag(ha.copy())
            for i in range(1, n):  # interface between layers i-1 and i
                gi = g[i, 0]
                donor = i if gi > 0 else i - 1
                mat[i - 1, donor] -= dt * gi
                mat[i, donor] += dt * gi
            sol = np.linalg.solve(mat, pred.hu_star[:, 0])
            assert np.allclose(u[:, 0], sol, atol=1e-10)
            # column bound over all layers
            assert u.min() >= u_star.min() - 1e-12
            assert u.max() <= u_star.max() + 1e-12

    def test_column_conservation(self, rng):
        for corr in (correction_explicit, correction_implicit):
            state, grid, lay = random_wet_state(rng, nx=10, n_layers=4, shear=1.5)
            dt = min(baroclinic_dt(state, grid, lay, 0.45, 1e-10), 0.5)
            pred = prediction_step(state, grid, lay, dt)
            g, _ = exchange_terms(pred, lay, dt, 1e-10)
            u, _, T = corr(pred, g, lay, dt, 1e-10)
            w = lay.weights[:, None]
            mom_before = pred.hu_star.sum(0)
            mom_after = (w * pred.h_half * u).sum(0)
            assert np.allclose(mom_after, mom_before, rtol=1e-12, atol=1e-13)
            trc_before = pred.hT_star.sum(0)
            trc_after = (w * pred.h_half * T).sum(0)
            assert np.allclose(trc_after, trc_before, rtol=1e-12, atol=1e-13)

    def test_correction_max_principles(self, rng):
        from mlswe.analysis import max_principle_violation

        for _ in range(200):
            state, grid, lay = random_wet_state(rng, nx=8, n_layers=int(rng.integers(2, 5)),
                                                shear=2.0)
            dt = min(baroclinic_dt(state, grid, lay, 0.45, 1e-10), 0.5)
            pred = prediction_step(state, grid, lay, dt)
            g, _ = exchange_terms(pred, lay, dt, 1e-10)
            u_star = pred.hu_star / pred.h_star
            t_star = pred.hT_star / pred.h_star
            try:
                u, _, T = correction_explicit(pred, g, lay, dt, 1e-10)
                assert max_principle_violation(u_star, u, grid, "layer") <= 1e-10
                assert max_principle_violation(t_star, T, grid, "layer") <= 1e-10
            except CorrectionCFLError:
                pass
            u, _, T = correction_implicit(pred, g, lay, dt, 1e-10)
            assert max_principle_violation(u_star, u, grid, "column") <= 1e-10
            assert max_principle_violation(t_star, T, grid, "column") <= 1e-10


class TestTimeStep:
    def test_direct_value(self):
        grid = Grid(nx=4, dx=0.1)
        lay = LayerConfig.uniform(2)
        u = np.array([[0.5, 0, 0, 0], [-0.5, 0, 0, 0]])
        st = SimState(h=np.ones(4), u=u, T=np.zeros((2, 4)), zb=np.zeros(4))
        # max |deviation| = 0.5, dt = 0.5 * 0.1 / 0.5
        assert baroclinic_dt(st, grid, lay, 0.5, 1e-10) == pytest.approx(0.1)

    def test_infinite_for_barotropic_state(self):
        grid = Grid(nx=4, dx=0.1)
        lay = LayerConfig.uniform(3)
        st = SimState(h=np.ones(4), u=np.tile(np.arange(4.0), (3, 1)),
                      T=np.zeros((3, 4)), zb=np.zeros(4))
        assert baroclinic_dt(st, grid, lay, 0.45, 1e-10) == np.inf

    def test_retry_after_cfl_violation(self, rng):
        # a steep exchange state violates the explicit bound at large dt but
        # the full step succeeds once dt is halved by the driver
        from mlswe.splitting import SchemeConfig, split_step

        grid = Grid(nx=6, dx=0.05)
        lay = LayerConfig(np.array([0.05, 0.95]))
        h = rng.uniform(0.9, 1.1, 6)
        u = np.array([rng.uniform(2.0, 3.0, 6), rng.uniform(-0.2, 0.0, 6)])
        st = SimState(h=h, u=u, T=rng.uniform(0, 1, (2, 6)), zb=np.zeros(6))
        cfg = SchemeConfig(correction="explicit")
        out, rep = split_step(st, grid, lay, cfg, dt_limit=10.0)
        assert np.isfinite(out.h).all()


class TestFullStep:
    def test_entropy_monitor_hooks(self, rng):
        state, grid, lay = random_wet_state(rng, nx=8, n_layers=3, shear=1.0)
        dt = min(baroclinic_dt(state, grid, lay, 0.45, 1e-10), 0.1)
        monitor = {}
        baroclinic_step(state, grid, lay, dt, "rusanov", "implicit", 1e-10,
                        monitor=monitor)
        assert monitor["pred_entropy"] <= 1e-10
        assert monitor["corr_energy"] <= 1e-12
        assert monitor["exchange_closure"] <= 1e-12
