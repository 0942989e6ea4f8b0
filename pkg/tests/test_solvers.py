import numpy as np
import pytest

import fhbeam.fp
from conftest import desk_config, worked_example
from fhbeam.fp import QuadraticProgram, assemble_dense, build_qp, update_aux
from fhbeam.linalg import HermitianOperator, NotConvergedError, SpectralInterval
from fhbeam.network import (
    ChannelSet,
    SystemConfig,
    cell_power,
    complex_normal,
    generate_channels,
    objective_g,
    wsr,
)
from fhbeam.schedule import chebyshev_schedule, constant_schedule
from fhbeam.solvers import (
    SolverConfig,
    SolverError,
    run_constant_gd,
    run_exact_wmmse,
    run_finite_horizon,
    run_solver,
    solve_qp_exact,
    solve_qp_finite_horizon,
)


def dense_qp(D, Q, interval=None):
    op = HermitianOperator(D.shape[0], lambda x: D @ x, float(np.linalg.eigvalsh(D)[0]))
    return QuadraticProgram(op, Q[None], interval, np.empty((0, D.shape[0])), np.empty((0, 1, 1)))


def hpd_with_extremes(rng, n, lo, hi):
    U, _ = np.linalg.qr(complex_normal(rng, (n, n)))
    ev = np.concatenate([[lo, hi], rng.uniform(lo, hi, n - 2)])
    return (U * ev) @ U.conj().T, SpectralInterval(lo, hi)


class TestConfig:
    def test_defaults(self):
        c = SolverConfig()
        assert (c.horizon, c.max_outer_iters, c.rel_tol, c.spectral_refresh) == (5, 200, 1e-5, "every_outer")

    @pytest.mark.parametrize("kw", [{"variant": "newton"}, {"horizon": 0}, {"rel_tol": 0.0},
                                    {"spectral_refresh": "never"}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


class TestExactWMMSE:
    def test_scalar_user(self):
        ch, _ = worked_example()
        V, trace = run_exact_wmmse(ch, SolverConfig(max_outer_iters=3), V0=np.full((1, 1, 1, 1), 0.1 + 0.3j))
        assert trace.records[1].wsr_bits == pytest.approx(np.log2(5), rel=1e-14)
        assert abs(V[0, 0, 0, 0]) == pytest.approx(2.0, rel=1e-14)

    def test_single_user_aligns_with_channel(self):
        rng = np.random.default_rng(3)
        cfg = SystemConfig(1, 6, 1, 1, 1, noise_power=1.0, power_budget=2.0)
        ch = ChannelSet(complex_normal(rng, (1, 1, 1, 1, 6)), cfg)
        V, trace = run_exact_wmmse(ch, SolverConfig(rel_tol=1e-12))
        h = ch.H[0, 0, 0, 0]
        mrt = h.conj() / np.linalg.norm(h) * np.sqrt(2.0)
        assert abs(np.vdot(mrt, V[0, 0, :, 0])) == pytest.approx(2.0, rel=1e-9)
        assert trace.final_wsr == pytest.approx(np.log2(1 + 2.0 * np.linalg.norm(h) ** 2), rel=1e-9)

    def test_zero_channels(self):
        cfg = SystemConfig(1, 4, 2, 1, 2, noise_power=1.0, power_budget=1.0)
        ch = ChannelSet(np.zeros((1, 2, 1, 2, 4), complex), cfg)
        V, trace = run_exact_wmmse(ch, SolverConfig(max_outer_iters=5))
        assert np.all(trace.wsr == 0.0)
        assert trace.converged
        np.testing.assert_allclose(cell_power(V), 1.0)

    def test_desk_exact_residual(self, desk_channels):
        last = {}
        run_exact_wmmse(desk_channels, inner_hook=lambda it, l, qp, V, s: last.update(qp=qp))
        qp = last["qp"]
        X, D = solve_qp_exact(qp), assemble_dense(qp)
        for k in range(qp.q.shape[0]):
            assert np.linalg.norm(D @ X[k] - qp.q[k]) < 1e-8

    @pytest.mark.parametrize("seed", range(5))
    def test_monotone(self, seed):
        ch = generate_channels(desk_config(), seed)
        _, trace = run_exact_wmmse(ch, SolverConfig(seed=seed))
        assert np.all(np.diff(trace.wsr) >= -1e-9)
        np.testing.assert_array_equal([r.outer_iteration for r in trace.records], np.arange(len(trace)))


class TestInnerSolver:
    def test_fixed_point(self):
        ch, V = worked_example()
        qp = build_qp(ch, update_aux(ch, V))
        seen = []
        out = solve_qp_finite_horizon(qp, V[0, 0], chebyshev_schedule(5, qp.spectral), k=0,
                                      callback=lambda t, X: seen.append(X.copy()))
        assert len(seen) == 6
        # D = 0.8 + 0.2 carries one rounding, so the gradient is zero to an ulp
        for X in seen:
            np.testing.assert_allclose(X, V[0, 0], rtol=1e-15)
        np.testing.assert_allclose(out, V[0, 0], rtol=1e-15)

    def test_unit_condition_number_single_step(self):
        # H = I and V = a*I make gamma, y and hence D multiples of the identity
        cfg = SystemConfig(1, 2, 2, 2, 1, noise_power=0.5, power_budget=3.0)
        ch = ChannelSet(np.eye(2, dtype=complex)[None, None, None], cfg)
        V = 0.7 * np.eye(2, dtype=complex)[None, None]
        qp = build_qp(ch, update_aux(ch, V), spectral=False)
        D = assemble_dense(qp)
        c = D[0, 0].real
        np.testing.assert_allclose(D, c * np.eye(2), atol=1e-15)
        out = solve_qp_finite_horizon(qp, V[0], chebyshev_schedule(1, SpectralInterval(c, c)))
        np.testing.assert_allclose(out, solve_qp_exact(qp), rtol=1e-14)

    @pytest.mark.parametrize("kind,factor", [("chebyshev", 0.075671), ("constant", 0.366648)])
    def test_contraction_examples(self, kind, factor):
        rng = np.random.default_rng(16)
        D, iv = hpd_with_extremes(rng, 16, 1.0, 10.0)
        sched = (chebyshev_schedule if kind == "chebyshev" else constant_schedule)(5, iv)
        # 2 (1 - 2/(sqrt(10)+1))^5 and (1 - 2/11)^5
        assert sched.predicted_factor == pytest.approx(factor, abs=1e-6)
        Q, V0 = complex_normal(rng, (16, 2)), complex_normal(rng, (16, 2))
        qp = dense_qp(D, Q)
        star = np.linalg.solve(D, Q)
        VT = solve_qp_finite_horizon(qp, V0, sched, k=0)
        assert np.linalg.norm(VT - star) <= sched.predicted_factor * np.linalg.norm(V0 - star)

    @pytest.mark.parametrize("T", [17, 40, 200])
    def test_long_chebyshev_matches_residual_polynomial(self, T):
        """Above the plain-step limit the recurrence must realize the same polynomial."""
        rng = np.random.default_rng(T)
        lam = np.array([1.0, 1.3, 2.0, 5.0, 8.0])
        D = np.diag(lam).astype(complex)
        iv = SpectralInterval(1.0, 8.0)
        qp = dense_qp(D, np.zeros((5, 1), complex))
        V0 = complex_normal(rng, (5, 1))
        VT = solve_qp_finite_horizon(qp, V0, chebyshev_schedule(T, iv), k=0)
        gamma = 9.0 / 7.0
        x = (gamma - 2 * lam / 7.0)
        expected = np.cos(T * np.arccos(x)) / np.cosh(T * np.arccosh(gamma))
        np.testing.assert_allclose(VT[:, 0], expected * V0[:, 0], atol=1e-13 * np.abs(V0).max())


class TestFiniteHorizon:
    def test_desk_run(self, desk_channels):
        V, trace = run_finite_horizon(desk_channels)
        assert trace.converged
        np.testing.assert_allclose(cell_power(V), desk_channels.config.power_budget, rtol=1e-12)
        assert trace.final_wsr == pytest.approx(wsr(desk_channels, V), rel=1e-9)

    def test_single_step_constant_is_identical(self, desk_channels):
        cfg = SolverConfig(horizon=1, max_outer_iters=20)
        Va, ta = run_finite_horizon(desk_channels, cfg)
        Vb, tb = run_constant_gd(desk_channels, cfg)
        np.testing.assert_array_equal(Va, Vb)
        np.testing.assert_array_equal(ta.wsr, tb.wsr)

    def test_time_budget(self, desk_channels):
        _, trace = run_finite_horizon(desk_channels, SolverConfig(time_budget=1e-9, rel_tol=1e-15))
        assert trace.outer_iters == 1

    def test_spectral_refresh_once(self, desk_channels):
        seen = []
        run_finite_horizon(desk_channels, SolverConfig(spectral_refresh="once", max_outer_iters=6, rel_tol=1e-15),
                           inner_hook=lambda it, l, qp, V, s: seen.append(qp.spectral))
        assert len(seen) == 6 and all(iv == seen[0] for iv in seen)
        seen.clear()
        run_finite_horizon(desk_channels, SolverConfig(max_outer_iters=6, rel_tol=1e-15),
                           inner_hook=lambda it, l, qp, V, s: seen.append(qp.spectral))
        assert len({(iv.lambda_min, iv.lambda_max) for iv in seen}) > 1

    def test_spectral_failure_raises_with_trace(self, desk_channels, monkeypatch):
        def fail(op, **kw):
            raise NotConvergedError("power iteration stalled", estimate=1.0)

        monkeypatch.setattr(fhbeam.fp, "spectral_interval", fail)
        with pytest.raises(SolverError) as err:
            run_finite_horizon(desk_channels)
        assert len(err.value.trace) == 1
        assert err.value.trace.records[0].outer_iteration == 0

    def test_multicell(self):
        ch = generate_channels(desk_config(L=3, K=2, M=16), 4)
        for run in (run_exact_wmmse, run_finite_horizon, run_constant_gd):
            V, trace = run(ch, SolverConfig(max_outer_iters=30))
            np.testing.assert_allclose(cell_power(V), ch.config.power_budget, rtol=1e-12)
            assert trace.final_wsr > trace.wsr[0]

    def test_warm_start_scale_safety(self, desk_channels):
        V0 = 1e3 * complex_normal(np.random.default_rng(1), (1, 3, 32, 2))
        V, trace = run_finite_horizon(desk_channels, SolverConfig(max_outer_iters=4), V0=V0)
        assert abs(wsr(desk_channels, V) - trace.final_wsr) < 1e-9 * trace.final_wsr

    def test_inner_trace(self, desk_channels):
        _, trace = run_finite_horizon(desk_channels, SolverConfig(max_outer_iters=3), inner_trace_at=2)
        inner = [r for r in trace.records if r.inner_iteration is not None]
        assert [r.inner_iteration for r in inner] == list(range(6))
        assert all(r.outer_iteration == 2 for r in inner)
        assert len(trace.outer()) == 4


def directional_derivatives(ch, V, rng, n=20, eps=1e-6):
    out = []
    for _ in range(n):
        E = complex_normal(rng, V.shape)
        E *= np.linalg.norm(V) / np.linalg.norm(E)
        out.append((objective_g(ch, V + eps * E) - objective_g(ch, V - eps * E)) / (2 * eps))
    return np.abs(out)


@pytest.mark.parametrize("variant,T", [("exact_wmmse", 5), ("finite_horizon", 50)])
def test_stationarity_at_convergence(desk_channels, variant, T):
    V, trace = run_solver(desk_channels, SolverConfig(variant, horizon=T, max_outer_iters=2000, rel_tol=1e-12))
    assert trace.converged
    dd = directional_derivatives(desk_channels, V, np.random.default_rng(5))
    assert dd.max() < 1e-4 * trace.final_wsr
