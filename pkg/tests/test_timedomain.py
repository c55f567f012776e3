import dataclasses

import numpy as np
import pytest

import optotriplet as ot
from optotriplet.optimizer import y_opt_analytic
from optotriplet.timedomain import (
    SimulationError,
    _system_matrices,
    default_band,
    sigma_weights,
    welch_psd,
)


@pytest.fixture(scope="module")
def d_lossy():
    return ot.derive(ot.table1_preset())


@pytest.fixture(scope="module")
def d_sym():
    return ot.derive(ot.variant(ot.table1_preset(), symmetric=True, lossless=True))


def short_cfg(d, **kw):
    kw.setdefault("n_traj", 4)
    kw.setdefault("t_dur", 0.002)
    kw.setdefault("seed", 99)
    return ot.default_sim_config(d, **kw)


# --- estimator calibration ------------------------------------------------------

def test_welch_white_noise_calibration():
    rng = np.random.default_rng(40)
    dt = 1e-3
    x = rng.standard_normal((8, 120_000)) / np.sqrt(dt)
    om, psd = welch_psd(x, dt, segments=16)
    assert om[0] > 0.0
    assert abs(psd.mean() - 1.0) < 0.03
    # per-bin scatter consistent with 1/sqrt(n_ind)
    assert np.std(psd) < 3.0 / np.sqrt(8 * 16)


def test_welch_sinusoid_peak():
    dt = 1e-3
    n = 65536
    seg = n // 16
    f0 = 200 / (seg * dt)  # exactly on a bin
    x = np.sqrt(2.0) * np.cos(2 * np.pi * f0 * np.arange(n) * dt)
    om, psd = welch_psd(x, dt, segments=16)
    k = int(np.argmax(psd))
    assert om[k] == pytest.approx(2 * np.pi * f0, rel=1e-12)
    side = np.delete(psd, [k - 1, k, k + 1])
    assert psd[k] > 1e6 * np.max(side)


def test_welch_guards():
    with pytest.raises(ValueError, match="segments"):
        welch_psd(np.zeros(1000), 1e-3, segments=4)
    with pytest.raises(ValueError, match="too short"):
        welch_psd(np.zeros(100), 1e-3, segments=8)


def test_error_bar_scaling(d_sym):
    cfg8 = short_cfg(d_sym, n_traj=8)
    cfg32 = short_cfg(d_sym, n_traj=32)
    e8 = ot.estimate_psd(ot.simulate(d_sym, cfg8), segments=8)
    e32 = ot.estimate_psd(ot.simulate(d_sym, cfg32), segments=8)
    assert e32.rel_err == pytest.approx(0.5 * e8.rel_err, rel=1e-12)
    assert e8.n_ind == 64 and e32.n_ind == 256


# --- simulator ------------------------------------------------------------------

def test_zero_noise_zero_signal_zero_output(d_lossy):
    cfg = short_cfg(d_lossy, noise=False, n_traj=2)
    ts = ot.simulate(d_lossy, cfg)
    assert not np.any(ts.b_plus)
    assert not np.any(ts.b_minus)


def test_seed_determinism(d_lossy):
    cfg = short_cfg(d_lossy)
    a = ot.simulate(d_lossy, cfg)
    b = ot.simulate(d_lossy, cfg)
    assert np.array_equal(a.b_plus, b.b_plus)
    assert np.array_equal(a.b_minus, b.b_minus)
    c = ot.simulate(d_lossy, dataclasses.replace(cfg, seed=cfg.seed + 1))
    assert not np.array_equal(a.b_plus, c.b_plus)


def test_chunking_invisible(d_lossy):
    a = ot.simulate(d_lossy, short_cfg(d_lossy, chunk_steps=977))
    b = ot.simulate(d_lossy, short_cfg(d_lossy, chunk_steps=4096))
    assert np.array_equal(a.b_plus, b.b_plus)
    assert np.array_equal(a.b_minus, b.b_minus)


def test_dt_bound_rejected_upfront(d_lossy):
    bound = ot.stability_dt(d_lossy)
    with pytest.raises(SimulationError, match="stability"):
        ot.simulate(d_lossy, dataclasses.replace(short_cfg(d_lossy), dt=2.0 * bound))


def test_antidamped_configuration_rejected():
    # swapping the coupling asymmetry makes the optical damping negative and
    # larger than the intrinsic loss: the sensor self-oscillates
    p = dataclasses.replace(ot.table1_preset(), eps_plus=0.97, eps_minus=1.03)
    d = ot.derive(p)
    with pytest.raises(SimulationError, match="stable"):
        ot.simulate(d, short_cfg(d))


def test_config_validation(d_lossy):
    with pytest.raises(SimulationError):
        ot.SimConfig(dt=-1e-7, t_dur=1.0)
    with pytest.raises(SimulationError):
        ot.SimConfig(dt=1e-7, t_dur=1e-8)
    with pytest.raises(SimulationError):
        ot.SimConfig(dt=1e-7, t_dur=1.0, n_traj=0)
    with pytest.raises(SimulationError):
        ot.SimConfig(dt=1e-7, t_dur=1.0, dtype="float16")


def test_signal_linearity_noiseless(d_lossy):
    base = dict(noise=False, n_traj=1, t_dur=0.004)
    p1 = ot.SignalPulse(force_amp=1e-15, duration=5e-6, t_start=1e-4)
    p2 = ot.SignalPulse(force_amp=2e-15, duration=5e-6, t_start=1e-4)
    a = ot.simulate(d_lossy, short_cfg(d_lossy, signal=p1, **base))
    b = ot.simulate(d_lossy, short_cfg(d_lossy, signal=p2, **base))
    np.testing.assert_allclose(b.b_plus, 2.0 * a.b_plus, rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(b.b_minus, 2.0 * a.b_minus, rtol=1e-12, atol=1e-300)


def test_signal_linearity_with_fixed_seeds(d_lossy):
    # same seeds: subtracting the signal-free run isolates the response exactly
    p1 = ot.SignalPulse(force_amp=1e-15, duration=5e-6, t_start=1e-4)
    p2 = ot.SignalPulse(force_amp=2e-15, duration=5e-6, t_start=1e-4)
    cfg0 = short_cfg(d_lossy, n_traj=2)
    a0 = ot.simulate(d_lossy, cfg0)
    a1 = ot.simulate(d_lossy, dataclasses.replace(cfg0, signal=p1))
    a2 = ot.simulate(d_lossy, dataclasses.replace(cfg0, signal=p2))
    det1 = a1.b_plus - a0.b_plus
    det2 = a2.b_plus - a0.b_plus
    scale = np.max(np.abs(det1))
    assert scale > 0.0
    np.testing.assert_allclose(det2, 2.0 * det1, atol=1e-9 * scale)


def test_signal_window_must_fit(d_lossy):
    bad = ot.SignalPulse(force_amp=1e-15, duration=1.0, t_start=0.0)
    with pytest.raises(SimulationError, match="window"):
        ot.simulate(d_lossy, short_cfg(d_lossy, signal=bad, noise=False))


def test_phase_quadrature_projection(d_lossy):
    # the drive couples through cos(psi_f); a pi/2 carrier phase leaves
    # essentially nothing in the measured quadrature
    base = dict(duration=5e-6, t_start=1e-4)
    in_phase = ot.SignalPulse(force_amp=1e-15, **base)
    quadrature = ot.SignalPulse(force_amp=1e-15, psi_f=np.pi / 2.0, **base)
    a = ot.simulate(d_lossy, short_cfg(d_lossy, signal=in_phase, noise=False, n_traj=1))
    b = ot.simulate(d_lossy, short_cfg(d_lossy, signal=quadrature, noise=False, n_traj=1))
    assert np.max(np.abs(b.b_plus)) < 1e-12 * np.max(np.abs(a.b_plus))


def test_stationary_start(d_sym):
    # stationary init: first and second halves give consistent spectra
    cfg = ot.default_sim_config(d_sym, seed=13, n_traj=8, t_dur=0.02)
    ts = ot.simulate(d_sym, cfg)
    half = ts.n_steps // 2
    first = dataclasses.replace(ts, b_plus=ts.b_plus[:, :half], b_minus=ts.b_minus[:, :half])
    second = dataclasses.replace(ts, b_plus=ts.b_plus[:, half:], b_minus=ts.b_minus[:, half:])
    e1 = ot.estimate_psd(first, segments=8)
    e2 = ot.estimate_psd(second, segments=8)
    band = (2e5, 7e5)  # well-resolved bins only
    sel = (e1.omega >= band[0]) & (e1.omega <= band[1])
    diff = e1.psd[sel] / e2.psd[sel] - 1.0
    sigma = np.sqrt(e1.rel_err**2 + e2.rel_err**2)
    assert np.mean(np.abs(diff) <= 4.0 * sigma) > 0.9


def test_traj_seeds_recorded(d_lossy):
    ts = ot.simulate(d_lossy, short_cfg(d_lossy, n_traj=3))
    assert len(ts.traj_seeds) == 3


def test_sigma_timeseries_and_dump(tmp_path, d_lossy):
    cfg = short_cfg(d_lossy, n_traj=2)
    ts = ot.simulate(d_lossy, cfg)
    sig = ts.sigma_timeseries()
    assert sig.shape == ts.b_plus.shape
    assert np.isrealobj(sig)
    path = tmp_path / "series.txt"
    ts.dump_text(path)
    lines = path.read_text().splitlines()
    assert lines[0].split() == ["time", "b_plus_a", "b_minus_a"]
    assert len(lines) == ts.n_steps + 1


# --- estimator + comparison ------------------------------------------------------

def test_estimate_psd_guards(d_lossy):
    ts = ot.simulate(d_lossy, short_cfg(d_lossy, n_traj=2))
    with pytest.raises(ValueError, match="segments"):
        ot.estimate_psd(ts, segments=4)
    tiny = dataclasses.replace(ts, b_plus=ts.b_plus[:, :400], b_minus=ts.b_minus[:, :400])
    with pytest.raises(ValueError, match="too short"):
        ot.estimate_psd(tiny, segments=8)


def test_compare_identity_passes(d_lossy):
    cfg = short_cfg(d_lossy, n_traj=2)
    ts = ot.simulate(d_lossy, cfg)
    est = ot.estimate_psd(ts, segments=8)
    band = default_band(d_lossy, cfg)
    analytic = ot.timedomain.analytic_records_for(d_lossy, est, band)
    sel = (est.omega >= band[0]) & (est.omega <= band[1])
    forged = dataclasses.replace(est, psd=est.psd.copy())
    forged.psd[sel] = [r.s_f for r in analytic]
    rep = ot.compare(analytic, forged, band)
    assert rep.passed
    assert rep.frac_within_3sigma == 1.0
    assert rep.chi2_reduced == 0.0
    assert rep.median_ratio == 1.0
    assert "PASS" in rep.format()


def test_compare_rejects_misscaled(d_lossy):
    cfg = short_cfg(d_lossy, n_traj=4, t_dur=0.004)
    ts = ot.simulate(d_lossy, cfg)
    est = ot.estimate_psd(ts, segments=8)
    band = default_band(d_lossy, cfg)
    analytic = ot.timedomain.analytic_records_for(d_lossy, est, band)
    doubled = [dataclasses.replace(r, s_f=2.0 * r.s_f) for r in analytic]
    rep = ot.compare(doubled, est, band)
    assert not rep.passed
    assert "FAIL" in rep.format()


def test_compare_band_guards(d_lossy):
    cfg = short_cfg(d_lossy, n_traj=2)
    ts = ot.simulate(d_lossy, cfg)
    est = ot.estimate_psd(ts, segments=8)
    with pytest.raises(ValueError, match="resolvable"):
        ot.compare([], est, (1.0, 10.0))
    with pytest.raises(ValueError, match="does not overlap"):
        ot.compare([], est, (1e9, 2e9))
    band = default_band(d_lossy, cfg)
    with pytest.raises(ValueError, match="band bins"):
        ot.compare([], est, band)


def test_monte_carlo_agreement_smoke(d_sym):
    # reduced-statistics version of the acceptance run
    cfg = ot.default_sim_config(d_sym, seed=3, n_traj=8, t_dur=0.015)
    report, est, analytic = ot.run_comparison(d_sym, cfg, segments=8)
    assert report.passed
    assert abs(report.median_ratio - 1.0) < 0.08


def test_backaction_signature():
    # strong pump makes the y = 0 penalty visible above the estimator noise
    p = ot.variant(ot.table1_preset(), pump_mult=1000.0)
    d = ot.derive(p)
    cfg = ot.default_sim_config(d, seed=11, n_traj=16, t_dur=0.03)
    ts = ot.simulate(d, cfg)
    est_opt = ot.estimate_psd(ts, segments=16)
    ts0 = dataclasses.replace(ts, cfg=dataclasses.replace(cfg, y_policy=0.0))
    est0 = ot.estimate_psd(ts0, segments=16)
    band = default_band(d, cfg)
    sel = (est_opt.omega >= band[0]) & (est_opt.omega <= band[1])
    om = est_opt.omega[sel]
    c = ot.coeffs(d, om)
    s_opt = np.asarray(ot.s_qu(c, d, y_opt_analytic(c, d)))
    s_zero = np.asarray(ot.s_qu(c, d, 0.0))
    excess_ana = s_zero - s_opt
    strong = excess_ana > 0.2 * s_opt
    assert strong.sum() > 10
    assert np.all(est0.psd[sel][strong] > est_opt.psd[sel][strong])
    ratio_strong = (est0.psd[sel][strong] - est_opt.psd[sel][strong]) / excess_ana[strong]
    assert 0.7 < np.median(ratio_strong) < 1.3
    band_mean = np.sum(est0.psd[sel] - est_opt.psd[sel]) / np.sum(excess_ana)
    assert 0.8 < band_mean < 1.25


def test_default_band(d_lossy):
    cfg = short_cfg(d_lossy)
    lo, hi = default_band(d_lossy, cfg)
    t_rec = int(round(cfg.t_dur / cfg.dt)) * cfg.dt  # actual record length
    assert lo == pytest.approx(100.0 * 2.0 * np.pi / t_rec, rel=1e-12)
    assert hi <= 2.0 * np.pi * 10.0 / d_lossy.phys.tau


def test_raw_channel_spectra_match_transfer_model(d_lossy):
    # independent check of the integrator: the single-channel densities follow
    # from the output expansion, a different combination than the weighted sum
    d = d_lossy
    cfg = ot.default_sim_config(d, seed=7, n_traj=8, t_dur=0.01)
    ts = ot.simulate(d, cfg)
    segs = 8
    om, psd_p = welch_psd(ts.b_plus, ts.dt, segs)
    _, psd_m = welch_psd(ts.b_minus, ts.dt, segs)
    sel = om > 200.0 * 2.0 * np.pi / cfg.t_dur
    om = om[sel]
    c = ot.coeffs(d, om)
    p = d.phys
    st = ot.s_thermal(d)
    pref_p = np.abs(c.a_plus / (c.gm_tot - 1j * om)) ** 2
    pref_m = np.abs(c.a_minus / (c.gm_tot - 1j * om)) ** 2
    sb_p = pref_p * (
        np.abs(c.b_plus - c.a_plus) ** 2 + np.abs(c.a_minus) ** 2
        + (p.gamma_e_plus / p.gamma0_plus) * np.abs(c.be_plus - c.a_plus) ** 2
        + (p.gamma_e_minus / p.gamma0_minus) * np.abs(c.a_minus) ** 2 + st
    )
    sb_m = pref_m * (
        np.abs(c.b_minus + c.a_minus) ** 2 + np.abs(c.a_plus) ** 2
        + (p.gamma_e_minus / p.gamma0_minus) * np.abs(c.be_minus + c.a_minus) ** 2
        + (p.gamma_e_plus / p.gamma0_plus) * np.abs(c.a_plus) ** 2 + st
    )
    n_ind = segs * cfg.n_traj
    for est, ana in ((psd_p[sel], sb_p), (psd_m[sel], sb_m)):
        ratio = est / ana
        assert abs(np.median(ratio) - 1.0) < 0.05
        assert np.mean(np.abs(ratio - 1.0) <= 4.0 / np.sqrt(n_ind)) > 0.9


def test_sigma_weights_give_unit_signal_coefficient(d_lossy):
    # W+ b+ + W- b- assembles the combination whose force coefficient is one:
    # checked through the identity W+ A+ - W- A- = -(gm_tot - i Omega)
    om = np.geomspace(1e3, 7e5, 9)
    c = ot.coeffs(d_lossy, om)
    wp, wm = sigma_weights(d_lossy, om, 0.25 - 0.1j)
    chi = c.gm_tot - 1j * om
    np.testing.assert_allclose(wm * c.a_minus - wp * c.a_plus, chi, rtol=1e-12)


def test_system_matrices_shapes(d_lossy):
    drift, f_in, intens, c_out, e_sel = _system_matrices(d_lossy, True)
    assert drift.shape == (3, 3)
    assert f_in.shape == (3, 5)
    assert intens.shape == (5, 5)
    assert c_out.shape == (2, 3)
    assert e_sel.shape == (2, 5)
    assert intens[4, 4] == pytest.approx(d_lossy.n_t + 0.5)
