"""Time-domain Monte Carlo cross-check of the analytic spectra.

The amplitude-quadrature dynamics are linear with additive white noise:

    dc+/dt + gamma+ c+ = -eta+ C0 d + sqrt(2 g0+) a+(t) + sqrt(2 ge+) e+(t)
    dc-/dt + gamma- c- = +eta- C0 d + sqrt(2 g0-) a-(t) + sqrt(2 ge-) e-(t)
    dd/dt + gamma_m d  = C0 (eta+ c+ + eta- c-) + sqrt(2 gamma_m) q(t) + f(t)

with outputs ``b_pm = -a_pm + sqrt(2 g0_pm) c_pm``.  Noise intensities follow
the spectral-density convention of :mod:`optotriplet.spectra`: the optical
inputs ``a_pm, e_pm`` are unit white noise, the mechanical drive ``q`` has
intensity ``n_T + 1/2``.

Sampling is exact, not Euler-Maruyama: states advance by the matrix
exponential with the exact Ito noise increment, the recorded outputs are the
exact boxcar averages of ``b_pm`` over each step, and the joint covariance of
state and output noise within a step is integrated to quadrature precision.
The initial state is drawn from the stationary distribution, so every record
is stationary from the first sample.

The post-processed combination is applied in the frequency domain: segmented
Hann-windowed transforms of the two records are mixed per bin with the same
complex weights the analytic engine uses, and the averaged periodogram is
compared against ``S_qu + S_T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm, solve_continuous_lyapunov

from .constants import HBAR
from .params import DerivedParams
from .spectra import SpectrumRecord, coeffs, resolve_y

# fraction of the linear-stability step bound used by default configs
_DT_SAFETY = 0.8
#: slowest resolvable band edge: at least this many cycles must fit in a record
MIN_CYCLES_IN_RECORD = 100.0


class SimulationError(RuntimeError):
    """Raised when a run is rejected upfront or diverges."""


@dataclass(frozen=True)
class SignalPulse:
    """Resonant square force pulse: amplitude in newtons, acting over
    ``[t_start, t_start + duration]`` with carrier phase ``psi_f``."""

    force_amp: float
    duration: float
    t_start: float = 0.0
    psi_f: float = 0.0

    def quad_amp(self, d: DerivedParams) -> float:
        """Drive amplitude of the force quadrature in the normalized units."""
        p = d.phys
        return (
            self.force_amp
            * math.cos(self.psi_f)
            / (math.sqrt(2.0) * math.sqrt(2.0 * HBAR * p.omega_m * p.m))
        )


@dataclass(frozen=True)
class SimConfig:
    """Run settings for :func:`simulate`.

    ``dt`` must stay below a tenth of the fastest relaxation rate;
    :func:`stability_dt` gives the bound.  ``y_policy`` selects the
    combination weight used when the records are reduced to a spectral
    density (same conventions as the analytic sweep).
    """

    dt: float
    t_dur: float
    n_traj: int = 64
    seed: int = 0
    y_policy: object = "optimal"
    signal: SignalPulse | None = None
    noise: bool = True
    tag: str = ""
    chunk_steps: int = 16384
    dtype: str = "float64"  # storage dtype of the records; "float32" halves memory

    def __post_init__(self):
        if self.dtype not in ("float32", "float64"):
            raise SimulationError(f"dtype must be 'float32' or 'float64', got {self.dtype!r}")
        if self.dt <= 0.0 or not math.isfinite(self.dt):
            raise SimulationError(f"dt must be positive and finite, got {self.dt!r}")
        if self.t_dur <= 0.0 or self.t_dur < 2.0 * self.dt:
            raise SimulationError(f"t_dur must cover at least two steps, got {self.t_dur!r}")
        if self.n_traj < 1:
            raise SimulationError(f"n_traj must be >= 1, got {self.n_traj!r}")
        if self.chunk_steps < 1:
            raise SimulationError(f"chunk_steps must be >= 1, got {self.chunk_steps!r}")


def stability_dt(d: DerivedParams) -> float:
    """Largest admissible step: ``0.1 / max(gamma+, gamma-, |G(0)| + gamma_m)``."""
    g0 = abs(complex(coeffs(d, 0.0).g_opt))
    return 0.1 / max(d.gamma_plus, d.gamma_minus, g0 + d.gamma_m)


def default_sim_config(d: DerivedParams, seed: int = 0, **overrides) -> SimConfig:
    """Statistics tuned for a few-percent spectral check in minutes.

    64 trajectories over 2e4 mechanical periods; the step is 80% of the
    stability bound.
    """
    cfg = SimConfig(
        dt=_DT_SAFETY * stability_dt(d),
        t_dur=2e4 * (2.0 * math.pi / d.phys.omega_m),
        n_traj=64,
        seed=seed,
    )
    return replace(cfg, **overrides) if overrides else cfg


def _system_matrices(d: DerivedParams, noise_on: bool):
    """Drift, noise-input, intensity and output matrices of the quadrature set."""
    p = d.phys
    ep, em = d.eta_plus * d.c0, d.eta_minus * d.c0
    drift = np.array([
        [-d.gamma_plus, 0.0, -ep],
        [0.0, -d.gamma_minus, em],
        [ep, em, -d.gamma_m],
    ])
    f_in = np.array([
        [math.sqrt(2.0 * p.gamma0_plus), math.sqrt(2.0 * p.gamma_e_plus), 0.0, 0.0, 0.0],
        [0.0, 0.0, math.sqrt(2.0 * p.gamma0_minus), math.sqrt(2.0 * p.gamma_e_minus), 0.0],
        [0.0, 0.0, 0.0, 0.0, math.sqrt(2.0 * d.gamma_m)],
    ])
    intens = np.diag([1.0, 1.0, 1.0, 1.0, d.n_t + 0.5]) if noise_on else np.zeros((5, 5))
    c_out = np.array([
        [math.sqrt(2.0 * p.gamma0_plus), 0.0, 0.0],
        [0.0, math.sqrt(2.0 * p.gamma0_minus), 0.0],
    ])
    e_sel = np.array([
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0],
    ])
    return drift, f_in, intens, c_out, e_sel


def _step_operators(drift, f_in, intens, c_out, e_sel, dt, gl_order: int = 48):
    """One-step propagators and the exact joint noise covariance.

    Returns ``phi = exp(M dt)``, the step integrals ``J = int_0^dt exp(M s) ds``
    and ``JJ = int_0^dt K(u) du`` with ``K(s) = int_0^s exp(M v) dv``, and the
    5x5 covariance of the stacked per-step noise (state increment, output
    average).  All integrals are Gauss-Legendre quadrature of the explicit
    matrix-exponential integrands; with ``|M| dt <~ 0.1`` the result is exact
    to machine precision.
    """
    n = drift.shape[0]
    # exp of the augmented block matrix yields exp(M s) and K(s) together
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = drift
    aug[:n, n:] = np.eye(n)

    nodes, weights = np.polynomial.legendre.leggauss(gl_order)
    s_nodes = 0.5 * dt * (nodes + 1.0)
    s_weights = 0.5 * dt * weights

    fdf = f_in @ intens @ f_in.T

    cov_ww = np.zeros((n, n))
    cov_we = np.zeros((n, 2))
    cov_ee = np.zeros((2, 2))
    jj = np.zeros((n, n))
    for s, w in zip(s_nodes, s_weights):
        blocks = expm(aug * s)
        exp_s = blocks[:n, :n]
        k_s = blocks[:n, n:]
        g_s = c_out @ k_s @ f_in - e_sel  # output-noise kernel at lag s
        cov_ww += w * (exp_s @ fdf @ exp_s.T)
        cov_we += w * (exp_s @ (f_in @ intens @ g_s.T))
        cov_ee += w * (g_s @ intens @ g_s.T)
        jj += w * k_s

    blocks = expm(aug * dt)
    phi = blocks[:n, :n]
    j_dt = blocks[:n, n:]

    cov = np.zeros((n + 2, n + 2))
    cov[:n, :n] = cov_ww
    cov[:n, n:] = cov_we / dt
    cov[n:, :n] = cov_we.T / dt
    cov[n:, n:] = cov_ee / dt**2
    cov = 0.5 * (cov + cov.T)
    return phi, j_dt, jj, cov


def _factor_psd(cov: np.ndarray) -> np.ndarray:
    """Cholesky-like factor of a positive semi-definite covariance."""
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        vals = np.clip(vals, 0.0, None)
        return vecs * np.sqrt(vals)


@dataclass
class TimeSeriesBundle:
    """Sampled output quadratures of a run.

    ``b_plus``/``b_minus`` have shape ``(n_traj, n_steps)`` and hold the
    boxcar-averaged outputs over each step, stamped at the step start.
    ``traj_seeds`` are the per-trajectory spawn keys of the root seed.
    ``sigma`` is only filled by :meth:`sigma_timeseries`.
    """

    d: DerivedParams
    cfg: SimConfig
    dt: float
    b_plus: np.ndarray
    b_minus: np.ndarray
    traj_seeds: tuple[int, ...]
    sigma: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_steps(self) -> int:
        return self.b_plus.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.dt

    def sigma_timeseries(self, y_policy=None) -> np.ndarray:
        """Materialize the real-valued combined record per trajectory.

        Transforms the full records, applies the per-bin complex weights and
        transforms back; mainly for inspection, the spectral comparison never
        needs the time-domain combination.
        """
        y_policy = self.cfg.y_policy if y_policy is None else y_policy
        n = self.n_steps
        omega = 2.0 * math.pi * np.fft.rfftfreq(n, d=self.dt)
        wp, wm = sigma_weights(self.d, omega, y_policy)
        xp = np.conj(np.fft.rfft(np.asarray(self.b_plus, dtype=float), axis=1))
        xm = np.conj(np.fft.rfft(np.asarray(self.b_minus, dtype=float), axis=1))
        out = np.fft.irfft(np.conj(wp * xp + wm * xm), n=n, axis=1)
        self.sigma = out
        return out

    def dump_text(self, path, trajectory: int = 0) -> None:
        """Columnar dump of one trajectory: time, b_plus_a, b_minus_a."""
        data = np.column_stack([
            self.times,
            np.asarray(self.b_plus[trajectory], dtype=float),
            np.asarray(self.b_minus[trajectory], dtype=float),
        ])
        np.savetxt(path, data, header="time b_plus_a b_minus_a", comments="")


def sigma_weights(d: DerivedParams, omega, y_policy):
    """Complex per-frequency weights applied to the two records.

    ``W_pm = (y -/+ 1/2)(gm_tot - i Omega) / A_pm``; these give the combined
    record a unit signal-force coefficient at every frequency.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    c = coeffs(d, omega)
    y = resolve_y(d, c, y_policy)
    chi = c.gm_tot - 1j * omega
    return (y - 0.5) * chi / c.a_plus, (y + 0.5) * chi / c.a_minus


def simulate(d: DerivedParams, cfg: SimConfig) -> TimeSeriesBundle:
    """Integrate the quadrature dynamics and record both outputs.

    Rejects steps above the stability bound and drift matrices that are not
    strictly stable (those have no stationary state to sample).  Identical
    config and seed give bit-identical records; the result does not depend
    on ``chunk_steps``.
    """
    bound = stability_dt(d)
    if cfg.dt >= bound:
        raise SimulationError(
            f"dt = {cfg.dt:g} s violates the stability/accuracy bound {bound:g} s "
            "(0.1 over the fastest relaxation rate)"
        )
    drift, f_in, intens, c_out, e_sel = _system_matrices(d, cfg.noise)
    eigs = np.linalg.eigvals(drift)
    if np.any(eigs.real >= 0.0):
        raise SimulationError(
            f"drift matrix is not stable (eigenvalue real parts {np.sort(eigs.real)}); "
            "the sensor self-oscillates for these parameters"
        )

    n_steps = int(round(cfg.t_dur / cfg.dt))
    phi, j_dt, jj, cov = _step_operators(drift, f_in, intens, c_out, e_sel, cfg.dt)
    noise_factor = _factor_psd(cov)
    zx = (c_out @ j_dt) / cfg.dt  # output from the step-start state

    # per-step deterministic drive (signal pulse, constant within a step)
    f_amp = np.zeros(n_steps)
    if cfg.signal is not None:
        amp = cfg.signal.quad_amp(d)
        i0 = int(round(cfg.signal.t_start / cfg.dt))
        i1 = int(round((cfg.signal.t_start + cfg.signal.duration) / cfg.dt))
        if i0 < 0 or i1 > n_steps or i1 <= i0:
            raise SimulationError(
                f"signal window [{cfg.signal.t_start}, "
                f"{cfg.signal.t_start + cfg.signal.duration}] s does not fit the run"
            )
        f_amp[i0:i1] = amp
    e_drive = np.array([0.0, 0.0, 1.0])
    x_kick = j_dt @ e_drive           # state response to unit drive over one step
    z_kick = (c_out @ jj @ e_drive) / cfg.dt

    if cfg.noise:
        stat_cov = solve_continuous_lyapunov(drift, -(f_in @ intens @ f_in.T))
        stat_factor = _factor_psd(0.5 * (stat_cov + stat_cov.T))
    else:
        stat_factor = np.zeros((3, 3))

    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(cfg.n_traj)
    rngs = [np.random.Generator(np.random.PCG64(s)) for s in children]
    traj_seeds = tuple(int(s.spawn_key[-1]) for s in children)  # children of cfg.seed

    n_tr = cfg.n_traj
    store = np.dtype(cfg.dtype)
    b_plus = np.empty((n_tr, n_steps), dtype=store)
    b_minus = np.empty((n_tr, n_steps), dtype=store)

    x = np.empty((3, n_tr))
    for k, rng in enumerate(rngs):
        x[:, k] = stat_factor @ rng.standard_normal(3)

    for start in range(0, n_steps, cfg.chunk_steps):
        stop = min(start + cfg.chunk_steps, n_steps)
        csteps = stop - start
        eps = np.empty((csteps, 5, n_tr))
        for k, rng in enumerate(rngs):
            eps[:, :, k] = rng.standard_normal((csteps, 5))
        joint = np.einsum("ij,sjk->sik", noise_factor, eps)
        for s in range(csteps):
            n = start + s
            z = zx @ x + joint[s, 3:, :]
            if f_amp[n] != 0.0:
                z += (z_kick * f_amp[n])[:, None]
            b_plus[:, n] = z[0]
            b_minus[:, n] = z[1]
            x = phi @ x + joint[s, :3, :]
            if f_amp[n] != 0.0:
                x += (x_kick * f_amp[n])[:, None]
        if not np.all(np.isfinite(x)):
            raise SimulationError(f"state diverged by step {stop} (of {n_steps})")

    return TimeSeriesBundle(
        d=d, cfg=cfg, dt=cfg.dt, b_plus=b_plus, b_minus=b_minus, traj_seeds=traj_seeds
    )


# --- spectral estimation ------------------------------------------------------

def _hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _segment_bins(n_seg_len: int, dt: float) -> np.ndarray:
    """Positive interior FFT bins (DC and Nyquist dropped) in rad/s."""
    omega = 2.0 * math.pi * np.fft.rfftfreq(n_seg_len, d=dt)
    return omega[1:-1] if n_seg_len % 2 == 0 else omega[1:]


def welch_psd(x: np.ndarray, dt: float, segments: int):
    """Averaged Hann-windowed periodogram of real records.

    ``x`` has shape ``(..., L)``; leading axes are averaged as independent
    records.  Normalized so unit-intensity white noise (sample variance
    ``1/dt``) estimates a flat density of one; a density ``S(Omega)`` in
    these units integrates to the variance as ``int S dOmega / (2 pi)``.
    Returns ``(omega, psd)`` over the interior positive bins.
    """
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[None, :]
    n_len = x.shape[-1]
    if segments < 8:
        raise ValueError(f"need at least 8 segments, got {segments}")
    seg_len = n_len // segments
    if seg_len < 64:
        raise ValueError(
            f"series too short: {n_len} samples give segments of {seg_len} (< 64)"
        )
    win = _hann(seg_len)
    norm = dt / np.sum(win**2)
    acc = 0.0
    for s in range(segments):
        seg = np.asarray(x[..., s * seg_len:(s + 1) * seg_len], dtype=float)
        spec = np.fft.rfft(seg * win, axis=-1)
        acc = acc + np.abs(spec) ** 2
    psd = norm * np.mean(acc.reshape(-1, acc.shape[-1]), axis=0) / segments
    if seg_len % 2 == 0:
        psd = psd[1:-1]
    else:
        psd = psd[1:]
    return _segment_bins(seg_len, dt), psd


@dataclass(frozen=True)
class PsdEstimate:
    """Averaged spectral density of the combined record's noise.

    ``rel_err`` is the one-sigma relative error bar per bin,
    ``1/sqrt(segments * n_traj)``.
    """

    omega: np.ndarray
    psd: np.ndarray
    rel_err: float
    n_ind: int
    segments: int
    t_dur: float
    t_seg: float
    band: tuple[float, float]


def estimate_psd(ts: TimeSeriesBundle, segments: int = 16) -> PsdEstimate:
    """Spectral density of the combined record from a run's output series.

    The two channels are transformed per Hann segment, mixed per bin with
    the weights of :func:`sigma_weights` (so cross-correlations between the
    channels are kept), and the periodograms are averaged over segments and
    trajectories in fixed order.
    """
    if segments < 8:
        raise ValueError(f"need at least 8 segments, got {segments}")
    n_len = ts.n_steps
    seg_len = n_len // segments
    if seg_len < 64:
        raise ValueError(
            f"series too short: {n_len} samples give segments of {seg_len} (< 64)"
        )
    dt = ts.dt
    omega = _segment_bins(seg_len, dt)
    wp, wm = sigma_weights(ts.d, omega, ts.cfg.y_policy)

    win = _hann(seg_len)
    norm = 1.0 / (dt * np.sum(win**2))  # |dt * DFT|^2 -> density
    keep = slice(1, -1) if seg_len % 2 == 0 else slice(1, None)
    acc = np.zeros(omega.size)
    for s in range(segments):
        sl = slice(s * seg_len, (s + 1) * seg_len)
        xp = dt * np.conj(np.fft.rfft(np.asarray(ts.b_plus[:, sl], dtype=float) * win, axis=1))
        xm = dt * np.conj(np.fft.rfft(np.asarray(ts.b_minus[:, sl], dtype=float) * win, axis=1))
        mix = wp[None, :] * xp[:, keep] + wm[None, :] * xm[:, keep]
        acc += norm * np.sum(np.abs(mix) ** 2, axis=0)
    n_ind = segments * ts.cfg.n_traj
    psd = acc / n_ind
    return PsdEstimate(
        omega=omega,
        psd=psd,
        rel_err=1.0 / math.sqrt(n_ind),
        n_ind=n_ind,
        segments=segments,
        t_dur=n_len * dt,
        t_seg=seg_len * dt,
        band=(float(omega[0]), float(omega[-1])),
    )


# --- comparison against the analytic engine -----------------------------------

@dataclass(frozen=True)
class ComparisonReport:
    """Band-wise agreement between estimated and analytic densities."""

    band: tuple[float, float]
    n_bins: int
    frac_within_3sigma: float
    max_dev_sigma: float
    median_ratio: float
    chi2_reduced: float
    rel_err: float
    passed: bool

    def format(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return "\n".join([
            f"spectral comparison: {status}",
            f"  band                [{self.band[0]:.6e}, {self.band[1]:.6e}] rad/s",
            f"  bins compared       {self.n_bins}",
            f"  per-bin 1-sigma     {100.0 * self.rel_err:.3f} %",
            f"  within 3 sigma      {100.0 * self.frac_within_3sigma:.2f} % (need >= 95 %)",
            f"  worst deviation     {self.max_dev_sigma:.3f} sigma",
            f"  median est/analytic {self.median_ratio:.6f}",
            f"  reduced chi-square  {self.chi2_reduced:.4f}",
        ])


def compare(analytic: list[SpectrumRecord], est: PsdEstimate, band: tuple[float, float]) -> ComparisonReport:
    """Pointwise check of the estimate against analytic ``S_qu + S_T``.

    ``analytic`` must hold one record per estimate bin inside ``band`` at the
    same frequencies.  Passes when at least 95% of the band bins agree within
    three error bars.  Rejects bands that do not overlap the estimate or that
    reach below the resolution supported by the record length.
    """
    lo, hi = band
    if not (0.0 < lo < hi):
        raise ValueError(f"band must satisfy 0 < lo < hi, got {band!r}")
    min_lo = MIN_CYCLES_IN_RECORD * 2.0 * math.pi / est.t_dur
    if lo < min_lo * (1.0 - 1e-12):
        raise ValueError(
            f"band lower edge {lo:g} rad/s is below the resolvable limit {min_lo:g} rad/s "
            f"for a {est.t_dur:g} s record ({MIN_CYCLES_IN_RECORD:g} cycles required)"
        )
    sel = (est.omega >= lo) & (est.omega <= hi)
    if not np.any(sel):
        raise ValueError(
            f"band {band!r} does not overlap the estimated bins "
            f"[{est.omega[0]:g}, {est.omega[-1]:g}]"
        )
    omega_sel = est.omega[sel]
    psd_sel = est.psd[sel]

    ana_omega = np.array([r.omega for r in analytic])
    ana_sf = np.array([r.s_f for r in analytic])
    if ana_omega.shape != omega_sel.shape or not np.allclose(
        ana_omega, omega_sel, rtol=1e-9, atol=0.0
    ):
        raise ValueError(
            "analytic records must be evaluated exactly at the estimate's band bins "
            f"({omega_sel.size} bins in {band!r})"
        )

    sigma = est.rel_err * ana_sf
    dev = (psd_sel - ana_sf) / sigma
    frac = float(np.mean(np.abs(dev) <= 3.0))
    report = ComparisonReport(
        band=(float(lo), float(hi)),
        n_bins=int(omega_sel.size),
        frac_within_3sigma=frac,
        max_dev_sigma=float(np.max(np.abs(dev))),
        median_ratio=float(np.median(psd_sel / ana_sf)),
        chi2_reduced=float(np.mean(dev**2)),
        rel_err=est.rel_err,
        passed=frac >= 0.95,
    )
    return report


def analytic_records_for(d: DerivedParams, est: PsdEstimate, band: tuple[float, float],
                         y_policy=None, tag: str = "") -> list[SpectrumRecord]:
    """Analytic sweep evaluated exactly on an estimate's band bins."""
    from .spectra import spectrum_sweep

    y_policy = "optimal" if y_policy is None else y_policy
    sel = (est.omega >= band[0]) & (est.omega <= band[1])
    return spectrum_sweep(d, est.omega[sel], y_policy=y_policy, tag=tag)


def default_band(d: DerivedParams, cfg: SimConfig) -> tuple[float, float]:
    """Comparison band supported by a run: resolution-limited lower edge up to
    ten cycles of the measurement window (clipped inside Nyquist)."""
    lo = MIN_CYCLES_IN_RECORD * 2.0 * math.pi / (int(round(cfg.t_dur / cfg.dt)) * cfg.dt)
    hi = min(2.0 * math.pi * 10.0 / d.phys.tau, 0.8 * math.pi / cfg.dt)
    if hi <= lo:
        raise ValueError(f"run too short for any comparison band (lo {lo:g} >= hi {hi:g})")
    return lo, hi


def run_comparison(d: DerivedParams, cfg: SimConfig, segments: int = 16,
                   band: tuple[float, float] | None = None):
    """Simulate, estimate and compare in one call.

    Returns ``(report, estimate, analytic_records)``.
    """
    ts = simulate(d, cfg)
    est = estimate_psd(ts, segments=segments)
    if band is None:
        band = default_band(d, cfg)
    analytic = analytic_records_for(d, est, band, y_policy=cfg.y_policy, tag=cfg.tag)
    return compare(analytic, est, band), est, analytic
