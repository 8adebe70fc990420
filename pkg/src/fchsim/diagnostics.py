"""Norms, energy records, decay-exponent fits and trajectory checks."""

from dataclasses import dataclass

import numpy as np

from .spectral import to_physical, to_spectral


@dataclass
class EnergyRecord:
    """One time sample of the energy balance.

    E = |u|^2 + alpha^2 |grad u|^2 and D is the matching dissipation
    |Lam^beta u|^2 + alpha^2 |grad Lam^beta u|^2; v_l2 and gradv_l2 are
    squared norms of the unfiltered field; fhat_max is the largest
    continuum-normalized Fourier amplitude of v.
    """
    t: float
    E: float
    D: float
    v_l2: float
    gradv_l2: float
    fhat_max: float

    CSV_HEADER = "t,E,D,v_l2,gradv_l2,fhat_max"

    def as_row(self):
        return (self.t, self.E, self.D, self.v_l2, self.gradv_l2,
                self.fhat_max)


@dataclass
class DecayFit:
    """Windowed least-squares power-law fit value ~ (1+t)^exponent."""
    t_lo: float
    t_hi: float
    exponent: float
    intercept: float
    r_squared: float

    def is_algebraic(self, threshold=0.98):
        return self.r_squared >= threshold


def l2_inner(a, b):
    """Discrete L2 inner product, via Parseval when both are spectral."""
    if a.grid != b.grid:
        raise ValueError("grid mismatch")
    if a.is_spectral and b.is_spectral:
        s = np.sum(a.data * np.conj(b.data)).real
        return float(s * a.grid.mode_weight)
    ap, bp = to_physical(a), to_physical(b)
    return float(np.sum(ap.data * bp.data) * a.grid.cell_volume)


def l2_norm_sq(field):
    return l2_inner(field, field)


def gradient_norm_sq(field, order=1):
    """Squared Sobolev seminorm |grad^m f|^2 = sum |k|^(2m) |fhat|^2."""
    fh = to_spectral(field)
    w = fh.grid.k_squared ** order if order else np.ones(fh.grid.shape)
    return float(np.sum(w * np.sum(np.abs(fh.data) ** 2, axis=0))
                 * fh.grid.mode_weight)


def record_energy(state, params):
    """Spectral evaluation of the energy balance at one state.

    All sums use the explicit Parseval mode weight; the filter is applied
    per mode, so E and D come straight from the spectrum of v.
    """
    vh = state.v.field
    grid = vh.grid
    ksq = grid.k_squared
    amp2 = np.sum(np.abs(vh.data) ** 2, axis=0)
    denom = 1.0 + params.alpha ** 2 * ksq
    w = grid.mode_weight
    sym = np.zeros_like(ksq)
    nz = ksq > 0
    sym[nz] = ksq[nz] ** params.beta
    E = float(np.sum(amp2 / denom) * w)
    D = float(np.sum(sym * amp2 / denom) * w)
    v_l2 = float(np.sum(amp2) * w)
    gradv_l2 = float(np.sum(ksq * amp2) * w)
    fhat_max = float(np.max(np.sqrt(amp2)) * grid.cell_volume)
    return EnergyRecord(float(state.t), E, D, v_l2, gradv_l2, fhat_max)


def lp_norm(field, p):
    """Discrete Lebesgue norm of the pointwise field magnitude.

    Spectral inputs are transformed to physical first.
    """
    if p != np.inf and p < 1:
        raise ValueError("p must be >= 1 or inf")
    f = to_physical(field)
    mag = np.sqrt(np.sum(f.data ** 2, axis=0))
    if p == np.inf:
        return float(np.max(mag))
    return float((np.sum(mag ** p) * f.grid.cell_volume) ** (1.0 / p))


def default_fit_window(t_end):
    """Drop the transient (t < 5) and the box-contaminated final 10%."""
    return (5.0, 0.9 * t_end)


def fit_decay(series, window=None):
    """Least-squares line on (log(1+t), log value) inside the window.

    Needs at least 10 positive samples in the window.
    """
    arr = np.asarray([(t, v) for t, v in series], dtype=float)
    if window is None:
        window = default_fit_window(arr[-1, 0])
    t_lo, t_hi = float(window[0]), float(window[1])
    if not t_lo < t_hi:
        raise ValueError("empty fit window")
    sel = (arr[:, 0] >= t_lo) & (arr[:, 0] <= t_hi)
    t, v = arr[sel, 0], arr[sel, 1]
    if len(t) < 10:
        raise ValueError("need at least 10 samples in the fit window, got %d"
                         % len(t))
    if np.any(v <= 0):
        raise ValueError("nonpositive values in fit window")
    x = np.log1p(t)
    y = np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot == 0 and ss_res == 0 else 1.0 - ss_res / ss_tot
    r2 = min(max(r2, 0.0), 1.0)
    return DecayFit(t_lo, t_hi, float(slope), float(intercept), r2)


def _cumulative_trapezoid(t, y):
    out = np.zeros_like(t)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def fourier_amplitude_bound_check(records):
    """Running ratio of max |vhat| to its a-priori bound along a trajectory.

    The bound's integral of |u|^2 is stood in for by the recorded |v|^2,
    which dominates it; that changes the ratio by at most the bounded
    filter factor and not the boundedness verdict.
    """
    t = np.array([r.t for r in records])
    fhat = np.array([r.fhat_max for r in records])
    iu = _cumulative_trapezoid(t, np.array([r.v_l2 for r in records]))
    ig = _cumulative_trapezoid(t, np.array([r.gradv_l2 for r in records]))
    denom = 1.0 + np.sqrt(iu) * np.sqrt(ig)
    ratio = fhat / denom
    n = len(ratio)
    head = ratio[: max(2, (3 * n) // 4)]
    tail = ratio[(3 * n) // 4:]
    bounded = bool(np.all(np.isfinite(ratio))
                   and (len(tail) == 0
                        or np.max(tail) <= 1.02 * np.max(head) + 1e-300))
    return {
        "t": t.tolist(),
        "ratio": ratio.tolist(),
        "max_ratio": float(np.max(ratio)),
        "bounded": bounded,
    }


def time_average_decay_check(series):
    """Cesaro mean (1/t) int |v| dtau; reports whether it decays.

    Accepts EnergyRecord lists (|v| taken as sqrt of the recorded squared
    norm) or plain (t, value) pairs.
    """
    if len(series) and hasattr(series[0], "v_l2"):
        t = np.array([r.t for r in series])
        v = np.sqrt(np.array([r.v_l2 for r in series]))
    else:
        arr = np.asarray([(a, b) for a, b in series], dtype=float)
        t, v = arr[:, 0], arr[:, 1]
    integral = _cumulative_trapezoid(t, v)
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = np.where(t > 0, integral / np.where(t > 0, t, 1.0), v)
    half = len(t) // 2
    final = mean[half:]
    decreasing = bool(len(final) >= 2 and np.all(np.diff(final) <= 1e-12))
    return {
        "t": t.tolist(),
        "cesaro_mean": mean.tolist(),
        "decreasing_final_half": decreasing,
        "final_mean": float(mean[-1]),
    }


def solution_distance(a, b, q):
    """Discrete L^q distance between two fields on the same grid."""
    if a.grid != b.grid:
        raise ValueError("grid mismatch")
    pa, pb = to_physical(a), to_physical(b)
    return lp_norm(pa - pb, q)


def linear_decay_curve(v0, params, times):
    """Energy curves of the nonlinearity-off dynamics, straight from the
    spectrum of v0.  Returns arrays for E, |v|^2 and |grad v|^2.

    Useful as a sanity path and as the quasi-linear prediction that the
    decay reports quote next to the measured fits.
    """
    vh = to_spectral(v0)
    grid = vh.grid
    ksq = grid.k_squared.ravel()
    amp2 = np.sum(np.abs(vh.data) ** 2, axis=0).ravel()
    sym = np.zeros_like(ksq)
    nz = ksq > 0
    sym[nz] = ksq[nz] ** params.beta
    denom = 1.0 + params.alpha ** 2 * ksq
    w = grid.mode_weight
    times = np.asarray(times, dtype=float)
    E = np.empty_like(times)
    v_l2 = np.empty_like(times)
    gradv_l2 = np.empty_like(times)
    for i, t in enumerate(times):
        decay = np.exp(-2.0 * params.nu * sym * t)
        E[i] = np.sum(amp2 * decay / denom) * w
        v_l2[i] = np.sum(amp2 * decay) * w
        gradv_l2[i] = np.sum(ksq * amp2 * decay) * w
    return {"E": E, "v_l2": v_l2, "gradv_l2": gradv_l2}
