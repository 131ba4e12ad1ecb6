"""Least-squares extraction of model parameters from scan curves.

Every fit is unweighted least squares minimized by a bounded Nelder-Mead
simplex (scipy) in coordinates rescaled to the unit box, from a fixed start
with no random restarts, so identical inputs give identical reports.  The
simplex stops once its RSS spread drops below 1e-9 of the data's total sum
of squares (and its size below 1e-7 of the box), or after 500 iterations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.optimize import minimize

from . import lattice, qdyn
from .errors import InvalidParameterError

MAX_ITER = 500
RTOL_RSS = 1e-9
XTOL = 1e-7


@dataclass
class FitProblem:
    """Data plus the free parameters, as name -> (guess, lower, upper)."""

    x: np.ndarray
    y: np.ndarray
    model: Literal["dark_resonance", "roundtrip", "holdcurve"]
    free: dict[str, tuple[float, float, float]]
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.size == 0 or self.x.shape != self.y.shape:
            raise InvalidParameterError("fit data must be non-empty with matching lengths")
        for name, (g, lo, hi) in self.free.items():
            if not lo <= g <= hi:
                raise InvalidParameterError(f"initial guess for {name} outside its bounds")


@dataclass
class FitReport:
    values: dict[str, float]
    sigmas: dict[str, float]
    rss: float
    converged: bool
    iterations: int
    evaluations: int
    degenerate: bool = False
    message: str = ""

    def __getitem__(self, name):
        return self.values[name]


def _rss_curvature_sigma(obj, x, lo, hi, rss, ndata):
    """1-sigma errors from a central-difference Hessian of the RSS.

    Approximate: assumes a locally quadratic RSS and unit-weight residuals
    with variance RSS / (N - p).
    """
    p = x.size
    steps = 1e-4 * np.maximum(hi - lo, 1e-12)
    H = np.zeros((p, p))
    f0 = obj(x)

    def at(dx):
        return obj(np.clip(x + dx, lo, hi))

    for i in range(p):
        ei = np.zeros(p); ei[i] = steps[i]
        H[i, i] = (at(ei) - 2 * f0 + at(-ei)) / steps[i] ** 2
        for j in range(i):
            ej = np.zeros(p); ej[j] = steps[j]
            H[i, j] = H[j, i] = (
                at(ei + ej) - at(ei - ej) - at(-ei + ej) + at(-ei - ej)
            ) / (4 * steps[i] * steps[j])
    dof = max(ndata - p, 1)
    var = rss / dof
    try:
        cov = 2.0 * var * np.linalg.inv(H)
        diag = np.diag(cov)
    except np.linalg.LinAlgError:
        return np.full(p, np.inf), False
    ok = bool(np.all(np.isfinite(diag)) and np.all(np.diag(H) > 0))
    return np.sqrt(np.where(diag > 0, diag, np.inf)), ok


def least_squares(problem: FitProblem, forward: Callable[..., np.ndarray], trace: list | None = None) -> FitReport:
    """Minimize sum((forward(x, **params) - y)^2) over the free parameters.

    ``trace``, if given, collects every evaluated parameter vector.
    """
    names = list(problem.free)
    guess = np.array([problem.free[n][0] for n in names], dtype=float)
    lo = np.array([problem.free[n][1] for n in names], dtype=float)
    hi = np.array([problem.free[n][2] for n in names], dtype=float)
    width = np.where(hi > lo, hi - lo, 1.0)
    nevals = 0

    def rss_at(p):
        nonlocal nevals
        nevals += 1
        if trace is not None:
            trace.append(p.copy())
        model = forward(problem.x, **dict(zip(names, p)), **problem.fixed)
        return float(np.sum((model - problem.y) ** 2))

    def obj_unit(u):
        return rss_at(lo + np.clip(u, 0.0, 1.0) * width)

    u0 = (guess - lo) / width
    f0 = obj_unit(u0)
    # initial simplex: step 0.1 of the box toward the interior
    simplex = [u0]
    for i in range(len(names)):
        v = u0.copy()
        v[i] = v[i] + 0.1 if v[i] + 0.1 <= 1.0 else v[i] - 0.1
        simplex.append(v)
    res = minimize(
        obj_unit,
        u0,
        method="Nelder-Mead",
        bounds=[(0.0, 1.0)] * len(names),
        options=dict(
            maxiter=MAX_ITER,
            initial_simplex=np.array(simplex),
            xatol=XTOL,
            fatol=RTOL_RSS * max(f0, float(np.sum((problem.y - problem.y.mean()) ** 2)), 1e-300),
        ),
    )
    best = lo + np.clip(res.x, 0.0, 1.0) * width
    rss = float(res.fun)
    sig, curv_ok = _rss_curvature_sigma(rss_at, best, lo, hi, rss, problem.x.size)
    on_bound = np.any((best - lo) < 1e-6 * width) or np.any((hi - best) < 1e-6 * width)
    return FitReport(
        values=dict(zip(names, map(float, best))),
        sigmas=dict(zip(names, map(float, sig))),
        rss=rss,
        converged=bool(res.success) and res.nit < MAX_ITER,
        iterations=int(res.nit),
        evaluations=nevals,
        degenerate=bool(on_bound or not curv_ok),
        message=str(res.message),
    )


# --------------------------------------------------------------------------
# Forward models


def dark_resonance_model(x, omega2, baseline=0.0, omega1=qdyn.mhz(0.7),
                         params=qdyn.LambdaParams(), pulse_length=3.0, scanned_laser=2, dt=None):
    scan = qdyn.square_pulse_scan(x, pulse_length, omega1, omega2, params, dt=dt, scanned_laser=scanned_laser)
    return scan.ordinate + baseline


def roundtrip_model(x, gamma_laser, params=qdyn.LambdaParams(), schedule=None, dt=None, lattice_factor=1.0):
    schedule = qdyn.stirap_schedule() if schedule is None else schedule
    eff, _ = qdyn.stirap_round_trip(x, schedule, params.replace(gamma_laser=gamma_laser), dt=dt)
    return lattice_factor * eff.ordinate


def holdcurve_model(x, ratio, s_deep=60.0, stirap_eff=0.75, params=lattice.LatticeParams(), dims=3):
    return lattice.recovered_fraction_curve(s_deep, ratio, x, stirap_eff, params, dims).recovered


# --------------------------------------------------------------------------
# Fits


def fit_autler_townes(
    spectrum: qdyn.ScanResult,
    omega1: float,
    params: qdyn.LambdaParams = qdyn.LambdaParams(),
    pulse_length: float = 3.0,
    guess: float | None = None,
    bounds: tuple[float, float] = (0.0, qdyn.mhz(30.0)),
    scanned_laser: int = 2,
    fit_baseline: bool = True,
) -> FitReport:
    """Fit Omega2 (and an additive baseline) to a dark-resonance spectrum."""
    if guess is None:
        guess = qdyn.mhz(8.0)
    free = {"omega2": (guess, *bounds)}
    if fit_baseline:
        free["baseline"] = (0.0, -0.2, 0.2)
    # one step size for the whole fit keeps the model smooth in omega2
    dt = qdyn.default_dt(
        qdyn.square_pulse_schedule(pulse_length, omega1, bounds[1]),
        params,
        spectrum.abscissa + (params.delta_1 if scanned_laser == 1 else 0.0),
    )
    fixed = dict(omega1=omega1, params=params, pulse_length=pulse_length,
                 scanned_laser=scanned_laser, dt=dt)
    problem = FitProblem(spectrum.abscissa, spectrum.ordinate, "dark_resonance", free, fixed)
    return least_squares(problem, dark_resonance_model)


def fit_linewidth(
    efficiency: qdyn.ScanResult,
    schedule: qdyn.PulseSchedule | None = None,
    params: qdyn.LambdaParams = qdyn.LambdaParams(),
    guess: float = qdyn.khz(10.0),
    bounds: tuple[float, float] = (0.0, qdyn.khz(200.0)),
    lattice_factor: float = 1.0,
) -> FitReport:
    """Fit the relative laser linewidth gamma to a round-trip efficiency curve.

    ``lattice_factor`` multiplies the model, e.g. the lowest-band recapture
    after the hold, to compare the bare and lattice-corrected descriptions.
    """
    schedule = qdyn.stirap_schedule() if schedule is None else schedule
    probe = params.replace(gamma_laser=bounds[1])
    dt = qdyn.default_dt(schedule, probe, efficiency.abscissa)
    fixed = dict(params=params, schedule=schedule, dt=dt, lattice_factor=lattice_factor)
    problem = FitProblem(efficiency.abscissa, efficiency.ordinate, "roundtrip",
                         {"gamma_laser": (guess, *bounds)}, fixed)
    return least_squares(problem, roundtrip_model)


def fit_depth_ratio(
    curve: lattice.HoldCurve,
    s_deep: float = 60.0,
    stirap_eff: float = 0.75,
    params: lattice.LatticeParams = lattice.LatticeParams(),
    guess: float | None = None,
    bounds: tuple[float, float] = (1.0, 25.0),
    dims: int = 3,
    start_grid=np.linspace(8.0, 12.0, 9),
) -> FitReport:
    """Fit the deep/shallow lattice depth ratio to a hold-time curve.

    The oscillating model has local minima one period apart, so unless a
    guess is given the simplex starts from the best point of ``start_grid``.
    """
    fixed = dict(s_deep=s_deep, stirap_eff=stirap_eff, params=params, dims=dims)
    if guess is None:
        rss = [np.sum((holdcurve_model(curve.tau, r, **fixed) - curve.recovered) ** 2)
               for r in start_grid]
        guess = float(start_grid[int(np.argmin(rss))])
    problem = FitProblem(curve.tau, curve.recovered, "holdcurve",
                         {"ratio": (guess, *bounds)}, fixed)
    return least_squares(problem, holdcurve_model)


# --------------------------------------------------------------------------
# Curve analysis


@dataclass
class OscillationFit:
    period: float
    damping_time: float
    amplitude: float
    plateau: float
    phase: float


def damped_oscillation(t, amplitude, damping_time, period, phase, plateau):
    return plateau + amplitude * np.exp(-t / damping_time) * np.cos(2 * np.pi * t / period + phase)


def analyze_oscillation(t, y, period_guess: float) -> OscillationFit:
    """Fit plateau + A exp(-t/tau) cos(2 pi t / P + phi) to a hold curve."""
    from scipy.optimize import curve_fit

    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    tail = y[t >= t.min() + 0.6 * np.ptp(t)].mean()
    p0 = [y[0] - tail, period_guess, period_guess, 0.0, tail]
    popt, _ = curve_fit(damped_oscillation, t, y, p0=p0, maxfev=20000)
    A, td, P, ph, C = popt
    if A < 0:
        A, ph = -A, ph + np.pi
    return OscillationFit(abs(P), td, A, C, math.remainder(ph, 2 * np.pi))
