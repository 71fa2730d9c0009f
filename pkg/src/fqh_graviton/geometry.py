"""Unimodular metric parametrization and the effective spin-2 mode dynamics.

The band-mass metric is a symmetric, unimodular 2x2 tensor parametrized by a
stretch Q and a rotation phi.  The intrinsic metric of the many-body state is
parametrized the same way (Qtilde, phitilde); its classical equations of
motion form a nonlinear two-variable system whose linearization around the
isotropic point is solvable in closed form.  This module provides the
parametrization, the ODE integration, the linearized solution and the
least-squares fit of extracted metric traces against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares


TWO_PI = 2.0 * math.pi

# |Qtilde| below which the ODE right-hand side switches to the linearized
# form (the phi equation divides by sinh Qtilde).
RHS_LINEARIZATION_WINDOW = 1e-6


class SingularMetricPoint(ValueError):
    """Raised when the ODE right-hand side is requested at sinh(Q)=0 with the
    linearized fallback disabled."""


@dataclass(frozen=True)
class MetricParams:
    """Stretch/rotation pair (Q, phi); (-Q, phi+pi) labels the same tensor."""

    Q: float
    phi: float


@dataclass(frozen=True)
class MetricTensor:
    """Symmetric unimodular 2x2 tensor; g21 = g12 implied, det g = 1."""

    g11: float
    g12: float
    g22: float

    def det(self) -> float:
        return self.g11 * self.g22 - self.g12 ** 2

    def as_array(self) -> np.ndarray:
        return np.array([[self.g11, self.g12], [self.g12, self.g22]])


IDENTITY_METRIC = MetricTensor(1.0, 0.0, 1.0)


@dataclass(frozen=True)
class BimetricParams:
    """Effective parameters of the spin-2 mode: anisotropy A, frequency scale
    Omega and tuning parameter gamma; the mode gap is 2*Omega*(1-gamma)."""

    A: float
    Omega: float
    gamma: float

    def __post_init__(self) -> None:
        if self.gamma >= 1.0:
            raise ValueError("gapped phase requires gamma < 1")

    @property
    def E_g(self) -> float:
        return 2.0 * self.Omega * (1.0 - self.gamma)


@dataclass
class MetricTrace:
    """Time series of the extracted metric (Qtilde >= 0 branch)."""

    times: np.ndarray
    Qtilde: np.ndarray
    phitilde: np.ndarray

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.Qtilde = np.asarray(self.Qtilde, dtype=float)
        self.phitilde = np.asarray(self.phitilde, dtype=float)
        if not (len(self.times) == len(self.Qtilde) == len(self.phitilde)):
            raise ValueError("trace arrays must have equal length")

    def phitilde_unwrapped(self) -> np.ndarray:
        """phitilde with branch jumps (multiples of pi) removed."""
        return np.unwrap(self.phitilde, period=math.pi)


@dataclass
class BimetricFit:
    """Result of fitting a metric trace against the linearized solution."""

    A: float
    E_g: float
    residual: float
    E_g_phi: float = math.nan   # cross-check from the phitilde slope
    degenerate: bool = False
    reason: str = ""
    converged: bool = True


def metric_from_params(p: MetricParams) -> MetricTensor:
    """Tensor of the stretch/rotation pair.

    g11 = cosh Q + cos phi sinh Q, g12 = sin phi sinh Q,
    g22 = cosh Q - cos phi sinh Q;  det g = 1 identically.
    """
    ch, sh = math.cosh(p.Q), math.sinh(p.Q)
    return MetricTensor(
        g11=ch + math.cos(p.phi) * sh,
        g12=math.sin(p.phi) * sh,
        g22=ch - math.cos(p.phi) * sh,
    )


def params_from_metric(g: MetricTensor, tol: float = 1e-9) -> MetricParams:
    """Invert metric_from_params on the Q >= 0 branch.

    Rejects tensors that are not unimodular or not positive (g11 <= 0).
    The identity maps to (Q=0, phi=0) by convention.
    """
    if abs(g.det() - 1.0) > tol:
        raise ValueError(f"metric is not unimodular: det = {g.det():.3e}")
    if g.g11 <= 0.0:
        raise ValueError("metric is not positive definite (g11 <= 0)")
    a = 0.5 * (g.g11 - g.g22)      # cos(phi) sinh(Q)
    b = g.g12                      # sin(phi) sinh(Q)
    s = math.hypot(a, b)           # sinh(Q) on the Q >= 0 branch
    if s == 0.0:
        return MetricParams(0.0, 0.0)
    return MetricParams(math.asinh(s), math.atan2(b, a) % TWO_PI)


def _ode_factor(Qt: float, phit: float, p: BimetricParams) -> float:
    """Common scalar factor of both equations of motion."""
    return (p.gamma + math.sinh(p.A) * math.sinh(Qt) * math.cos(phit)
            - math.cosh(p.A) * math.cosh(Qt))


def bimetric_rhs(Qt: float, phit: float, p: BimetricParams,
                 linearized_fallback: bool = True) -> tuple[float, float]:
    """Right-hand sides (dQ/dt, dphi/dt) of the spin-2 equations of motion.

    The phi equation carries a 1/sinh(Q) factor; within the linearization
    window around Q=0 the RHS is replaced by the derivative of the closed
    small-amplitude solution, (E_g*A*sin(phi), -E_g/2), which is the exact
    limit of the equations there.  With the fallback disabled the singular
    point raises instead.
    """
    if abs(Qt) < RHS_LINEARIZATION_WINDOW:
        if not linearized_fallback:
            raise SingularMetricPoint(
                f"sinh(Q)={math.sinh(Qt):.2e} below regularization threshold")
        return (p.E_g * p.A * math.sin(phit), -0.5 * p.E_g)
    G = _ode_factor(Qt, phit, p)
    dQ = -2.0 * p.Omega * math.sin(phit) * math.sinh(p.A) * G
    dphi = (-2.0 * p.Omega
            * (math.sinh(p.A) * math.cosh(Qt) * math.cos(phit)
               - math.cosh(p.A) * math.sinh(Qt))
            * G / math.sinh(Qt))
    return (dQ, dphi)


def linearized_solution(t: float | np.ndarray, A: float, E_g: float,
                        branch: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Closed small-amplitude solution with Q(0)=0.

    Raw branches: Q = +-2A sin(E_g t/2), phi = pi -+ pi/2 - E_g t/2.  The
    returned pair is folded onto the Q >= 0 representative using the
    symmetry (Q, phi) == (-Q, phi+pi); phi comes back in [0, 2pi).
    """
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    t = np.asarray(t, dtype=float)
    Qt = branch * 2.0 * A * np.sin(0.5 * E_g * t)
    phit = math.pi - branch * 0.5 * math.pi - 0.5 * E_g * t
    phit = np.broadcast_to(np.asarray(phit), Qt.shape).copy()
    neg = Qt < 0.0
    Qt = np.abs(Qt)
    phit[neg] += math.pi
    return Qt, phit % TWO_PI


def integrate_bimetric(p: BimetricParams, Q0: float, phi0: float,
                       t_grid: np.ndarray) -> MetricTrace:
    """Fixed-step classical 4th-order integration of the equations of motion.

    The state is propagated in signed-Q form; the singular point Q=0 is
    handled by the linearized RHS (see bimetric_rhs), which also provides the
    first step away from an exactly isotropic initial condition.  The output
    is folded to the Qtilde >= 0 branch.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing with >= 2 points")
    h_max = min(float(np.min(np.diff(t_grid))),
                0.01 / p.Omega if p.Omega > 0 else float(np.min(np.diff(t_grid))))
    if h_max <= 0 or not math.isfinite(h_max):
        raise ValueError("step size underflow: check Omega and t_grid spacing")

    Q_out = np.empty_like(t_grid)
    phi_out = np.empty_like(t_grid)
    Q, phi = float(Q0), float(phi0)
    Q_out[0], phi_out[0] = Q, phi
    for i in range(1, len(t_grid)):
        span = t_grid[i] - t_grid[i - 1]
        n_sub = max(1, math.ceil(span / h_max - 1e-12))
        h = span / n_sub
        if h < 1e-14 or not math.isfinite(h):
            raise FloatingPointError(
                f"step size underflow near t={t_grid[i - 1]:.6g}")
        for _ in range(n_sub):
            k1 = bimetric_rhs(Q, phi, p)
            k2 = bimetric_rhs(Q + 0.5 * h * k1[0], phi + 0.5 * h * k1[1], p)
            k3 = bimetric_rhs(Q + 0.5 * h * k2[0], phi + 0.5 * h * k2[1], p)
            k4 = bimetric_rhs(Q + h * k3[0], phi + h * k3[1], p)
            Q += (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            phi += (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        Q_out[i], phi_out[i] = Q, phi

    neg = Q_out < 0.0
    Q_folded = np.abs(Q_out)
    phi_folded = np.where(neg, phi_out + math.pi, phi_out) % TWO_PI
    return MetricTrace(times=t_grid.copy(), Qtilde=Q_folded, phitilde=phi_folded)


def _fft_frequency_seed(times: np.ndarray, Q: np.ndarray) -> float:
    """Angular frequency of the dominant non-DC Fourier peak of Q(t)."""
    dt = float(np.mean(np.diff(times)))
    amp = np.abs(np.fft.rfft(Q - np.mean(Q)))
    freqs = np.fft.rfftfreq(len(Q), d=dt)
    if len(amp) < 2:
        return 1.0
    k = 1 + int(np.argmax(amp[1:]))
    w = TWO_PI * freqs[k]
    return w if w > 0 else 1.0


def _phi_slope_gap(trace: MetricTrace) -> float:
    """E_g estimate from the sawtooth slope: -2 * d(phi_unwrapped)/dt.

    phitilde is a gauge angle wherever Qtilde ~ 0, and the folded trace
    jumps by pi at every branch switch, so the slope is taken as the median
    of per-step differences folded into (-pi/2, pi/2], restricted to steps
    where Qtilde stays away from the bounces.
    """
    t, Q, phi = trace.times, trace.Qtilde, trace.phitilde
    keep = Q > 0.1 * np.max(Q) if np.max(Q) > 0 else np.ones_like(Q, dtype=bool)
    pair = keep[:-1] & keep[1:]
    if not np.any(pair):
        pair = np.ones(len(t) - 1, dtype=bool)
    d = np.diff(phi)[pair]
    dt = np.diff(t)[pair]
    folded = (d + 0.5 * math.pi) % math.pi - 0.5 * math.pi
    slopes = folded / dt
    return -2.0 * float(np.median(slopes))


# Degeneracy thresholds for fit_bimetric, fixed here:
#  - a trace whose Qtilde never exceeds FIT_AMPLITUDE_FLOOR carries no
#    oscillation to fit (A = 0, frequency indeterminate);
#  - a relative RMS misfit above FIT_MISFIT_CEILING, or a Q-vs-phi frequency
#    disagreement above FIT_FREQ_MISMATCH, means the trace does not follow
#    the two-branch |sin| solution at all.
FIT_AMPLITUDE_FLOOR = 1e-3
FIT_MISFIT_CEILING = 0.25
FIT_FREQ_MISMATCH = 0.25


def fit_bimetric(trace: MetricTrace) -> BimetricFit:
    """Nonlinear least squares of Qtilde(t) against 2A|sin(E_g t/2)|.

    E_g is seeded from the FFT peak of Qtilde (multi-start at {1/2, 1, 2}
    times the seed guards against harmonic confusion of |sin|), A from
    max|Qtilde|/2.  The frequency is cross-checked against -2x the slope of
    the unwrapped phitilde sawtooth.  Degenerate traces (no oscillation, or
    no agreement with the two-branch solution) are flagged rather than
    silently fitted.
    """
    t, Q = trace.times, trace.Qtilde
    if len(t) < 4:
        raise ValueError("trace too short to fit")
    Qmax = float(np.max(np.abs(Q)))
    if Qmax < FIT_AMPLITUDE_FLOOR:
        return BimetricFit(A=0.0, E_g=math.nan, residual=float(np.sqrt(np.mean(Q ** 2))),
                           degenerate=True, reason="no oscillation (Qtilde ~ 0)")

    w_seed = _fft_frequency_seed(t, Q)
    A_seed = 0.5 * Qmax

    def model(params: np.ndarray) -> np.ndarray:
        A, Eg = params
        return 2.0 * A * np.abs(np.sin(0.5 * Eg * t))

    best = None
    for mult in (1.0, 0.5, 2.0):
        x0 = np.array([A_seed, mult * w_seed])
        try:
            res = least_squares(lambda x: model(x) - Q, x0,
                                bounds=([0.0, 1e-8], [np.inf, np.inf]))
        except Exception:
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        return BimetricFit(A=A_seed, E_g=w_seed, residual=math.inf,
                           degenerate=True, reason="optimizer failure",
                           converged=False)

    A_fit, Eg_fit = float(best.x[0]), float(best.x[1])
    rms = float(np.sqrt(np.mean((model(best.x) - Q) ** 2)))
    Eg_phi = float(_phi_slope_gap(trace))

    rel_misfit = rms / max(2.0 * A_fit, FIT_AMPLITUDE_FLOOR)
    freq_mismatch = abs(Eg_fit - Eg_phi) / Eg_fit if Eg_fit > 0 else math.inf
    degenerate = rel_misfit > FIT_MISFIT_CEILING or freq_mismatch > FIT_FREQ_MISMATCH
    reason = ""
    if degenerate:
        reason = (f"relative misfit {rel_misfit:.3f}" if rel_misfit > FIT_MISFIT_CEILING
                  else f"Q/phi frequency mismatch {freq_mismatch:.3f}")
    return BimetricFit(A=A_fit, E_g=Eg_fit, residual=rms, E_g_phi=Eg_phi,
                       degenerate=degenerate, reason=reason,
                       converged=bool(best.success))
