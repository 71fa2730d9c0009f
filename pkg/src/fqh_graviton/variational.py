"""Two-parameter variational circuit states and their classical optimization.

The ansatz applies, register by register from the left end of the chain, a
controlled X rotation (control: left neighbor unsqueezed; bare on the first
register) followed by a diagonal phase on the squeezed component.  Because
the right neighbor is still unsqueezed whenever a rotation fires, the state
never acquires weight on configurations with adjacent squeezed registers,
so everything can be carried directly in the constrained basis.

Optimal parameters are found per time point by dual annealing over the
torus [0, 2pi)^2 plus a short derivative-free polish, with RNG streams
derived from (seed, N, time index) so independent points are reproducible
in any execution order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import dual_annealing, minimize

from .basis import CylinderGeometry, SqueezedBasis, enumerate_squeezed
from .dynamics import evolve_grid
from .geometry import IDENTITY_METRIC, MetricParams, metric_from_params
from .hamiltonian import (
    StateVector,
    build_truncated_hamiltonian,
    ground_state_closed_form,
    vkm,
)

TWO_PI = 2.0 * math.pi

ANNEAL_BUDGET = 2000
POLISH_BUDGET = 200


@dataclass(frozen=True)
class VariationalParams:
    """Uniform rotation/phase angles, stored mod 2pi."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", self.alpha % TWO_PI)
        object.__setattr__(self, "beta", self.beta % TWO_PI)


@dataclass(frozen=True)
class SiteResolvedParams:
    """Per-register angles; lengths must match the register count."""

    alpha: tuple[float, ...]
    beta: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.alpha) != len(self.beta):
            raise ValueError("alpha and beta arrays must have equal length")


def _apply_layer(amps: np.ndarray, basis: SqueezedBasis, q: int,
                 alpha: float, beta: float) -> None:
    """One register layer, in place: controlled-X(beta) then phase(alpha).

    Assumes registers > q carry no squeezing yet (guaranteed by ascending
    application), so the rotation cannot reach outside the basis.
    """
    states = basis.states
    index = basis.index
    cb, sb = math.cos(beta), math.sin(beta)
    out = amps.copy()
    for i, code in enumerate(states):
        code = int(code)
        if (code >> q) & 1:
            continue                      # partner of a lower-index state
        if q > 0 and (code >> (q - 1)) & 1:
            continue                      # control blocks the rotation
        j = index.get(code | (1 << q))
        if j is None:
            continue                      # right neighbor squeezed: no weight here yet
        a0, a1 = amps[i], amps[j]
        out[i] = cb * a0 - 1j * sb * a1
        out[j] = -1j * sb * a0 + cb * a1
    phase = np.exp(-1j * alpha)
    for i, code in enumerate(states):
        if (int(code) >> q) & 1:
            out[i] *= phase
    amps[:] = out


def build_site_resolved(params: SiteResolvedParams, N: int,
                        basis: SqueezedBasis | None = None) -> StateVector:
    """Ansatz with per-register angles, applied ascending from register 1."""
    if basis is None:
        basis = enumerate_squeezed(CylinderGeometry(N, 1.0))
    n = basis.n_bits
    if len(params.alpha) != n:
        raise ValueError(f"expected {n} site angles, got {len(params.alpha)}")
    amps = np.zeros(len(basis), dtype=complex)
    amps[basis.root_index()] = 1.0
    for q in range(n):
        _apply_layer(amps, basis, q, params.alpha[q], params.beta[q])
    return StateVector(amps, basis).normalized()


def build_ansatz(params: VariationalParams, N: int,
                 basis: SqueezedBasis | None = None) -> StateVector:
    """Two-parameter ansatz: all registers share (alpha, beta)."""
    n = N - 1
    site = SiteResolvedParams(alpha=(params.alpha,) * n, beta=(params.beta,) * n)
    return build_site_resolved(site, N, basis=basis)


def ground_state_prep_params(geometry: CylinderGeometry) -> SiteResolvedParams:
    """Site-resolved angles that prepare the isotropic ground state exactly.

    The closed-form state is a product measure over squeezes with ratio
    -lambda per squeeze, and the sequential circuit realizes exactly such
    measures: solving tan(beta_q) = lambda * cos(beta_{q+1}) from the right
    end inward (tan(beta_last) = lambda) makes every squeeze ratio equal.
    """
    lam = math.sqrt(vkm(3, 0, geometry, IDENTITY_METRIC).real
                    / vkm(1, 0, geometry, IDENTITY_METRIC).real)
    n = geometry.n_registers
    beta = [0.0] * n
    beta[n - 1] = math.atan(lam)
    for q in range(n - 2, -1, -1):
        beta[q] = math.atan(lam * math.cos(beta[q + 1]))
    # squeeze ratio must be -lambda (real negative): -i e^{-i alpha} = -1
    alpha = 0.5 * math.pi
    return SiteResolvedParams(alpha=(alpha,) * n, beta=tuple(beta))


@dataclass
class OptimizeResult:
    params: VariationalParams
    overlap: float
    converged: bool = True


def _point_rng(seed: int, N: int, t_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, N, t_index]))


def _circular_distance(a: float, b: float) -> float:
    return abs((a - b + math.pi) % TWO_PI - math.pi)


def gauge_images(params: VariationalParams) -> tuple[VariationalParams, ...]:
    """The two parameter pairs that build the identical ansatz state.

    (alpha, beta) and (alpha + pi, -beta) give the same amplitudes exactly:
    the squeeze factor -i sin(beta) e^{-i alpha} is invariant under the
    joint flip.
    """
    return (params,
            VariationalParams(params.alpha + math.pi, -params.beta))


def _canonical_gauge(params: VariationalParams,
                     seed: VariationalParams | None) -> VariationalParams:
    """Pick the gauge image continuous with the seed, or beta in [0, pi]."""
    images = gauge_images(params)
    if seed is None:
        return min(images, key=lambda p: p.beta % TWO_PI > math.pi)
    return min(images,
               key=lambda p: _circular_distance(p.alpha, seed.alpha)
               + _circular_distance(p.beta, seed.beta))


def optimize(psi_target: StateVector, N: int,
             seed_params: VariationalParams | None = None,
             seed: int = 0, t_index: int = 0,
             anneal_budget: int = ANNEAL_BUDGET,
             polish_budget: int = POLISH_BUDGET) -> OptimizeResult:
    """Maximize |<target|ansatz(alpha, beta)>| over the parameter torus.

    Global dual annealing (budgeted, seeded) with a Nelder-Mead polish; a
    provided seed point is polished first and the better optimum wins.  The
    objective uses the overlap modulus, so the global phase of the target is
    immaterial.
    """
    basis = psi_target.basis
    if not isinstance(basis, SqueezedBasis):
        raise ValueError("optimize expects a squeezed-basis target")
    target = psi_target.amplitudes

    def objective(x: np.ndarray) -> float:
        st = build_ansatz(VariationalParams(x[0], x[1]), N, basis=basis)
        return -abs(np.vdot(target, st.amplitudes))

    def polish(x0: np.ndarray) -> tuple[np.ndarray, float]:
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"maxfev": polish_budget, "xatol": 1e-10,
                                "fatol": 1e-12})
        return res.x, -res.fun

    rng = _point_rng(seed, N, t_index)
    ann = dual_annealing(objective, bounds=[(0.0, TWO_PI), (0.0, TWO_PI)],
                         maxfun=anneal_budget, seed=rng)
    x, val = polish(ann.x)
    if seed_params is not None:
        # a warm start wins ties: the two gauge branches are exactly
        # degenerate and hopping between them would shred the trajectories
        xs, vs = polish(np.array([seed_params.alpha, seed_params.beta]))
        if vs >= val - 1e-9:
            x, val = xs, vs
    params = _canonical_gauge(VariationalParams(float(x[0]), float(x[1])),
                              seed_params)
    return OptimizeResult(params=params, overlap=float(val))


def optimize_site_resolved(psi_target: StateVector, N: int,
                           start: VariationalParams,
                           maxfev: int = 2000) -> tuple[SiteResolvedParams, float]:
    """Refine per-register angles from a uniform optimum.

    The uniform family is the diagonal of this one, so the refined overlap
    can only match or beat the uniform starting point.
    """
    basis = psi_target.basis
    n = N - 1
    target = psi_target.amplitudes

    def objective(x: np.ndarray) -> float:
        p = SiteResolvedParams(alpha=tuple(x[:n]), beta=tuple(x[n:]))
        st = build_site_resolved(p, N, basis=basis)
        return -abs(np.vdot(target, st.amplitudes))

    x0 = np.array([start.alpha] * n + [start.beta] * n)
    res = minimize(objective, x0, method="Nelder-Mead",
                   options={"maxfev": maxfev, "xatol": 1e-8, "fatol": 1e-12})
    best = res.x if -res.fun >= -objective(x0) else x0
    return (SiteResolvedParams(alpha=tuple(best[:n]), beta=tuple(best[n:])),
            -objective(best))


@dataclass
class TrajectoryPoint:
    N: int
    t: float
    alpha: float
    beta: float
    overlap: float
    converged: bool = True


def optimal_trajectory(geometry_l2: float, Q_post: float, t_grid: np.ndarray,
                       N_list: list[int], seed: int = 0,
                       anneal_budget: int = ANNEAL_BUDGET,
                       polish_budget: int = POLISH_BUDGET,
                       threads: int = 1,
                       phi_post: float = 0.0) -> list[TrajectoryPoint]:
    """Optimal (alpha*, beta*) against exact evolved states, per (N, t).

    Each N is processed independently (optionally in a thread pool); inside
    one N the previous time's optimum seeds the next, which keeps the
    parameter curves on one smooth branch.
    """
    t_grid = np.asarray(t_grid, dtype=float)

    def run_one(N: int) -> list[TrajectoryPoint]:
        geom = CylinderGeometry(N, geometry_l2)
        basis = enumerate_squeezed(geom)
        g_post = metric_from_params(MetricParams(Q_post, phi_post))
        H = build_truncated_hamiltonian(geom, g_post, basis=basis)
        v10 = vkm(1, 0, geom, g_post).real
        psi0 = ground_state_closed_form(geom, IDENTITY_METRIC, basis=basis)
        states = evolve_grid(H, psi0, t_grid, scale=v10)
        rows: list[TrajectoryPoint] = []
        prev: VariationalParams | None = None
        for ti, (t, psi) in enumerate(zip(t_grid, states)):
            res = optimize(psi, N, seed_params=prev, seed=seed, t_index=ti,
                           anneal_budget=anneal_budget,
                           polish_budget=polish_budget)
            rows.append(TrajectoryPoint(N=N, t=float(t), alpha=res.params.alpha,
                                        beta=res.params.beta,
                                        overlap=res.overlap,
                                        converged=res.converged))
            prev = res.params
        return rows

    if threads > 1 and len(N_list) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run_one, N_list))
    else:
        chunks = [run_one(N) for N in N_list]
    return [row for chunk in chunks for row in chunk]


@dataclass
class ExtrapolationFit:
    """Per-time polynomial fits of the optimal angles in powers of 1/N.

    Coefficient arrays are stored low order first, so column 0 holds p0,
    the N -> infinity value.
    """

    order: int
    times: np.ndarray
    alpha_coeffs: np.ndarray     # (T, order+1)
    beta_coeffs: np.ndarray
    alpha_residuals: np.ndarray  # RMS over the sampled N, per time
    beta_residuals: np.ndarray

    def alpha_infinity(self) -> np.ndarray:
        return self.alpha_coeffs[:, 0]

    def beta_infinity(self) -> np.ndarray:
        return self.beta_coeffs[:, 0]

    def evaluate(self, t_index: int, N: float) -> tuple[float, float]:
        x = 1.0 / N
        xs = x ** np.arange(self.order + 1)
        return (float(self.alpha_coeffs[t_index] @ xs),
                float(self.beta_coeffs[t_index] @ xs))


def _nearest_rep(value: float, ref: float) -> float:
    """Representative of value (mod 2pi) within pi of ref, on the real line."""
    return ref + (value - ref + math.pi) % TWO_PI - math.pi


def _aligned_pairs(rows: list[TrajectoryPoint]) -> tuple[np.ndarray, np.ndarray]:
    """(alpha, beta) samples pulled onto one gauge branch near the first row."""
    ref = VariationalParams(rows[0].alpha, rows[0].beta)
    alphas, betas = [], []
    for r in rows:
        best, cost = None, math.inf
        for img in gauge_images(VariationalParams(r.alpha, r.beta)):
            a = _nearest_rep(img.alpha, ref.alpha)
            b = _nearest_rep(img.beta, ref.beta)
            c = abs(a - ref.alpha) + abs(b - ref.beta)
            if c < cost:
                best, cost = (a, b), c
        alphas.append(best[0])
        betas.append(best[1])
    return np.array(alphas), np.array(betas)


def extrapolate(table: list[TrajectoryPoint], order: int = 3) -> ExtrapolationFit:
    """Least-squares polynomial in 1/N of alpha*(N, t), beta*(N, t) per t.

    Samples at each time are first pulled onto a common gauge branch (the
    ansatz is invariant under (alpha, beta) -> (alpha+pi, -beta) and under
    2pi shifts), otherwise the 1/N trend is meaningless.
    """
    if order not in (2, 3):
        raise ValueError("fit order must be 2 or 3")
    times = sorted({row.t for row in table})
    Ns = sorted({row.N for row in table})
    if len(Ns) < order + 1:
        raise ValueError(
            f"rank-deficient fit: order {order} needs {order + 1} distinct N, "
            f"got {len(Ns)}")
    by_key = {(row.N, row.t): row for row in table}
    x = 1.0 / np.array(Ns, dtype=float)
    T = len(times)
    a_coef = np.zeros((T, order + 1))
    b_coef = np.zeros((T, order + 1))
    a_res = np.zeros(T)
    b_res = np.zeros(T)
    for ti, t in enumerate(times):
        rows = [by_key.get((N, t)) for N in Ns]
        if any(r is None for r in rows):
            raise ValueError(f"table is missing some N at t={t}")
        alphas, betas = _aligned_pairs(rows)
        for y, coef, res in ((alphas, a_coef, a_res), (betas, b_coef, b_res)):
            c = np.polyfit(x, y, order)[::-1]          # low order first
            fit = np.polyval(c[::-1], x)
            coef[ti] = c
            res[ti] = float(np.sqrt(np.mean((fit - y) ** 2)))
    return ExtrapolationFit(order=order, times=np.array(times),
                            alpha_coeffs=a_coef, beta_coeffs=b_coef,
                            alpha_residuals=a_res, beta_residuals=b_res)
