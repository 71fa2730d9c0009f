"""Gate-level circuits over the reduced registers and their simulation.

Qubit q holds register q+1 (|0> = unsqueezed); bitstrings are written with
qubit 0 leftmost.  Controlled rotations in this problem always fire when the
neighboring register is unsqueezed, so CRX/CCRX here are controlled on |0>.
CNOT keeps the standard control-on-|1> convention.

The simulator works on the full 2^(N-1) tensor space rather than the
constrained space, so that noise can populate forbidden configurations,
which post-selection then removes.  Noise is unraveled as trajectories:
after every noisy gate a random Pauli fires with the depolarizing
probability; identical error patterns are simulated once and sampled
together, which keeps large shot counts cheap and reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import CylinderGeometry, register_str, register_to_orbitals, register_code
from .geometry import MetricTensor
from .hamiltonian import StateVector, vkm

GATE_KINDS = ("X", "RZ", "RX", "CNOT", "CRX", "CCRX")

# CNOT cost of the controlled rotations once decomposed to CNOT + singles:
# one control needs 2, two controls need 6.
CNOTS_PER_CRX = 2
CNOTS_PER_CCRX = 6


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int
    controls: tuple[int, ...] = ()
    angle: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        expected_controls = {"X": 0, "RZ": 0, "RX": 0, "CNOT": 1,
                             "CRX": 1, "CCRX": 2}[self.kind]
        if len(self.controls) != expected_controls:
            raise ValueError(f"{self.kind} takes {expected_controls} controls")
        needs_angle = self.kind in ("RZ", "RX", "CRX", "CCRX")
        if needs_angle and (self.angle is None or not math.isfinite(self.angle)):
            raise ValueError(f"{self.kind} needs a finite angle")
        if not needs_angle and self.angle is not None:
            raise ValueError(f"{self.kind} takes no angle")

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target, *self.controls)


@dataclass
class Circuit:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def append(self, gate: Gate) -> None:
        for q in gate.qubits:
            if not 0 <= q < self.n_qubits:
                raise ValueError(f"qubit {q} outside register count {self.n_qubits}")
        if len(set(gate.qubits)) != len(gate.qubits):
            raise ValueError("gate qubits must be distinct")
        self.gates.append(gate)

    def rz(self, q: int, angle: float) -> None:
        self.append(Gate("RZ", q, angle=angle))

    def rx(self, q: int, angle: float) -> None:
        self.append(Gate("RX", q, angle=angle))

    def x(self, q: int) -> None:
        self.append(Gate("X", q))

    def cnot(self, control: int, target: int) -> None:
        self.append(Gate("CNOT", target, (control,)))

    def crx(self, control: int, target: int, angle: float) -> None:
        self.append(Gate("CRX", target, (control,), angle))

    def ccrx(self, c1: int, c2: int, target: int, angle: float) -> None:
        self.append(Gate("CCRX", target, (c1, c2), angle))

    def to_text(self) -> str:
        lines = []
        for g in self.gates:
            ctl = ",".join(str(c) for c in g.controls) if g.controls else "-"
            ang = f"{g.angle:.17g}" if g.angle is not None else "-"
            lines.append(f"{g.kind} {g.target} {ctl} {ang}")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, n_qubits: int, text: str) -> "Circuit":
        c = cls(n_qubits)
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            kind, target, ctl, ang = line.split()
            controls = () if ctl == "-" else tuple(int(x) for x in ctl.split(","))
            angle = None if ang == "-" else float(ang)
            c.append(Gate(kind, int(target), controls, angle))
        return c


@dataclass(frozen=True)
class QubitSpace:
    """Basis tag for full register-tensor-space state vectors."""

    n_qubits: int

    @property
    def states(self) -> range:
        return range(1 << self.n_qubits)


def cnot_count(c: Circuit) -> int:
    """CNOTs after decomposing controlled rotations to CNOT + singles."""
    total = 0
    for g in c.gates:
        if g.kind == "CNOT":
            total += 1
        elif g.kind == "CRX":
            total += CNOTS_PER_CRX
        elif g.kind == "CCRX":
            total += CNOTS_PER_CCRX
    return total


# ---------------------------------------------------------------------------
# Statevector simulation


def _rx_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(0.5 * angle), math.sin(0.5 * angle)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _apply_1q(state: np.ndarray, mat: np.ndarray, q: int) -> np.ndarray:
    state = np.moveaxis(state, q, -1)
    state = state @ mat.T
    return np.moveaxis(state, -1, q)


def _controlled_slice(state: np.ndarray, controls: tuple[int, ...],
                      value: int) -> tuple:
    idx: list = [slice(None)] * state.ndim
    for c in controls:
        idx[c] = value
    return tuple(idx)


def _apply_gate(state: np.ndarray, g: Gate) -> np.ndarray:
    if g.kind == "X":
        return np.flip(state, axis=g.target)
    if g.kind == "RZ":
        shape = [1] * state.ndim
        shape[g.target] = 2
        ph = np.array([np.exp(-0.5j * g.angle), np.exp(0.5j * g.angle)])
        return state * ph.reshape(shape)
    if g.kind == "RX":
        return _apply_1q(state, _rx_matrix(g.angle), g.target)
    if g.kind == "CNOT":
        out = state.copy()
        sl = _controlled_slice(state, g.controls, 1)
        out[sl] = np.flip(state[sl], axis=g.target if g.target < g.controls[0]
                          else g.target - 1)
        return out
    if g.kind in ("CRX", "CCRX"):
        # fires when every control register is unsqueezed (|0>)
        out = state.copy()
        sl = _controlled_slice(state, g.controls, 0)
        sub = state[sl]
        tgt = g.target - sum(1 for c in g.controls if c < g.target)
        out[sl] = _apply_1q(sub, _rx_matrix(g.angle), tgt)
        return out
    raise ValueError(f"unknown gate kind {g.kind!r}")  # pragma: no cover


def simulate_statevector(c: Circuit,
                         initial: np.ndarray | None = None) -> StateVector:
    """Exact noiseless amplitudes over the full 2^(N-1) register space."""
    if c.n_qubits > 30:
        raise ValueError("qubit count too large for statevector simulation")
    n = c.n_qubits
    if initial is None:
        state = np.zeros((2,) * n, dtype=complex)
        state[(0,) * n] = 1.0
    else:
        state = np.asarray(initial, dtype=complex).reshape((2,) * n).copy()
    for g in c.gates:
        state = _apply_gate(state, g)
    return StateVector(state.reshape(-1), QubitSpace(n))


def qubit_state_to_bitstring(flat_index: int, n: int) -> str:
    """Tensor-space flat index -> register text (qubit 0 leftmost)."""
    return format(flat_index, f"0{n}b")


def embed_squeezed(psi, qubit_space_n: int) -> np.ndarray:
    """Squeezed-basis StateVector -> full tensor-space amplitudes."""
    full = np.zeros(1 << qubit_space_n, dtype=complex)
    for amp, code in zip(psi.amplitudes, psi.basis.states):
        code = int(code)
        flat = int(register_str(code, qubit_space_n), 2)
        full[flat] = amp
    return full


# ---------------------------------------------------------------------------
# Circuit builders


def _scaled_couplings(geometry: CylinderGeometry, g: MetricTensor):
    """(v10, v30, v21) in units of V10(g), matching the dynamics time units."""
    v10 = vkm(1, 0, geometry, g).real
    return 1.0, vkm(3, 0, geometry, g).real / v10, vkm(2, 1, geometry, g) / v10


def _append_axis_rotation(c: Circuit, target: int, controls: tuple[int, ...],
                          v: complex, dt: float) -> None:
    """exp(-i dt (Re v X + Im v Y)) on target, zero-controlled on neighbors.

    Complex v tilts the rotation axis in the XY plane, realized as an RZ
    conjugation; the uncontrolled RZs cancel whenever the rotation is
    blocked, so they need no controls of their own.
    """
    theta = 2.0 * abs(v) * dt
    chi = math.atan2(v.imag, v.real) if v.imag != 0.0 else 0.0
    if chi:
        c.rz(target, -chi)
    if not controls:
        c.rx(target, theta)
    elif len(controls) == 1:
        c.crx(controls[0], target, theta)
    else:
        c.ccrx(controls[0], controls[1], target, theta)
    if chi:
        c.rz(target, chi)


def build_trotter_circuit(geometry: CylinderGeometry, g_post: MetricTensor,
                          t: float, k: int) -> Circuit:
    """k first-order Trotter steps of the quench evolution, gate by gate.

    Each step sweeps the registers left to right; the piece for register q
    carries its diagonal weight (with the boundary correction at the chain
    ends), the second-neighbor coupling realized as CNOT-RZ-CNOT, and the
    neighbor-blocked X rotation.  Angles reproduce exp(-i H t / V10(post))
    up to a global phase.
    """
    if k < 1:
        raise ValueError("need at least one Trotter step")
    n = geometry.n_registers
    v10, v30, v21 = _scaled_couplings(geometry, g_post)
    dt = t / k
    c = Circuit(n)
    for _ in range(k):
        for q in range(n):
            d = v10 - 3.0 * v30
            if q == 0:
                d += v30
            if q == n - 1:
                d += v30
            # exp(-i d N_q dt) is RZ(-d dt) up to phase
            c.rz(q, -d * dt)
            if 1 <= q <= n - 2:
                beta = v30 * dt
                c.rz(q - 1, -0.5 * beta)
                c.rz(q + 1, -0.5 * beta)
                c.cnot(q - 1, q + 1)
                c.rz(q + 1, 0.5 * beta)
                c.cnot(q - 1, q + 1)
            controls = tuple(x for x in (q - 1, q + 1) if 0 <= x < n)
            _append_axis_rotation(c, q, controls, v21, dt)
    return c


def build_variational_circuit(params, N: int) -> Circuit:
    """Gate realization of the variational ansatz (ascending registers).

    Accepts uniform (alpha, beta) or site-resolved angle arrays; the latter
    also covers the exact preparation of the isotropic ground state.
    """
    n = N - 1
    alphas, betas = _angle_arrays(params, n)
    c = Circuit(n)
    for q in range(n):
        if q == 0:
            c.rx(0, 2.0 * betas[0])
        else:
            c.crx(q - 1, q, 2.0 * betas[q])
        c.rz(q, -alphas[q])         # exp(-i alpha N_q) up to phase
    return c


def _angle_arrays(params, n: int) -> tuple[list[float], list[float]]:
    alpha = getattr(params, "alpha")
    beta = getattr(params, "beta")
    if np.isscalar(alpha):
        return [float(alpha)] * n, [float(beta)] * n
    if len(alpha) != n or len(beta) != n:
        raise ValueError(f"expected {n} site angles")
    return [float(a) for a in alpha], [float(b) for b in beta]


# ---------------------------------------------------------------------------
# Sampling, noise, post-selection


@dataclass
class NoiseModel:
    """Depolarizing-after-gate plus readout confusion.

    p1/p2: probability that a random non-identity Pauli fires on the support
    of a single-/multi-qubit gate.  readout: 2x2 confusion matrix (rows: true
    bit, columns: reported bit), shared by all qubits, or one matrix per
    qubit.
    """

    p1: float = 0.0
    p2: float = 0.0
    readout: np.ndarray | list[np.ndarray] | None = None

    def __post_init__(self) -> None:
        for p in (self.p1, self.p2):
            if not 0.0 <= p <= 1.0:
                raise ValueError("depolarizing probabilities must lie in [0, 1]")
        if self.readout is not None:
            mats = self.readout if isinstance(self.readout, list) else [self.readout]
            for m in mats:
                m = np.asarray(m, dtype=float)
                if m.shape != (2, 2) or np.any(m < 0) or \
                        not np.allclose(m.sum(axis=1), 1.0, atol=1e-12):
                    raise ValueError("readout confusion rows must sum to 1")

    def readout_matrix(self, q: int) -> np.ndarray | None:
        if self.readout is None:
            return None
        if isinstance(self.readout, list):
            return np.asarray(self.readout[q], dtype=float)
        return np.asarray(self.readout, dtype=float)


_PAULIS = (
    None,
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def _simulate_with_errors(c: Circuit, pattern: tuple[tuple[int, int], ...]) -> np.ndarray:
    """Statevector with Pauli insertions after the flagged gates.

    pattern entries are (gate index, error code); the code is a base-4 word
    over the gate's qubits (0 = identity never appears for the full word).
    """
    n = c.n_qubits
    state = np.zeros((2,) * n, dtype=complex)
    state[(0,) * n] = 1.0
    errors = dict(pattern)
    for i, g in enumerate(c.gates):
        state = _apply_gate(state, g)
        code = errors.get(i)
        if code is None:
            continue
        for q in g.qubits:
            p = code % 4
            code //= 4
            if p:
                state = _apply_1q(state, _PAULIS[p], q)
    return state.reshape(-1)


def sample(c: Circuit, shots: int, noise: NoiseModel | None = None,
           seed: int = 0) -> dict[str, int]:
    """Measurement counts {bitstring: n}, deterministic given the seed.

    Noiseless sampling is multinomial over |amplitude|^2.  With a noise
    model, per-shot Pauli error patterns are drawn gate by gate, grouped,
    and each distinct pattern is simulated once; readout confusion flips the
    measured bits at the end.
    """
    if shots < 1:
        raise ValueError("need at least one shot")
    rng = np.random.default_rng(seed)
    n = c.n_qubits

    if noise is None or (noise.p1 == 0.0 and noise.p2 == 0.0 and noise.readout is None):
        probs = np.abs(simulate_statevector(c).amplitudes) ** 2
        probs /= probs.sum()
        draw = rng.multinomial(shots, probs)
        return {qubit_state_to_bitstring(i, n): int(v)
                for i, v in enumerate(draw) if v}

    noisy_sites = []
    for i, g in enumerate(c.gates):
        p = noise.p1 if len(g.qubits) == 1 else noise.p2
        if p > 0.0:
            noisy_sites.append((i, len(g.qubits), p))

    patterns: dict[tuple, int] = {}
    if noisy_sites:
        p_vec = np.array([p for _, _, p in noisy_sites])
        flags = rng.random((shots, len(noisy_sites))) < p_vec[None, :]
        # one candidate Pauli code per (shot, site); only flagged entries used
        code_matrix = np.empty((shots, len(noisy_sites)), dtype=np.int64)
        for j, (_, s, _) in enumerate(noisy_sites):
            code_matrix[:, j] = rng.integers(1, 4 ** s, size=shots)
        hot = np.nonzero(flags.any(axis=1))[0]
        patterns[()] = shots - len(hot)
        for shot in hot:
            key = tuple((noisy_sites[j][0], int(code_matrix[shot, j]))
                        for j in np.nonzero(flags[shot])[0])
            patterns[key] = patterns.get(key, 0) + 1
        if patterns[()] == 0:
            del patterns[()]
    else:
        patterns[()] = shots

    counts: dict[str, int] = {}
    for key in sorted(patterns):
        m = patterns[key]
        amps = _simulate_with_errors(c, key)
        probs = np.abs(amps) ** 2
        probs /= probs.sum()
        draw = rng.multinomial(m, probs)
        for i, v in enumerate(draw):
            if v:
                s = qubit_state_to_bitstring(i, n)
                counts[s] = counts.get(s, 0) + int(v)

    if noise.readout is not None:
        flip_prob = np.empty((2, n))
        for q in range(n):
            M = noise.readout_matrix(q)
            flip_prob[0, q] = M[0, 1]
            flip_prob[1, q] = M[1, 0]
        flipped: dict[str, int] = {}
        for s in sorted(counts):
            m = counts[s]
            bits = np.array([int(ch) for ch in s])
            per_qubit = flip_prob[bits, np.arange(n)]
            flips = rng.random((m, n)) < per_qubit[None, :]
            out_bits = bits[None, :] ^ flips
            for row in out_bits:
                key = "".join("1" if b else "0" for b in row)
                flipped[key] = flipped.get(key, 0) + 1
        counts = flipped
    return counts


def estimate_observables_from_counts(counts: dict[str, int],
                                     geometry: CylinderGeometry):
    """(root fidelity, densities, correlator) from post-selected counts.

    Each register string maps to its orbital occupations; averages match the
    exact observables in the noiseless infinite-shot limit.
    """
    if not counts:
        raise ValueError("no counts survive post-selection")
    n_orb = 3 * geometry.N
    total = sum(counts.values())
    density = np.zeros(n_orb)
    nn = np.zeros((n_orb, n_orb))
    root = "0" * geometry.n_registers
    root_hits = 0
    for s, m in counts.items():
        occ = np.array(register_to_orbitals(register_code(s), geometry.N),
                       dtype=float)
        density += m * occ
        nn += m * np.outer(occ, occ)
        if s == root:
            root_hits += m
    density /= total
    nn /= total
    corr = np.outer(density, density) - nn
    return root_hits / total, density, corr
