"""Interaction matrix elements and Hamiltonian builders.

Three builders share the two-body amplitude V_{k,m}:

* the full fermionic Hamiltonian: every scattering family (k, m) above a
  relative cutoff, over the Fock basis (optionally one momentum sector);
* the truncated Hamiltonian over the Fock basis: only the four short-range
  families (1,0), (2,0), (3,0), (2,+-1);
* the truncated Hamiltonian in the reduced-register basis, built directly
  from its local spin-chain form with open-boundary corrections.

Fermionic signs follow the canonical occupation ordering (creation operators
applied in ascending orbital order); with that convention the squeezing
matrix element between register configurations is uniformly +V21, and the
closed-form ground state with per-squeeze amplitude -lambda is an exact zero
mode, lambda = sqrt(V30/V10) * exp(i * 8 pi^2 g12 / (L2^2 g11)).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .basis import (
    CylinderGeometry,
    FockBasis,
    SqueezedBasis,
    enumerate_fock,
    enumerate_squeezed,
    momentum_of,
)
from .geometry import MetricTensor

DEFAULT_CUTOFF = 1e-12


def vkm(k: int, m: int, geometry: CylinderGeometry, g: MetricTensor,
        prefactor: str = "unit", strict: bool = True) -> complex:
    """Two-body scattering amplitude between orbital pairs.

    V_{k,m} = (k^2 - m^2) exp(-2 pi^2 (k^2 + m^2 - 2 i k m g12) / (L2^2 g11)).

    prefactor="unit" evaluates the expression verbatim; "kappa3" multiplies
    by kappa^3 / g11^(3/2) (alternative overall normalization, affects only
    the raw energy scale).
    """
    if strict and not (k > abs(m)):
        raise ValueError(f"require k > |m| >= 0, got k={k}, m={m}")
    c = 2.0 * math.pi ** 2 / (geometry.L2 ** 2 * g.g11)
    scale = 1.0
    if prefactor == "kappa3":
        scale = geometry.kappa ** 3 / g.g11 ** 1.5
    elif prefactor != "unit":
        raise ValueError(f"unknown prefactor convention {prefactor!r}")
    if m == 0:
        return complex(scale * k * k * math.exp(-c * k * k))
    expo = complex(-c * (k * k + m * m), 2.0 * c * k * m * g.g12)
    return scale * (k * k - m * m) * cmath.exp(expo)


def squeeze_phase(geometry: CylinderGeometry, g: MetricTensor) -> float:
    """Anisotropy phase theta = 8 pi^2 g12 / (L2^2 g11) of the squeeze term."""
    return 8.0 * math.pi ** 2 * g.g12 / (geometry.L2 ** 2 * g.g11)


# ---------------------------------------------------------------------------
# Matrices and state vectors


class SparseHermitian:
    """Hermitian matrix stored as triplets, exact-Hermitian by construction.

    Entries are accumulated in mirrored pairs (value at (r, c), conjugate at
    (c, r)), so H - H^dagger vanishes identically, not just to rounding.
    """

    def __init__(self, dim: int, data: dict[tuple[int, int], complex],
                 basis=None):
        self.dim = dim
        self.basis = basis
        self._data = data
        self._csr = None
        for (r, c), v in data.items():
            if r == c and v.imag != 0.0:
                raise AssertionError(f"non-real diagonal at {r}: {v}")

    @classmethod
    def build(cls, dim: int, basis=None) -> "_HermitianBuilder":
        return _HermitianBuilder(dim, basis)

    @property
    def nnz(self) -> int:
        return len(self._data)

    def upper_entries(self):
        """Iterate (row, col, value) over the upper triangle (row <= col)."""
        for (r, c), v in self._data.items():
            if r <= c:
                yield r, c, v

    def max_nonhermiticity(self) -> float:
        """max |H[r,c] - conj(H[c,r])| over stored entries (0 by design)."""
        worst = 0.0
        for (r, c), v in self._data.items():
            worst = max(worst, abs(v - self._data.get((c, r), 0.0).conjugate()))
        return worst

    def to_dense(self) -> np.ndarray:
        H = np.zeros((self.dim, self.dim), dtype=complex)
        for (r, c), v in self._data.items():
            H[r, c] = v
        return H

    def to_csr(self) -> scipy.sparse.csr_matrix:
        if self._csr is None:
            rows, cols, vals = [], [], []
            for (r, c), v in self._data.items():
                rows.append(r)
                cols.append(c)
                vals.append(v)
            self._csr = scipy.sparse.csr_matrix(
                (vals, (rows, cols)), shape=(self.dim, self.dim), dtype=complex)
        return self._csr

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        return self.to_csr() @ psi

    def is_real(self) -> bool:
        return all(v.imag == 0.0 for v in self._data.values())

    def trace(self) -> float:
        return sum(self._data.get((i, i), 0.0).real for i in range(self.dim))

    def momentum_sparsity_ok(self) -> bool:
        """True when every stored entry connects equal-K basis states."""
        basis = self.basis
        if basis is None or not isinstance(basis, FockBasis):
            raise ValueError("momentum check needs a Fock basis")
        K = [momentum_of(int(s), basis.geometry) for s in basis.states]
        return all(K[r] == K[c] for (r, c) in self._data.keys())

    def export_coo_text(self) -> str:
        """Upper-triangle coordinate list 'row col re im', one entry per line."""
        lines = [f"{r} {c} {v.real:.17g} {v.imag:.17g}"
                 for r, c, v in sorted(self.upper_entries())]
        return "\n".join(lines)


class _HermitianBuilder:
    def __init__(self, dim: int, basis=None):
        self.dim = dim
        self.basis = basis
        self.data: dict[tuple[int, int], complex] = {}

    def add_diag(self, i: int, v: float) -> None:
        self.data[(i, i)] = self.data.get((i, i), 0j) + complex(v, 0.0)

    def add_pair(self, r: int, c: int, v: complex) -> None:
        """Add v at (r, c) and its conjugate at (c, r)."""
        if r == c:
            self.add_diag(r, v.real)
            if v.imag != 0.0:
                raise AssertionError("complex value on the diagonal")
            return
        self.data[(r, c)] = self.data.get((r, c), 0j) + v
        self.data[(c, r)] = self.data.get((c, r), 0j) + v.conjugate()

    def finalize(self) -> SparseHermitian:
        data = {k: v for k, v in self.data.items() if v != 0.0}
        return SparseHermitian(self.dim, data, basis=self.basis)


@dataclass
class StateVector:
    """Normalized amplitudes over a tagged basis."""

    amplitudes: np.ndarray
    basis: object

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)

    @property
    def dim(self) -> int:
        return len(self.amplitudes)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / n, self.basis)

    def overlap(self, other: "StateVector") -> complex:
        if self.dim != other.dim:
            raise ValueError("basis mismatch")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "StateVector") -> float:
        return abs(self.overlap(other)) ** 2


# ---------------------------------------------------------------------------
# Fermionic term application (bitmask states, canonical ordering)


def _parity_below(mask: int, site: int) -> int:
    return (mask & ((1 << site) - 1)).bit_count() & 1


def apply_fermion_ops(mask: int, ops: tuple[tuple[str, int], ...]):
    """Apply c/cdag factors (listed left to right) to an occupation bitmask.

    Returns (sign, new_mask) or None when annihilated.  The rightmost factor
    acts first; each factor picks up the parity of occupied orbitals below
    its site.
    """
    sign = 1
    for kind, site in reversed(ops):
        bit = (mask >> site) & 1
        if kind == "c":
            if not bit:
                return None
            if _parity_below(mask, site):
                sign = -sign
            mask &= ~(1 << site)
        else:
            if bit:
                return None
            if _parity_below(mask, site):
                sign = -sign
            mask |= 1 << site
    return sign, mask


def _term_families(geometry: CylinderGeometry, g: MetricTensor,
                   cutoff: float, truncated: bool,
                   prefactor: str) -> list[tuple[int, int, complex]]:
    """(k, m, V_{k,m}) with m >= 0; h.c. partners are added at build time."""
    if truncated:
        pairs = [(1, 0), (2, 0), (3, 0), (2, 1)]
        return [(k, m, vkm(k, m, geometry, g, prefactor)) for k, m in pairs]
    v10 = abs(vkm(1, 0, geometry, g, prefactor))
    fams = []
    for k in range(1, geometry.n_orbitals):
        row = [(k, m, vkm(k, m, geometry, g, prefactor)) for m in range(k)]
        kept = [f for f in row if abs(f[2]) > cutoff * v10]
        if not kept:
            break
        fams.extend(kept)
    return fams


def _build_fock(geometry: CylinderGeometry, g: MetricTensor,
                K: int | None, cutoff: float, truncated: bool,
                prefactor: str, basis: FockBasis | None = None) -> SparseHermitian:
    if basis is None:
        basis = enumerate_fock(geometry, K)
    fams = _term_families(geometry, g, cutoff, truncated, prefactor)
    n_orb = geometry.n_orbitals
    b = SparseHermitian.build(len(basis), basis)
    for col, s in enumerate(basis.states):
        s = int(s)
        for k, m, V in fams:
            if m == 0:
                # diagonal family: V * n_j * n_{j+k}
                acc = 0
                for j in range(n_orb - k):
                    if (s >> j) & 1 and (s >> (j + k)) & 1:
                        acc += 1
                if acc:
                    b.add_diag(col, acc * V.real)
                continue
            # off-diagonal family: V c+_{j+m} c+_{j+k} c_{j+m+k} c_j  (+ h.c.)
            for j in range(n_orb - (m + k)):
                ops = (("cdag", j + m), ("cdag", j + k),
                       ("c", j + m + k), ("c", j))
                res = apply_fermion_ops(s, ops)
                if res is None:
                    continue
                sign, target = res
                row = basis.index.get(target)
                if row is None:
                    raise AssertionError("scattering left the momentum sector")
                b.add_pair(row, col, sign * V)
    return b.finalize()


def build_full_hamiltonian(geometry: CylinderGeometry, g: MetricTensor,
                           K: int | None = None,
                           cutoff: float = DEFAULT_CUTOFF,
                           prefactor: str = "unit",
                           basis: FockBasis | None = None) -> SparseHermitian:
    """All scattering families with |V_{k,m}| > cutoff * |V_{1,0}|.

    Terms whose orbital indices leave the open cylinder are omitted.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be non-negative")
    return _build_fock(geometry, g, K, cutoff, truncated=False,
                       prefactor=prefactor, basis=basis)


def build_truncated_fock(geometry: CylinderGeometry, g: MetricTensor,
                         K: int | None = None, prefactor: str = "unit",
                         basis: FockBasis | None = None) -> SparseHermitian:
    """Only the (1,0), (2,0), (3,0), (2,+-1) families, over the Fock basis."""
    return _build_fock(geometry, g, K, 0.0, truncated=True,
                       prefactor=prefactor, basis=basis)


def build_truncated_hamiltonian(geometry: CylinderGeometry, g: MetricTensor,
                                prefactor: str = "unit",
                                basis: SqueezedBasis | None = None) -> SparseHermitian:
    """Truncated Hamiltonian in the reduced-register basis.

    Diagonal: (V10 - 3 V30) sum N_l + V30 sum N_l N_{l+2} + V30 (N_1 + N_{N-1})
    + V30 (N - 1).  Off-diagonal: the squeeze term with matrix element V21
    for flipping 0 -> 1, dressed by both-neighbors-unsqueezed projectors
    (one-sided at the chain ends).  The ground state has exactly zero energy,
    constant included.
    """
    if geometry.N < 2:
        raise ValueError("need N >= 2")
    if basis is None:
        basis = enumerate_squeezed(geometry)
    V10 = vkm(1, 0, geometry, g, prefactor).real
    V30 = vkm(3, 0, geometry, g, prefactor).real
    V21 = vkm(2, 1, geometry, g, prefactor)
    n = geometry.n_registers
    b = SparseHermitian.build(len(basis), basis)
    const = V30 * (geometry.N - 1)
    for col, code in enumerate(basis.states):
        code = int(code)
        occ = code.bit_count()
        edge = ((code >> 0) & 1) + ((code >> (n - 1)) & 1)
        second = (code & (code >> 2)).bit_count()
        b.add_diag(col, (V10 - 3.0 * V30) * occ + V30 * (second + edge) + const)
        for q in range(n):
            if (code >> q) & 1:
                continue            # 0 -> 1 only; the mirrored entry covers 1 -> 0
            if q > 0 and (code >> (q - 1)) & 1:
                continue
            if q < n - 1 and (code >> (q + 1)) & 1:
                continue
            target = code | (1 << q)
            b.add_pair(basis.index[target], col, V21)
    return b.finalize()


def ground_state_closed_form(geometry: CylinderGeometry, g: MetricTensor,
                             basis: SqueezedBasis | None = None) -> StateVector:
    """Exact zero mode of the truncated Hamiltonian.

    A register word with s squeezes carries amplitude (-lambda)^s with
    lambda = sqrt(V30/V10) e^{i theta(g)}; theta is the anisotropy phase of
    the squeeze term.  The state is returned normalized.
    """
    if basis is None:
        basis = enumerate_squeezed(geometry)
    V10 = vkm(1, 0, geometry, g).real
    V30 = vkm(3, 0, geometry, g).real
    if V10 <= 0:
        raise ValueError("V10 must be positive")
    lam = math.sqrt(V30 / V10) * cmath.exp(1j * squeeze_phase(geometry, g))
    amps = np.power(-lam, basis.squeeze_counts())
    return StateVector(amps, basis).normalized()


def qp_decomposition(geometry: CylinderGeometry, g: MetricTensor,
                     K: int | None = None, prefactor: str = "unit",
                     basis: FockBasis | None = None) -> SparseHermitian:
    """Assemble the truncated Hamiltonian as a sum of squares.

    H = sum_j (Q_j^dagger Q_j + P_j^dagger P_j) with
    Q_j = sqrt(V10) c_{j+2} c_{j+1} + sqrt(V30) e^{i theta} c_{j+3} c_j and
    P_j = sqrt(V20) c_j c_{j+2}.  Writing the second piece with descending
    site order (c_{j+3} c_j rather than c_j c_{j+3}) fixes the relative sign
    so that the cross term reproduces the squeeze amplitude +V21 of the
    directly built truncated Hamiltonian, which the zero-mode property pins.
    Pieces whose orbitals fall off the open cylinder are dropped, which
    reproduces the boundary terms.
    """
    if basis is None:
        basis = enumerate_fock(geometry, K)
    n_orb = geometry.n_orbitals
    V10 = math.sqrt(vkm(1, 0, geometry, g, prefactor).real)
    V20 = math.sqrt(vkm(2, 0, geometry, g, prefactor).real)
    V30 = math.sqrt(vkm(3, 0, geometry, g, prefactor).real)
    phase = cmath.exp(1j * squeeze_phase(geometry, g))

    # annihilation-pair pieces per generator: (coefficient, (site_hi, site_lo));
    # the pair is applied low site first
    generators: list[list[tuple[complex, tuple[int, int]]]] = []
    for j in range(-1, n_orb - 2):
        pieces = []
        if 0 <= j + 1 and j + 2 < n_orb:
            pieces.append((complex(V10), (j + 2, j + 1)))
        if 0 <= j and j + 3 < n_orb:
            pieces.append((V30 * phase, (j + 3, j)))
        if pieces:
            generators.append(pieces)
    for j in range(n_orb - 2):
        generators.append([(complex(V20), (j + 2, j))])

    b = SparseHermitian.build(len(basis), basis)
    for pieces in generators:
        images: dict[int, list[tuple[int, complex]]] = {}
        for col, s in enumerate(basis.states):
            s = int(s)
            for coef, (hi, lo) in pieces:
                res = apply_fermion_ops(s, (("c", hi), ("c", lo)))
                if res is None:
                    continue
                sign, target = res
                images.setdefault(target, []).append((col, sign * coef))
        for entries in images.values():
            for r, ar in entries:
                for c, ac in entries:
                    if r <= c:
                        v = ar.conjugate() * ac
                        if r == c:
                            b.add_diag(r, v.real)
                        else:
                            b.add_pair(r, c, v)
    return b.finalize()
