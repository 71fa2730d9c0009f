"""Bases for the thin-cylinder problem at filling 1/3.

Two Hilbert spaces appear throughout:

* the reduced-register space: one two-level register per block of three
  Landau orbitals, with the hard constraint that no two adjacent registers
  are both squeezed (dimension = Fibonacci number);
* the fermionic Fock space of N electrons in 3N-2 orbitals, optionally
  restricted to a momentum sector K = sum_j j n_j (measured from the root).

Register strings are packed little-endian into Python ints: bit q holds
register q+1 (q = 0 .. N-2).  Register N is a ghost that is never squeezed.
Occupation strings are tuples/arrays of 0/1 over 3N orbital slots; the last
two slots are always empty and are dropped when embedding into Fock space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class NotInSqueezedSubspace(ValueError):
    """Occupation string has no decomposition into 100/000/011 blocks."""


@dataclass(frozen=True)
class CylinderGeometry:
    """N electrons on a cylinder of circumference L2 (magnetic length = 1)."""

    N: int
    L2: float

    def __post_init__(self) -> None:
        if self.N < 2:
            raise ValueError("need at least two electrons")
        if self.L2 <= 0:
            raise ValueError("circumference must be positive")

    @property
    def N_phi(self) -> int:
        """Flux quanta; filling is exactly N / N_phi = 1/3."""
        return 3 * self.N

    @property
    def kappa(self) -> float:
        return 2.0 * math.pi / self.L2

    @property
    def n_registers(self) -> int:
        return self.N - 1

    @property
    def n_orbitals(self) -> int:
        """Kept orbitals of the Fock space (the last two are always empty)."""
        return self.N_phi - 2

    @property
    def root_momentum(self) -> int:
        """sum_j j n_j of the root state 100100... in physical labels."""
        return 3 * self.N * (self.N - 1) // 2


def _has_adjacent_ones(code: int) -> bool:
    return (code & (code >> 1)) != 0


def register_str(code: int, n_bits: int) -> str:
    """Register word as text, register 1 leftmost."""
    return "".join("1" if (code >> q) & 1 else "0" for q in range(n_bits))


def register_code(bits: str) -> int:
    """Inverse of register_str."""
    code = 0
    for q, ch in enumerate(bits):
        if ch == "1":
            code |= 1 << q
        elif ch != "0":
            raise ValueError(f"invalid register character {ch!r}")
    return code


@dataclass
class SqueezedBasis:
    """All adjacent-1-free register words, sorted by integer encoding."""

    geometry: CylinderGeometry
    states: np.ndarray                      # uint64 codes, ascending
    index: dict[int, int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def n_bits(self) -> int:
        return self.geometry.n_registers

    def squeeze_counts(self) -> np.ndarray:
        """Number of squeezed registers per basis state."""
        return np.array([int(s).bit_count() for s in self.states])

    def root_index(self) -> int:
        return self.index[0]

    def to_lines(self) -> str:
        """Newline-delimited bitstrings, for debugging dumps."""
        return "\n".join(register_str(int(s), self.n_bits) for s in self.states)


def enumerate_squeezed(geometry: CylinderGeometry) -> SqueezedBasis:
    """Enumerate the constrained register space.

    The count satisfies the Fibonacci recurrence: for N electrons there are
    F(N+1) states with F(1)=F(2)=1.
    """
    n = geometry.n_registers
    states = [code for code in range(1 << n) if not _has_adjacent_ones(code)]
    arr = np.array(states, dtype=np.uint64)
    return SqueezedBasis(geometry=geometry, states=arr,
                         index={int(s): i for i, s in enumerate(arr)})


def fibonacci(n: int) -> int:
    """F(n) with F(1) = F(2) = 1."""
    a, b = 1, 1
    for _ in range(n - 2):
        a, b = b, a + b
    return b if n >= 2 else a


def register_to_orbitals(code: int, N: int) -> tuple[int, ...]:
    """Expand a register word into its occupation string of length 3N.

    Per block: a squeezed register gives 011; an unsqueezed register gives
    000 when it follows a squeezed one (its leading electron was borrowed)
    and 100 otherwise.  The ghost register N follows the same rule.
    """
    if _has_adjacent_ones(code):
        raise ValueError("register word violates the adjacency constraint")
    occ: list[int] = []
    prev = 0
    for q in range(N):                      # q = N-1 is the ghost, always 0
        bit = (code >> q) & 1 if q < N - 1 else 0
        if bit:
            occ.extend((0, 1, 1))
        elif prev:
            occ.extend((0, 0, 0))
        else:
            occ.extend((1, 0, 0))
        prev = bit
    return tuple(occ)


def orbitals_to_register(occ, N: int | None = None) -> int:
    """Inverse block decomposition; raises NotInSqueezedSubspace otherwise."""
    occ = tuple(int(x) for x in occ)
    if N is None:
        if len(occ) % 3:
            raise ValueError("occupation length must be a multiple of 3")
        N = len(occ) // 3
    elif len(occ) != 3 * N:
        raise ValueError(f"expected {3 * N} orbitals, got {len(occ)}")
    code = 0
    prev = 0
    for q in range(N):
        block = occ[3 * q: 3 * q + 3]
        if block == (0, 1, 1):
            bit = 1
        elif block == (0, 0, 0) and prev == 1:
            bit = 0
        elif block == (1, 0, 0) and prev == 0:
            bit = 0
        else:
            raise NotInSqueezedSubspace(
                f"block {block} at register {q + 1} after {'1' if prev else '0'}")
        if bit:
            if prev:
                raise NotInSqueezedSubspace("adjacent squeezed blocks")
            if q == N - 1:
                raise NotInSqueezedSubspace("ghost register cannot be squeezed")
            code |= 1 << q
        prev = bit
    return code


@dataclass
class FockBasis:
    """N spinless fermions in 3N-2 orbitals, optionally fixed-K."""

    geometry: CylinderGeometry
    states: np.ndarray                      # orbital-occupation bitmasks
    index: dict[int, int] = field(repr=False)
    K: int | None = None

    def __len__(self) -> int:
        return len(self.states)

    @property
    def n_orbitals(self) -> int:
        return self.geometry.n_orbitals

    def occupations(self) -> np.ndarray:
        """Dense (n_states, n_orbitals) 0/1 matrix."""
        n = self.n_orbitals
        out = np.zeros((len(self.states), n), dtype=np.int8)
        for i, s in enumerate(self.states):
            s = int(s)
            for j in range(n):
                if (s >> j) & 1:
                    out[i, j] = 1
        return out

    def to_lines(self) -> str:
        n = self.n_orbitals
        return "\n".join(
            "".join(str((int(s) >> j) & 1) for j in range(n)) for s in self.states)


def momentum_of(occ, geometry: CylinderGeometry) -> int:
    """Center-of-mass momentum K = sum_j j n_j, offset so the root is K=0.

    Accepts an occupation sequence over the 3N-2 kept orbitals (a length-3N
    string with empty tail is accepted too) or an integer bitmask.
    """
    if isinstance(occ, (int, np.integer)):
        s, total = int(occ), 0
        j = 0
        while s:
            if s & 1:
                total += j
            s >>= 1
            j += 1
        return total - geometry.root_momentum
    occ = tuple(int(x) for x in occ)
    return sum(j for j, n in enumerate(occ) if n) - geometry.root_momentum


def _combinations_bitmasks(n_orbitals: int, n_particles: int):
    """All n_particles-bit subsets of n_orbitals bits, ascending (Gosper)."""
    if n_particles > n_orbitals:
        return
    v = (1 << n_particles) - 1
    limit = 1 << n_orbitals
    while v < limit:
        yield v
        c = v & -v
        r = v + c
        v = (((r ^ v) >> 2) // c) | r


def enumerate_fock(geometry: CylinderGeometry, K: int | None = None) -> FockBasis:
    """Enumerate the Fock space, optionally one momentum sector."""
    states = []
    for mask in _combinations_bitmasks(geometry.n_orbitals, geometry.N):
        if K is None or momentum_of(mask, geometry) == K:
            states.append(mask)
    if not states:
        raise ValueError(f"empty momentum sector K={K} for N={geometry.N}")
    arr = np.array(states, dtype=np.uint64)
    return FockBasis(geometry=geometry, states=arr,
                     index={int(s): i for i, s in enumerate(arr)}, K=K)


def occ_to_mask(occ) -> int:
    mask = 0
    for j, n in enumerate(occ):
        if int(n):
            mask |= 1 << j
    return mask


def register_to_fock_index(code: int, fock: FockBasis) -> int:
    """Position of a squeezed register word inside a Fock basis."""
    geom = fock.geometry
    occ = register_to_orbitals(code, geom.N)
    if occ[-2:] != (0, 0):
        raise AssertionError("squeezed images must leave the last two orbitals empty")
    return fock.index[occ_to_mask(occ[: geom.n_orbitals])]


def post_select(samples: list[str]) -> list[str]:
    """Drop register bitstrings with adjacent squeezed registers.

    Multiplicity and order are preserved; strings are '0'/'1' text with
    register 1 leftmost.
    """
    return [s for s in samples if "11" not in s]


def post_select_counts(counts: dict[str, int]) -> dict[str, int]:
    """post_select for counts maps (insertion order preserved)."""
    return {s: c for s, c in counts.items() if "11" not in s}
