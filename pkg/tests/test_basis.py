import itertools
import math

import numpy as np
import pytest

from fqh_graviton.basis import (
    CylinderGeometry,
    NotInSqueezedSubspace,
    enumerate_fock,
    enumerate_squeezed,
    fibonacci,
    momentum_of,
    orbitals_to_register,
    post_select,
    post_select_counts,
    register_code,
    register_str,
    register_to_fock_index,
    register_to_orbitals,
)


def brute_force_constrained(n_bits):
    """Oracle: every bitstring without adjacent ones, by direct filtering."""
    out = []
    for bits in itertools.product("01", repeat=n_bits):
        s = "".join(bits)
        if "11" not in s:
            out.append(s)
    return out


class TestSqueezedEnumeration:
    @pytest.mark.parametrize("N", range(2, 13))
    def test_matches_brute_force(self, N):
        basis = enumerate_squeezed(CylinderGeometry(N, 5.0))
        got = {register_str(int(c), N - 1) for c in basis.states}
        assert got == set(brute_force_constrained(N - 1))

    def test_fibonacci_recurrence_up_to_25(self):
        sizes = {N: len(enumerate_squeezed(CylinderGeometry(N, 5.0)))
                 for N in range(2, 16)}
        for N in range(4, 16):
            assert sizes[N] == sizes[N - 1] + sizes[N - 2]
        for N in range(2, 26):
            assert fibonacci(N + 1) == (sizes[N] if N in sizes else
                                        fibonacci(N) + fibonacci(N - 1))

    def test_small_counts(self):
        assert len(enumerate_squeezed(CylinderGeometry(2, 5.0))) == 2
        assert len(enumerate_squeezed(CylinderGeometry(4, 5.0))) == 5
        assert len(enumerate_squeezed(CylinderGeometry(10, 5.0))) == 89

    def test_states_sorted_and_indexed(self):
        basis = enumerate_squeezed(CylinderGeometry(7, 5.0))
        codes = [int(c) for c in basis.states]
        assert codes == sorted(codes)
        assert all(basis.index[c] == i for i, c in enumerate(codes))

    def test_debug_dump_format(self):
        basis = enumerate_squeezed(CylinderGeometry(4, 5.0))
        lines = basis.to_lines().splitlines()
        assert lines == ["000", "100", "010", "001", "101"]
        fock = enumerate_fock(CylinderGeometry(2, 5.0))
        assert all(len(line) == 4 and set(line) <= {"0", "1"}
                   for line in fock.to_lines().splitlines())

    def test_four_electron_orbital_images(self):
        basis = enumerate_squeezed(CylinderGeometry(4, 5.477))
        images = {"".join(map(str, register_to_orbitals(int(c), 4)))
                  for c in basis.states}
        assert images == {
            "100100100100",
            "011000100100",
            "100011000100",
            "100100011000",
            "011000011000",
        }


class TestRegisterOrbitalMaps:
    def test_root_state(self):
        assert register_to_orbitals(0, 5) == tuple(
            int(x) for x in "100100100100100")

    def test_two_squeeze_example(self):
        code = register_code("1010")
        occ = "".join(map(str, register_to_orbitals(code, 5)))
        assert occ == "011000011000100"
        assert orbitals_to_register([int(x) for x in occ]) == code

    def test_popcount_is_electron_number(self):
        for N in (2, 3, 5, 8):
            basis = enumerate_squeezed(CylinderGeometry(N, 5.0))
            for c in basis.states:
                assert sum(register_to_orbitals(int(c), N)) == N

    @pytest.mark.parametrize("N", range(2, 10))
    def test_round_trips(self, N):
        basis = enumerate_squeezed(CylinderGeometry(N, 5.0))
        for c in basis.states:
            occ = register_to_orbitals(int(c), N)
            assert orbitals_to_register(occ) == int(c)

    def test_invalid_occupation_rejected(self):
        with pytest.raises(NotInSqueezedSubspace):
            orbitals_to_register([0, 1, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0])
        with pytest.raises(NotInSqueezedSubspace):
            # 000 block without a preceding squeeze
            orbitals_to_register([0, 0, 0, 1, 0, 0])
        with pytest.raises(ValueError):
            orbitals_to_register([1, 0, 0, 1, 0])       # bad length

    def test_last_two_orbitals_always_empty(self):
        for N in (3, 6, 9):
            basis = enumerate_squeezed(CylinderGeometry(N, 5.0))
            for c in basis.states:
                assert register_to_orbitals(int(c), N)[-2:] == (0, 0)

    def test_no_second_neighbor_double_occupancy(self):
        # n_j n_{j+2} vanishes on every squeezed image
        for N in (4, 6, 8):
            basis = enumerate_squeezed(CylinderGeometry(N, 5.0))
            for c in basis.states:
                occ = register_to_orbitals(int(c), N)
                assert all(occ[j] * occ[j + 2] == 0 for j in range(3 * N - 2))


class TestMomentumAndFock:
    def test_root_momentum_zero(self):
        geom = CylinderGeometry(5, 5.0)
        assert momentum_of(register_to_orbitals(0, 5), geom) == 0

    def test_squeezes_preserve_momentum(self):
        for N in (4, 7):
            geom = CylinderGeometry(N, 5.0)
            basis = enumerate_squeezed(geom)
            for c in basis.states:
                assert momentum_of(register_to_orbitals(int(c), N), geom) == 0

    def test_single_shift_changes_momentum_by_one(self):
        geom = CylinderGeometry(4, 5.0)
        root = list(register_to_orbitals(0, 4))[: geom.n_orbitals]
        shifted = root.copy()
        shifted[0], shifted[1] = 0, 1
        assert momentum_of(shifted, geom) == momentum_of(root, geom) + 1

    def test_fock_counts(self):
        assert len(enumerate_fock(CylinderGeometry(2, 5.0))) == 6       # C(4,2)
        assert len(enumerate_fock(CylinderGeometry(6, 5.0))) == 8008    # C(16,6)

    def test_sector_partition(self):
        geom = CylinderGeometry(4, 5.0)
        full = enumerate_fock(geom)
        Ks = [momentum_of(int(s), geom) for s in full.states]
        total = 0
        for K in range(min(Ks), max(Ks) + 1):
            total += len(enumerate_fock(geom, K=K))
        assert total == len(full)

    def test_empty_sector_reported(self):
        with pytest.raises(ValueError, match="empty momentum sector"):
            enumerate_fock(CylinderGeometry(3, 5.0), K=10_000)

    def test_register_embedding_into_fock(self):
        geom = CylinderGeometry(5, 5.0)
        fock = enumerate_fock(geom, K=0)
        basis = enumerate_squeezed(geom)
        idx = [register_to_fock_index(int(c), fock) for c in basis.states]
        assert len(set(idx)) == len(basis)


class TestPostSelection:
    def test_examples(self):
        assert post_select(["010", "110", "000"]) == ["010", "000"]
        assert post_select(["0101", "1010"]) == ["0101", "1010"]
        assert post_select(["111", "11"]) == []

    def test_preserves_multiplicity_and_order(self):
        raw = ["00", "01", "11", "01", "00", "11", "10"]
        assert post_select(raw) == ["00", "01", "01", "00", "10"]

    def test_counts_variant(self):
        kept = post_select_counts({"00": 5, "11": 3, "10": 1})
        assert kept == {"00": 5, "10": 1}

    def test_output_subset_of_input(self):
        rng = np.random.default_rng(0)
        raw = ["".join(rng.choice(["0", "1"], size=6)) for _ in range(500)]
        kept = post_select(raw)
        assert all(s in raw for s in kept)
        assert all("11" not in s for s in kept)
