import itertools
import json
import random
from fractions import Fraction

import pytest

from dihedral_dynamics.exact_circle import ClopenSet, QuadExt, frac, qe_cmp
from dihedral_dynamics.systems import (
    FLIP,
    IDENTITY,
    TRANSLATION,
    DoubledClopen,
    GroupElement,
    LevelSet,
    OdometerSystem,
    cover_indices,
    system_from_json,
    top_freeness_check,
)

from test_exact_circle import random_clopen


class TestGroupElement:
    def test_product_and_inverse(self):
        rng = random.Random(3)
        for _ in range(200):
            g = GroupElement(rng.randint(-9, 9), rng.randint(0, 1))
            h = GroupElement(rng.randint(-9, 9), rng.randint(0, 1))
            assert (g * g.inverse()).is_identity()
            assert (g.inverse() * g).is_identity()
            k = GroupElement(rng.randint(-9, 9), rng.randint(0, 1))
            assert (g * h) * k == g * (h * k)

    def test_defining_relations(self):
        assert (FLIP * FLIP).is_identity()
        assert FLIP * TRANSLATION * FLIP == GroupElement(-1, 0)

    def test_json(self):
        assert GroupElement.from_json([3, 1]) == GroupElement(3, 1)
        with pytest.raises(ValueError):
            GroupElement.from_json([1, 2, 3])


class TestDenjoyAction:
    def test_flip_invariant_arc(self, denjoy, golden):
        y = ClopenSet.arc(golden, -1, 1)   # [(1-theta)+, theta+)
        assert denjoy.act(FLIP, y) == y

    def test_rotation_shifts(self, denjoy, golden):
        a = ClopenSet.arc(golden, 0, 1)
        assert denjoy.act(TRANSLATION, a) == ClopenSet.arc(golden, 1, 2)

    def test_identity(self, denjoy, golden):
        rng = random.Random(11)
        for _ in range(10):
            s = random_clopen(golden, rng)
            assert denjoy.act(IDENTITY, s) == s

    def test_dihedral_relations_on_sets(self, denjoy, golden):
        rng = random.Random(13)
        for _ in range(30):
            s = random_clopen(golden, rng)
            assert denjoy.act(FLIP, denjoy.act(FLIP, s)) == s
            lhs = denjoy.act(FLIP, denjoy.act(TRANSLATION, denjoy.act(FLIP, s)))
            assert lhs == denjoy.act(GroupElement(-1, 0), s)

    def test_action_is_homomorphism(self, denjoy, golden):
        rng = random.Random(17)
        for _ in range(25):
            s = random_clopen(golden, rng)
            g = GroupElement(rng.randint(-5, 5), rng.randint(0, 1))
            h = GroupElement(rng.randint(-5, 5), rng.randint(0, 1))
            assert denjoy.act(g * h, s) == denjoy.act(g, denjoy.act(h, s))

    def test_preserves_measure(self, denjoy, golden):
        rng = random.Random(19)
        for _ in range(15):
            s = random_clopen(golden, rng)
            g = GroupElement(rng.randint(-6, 6), rng.randint(0, 1))
            assert denjoy.act(g, s).measure() == s.measure()


def evaluate(g, x):
    """Point action (n, s): x -> (-1)^s x + n*theta, reduced mod 1."""
    moved = (-x if g.s else x) + QuadExt(Fraction(0), Fraction(g.n), x.theta)
    return frac(moved)


class TestDenjoyFixedPoints:
    def test_flip_fixes_half(self, denjoy, golden):
        pts = denjoy.fixed_points(FLIP).points
        assert [(p.a, p.b) for p in pts] == [(Fraction(1, 2), Fraction(0))]

    def test_reflected_translation(self, denjoy, golden):
        pts = denjoy.fixed_points(GroupElement(1, 1)).points
        assert {(p.a, p.b) for p in pts} == {
            (Fraction(0), Fraction(1, 2)), (Fraction(1, 2), Fraction(1, 2))}

    def test_rotation_free(self, denjoy):
        for n in range(1, 51):
            assert denjoy.fixed_points(GroupElement(n, 0)).points == ()
            assert denjoy.fixed_points(GroupElement(-n, 0)).points == ()

    def test_fixed_points_verify(self, denjoy):
        for n in range(-8, 9):
            g = GroupElement(n, 1)
            for x in denjoy.fixed_points(g).points:
                assert qe_cmp(evaluate(g, x), x) == 0

    def test_identity_rejected(self, denjoy):
        with pytest.raises(ValueError):
            denjoy.fixed_points(IDENTITY)


class TestDoubled:
    def test_free(self, doubled):
        for n in range(-20, 21):
            for s in (0, 1):
                g = GroupElement(n, s)
                if g.is_identity():
                    continue
                assert doubled.fixed_points(g).points == ()

    def test_relations_on_sets(self, doubled, golden):
        rng = random.Random(29)
        for _ in range(15):
            s = DoubledClopen(random_clopen(golden, rng), random_clopen(golden, rng))
            assert doubled.act(FLIP, doubled.act(FLIP, s)) == s
            lhs = doubled.act(FLIP, doubled.act(TRANSLATION, doubled.act(FLIP, s)))
            assert lhs == doubled.act(GroupElement(-1, 0), s)

    def test_components_invariant_and_swapped(self, doubled, golden):
        a = ClopenSet.arc(golden, 0, 1)
        s = DoubledClopen(a, ClopenSet.empty(golden))
        moved = doubled.act(TRANSLATION, s)
        assert moved.comp1.is_empty() and not moved.comp0.is_empty()
        flipped = doubled.act(FLIP, s)
        assert flipped.comp0.is_empty() and flipped.comp1 == a


class TestOdometer:
    def test_fixed_fraction_examples(self):
        odo = OdometerSystem([12, 24, 48])
        assert odo.fixed_fraction(FLIP, 1) == Fraction(1, 6)
        assert odo.fixed_fraction(GroupElement(1, 1), 1) == Fraction(0)
        assert odo.fixed_fraction(GroupElement(12, 0), 1) == Fraction(1)

    def test_fixed_fraction_enumeration_oracle(self):
        rng = random.Random(31)
        odo = OdometerSystem([6, 12, 60, 120])
        for level in range(1, 5):
            n = odo.modulus(level)
            for _ in range(25):
                g = GroupElement(rng.randint(-30, 30), rng.randint(0, 1))
                sign = -1 if g.s else 1
                brute = sum(1 for x in range(n) if (g.n + sign * x) % n == x)
                assert odo.fixed_fraction(g, level) == Fraction(brute, n)

    def test_flip_fraction_bound(self, odometer3, odometer2):
        for odo in (odometer3, odometer2, OdometerSystem([12 * 2 ** i for i in range(7)])):
            for level in range(1, len(odo.chain) + 1):
                n = odo.modulus(level)
                for k in range(-5, 6):
                    assert odo.fixed_fraction(GroupElement(k, 1), level) <= Fraction(2, n)

    def test_stable_counts(self, odometer3, odometer2):
        tc = odometer3.stable_fixed_count(FLIP, 6)
        assert (tc.count, tc.stabilized_at) == (1, 1)
        tc = odometer3.stable_fixed_count(GroupElement(1, 1), 6)
        assert (tc.count, tc.stabilized_at) == (1, 1)
        tc = odometer2.stable_fixed_count(FLIP, 8)
        assert tc.count == 1
        twist = OdometerSystem([2 * 3 ** i for i in range(1, 7)])
        assert twist.stable_fixed_count(FLIP, 5).count == 2

    def test_stable_counts_brute_force(self):
        # depth-limited exhaustive thread enumeration as an oracle
        def brute(chain, g, depth, extra):
            odo = OdometerSystem(chain)
            fixed = [odo.level_fixed_set(g, level) for level in range(1, depth + extra + 1)]
            deep = []
            for xs in itertools.product(*fixed):
                if all(xs[i + 1] % chain[i] == xs[i] for i in range(len(xs) - 1)):
                    deep.append(xs)
            return len({xs[depth - 1] for xs in deep})

        cases = [
            ([2 ** i for i in range(1, 9)], FLIP, 4, 4),
            ([3 ** i for i in range(1, 7)], FLIP, 3, 3),
            ([3 ** i for i in range(1, 7)], GroupElement(1, 1), 3, 3),
            ([2 * 3 ** i for i in range(1, 7)], FLIP, 3, 3),
            ([12 * 2 ** i for i in range(7)], FLIP, 3, 3),
        ]
        for chain, g, depth, extra in cases:
            odo = OdometerSystem(chain)
            tc = odo.stable_fixed_count(g, depth + extra)
            assert tc.count == brute(chain, g, depth, extra), (chain, g)

    def test_translation_element_counts(self, odometer3):
        # (k, 0) fixes everything at levels dividing k, nothing after
        tc = odometer3.stable_fixed_count(GroupElement(9, 0), 6)
        assert tc.count == 0

    def test_identity_and_depth_validation(self, odometer3):
        with pytest.raises(ValueError):
            odometer3.stable_fixed_count(IDENTITY, 5)
        with pytest.raises(ValueError):
            odometer3.stable_fixed_count(FLIP, 1)

    def test_chain_validation(self):
        with pytest.raises(ValueError):
            OdometerSystem([4, 4, 4])
        with pytest.raises(ValueError):
            OdometerSystem([4, 6])
        with pytest.raises(ValueError):
            OdometerSystem([5])

    def test_coset_identification(self):
        for chain in ([2, 4, 8], [3, 9], [6, 12]):
            odo = OdometerSystem(chain)
            for level in range(1, len(chain) + 1):
                assert odo.coset_identification_ok(level)

    def test_projection_equivariance(self):
        rng = random.Random(41)
        odo = OdometerSystem([4, 12, 24])
        for level in (1, 2):
            n_fine = odo.modulus(level + 1)
            n_coarse = odo.modulus(level)
            for _ in range(50):
                g = GroupElement(rng.randint(-15, 15), rng.randint(0, 1))
                x = rng.randrange(n_fine)
                sign = -1 if g.s else 1
                moved_then_projected = ((g.n + sign * x) % n_fine) % n_coarse
                projected_then_moved = (g.n + sign * (x % n_coarse)) % n_coarse
                assert moved_then_projected == projected_then_moved

    def test_reflected_thread_values(self, odometer3):
        # the unique fixed residue of the reflected step at level i is (3^i+1)/2
        for level in range(1, 6):
            n = odometer3.modulus(level)
            assert odometer3.level_fixed_set(GroupElement(1, 1), level) == {(n + 1) // 2}

    def test_act_is_homomorphism(self, odometer3):
        rng = random.Random(37)
        n = odometer3.modulus(3)
        for _ in range(40):
            s = LevelSet(n, frozenset(rng.sample(range(n), rng.randint(0, n // 2))))
            g = GroupElement(rng.randint(-9, 9), rng.randint(0, 1))
            h = GroupElement(rng.randint(-9, 9), rng.randint(0, 1))
            assert odometer3.act(g * h, s) == odometer3.act(g, odometer3.act(h, s))


class TestTopologicalFreeness:
    def test_standard_chains(self):
        assert top_freeness_check([2 * 3 ** i for i in range(1, 6)], 4)["topologically_free"]
        factorials = [2]
        for i in range(2, 7):
            factorials.append(factorials[-1] * i)
        assert top_freeness_check(factorials, 4)["topologically_free"]

    def test_witnesses_escape_core(self):
        report = top_freeness_check([2 ** i for i in range(1, 6)], 3)
        for j, (b, conj) in report["witnesses"].items():
            assert b.n % (2 ** j) == 0
            assert conj not in (IDENTITY, FLIP)

    def test_constant_chain_rejected(self):
        with pytest.raises(ValueError):
            top_freeness_check([4, 4], 2)


class TestLevelPartition:
    def test_denjoy_level_one(self, denjoy, golden):
        lp = denjoy.level_partition(1)
        assert len(lp.cells) == 3
        half = QuadExt(Fraction(1, 2), Fraction(0), golden)
        fixed = [i for i, p in enumerate(lp.sigma_perm) if p == i]
        assert len(fixed) == 1
        assert lp.cells[fixed[0]].contains_value(half)
        moved = [i for i in range(3) if lp.sigma_perm[i] != i]
        assert len(moved) == 2

    def test_denjoy_level_zero(self, denjoy):
        lp = denjoy.level_partition(0)
        assert len(lp.cells) == 1 and lp.cells[0].full
        assert lp.sigma_perm == (0,)

    def test_partition_matrices(self, denjoy):
        lp = denjoy.level_partition(2)
        sig = lp.sigma_matrix()
        assert all(sum(col) == 1 for col in zip(*sig))
        phi = lp.phi_matrix()
        assert len(phi) == len(denjoy.symmetric_cells(3))
        assert len(phi[0]) == len(lp.cells)
        # each translated cell covers at least one finer cell
        assert all(any(phi[i][j] for i in range(len(phi))) for j in range(len(lp.cells)))
        ps = lp.phi_sigma_matrix()
        assert all(sum(col) == 1 for col in zip(*ps))

        odo = OdometerSystem([4, 8])
        lp2 = odo.level_partition(1)
        assert lp2.sigma_matrix()[0][0] == 1
        assert all(sum(col) == 1 for col in zip(*lp2.phi_matrix()))

    def test_odometer_level(self):
        odo = OdometerSystem([4, 8])
        lp = odo.level_partition(1)
        assert len(lp.cells) == 4
        assert [i for i, p in enumerate(lp.sigma_perm) if p == i] == [0, 2]
        # translation cycles all cells
        seen, i = set(), 0
        for _ in range(4):
            seen.add(i)
            i = lp.phi_perm[i]
        assert seen == {0, 1, 2, 3}

    def test_refinement(self, denjoy):
        for level in range(0, 4):
            coarse = denjoy.symmetric_cells(level)
            fine = denjoy.symmetric_cells(level + 1)
            for c in coarse:
                ix = cover_indices(c, fine)
                union = fine[ix[0]]
                for i in ix[1:]:
                    union = union.union(fine[i])
                assert union == c

    def test_odometer_refinement(self, odometer3):
        for level in (1, 2):
            for c in odometer3.cells(level):
                refined = odometer3.refine(c, level, level + 1)
                ix = cover_indices(refined, odometer3.cells(level + 1))
                assert len(ix) == odometer3.modulus(level + 1) // odometer3.modulus(level)

    def test_partition_is_partition(self, denjoy):
        from dihedral_dynamics.exact_circle import is_partition
        for level in (1, 2, 3):
            assert is_partition(denjoy.symmetric_cells(level))
            assert is_partition(denjoy.shifted_cells(level))


class TestSystemJson:
    def test_round_trips(self, denjoy, doubled, odometer3):
        for system in (denjoy, doubled, odometer3):
            data = json.loads(json.dumps(system.to_json()))
            assert system_from_json(data) == system

    def test_geometric_chain(self):
        odo = system_from_json({"type": "odometer", "base": 2, "growth": "geometric",
                                "levels": 4})
        assert odo.chain == (2, 4, 8, 16)

    def test_unknown_fields_rejected(self):
        with pytest.raises(ValueError):
            system_from_json({"type": "odometer", "chain": [2, 4], "extra": 1})
        with pytest.raises(ValueError):
            system_from_json({"type": "denjoy_flip", "theta": {"p": -1, "q": 1, "d": 5, "r": 2},
                              "junk": True})
        with pytest.raises(ValueError):
            system_from_json({"type": "mystery"})
