import numpy as np
import pytest

from deartifact import allocator as al
from deartifact.errors import CapExceededError, InfeasibleError


def random_instance(rng, max_images=8, max_options=4):
    n = int(rng.integers(1, max_images + 1))
    m = int(rng.integers(1, max_options + 1))
    f = rng.uniform(0, 100, (n, m))
    b = rng.uniform(1, 50, (n, m))
    limit = float(rng.uniform(b.min(axis=1).sum(), b.max(axis=1).sum() + 1))
    return al.AllocationInstance(f, b, limit)


TIE_INSTANCE = al.AllocationInstance(
    f=[[10, 4], [8, 2]], b=[[3, 5], [4, 6]], limit=9
)


class TestBasicOps:
    def test_objective_zero(self):
        inst = al.AllocationInstance([[0.0, 0.0]], [[1, 2]], 5)
        assert al.objective(inst, al.Allocation([1])) == 0.0

    def test_objective_picks_column(self):
        inst = al.AllocationInstance([[10, 4]], [[1, 1]], 5)
        assert al.objective(inst, al.Allocation([1])) == 4.0

    def test_objective_flat_loop_oracle(self):
        rng = np.random.default_rng(0)
        inst = random_instance(rng)
        choice = [int(rng.integers(0, inst.n_options)) for _ in range(inst.n_images)]
        want = sum(inst.f[i, c] for i, c in enumerate(choice))
        assert al.objective(inst, al.Allocation(choice)) == pytest.approx(want)

    def test_total_size_and_feasibility(self):
        inst = al.AllocationInstance([[1, 1], [1, 1]], [[3, 5], [4, 6]], 9)
        alloc = al.Allocation([0, 1])
        assert al.total_size(inst, alloc) == 9
        assert al.feasible(inst, alloc)
        inst8 = al.AllocationInstance([[1, 1], [1, 1]], [[3, 5], [4, 6]], 8)
        assert not al.feasible(inst8, alloc)

    def test_zero_limit_infeasible(self):
        inst = al.AllocationInstance([[1.0]], [[3.0]], 0)
        assert not al.feasible(inst, al.Allocation([0]))
        with pytest.raises(InfeasibleError):
            al.solve(inst)


class TestBruteForce:
    def test_forced_cheapest_option(self):
        inst = al.AllocationInstance([[5, 3, 9]], [[1, 1, 1]], 1)
        assert al.brute_force(inst).choice == [1]

    def test_tie_break(self):
        assert al.brute_force(TIE_INSTANCE).choice == [0, 1]

    def test_infeasible(self):
        inst = al.AllocationInstance([[1, 1]], [[10, 20]], 5)
        with pytest.raises(InfeasibleError) as exc:
            al.brute_force(inst)
        assert exc.value.min_total_size == 10

    def test_cap(self):
        inst = al.AllocationInstance(np.ones((30, 4)), np.ones((30, 4)), 100)
        with pytest.raises(CapExceededError):
            al.brute_force(inst, cap=1000)


class TestSolve:
    def test_single_option_forced(self):
        inst = al.AllocationInstance([[7.0], [2.0]], [[3.0], [4.0]], 10)
        assert al.solve(inst).choice == [0, 0]

    def test_tie_breaks_lexicographically(self):
        alloc = al.solve(TIE_INSTANCE)
        assert alloc.choice == [0, 1]
        assert al.objective(TIE_INSTANCE, alloc) == 12

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(77)
        for _ in range(200):
            inst = random_instance(rng)
            got = al.solve(inst)
            want = al.brute_force(inst)
            assert al.objective(inst, got) == pytest.approx(
                al.objective(inst, want), abs=1e-9
            )
            assert got.choice == want.choice
            assert al.feasible(inst, got)

    def test_infeasible_reports_min_size(self):
        inst = al.AllocationInstance([[1, 1], [1, 1]], [[5, 7], [6, 8]], 10)
        with pytest.raises(InfeasibleError) as exc:
            al.solve(inst)
        assert exc.value.min_total_size == 11

    def test_monotone_in_limit(self):
        rng = np.random.default_rng(5)
        inst = random_instance(rng, max_images=6)
        limits = np.linspace(inst.b.min(axis=1).sum(), inst.b.max(axis=1).sum(), 8)
        objectives = []
        for lim in limits:
            relaxed = al.AllocationInstance(inst.f, inst.b, float(lim))
            objectives.append(al.objective(relaxed, al.solve(relaxed)))
        assert all(a >= b - 1e-9 for a, b in zip(objectives, objectives[1:]))

    def test_scale_invariance_of_choice(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            inst = random_instance(rng, max_images=5)
            scaled = al.AllocationInstance(inst.f * 3.7, inst.b, inst.limit)
            assert al.solve(inst).choice == al.solve(scaled).choice


class TestDominance:
    def test_dominated_option_removed(self):
        inst = al.AllocationInstance([[5, 9]], [[3, 7]], 100)
        _, keep = al.dominance_prune(inst)
        assert keep == [[0]]

    def test_pareto_frontier_untouched(self):
        inst = al.AllocationInstance([[9, 5, 1]], [[1, 5, 9]], 100)
        _, keep = al.dominance_prune(inst)
        assert keep == [[0, 1, 2]]

    def test_duplicate_keeps_lowest_index(self):
        inst = al.AllocationInstance([[5, 5]], [[3, 3]], 100)
        _, keep = al.dominance_prune(inst)
        assert keep == [[0]]

    def test_prune_preserves_optimum(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            inst = random_instance(rng, max_images=5)
            pruned, _ = al.dominance_prune(inst)
            assert al.objective(pruned, al.solve(pruned)) == pytest.approx(
                al.objective(inst, al.solve(inst)), abs=1e-9
            )


class TestInstanceFile:
    def test_round_trip(self):
        rng = np.random.default_rng(3)
        inst = random_instance(rng)
        parsed = al.parse_instance(al.format_instance(inst))
        assert parsed.limit == pytest.approx(inst.limit, rel=1e-5)
        assert np.allclose(parsed.f, inst.f, rtol=1e-5)
        assert np.allclose(parsed.b, inst.b, rtol=1e-5)

    def test_example_text(self):
        text = "2 2 9\n3:10 5:4\n4:8 6:2\n"
        inst = al.parse_instance(text)
        assert al.solve(inst).choice == [0, 1]

    def test_malformed_rejected(self):
        with pytest.raises(ValueError):
            al.parse_instance("")
        with pytest.raises(ValueError):
            al.parse_instance("2 2 9\n3:10 5:4\n")
        with pytest.raises(ValueError):
            al.parse_instance("1 2 9\n3:10\n")
