from __future__ import annotations

import itertools

import numpy as np
import pytest

from causalorder.bn import LinearScm, SampleTable, load_scm, sample_linear_scm
from causalorder.effect import (
    ace_adjusted,
    d_separated,
    epsilon_ace,
    is_valid_backdoor,
    minimal_backdoor,
    order_adjustment_set,
    scm_true_ace,
)
from causalorder.errors import MissingColumnError, SingularDesignError, UnorderedNodeError
from causalorder.graph import (
    AdjacencyMatrix,
    TopologicalOrder,
    VariableSet,
    dtop,
    topological_order_of,
)
from oracles import brute_d_separated, random_dag


class TestDSeparated:
    def test_chain_blocked_by_mediator(self, chain3):
        assert d_separated(chain3, "A", "C", ["B"])
        assert not d_separated(chain3, "A", "C", [])

    def test_collider_blocks_marginally(self, collider3):
        assert d_separated(collider3, "A", "B", [])
        assert not d_separated(collider3, "A", "B", ["C"])

    def test_conditioning_on_collider_descendant_opens(self):
        variables = VariableSet(("A", "B", "C", "D"))
        g = AdjacencyMatrix.from_edges(
            variables, [("A", "C"), ("B", "C"), ("C", "D")]
        )
        assert not d_separated(g, "A", "B", ["D"])

    def test_exhaustive_on_all_small_graphs(self):
        # Every DAG on 3 and 4 nodes, every ordered pair, every subset of
        # the remaining nodes as the conditioning set.
        from causalorder.enumeration import dag_universe

        for n in (3, 4):
            _, all_bits, _ = dag_universe(n)
            names = tuple(f"v{i}" for i in range(n))
            variables = VariableSet(names)
            for bits in all_bits:
                g = AdjacencyMatrix(variables, bits)
                for xi, yi in itertools.combinations(range(n), 2):
                    rest = [names[k] for k in range(n) if k not in (xi, yi)]
                    for r in range(len(rest) + 1):
                        for z in itertools.combinations(rest, r):
                            assert d_separated(g, names[xi], names[yi], z) == (
                                brute_d_separated(g, names[xi], names[yi], z)
                            )

    def test_matches_brute_force_on_random_graphs(self):
        rng = np.random.default_rng(17)
        for _ in range(150):
            n = int(rng.integers(3, 7))
            g = random_dag(rng, n)
            names = list(g.vars.names)
            x, y = rng.choice(n, size=2, replace=False)
            rest = [k for k in range(n) if k not in (x, y)]
            z = [names[k] for k in rest if rng.random() < 0.4]
            got = d_separated(g, names[x], names[y], z)
            want = brute_d_separated(g, names[x], names[y], z)
            assert got == want


class TestBackdoorChecker:
    def test_asia_smoke_blocks_lung_dysp(self, asia):
        assert is_valid_backdoor(asia, "lung", "dysp", ["smoke"])

    def test_descendant_members_invalidate(self, asia):
        assert not is_valid_backdoor(asia, "lung", "dysp", ["either"])

    def test_unconfounded_edge_needs_nothing(self):
        variables = VariableSet(("A", "B"))
        g = AdjacencyMatrix.from_edges(variables, [("A", "B")])
        assert is_valid_backdoor(g, "A", "B", [])

    def test_open_backdoor_detected(self):
        variables = VariableSet(("C", "X", "Y"))
        g = AdjacencyMatrix.from_edges(
            variables, [("C", "X"), ("C", "Y"), ("X", "Y")]
        )
        assert not is_valid_backdoor(g, "X", "Y", [])
        assert is_valid_backdoor(g, "X", "Y", ["C"])

    def test_label_equivariance(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            n = int(rng.integers(3, 7))
            g = random_dag(rng, n)
            names = list(g.vars.names)
            perm = rng.permutation(n)
            renamed = VariableSet(tuple(names[p] for p in perm))
            bits = np.zeros((n, n), dtype=bool)
            for i, j in zip(*np.nonzero(g.bits)):
                bits[renamed.index(names[i]), renamed.index(names[j])] = True
            relabeled = AdjacencyMatrix(renamed, bits)
            t, y = (names[int(v)] for v in rng.choice(n, size=2, replace=False))
            z = [nm for nm in names if nm not in (t, y) and rng.random() < 0.4]
            assert is_valid_backdoor(g, t, y, z) == is_valid_backdoor(relabeled, t, y, z)


class TestOrderAdjustment:
    def test_first_treatment_has_empty_set(self):
        order = TopologicalOrder.from_sequence(["a", "b", "c"])
        assert order_adjustment_set(order, "a").members == frozenset()

    def test_asia_lung_predecessors(self, asia):
        order = topological_order_of(asia)
        z = order_adjustment_set(order, "lung")
        assert z.members == {"asia", "tub", "smoke"}

    def test_last_treatment_gets_everything(self, asia):
        order = topological_order_of(asia)
        z = order_adjustment_set(order, "dysp")
        assert len(z.members) == 7

    def test_unranked_treatment_raises(self):
        order = TopologicalOrder.from_sequence(["a", "b"])
        with pytest.raises(UnorderedNodeError):
            order_adjustment_set(order, "zz")

    def test_prop2_on_random_dags_and_orders(self):
        # Predecessor sets from any valid topological order satisfy the
        # backdoor criterion for every pair; exhaustive sweep lives in the
        # acceptance suite, this is the fast randomized version.
        rng = np.random.default_rng(5)
        for _ in range(60):
            n = int(rng.integers(3, 7))
            g = random_dag(rng, n)
            base = topological_order_of(g).names_in_order()
            order = TopologicalOrder.from_sequence(base)
            for treatment, target in itertools.permutations(g.vars.names, 2):
                z = order_adjustment_set(order, treatment).members
                assert is_valid_backdoor(g, treatment, target, z)


class TestMinimalBackdoor:
    def test_asia_lung_dysp_minimal_is_smoke(self, asia):
        z = minimal_backdoor(asia, "lung", "dysp")
        assert z.members == {"smoke"}

    def test_root_treatment_needs_nothing(self, cancer):
        z = minimal_backdoor(cancer, "Pollution", "Xray")
        assert z.members == frozenset()


def two_node_scm(coeff=2.0):
    return load_scm(
        "scm pair\nnode X { parents: ; noise: 1.0; }\n"
        f"node Y {{ parents: X; coeff: X:{coeff}; noise: 1.0; }}\n"
    )


class TestAceAdjusted:
    def test_unconfounded_edge_recovers_coefficient(self):
        scm = two_node_scm(2.0)
        data = sample_linear_scm(scm, 100_000, seed=0)
        estimate = ace_adjusted(data, "X", "Y", [], 1.0, 0.0)
        assert abs(estimate.value - 2.0) < 0.05

    def test_confounder_adjustment_recovers_direct_effect(self):
        scm = load_scm(
            "scm confounded\n"
            "node C { parents: ; noise: 1.0; }\n"
            "node X { parents: C; coeff: C:1.0; noise: 1.0; }\n"
            "node Y { parents: C, X; coeff: C:1.5, X:0.8; noise: 1.0; }\n"
        )
        data = sample_linear_scm(scm, 100_000, seed=1)
        adjusted = ace_adjusted(data, "X", "Y", ["C"], 1.0, 0.0)
        assert abs(adjusted.value - 0.8) < 0.05
        unadjusted = ace_adjusted(data, "X", "Y", [], 1.0, 0.0)
        assert abs(unadjusted.value - 0.8) > 0.2  # bias without adjustment

    def test_target_in_adjustment_rejected(self):
        scm = two_node_scm()
        data = sample_linear_scm(scm, 100, seed=2)
        with pytest.raises(ValueError):
            ace_adjusted(data, "X", "Y", ["Y"], 1.0, 0.0)

    def test_missing_column(self):
        scm = two_node_scm()
        data = sample_linear_scm(scm, 100, seed=3)
        with pytest.raises(MissingColumnError):
            ace_adjusted(data, "X", "Z", [], 1.0, 0.0)

    def test_singular_design(self):
        x = np.linspace(0, 1, 50)
        table = SampleTable(("X", "X2", "Y"), np.column_stack([x, x, 2 * x]))
        with pytest.raises(SingularDesignError):
            ace_adjusted(table, "X", "Y", ["X2"], 1.0, 0.0)

    def test_levels_scale_the_effect(self):
        scm = two_node_scm(2.0)
        data = sample_linear_scm(scm, 50_000, seed=4)
        doubled = ace_adjusted(data, "X", "Y", [], 3.0, 1.0)
        assert abs(doubled.value - 4.0) < 0.1


class TestEpsilonAce:
    def test_exact(self):
        assert epsilon_ace(2.0, 2.0) == 0.0

    def test_absolute(self):
        assert epsilon_ace(1.7, 2.0) == pytest.approx(0.3)


class TestScmTrueAce:
    def test_path_sum(self):
        scm = load_scm(
            "scm chain3\n"
            "node X { parents: ; noise: 1.0; }\n"
            "node Y { parents: X; coeff: X:2.0; noise: 1.0; }\n"
            "node Z { parents: X, Y; coeff: X:0.5, Y:3.0; noise: 1.0; }\n"
        )
        assert scm_true_ace(scm, "X", "Z") == pytest.approx(0.5 + 2.0 * 3.0)

    def test_no_path_means_zero(self):
        scm = load_scm(
            "scm pairless\nnode X { parents: ; noise: 1.0; }\n"
            "node Y { parents: ; noise: 1.0; }\n"
        )
        assert scm_true_ace(scm, "X", "Y") == 0.0

    def test_ols_matches_closed_form(self):
        rng = np.random.default_rng(8)
        truth = random_dag(rng, 5, p=0.5)
        coeff = {e: float(rng.uniform(-1.5, 1.5)) for e in truth.edges()}
        scm = LinearScm(
            "rand",
            truth.vars,
            {v: tuple(truth.parents(v)) for v in truth.vars},
            coeff,
            {v: 1.0 for v in truth.vars},
        )
        data = sample_linear_scm(scm, 200_000, seed=9)
        order = topological_order_of(truth)
        names = order.names_in_order()
        treatment, target = names[0], names[-1]
        z = order.predecessors(treatment)
        estimate = ace_adjusted(data, treatment, target, z, 1.0, 0.0)
        assert abs(estimate.value - scm_true_ace(scm, treatment, target)) < 0.05


class TestProp3Directions:
    def test_zero_dtop_orders_give_valid_sets(self, cancer):
        order = topological_order_of(cancer)
        assert dtop(order, cancer) == 0
        for treatment in cancer.vars:
            z = order.predecessors(treatment)
            for target in cancer.vars:
                if target == treatment:
                    continue
                assert is_valid_backdoor(cancer, treatment, target, z)

    def test_bad_order_produces_an_invalid_pair(self, chain3):
        # Order (B, A, C) reverses A -> B, so B sits in A's predecessor set
        # while being A's descendant.
        order = TopologicalOrder.from_sequence(["B", "A", "C"])
        assert dtop(order, chain3) == 1
        z = order.predecessors("A")
        assert not is_valid_backdoor(chain3, "A", "B", z)
