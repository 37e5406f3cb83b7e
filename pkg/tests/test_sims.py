from __future__ import annotations

import json

import numpy as np
import pytest

from causalorder.bn import bundled_graph
from causalorder.enumeration import (
    DAG_COUNTS,
    all_dag_masks,
    batched_closure,
    masks_to_bits,
)
from causalorder.errors import SimAssertionError
from causalorder.graph import AdjacencyMatrix, VariableSet, transitive_closure
from causalorder.sims import (
    random_dag,
    sim_metric_correlation,
    sim_perfect_expert,
    sim_third_pair_error,
    sim_shd_variance,
    third_pair_error_closed_form,
    third_pair_error_mechanism,
    three_node_family,
)
from oracles import exact_third_pair_error


class TestEnumeration:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_dag_counts(self, n):
        assert len(all_dag_masks(n)) == DAG_COUNTS[n]

    def test_bits_round_trip_and_closure(self):
        masks = all_dag_masks(4)
        bits = masks_to_bits(masks, 4)
        closures = batched_closure(bits)
        rng = np.random.default_rng(0)
        variables = VariableSet(tuple("abcd"))
        for idx in rng.choice(len(masks), size=50, replace=False):
            g = AdjacencyMatrix(variables, bits[idx])
            expected = transitive_closure(g).bits
            got = closures[idx].copy()
            np.fill_diagonal(got, False)
            assert np.array_equal(got, expected)


class TestThreeNodeFamily:
    def test_exactly_25_dags(self):
        assert len(three_node_family()) == 25

    def test_all_distinct_and_acyclic(self):
        graphs = three_node_family()
        fingerprints = {tuple(sorted(g.edges())) for g in graphs}
        assert len(fingerprints) == 25
        assert all(g.is_dag() for g in graphs)

    def test_constrained_partials_have_two_completions(self):
        # Chains through C restrict the focal pair to two options; every
        # other auxiliary configuration admits all three.
        graphs = three_node_family()
        by_partial = {}
        for g in graphs:
            key = (
                g.has_edge("C", "A"),
                g.has_edge("A", "C"),
                g.has_edge("C", "B"),
                g.has_edge("B", "C"),
            )
            by_partial[key] = by_partial.get(key, 0) + 1
        chain_b_to_a = (True, False, False, True)  # B -> C -> A
        chain_a_to_b = (False, True, True, False)  # A -> C -> B
        assert by_partial[chain_b_to_a] == 2
        assert by_partial[chain_a_to_b] == 2
        assert sum(v for k, v in by_partial.items() if k not in (chain_b_to_a, chain_a_to_b)) == 21


class TestClosedForm:
    @pytest.mark.parametrize("eps", [0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95])
    def test_mechanism_value_matches_exact_enumeration(self, eps):
        # Independent oracle: enumerate all 25 graphs x 9 auxiliary-answer
        # combinations and average the forced/renormalized error exactly.
        assert third_pair_error_mechanism(eps) == pytest.approx(
            exact_third_pair_error(eps), abs=1e-12
        )

    @pytest.mark.parametrize("eps", [round(0.05 + 0.05 * k, 2) for k in range(19)])
    def test_grouped_formula_below_epsilon(self, eps):
        # Property of the grouped formula itself.
        assert third_pair_error_closed_form(eps) < eps

    def test_reference_value_at_point_three(self):
        assert third_pair_error_closed_form(0.3) == pytest.approx(0.1527176, abs=1e-6)

    @pytest.mark.parametrize("eps", [0.1, 0.3, 0.5])
    def test_grouped_formula_undercounts_the_mechanism(self, eps):
        # The grouped formula counts the unconstrained error mass
        # once per auxiliary configuration instead of once per graph, so it
        # sits strictly below what the described sampler produces.
        assert third_pair_error_closed_form(eps) < third_pair_error_mechanism(eps)


class TestSimThirdPairError:
    def test_monte_carlo_converges_to_the_mechanism_value(self):
        report = sim_third_pair_error(0.3, trials=200_000, seed=1)
        p = report.summary["mechanism_expectation"]
        assert report.summary["abs_diff_mechanism"] < 3 * np.sqrt(p * (1 - p) / 200_000)

    def test_small_epsilon_rarely_errs(self):
        report = sim_third_pair_error(1e-6, trials=20_000, seed=2)
        assert report.summary["empirical_error"] < 1e-3

    def test_deterministic(self):
        a = sim_third_pair_error(0.4, trials=5_000, seed=4)
        b = sim_third_pair_error(0.4, trials=5_000, seed=4)
        assert a.to_json() == b.to_json()
        assert np.array_equal(a.records["error"], b.records["error"])

    def test_record_count_matches_trials(self):
        report = sim_third_pair_error(0.2, trials=1234, seed=5)
        assert report.record_count == 1234

    def test_trials_are_partition_independent(self):
        """Per-trial outcomes derive from (seed, trial index) alone, so any
        partitioning of the trial space reproduces the serial run."""
        from causalorder.experts import EpsilonExpert, EpsilonExpertConfig, ExpertQuery
        from causalorder.sims import three_node_family

        seed, trials, eps = 77, 400, 0.35
        report = sim_third_pair_error(eps, trials=trials, seed=seed)
        graphs = three_node_family()
        rng = np.random.default_rng(seed)
        picks = rng.integers(0, len(graphs), size=trials)
        for t in reversed(range(0, trials, 7)):  # out-of-order recompute
            gi = int(picks[t])
            expert = EpsilonExpert(
                EpsilonExpertConfig(eps, seed * 1_000_003 + t, graphs[gi])
            )
            verdict = expert.answer_tuple(ExpertQuery("tuple", ("A", "B", "C")))
            g = graphs[gi]
            from causalorder.experts import Choice

            if g.has_edge("A", "B"):
                true = Choice.FORWARD
            elif g.has_edge("B", "A"):
                true = Choice.BACKWARD
            else:
                true = Choice.NO_EDGE
            assert report.records["error"][t] == (verdict.pair_choice("A", "B") is not true)


class TestSimPerfectExpert:
    def test_cancer_values(self, cancer):
        report = sim_perfect_expert(cancer)
        assert report.summary == {"dtop": 0, "shd": 4, "shd_closed_form": 4}

    def test_chain_of_three(self, chain3):
        report = sim_perfect_expert(chain3)
        assert report.summary["shd"] == 1

    def test_edgeless_graph(self):
        g = AdjacencyMatrix.empty(VariableSet(("a", "b", "c")))
        report = sim_perfect_expert(g)
        assert report.summary["shd"] == 0

    @pytest.mark.parametrize("name", ["earthquake", "survey", "asia", "asia_m"])
    def test_bundled_graphs_pass_their_own_checks(self, name):
        sim_perfect_expert(bundled_graph(name))


class TestSimShdVariance:
    def test_truth_is_always_in_family(self):
        report = sim_shd_variance(4, seed=0, truths=6)
        assert all(v == 0 for v in report.records["shd_min"])

    def test_closure_shd_is_attained(self):
        # The transitive closure shares every order with the truth, so the
        # family's max SHD is at least descendants minus children.
        rng = np.random.default_rng(1)
        for _ in range(5):
            truth = random_dag(rng, 5)
            closure = transitive_closure(truth)
            gap = closure.n_edges() - truth.n_edges()
            from causalorder.sims import _order_consistent_family

            shds = _order_consistent_family(truth)
            assert gap in set(shds.tolist())

    def test_records_shape(self):
        report = sim_shd_variance(4, seed=2, truths=5)
        assert report.record_count == 5
        assert json.loads(report.to_json())["summary"]["max_shd_at_dtop0"] >= 0

    def test_n7_uses_sampling(self):
        report = sim_shd_variance(7, seed=3, truths=2, n7_samples=2_000)
        assert report.record_count == 2


class TestSimMetricCorrelation:
    def test_zero_dtop_rows_have_tiny_error_and_rho_positive(self):
        report = sim_metric_correlation(
            structure="asia",
            treatment="smoke",
            target="dysp",
            trials=40,
            seed=6,
            n_samples=50_000,
        )
        assert report.summary["max_eps_ace_at_dtop0"] < 0.05
        assert report.summary["spearman_dtop_eps_ace"] > 0

    def test_identity_comparison_is_clean(self):
        report = sim_metric_correlation(trials=10, seed=7, n_samples=30_000)
        zero_rows = report.records["eps_ace"][report.records["dtop"] == 0]
        assert len(zero_rows) > 0


class TestSimReportSerialization:
    def test_csv_has_header_and_rows(self):
        report = sim_third_pair_error(0.2, trials=50, seed=8)
        lines = report.records_csv().splitlines()
        assert lines[0] == "graph,error"
        assert len(lines) == 51
