from __future__ import annotations

import numpy as np
import pytest

from causalorder.experts import (
    Choice,
    EpsilonExpertConfig,
    ExpertQuery,
    PerfectExpert,
    ScriptedExpert,
    TupleVerdict,
    epsilon_pairwise,
    epsilon_tuple,
    pair_sequence,
    perfect_pairwise,
)
from causalorder.graph import AdjacencyMatrix, VariableSet, transitive_closure
from oracles import random_dag


class TestPerfectPairwise:
    def test_mediated_pair_without_context_gets_edge(self, chain3):
        assert perfect_pairwise(chain3, "A", "C").choice is Choice.FORWARD

    def test_mediator_in_context_blocks_edge(self, chain3):
        assert perfect_pairwise(chain3, "A", "C", aux=("B",)).choice is Choice.NO_EDGE

    def test_direct_edge_wins_regardless_of_context(self, chain3):
        assert perfect_pairwise(chain3, "A", "B", aux=("C",)).choice is Choice.FORWARD
        assert perfect_pairwise(chain3, "B", "A").choice is Choice.BACKWARD

    def test_all_pairs_with_empty_context_build_the_closure(self, asia):
        closure = transitive_closure(asia)
        edges = set()
        names = asia.vars.names
        for i in range(len(names)):
            for j in range(i + 1, len(names)):
                verdict = perfect_pairwise(asia, names[i], names[j])
                if verdict.choice is Choice.FORWARD:
                    edges.add((names[i], names[j]))
                elif verdict.choice is Choice.BACKWARD:
                    edges.add((names[j], names[i]))
        assert edges == set(closure.edges())

    def test_tuple_answers_are_acyclic_and_mediator_aware(self, chain3):
        expert = PerfectExpert(chain3)
        verdict = expert.answer_tuple(ExpertQuery("tuple", ("A", "C", "B")))
        assert verdict.edges == {("A", "B"), ("B", "C")}


class TestPairSequence:
    def test_triplet_sequence_puts_focal_pair_last(self):
        assert pair_sequence(3) == [(0, 2), (1, 2), (0, 1)]

    def test_quadruplet_sequence(self):
        assert pair_sequence(4) == [(0, 3), (1, 3), (2, 3), (0, 2), (1, 2), (0, 1)]


def make_config(truth, epsilon, seed):
    return EpsilonExpertConfig(epsilon=epsilon, seed=seed, truth=truth)


class TestEpsilonPairwise:
    def test_vanishing_noise_is_always_correct(self, chain3):
        cfg = make_config(chain3, 1e-12, seed=0)
        for trial in range(200):
            verdict = epsilon_pairwise(cfg, "A", "B", aux=(), forbidden=())
            assert verdict.choice is Choice.FORWARD
            cfg = make_config(chain3, 1e-12, seed=trial)

    def test_unconstrained_error_rate_converges(self, chain3):
        eps = 0.3
        errors = 0
        trials = 100_000
        for t in range(trials):
            cfg = make_config(chain3, eps, seed=t)
            if epsilon_pairwise(cfg, "A", "B").choice is not Choice.FORWARD:
                errors += 1
        rate = errors / trials
        sigma = np.sqrt(eps * (1 - eps) / trials)
        assert abs(rate - eps) < 3 * sigma

    def test_forbidden_wrong_choice_renormalizes(self, chain3):
        # One wrong option removed: error probability becomes eps/(2 - eps),
        # which is 1/3 at eps = 0.5.
        eps = 0.5
        expected = eps / (2 - eps)
        errors = 0
        trials = 100_000
        for t in range(trials):
            cfg = make_config(chain3, eps, seed=t)
            verdict = epsilon_pairwise(cfg, "A", "B", forbidden=(Choice.BACKWARD,))
            assert verdict.choice is not Choice.BACKWARD
            if verdict.choice is not Choice.FORWARD:
                errors += 1
        rate = errors / trials
        sigma = np.sqrt(expected * (1 - expected) / trials)
        assert abs(rate - expected) < 3 * sigma

    def test_forbidding_the_correct_choice_forces_an_error(self, chain3):
        cfg = make_config(chain3, 0.2, seed=5)
        verdict = epsilon_pairwise(cfg, "A", "B", forbidden=(Choice.FORWARD,))
        assert verdict.choice is not Choice.FORWARD

    def test_deterministic_per_seed_and_query(self, chain3):
        cfg = make_config(chain3, 0.4, seed=9)
        first = epsilon_pairwise(cfg, "A", "B")
        second = epsilon_pairwise(cfg, "A", "B")
        assert first == second


class TestEpsilonTuple:
    def test_vanishing_noise_reproduces_truth(self):
        variables = VariableSet(("A", "B", "C"))
        truth = AdjacencyMatrix.from_edges(variables, [("A", "C"), ("C", "B")])
        cfg = make_config(truth, 1e-12, seed=1)
        verdict = epsilon_tuple(cfg, ("A", "B", "C"))
        assert verdict.edges == {("A", "C"), ("C", "B")}

    def test_always_acyclic(self, chain3):
        for t in range(500):
            cfg = make_config(chain3, 0.7, seed=t)
            verdict = epsilon_tuple(cfg, ("A", "B", "C"))
            assert isinstance(verdict, TupleVerdict)  # construction enforces acyclicity

    def test_constrained_third_pair_never_closes_cycle(self):
        variables = VariableSet(("A", "B", "C"))
        truth = AdjacencyMatrix.from_edges(variables, [("A", "C"), ("C", "B")])
        for t in range(2000):
            cfg = make_config(truth, 0.5, seed=t)
            verdict = epsilon_tuple(cfg, ("A", "B", "C"))
            if ("A", "C") in verdict.edges and ("C", "B") in verdict.edges:
                assert ("B", "A") not in verdict.edges


class TestScriptedExpert:
    def test_replays_recorded_answers(self, chain3):
        expert = PerfectExpert(chain3)
        query = ExpertQuery("tuple", ("A", "B", "C"))
        recorded = expert.answer_tuple(query)
        scripted = ScriptedExpert.from_records([(query, recorded)])
        assert scripted.answer_tuple(query) == recorded

    def test_unknown_query_raises(self):
        scripted = ScriptedExpert({})
        with pytest.raises(KeyError):
            scripted.answer_pair(ExpertQuery("pairwise", ("A", "B")))


class TestCallCounting:
    def test_counts_both_kinds(self, chain3):
        expert = PerfectExpert(chain3)
        expert.answer_pair(ExpertQuery("pairwise", ("A", "B")))
        expert.answer_tuple(ExpertQuery("tuple", ("A", "B", "C")))
        assert expert.calls == 2


class TestRepeatedTupleDeterminism:
    def test_same_seed_same_answers(self):
        rng = np.random.default_rng(0)
        truth = random_dag(rng, 5)
        names = truth.vars.names
        cfg = make_config(truth, 0.3, seed=42)
        q = ExpertQuery("tuple", (names[0], names[2], names[4]))
        from causalorder.experts import EpsilonExpert

        a = EpsilonExpert(cfg).answer_tuple(q)
        b = EpsilonExpert(cfg).answer_tuple(q)
        assert a == b
