import random
from fractions import Fraction

import numpy as np
import pytest

from gamefort import io
from gamefort.concat import concatenate
from gamefort.expanders import certify, complete_graph, matching
from gamefort.games import Game, chsh, classical_value, trivial_game
from gamefort.harness import (
    StageError,
    classical_lambda_target,
    gap_amplification_plan,
    minimal_rounds,
    quantum_lambda_target,
    repetition_bound_check,
    run_pipeline,
    step_bound_check,
)

from oracles import random_predicate


def _complete(g):
    return concatenate(certify(complete_graph(g.x_size)), g, certify(complete_graph(g.y_size)))


def test_repetition_m1_trivial():
    rep = repetition_bound_check(_complete(chsh()), 1, 0, 0)
    assert rep.eta == 0
    assert rep.exact == Fraction(3, 4) and rep.holds


def test_repetition_complete_chsh():
    rep = repetition_bound_check(_complete(chsh()), 2, 0, 0)
    assert rep.hypothesis_certified
    # answers on the complete graph carry no question information, so the
    # best strategy is a product of two CHSH strategies
    assert rep.exact == Fraction(9, 16)
    assert rep.bound == Fraction(9, 16)
    assert rep.margin == 0 and rep.passed


def test_repetition_matching_flags_uncertified():
    cg = concatenate(certify(matching(2)), chsh(), certify(matching(2)))
    rep = repetition_bound_check(cg, 2, 0, Fraction(1, 16))
    assert not rep.hypothesis_certified
    assert rep.exact == Fraction(5, 8)
    assert rep.bound == Fraction(9, 16) + Fraction(1, 4)
    assert "warning" in rep.render()


def test_step_t1_degenerate():
    rep = step_bound_check([_complete(chsh())], 0, 0)
    assert rep.holds


def test_step_t2_complete_chsh():
    rep = step_bound_check([_complete(chsh())] * 2, 0, 0)
    assert rep.lhs == Fraction(9, 16)
    assert rep.rhs == Fraction(3, 4) * Fraction(3, 4)
    assert rep.holds and rep.hypothesis_certified


def test_step_t2_mixed():
    rng = random.Random(7)
    mu = np.full((3, 1), Fraction(1, 3), dtype=object)
    other = Game.from_arrays(mu, random_predicate(rng, 2, 2, 3, 1))
    rep = step_bound_check([_complete(chsh()), _complete(other)], 0, 0)
    assert rep.hypothesis_certified
    assert rep.holds
    assert rep.lhs == Fraction(3, 4) * classical_value(other)


def test_plan_tau_half_beta_quarter():
    plan = gap_amplification_plan(4, Fraction(1, 2), Fraction(1, 4))
    assert plan.m == 8
    assert plan.epsilon == Fraction(1, 4)
    assert plan.soundness_term <= Fraction(1, 8)
    assert plan.error_term <= Fraction(1, 8)
    # minimality
    assert (Fraction(3, 4)) ** 7 > Fraction(1, 8)


def test_plan_never_single_round():
    # tau < 1 forces 1 - tau/2 > 1/2 > beta/2, so one round never suffices
    assert minimal_rounds(Fraction(99, 100), Fraction(99, 100)) == 2
    plan = gap_amplification_plan(4, Fraction(99, 100), Fraction(99, 100))
    assert plan.m == 2 and plan.error_term <= plan.beta / 2


@pytest.mark.parametrize("tau,beta", [(Fraction(1, 3), Fraction(1, 10)), (Fraction(9, 10), Fraction(1, 2)), (Fraction(1, 20), Fraction(1, 3))])
def test_plan_invariants(tau, beta):
    plan = gap_amplification_plan(6, tau, beta)
    assert plan.soundness_term <= beta / 2
    assert plan.error_term <= beta / 2
    assert (1 - tau / 2) ** (plan.m - 1) > beta / 2


def test_plan_ranges():
    with pytest.raises(ValueError):
        gap_amplification_plan(4, 0, Fraction(1, 2))


def test_lambda_targets():
    assert classical_lambda_target(Fraction(1, 2), Fraction(1, 2)) == pytest.approx(0.125)
    assert quantum_lambda_target(Fraction(1, 2), Fraction(1, 2)) == pytest.approx(1 / 448)


def test_pipeline_trivial(tmp_path):
    res = run_pipeline(trivial_game(2, 2, 2, 2), tmp_path, Fraction(1, 4), Fraction(1, 2), Fraction(1, 2))
    assert res.passed
    outer = io.load_game(tmp_path / "04_outer.json")
    assert classical_value(outer) == 1


def test_pipeline_chsh(tmp_path):
    res = run_pipeline(chsh(), tmp_path, Fraction(1, 4), Fraction(1, 2), Fraction(1, 2))
    assert res.passed
    assert res.certification.passed
    assert res.repetition.holds and res.repetition.hypothesis_certified
    for name in ("00_input.json", "01_biregular.json", "02_left_graph.json", "03_right_graph.json",
                 "04_outer.json", "05_fortification.txt", "06_repetition.txt", "manifest.txt"):
        assert (tmp_path / name).exists()


def test_pipeline_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_pipeline(chsh(), a, Fraction(1, 4), Fraction(1, 2), Fraction(1, 2), seed=3)
    run_pipeline(chsh(), b, Fraction(1, 4), Fraction(1, 2), Fraction(1, 2), seed=3)
    for f in sorted(p.name for p in a.iterdir()):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_pipeline_quantum_target_complete_only(tmp_path):
    run_pipeline(chsh(), tmp_path, Fraction(1, 4), Fraction(1, 2), Fraction(1, 2), quantum_target=True)
    manifest = (tmp_path / "manifest.txt").read_text()
    assert "lambda_target: 0.002232142857142857" in manifest
    assert "complete_graph_only: True" in manifest


def test_pipeline_general_game(tmp_path):
    mu = np.array([[Fraction(1, 3), Fraction(0)], [Fraction(1, 6), Fraction(1, 2)]], dtype=object)
    g = Game.from_arrays(mu, random_predicate(random.Random(1), 2, 1, 2, 2))
    res = run_pipeline(g, tmp_path, Fraction(1, 2), Fraction(1, 2), Fraction(1, 2), repeat_m=0)
    inner = io.load_game(tmp_path / "01_biregular.json")
    assert inner.x_marginal() == [Fraction(1, inner.x_size)] * inner.x_size
    assert res.certification is not None


def test_pipeline_ordered(tmp_path):
    res = run_pipeline(chsh(), tmp_path, Fraction(1, 4), Fraction(1, 2), Fraction(1, 2), ordered=True, repeat_m=0)
    assert res.passed
    assert classical_value(io.load_game(tmp_path / "04_outer.json")) == Fraction(3, 4)


def test_pipeline_stage_error(tmp_path):
    with pytest.raises(StageError, match="stage biregularize"):
        mu = np.array([[Fraction(1, 3), Fraction(2, 3)]], dtype=object)
        g = Game.from_arrays(mu, np.ones((1, 1, 1, 2), dtype=bool))
        run_pipeline(g, tmp_path, Fraction(1, 4), Fraction(1, 2), Fraction(1, 2), cap=4)
