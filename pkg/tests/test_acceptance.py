"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from gamefort.bireg import biregularize, biregularize_graphical, size_bounds
from gamefort.concat import (
    combinatorial_fortification_check,
    concatenate,
    concatenate_multiplayer,
    fortification_violation,
    induce_substrategy,
    multiplayer_violation,
    pointwise_bound_check,
)
from gamefort.expanders import (
    certify,
    check_correlated_averages,
    check_expander_averaging,
    complete_graph,
    matching,
    random_biregular_expander,
    shift_union_graph,
)
from gamefort.games import Game, Substrategy, classical_value, is_biregular, parity_game, substrategy_value
from gamefort.harness import repetition_bound_check, step_bound_check
from gamefort.ordered import build_injection_family, ordered_fortify, sampling_distribution, verify_tilde_spectral_claim

from acceptance_log import record
from oracles import (
    brute_sub_value,
    brute_value,
    random_biregular_game,
    random_fractional,
    random_game,
    random_mu,
    random_predicate,
)

SLACK = 1e-9


def _random_graph(n: int, d: int, seed: int):
    return random_biregular_expander(n, min(d, n), 2.0, seed=seed)


def test_criterion_01_value_preservation():
    start = time.perf_counter()
    bad = 0
    for i in range(100):
        rng = random.Random(1000 + i)
        g = random_game(rng, max_q=4, max_a=2)
        M = _random_graph(g.x_size, rng.choice([1, 2]), seed=i)
        P = _random_graph(g.y_size, rng.choice([1, 2]), seed=10_000 + i)
        outer = concatenate(M, g, P).outer
        v = classical_value(g)
        if not (classical_value(outer) == v == brute_value(g)):
            bad += 1
    t = time.perf_counter() - start
    assert record(1, "value preservation", bad == 0, f"{100 - bad}/100 exact equalities", t, 120)


def test_criterion_02_induced_value_identity():
    start = time.perf_counter()
    bad = checked = 0
    for i in range(50):
        rng = random.Random(2000 + i)
        g = random_game(rng, max_q=3, max_a=2)
        M = _random_graph(g.x_size, rng.choice([1, 2]), seed=i)
        P = _random_graph(g.y_size, rng.choice([1, 2]), seed=500 + i)
        cg = concatenate(M, g, P)
        outer = cg.outer
        for _ in range(10):
            f_rows = random_fractional(rng, outer.x_size, outer.a_size)
            h_rows = random_fractional(rng, outer.y_size, outer.b_size)
            f = Substrategy(np.array(f_rows, dtype=object))
            h = Substrategy(np.array(h_rows, dtype=object))
            lhs = brute_sub_value(outer, f_rows, h_rows)
            fi, hi = induce_substrategy(cg, f, "x"), induce_substrategy(cg, h, "y")
            rhs = brute_sub_value(g, fi.f.tolist(), hi.f.tolist())
            checked += 1
            if not (lhs == rhs == substrategy_value(outer, f, h)):
                bad += 1
    t = time.perf_counter() - start
    assert record(2, "induced-value identity", bad == 0 and checked == 500, f"{checked - bad}/{checked} exact", t, 60)


def test_criterion_03_pointwise_bound():
    start = time.perf_counter()
    worst = math.inf
    pairs = 0
    fails = 0
    for i in range(20):
        rng = random.Random(3000 + i)
        n = [2, 3, 4][i % 3]
        g = random_biregular_game(rng, n)
        assert is_biregular(g)
        M = certify(shift_union_graph(n, [0, rng.randrange(1, n)]))
        P = certify(shift_union_graph(n, [0, rng.randrange(1, n)]))
        rep = pointwise_bound_check(concatenate(M, g, P), slack=SLACK)
        worst = min(worst, rep.extras["worst_margin"])
        pairs += rep.extras["pairs"]
        fails += not rep.passed
    t = time.perf_counter() - start
    detail = f"20 games, {pairs} vertex pairs, min margin {worst:.3g}"
    assert record(3, "pointwise fortification bound", fails == 0, detail, t, 300)


def test_criterion_04_complete_graph_fortified():
    start = time.perf_counter()
    worst = None
    for i in range(20):
        rng = random.Random(4000 + i)
        g = random_game(rng, max_q=3, max_a=2)
        cg = concatenate(certify(complete_graph(g.x_size)), g, certify(complete_graph(g.y_size)))
        v = fortification_violation(cg, 0, 0).max_violation
        worst = v if worst is None else max(worst, v)
    t = time.perf_counter() - start
    assert record(4, "complete graph is (0,0)-fortified", worst <= 0, f"max violation {worst} over 20 games", t, 120)


def test_criterion_05_analytic_implies_combinatorial():
    start = time.perf_counter()
    premises = consistent = 0
    grid = [Fraction(1, 8), Fraction(1, 4), Fraction(1, 2)]
    for i in range(20):
        rng = random.Random(5000 + i)
        g = random_game(rng, max_q=3, max_a=2)
        kind = i % 3
        pick = {0: complete_graph, 1: matching}.get(kind)
        if pick is None:
            mk = lambda n: certify(shift_union_graph(n, [0, 1])) if n > 1 else certify(matching(1))
        else:
            mk = lambda n: certify(pick(n))
        cg = concatenate(mk(g.x_size), g, mk(g.y_size))
        eps, dl = rng.choice(grid), rng.choice(grid)
        rep = combinatorial_fortification_check(cg, 2 * eps, dl)
        premises += rep.extras["analytic_premise"]
        consistent += rep.extras["implication_consistent"]
    t = time.perf_counter() - start
    detail = f"{consistent}/20 consistent, analytic premise certified in {premises}"
    assert record(5, "analytic implies combinatorial", consistent == 20 and premises > 0, detail, t, 300)


def test_criterion_06_parallel_repetition():
    start = time.perf_counter()
    rep_ok = step_ok = 0
    n_games = 10
    for i in range(n_games):
        rng = random.Random(6000 + i)
        g = random_game(rng, max_q=2, max_a=2)
        cg = concatenate(certify(complete_graph(g.x_size)), g, certify(complete_graph(g.y_size)))
        rep = repetition_bound_check(cg, 2, 0, 0)
        rep_ok += rep.hypothesis_certified and rep.holds
        step = step_bound_check([cg, cg], 0, 0)
        step_ok += step.hypothesis_certified and step.holds
    # mixed product: a 2x2 game then a 3-question game
    rng = random.Random(6999)
    g1 = random_game(rng, max_q=2, max_a=2)
    g2 = Game.from_arrays(random_mu(rng, 3, 1), random_predicate(rng, 2, 2, 3, 1))
    mk = lambda g: concatenate(certify(complete_graph(g.x_size)), g, certify(complete_graph(g.y_size)))
    mixed = step_bound_check([mk(g1), mk(g2)], 0, 0)
    t = time.perf_counter() - start
    ok = rep_ok == n_games and step_ok == n_games and mixed.holds and mixed.hypothesis_certified
    detail = f"repetition {rep_ok}/{n_games}, two-step {step_ok}/{n_games}, mixed step {mixed.holds}"
    assert record(6, "parallel repetition bounds", ok, detail, t, 300)


def _graphical_instance(rng):
    nx, ny = rng.randint(1, 3), rng.randint(1, 3)
    while True:
        edges = {(x, y) for x in range(nx) for y in range(ny) if rng.random() < 0.6}
        if {x for x, _ in edges} == set(range(nx)) and {y for _, y in edges} == set(range(ny)):
            break
    mu = np.full((nx, ny), Fraction(0), dtype=object)
    for e in edges:
        mu[e] = Fraction(1, len(edges))
    return Game.from_arrays(mu, random_predicate(rng, 2, 2, nx, ny)), len(edges)


def test_criterion_07_biregularization():
    start = time.perf_counter()
    bad = []
    for i in range(25):
        rng = random.Random(7000 + i)
        g, E = _graphical_instance(rng)
        res = biregularize_graphical(g)
        h = res.game
        ok = (
            classical_value(h) == brute_value(g)
            and h.x_marginal() == [Fraction(1, E)] * E
            and h.y_marginal() == [Fraction(1, E)] * E
            and h.x_size == E <= g.x_size * g.y_size
            and h.x_size <= E * g.x_size
        )
        if not ok:
            bad.append(("graphical", i))
    for i in range(25):
        rng = random.Random(7500 + i)
        g = random_game(rng, max_q=2, max_a=2, density=0.7)
        tau = rng.choice([Fraction(1, 2), Fraction(2, 3)])
        res, quant = biregularize(g, tau)
        v, vi = brute_value(g), classical_value(res.game)
        bx, by = size_bounds(g, tau)
        ok = (
            is_biregular(res.game)
            and v <= vi <= v + tau
            and res.game.x_size <= bx
            and res.game.y_size <= by
        )
        if not ok:
            bad.append(("general", i))
    t = time.perf_counter() - start
    assert record(7, "biregularization", not bad, f"{50 - len(bad)}/50 instances", t, 180)


def test_criterion_08_tilde_spectral_claim():
    start = time.perf_counter()
    results = []
    tight = verify_tilde_spectral_claim(certify(complete_graph(2)), 2)
    results.append(tight.passed)
    tight_ok = abs(tight.lam_tilde - 1) <= SLACK
    rng = random.Random(8000)
    primes = {2, 3, 5, 7}
    i = 0
    while len(results) < 120:
        i += 1
        d = rng.choice([2, 3, 4])
        n = rng.randint(max(d, 2), 12)
        l = rng.randint(d, 7)
        kind = rng.choice(["full", "pairwise"]) if l in primes else "full"
        if n == d:
            m = certify(complete_graph(n))
        elif rng.random() < 0.3:
            m = certify(shift_union_graph(n, [0] + rng.sample(range(1, n), d - 1)))
        else:
            m = random_biregular_expander(n, d, 2.0, seed=i, simple=True)
        claim = verify_tilde_spectral_claim(m, l, kind)
        results.append(claim.lam_tilde <= claim.bound + SLACK)
    t = time.perf_counter() - start
    detail = f"{sum(results)}/{len(results)} instances, K22 l=2 lambda_tilde={tight.lam_tilde:.12f}"
    assert record(8, "tilde-lift spectral bound", all(results) and tight_ok, detail, t, 180)


def _ordered_instances():
    rng = random.Random(9000)
    out = []
    for n in (2, 3):
        su = certify(shift_union_graph(n, [0, 1]))
        mt = certify(matching(n))
        for M, P, l, kind in [
            (su, su, 2, "full"),
            (su, su, 2, "pairwise"),
            (su, mt, 3, "full"),
            (su, mt, 3, "pairwise"),
            (mt, su, 2, "full"),
            (mt, mt, 3, "full"),
        ]:
            g = Game.from_arrays(random_mu(rng, n, n), random_predicate(rng, 2, 2, n, n))
            out.append((g, M, P, l, kind))
    return out


def test_criterion_09_ordered_structure():
    start = time.perf_counter()
    law_ok = val_ok = 0
    instances = _ordered_instances()
    for g, M, P, l, kind in instances:
        cg = ordered_fortify(g, M, P, l=l, kind=kind)
        outer = cg.outer
        law = sampling_distribution(
            g, M.graph, P.graph,
            build_injection_family(M.degree, l, kind), build_injection_family(P.degree, l, kind),
        )
        support = {(x, y) for x in range(outer.x_size) for y in range(outer.y_size) if outer.mu[x, y] != 0}
        law_ok += support == set(law) and all(outer.mu[k] == v for k, v in law.items())
        val_ok += classical_value(outer) == brute_value(g)
    t = time.perf_counter() - start
    n = len(instances)
    detail = f"law {law_ok}/{n}, value {val_ok}/{n}"
    assert record(9, "ordered fortification structure", law_ok == n and val_ok == n, detail, t, None)


def _uniform_marginal_mu(rng, nx, ny, terms=3):
    L = math.lcm(nx, ny)
    mu = np.full((nx, ny), Fraction(0), dtype=object)
    weights = [rng.randint(1, 4) for _ in range(terms)]
    for w in weights:
        perm = list(range(L))
        rng.shuffle(perm)
        for i in range(L):
            mu[i // (L // nx), perm[i] // (L // ny)] += Fraction(w, sum(weights) * L)
    return mu


def test_criterion_10_expander_inequalities():
    start = time.perf_counter()
    nprng = np.random.default_rng(10)
    ok1 = ok2 = 0
    for i in range(1000):
        rng = random.Random(10_000 + i)
        n = rng.randint(2, 10)
        e = _random_graph(n, rng.randint(1, n), seed=i)
        lhs, rhs = check_expander_averaging(e, nprng.normal(size=n))
        ok1 += lhs <= rhs + SLACK
    for i in range(1000):
        rng = random.Random(20_000 + i)
        nx, ny = rng.randint(2, 8), rng.randint(2, 8)
        eM = _random_graph(nx, rng.randint(1, nx), seed=i)
        eP = _random_graph(ny, rng.randint(1, ny), seed=50_000 + i)
        mu = _uniform_marginal_mu(rng, nx, ny)
        (l1, r1), (l2, r2) = check_correlated_averages(eM, eP, mu, nprng.normal(size=nx), nprng.normal(size=ny))
        ok2 += (l1 <= r1 + SLACK) and (l2 <= r2 + SLACK)
    t = time.perf_counter() - start
    detail = f"averaging {ok1}/1000, correlated {ok2}/1000"
    assert record(10, "expander inequalities", ok1 == 1000 and ok2 == 1000, detail, t, None)


def test_criterion_11_multiplayer_proof_inequality():
    start = time.perf_counter()
    cases = []
    g1, g2 = parity_game(3), parity_game(3, copies=2)
    su2 = certify(shift_union_graph(2, [0, 1]))
    m2 = certify(matching(2))
    su4a = certify(shift_union_graph(4, [0, 1]))
    su4b = certify(shift_union_graph(4, [0, 3]))
    su4c = certify(shift_union_graph(4, [0, 1, 2]))
    for g, graphs in [
        (g1, [su2, su2, su2]),
        (g1, [su2, m2, su2]),
        (g1, [m2, m2, m2]),
        (g2, [su4a, su4a, su4a]),
        (g2, [su4a, su4b, su4a]),
        (g2, [su4c, su4a, su4b]),
    ]:
        rep = multiplayer_violation(concatenate_multiplayer(graphs, g), 0)
        cases.append((rep.extras["proof_excess"], rep.extras["proof_bound_2_lambda_k"]))
    ok = all(float(ex) <= b + SLACK for ex, b in cases)
    tightest = min(b - float(ex) for ex, b in cases)
    t = time.perf_counter() - start
    detail = f"{sum(float(ex) <= b + SLACK for ex, b in cases)}/{len(cases)} graph triples, min slack {tightest:.3g}"
    assert record(11, "multiplayer proof inequality", ok, detail, t, 300)
