"""Concatenated games and the fortification checks run on them.

The outer game ``M o G o P`` asks ``x' ~ N(x)`` and ``y' ~ N(y)`` for a hidden
inner pair ``(x, y) ~ mu``; an outer answer labels every distinct neighbour of
the question, and the referee checks the inner predicate on the labels of the
hidden pair.  Because the hidden pair is not a function of ``(x', y')`` the
outer predicate is in general a win probability, stored exactly.

Composite answers for ``x'`` are tuples over ``N(x')`` (distinct neighbours,
sorted) in ``itertools.product`` order.  When neighbourhoods have different
sizes the alphabet is padded to the widest one and the extra coordinates are
ignored.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Sequence

import numpy as np

from gamefort._enum import (
    DEFAULT_CAP,
    assignments,
    check_cap,
    choice_count,
    int_array,
    maximize,
)
from gamefort.expanders import SPECTRAL_SLACK, BipartiteExpander, GraphError
from gamefort.games import (
    Game,
    KPlayerGame,
    Substrategy,
    _require_valid,
    classical_value,
    is_biregular,
    kplayer_substrategy_value,
    kplayer_value,
    subgame,
    substrategy_value,
)


def _digits(width: int, n_answers: int) -> np.ndarray:
    """Row ``i`` is the ``i``-th composite answer as a tuple of inner answers."""
    return assignments(n_answers, width, 0, n_answers**width) if width else np.zeros((1, 0), int)


def _side_tables(graph, n_answers: int):
    """Per outer question: ``{x: inner answer for every composite answer}``."""
    nbrs = graph.left_neighbors
    width = max(len(n) for n in nbrs)
    digits = _digits(width, n_answers)
    tables = [{x: digits[:, j] for j, x in enumerate(n)} for n in nbrs]
    return width, n_answers**width, tables


def _outer_tensor(mu: np.ndarray, predicate: np.ndarray, graphs, answer_sizes):
    """Exact outer question law and outer win weights for any number of players."""
    k = len(graphs)
    sides = [_side_tables(g.graph, a) for g, a in zip(graphs, answer_sizes)]
    outer_answers = tuple(s[1] for s in sides)
    outer_questions = tuple(g.graph.left_size for g in graphs)
    trans = [[g.graph.transition(x) for x in range(g.graph.right_size)] for g in graphs]
    mu_out = np.full(outer_questions, Fraction(0), dtype=object)
    W = np.full(outer_answers + outer_questions, Fraction(0), dtype=object)
    boolean = predicate.dtype == bool
    for xs in itertools.product(*(range(s) for s in mu.shape)):
        mass = mu[xs]
        if mass == 0:
            continue
        V = predicate[(Ellipsis,) + xs]
        for hops in itertools.product(*(trans[i][xs[i]].items() for i in range(k))):
            xps = tuple(h[0] for h in hops)
            coef = mass * math.prod((h[1] for h in hops), start=Fraction(1))
            mu_out[xps] += coef
            block = V[np.ix_(*(sides[i][2][xps[i]][xs[i]] for i in range(k)))]
            if boolean:
                W[(Ellipsis,) + xps] += np.where(block, coef, Fraction(0))
            else:
                W[(Ellipsis,) + xps] += block * coef
    lead = (None,) * k
    safe = np.where(mu_out == 0, Fraction(1), mu_out)
    pred = np.where(mu_out[lead] == 0, Fraction(0), W / safe[lead])
    return mu_out, pred


@dataclass(frozen=True, eq=False)
class ConcatenatedGame:
    """``M o G o P``: ``left`` is over ``X' x X``, ``right`` over ``Y' x Y``."""

    inner: Game
    left: BipartiteExpander
    right: BipartiteExpander

    @cached_property
    def _left_side(self):
        return _side_tables(self.left.graph, self.inner.a_size)

    @cached_property
    def _right_side(self):
        return _side_tables(self.right.graph, self.inner.b_size)

    @property
    def outer_a_size(self) -> int:
        return self._left_side[1]

    @property
    def outer_b_size(self) -> int:
        return self._right_side[1]

    @property
    def lam(self) -> float:
        return max(self.left.lam, self.right.lam)

    def composite_answer(self, side: str, question: int, index: int) -> dict[int, int]:
        """Decode composite answer ``index`` at outer ``question`` as ``{x: a}``."""
        width, _, tables = self._left_side if side == "x" else self._right_side
        return {x: int(col[index]) for x, col in tables[question].items()}

    @cached_property
    def outer(self) -> Game:
        mu, pred = _outer_tensor(
            self.inner.mu,
            self.inner.predicate,
            (self.left, self.right),
            (self.inner.a_size, self.inner.b_size),
        )
        return Game.from_arrays(mu, pred)


def concatenate(
    M: BipartiteExpander, g: Game, P: BipartiteExpander, cap: int | None = DEFAULT_CAP
) -> ConcatenatedGame:
    _require_valid(g)
    if M.graph.right_size != g.x_size or P.graph.right_size != g.y_size:
        raise GraphError(
            f"graph right sides ({M.graph.right_size}, {P.graph.right_size}) do not match "
            f"question sets ({g.x_size}, {g.y_size})"
        )
    for e in (M, P):
        if any(e.graph.right_degree(x) == 0 for x in range(e.graph.right_size)):
            raise GraphError("every inner question needs at least one neighbour")
    cg = ConcatenatedGame(g, M, P)
    size = cg.outer_a_size * cg.outer_b_size * M.graph.left_size * P.graph.left_size
    check_cap(size, cap, "outer predicate entries")
    return cg


def induce_substrategy(cg: ConcatenatedGame, f: Substrategy, side: str = "x") -> Substrategy:
    """Project an outer substrategy to the inner game.

    ``f(x, a) = E_{x' ~ N(x)} sum_{a'(x) = a} f(x', a')``.
    """
    graph = cg.left.graph if side == "x" else cg.right.graph
    _, n_comp, tables = cg._left_side if side == "x" else cg._right_side
    n_ans = cg.inner.a_size if side == "x" else cg.inner.b_size
    if f.f.shape != (graph.left_size, n_comp):
        raise ValueError(f"outer substrategy must have shape {(graph.left_size, n_comp)}")
    out = np.full((graph.right_size, n_ans), Fraction(0), dtype=object)
    for x in range(graph.right_size):
        for xp, p in graph.transition(x).items():
            col = tables[xp][x]
            for a_out in range(n_comp):
                out[x, col[a_out]] += p * f.f[xp, a_out]
    return Substrategy(out)


# ---------------------------------------------------------------------------
# reports


@dataclass
class FortificationReport:
    """Outcome of one fortification check.

    ``max_violation`` is mode specific: for ``weak-analytic`` it is
    ``sup val(f,g) - (val(G)+eps) * gamma`` (fortified iff ``<= delta``); for
    ``combinatorial`` it is ``max val(G_ST) - val(G) - eps`` over rectangles of
    mass at least ``delta`` (fortified iff ``<= 0``); for ``pointwise`` it is
    the largest excess of a vertex pair over the pointwise bound (a float).
    """

    mode: str
    epsilon: Fraction
    delta: Fraction | None
    max_violation: Fraction | float | None
    witness: Any = None
    verdict: str | None = None
    lower_bound_only: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict in ("fortified", "pass")

    def lines(self) -> list[str]:
        out = [
            f"mode: {self.mode}",
            f"epsilon: {self.epsilon}",
            f"delta: {self.delta}",
            f"max_violation: {self.max_violation}",
        ]
        if self.lower_bound_only:
            out.append("max_violation_is_lower_bound: true")
        out.append(f"verdict: {self.verdict}")
        if self.witness is not None:
            out.append(f"witness: {_fmt_witness(self.witness)}")
        for key, value in self.extras.items():
            out.append(f"{key}: {value}")
        return out

    def render(self) -> str:
        return "\n".join(self.lines())


def _fmt_witness(w) -> str:
    if isinstance(w, tuple):
        return "; ".join(
            ",".join("-" if c is None else str(c) for c in part) if isinstance(part, tuple) else str(part)
            for part in w
        )
    return str(w)


def _violation_kernel(game, c: Fraction) -> np.ndarray:
    W, M, _ = game.weights
    k = M.ndim
    K = np.asarray(W, dtype=object) * c.denominator - c.numerator * np.asarray(M, dtype=object)[(None,) * k]
    return int_array(K)


def violation_of(
    cg: ConcatenatedGame, f: Substrategy, g: Substrategy, epsilon: Fraction
) -> Fraction:
    """``val(G', f, g) - (val(G) + eps) * E_{mu'} f(x') g(y')`` for one pair."""
    outer = cg.outer
    c = classical_value(cg.inner) + Fraction(epsilon)
    gamma = sum(
        (outer.mu[x, y] * f.marginal(x) * g.marginal(y) for x in range(outer.x_size) for y in range(outer.y_size)),
        Fraction(0),
    )
    return substrategy_value(outer, f, g) - c * gamma


def fortification_violation(
    cg: ConcatenatedGame,
    epsilon,
    delta=None,
    mode: str = "exact",
    cap: int | None = DEFAULT_CAP,
    seed: int = 0,
    restarts: int = 8,
) -> FortificationReport:
    """Largest excess of a substrategy pair over ``(val(G)+eps) * gamma``.

    ``exact`` maximises over all vertex pairs (per question: abstain or one
    answer); the objective is bilinear so this is the supremum over all
    substrategies.  ``ascent`` alternates exact best responses from seeded
    random vertices and returns a lower bound.
    """
    eps = Fraction(epsilon)
    outer = cg.outer
    c = classical_value(cg.inner, cap=cap) + eps
    K = _violation_kernel(outer, c)
    _, _, D = outer.weights
    scale = D * c.denominator
    if mode == "exact":
        best = maximize(K, (True, True), cap=cap)
        value, choices, lower = best.value, best.choices, False
    elif mode == "ascent":
        value, choices = _ascent(K, seed, restarts)
        lower = True
    else:
        raise ValueError(f"unknown mode {mode!r}")
    max_violation = Fraction(value, scale)
    report = FortificationReport(
        mode="weak-analytic",
        epsilon=eps,
        delta=None if delta is None else Fraction(delta),
        max_violation=max_violation,
        witness=tuple(choices),
        lower_bound_only=lower,
        extras={"search": mode, "inner_value": c - eps},
    )
    if delta is not None:
        report.verdict = "fortified" if max_violation <= Fraction(delta) else "violated"
    return report


def _best_response(K: np.ndarray, fixed: Sequence[int | None], side: int):
    """Exact best vertex reply of player ``side`` to the other player's vertex."""
    if side == 1:
        n_a = K.shape[0]
        C = sum(K[a, :, x, :] for x, a in enumerate(fixed) if a is not None)
    else:
        n_a = K.shape[1]
        C = sum(K[:, b, :, y] for y, b in enumerate(fixed) if b is not None)
    if isinstance(C, int):
        n = K.shape[3] if side == 1 else K.shape[2]
        return (None,) * n
    reply = []
    for q in range(C.shape[1]):
        col = C[:, q]
        i = int(np.argmax(col))
        reply.append(i if col[i] > 0 else None)
    return tuple(reply)


def _pair_objective(K: np.ndarray, f, g) -> int:
    return int(
        sum(K[a, b, x, y] for x, a in enumerate(f) if a is not None for y, b in enumerate(g) if b is not None)
    )


def _ascent(K: np.ndarray, seed: int, restarts: int):
    rng = np.random.default_rng(seed)
    n_a, n_b, n_x, n_y = K.shape
    best = (0, ((None,) * n_x, (None,) * n_y))
    for _ in range(restarts):
        f = tuple(None if v == n_a else int(v) for v in rng.integers(0, n_a + 1, size=n_x))
        current = None
        while True:
            g = _best_response(K, f, 1)
            f = _best_response(K, g, 0)
            val = _pair_objective(K, f, g)
            if current is not None and val <= current:
                break
            current = val
        if current > best[0]:
            best = (current, (f, g))
    return best


def pointwise_bound_check(
    cg: ConcatenatedGame,
    epsilon=None,
    delta=None,
    cap: int | None = DEFAULT_CAP,
    slack: float = SPECTRAL_SLACK,
) -> FortificationReport:
    """Check ``val(G',f,g) <= val(G) gamma + 2 sqrt(2) lam sqrt(gamma) + 4 lam^2``
    on every vertex pair, with ``lam`` the larger certified graph value.

    When ``epsilon`` and ``delta`` are given and ``lam <= (eps/2) sqrt(delta/2)``,
    also confirms that every pair satisfies the weak fortification inequality.
    """
    inner = cg.inner
    if not is_biregular(inner):
        raise ValueError("pointwise bound needs a biregular inner game")
    for e in (cg.left, cg.right):
        if not e.graph.is_biregular():
            raise ValueError("pointwise bound needs biregular graphs")
    outer = cg.outer
    W, M, D = outer.weights
    n_a, n_b, n_x, n_y = W.shape
    n_fx, n_gy = choice_count(n_a, n_x, True), choice_count(n_b, n_y, True)
    check_cap(n_fx * n_gy, cap, "vertex pairs")
    val_g = classical_value(inner, cap=cap)
    lam = cg.lam

    # tables over (choice, b, x, y), last answer slice = abstain
    Wv = np.concatenate([W, np.zeros((1, n_b, n_x, n_y), dtype=W.dtype)], axis=0)
    Wv = np.concatenate([Wv, np.zeros((n_a + 1, 1, n_x, n_y), dtype=W.dtype)], axis=1)
    Mg = np.zeros_like(Wv)
    Mg[:n_a, :n_b] = np.asarray(M)[None, None]
    Q = assignments(n_b + 1, n_y, 0, n_gy)
    check_fort = epsilon is not None and delta is not None
    if check_fort:
        c = val_g + Fraction(epsilon)
        fort_hypothesis = lam <= float(epsilon) / 2 * math.sqrt(float(delta) / 2)
    worst = (math.inf, None)
    worst_fort = None
    block = max(1, (1 << 22) // max(n_gy, 1))
    for start in range(0, n_fx, block):
        stop = min(n_fx, start + block)
        P = assignments(n_a + 1, n_x, start, stop)
        Sv = sum(Wv[P[:, x], :, x, :] for x in range(n_x))  # (F, b, y)
        Sg = sum(Mg[P[:, x], :, x, :] for x in range(n_x))
        vals = sum(Sv[:, Q[:, y], y] for y in range(n_y))  # (F, G)
        gams = sum(Sg[:, Q[:, y], y] for y in range(n_y))
        v = vals.astype(float) / D
        gm = gams.astype(float) / D
        bound = float(val_g) * gm + 2 * math.sqrt(2) * lam * np.sqrt(gm) + 4 * lam**2
        margin = bound - v
        i = np.unravel_index(int(np.argmin(margin)), margin.shape)
        if margin[i] < worst[0]:
            worst = (float(margin[i]), (P[i[0]], Q[i[1]]))
        if check_fort:
            ex = vals * c.denominator - c.numerator * gams
            j = np.unravel_index(int(np.argmax(ex)), ex.shape)
            cand = Fraction(int(ex[j]), D * c.denominator)
            if worst_fort is None or cand > worst_fort:
                worst_fort = cand
    p_row, q_row = worst[1]
    witness = (
        tuple(None if a == n_a else int(a) for a in p_row),
        tuple(None if b == n_b else int(b) for b in q_row),
    )
    report = FortificationReport(
        mode="pointwise",
        epsilon=Fraction(0) if epsilon is None else Fraction(epsilon),
        delta=None if delta is None else Fraction(delta),
        max_violation=-worst[0],
        witness=witness,
        verdict="pass" if worst[0] >= -slack else "fail",
        extras={"lambda": lam, "inner_value": val_g, "worst_margin": worst[0], "pairs": n_fx * n_gy},
    )
    if check_fort:
        report.extras["weak_fortification_hypothesis"] = fort_hypothesis
        report.extras["weak_fortification_max_violation"] = worst_fort
        if fort_hypothesis and worst_fort > Fraction(delta):
            report.verdict = "fail"
            report.extras["implication"] = "broken"
        elif fort_hypothesis:
            report.extras["implication"] = "holds"
    return report


def combinatorial_fortification_check(
    cg: ConcatenatedGame,
    epsilon,
    delta,
    cap: int | None = DEFAULT_CAP,
) -> FortificationReport:
    """Every rectangle subgame with mass ``>= delta`` has value ``<= val(G') + eps``.

    Also cross-checks the analytic-to-combinatorial implication: if the weak
    violation at ``eps/2`` is at most ``(eps/2) * delta`` this check must pass.
    """
    eps, dl = Fraction(epsilon), Fraction(delta)
    outer = cg.outer
    n_x, n_y = outer.x_size, outer.y_size
    check_cap(2**n_x * 2**n_y, cap, "rectangles")
    val_outer = classical_value(outer, cap=cap)
    worst, witness, checked = None, None, 0
    subsets_x = [s for r in range(1, n_x + 1) for s in itertools.combinations(range(n_x), r)]
    subsets_y = [t for r in range(1, n_y + 1) for t in itertools.combinations(range(n_y), r)]
    for S in subsets_x:
        for T in subsets_y:
            mass = sum((outer.mu[x, y] for x in S for y in T), Fraction(0))
            if mass < dl:
                continue
            checked += 1
            excess = classical_value(subgame(outer, S, T), cap=cap) - val_outer - eps
            if worst is None or excess > worst:
                worst, witness = excess, (S, T)
    report = FortificationReport(
        mode="combinatorial",
        epsilon=eps,
        delta=dl,
        max_violation=worst,
        witness=witness,
        verdict="fortified" if worst is None or worst <= 0 else "violated",
        extras={"rectangles_checked": checked, "outer_value": val_outer},
    )
    half = eps / 2
    analytic = fortification_violation(cg, half, cap=cap)
    premise = analytic.max_violation <= half * dl
    report.extras["analytic_violation_at_half_epsilon"] = analytic.max_violation
    report.extras["analytic_premise"] = premise
    report.extras["implication_consistent"] = (not premise) or report.passed
    return report


# ---------------------------------------------------------------------------
# k players


@dataclass(frozen=True, eq=False)
class KConcatenatedGame:
    inner: KPlayerGame
    graphs: tuple[BipartiteExpander, ...]

    @property
    def lam(self) -> float:
        return max(e.lam for e in self.graphs)

    @cached_property
    def outer(self) -> KPlayerGame:
        mu, pred = _outer_tensor(
            self.inner.mu, self.inner.predicate, self.graphs, self.inner.answer_sizes
        )
        return KPlayerGame.from_arrays(mu, pred)


def concatenate_multiplayer(
    graphs: Sequence[BipartiteExpander], g: KPlayerGame, cap: int | None = DEFAULT_CAP
) -> KConcatenatedGame:
    _require_valid(g)
    if len(graphs) != g.k:
        raise ValueError(f"need {g.k} graphs, got {len(graphs)}")
    for e, n in zip(graphs, g.question_sizes):
        if e.graph.right_size != n:
            raise GraphError("graph right side does not match the question set")
    widths = [max(len(nb) for nb in e.graph.left_neighbors) for e in graphs]
    outer_answers = [a**w for a, w in zip(g.answer_sizes, widths)]
    check_cap(
        math.prod(outer_answers) * math.prod(e.graph.left_size for e in graphs),
        cap,
        "outer predicate entries",
    )
    return KConcatenatedGame(g, tuple(graphs))


def multiplayer_violation(
    cg: KConcatenatedGame, epsilon, delta=None, cap: int | None = DEFAULT_CAP
) -> FortificationReport:
    """Weak violation over vertex k-tuples, plus the ``gamma val(G) + 2 lam k`` bound.

    The stated hypothesis ``lam <= 2 delta / k`` only yields ``2 lam k <= 4 delta``;
    the report carries the proof-level bound separately instead of the stated one.
    """
    eps = Fraction(epsilon)
    outer = cg.outer
    val_g = kplayer_value(cg.inner, cap=cap)
    _, _, D = outer.weights
    k = outer.k

    def run(c):
        best = maximize(_violation_kernel(outer, c), (True,) * k, cap=cap)
        return Fraction(best.value, D * c.denominator), best.choices

    viol, choices = run(val_g + eps)
    proof_excess = viol if eps == 0 else run(val_g)[0]
    proof_bound = 2 * cg.lam * k
    report = FortificationReport(
        mode="weak-analytic",
        epsilon=eps,
        delta=None if delta is None else Fraction(delta),
        max_violation=viol,
        witness=tuple(choices),
        extras={
            "inner_value": val_g,
            "lambda": cg.lam,
            "proof_excess": proof_excess,
            "proof_bound_2_lambda_k": proof_bound,
            "proof_inequality_holds": float(proof_excess) <= proof_bound + SPECTRAL_SLACK,
            "constant_note": "hypothesis lam <= 2 delta / k only gives 2 lam k <= 4 delta",
        },
    )
    if delta is not None:
        report.verdict = "fortified" if viol <= Fraction(delta) else "violated"
    return report


def kviolation_of(cg: KConcatenatedGame, fs: Sequence[Substrategy], epsilon) -> Fraction:
    outer = cg.outer
    c = kplayer_value(cg.inner) + Fraction(epsilon)
    gamma = Fraction(0)
    for xs in itertools.product(*(range(n) for n in outer.question_sizes)):
        gamma += outer.mu[xs] * math.prod((f.marginal(x) for f, x in zip(fs, xs)), start=Fraction(1))
    return kplayer_substrategy_value(outer, fs) - c * gamma
