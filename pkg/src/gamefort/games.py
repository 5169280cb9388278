"""Two-player and k-player one-round games with exact rational values.

A game stores its question distribution ``mu`` as exact fractions and its
predicate either as a boolean tensor indexed ``(a, b, x, y)`` or, for games
whose referee checks a randomised condition (the outer game of a
concatenation), as exact win probabilities in ``[0, 1]``.  Values are computed
on an integer weight tensor ``mu(x, y) * V(a, b, x, y) * D`` so the heavy loops
never touch ``Fraction`` objects.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from gamefort._enum import DEFAULT_CAP, InstanceTooLarge, check_cap, int_array, maximize

__all__ = [
    "Game",
    "KPlayerGame",
    "Substrategy",
    "InvalidGame",
    "InstanceTooLarge",
    "validate_game",
    "validate_kplayer",
    "classical_value",
    "optimal_strategy",
    "substrategy_value",
    "tensor",
    "tensor_power",
    "subgame",
    "rectangle_mass",
    "is_biregular",
    "kplayer_value",
    "kplayer_substrategy_value",
    "chsh",
    "trivial_game",
    "parity_game",
]


class InvalidGame(ValueError):
    pass


def _fraction_array(values, shape=None) -> np.ndarray:
    arr = np.empty(np.shape(values) if shape is None else shape, dtype=object)
    flat = np.asarray(values, dtype=object).reshape(-1)
    out = arr.reshape(-1)
    for i, v in enumerate(flat):
        out[i] = Fraction(v)
    arr.setflags(write=False)
    return arr


def _predicate_array(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype == bool:
        out = arr.copy()
    else:
        fr = _fraction_array(arr)
        if all(v in (0, 1) for v in fr.reshape(-1)):
            out = np.array([v == 1 for v in fr.reshape(-1)], dtype=bool).reshape(fr.shape)
        else:
            out = fr.copy()
    out.setflags(write=False)
    return out


def _lcm_of_denominators(values: Iterable[Fraction]) -> int:
    d = 1
    for v in values:
        d = math.lcm(d, v.denominator)
    return d


@dataclass(frozen=True, eq=False)
class Game:
    """Two-player one-round game ``(X x Y, A x B, mu, V)``.

    ``mu`` is an ``x_size x y_size`` array of fractions and ``predicate`` an
    ``(a_size, b_size, x_size, y_size)`` tensor.  Construct with
    :meth:`from_arrays` unless the sizes need to be stated independently (for
    instance when validating a malformed file).
    """

    x_size: int
    y_size: int
    a_size: int
    b_size: int
    mu: np.ndarray = field(repr=False)
    predicate: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mu", _fraction_array(self.mu))
        object.__setattr__(self, "predicate", _predicate_array(self.predicate))

    @classmethod
    def from_arrays(cls, mu, predicate) -> "Game":
        mu_arr = np.asarray(mu, dtype=object)
        pred = np.asarray(predicate)
        a, b = pred.shape[0], pred.shape[1]
        return cls(mu_arr.shape[0], mu_arr.shape[1], a, b, mu_arr, pred)

    @property
    def alphabet_size(self) -> int:
        """Total answer alphabet size ``|A| * |B|``."""
        return self.a_size * self.b_size

    @property
    def is_boolean(self) -> bool:
        return self.predicate.dtype == bool

    def win_probability(self, a: int, b: int, x: int, y: int) -> Fraction:
        return Fraction(int(self.predicate[a, b, x, y])) if self.is_boolean else self.predicate[a, b, x, y]

    def x_marginal(self) -> list[Fraction]:
        return [sum(self.mu[x, :], Fraction(0)) for x in range(self.x_size)]

    def y_marginal(self) -> list[Fraction]:
        return [sum(self.mu[:, y], Fraction(0)) for y in range(self.y_size)]

    @cached_property
    def weights(self) -> tuple[np.ndarray, np.ndarray, int]:
        """Integer tensors ``(W, M, D)`` with ``W/D = mu*V`` and ``M/D = mu``."""
        mu = self.mu
        if self.is_boolean:
            D = _lcm_of_denominators(mu.reshape(-1))
            M = np.array([[int(v * D) for v in row] for row in mu], dtype=object)
            W = np.where(self.predicate, M[None, None, :, :], 0)
        else:
            prod = self.predicate * mu[None, None, :, :]
            D = _lcm_of_denominators(itertools.chain(mu.reshape(-1), prod.reshape(-1)))
            M = np.array([[int(v * D) for v in row] for row in mu], dtype=object)
            W = np.frompyfunc(lambda v: int(v * D), 1, 1)(prod)
        return int_array(W), int_array(M), D


@dataclass(frozen=True, eq=False)
class KPlayerGame:
    """k-player game; ``mu`` has one axis per player, ``predicate`` has the
    answer axes first and the question axes after."""

    question_sizes: tuple[int, ...]
    answer_sizes: tuple[int, ...]
    mu: np.ndarray = field(repr=False)
    predicate: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "question_sizes", tuple(int(s) for s in self.question_sizes))
        object.__setattr__(self, "answer_sizes", tuple(int(s) for s in self.answer_sizes))
        object.__setattr__(self, "mu", _fraction_array(self.mu))
        object.__setattr__(self, "predicate", _predicate_array(self.predicate))

    @classmethod
    def from_arrays(cls, mu, predicate) -> "KPlayerGame":
        mu_arr = np.asarray(mu, dtype=object)
        pred = np.asarray(predicate)
        k = mu_arr.ndim
        return cls(mu_arr.shape, pred.shape[:k], mu_arr, pred)

    @classmethod
    def from_game(cls, g: Game) -> "KPlayerGame":
        return cls((g.x_size, g.y_size), (g.a_size, g.b_size), g.mu, g.predicate)

    @property
    def k(self) -> int:
        return len(self.question_sizes)

    @property
    def is_boolean(self) -> bool:
        return self.predicate.dtype == bool

    def marginal(self, player: int) -> list[Fraction]:
        axes = tuple(i for i in range(self.k) if i != player)
        summed = self.mu.sum(axis=axes) if axes else self.mu
        return [Fraction(v) for v in summed]

    @cached_property
    def weights(self) -> tuple[np.ndarray, np.ndarray, int]:
        mu = self.mu
        lead = (None,) * self.k
        if self.is_boolean:
            D = _lcm_of_denominators(mu.reshape(-1))
            M = np.frompyfunc(lambda v: int(v * D), 1, 1)(mu)
            W = np.where(self.predicate, M[lead], 0)
        else:
            prod = self.predicate * mu[lead]
            D = _lcm_of_denominators(itertools.chain(mu.reshape(-1), prod.reshape(-1)))
            M = np.frompyfunc(lambda v: int(v * D), 1, 1)(mu)
            W = np.frompyfunc(lambda v: int(v * D), 1, 1)(prod)
        return int_array(W), int_array(M), D


@dataclass(frozen=True, eq=False)
class Substrategy:
    """Sub-probability answer distribution per question (rows sum to at most 1)."""

    f: np.ndarray

    def __post_init__(self):
        arr = _fraction_array(self.f)
        if arr.ndim != 2:
            raise ValueError("substrategy must be a questions x answers matrix")
        for x, row in enumerate(arr):
            if any(v < 0 or v > 1 for v in row):
                raise ValueError(f"substrategy entry outside [0, 1] at question {x}")
            if sum(row, Fraction(0)) > 1:
                raise ValueError(f"substrategy row {x} sums above 1")
        object.__setattr__(self, "f", arr)

    @classmethod
    def zeros(cls, n_questions: int, n_answers: int) -> "Substrategy":
        return cls(np.zeros((n_questions, n_answers), dtype=int))

    @classmethod
    def vertex(cls, choices: Sequence[int | None], n_answers: int) -> "Substrategy":
        """Per question either abstain (``None``) or answer with certainty."""
        f = np.zeros((len(choices), n_answers), dtype=int)
        for x, a in enumerate(choices):
            if a is not None:
                f[x, a] = 1
        return cls(f)

    deterministic = vertex

    @property
    def n_questions(self) -> int:
        return self.f.shape[0]

    @property
    def n_answers(self) -> int:
        return self.f.shape[1]

    def marginal(self, x: int) -> Fraction:
        return sum(self.f[x], Fraction(0))

    def marginals(self) -> list[Fraction]:
        return [self.marginal(x) for x in range(self.n_questions)]

    def is_complete(self) -> bool:
        return all(m == 1 for m in self.marginals())

    def vertex_choices(self) -> tuple[int | None, ...] | None:
        """The abstain-or-answer description, or ``None`` if not a vertex."""
        out = []
        for row in self.f:
            ones = [a for a, v in enumerate(row) if v == 1]
            if all(v == 0 for v in row):
                out.append(None)
            elif len(ones) == 1 and sum(row) == 1:
                out.append(ones[0])
            else:
                return None
        return tuple(out)


# ---------------------------------------------------------------------------
# validation


def validate_game(g: Game) -> str | None:
    """Return ``None`` if ``g`` is well formed, else the first violated invariant."""
    for name in ("x_size", "y_size", "a_size", "b_size"):
        if getattr(g, name) < 1:
            return f"{name} must be positive"
    if g.mu.shape != (g.x_size, g.y_size):
        return f"mu has shape {g.mu.shape}, expected {(g.x_size, g.y_size)}"
    if g.predicate.shape != (g.a_size, g.b_size, g.x_size, g.y_size):
        return (
            f"predicate has shape {g.predicate.shape}, "
            f"expected {(g.a_size, g.b_size, g.x_size, g.y_size)}"
        )
    if any(v < 0 for v in g.mu.reshape(-1)):
        return "negative mass in mu"
    total = sum(g.mu.reshape(-1), Fraction(0))
    if total != 1:
        return f"mass != 1 (mu sums to {total})"
    if not g.is_boolean and any(v < 0 or v > 1 for v in g.predicate.reshape(-1)):
        return "predicate win probability outside [0, 1]"
    return None


def validate_kplayer(g: KPlayerGame) -> str | None:
    if g.k < 2:
        return "a k-player game needs k >= 2"
    if len(g.answer_sizes) != g.k:
        return "answer_sizes length differs from question_sizes length"
    if any(s < 1 for s in g.question_sizes + g.answer_sizes):
        return "sizes must be positive"
    if g.mu.shape != g.question_sizes:
        return f"mu has shape {g.mu.shape}, expected {g.question_sizes}"
    if g.predicate.shape != g.answer_sizes + g.question_sizes:
        return f"predicate has shape {g.predicate.shape}, expected {g.answer_sizes + g.question_sizes}"
    if any(v < 0 for v in g.mu.reshape(-1)):
        return "negative mass in mu"
    total = sum(g.mu.reshape(-1), Fraction(0))
    if total != 1:
        return f"mass != 1 (mu sums to {total})"
    if not g.is_boolean and any(v < 0 or v > 1 for v in g.predicate.reshape(-1)):
        return "predicate win probability outside [0, 1]"
    return None


def _require_valid(g) -> None:
    problem = validate_game(g) if isinstance(g, Game) else validate_kplayer(g)
    if problem is not None:
        raise InvalidGame(problem)


# ---------------------------------------------------------------------------
# values


def classical_value(g: Game, cap: int | None = DEFAULT_CAP) -> Fraction:
    """Maximum winning probability over deterministic strategy pairs.

    One side's assignments are enumerated; the other side's optimal reply is
    exact per question.  ``cap`` bounds the number of enumerated assignments
    (the smaller of ``a_size**x_size`` and ``b_size**y_size``).
    """
    return optimal_strategy(g, cap)[0]


def optimal_strategy(
    g: Game, cap: int | None = DEFAULT_CAP
) -> tuple[Fraction, tuple[int, ...], tuple[int, ...]]:
    """Classical value with a maximising deterministic pair ``(p, q)``."""
    _require_valid(g)
    W, _, D = g.weights
    best = maximize(W, (False, False), cap=cap)
    p, q = best.choices
    return Fraction(best.value, D), p, q


def substrategy_value(g: Game, f: Substrategy, h: Substrategy) -> Fraction:
    """``E_{(x,y)~mu} sum_{a,b} V(a,b,x,y) f(x,a) h(y,b)``, exactly."""
    _require_valid(g)
    if f.f.shape != (g.x_size, g.a_size) or h.f.shape != (g.y_size, g.b_size):
        raise ValueError(
            f"substrategy shapes {f.f.shape}, {h.f.shape} do not match game "
            f"({g.x_size}x{g.a_size}, {g.y_size}x{g.b_size})"
        )
    return _contract(g, [f.f, h.f])


def _contract(g, fs: Sequence[np.ndarray]) -> Fraction:
    W, _, D = g.weights
    k = len(fs)
    T = np.asarray(W, dtype=object)
    for i, f in enumerate(fs):
        # f[x_i, a_i] placed on axes (i, k + i)
        shape = [1] * (2 * k)
        shape[i] = f.shape[1]
        shape[k + i] = f.shape[0]
        T = T * np.transpose(f).reshape(shape)
    return Fraction(sum(T.reshape(-1), Fraction(0))) / D


def kplayer_value(g: KPlayerGame, cap: int | None = DEFAULT_CAP) -> Fraction:
    _require_valid(g)
    W, _, D = g.weights
    best = maximize(W, (False,) * g.k, cap=cap)
    return Fraction(best.value, D)


def kplayer_substrategy_value(g: KPlayerGame, fs: Sequence[Substrategy]) -> Fraction:
    _require_valid(g)
    if len(fs) != g.k:
        raise ValueError(f"expected {g.k} substrategies, got {len(fs)}")
    for i, f in enumerate(fs):
        if f.f.shape != (g.question_sizes[i], g.answer_sizes[i]):
            raise ValueError(f"substrategy {i} has shape {f.f.shape}")
    return _contract(g, [f.f for f in fs])


# ---------------------------------------------------------------------------
# constructions


def tensor(g1: Game, g2: Game, cap: int | None = DEFAULT_CAP) -> Game:
    """Product game: independent question pairs, conjunction of predicates.

    Question ``(x1, x2)`` has index ``x1 * x_size(g2) + x2``; answers likewise.
    """
    _require_valid(g1)
    _require_valid(g2)
    size = g1.predicate.size * g2.predicate.size
    check_cap(size, cap, "tensor product predicate entries")
    mu = np.multiply.outer(g1.mu, g2.mu).transpose(0, 2, 1, 3)
    mu = mu.reshape(g1.x_size * g2.x_size, g1.y_size * g2.y_size)
    if g1.is_boolean and g2.is_boolean:
        V = np.logical_and.outer(g1.predicate, g2.predicate)
    else:
        p1 = g1.predicate.astype(object) if g1.is_boolean else g1.predicate
        p2 = g2.predicate.astype(object) if g2.is_boolean else g2.predicate
        V = np.multiply.outer(p1, p2)
    # (A1,B1,X1,Y1,A2,B2,X2,Y2) -> (A1,A2,B1,B2,X1,X2,Y1,Y2)
    V = V.transpose(0, 4, 1, 5, 2, 6, 3, 7).reshape(
        g1.a_size * g2.a_size,
        g1.b_size * g2.b_size,
        g1.x_size * g2.x_size,
        g1.y_size * g2.y_size,
    )
    return Game.from_arrays(mu, V)


def tensor_power(g: Game, m: int, cap: int | None = DEFAULT_CAP) -> Game:
    if m < 1:
        raise ValueError("m must be a positive integer")
    out = g
    for _ in range(m - 1):
        out = tensor(out, g, cap=cap)
    return out


def rectangle_mass(g: Game, S: Iterable[int], T: Iterable[int]) -> Fraction:
    S, T = list(S), list(T)
    return sum((g.mu[x, y] for x in S for y in T), Fraction(0))


def subgame(g: Game, S: Sequence[int], T: Sequence[int]) -> Game:
    """``g`` with questions conditioned on ``S x T`` (reindexed in the given order).

    A zero-mass rectangle gives the automatically accepting game.
    """
    _require_valid(g)
    S, T = list(S), list(T)
    if not S or not T:
        raise ValueError("subgame needs nonempty question subsets")
    mass = rectangle_mass(g, S, T)
    if mass == 0:
        mu = np.full((len(S), len(T)), Fraction(1, len(S) * len(T)), dtype=object)
        V = np.ones((g.a_size, g.b_size, len(S), len(T)), dtype=bool)
        return Game.from_arrays(mu, V)
    mu = np.array([[g.mu[x, y] / mass for y in T] for x in S], dtype=object)
    V = g.predicate[:, :, S, :][:, :, :, T]
    return Game.from_arrays(mu, V)


def is_biregular(g: Game) -> bool:
    """Both question marginals exactly uniform."""
    return all(m == Fraction(1, g.x_size) for m in g.x_marginal()) and all(
        m == Fraction(1, g.y_size) for m in g.y_marginal()
    )


# ---------------------------------------------------------------------------
# standard games


def chsh() -> Game:
    """CHSH: uniform bits, win iff ``a xor b == x and y``."""
    V = np.zeros((2, 2, 2, 2), dtype=bool)
    for a, b, x, y in itertools.product(range(2), repeat=4):
        V[a, b, x, y] = (a ^ b) == (x & y)
    return Game.from_arrays(np.full((2, 2), Fraction(1, 4), dtype=object), V)


def trivial_game(x_size: int = 1, y_size: int = 1, a_size: int = 1, b_size: int = 1) -> Game:
    """Uniform questions, every answer wins."""
    mu = np.full((x_size, y_size), Fraction(1, x_size * y_size), dtype=object)
    return Game.from_arrays(mu, np.ones((a_size, b_size, x_size, y_size), dtype=bool))


def parity_game(k: int = 3, copies: int = 1) -> KPlayerGame:
    """Win iff the XOR of the answer bits equals the AND of the question bits.

    With ``copies > 1`` each player's question set is ``{0, ..., 2*copies-1}``
    and only the question's parity is read, so the game value is unchanged
    while the question sets can match larger graphs.
    """
    n = 2 * copies
    mu = np.full((n,) * k, Fraction(1, n**k), dtype=object)
    V = np.zeros((2,) * k + (n,) * k, dtype=bool)
    for answers in itertools.product(range(2), repeat=k):
        xor = 0
        for a in answers:
            xor ^= a
        for qs in itertools.product(range(n), repeat=k):
            conj = int(all(q % 2 for q in qs))
            V[answers + qs] = xor == conj
    return KPlayerGame.from_arrays(mu, V)
