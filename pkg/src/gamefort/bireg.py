"""Biregularization: make both question marginals uniform.

Graphical games (``mu`` uniform over a multiset of edges) are biregularized
exactly by splitting each question ``x`` into ``deg(x)`` copies, each copy
pointing back at ``x`` only.  General games are first rounded down to a
graphical game whose masses are multiples of ``1/q``, with the lost mass moved
to a fresh always-winning question pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from gamefort._enum import DEFAULT_CAP, check_cap
from gamefort.expanders import BipartiteGraph
from gamefort.games import Game, _require_valid


class NotGraphical(ValueError):
    pass


@dataclass(frozen=True)
class BiregularResult:
    game: Game
    left: BipartiteGraph  # over X_int x X
    right: BipartiteGraph  # over Y_int x Y
    edges: int  # |E| counted with multiplicity


@dataclass(frozen=True)
class Quantization:
    game: Game
    q: int
    support: int
    null_mass: Fraction
    null_appended: bool


def edge_multiplicities(g: Game, multi_edges: bool = True) -> tuple[np.ndarray, int]:
    """Write ``mu = m / |E|`` with integer edge multiplicities ``m``.

    ``|E|`` is the least common denominator of ``mu``.  Without
    ``multi_edges`` every nonzero entry must equal ``1/|E|``.
    """
    _require_valid(g)
    E = 1
    for v in g.mu.reshape(-1):
        E = math.lcm(E, v.denominator)
    m = np.array([[int(v * E) for v in row] for row in g.mu], dtype=np.int64)
    if not multi_edges and m.max() > 1:
        raise NotGraphical("non-graphical input: nonzero masses differ")
    return m, E


def biregularize_graphical(g: Game, multi_edges: bool = False) -> BiregularResult:
    """Exact biregularization of a graphical game.

    Question ``x`` of degree ``d_x`` becomes ``d_x`` copies ``(x, i)``; copy
    ``(x, i)`` has index ``offset[x] + i`` in ``X_int``.  Each copy has a single
    inner neighbour, so composite answers collapse to single answers.
    """
    m, E = edge_multiplicities(g, multi_edges)
    dx = m.sum(axis=1)
    dy = m.sum(axis=0)
    if (dx == 0).any() or (dy == 0).any():
        raise NotGraphical("isolated question (zero marginal)")
    ox = np.concatenate([[0], np.cumsum(dx)])
    oy = np.concatenate([[0], np.cumsum(dy)])
    nx, ny = int(ox[-1]), int(oy[-1])
    assert nx == ny == E and nx <= E * g.x_size
    if m.max() == 1:
        assert E <= g.x_size * g.y_size
    left = BipartiteGraph(nx, g.x_size, tuple((int(ox[x]) + i, x) for x in range(g.x_size) for i in range(dx[x])))
    right = BipartiteGraph(ny, g.y_size, tuple((int(oy[y]) + j, y) for y in range(g.y_size) for j in range(dy[y])))
    xmap = np.repeat(np.arange(g.x_size), dx)
    ymap = np.repeat(np.arange(g.y_size), dy)
    # mu_int((x,i),(y,j)) = mu(x,y) / (d_x d_y)
    mu = np.empty((nx, ny), dtype=object)
    for i, x in enumerate(xmap):
        for j, y in enumerate(ymap):
            mu[i, j] = g.mu[x, y] / (int(dx[x]) * int(dy[y]))
    V = g.predicate[:, :, xmap, :][:, :, :, ymap]
    return BiregularResult(Game.from_arrays(mu, V), left, right, E)


def quantization_denominator(support: int, tau: Fraction) -> int:
    """Smallest ``q`` with ``support / tau <= q``."""
    return math.ceil(Fraction(support) / tau)


def quantize(g: Game, tau) -> Quantization:
    """Round ``mu`` down to multiples of ``1/q`` and move the excess to a null pair.

    The null questions are appended as the last indices, with every answer
    winning on them, and only when the excess mass is positive.
    """
    _require_valid(g)
    tau = Fraction(tau)
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    support = sum(1 for v in g.mu.reshape(-1) if v > 0)
    q = quantization_denominator(support, tau)
    mu = np.array([[Fraction(math.floor(q * v), q) for v in row] for row in g.mu], dtype=object)
    null = 1 - sum(mu.reshape(-1), Fraction(0))
    if null == 0:
        return Quantization(Game.from_arrays(mu, g.predicate), q, support, null, False)
    nx, ny = g.x_size + 1, g.y_size + 1
    mu_t = np.full((nx, ny), Fraction(0), dtype=object)
    mu_t[: g.x_size, : g.y_size] = mu
    mu_t[g.x_size, g.y_size] = null
    if g.is_boolean:
        V = np.ones((g.a_size, g.b_size, nx, ny), dtype=bool)
    else:
        V = np.full((g.a_size, g.b_size, nx, ny), Fraction(1), dtype=object)
    V[:, :, : g.x_size, : g.y_size] = g.predicate
    return Quantization(Game.from_arrays(mu_t, V), q, support, null, True)


def quantize_distribution(g: Game, tau) -> Game:
    return quantize(g, tau).game


def _drop_isolated(g: Game) -> Game:
    xs = [x for x, m in enumerate(g.x_marginal()) if m > 0]
    ys = [y for y, m in enumerate(g.y_marginal()) if m > 0]
    if len(xs) == g.x_size and len(ys) == g.y_size:
        return g
    mu = g.mu[np.ix_(xs, ys)]
    return Game.from_arrays(mu, g.predicate[:, :, xs, :][:, :, :, ys])


def biregularize(g: Game, tau, cap: int | None = DEFAULT_CAP) -> tuple[BiregularResult, Quantization]:
    """Quantize, then split questions as for graphical games (multi-edges allowed).

    Questions whose mass rounds to zero are never asked and are dropped before
    splitting.
    """
    quant = quantize(g, tau)
    check_cap(quant.q * quant.q, cap, "biregularized question pairs")
    result = biregularize_graphical(_drop_isolated(quant.game), multi_edges=True)
    bx, by = size_bounds(g, tau)
    assert result.game.x_size <= bx and result.game.y_size <= by
    return result, quant


def size_bounds(g: Game, tau) -> tuple[Fraction, Fraction]:
    """Upper bounds ``8|X|^2|Y|/tau`` and ``8|X||Y|^2/tau`` on the output sizes."""
    tau = Fraction(tau)
    return 8 * g.x_size**2 * g.y_size / tau, 8 * g.x_size * g.y_size**2 / tau
