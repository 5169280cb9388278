"""Bipartite graphs, their normalized adjacency operator, and spectral certificates.

Graphs are over ``(X', X)``: ``left`` vertices are the outer questions ``x'``
and ``right`` vertices the inner questions ``x``.  Multi-edges are allowed and
carry integer multiplicity.  All spectral assertions use the additive slack
``SPECTRAL_SLACK``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

SPECTRAL_SLACK = 1e-9


class GraphError(ValueError):
    pass


class ExpanderNotFound(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    left_size: int
    right_size: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        edges = tuple(sorted((int(l), int(r)) for l, r in self.edges))
        for l, r in edges:
            if not (0 <= l < self.left_size and 0 <= r < self.right_size):
                raise GraphError(f"edge {(l, r)} outside {self.left_size} x {self.right_size}")
        object.__setattr__(self, "edges", edges)

    @cached_property
    def multiplicity(self) -> Counter:
        return Counter(self.edges)

    @cached_property
    def right_neighbors(self) -> tuple[tuple[int, ...], ...]:
        """``N(x)`` for every right vertex, sorted, with repetition."""
        out = [[] for _ in range(self.right_size)]
        for l, r in self.edges:
            out[r].append(l)
        return tuple(tuple(sorted(n)) for n in out)

    @cached_property
    def left_neighbors(self) -> tuple[tuple[int, ...], ...]:
        """Distinct sorted ``N(x')`` for every left vertex."""
        out = [set() for _ in range(self.left_size)]
        for l, r in self.edges:
            out[l].add(r)
        return tuple(tuple(sorted(n)) for n in out)

    def right_degree(self, x: int) -> int:
        return len(self.right_neighbors[x])

    def left_degree(self, xp: int) -> int:
        """Degree of ``x'`` counting multiplicity."""
        return sum(self.multiplicity[(xp, x)] for x in self.left_neighbors[xp])

    def is_right_regular(self) -> bool:
        return len({len(n) for n in self.right_neighbors}) == 1

    def is_biregular(self) -> bool:
        return self.is_right_regular() and len(
            {self.left_degree(l) for l in range(self.left_size)}
        ) == 1

    def is_simple(self) -> bool:
        return all(m == 1 for m in self.multiplicity.values())

    @property
    def degree(self) -> int:
        """Common right degree ``d``."""
        if not self.is_right_regular():
            raise GraphError("graph is not right-regular")
        return self.right_degree(0)

    def transition(self, x: int) -> dict[int, Fraction]:
        """Law of a random neighbour ``x' ~ N(x)`` (multiplicity-weighted)."""
        d = self.right_degree(x)
        if d == 0:
            raise GraphError(f"right vertex {x} has no neighbours")
        return {xp: Fraction(c, d) for xp, c in Counter(self.right_neighbors[x]).items()}


@dataclass(frozen=True, eq=False)
class BipartiteExpander:
    graph: BipartiteGraph
    lam: float

    @property
    def balanced(self) -> bool:
        return self.graph.left_size == self.graph.right_size

    @property
    def degree(self) -> int:
        return self.graph.degree


def normalized_adjacency(g: BipartiteGraph) -> np.ndarray:
    """Operator from functions on ``X'`` to functions on ``X``.

    Entry ``(x, x')`` is ``mult/d * sqrt(mu(x)/mu'(x'))`` with ``mu`` uniform on
    ``X`` and ``mu'(x') = deg(x')/(d |X|)``, which simplifies to
    ``mult / sqrt(d * deg(x'))``.
    """
    d = g.degree
    deg = [g.left_degree(l) for l in range(g.left_size)]
    isolated = [l for l, v in enumerate(deg) if v == 0]
    if isolated:
        raise GraphError(f"isolated left vertex {isolated[0]}")
    out = np.zeros((g.right_size, g.left_size))
    for (l, r), m in g.multiplicity.items():
        out[r, l] = m / math.sqrt(d * deg[l])
    return out


def singular_values(m: np.ndarray) -> np.ndarray:
    return np.linalg.svd(np.asarray(m, dtype=float), compute_uv=False)


def second_singular_value(m: np.ndarray) -> float:
    s = singular_values(m)
    if len(s) < 2:
        return 0.0
    return float(s[1])


def certify(graph: BipartiteGraph) -> BipartiteExpander:
    return BipartiteExpander(graph, second_singular_value(normalized_adjacency(graph)))


def shift_union_graph(n: int, shifts: Sequence[int]) -> BipartiteGraph:
    """Balanced graph on ``Z_n`` with edges ``(x + s, x)`` for every shift."""
    reduced = [s % n for s in shifts]
    if len(set(reduced)) != len(reduced):
        raise GraphError("shifts must be distinct mod n")
    return BipartiteGraph(n, n, tuple(((x + s) % n, x) for x in range(n) for s in reduced))


def complete_graph(n: int, m: int | None = None) -> BipartiteGraph:
    m = n if m is None else m
    return BipartiteGraph(m, n, tuple((l, r) for l in range(m) for r in range(n)))


def matching(n: int) -> BipartiteGraph:
    return shift_union_graph(n, [0])


def permutation_union(perms: Iterable[Sequence[int]], n: int) -> BipartiteGraph:
    return BipartiteGraph(n, n, tuple((int(p[x]), x) for p in perms for x in range(n)))


def random_biregular_expander(
    n: int,
    d: int,
    lambda_target: float,
    seed: int = 0,
    max_attempts: int = 20,
    simple: bool = False,
) -> BipartiteExpander:
    """Union of ``d`` uniform permutations of ``[n]``, accepted when ``lam <= lambda_target``.

    Attempt ``i`` draws from ``default_rng([seed, i])`` so any attempt can be
    replayed on its own.  ``d == n`` returns the complete graph.  With
    ``simple`` the permutations are drawn one by one, redrawing any that
    would repeat an edge.
    """
    if not 1 <= d <= n:
        raise GraphError("need 1 <= d <= n")
    if d == n:
        e = certify(complete_graph(n))
        if e.lam <= lambda_target + SPECTRAL_SLACK:
            return e
        raise ExpanderNotFound("complete graph misses the target")
    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt])
        perms = _simple_permutations(rng, n, d) if simple else [rng.permutation(n) for _ in range(d)]
        if perms is None:
            continue
        e = certify(permutation_union(perms, n))
        if e.lam <= lambda_target:
            return e
    raise ExpanderNotFound(
        f"target unreachable: no ({n}, {d}) sample reached lambda <= {lambda_target} "
        f"in {max_attempts} attempts; raise d or lambda_target"
    )


def _simple_permutations(rng, n: int, d: int, tries: int = 200):
    used = np.zeros((n, n), dtype=bool)
    perms = []
    for _ in range(d):
        for _ in range(tries):
            p = rng.permutation(n)
            if not used[p, np.arange(n)].any():
                break
        else:
            return None
        used[p, np.arange(n)] = True
        perms.append(p)
    return perms


def _left_law(g: BipartiteGraph) -> np.ndarray:
    deg = np.array([g.left_degree(l) for l in range(g.left_size)], dtype=float)
    return deg / deg.sum()


def average_to_right(g: BipartiteGraph, f: Sequence[float]) -> np.ndarray:
    """``f(x) = E_{x' ~ N(x)} f(x')``."""
    f = np.asarray(f, dtype=float)
    if f.shape != (g.left_size,):
        raise ValueError(f"expected a vector of length {g.left_size}")
    return np.array([f[list(n)].mean() for n in g.right_neighbors])


def check_expander_averaging(e: BipartiteExpander, f: Sequence[float]) -> tuple[float, float]:
    """Variance of the neighbour averages against ``lam**2`` times the variance of ``f``."""
    f = np.asarray(f, dtype=float)
    fx = average_to_right(e.graph, f)
    law = _left_law(e.graph)
    fbar = float(law @ f)
    lhs = float(np.mean((fx - fbar) ** 2))
    rhs = e.lam**2 * float(law @ (f - fbar) ** 2)
    return lhs, rhs


def uniform_marginals(mu) -> bool:
    mu = np.asarray(mu, dtype=object)
    nx, ny = mu.shape
    return all(sum(mu[x, :], Fraction(0)) == Fraction(1, nx) for x in range(nx)) and all(
        sum(mu[:, y], Fraction(0)) == Fraction(1, ny) for y in range(ny)
    )


def check_correlated_averages(
    eM: BipartiteExpander,
    eP: BipartiteExpander,
    mu,
    f: Sequence[float],
    g: Sequence[float],
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Both correlation inequalities for neighbour averages under ``mu``.

    Returns ``((lhs1, rhs1), (lhs2, rhs2))`` where the first pair bounds the
    mean absolute deviation of ``f(x) g(y)`` from its ``mu``-mean by
    ``2 sqrt(2) lam ||f|| ||g||`` and the second bounds the gap between the
    product of means and the ``mu``-mean by ``2 lam**2 ||f|| ||g||``.
    """
    if not uniform_marginals(mu):
        raise ValueError("mu must have uniform marginals")
    mu_f = np.array(np.asarray(mu, dtype=object), dtype=float)
    if mu_f.shape != (eM.graph.right_size, eP.graph.right_size):
        raise ValueError("mu shape does not match the graphs' right sides")
    lam = max(eM.lam, eP.lam)
    fx = average_to_right(eM.graph, f)
    gy = average_to_right(eP.graph, g)
    prod = np.outer(fx, gy)
    mean = float((mu_f * prod).sum())
    norm_f = math.sqrt(float(_left_law(eM.graph) @ np.asarray(f, dtype=float) ** 2))
    norm_g = math.sqrt(float(_left_law(eP.graph) @ np.asarray(g, dtype=float) ** 2))
    lhs1 = float((mu_f * np.abs(prod - mean)).sum())
    rhs1 = 2 * math.sqrt(2) * lam * norm_f * norm_g
    lhs2 = abs(float(fx.mean() * gy.mean()) - mean)
    rhs2 = 2 * lam**2 * norm_f * norm_g
    return (lhs1, rhs1), (lhs2, rhs2)
