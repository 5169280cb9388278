"""Ordered fortification: disjoint copies, tilde-lifted graphs, and their checks.

Question ``(x, i)`` of ``G^(+l)`` has index ``x * l + i``; outer question
``(x', pi)`` of a tilde-lift has index ``x' * |F| + p`` where ``p`` is the
position of ``pi`` in the family ``F``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from gamefort._enum import DEFAULT_CAP, check_cap
from gamefort.concat import ConcatenatedGame, concatenate
from gamefort.expanders import (
    SPECTRAL_SLACK,
    BipartiteExpander,
    BipartiteGraph,
    GraphError,
    certify,
)
from gamefort.games import Game, _require_valid

KINDS = ("full", "pairwise")


@dataclass(frozen=True)
class InjectionFamily:
    d: int
    l: int
    members: tuple[tuple[int, ...], ...]
    kind: str

    def __len__(self) -> int:
        return len(self.members)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % p for p in range(2, math.isqrt(n) + 1))


def next_prime(n: int) -> int:
    while not is_prime(n):
        n += 1
    return n


def disjoint_union(g: Game, l: int, cap: int | None = DEFAULT_CAP) -> Game:
    """``l`` copies of ``g`` asked with matching copy indices, each with mass ``1/l``."""
    _require_valid(g)
    if l < 1:
        raise ValueError("l must be at least 1")
    check_cap(g.x_size * g.y_size * l * l, cap, "disjoint union question pairs")
    eye = np.array([[Fraction(int(i == j), l) for j in range(l)] for i in range(l)], dtype=object)
    mu = np.kron(g.mu, eye)
    # pairs with different copies carry no mass, so their predicate is irrelevant
    V = np.repeat(np.repeat(g.predicate, l, axis=2), l, axis=3)
    return Game.from_arrays(mu, V)


def build_injection_family(d: int, l: int, kind: str = "full", cap: int | None = DEFAULT_CAP) -> InjectionFamily:
    """All injections ``[d] -> [l]``, or the affine maps ``i -> a i + b`` over ``Z_l`` with ``a != 0``."""
    if not 1 <= d <= l:
        raise ValueError("need 1 <= d <= l")
    if kind == "full":
        check_cap(math.perm(l, d), cap, "injection family members")
        members = tuple(itertools.permutations(range(l), d))
    elif kind == "pairwise":
        if not is_prime(l):
            raise ValueError(f"pairwise family needs prime l, got {l} (try {next_prime(l)})")
        members = tuple(
            tuple((a * i + b) % l for i in range(d)) for a in range(1, l) for b in range(l)
        )
    else:
        raise ValueError(f"unknown family kind {kind!r}")
    return InjectionFamily(d, l, members, kind)


def pairwise_independent(fam: InjectionFamily) -> bool:
    """Exact check that every ordered pair of distinct images is equally likely."""
    target = Fraction(1, fam.l * (fam.l - 1))
    n = len(fam.members)
    for i, j in itertools.permutations(range(fam.d), 2):
        counts = {}
        for pi in fam.members:
            counts[(pi[i], pi[j])] = counts.get((pi[i], pi[j]), 0) + 1
        for a, b in itertools.permutations(range(fam.l), 2):
            if Fraction(counts.get((a, b), 0), n) != target:
                return False
    return True


def _ordering(m: BipartiteGraph) -> list[dict[int, int]]:
    """``u_{x'}``: position of each neighbour in the sorted neighbour list."""
    return [{x: k for k, x in enumerate(n)} for n in m.left_neighbors]


def _check_lift_input(m: BipartiteGraph, fam: InjectionFamily) -> None:
    if m.left_size != m.right_size:
        raise GraphError("tilde-lift needs a balanced graph")
    if not (m.is_biregular() and m.is_simple()):
        raise GraphError("tilde-lift needs a simple biregular graph")
    if m.degree != fam.d:
        raise GraphError(f"family degree {fam.d} does not match graph degree {m.degree}")


def tilde_lift(m: BipartiteExpander | BipartiteGraph, l: int, fam: InjectionFamily) -> BipartiteExpander:
    """``(x', pi) ~ (x, i)`` iff ``pi(u_{x'}(x)) = i``, certified afresh."""
    graph = m.graph if isinstance(m, BipartiteExpander) else m
    _check_lift_input(graph, fam)
    if fam.l != l:
        raise GraphError(f"family is over [{fam.l}], expected [{l}]")
    u = _ordering(graph)
    F = len(fam.members)
    edges = []
    for xp in range(graph.left_size):
        for p, pi in enumerate(fam.members):
            for x, k in u[xp].items():
                edges.append((xp * F + p, x * l + pi[k]))
    lifted = BipartiteGraph(graph.left_size * F, graph.right_size * l, tuple(edges))
    if graph.degree * F % l or not lifted.is_right_regular():
        raise GraphError("family is not uniform on single coordinates")
    return certify(lifted)


def default_l(dM: int, dP: int, kind: str) -> int:
    l = max(dM, dP)
    return next_prime(l) if kind == "pairwise" else l


def ordered_fortify(
    g: Game,
    M: BipartiteExpander,
    P: BipartiteExpander,
    l: int | None = None,
    kind: str = "full",
    cap: int | None = DEFAULT_CAP,
) -> ConcatenatedGame:
    """``M~ o G^(+l) o P~``; the inner alphabet stays that of ``g``."""
    dM, dP = M.graph.degree, P.graph.degree
    if l is None:
        l = default_l(dM, dP, kind)
    if l < max(dM, dP):
        raise ValueError(f"l = {l} is below the maximum degree {max(dM, dP)}")
    Mt = tilde_lift(M, l, build_injection_family(dM, l, kind, cap))
    Pt = tilde_lift(P, l, build_injection_family(dP, l, kind, cap))
    return concatenate(Mt, disjoint_union(g, l, cap), Pt, cap)


@dataclass(frozen=True)
class SpectralClaim:
    lam: float
    lam_tilde: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.lam_tilde <= self.bound + SPECTRAL_SLACK


def verify_tilde_spectral_claim(
    m: BipartiteExpander | BipartiteGraph, l: int, kind: str = "full", cap: int | None = DEFAULT_CAP
) -> SpectralClaim:
    """Compare ``lam`` of the lift with ``max(lam_M, 1/sqrt(d - 1))``."""
    e = m if isinstance(m, BipartiteExpander) else certify(m)
    d = e.graph.degree
    if d < 2:
        raise ValueError("the bound needs degree at least 2")
    lifted = tilde_lift(e, l, build_injection_family(d, l, kind, cap))
    return SpectralClaim(e.lam, lifted.lam, max(e.lam, 1 / math.sqrt(d - 1)))


def sampling_distribution(
    g: Game,
    M: BipartiteGraph,
    P: BipartiteGraph,
    famM: InjectionFamily,
    famP: InjectionFamily,
) -> dict[tuple[int, int], Fraction]:
    """Question law of the advice-based description, by direct enumeration.

    Draw ``(x, y) ~ mu``, ``x' ~ N(x)``, ``y' ~ N(y)``, then a uniform pair of
    family members ``(r, s)`` conditioned on ``r(u_{x'}(x)) = s(v_{y'}(y))``.
    Keys use the tilde-lift indexing of outer questions.
    """
    uM, uP = _ordering(M), _ordering(P)
    FM, FP = len(famM.members), len(famP.members)
    out: dict[tuple[int, int], Fraction] = {}
    for x in range(g.x_size):
        for y in range(g.y_size):
            mass = g.mu[x, y]
            if mass == 0:
                continue
            for xp, px in M.transition(x).items():
                for yp, py in P.transition(y).items():
                    kx, ky = uM[xp][x], uP[yp][y]
                    ok = [
                        (p, q)
                        for p, r in enumerate(famM.members)
                        for q, s in enumerate(famP.members)
                        if r[kx] == s[ky]
                    ]
                    w = mass * px * py / len(ok)
                    for p, q in ok:
                        key = (xp * FM + p, yp * FP + q)
                        out[key] = out.get(key, Fraction(0)) + w
    return out
