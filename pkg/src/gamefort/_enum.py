"""Exact maximisation of multilinear forms over per-question choice vectors.

Every value-type quantity in the package reduces to the same problem: a
weight tensor ``K`` with axes ``(a_1, ..., a_k, x_1, ..., x_k)`` holding
integers, and for each player a choice of one answer (or abstention) per
question.  The objective is ``sum_x K[p_1(x_1), ..., p_k(x_k), x_1, ..., x_k]``
with abstaining coordinates contributing zero.

Players ``1..k-1`` are enumerated exhaustively; the last player is resolved by
an exact per-question best response, which is what the exhaustive search over
its assignments would find since the objective is separable in its questions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_CAP = 10**8
CHUNK = 1 << 15
_INT64_SAFE = 1 << 62


class InstanceTooLarge(ValueError):
    """Raised when an enumeration would exceed the configured cap."""


@dataclass(frozen=True)
class Maximum:
    value: int
    # one tuple per player; entries are answer indices, ``None`` means abstain
    choices: tuple[tuple[int | None, ...], ...]


def int_array(values) -> np.ndarray:
    """Pack Python ints into int64 when safe, otherwise keep an object array."""
    arr = np.asarray(values, dtype=object)
    total = int(np.abs(arr).sum()) if arr.size else 0
    if total < _INT64_SAFE:
        return arr.astype(np.int64)
    return arr


def choice_count(n_answers: int, n_questions: int, abstain: bool) -> int:
    return (n_answers + int(abstain)) ** n_questions


def check_cap(count: int, cap: int | None, what: str) -> None:
    if cap is not None and count > cap:
        raise InstanceTooLarge(
            f"instance too large: {what} needs {count} enumerated assignments (cap {cap})"
        )


def assignments(n_choices: int, n_questions: int, start: int, stop: int) -> np.ndarray:
    """Rows ``start..stop-1`` of the lexicographic list of all assignments."""
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((stop - start, n_questions), dtype=np.int64)
    for q in range(n_questions - 1, -1, -1):
        out[:, q] = idx % n_choices
        idx //= n_choices
    return out


def _extend(K: np.ndarray, k: int, abstain: tuple[bool, ...]) -> np.ndarray:
    """Append a zero answer slice for every abstaining player."""
    for i in range(k):
        if abstain[i]:
            shape = list(K.shape)
            shape[i] = 1
            K = np.concatenate([K, np.zeros(shape, dtype=K.dtype)], axis=i)
    return K


def _decode(row, n_answers: int) -> tuple[int | None, ...]:
    return tuple(None if int(c) == n_answers else int(c) for c in row)


def maximize(
    K: np.ndarray,
    abstain: tuple[bool, ...],
    cap: int | None = DEFAULT_CAP,
) -> Maximum:
    """Maximise the multilinear form encoded by ``K`` over vertex choices.

    ``abstain[i]`` allows player ``i`` to abstain on any question.  The player
    with the most assignments is the one resolved by best response, so the
    enumerated work is the product of the remaining players' counts.
    """
    k = K.ndim // 2
    answers = K.shape[:k]
    questions = K.shape[k:]
    counts = [choice_count(answers[i], questions[i], abstain[i]) for i in range(k)]
    last = max(range(k), key=lambda i: (counts[i], i))
    order = [i for i in range(k) if i != last] + [last]
    check_cap(math.prod(counts[i] for i in order[:-1]), cap, "value enumeration")

    perm = order + [k + i for i in order]
    Kp = _extend(np.transpose(K, perm), k, tuple(abstain[i] for i in order))
    best = _search(Kp, [abstain[i] for i in order])
    value, picks = best
    choices: list = [None] * k
    for slot, player in enumerate(order):
        choices[player] = _decode(picks[slot], answers[player])
    return Maximum(value=value, choices=tuple(choices))


def _search(K: np.ndarray, abstain: list[bool]):
    k = K.ndim // 2
    if k == 1:
        col = K.max(axis=0)
        arg = K.argmax(axis=0)
        return int(col.sum()), [tuple(int(a) for a in arg)]
    if k == 2:
        return _search_pair(K, abstain)
    n_choice, n_q = K.shape[0], K.shape[k]
    best = None
    for start in range(n_choice**n_q):
        row = assignments(n_choice, n_q, start, start + 1)[0]
        sub = sum(
            K[(row[q],) + (slice(None),) * (k - 1) + (q,)] for q in range(n_q)
        )
        val, picks = _search(sub, abstain[1:])
        if best is None or val > best[0]:
            best = (val, [tuple(int(c) for c in row)] + picks)
    return best


def _search_pair(K: np.ndarray, abstain: list[bool]):
    n_choice, n_b = K.shape[0], K.shape[1]
    n_x, n_y = K.shape[2], K.shape[3]
    total = n_choice**n_x
    # K[p, b, x, y] -> per x a (n_choice, n_b, n_y) slab
    slabs = [np.ascontiguousarray(K[:, :, x, :]) for x in range(n_x)]
    best_val = None
    best_row = None
    for start in range(0, total, CHUNK):
        stop = min(total, start + CHUNK)
        P = assignments(n_choice, n_x, start, stop)
        S = slabs[0][P[:, 0]]
        for x in range(1, n_x):
            S = S + slabs[x][P[:, x]]
        per_y = S.max(axis=1)  # (N, n_y)
        totals = per_y.sum(axis=1)
        i = int(np.argmax(totals))
        if best_val is None or totals[i] > best_val:
            best_val = int(totals[i])
            best_row = P[i]
    S = sum(slabs[x][best_row[x]] for x in range(n_x))
    response = tuple(int(b) for b in np.argmax(S, axis=0))
    return best_val, [tuple(int(c) for c in best_row), response]


def vertex_table(K: np.ndarray, n_choice: int, n_q: int, start: int, stop: int):
    """Per-assignment coefficient tables ``sum_q K[p(q), ..., q, ...]``.

    ``K`` has axes ``(choice, other, q, other_q)``; returns the assignments and
    an array of shape ``(N, other, other_q)``.
    """
    P = assignments(n_choice, n_q, start, stop)
    S = K[P[:, 0], :, 0, :]
    for q in range(1, n_q):
        S = S + K[P[:, q], :, q, :]
    return P, S
