"""JSON readers and writers for games and bipartite graphs.

Two-player game::

    {"x_size": 2, "y_size": 2, "a_size": 2, "b_size": 2,
     "mu": [[x, y, num, den], ...],          # omitted pairs have mass 0
     "predicate": [[a, b, x, y], ...],       # winning tuples
     "predicate_weights": [[a, b, x, y, num, den], ...]}   # optional

``predicate_weights`` carries fractional win probabilities (outer games of a
concatenation); when present, ``predicate`` lists the entries equal to 1 and
``predicate_weights`` the entries strictly between 0 and 1.

k-player games use ``question_sizes`` and ``answer_sizes`` lists, ``mu``
entries ``[x_1, ..., x_k, num, den]`` and predicate tuples
``[a_1, ..., a_k, x_1, ..., x_k]``.

Graph::

    {"left_size": 4, "right_size": 4, "edges": [[l, r], ...], "lambda": 0.7}
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from gamefort.expanders import BipartiteExpander, BipartiteGraph, certify
from gamefort.games import Game, KPlayerGame


class FormatError(ValueError):
    pass


def _need(data: dict, *keys):
    missing = [k for k in keys if k not in data]
    if missing:
        raise FormatError(f"missing field(s): {', '.join(missing)}")


def _fraction(num, den) -> Fraction:
    if int(den) <= 0:
        raise FormatError("denominators must be positive")
    return Fraction(int(num), int(den))


def _tensor_from(data: dict, questions: tuple[int, ...], answers: tuple[int, ...]):
    k = len(questions)
    mu = np.full(questions, Fraction(0), dtype=object)
    for entry in data["mu"]:
        if len(entry) != k + 2:
            raise FormatError(f"mu entry {entry} should have {k + 2} items")
        idx = tuple(int(v) for v in entry[:k])
        mu[idx] += _fraction(*entry[k:])
    weights = data.get("predicate_weights") or []
    shape = answers + questions
    if weights:
        pred = np.full(shape, Fraction(0), dtype=object)
        one = Fraction(1)
    else:
        pred = np.zeros(shape, dtype=bool)
        one = True
    try:
        for entry in data["predicate"]:
            if len(entry) != 2 * k:
                raise FormatError(f"predicate entry {entry} should have {2 * k} items")
            pred[tuple(int(v) for v in entry)] = one
        for entry in weights:
            pred[tuple(int(v) for v in entry[: 2 * k])] = _fraction(*entry[2 * k :])
    except IndexError as exc:
        raise FormatError(f"index out of range: {exc}") from None
    return mu, pred


def _tensor_entries(mu: np.ndarray, pred: np.ndarray) -> dict:
    mu_out = [list(map(int, idx)) + [v.numerator, v.denominator] for idx, v in np.ndenumerate(mu) if v != 0]
    wins, weights = [], []
    for idx, v in np.ndenumerate(pred):
        idx = list(map(int, idx))
        if v == 1:
            wins.append(idx)
        elif v != 0:
            v = Fraction(v)
            weights.append(idx + [v.numerator, v.denominator])
    out = {"mu": mu_out, "predicate": wins}
    if weights:
        out["predicate_weights"] = weights
    return out


def game_from_dict(data: dict) -> Game:
    _need(data, "x_size", "y_size", "a_size", "b_size", "mu", "predicate")
    q = (int(data["x_size"]), int(data["y_size"]))
    a = (int(data["a_size"]), int(data["b_size"]))
    try:
        mu, pred = _tensor_from(data, q, a)
    except IndexError as exc:
        raise FormatError(f"index out of range: {exc}") from None
    return Game(q[0], q[1], a[0], a[1], mu, pred)


def game_to_dict(g: Game) -> dict:
    out = {"x_size": g.x_size, "y_size": g.y_size, "a_size": g.a_size, "b_size": g.b_size}
    out.update(_tensor_entries(g.mu, g.predicate))
    return out


def kgame_from_dict(data: dict) -> KPlayerGame:
    _need(data, "question_sizes", "answer_sizes", "mu", "predicate")
    q = tuple(int(v) for v in data["question_sizes"])
    a = tuple(int(v) for v in data["answer_sizes"])
    if len(q) != len(a) or len(q) < 2:
        raise FormatError("question_sizes and answer_sizes need the same length >= 2")
    try:
        mu, pred = _tensor_from(data, q, a)
    except IndexError as exc:
        raise FormatError(f"index out of range: {exc}") from None
    return KPlayerGame(q, a, mu, pred)


def kgame_to_dict(g: KPlayerGame) -> dict:
    out = {"question_sizes": list(g.question_sizes), "answer_sizes": list(g.answer_sizes)}
    out.update(_tensor_entries(g.mu, g.predicate))
    return out


def graph_from_dict(data: dict) -> BipartiteGraph:
    _need(data, "left_size", "right_size", "edges")
    return BipartiteGraph(int(data["left_size"]), int(data["right_size"]), tuple(tuple(e) for e in data["edges"]))


def graph_to_dict(g: BipartiteGraph | BipartiteExpander) -> dict:
    lam = g.lam if isinstance(g, BipartiteExpander) else None
    graph = g.graph if isinstance(g, BipartiteExpander) else g
    out = {
        "left_size": graph.left_size,
        "right_size": graph.right_size,
        "edges": [list(e) for e in graph.edges],
    }
    if lam is not None:
        out["lambda"] = lam
    return out


def expander_from_dict(data: dict) -> BipartiteExpander:
    """Load a graph and always recompute its spectral certificate."""
    return certify(graph_from_dict(data))


def dumps(data: dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":")) + "\n"


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_json(path, data: dict) -> None:
    Path(path).write_text(dumps(data), encoding="utf-8")


def load_game(path) -> Game:
    return game_from_dict(read_json(path))


def load_any_game(path) -> Game | KPlayerGame:
    data = read_json(path)
    return kgame_from_dict(data) if "question_sizes" in data else game_from_dict(data)


def save_game(path, g: Game, extra: dict | None = None) -> None:
    data = game_to_dict(g)
    if extra:
        data["provenance"] = extra
    write_json(path, data)


def load_graph(path) -> BipartiteExpander:
    return expander_from_dict(read_json(path))


def save_graph(path, g) -> None:
    write_json(path, graph_to_dict(g))
