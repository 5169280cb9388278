"""Parallel repetition checks, gap-amplification planning and the end-to-end pipeline."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from gamefort import io
from gamefort._enum import DEFAULT_CAP, InstanceTooLarge
from gamefort.bireg import biregularize, size_bounds
from gamefort.concat import (
    ConcatenatedGame,
    FortificationReport,
    concatenate,
    fortification_violation,
)
from gamefort.expanders import (
    BipartiteExpander,
    ExpanderNotFound,
    random_biregular_expander,
)
from gamefort.games import Game, classical_value, is_biregular, tensor, tensor_power
from gamefort.ordered import ordered_fortify


def _certify_hypothesis(cg: ConcatenatedGame, epsilon, delta, cap) -> tuple[bool, str]:
    try:
        rep = fortification_violation(cg, epsilon, delta, cap=cap)
    except InstanceTooLarge as exc:
        return False, f"not certified ({exc})"
    if rep.passed:
        return True, f"certified (max violation {rep.max_violation} <= {rep.delta})"
    return False, f"not certified (max violation {rep.max_violation} > {rep.delta})"


@dataclass
class RepetitionReport:
    m: int
    epsilon: Fraction
    delta: Fraction
    inner_value: Fraction
    exact: Fraction | None
    bound: Fraction
    eta: Fraction
    hypothesis_certified: bool
    hypothesis_note: str
    steps: list = field(default_factory=list)

    @property
    def margin(self) -> Fraction | None:
        return None if self.exact is None else self.bound - self.exact

    @property
    def holds(self) -> bool | None:
        return None if self.exact is None else self.exact <= self.bound

    @property
    def passed(self) -> bool:
        """False only when a certified hypothesis meets a failed inequality."""
        return self.holds is not False or not self.hypothesis_certified

    def lines(self) -> list[str]:
        out = [
            f"m: {self.m}",
            f"epsilon: {self.epsilon}",
            f"delta: {self.delta}",
            f"inner_value: {self.inner_value}",
            f"eta: {self.eta}",
            f"bound: {self.bound}",
            f"exact_value: {'not computed (cap)' if self.exact is None else self.exact}",
            f"margin: {self.margin}",
            f"inequality_holds: {self.holds}",
            f"hypothesis: {self.hypothesis_note}",
        ]
        if not self.hypothesis_certified:
            out.append("warning: fortification hypothesis uncertified, bound is not guaranteed")
        for s in self.steps:
            out.extend("  " + line for line in s.lines())
        return out

    def render(self) -> str:
        return "\n".join(self.lines())


def repetition_bound_check(
    cg: ConcatenatedGame,
    m: int,
    epsilon,
    delta,
    cap: int | None = DEFAULT_CAP,
    steps: bool = False,
) -> RepetitionReport:
    """Compare ``val(G'^m)`` with ``(val(G)+eps)^m + delta (m-1) |Sigma_G|^(m-1)``."""
    if m < 1:
        raise ValueError("m must be positive")
    eps, dl = Fraction(epsilon), Fraction(delta)
    val_g = classical_value(cg.inner, cap=cap)
    sigma = cg.inner.alphabet_size
    eta = dl * (m - 1) * sigma ** (m - 1)
    bound = (val_g + eps) ** m + eta
    ok, note = _certify_hypothesis(cg, eps, dl, cap)
    try:
        exact = classical_value(tensor_power(cg.outer, m, cap=cap), cap=cap)
    except InstanceTooLarge as exc:
        exact, note = None, note + f"; exact value skipped ({exc})"
    report = RepetitionReport(m, eps, dl, val_g, exact, bound, eta, ok, note)
    if steps and m >= 2 and exact is not None:
        report.steps = [step_bound_check([cg] * t, eps, dl, cap) for t in range(2, m + 1)]
    return report


@dataclass
class StepReport:
    t: int
    lhs: Fraction
    previous: Fraction
    inner_value: Fraction
    additive: Fraction
    rhs: Fraction
    hypothesis_certified: bool
    hypothesis_note: str

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs

    @property
    def passed(self) -> bool:
        return self.holds or not self.hypothesis_certified

    def lines(self) -> list[str]:
        return [
            f"step t={self.t}: lhs {self.lhs} <= ({self.inner_value} + eps) * {self.previous} + {self.additive} = {self.rhs}: {self.holds}",
            f"hypothesis: {self.hypothesis_note}",
        ]


def step_bound_check(cgs: Sequence[ConcatenatedGame], epsilon, delta, cap: int | None = DEFAULT_CAP) -> StepReport:
    """One step of the product argument: peel off the last (fortified) game."""
    if not cgs:
        raise ValueError("need at least one game")
    eps, dl = Fraction(epsilon), Fraction(delta)
    t = len(cgs)
    ok, note = _certify_hypothesis(cgs[-1], eps, dl, cap)
    previous = Fraction(1)
    prod = None
    for cg in cgs[:-1]:
        prod = cg.outer if prod is None else tensor(prod, cg.outer, cap=cap)
    if prod is not None:
        previous = classical_value(prod, cap=cap)
    full = cgs[-1].outer if prod is None else tensor(prod, cgs[-1].outer, cap=cap)
    lhs = classical_value(full, cap=cap)
    val_t = classical_value(cgs[-1].inner, cap=cap)
    additive = dl * math.prod(cg.inner.alphabet_size for cg in cgs[:-1])
    rhs = (val_t + eps) * previous + additive
    return StepReport(t, lhs, previous, val_t, additive, rhs, ok, note)


@dataclass(frozen=True)
class AmplificationPlan:
    sigma_g: int
    tau: Fraction
    beta: Fraction
    epsilon: Fraction
    m: int
    delta: Fraction
    lambda_target: float
    x_size: int | None = None
    degree: int | None = None

    @property
    def soundness_term(self) -> Fraction:
        return (1 - self.tau + self.epsilon) ** self.m

    @property
    def error_term(self) -> Fraction:
        return self.delta * (self.m - 1) * self.sigma_g ** (self.m - 1)

    def lines(self) -> list[str]:
        out = [
            f"sigma_g: {self.sigma_g}",
            f"tau: {self.tau}",
            f"beta: {self.beta}",
            f"epsilon: {self.epsilon}",
            f"m: {self.m}",
            f"delta: {self.delta}",
            f"soundness_term: {self.soundness_term} <= {self.beta / 2}: {self.soundness_term <= self.beta / 2}",
            f"error_term: {self.error_term} <= {self.beta / 2}: {self.error_term <= self.beta / 2}",
            f"lambda_target: {self.lambda_target}",
        ]
        if self.degree is not None:
            out.append(f"expander_degree_request: {self.degree}")
            out.append(f"predicted_alphabet: |Sigma_G|^(D*m) = {self.sigma_g}^{self.degree * self.m}")
        if self.x_size is not None:
            out.append(f"predicted_questions: {self.x_size}^{self.m} = {self.x_size ** self.m}")
        return out

    def render(self) -> str:
        return "\n".join(self.lines())


def minimal_rounds(tau: Fraction, beta: Fraction) -> int:
    """Smallest ``m`` with ``(1 - tau/2)^m <= beta/2``."""
    base, goal = 1 - tau / 2, beta / 2
    m, acc = 1, base
    while acc > goal:
        m += 1
        acc *= base
    return m


def classical_lambda_target(epsilon, delta) -> float:
    return float(epsilon) / 2 * math.sqrt(float(delta) / 2)


def quantum_lambda_target(epsilon, delta) -> float:
    return float(Fraction(epsilon) ** 2 * Fraction(delta) / 56)


def gap_amplification_plan(sigma_g: int, tau, beta, x_size: int | None = None) -> AmplificationPlan:
    tau, beta = Fraction(tau), Fraction(beta)
    if not (0 < tau < 1 and 0 < beta < 1):
        raise ValueError("tau and beta must lie in (0, 1)")
    if sigma_g < 1:
        raise ValueError("alphabet size must be positive")
    eps = tau / 2
    m = minimal_rounds(tau, beta)
    delta = Fraction(1) if m == 1 else (beta / 2) / ((m - 1) * sigma_g ** (m - 1))
    lam = classical_lambda_target(eps, delta)
    # a random d-regular graph has lam close to 2 sqrt(d-1)/d, so ask for d ~ 4/lam^2
    degree = math.ceil(4 / lam**2) if lam > 0 else None
    if x_size is not None and degree is not None:
        degree = min(degree, x_size)
    return AmplificationPlan(sigma_g, tau, beta, eps, m, delta, lam, x_size, degree)


# ---------------------------------------------------------------------------
# pipeline


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"stage {stage}: {exc}")
        self.stage = stage
        self.cause = exc


def _sha256(data: str) -> str:
    return hashlib.sha256(data.encode("utf-8")).hexdigest()


def find_expander(n: int, target: float, seed: int, simple: bool = False, max_degree: int | None = None) -> BipartiteExpander:
    """Smallest degree whose seeded random union meets ``target`` (the complete graph always does)."""
    top = n if max_degree is None else min(n, max_degree)
    for d in range(1, top + 1):
        try:
            return random_biregular_expander(n, d, target, seed=seed, simple=simple)
        except ExpanderNotFound:
            continue
    raise ExpanderNotFound(f"no degree <= {top} on {n} vertices reaches lambda <= {target}")


@dataclass
class PipelineResult:
    files: dict[str, Path]
    stages: list[dict]
    passed: bool
    certification: FortificationReport | None = None
    repetition: RepetitionReport | None = None


def run_pipeline(
    game: Game,
    out_dir,
    tau,
    epsilon,
    delta,
    seed: int = 0,
    cap: int | None = DEFAULT_CAP,
    ordered: bool = False,
    l: int | None = None,
    family: str = "full",
    quantum_target: bool = False,
    certify_fortification: bool = True,
    repeat_m: int | None = 2,
    source: str = "game",
) -> PipelineResult:
    """Biregularize, pick expanders, concatenate, then optionally certify and repeat.

    Every intermediate object is written to ``out_dir`` together with a
    ``manifest.txt`` listing hashes, parameters and the claim each stage relies
    on.  Nothing time-dependent is recorded, so reruns are byte-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tau, eps, dl = Fraction(tau), Fraction(epsilon), Fraction(delta)
    stages: list[dict] = []
    files: dict[str, Path] = {}

    def emit(name: str, text: str) -> str:
        path = out / name
        path.write_text(text, encoding="utf-8")
        files[name] = path
        return _sha256(text)

    def stage(name, fn):
        try:
            return fn()
        except Exception as exc:  # re-raised with the stage name attached
            raise StageError(name, exc) from exc

    input_hash = emit("00_input.json", io.dumps(io.game_to_dict(game)))

    # biregularize
    def do_bireg():
        if is_biregular(game):
            return game, {"skipped": "already biregular"}
        res, quant = biregularize(game, tau, cap=cap)
        bx, by = size_bounds(game, tau)
        return res.game, {"q": quant.q, "null_mass": quant.null_mass, "size_bound_x": bx, "size_bound_y": by}

    inner, info = stage("biregularize", do_bireg)
    h = emit("01_biregular.json", io.dumps(io.game_to_dict(inner)))
    stages.append({"stage": "biregularize", "input": input_hash, "output": h,
                   "params": {"tau": tau, **info},
                   "claim": "biregularization keeps val(G) <= val(G_int) <= val(G) + tau"})

    # expanders
    target = quantum_lambda_target(eps, dl) if quantum_target else classical_lambda_target(eps, dl)

    def do_expanders():
        simple = ordered
        M = find_expander(inner.x_size, target, seed, simple)
        P = find_expander(inner.y_size, target, seed + 1, simple)
        return M, P

    M, P = stage("expanders", do_expanders)
    hM = emit("02_left_graph.json", io.dumps(io.graph_to_dict(M)))
    hP = emit("03_right_graph.json", io.dumps(io.graph_to_dict(P)))
    stages.append({"stage": "expanders", "input": h, "output": f"{hM} {hP}",
                   "params": {"lambda_target": target, "target_kind": "quantum" if quantum_target else "classical",
                              "seed_left": seed, "seed_right": seed + 1,
                              "degree_left": M.degree, "degree_right": P.degree,
                              "lambda_left": M.lam, "lambda_right": P.lam,
                              "complete_graph_only": M.degree == inner.x_size and P.degree == inner.y_size},
                   "claim": "lambda <= (eps/2) sqrt(delta/2) gives weak fortification"
                   if not quantum_target else "lambda <= eps^2 delta / 56 gives weak fortification against entangled players"})

    # concatenate
    def do_concat():
        if ordered:
            return ordered_fortify(inner, M, P, l=l, kind=family, cap=cap)
        return concatenate(M, inner, P, cap=cap)

    cg = stage("concatenate", do_concat)
    outer = stage("concatenate", lambda: cg.outer)
    hO = emit("04_outer.json", io.dumps(io.game_to_dict(outer)))
    stages.append({"stage": "ordered-fortify" if ordered else "concatenate", "input": f"{h} {hM} {hP}", "output": hO,
                   "params": {"outer_questions": f"{outer.x_size}x{outer.y_size}",
                              "outer_answers": f"{outer.a_size}x{outer.b_size}",
                              **({"l": cg.inner.x_size // inner.x_size, "family": family} if ordered else {})},
                   "claim": "concatenation preserves the classical value"})

    passed = True
    cert = None
    if certify_fortification:
        cert = stage("certify", lambda: fortification_violation(cg, eps, dl, cap=cap))
        hc = emit("05_fortification.txt", cert.render() + "\n")
        passed &= cert.passed
        stages.append({"stage": "certify", "input": hO, "output": hc, "params": {"epsilon": eps, "delta": dl},
                       "claim": "weak fortification: val(f,g) <= (val(G)+eps) gamma + delta"})

    rep = None
    if repeat_m:
        rep = stage("repeat", lambda: repetition_bound_check(cg, repeat_m, eps, dl, cap=cap))
        hr = emit("06_repetition.txt", rep.render() + "\n")
        passed &= bool(rep.holds is not False)
        stages.append({"stage": "repeat", "input": hO, "output": hr, "params": {"m": repeat_m},
                       "claim": "val(G'^m) <= (val(G)+eps)^m + delta (m-1) |Sigma_G|^(m-1)"})

    lines = [f"source: {source}", f"seed: {seed}", f"cap: {cap}", f"passed: {passed}"]
    for s in stages:
        lines.append(f"[{s['stage']}]")
        lines.append(f"  input_sha256: {s['input']}")
        lines.append(f"  output_sha256: {s['output']}")
        for k, v in s["params"].items():
            lines.append(f"  {k}: {v}")
        lines.append(f"  relies_on: {s['claim']}")
    emit("manifest.txt", "\n".join(lines) + "\n")
    return PipelineResult(files, stages, passed, cert, rep)
