"""Closed-form dynamics of recursive search with partial diffusion.

Stage lists in this module run innermost-first: ``thetas[0]`` is the overlap
angle of register 1 (the least-significant register) and ``thetas[-1]`` that
of the outermost register m.  Round ``j`` (1-based) amplifies the outermost
register still in play, so it works on ``m - j + 1`` stages.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

BOOST_NONE = "none"
BOOST_AFTER_FIRST = "boost-after-first-round"
BOOST_POLICIES = (BOOST_NONE, BOOST_AFTER_FIRST)

# slack allowed on sin() arguments before arcsin is declared invalid
_ARCSIN_SLACK = 1e-12


class ScheduleError(ValueError):
    """Raised for angles or iterate counts outside the analytic regime."""


def round_half_away(x: float) -> int:
    """Nearest integer, ties away from zero."""
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def is_half_integer(x: float, tol: float = 1e-9) -> bool:
    return abs(abs(x - math.floor(x)) - 0.5) < tol


def _arcsin(v: float) -> float:
    if abs(v) > 1.0 + _ARCSIN_SLACK:
        raise ScheduleError(f"sin argument {v!r} outside [-1, 1]")
    return math.asin(max(-1.0, min(1.0, v)))


def theta_for_uniform_stage(s: int) -> float:
    """Overlap angle of one basis target against the uniform state on ``s`` qubits."""
    if s < 1:
        raise ScheduleError(f"stage size must be >= 1, got {s}")
    return math.asin(2.0 ** (-s / 2.0))


def overlap_angle(psi: np.ndarray, target_index: int) -> float:
    """arcsin |<x|psi>| for a computational-basis target."""
    amp = abs(complex(np.asarray(psi)[target_index]))
    return _arcsin(amp)


def gamma_schedule(thetas: Sequence[float], intermediate_iterates: Sequence[int]) -> list[float]:
    """Recursive rotation angles gamma_1..gamma_m.

    ``intermediate_iterates`` holds t_1..t_{m-1}.  Each gamma is taken on the
    principal branch, so ``0 <= gamma <= pi/4``.
    """
    thetas = list(thetas)
    iterates = list(intermediate_iterates)
    if not thetas:
        raise ScheduleError("need at least one stage")
    if len(iterates) != len(thetas) - 1:
        raise ScheduleError(
            f"expected {len(thetas) - 1} intermediate iterates, got {len(iterates)}")
    for t in iterates:
        if t < 1:
            raise ScheduleError(f"intermediate iterates must be >= 1, got {t}")
    gammas = [thetas[0]]
    for theta, t_prev in zip(thetas[1:], iterates):
        s = math.sin(2.0 * theta) * math.sin(2.0 * t_prev * gammas[-1])
        # the sign of sin(2 t gamma) only picks a rotation direction
        gammas.append(0.5 * _arcsin(abs(s)))
    return gammas


def optimal_final_iterations(gamma: float) -> int:
    if not 0.0 < gamma <= math.pi / 4 + 1e-15:
        raise ScheduleError(f"gamma must lie in (0, pi/4], got {gamma}")
    return max(1, round_half_away(math.pi / (4.0 * gamma) - 0.5))


def boosted_penultimate(gamma: float) -> int:
    """Penultimate iterate that drives sin(2 t gamma) towards one."""
    if not 0.0 < gamma < math.pi / 2:
        raise ScheduleError(f"gamma must lie in (0, pi/2), got {gamma}")
    return max(1, round_half_away(math.pi / (4.0 * gamma)))


def _cos_reduced(angle: float) -> float:
    return math.cos(math.remainder(angle, math.tau))


def stage_success(theta: float, gamma: float, t: int) -> float:
    """Probability of reading the outer register's target after ``t`` iterates."""
    if t < 0:
        raise ScheduleError(f"iterate count must be >= 0, got {t}")
    if abs(gamma - theta) <= 1e-15:
        # single-stage case; also sidesteps 0/0 at theta = pi/4
        return grover_success(theta, t)
    c2g = math.cos(2.0 * gamma)
    if abs(c2g) < 1e-12:
        raise ScheduleError("cos(2 gamma) vanishes; gamma is degenerate at pi/4")
    p = 0.5 * (1.0 - math.cos(2.0 * theta) / c2g * _cos_reduced(2.0 * (2 * t + 1) * gamma))
    return min(1.0, max(0.0, p))


def grover_success(theta: float, t: int) -> float:
    return math.sin((2 * t + 1) * theta) ** 2


@dataclass
class GroverBaseline:
    iterations: int
    oracle_calls: int
    success: float
    reached: bool  # False when the target probability exceeds the Grover peak


def grover_baseline_for_angle(theta: float, p: float, slack: float = 1e-12) -> GroverBaseline:
    """Smallest Grover iteration count whose success reaches ``p``."""
    if not 0.0 < p <= 1.0:
        raise ScheduleError(f"target probability must be in (0, 1], got {p}")
    peak = max(0, round_half_away(math.pi / (4.0 * theta) - 0.5))
    # success is increasing in t up to the peak, so invert it and then
    # walk the candidate down/up to the exact minimal integer
    guess = math.ceil((math.asin(math.sqrt(min(1.0, p))) / theta - 1.0) / 2.0)
    t = min(max(guess, 0), peak)
    while t > 0 and grover_success(theta, t - 1) >= p - slack:
        t -= 1
    while t <= peak and grover_success(theta, t) < p - slack:
        t += 1
    if t <= peak:
        return GroverBaseline(t, t, grover_success(theta, t), True)
    best_t = max((peak - 1, peak, peak + 1), key=lambda u: grover_success(theta, max(u, 0)))
    best_t = max(best_t, 0)
    return GroverBaseline(best_t, best_t, grover_success(theta, best_t), False)


def grover_baseline(n: int, p: float) -> GroverBaseline:
    """Matched-success Grover search over ``n`` qubits with a single target."""
    return grover_baseline_for_angle(math.asin(2.0 ** (-n / 2.0)), p)


@dataclass
class OverheadBounds:
    per_stage_bound: float
    geometric_factor: float
    total_bound: float
    tight_geometric_factor: float


def overhead_bounds(s: int, n: int) -> OverheadBounds:
    """Oracle-overhead bounds for unstructured search with equal stages of ``s`` qubits.

    ``geometric_factor`` uses the loose common ratio 2^(1 - s/2);
    ``tight_geometric_factor`` uses the exact ratio 2^(-s/2) / cos(theta_s).
    """
    if s < 3:
        raise ScheduleError("geometric factor needs s >= 3 (common ratio < 1)")
    per_stage = (1.0 - 2.0 ** (-s)) ** (-n / (2.0 * s))
    geometric = 1.0 / (1.0 - 2.0 ** (1.0 - s / 2.0))
    tight_ratio = 2.0 ** (-s / 2.0) / math.sqrt(1.0 - 2.0 ** (-s))
    return OverheadBounds(per_stage, geometric, per_stage * geometric, 1.0 / (1.0 - tight_ratio))


@dataclass
class RoundPlan:
    """One amplification round over the ``stages`` innermost registers."""
    stages: int
    thetas: list[float]
    iterates: list[int]
    gammas: list[float]
    oracle_calls: int
    success: float
    rounding_tie: bool = False


@dataclass
class SchedulePrediction:
    rounds: list[RoundPlan]
    overall_success: float
    prefix_success: list[float]
    total_oracle_calls: int
    grover: GroverBaseline
    overhead: float
    boost_policy: str = BOOST_NONE
    notes: list[str] = field(default_factory=list)

    @property
    def final_iterates(self) -> tuple[int, ...]:
        return tuple(r.iterates[-1] for r in self.rounds)

    @property
    def round_oracle_calls(self) -> tuple[int, ...]:
        return tuple(r.oracle_calls for r in self.rounds)

    def to_dict(self) -> dict:
        return {
            "boost_policy": self.boost_policy,
            "thetas": self.rounds[0].thetas,
            "gammas": [r.gammas for r in self.rounds],
            "iterates": [r.iterates for r in self.rounds],
            "final_iterates": list(self.final_iterates),
            "round_success": [r.success for r in self.rounds],
            "prefix_success": self.prefix_success,
            "overall_success": self.overall_success,
            "oracle_calls": list(self.round_oracle_calls),
            "total_oracle_calls": self.total_oracle_calls,
            "grover_baseline": asdict(self.grover),
            "overhead": self.overhead,
            "notes": self.notes,
        }


def round_oracle_calls(iterates: Sequence[int]) -> int:
    """Oracle calls of (S_k W_{k-1})^{t_k}: 2^(k-1) * prod t_j."""
    return 2 ** (len(iterates) - 1) * math.prod(iterates)


def plan_round(thetas: Sequence[float], boost: bool = False,
               iterates: Sequence[int] | None = None) -> RoundPlan:
    """Plan a single round; ``thetas`` covers registers 1..k."""
    thetas = list(thetas)
    k = len(thetas)
    tie = False
    if iterates is not None:
        iterates = list(iterates)
        if len(iterates) != k:
            raise ScheduleError(f"round over {k} stages needs {k} iterates, got {len(iterates)}")
        gammas = gamma_schedule(thetas, iterates[:-1])
    else:
        inner = [1] * (k - 1)
        if boost and k >= 2:
            gammas_pre = gamma_schedule(thetas[:-1], inner[:-1])
            inner[-1] = boosted_penultimate(gammas_pre[-1])
        gammas = gamma_schedule(thetas, inner)
        raw = math.pi / (4.0 * gammas[-1]) - 0.5
        tie = is_half_integer(raw)
        iterates = inner + [optimal_final_iterations(gammas[-1])]
    success = stage_success(thetas[-1], gammas[-1], iterates[-1])
    return RoundPlan(k, thetas, iterates, gammas, round_oracle_calls(iterates), success, tie)


def multi_round_plan(thetas: Sequence[float], boost_policy: str = BOOST_NONE,
                     iterate_overrides: Sequence[Sequence[int]] | None = None,
                     n_qubits: int | None = None) -> SchedulePrediction:
    """Plan every round and predict success and oracle cost.

    ``iterate_overrides`` optionally fixes the iterates of each round
    (round j lists t_1..t_{m-j+1}, innermost first).  The Grover baseline is
    matched to the predicted overall success; its overlap is the product of
    the local overlaps (for uniform states ``n_qubits`` gives the same value).
    """
    if boost_policy not in BOOST_POLICIES:
        raise ScheduleError(f"unknown boost policy {boost_policy!r}")
    thetas = list(thetas)
    m = len(thetas)
    if iterate_overrides is not None and len(iterate_overrides) != m:
        raise ScheduleError(f"expected iterates for {m} rounds, got {len(iterate_overrides)}")
    rounds = []
    for j in range(m):
        k = m - j
        boost = boost_policy == BOOST_AFTER_FIRST and j > 0
        its = None if iterate_overrides is None else iterate_overrides[j]
        rounds.append(plan_round(thetas[:k], boost=boost, iterates=its))
    prefix = list(np.cumprod([r.success for r in rounds]))
    overall = float(prefix[-1])
    total_calls = sum(r.oracle_calls for r in rounds)
    if n_qubits is not None:
        theta_global = math.asin(2.0 ** (-n_qubits / 2.0))
    else:
        theta_global = _arcsin(math.prod(math.sin(t) for t in thetas))
    grover = grover_baseline_for_angle(theta_global, overall)
    notes = []
    if any(r.rounding_tie for r in rounds):
        notes.append("final iterate rounding hit an exact half-integer; ties rounded away from zero")
    if not grover.reached:
        notes.append("matched success exceeds the Grover peak; baseline uses the peak")
    return SchedulePrediction(
        rounds=rounds,
        overall_success=overall,
        prefix_success=[float(p) for p in prefix],
        total_oracle_calls=total_calls,
        grover=grover,
        overhead=total_calls / grover.oracle_calls if grover.oracle_calls else math.inf,
        boost_policy=boost_policy,
        notes=notes,
    )


def uniform_thetas(sizes_outer_first: Sequence[int]) -> list[float]:
    """Stage angles (innermost first) for uniform local states."""
    return [theta_for_uniform_stage(s) for s in reversed(list(sizes_outer_first))]


def near_equal_partition(n: int, stages: int) -> list[int]:
    """Split ``n`` qubits into ``stages`` registers, larger ones outermost."""
    if not 1 <= stages <= n:
        raise ScheduleError(f"cannot split {n} qubits into {stages} stages")
    base, extra = divmod(n, stages)
    return [base + 1] * extra + [base] * (stages - extra)
