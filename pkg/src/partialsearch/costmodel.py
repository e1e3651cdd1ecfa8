"""Parametric depth accounting for the recursive scheme against Grover search.

Depths are modelled, not transpiled.  Every constant sits in ``DepthConfig``,
which is echoed into each report so the numbers can be audited.

Model summary (depths are two-qubit-gate layers):

* a multi-controlled X with ``k`` controls costs
    S1 (no ancilla):          1 + s1_quad * (k - 1)^2
    S2 (dirty V-chain):       k <= 2 as S1, else toffoli + s2_slope * (k - 2),
                              provided ``k - 2`` idle qubits exist; otherwise S1
    S3 (one clean ancilla):   k <= 2 as S1, else toffoli + s3_slope * (k - 2)
* a reflection on ``s`` qubits is an MCX with ``s - 1`` controls (a single
  layer for ``s = 1``) plus ``prep_layers`` state-preparation layers on each side;
* diffusions inside one oracle segment are charged sequentially.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from . import schedule as sch

S1, S2, S3 = "S1", "S2", "S3"
SCENARIOS = (S1, S2, S3)


@dataclass(frozen=True)
class DepthConfig:
    s1_quad: float = 5.0
    toffoli: float = 6.0
    s2_slope: float = 8.0
    s3_slope: float = 3.0
    prep_layers: float = 1.0
    single_qubit_reflection: float = 1.0


DEFAULT_CONFIG = DepthConfig()


def mcx_depth(k: int, scenario: str, idle: int | None = None,
              config: DepthConfig = DEFAULT_CONFIG) -> float:
    """Depth of an MCX with ``k`` controls.

    ``idle`` is the number of qubits available as dirty ancillae (S2 only);
    None means unlimited.
    """
    if k < 1:
        raise ValueError("need at least one control")
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    quadratic = 1.0 + config.s1_quad * (k - 1) ** 2
    if scenario == S1 or k <= 2:
        return quadratic
    if scenario == S2:
        if idle is not None and idle < k - 2:
            return quadratic
        return config.toffoli + config.s2_slope * (k - 2)
    return config.toffoli + config.s3_slope * (k - 2)


def reflection_depth(s: int, scenario: str, idle: int | None = None,
                     config: DepthConfig = DEFAULT_CONFIG) -> float:
    """Depth of one diffusion A (I - 2|0><0|) A^dag on ``s`` qubits."""
    core = config.single_qubit_reflection if s == 1 else mcx_depth(s - 1, scenario, idle, config)
    return core + 2 * config.prep_layers


def global_diffusion_depth(n: int, scenario: str, config: DepthConfig = DEFAULT_CONFIG) -> float:
    # the global reflection touches every qubit, so there are no idle ones
    return reflection_depth(n, scenario, idle=0, config=config)


def partial_diffusion_depth(sizes: Sequence[int], register: int, scenario: str,
                            config: DepthConfig = DEFAULT_CONFIG) -> float:
    """``sizes`` outermost-first; ``register`` 1 = innermost."""
    s = sizes[len(sizes) - register]
    return reflection_depth(s, scenario, idle=sum(sizes) - s, config=config)


# -- counting --------------------------------------------------------------

def w_counts(i: int, iterates: Sequence[int]) -> dict[int, int]:
    """Diffusion counts per register inside the cancelled W_i.

    The first and last operators of W_i are S_i, and adjacent copies of
    W_{i-1} around an S_i lose one S_{r} pair per join for every r < i.
    """
    if i == 0:
        return {}
    t = iterates[i - 1]
    inner = w_counts(i - 1, iterates)
    out = {r: 2 * t * c - 2 * (2 * t - 1) for r, c in inner.items()}
    out[i] = 2 * t + 1
    return out


def round_counts(iterates: Sequence[int]) -> dict[int, int]:
    """Diffusion counts in (S_k W_{k-1})^{t_k}, with t_1..t_k innermost first."""
    k = len(iterates)
    t = iterates[-1]
    inner = w_counts(k - 1, iterates)
    out = {r: t * c - 2 * (t - 1) for r, c in inner.items()}
    out[k] = t
    return out


@dataclass
class DiffusionCounts:
    per_round: list[dict[int, int]]

    @property
    def totals(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for r in self.per_round:
            for reg, c in r.items():
                out[reg] = out.get(reg, 0) + c
        return out

    @property
    def prep_applications(self) -> dict[int, int]:
        """A_i applications: two per diffusion (A and A^dag)."""
        return {reg: 2 * c for reg, c in self.totals.items()}


def diffusion_application_counts(plan: sch.SchedulePrediction) -> DiffusionCounts:
    return DiffusionCounts([round_counts(r.iterates) for r in plan.rounds])


def stage_weights(m: int) -> list[float]:
    """A_i weight per extra final-stage iteration (unit intermediates), innermost first.

    One more final iteration adds S_m once and 2^{m-i-1} + 2 copies of S_i
    for i < m; dividing by the 2^{m-1} oracle calls it buys gives weights
    approaching 1/2^{m-i}.
    """
    base = [1] * (m - 1)
    one, two = round_counts(base + [1]), round_counts(base + [2])
    return [(two[r] - one[r]) / 2 ** (m - 1) for r in range(1, m + 1)]


# -- reports ---------------------------------------------------------------

@dataclass
class CostReport:
    n: int
    sizes: list[int]
    scenario: str
    recursive_calls: int
    grover_calls: int
    grover_success: float
    overall_success: float
    diffusion_counts: dict[int, int]
    recursive_diffusion_depth: float
    grover_diffusion_depth: float
    global_diffusion_depth: float
    break_even: float
    config: DepthConfig = field(default_factory=DepthConfig)

    @property
    def overhead(self) -> float:
        # tiny instances can be matched by Grover with no oracle call at all
        if self.grover_calls == 0:
            return math.inf
        return self.recursive_calls / self.grover_calls

    @property
    def failure_probability(self) -> float:
        return 1.0 - self.overall_success

    def relative_depth(self, oracle_multiplier: float) -> float:
        return relative_total_depth_from(self, oracle_multiplier)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["diffusion_counts"] = {str(k): v for k, v in self.diffusion_counts.items()}
        d["overhead"] = self.overhead
        d["failure_probability"] = self.failure_probability
        for key in ("overhead", "break_even"):
            d[key] = None if math.isinf(d[key]) else d[key]
        return d


def break_even_from(rec_calls: int, grover_calls: int, rec_diff: float, grover_diff: float,
                    global_depth: float) -> float:
    """Oracle/global-diffusion depth ratio where both total depths match; inf if never."""
    extra_calls = rec_calls - grover_calls
    if extra_calls <= 0:
        return math.inf
    return (grover_diff - rec_diff) / (extra_calls * global_depth)


def cost_report(sizes: Sequence[int], scenario: str, boost_policy: str = sch.BOOST_NONE,
                config: DepthConfig = DEFAULT_CONFIG) -> CostReport:
    """Costs for uniform local states on a partition given outermost-first."""
    sizes = list(sizes)
    n = sum(sizes)
    plan = sch.multi_round_plan(sch.uniform_thetas(sizes), boost_policy, n_qubits=n)
    counts = diffusion_application_counts(plan).totals
    rec_diff = sum(c * partial_diffusion_depth(sizes, reg, scenario, config) for reg, c in counts.items())
    g = global_diffusion_depth(n, scenario, config)
    grover_diff = plan.grover.iterations * g
    be = break_even_from(plan.total_oracle_calls, plan.grover.oracle_calls, rec_diff, grover_diff, g)
    return CostReport(n, sizes, scenario, plan.total_oracle_calls, plan.grover.oracle_calls,
                      plan.grover.success, plan.overall_success, counts, rec_diff, grover_diff,
                      g, be, config)


def break_even_ratio(n: int, stages: int, scenario: str,
                     config: DepthConfig = DEFAULT_CONFIG) -> float:
    return cost_report(sch.near_equal_partition(n, stages), scenario, config=config).break_even


def relative_total_depth_from(rep: CostReport, oracle_multiplier: float) -> float:
    if oracle_multiplier <= 0:
        raise ValueError("oracle multiplier must be positive")
    d_o = oracle_multiplier * rep.global_diffusion_depth
    rec = rep.recursive_calls * d_o + rep.recursive_diffusion_depth
    grv = rep.grover_calls * d_o + rep.grover_diffusion_depth
    return rec / grv if grv > 0 else math.inf


def relative_total_depth(n: int, stages: int, oracle_multiplier: float, scenario: str = S3,
                         config: DepthConfig = DEFAULT_CONFIG) -> float:
    rep = cost_report(sch.near_equal_partition(n, stages), scenario, config=config)
    return relative_total_depth_from(rep, oracle_multiplier)


SWEEP_COLUMNS = ["n", "stages", "scenario", "oracle_multiplier", "recursive_calls",
                 "grover_calls", "overhead", "break_even", "relative_depth",
                 "relative_overhead", "failure_probability"]


def sweep(ns: Iterable[int], stages: Iterable[int], scenarios: Iterable[str] = SCENARIOS,
          multipliers: Iterable[float] = (1.0, 5.0, 10.0),
          config: DepthConfig = DEFAULT_CONFIG) -> list[dict]:
    rows = []
    multipliers = list(multipliers)
    stages = list(stages)
    scenarios = list(scenarios)
    for n in ns:
        for k in stages:
            sizes = sch.near_equal_partition(n, k)
            for sc in scenarios:
                rep = cost_report(sizes, sc, config=config)
                for mult in multipliers:
                    rows.append({
                        "n": n, "stages": k, "scenario": sc, "oracle_multiplier": mult,
                        "recursive_calls": rep.recursive_calls, "grover_calls": rep.grover_calls,
                        "overhead": rep.overhead, "break_even": rep.break_even,
                        "relative_depth": rep.relative_depth(mult),
                        "relative_overhead": rep.overhead - 1.0,
                        "failure_probability": rep.failure_probability,
                    })
    return rows


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str] = SWEEP_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in columns})
    return buf.getvalue()
