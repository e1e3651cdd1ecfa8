"""Recursive search driver: operator expansion, rounds, sampling and exact expectation."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import schedule as sch
from .statevector import (
    OpCounter,
    QuantumState,
    RegisterPartition,
    StateError,
    apply_oracle,
    apply_partial_diffusion,
    as_local_state,
    collapse,
    format_outcomes,
    measure_registers,
    outcome_distribution,
    sample_outcome,
    prepare_product_state,
    probability_of_prefix,
    reinitialize_registers,
    target_index,
    uniform_local,
)

SAMPLING = "sampling"
EXACT = "exact-expectation"
MODES = (SAMPLING, EXACT)
RANK_TOL = 1e-8


class SearchError(ValueError):
    pass


# -- operator sequences ----------------------------------------------------

@dataclass(frozen=True)
class Op:
    kind: str  # "oracle" or "diffusion"
    register: int = 0

    def __repr__(self):
        return "O" if self.kind == "oracle" else f"S{self.register}"


ORACLE = Op("oracle")


def diffusion(i: int) -> Op:
    return Op("diffusion", i)


@dataclass
class OperatorSequence:
    """Primitive operators in application (time) order."""
    ops: list[Op]

    @property
    def oracle_count(self) -> int:
        return sum(op.kind == "oracle" for op in self.ops)

    @property
    def diffusion_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for op in self.ops:
            if op.kind == "diffusion":
                counts[op.register] = counts.get(op.register, 0) + 1
        return counts

    def __len__(self):
        return len(self.ops)


def cancel_diffusions(ops: Sequence[Op]) -> list[Op]:
    """Drop diffusion pairs that meet once commuted past other diffusions.

    Diffusions on distinct registers commute and each squares to the
    identity, so between two oracle calls only registers hit an odd number of
    times survive.  Survivors keep the position of their last occurrence.
    """
    out: list[Op] = []
    segment: list[Op] = []

    def flush():
        parity: dict[int, int] = {}
        for op in segment:
            parity[op.register] = parity.get(op.register, 0) ^ 1
        last = {op.register: k for k, op in enumerate(segment)}
        keep = sorted((k, r) for r, k in last.items() if parity[r])
        out.extend(diffusion(r) for _, r in keep)
        segment.clear()

    for op in ops:
        if op.kind == "oracle":
            flush()
            out.append(op)
        else:
            segment.append(op)
    flush()
    return out


def _w_ops(i: int, iterates: Sequence[int]) -> list[Op]:
    if i == 0:
        return [ORACLE]
    inner = _w_ops(i - 1, iterates)
    s = diffusion(i)
    t = iterates[i - 1]
    # time order of (S W)^t S (W S)^t  ==  S (W S)^(2t)
    ops = [s]
    for _ in range(2 * t):
        ops.extend(inner)
        ops.append(s)
    return ops


def expand_w(i: int, iterates: Sequence[int], cancel: bool = True) -> OperatorSequence:
    """Expand the reflection W_i; ``iterates`` holds t_1..t_i."""
    if i < 0:
        raise SearchError("stage index must be >= 0")
    if len(iterates) < i or any(t < 1 for t in iterates[:i]):
        raise SearchError(f"need iterates t_1..t_{i} >= 1, got {list(iterates)}")
    ops = _w_ops(i, iterates)
    return OperatorSequence(cancel_diffusions(ops) if cancel else ops)


def expand_round(k: int, iterates: Sequence[int], cancel: bool = True) -> OperatorSequence:
    """Expand (S_k W_{k-1})^{t_k}; ``iterates`` holds t_1..t_k."""
    if k < 1 or len(iterates) != k:
        raise SearchError(f"round over {k} stages needs {k} iterates, got {list(iterates)}")
    if any(t < 0 for t in iterates) or any(t < 1 for t in iterates[:-1]):
        raise SearchError(f"invalid iterates {list(iterates)}")
    inner = _w_ops(k - 1, iterates)
    ops: list[Op] = []
    for _ in range(iterates[-1]):
        ops.extend(inner)
        ops.append(diffusion(k))
    return OperatorSequence(cancel_diffusions(ops) if cancel else ops)


# -- search specification -------------------------------------------------

@dataclass
class SearchSpec:
    """Everything needed to run the search.

    ``locals_`` and ``partition.sizes`` are ordered outermost-first.
    ``iterates`` is None for the analytic schedule, or one list per round
    with that round's t_1..t_k (innermost first).
    """
    partition: RegisterPartition
    target: str
    locals_: list[np.ndarray]
    iterates: list[list[int]] | None = None
    shots: int = 1000
    seed: int = 0
    mode: str = SAMPLING
    boost_policy: str = sch.BOOST_NONE
    cancel: bool = True

    def __post_init__(self):
        p = self.partition
        target_index(p, self.target)
        if len(self.locals_) != p.m:
            raise SearchError(f"expected {p.m} local states, got {len(self.locals_)}")
        self.locals_ = [as_local_state(psi, s) for psi, s in zip(self.locals_, p.sizes)]
        if self.mode not in MODES:
            raise SearchError(f"unknown mode {self.mode!r}")
        if self.shots < 0:
            raise SearchError("shots must be >= 0")
        if self.iterates is not None:
            if len(self.iterates) != p.m:
                raise SearchError(f"expected iterates for {p.m} rounds")
            for j, its in enumerate(self.iterates):
                if len(its) != p.m - j or any(t < 1 for t in its):
                    raise SearchError(f"round {j + 1} iterates {its} invalid")

    @classmethod
    def uniform(cls, sizes: Sequence[int], target: str | None = None, **kwargs) -> "SearchSpec":
        """Unstructured search: uniform local states, all-ones target by default."""
        p = RegisterPartition(tuple(sizes), kwargs.pop("max_qubits", 26))
        target = "1" * p.n if target in (None, "all-ones") else target
        return cls(p, target, [uniform_local(s) for s in p.sizes], **kwargs)

    def local(self, i: int) -> np.ndarray:
        """Local state of register ``i`` (1 = innermost)."""
        return self.locals_[self.partition.m - i]

    def thetas(self) -> list[float]:
        """Overlap angles, innermost register first."""
        p = self.partition
        return [sch.overlap_angle(self.local(i), p.register_value(self.target, i))
                for i in range(1, p.m + 1)]

    def plan(self) -> sch.SchedulePrediction:
        return sch.multi_round_plan(self.thetas(), self.boost_policy, self.iterates)

    def round_iterates(self) -> list[list[int]]:
        if self.iterates is not None:
            return [list(r) for r in self.iterates]
        return [r.iterates for r in self.plan().rounds]

    def to_dict(self) -> dict:
        return {
            "partition": list(self.partition.sizes),
            "target": self.target,
            "locals": [[[float(a.real), float(a.imag)] for a in psi] for psi in self.locals_],
            "iterates": self.iterates,
            "shots": self.shots,
            "seed": self.seed,
            "mode": self.mode,
            "boost_policy": self.boost_policy,
            "cancel": self.cancel,
        }

    @classmethod
    def from_dict(cls, d: dict, max_qubits: int = 26) -> "SearchSpec":
        sizes = d["partition"]
        p = RegisterPartition(tuple(sizes), max_qubits)
        target = d.get("target", "all-ones")
        if target == "all-ones":
            target = "1" * p.n
        if d.get("locals") in (None, "uniform"):
            locals_ = [uniform_local(s) for s in sizes]
        else:
            locals_ = [np.array([complex(re, im) for re, im in psi]) for psi in d["locals"]]
        iterates = d.get("iterates")
        if iterates == "auto":
            iterates = None
        return cls(p, target, locals_, iterates=iterates,
                   shots=int(d.get("shots", 1000)), seed=int(d.get("seed", 0)),
                   mode=d.get("mode", SAMPLING),
                   boost_policy=d.get("boost_policy", sch.BOOST_NONE),
                   cancel=bool(d.get("cancel", True)))


# -- rounds ---------------------------------------------------------------

def apply_sequence(state: QuantumState, seq: OperatorSequence, spec: SearchSpec,
                   register_map: dict[int, int] | None = None, target: int | None = None):
    tgt = target_index(state, spec.target) if target is None else target
    for op in seq.ops:
        if op.kind == "oracle":
            apply_oracle(state, tgt)
        else:
            reg = op.register if register_map is None else register_map[op.register]
            apply_partial_diffusion(state, reg, spec.local(reg))


def run_round(state: QuantumState, spec: SearchSpec, round_index: int,
              counters: OpCounter | None = None, iterates: Sequence[int] | None = None):
    """Apply (S_k W_{k-1})^{t_k} for round ``round_index`` (1-based), k = m - round + 1."""
    m = spec.partition.m
    if not 1 <= round_index <= m:
        raise SearchError(f"round {round_index} outside 1..{m}")
    k = m - round_index + 1
    its = list(iterates) if iterates is not None else spec.round_iterates()[round_index - 1]
    seq = expand_round(k, its, cancel=spec.cancel)
    previous = state.counter
    if counters is not None:
        state.counter = counters
    try:
        apply_sequence(state, seq, spec)
    finally:
        state.counter = previous
    state.check_norm()


# -- run reports ----------------------------------------------------------

@dataclass
class RunReport:
    mode: str
    seed: int
    shots: int
    target: str
    partition: list[int]
    iterates: list[list[int]]
    success: float
    prefix_success: list[float]  # prefix of the outermost 1, 2, ..., m registers
    failure_prefix_fractions: list[float] = field(default_factory=list)
    round_histograms: list[dict[str, int]] = field(default_factory=list)
    final_histogram: dict[str, int] = field(default_factory=dict)
    oracle_calls: list[int] = field(default_factory=list)
    diffusion_counts: list[dict[int, int]] = field(default_factory=list)
    branches: int = 0
    wall_time: float = 0.0

    @property
    def total_oracle_calls(self) -> int:
        return sum(self.oracle_calls)

    def to_dict(self, include_timing: bool = False) -> dict:
        d = asdict(self)
        d["diffusion_counts"] = [{str(k): v for k, v in sorted(c.items())} for c in self.diffusion_counts]
        d["total_oracle_calls"] = self.total_oracle_calls
        if not include_timing:
            d.pop("wall_time")
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(**kwargs), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        """One row per histogram bucket (round 0 is the final readout)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "seed", "shots", "round", "outcome", "count", "frequency",
                    "success", "total_oracle_calls"])
        rows = [(0, self.final_histogram)] + [
            (j + 2, h) for j, h in enumerate(self.round_histograms)]
        for rnd, hist in rows:
            for outcome, count in sorted(hist.items()):
                w.writerow([self.mode, self.seed, self.shots, rnd, outcome, count,
                            repr(count / self.shots) if self.shots else "", repr(self.success),
                            self.total_oracle_calls])
        if not any(h for _, h in rows):
            w.writerow([self.mode, self.seed, self.shots, "", "", "", "", repr(self.success),
                        self.total_oracle_calls])
        return buf.getvalue()


def _round_counts(spec: SearchSpec) -> tuple[list[int], list[dict[int, int]]]:
    m = spec.partition.m
    calls, diffs = [], []
    for j, its in enumerate(spec.round_iterates()):
        seq = expand_round(m - j, its, cancel=spec.cancel)
        calls.append(seq.oracle_count)
        diffs.append(seq.diffusion_counts)
    return calls, diffs


def _state_key(state: QuantumState) -> bytes:
    # collapsed states equal to ~1e-12 evolve identically to well below that
    return np.round(state.amplitudes.view(np.float64), 12).tobytes()


def _prefix_matches(spec: SearchSpec, bits: str) -> list[bool]:
    p = spec.partition
    out, ok = [], True
    for i in range(p.m, 0, -1):
        ok = ok and p.register_bits(bits, i) == p.register_bits(spec.target, i)
        out.append(ok)
    return out


def run_search(spec: SearchSpec) -> RunReport:
    """Run the full multi-round search in sampling or exact-expectation mode."""
    start = time.perf_counter()
    if spec.mode == EXACT:
        report = _run_exact(spec)
    else:
        report = _run_sampling(spec)
    report.wall_time = time.perf_counter() - start
    return report


def _initial_round(spec: SearchSpec) -> QuantumState:
    state = prepare_product_state(spec.partition, spec.locals_)
    run_round(state, spec, 1)
    return state


class _Node:
    """A cached pre-measurement state with its outcome distribution."""

    def __init__(self, state: QuantumState, regs: list[int]):
        self.state = state
        self.regs = regs
        _, self.marg = outcome_distribution(state, regs)
        self.cdf = np.cumsum(self.marg.ravel())
        self.children: dict[tuple[int, ...], "_Node"] = {}

    def sample(self, rng: np.random.Generator) -> tuple[tuple[int, ...], float]:
        return sample_outcome(self.marg, rng, self.cdf)


def _run_sampling(spec: SearchSpec) -> RunReport:
    """Shot loop over a tree of cached states.

    Round 1 is simulated once.  A (parent, outcome) pair always leads to the
    same next-round state, so each is evolved once; states reached through
    different parents are also shared when their amplitudes agree to 1e-12.
    """
    p = spec.partition
    m = p.m
    calls, diffs = _round_counts(spec)
    all_regs = list(range(m, 0, -1))

    def node_for(state: QuantumState, j: int) -> _Node:
        # j is the round that produced ``state``; the next step measures its inner registers
        return _Node(state, list(range(m - j, 0, -1)) if j < m else all_regs)

    root = node_for(_initial_round(spec), 1)
    by_state: dict[tuple[int, bytes], _Node] = {}
    seeds = np.random.SeedSequence(spec.seed).spawn(max(spec.shots, 1))
    round_hists = [Counter() for _ in range(m - 1)]
    final_hist: Counter = Counter()
    prefix_hits = np.zeros(m, dtype=np.int64)
    for shot in range(spec.shots):
        rng = np.random.Generator(np.random.Philox(seeds[shot]))
        node = root
        for j in range(2, m + 1):
            values, prob = node.sample(rng)
            regs = node.regs
            round_hists[j - 2]["".join(format_outcomes(p, regs, values)[i] for i in regs)] += 1
            child = node.children.get(values)
            if child is None:
                collapsed = collapse(node.state, regs, values, prob)
                key = (j, _state_key(collapsed))
                child = by_state.get(key)
                if child is None:
                    reinitialize_registers(collapsed, regs, {i: spec.local(i) for i in regs})
                    run_round(collapsed, spec, j)
                    child = by_state[key] = node_for(collapsed, j)
                node.children[values] = child
            node = child
        values, _ = node.sample(rng)
        outcomes = format_outcomes(p, all_regs, values)
        bits = "".join(outcomes[i] for i in all_regs)
        final_hist[bits] += 1
        prefix_hits += np.array(_prefix_matches(spec, bits), dtype=np.int64)
    shots = spec.shots
    prefix = [float(h / shots) if shots else 0.0 for h in prefix_hits]
    failures = shots - int(prefix_hits[-1])
    fail_frac = [float((prefix_hits[b] - prefix_hits[-1]) / failures) if failures else 0.0
                 for b in range(m - 1)]
    return RunReport(
        mode=SAMPLING, seed=spec.seed, shots=shots, target=spec.target,
        partition=list(p.sizes), iterates=spec.round_iterates(),
        success=prefix[-1], prefix_success=prefix, failure_prefix_fractions=fail_frac,
        round_histograms=[dict(sorted(h.items())) for h in round_hists],
        final_histogram=dict(sorted(final_hist.items())),
        oracle_calls=calls, diffusion_counts=diffs, branches=len(by_state),
    )


def kept_branches(state: QuantumState, k: int, max_rank: int | None = 2,
                  tol: float = RANK_TOL) -> list[tuple[float, np.ndarray]]:
    """Spectral decomposition of the reduced state of registers m..k+1.

    Returns (weight, kept-register vector) pairs; raises if more than
    ``max_rank`` eigenvalues exceed ``tol``.
    """
    p = state.partition
    low_dim = 1 << p.offset(k + 1) if k < p.m else p.dim
    mat = state.amplitudes.reshape(p.dim // low_dim, low_dim)
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    weights = s ** 2
    significant = int(np.sum(weights > tol))
    if max_rank is not None and significant > max_rank:
        raise SearchError(
            f"kept-register reduced state has rank {significant} > {max_rank}; "
            "the tensor-product assumption is broken")
    keep = weights > 1e-15
    return [(float(w), u[:, r]) for r, w in enumerate(weights) if keep[r]]


def _run_exact(spec: SearchSpec) -> RunReport:
    p = spec.partition
    m = p.m
    calls, diffs = _round_counts(spec)
    first = _initial_round(spec)
    prefix = np.zeros(m)
    n_branches = 0

    def descend(state: QuantumState, weight: float, j: int):
        nonlocal n_branches
        if j == m:
            n_branches += 1
            for b in range(1, m + 1):
                regs = list(range(m, m - b, -1))
                bits = [p.register_bits(spec.target, i) for i in regs]
                prefix[b - 1] += weight * probability_of_prefix(state, regs, bits)
            return
        k = m - j  # registers k..1 are measured and reinitialised
        low = np.ones(1, dtype=np.complex128)
        for i in range(k, 0, -1):
            low = np.kron(low, spec.local(i))
        for w, kept in kept_branches(state, k):
            amps = np.kron(kept, low)
            branch = QuantumState(amps / np.linalg.norm(amps), p)
            run_round(branch, spec, j + 1)
            descend(branch, weight * w, j + 1)

    descend(first, 1.0, 1)
    prefix_list = [float(x) for x in prefix]
    fail = 1.0 - prefix_list[-1]
    fail_frac = [(prefix_list[b] - prefix_list[-1]) / fail if fail > 1e-15 else 0.0
                 for b in range(m - 1)]
    return RunReport(
        mode=EXACT, seed=spec.seed, shots=0, target=spec.target,
        partition=list(p.sizes), iterates=spec.round_iterates(),
        success=prefix_list[-1], prefix_success=prefix_list, failure_prefix_fractions=fail_frac,
        oracle_calls=calls, diffusion_counts=diffs, branches=n_branches,
    )


# -- projection-norm verification ------------------------------------------

def orthogonal_partner(psi: np.ndarray, x_index: int) -> np.ndarray:
    """|psi_perp>: the unit vector orthogonal to psi in span{psi, x}."""
    x = np.zeros_like(psi)
    x[x_index] = 1.0
    v = x - np.vdot(psi, x) * psi
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        raise SearchError("local state coincides with the target; no orthogonal partner")
    return v / norm


def invariant_basis(spec: SearchSpec, k: int) -> np.ndarray:
    """Columns spanning S_k = span{|s_k..s_1>: s_j in {psi_j, psi_j_perp}}."""
    p = spec.partition
    basis = np.ones((1, 1), dtype=np.complex128)
    for i in range(k, 0, -1):
        psi = spec.local(i)
        perp = orthogonal_partner(psi, p.register_value(spec.target, i))
        basis = np.kron(basis, np.stack([psi, perp], axis=1))
    return basis


@dataclass
class ProjectionReport:
    stage: int
    gamma: float
    expected_psi: float
    expected_perp: float
    max_deviation: float
    trials: int


def verify_projection_norms(spec: SearchSpec, iterates: Sequence[int], trials: int,
                            rng: np.random.Generator,
                            include_canonical: bool = True) -> list[ProjectionReport]:
    """Check that the squared projections after (S_i W_{i-1})^{t_i} ignore the lower registers.

    Each stage i is simulated on registers i..1 in the correct branch (outer
    registers already carry their target bits, so the oracle reduces to the
    inner target).  ``iterates`` lists t_1..t_m.
    """
    p = spec.partition
    if p.n > 12:
        raise SearchError("projection-norm verification is limited to 12 qubits")
    thetas = spec.thetas()
    reports = []
    for i in range(1, p.m + 1):
        sub = p.inner(i)
        inner_target = spec.target[p.n - sub.n:]
        sub_spec = SearchSpec(sub, inner_target, spec.locals_[p.m - i:], shots=0, cancel=spec.cancel)
        gamma = sch.gamma_schedule(thetas[:i], iterates[:i - 1])[-1]
        t = iterates[i - 1]
        exp_psi = math.cos(2 * t * gamma) ** 2
        exp_perp = math.sin(2 * t * gamma) ** 2
        psi_i = spec.local(i)
        perp_i = orthogonal_partner(psi_i, p.register_value(spec.target, i))
        basis = invariant_basis(spec, i - 1)
        seq = expand_round(i, list(iterates[:i]), cancel=spec.cancel)
        phis = []
        if include_canonical:
            coeffs = np.zeros(basis.shape[1], dtype=np.complex128)
            coeffs[0] = 1.0  # |psi_{i-1}, ..., psi_1>
            phis.append(coeffs)
        while len(phis) < trials + int(include_canonical):
            c = rng.normal(size=basis.shape[1]) + 1j * rng.normal(size=basis.shape[1])
            phis.append(c / np.linalg.norm(c))
        worst = 0.0
        for c in phis:
            phi = basis @ c
            state = QuantumState(np.kron(psi_i, phi), sub)
            apply_sequence(state, seq, sub_spec)
            view = state.register_view(i)  # (1, d_i, low)
            a = np.tensordot(psi_i.conj(), view[0], axes=(0, 0))
            b = np.tensordot(perp_i.conj(), view[0], axes=(0, 0))
            worst = max(worst, abs(np.vdot(a, a).real - exp_psi), abs(np.vdot(b, b).real - exp_perp))
        reports.append(ProjectionReport(i, gamma, exp_psi, exp_perp, worst, len(phis)))
    return reports
