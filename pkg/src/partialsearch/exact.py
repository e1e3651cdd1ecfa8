"""Brute-force dense verification for small instances.

Everything here is built from explicit matrices (Kronecker products and
matrix powers) and shares no kernels with :mod:`partialsearch.statevector`,
so it can serve as an independent reference for the closed forms and the
simulator.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import schedule as sch
from .search import EXACT, SearchSpec, invariant_basis, orthogonal_partner, run_search
from .statevector import RegisterPartition

MAX_DENSE_QUBITS = 12
MAX_BRUTE_QUBITS = 10
CLUSTER_TOL = 1e-8
HERMITIAN_TOL = 1e-10


class DenseCapError(ValueError):
    pass


def _check_dims(n: int, cap: int):
    if n > cap:
        raise DenseCapError(f"{n} qubits exceeds the dense cap of {cap}")


def _embed(op: np.ndarray, sizes: Sequence[int], pos: int) -> np.ndarray:
    """Kron ``op`` into position ``pos`` of registers with ``sizes`` (outermost first)."""
    mats = [np.eye(1 << s) for s in sizes]
    mats[pos] = op
    out = np.ones((1, 1), dtype=np.complex128)
    for mat in mats:
        out = np.kron(out, mat)
    return out


def reflection(vec: np.ndarray) -> np.ndarray:
    v = vec.reshape(-1, 1)
    return np.eye(v.shape[0], dtype=np.complex128) - 2.0 * (v @ v.conj().T)


@dataclass
class DenseOperators:
    """Dense primitives on registers k..1 of a spec, in the correct branch."""
    sizes: list[int]
    oracle: np.ndarray
    diffusions: dict[int, np.ndarray]
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, spec: SearchSpec, k: int | None = None, cap: int = MAX_DENSE_QUBITS):
        p = spec.partition
        k = p.m if k is None else k
        sizes = list(p.sizes[p.m - k:])
        n = sum(sizes)
        _check_dims(n, cap)
        x = np.zeros(1 << n, dtype=np.complex128)
        x[int(spec.target[p.n - n:], 2)] = 1.0
        diffs = {i: _embed(reflection(spec.local(i)), sizes, k - i) for i in range(1, k + 1)}
        return cls(sizes, reflection(x), diffs)

    def w(self, i: int, iterates: Sequence[int]) -> np.ndarray:
        """W_i = (S_i W_{i-1})^t S_i (W_{i-1} S_i)^t."""
        if i == 0:
            return self.oracle
        key = tuple(iterates[:i])
        if key not in self._cache:
            s = self.diffusions[i]
            # both factors are reflections, so (W S)^t is the adjoint of (S W)^t
            a = np.linalg.matrix_power(s @ self.w(i - 1, iterates), iterates[i - 1])
            self._cache[key] = a @ s @ a.conj().T
        return self._cache[key]

    def iterate(self, k: int, iterates: Sequence[int]) -> np.ndarray:
        """(S_k W_{k-1})^{t_k}."""
        return np.linalg.matrix_power(self.diffusions[k] @ self.w(k - 1, iterates), iterates[k - 1])


@dataclass
class DenseStage:
    """Operators of stage i, dense on registers i..1 and restricted to S_i.

    Restricted matrices use the product basis {psi_j, psi_j_perp} of S_i,
    register i most significant.
    """
    stage: int
    w_full: np.ndarray      # W_i on registers i..1
    s_full: np.ndarray      # S_{psi_i} on registers i..1
    w_prev: np.ndarray      # W_{i-1} restricted to S_i
    p_s: np.ndarray         # projector onto psi_i (x) S_{i-1}
    p_w: np.ndarray         # projector onto the -1 eigenspace of W_{i-1}
    q_prev: np.ndarray      # Q_{i-1} on S_{i-1}
    p_psi: np.ndarray       # psi_{i-1} (x) S_{i-2} inside S_{i-1}
    gamma: float
    prev_angle: float       # 2 t_{i-1} gamma_{i-1}; 0 for i = 1
    p_w_mismatch: float     # max |P_W - (I - W_{i-1})/2|

    def to_json(self) -> str:
        return json.dumps({"stage": self.stage, "gamma": self.gamma,
                           "prev_angle": self.prev_angle, "p_w_mismatch": self.p_w_mismatch})


def _in_plane(spec: SearchSpec, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates of x_i and x_i_perp in the {psi_i, psi_i_perp} basis."""
    psi = spec.local(i)
    idx = spec.partition.register_value(spec.target, i)
    perp = orthogonal_partner(psi, idx)
    x2 = np.array([np.conj(psi[idx]), np.conj(perp[idx])])
    return x2, np.array([-np.conj(x2[1]), np.conj(x2[0])])


def build_dense(spec: SearchSpec, stage: int, iterates: Sequence[int],
                cap: int = MAX_DENSE_QUBITS) -> DenseStage:
    """Dense W_i, S_{psi_i} and the eigenspace projectors P_S, P_W of one stage.

    ``iterates`` lists t_1..t_{i-1} (longer lists are fine).  Outer registers
    are fixed to their target bits, so the oracle is the inner-target one.
    """
    p = spec.partition
    i = stage
    if not 1 <= i <= p.m:
        raise ValueError(f"stage {i} outside 1..{p.m}")
    its = list(iterates) + [1] * max(0, i - len(iterates))
    ops = DenseOperators.build(spec, i, cap)
    v = invariant_basis(spec, i)
    w_prev = v.conj().T @ ops.w(i - 1, its) @ v
    half = 1 << (i - 1)
    p_s = np.zeros((2 * half, 2 * half), dtype=np.complex128)
    p_s[:half, :half] = np.eye(half)
    gammas = sch.gamma_schedule(spec.thetas()[:i], its[:i - 1])
    x2, x2_perp = _in_plane(spec, i)
    if i == 1:
        q_prev = p_psi = np.ones((1, 1), dtype=np.complex128)
        p_w = np.outer(x2, x2.conj())
        prev_angle = 0.0
    else:
        inner = DenseOperators.build(spec, i - 1, cap)
        v_prev = invariant_basis(spec, i - 1)
        u = v_prev.conj().T @ inner.iterate(i - 1, its) @ v_prev
        p_psi = np.zeros((half, half), dtype=np.complex128)
        p_psi[:half // 2, :half // 2] = np.eye(half // 2)
        q_prev = u @ p_psi @ u.conj().T
        p_w = np.kron(np.outer(x2, x2.conj()), q_prev) + np.kron(np.outer(x2_perp, x2_perp.conj()), p_psi)
        prev_angle = 2 * its[i - 2] * gammas[-2]
    mismatch = float(np.max(np.abs(p_w - (np.eye(2 * half) - w_prev) / 2)))
    return DenseStage(i, ops.w(i, its), ops.diffusions[i], w_prev, p_s, p_w, q_prev, p_psi,
                      gammas[-1], prev_angle, mismatch)


@dataclass
class AngleSpectrum:
    eigenvalues: np.ndarray            # raw spectrum, ascending
    clusters: list[tuple[float, int]]  # (representative value, multiplicity)
    tol: float

    def to_json(self) -> str:
        return json.dumps({"eigenvalues": [float(e) for e in self.eigenvalues],
                           "clusters": [[float(v), int(c)] for v, c in self.clusters],
                           "tol": self.tol})


def _check_projector(p: np.ndarray, name: str, tol: float = HERMITIAN_TOL):
    if np.max(np.abs(p - p.conj().T)) > tol:
        raise ValueError(f"{name} is not Hermitian")
    if np.max(np.abs(p @ p - p)) > tol:
        raise ValueError(f"{name} is not idempotent")


def cluster_values(values: np.ndarray, tol: float = CLUSTER_TOL) -> list[tuple[float, int]]:
    clusters: list[list[float]] = []
    for v in np.sort(values):
        if clusters and abs(v - clusters[-1][-1]) <= tol:
            clusters[-1].append(v)
        else:
            clusters.append([v])
    return [(float(np.mean(c)), len(c)) for c in clusters]


def principal_angle_spectrum(p_s: np.ndarray, p_w: np.ndarray, tol: float = CLUSTER_TOL) -> AngleSpectrum:
    """Eigenvalues of P_S P_W P_S on range(P_S)."""
    _check_projector(p_s, "P_S")
    _check_projector(p_w, "P_W")
    vals, vecs = np.linalg.eigh(p_s)
    basis = vecs[:, vals > 0.5]
    compressed = basis.conj().T @ p_w @ basis
    eig = np.linalg.eigvalsh(compressed)
    return AngleSpectrum(eig, cluster_values(eig, tol), tol)


def expected_clusters(gamma: float, stage: int, tol: float = CLUSTER_TOL) -> list[tuple[float, int]]:
    """Predicted (value, multiplicity) pairs.

    Stage 1 has the single value |<x|psi>|^2.  At gamma = pi/4 the two values
    coincide and are reported as one cluster.
    """
    if stage == 1:
        return [(float(np.sin(gamma) ** 2), 1)]
    mult = 1 << (stage - 2)
    lo, hi = sorted((np.sin(gamma) ** 2, np.cos(gamma) ** 2))
    if hi - lo <= tol:
        return [(0.5, 2 * mult)]
    return [(float(lo), mult), (float(hi), mult)]


@dataclass
class BlockReport:
    psi_block_dev: float
    perp_block_dev: float
    off_diag_dev: float

    @property
    def max_deviation(self) -> float:
        return max(self.psi_block_dev, self.perp_block_dev, self.off_diag_dev)


def diagonal_block_check(q: np.ndarray, p_psi: np.ndarray, angle: float) -> BlockReport:
    """Scalar-block structure of Q_{i-1} in the P_psi / P_psi_perp split.

    ``angle`` is 2 t_{i-1} gamma_{i-1}.
    """
    p_perp = np.eye(q.shape[0]) - p_psi
    c2, s2 = np.cos(angle) ** 2, np.sin(angle) ** 2
    psi_dev = np.max(np.abs(p_psi @ q @ p_psi - c2 * p_psi))
    perp_dev = np.max(np.abs(p_perp @ q @ p_perp - s2 * p_perp))
    c = p_psi @ q @ p_perp
    off_dev = np.max(np.abs(c @ c.conj().T - c2 * s2 * p_psi))
    return BlockReport(float(psi_dev), float(perp_dev), float(off_dev))


def _full_local_product(spec: SearchSpec, k: int) -> np.ndarray:
    out = np.ones(1, dtype=np.complex128)
    for i in range(k, 0, -1):
        out = np.kron(out, spec.local(i))
    return out


def brute_force_success(spec: SearchSpec, iterates: Sequence[int] | None = None) -> float:
    """P(x_m) after the first round, from a dense matrix power."""
    p = spec.partition
    _check_dims(p.n, MAX_BRUTE_QUBITS)
    its = list(iterates) if iterates is not None else spec.round_iterates()[0]
    ops = DenseOperators.build(spec, p.m, MAX_BRUTE_QUBITS)
    v = ops.iterate(p.m, its) @ _full_local_product(spec, p.m)
    low = 1 << (p.n - p.sizes[0])
    xm = p.register_value(spec.target, p.m)
    return float(np.sum(np.abs(v.reshape(-1, low)[xm]) ** 2))


def brute_force_prefix_success(spec: SearchSpec, max_qubits: int = 8) -> list[float]:
    """Full multi-round prefix probabilities via density matrices.

    Measurement-and-reset of the inner registers is the channel
    rho -> Tr_inner(rho) (x) |psi_inner><psi_inner|, evaluated densely.
    """
    p = spec.partition
    _check_dims(p.n, max_qubits)
    m = p.m
    iterates = spec.round_iterates()
    ops = DenseOperators.build(spec, m, max_qubits)
    psi = _full_local_product(spec, m)
    rho = np.outer(psi, psi.conj())
    for j in range(1, m + 1):
        k = m - j + 1
        if j > 1:
            low = 1 << sum(p.sizes[m - k:])
            high = p.dim // low
            reduced = np.einsum("ajbj->ab", rho.reshape(high, low, high, low))
            inner = _full_local_product(spec, k)
            rho = np.kron(reduced, np.outer(inner, inner.conj()))
        u = ops.iterate(k, iterates[j - 1])
        rho = u @ rho @ u.conj().T
    probs = np.real(np.diag(rho))
    out = []
    idx = np.arange(p.dim)
    for b in range(1, m + 1):
        bits = sum(p.sizes[:b])
        shift = p.n - bits
        out.append(float(np.sum(probs[(idx >> shift) == (int(spec.target, 2) >> shift)])))
    return out


# -- suites ----------------------------------------------------------------

def spectrum_deviation(spectrum: AngleSpectrum, gamma: float, stage: int) -> float:
    """Max gap between the raw eigenvalues and the predicted multiset."""
    expected = sorted(v for v, c in expected_clusters(gamma, stage) for _ in range(c))
    got = np.sort(spectrum.eigenvalues)
    if len(got) != len(expected):
        return float("inf")
    return float(np.max(np.abs(got - np.array(expected))))


@dataclass
class StageCheck:
    stage: int
    gamma: float
    clusters: list[tuple[float, int]]
    spectrum_dev: float
    block_dev: float
    p_w_mismatch: float
    passed: bool

    def to_dict(self) -> dict:
        return {"stage": self.stage, "gamma": self.gamma,
                "clusters": [[float(v), int(c)] for v, c in self.clusters],
                "spectrum_dev": self.spectrum_dev, "block_dev": self.block_dev,
                "p_w_mismatch": self.p_w_mismatch, "passed": self.passed}


def check_stage(spec: SearchSpec, stage: int, iterates: Sequence[int],
                gamma_shift: float = 0.0, tol: float = CLUSTER_TOL) -> StageCheck:
    """Degeneracy, block scalarity and P_W consistency for one stage.

    ``gamma_shift`` perturbs the predicted gamma (negative control).
    """
    st = build_dense(spec, stage, iterates)
    spectrum = principal_angle_spectrum(st.p_s, st.p_w, tol)
    gamma = st.gamma + gamma_shift
    dev = spectrum_deviation(spectrum, gamma, stage)
    n_expected = len(expected_clusters(st.gamma, stage, tol))
    block = 0.0
    if stage >= 2:
        block = diagonal_block_check(st.q_prev, st.p_psi, st.prev_angle).max_deviation
    ok = (dev <= tol and len(spectrum.clusters) == n_expected
          and block <= 1e-9 and st.p_w_mismatch <= 1e-9)
    return StageCheck(stage, gamma, spectrum.clusters, dev, block, st.p_w_mismatch, ok)


def random_local(rng: np.random.Generator, n_qubits: int) -> np.ndarray:
    v = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return v / np.linalg.norm(v)


def random_product_spec(rng: np.random.Generator, m: int, max_n: int = 10,
                        max_register: int = 3) -> SearchSpec:
    sizes = [int(rng.integers(1, max_register + 1)) for _ in range(m)]
    while sum(sizes) > max_n:
        sizes[int(np.argmax(sizes))] -= 1
    p = RegisterPartition(tuple(sizes))
    target = "".join(rng.choice(["0", "1"], size=p.n))
    return SearchSpec(p, target, [random_local(rng, s) for s in sizes])


@dataclass
class FuzzReport:
    instances: int
    checks: list[StageCheck]
    failures: list[dict]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def max_spectrum_dev(self) -> float:
        return max((c.spectrum_dev for c in self.checks), default=0.0)


def degeneracy_fuzz(instances: int, rng: np.random.Generator, gamma_shift: float = 0.0,
                    max_n: int = 10, max_iterate: int = 3) -> FuzzReport:
    """Random product locals and targets, m in {2, 3}; checks every stage i >= 2."""
    checks, failures = [], []
    for k in range(instances):
        m = int(rng.integers(2, 4))
        spec = random_product_spec(rng, m, max_n)
        its = [int(t) for t in rng.integers(1, max_iterate + 1, size=m)]
        for i in range(2, m + 1):
            c = check_stage(spec, i, its, gamma_shift)
            checks.append(c)
            if not c.passed:
                failures.append({"instance": k, "sizes": list(spec.partition.sizes),
                                 "target": spec.target, "iterates": its, **c.to_dict()})
    return FuzzReport(instances, checks, failures)


@dataclass
class CrossCheck:
    sizes: list[int]
    iterates: list[int]
    closed_form: float
    statevector: float
    brute_force: float
    prefix_dev: float | None

    @property
    def max_gap(self) -> float:
        vals = (self.closed_form, self.statevector, self.brute_force)
        gap = max(vals) - min(vals)
        return max(gap, self.prefix_dev or 0.0)


def cross_validate(spec: SearchSpec, prefix_cap: int = 8) -> CrossCheck:
    """Round-1 success three ways; full prefix curve against the density-matrix run when small."""
    exact_spec = replace(spec, mode=EXACT, shots=0)
    plan = exact_spec.plan()
    its = exact_spec.round_iterates()[0]
    report = run_search(exact_spec)
    bf = brute_force_success(exact_spec, its)
    prefix_dev = None
    if spec.partition.n <= prefix_cap:
        dense = brute_force_prefix_success(exact_spec, prefix_cap)
        prefix_dev = float(np.max(np.abs(np.array(dense) - np.array(report.prefix_success))))
    return CrossCheck(list(spec.partition.sizes), its, plan.rounds[0].success,
                      report.prefix_success[0], bf, prefix_dev)
