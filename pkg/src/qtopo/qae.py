"""Compliance-to-phase pipeline: Hadamard test, QAE, and the exact-phase backend.

The signal-block quadratic form t(x) = f̂ᵀ Q(K_free(x)/β) f̂ is written into
the phase register as θ(x) = arcsin(sqrt(1/2 + t/2))/π by amplitude
estimation on the Grover operator of the Hadamard test. The emulated
backend evaluates t by eigendecomposition and produces the exact
phase-estimation response analytically; the coherent backend runs the full
statevector circuit with a config-selected dilation standing in for the
inverse-stiffness block-encoding (the two-step method). Both agree to
within numerical precision.

Compliance recovery divides t by a factor alpha calibrated once per domain
on the all-solid design, sidestepping the ambiguous printed scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from . import blockenc, qsim, qsvt
from .fem import (
    GuardError,
    MbbDomain,
    StructureConfig,
    assemble_global,
    compliance_direct,
    element_norm,
    reduce_free,
)

MAX_PHASE_QUBITS = 20

FilterLike = Union[qsvt.FilterPoly, qsvt.PolySpec]


def theta_of_t(t: float) -> float:
    """Phase written by QAE: arcsin(sqrt(1/2 + t/2))/pi, in [0, 1/2]."""
    if not -1.0 - 1e-12 <= t <= 1.0 + 1e-12:
        raise ValueError("t must lie in [-1, 1]")
    t = min(max(t, -1.0), 1.0)
    return math.asin(math.sqrt(0.5 + 0.5 * t)) / math.pi


def scaling_constants(domain: MbbDomain, spec: qsvt.PolySpec,
                      alpha: float | None = None) -> blockenc.ScalingConstants:
    """delta = ||K^el||_2, beta = n_el*delta, gamma = y0*mu."""
    delta = element_norm(domain.material)
    return blockenc.ScalingConstants(delta=delta, beta=domain.n_el * delta,
                                     gamma=spec.gamma, alpha=alpha)


@dataclass(frozen=True)
class PhaseRecord:
    config: StructureConfig
    t_value: float
    theta: float
    compliance_estimate: float | None
    saturated: bool


@dataclass(frozen=True)
class QaeParams:
    n_p: int
    filt: FilterLike
    backend: str = "emulated"  # or "coherent"
    constants: blockenc.ScalingConstants | None = None

    def __post_init__(self):
        if self.n_p < 2:
            raise ValueError("need at least two phase qubits")
        if self.n_p > MAX_PHASE_QUBITS:
            raise GuardError(f"n_p={self.n_p} above the guard {MAX_PHASE_QUBITS}")
        if self.backend not in ("emulated", "coherent"):
            raise ValueError("backend must be 'emulated' or 'coherent'")


@dataclass(frozen=True)
class QaeDistribution:
    """Exact measurement distribution of the phase register."""

    probabilities: np.ndarray
    n_p: int

    def as_dict(self) -> dict[str, float]:
        return {format(i, f"0{self.n_p}b"): float(p)
                for i, p in enumerate(self.probabilities)}

    def most_probable(self, k: int = 2) -> list[int]:
        order = np.argsort(self.probabilities)[::-1]
        return [int(i) for i in order[:k]]

    def branch_asymmetry(self) -> float:
        p = self.probabilities
        return float(np.max(np.abs(p[1:] - p[1:][::-1])))


def _poly_spec_of(filt: FilterLike) -> qsvt.PolySpec:
    return filt.spec if isinstance(filt, qsvt.FilterPoly) else filt


def _t_value(domain: MbbDomain, config: StructureConfig,
             constants: blockenc.ScalingConstants, filt: FilterLike) -> float:
    k_free = reduce_free(assemble_global(domain, config), domain.fixed_dofs)
    filtered = qsvt.apply_qsvt_matrix(k_free, constants.beta, filt)
    f = domain.reduced_force()
    f_hat = f / np.linalg.norm(f)
    return float(f_hat @ filtered.entries @ f_hat)


def calibrate_alpha(domain: MbbDomain, filt: FilterLike,
                    constants: blockenc.ScalingConstants | None = None) -> float:
    """alpha = t(all-solid) / compliance_direct(all-solid)."""
    if constants is None:
        constants = scaling_constants(domain, _poly_spec_of(filt))
    solid = StructureConfig.all_solid(domain.n_el)
    c = compliance_direct(domain, solid)
    if not math.isfinite(c):
        raise ValueError("all-solid configuration must be feasible to calibrate")
    return _t_value(domain, solid, constants, filt) / c


def calibrated_constants(domain: MbbDomain, filt: FilterLike) -> blockenc.ScalingConstants:
    constants = scaling_constants(domain, _poly_spec_of(filt))
    return replace(constants, alpha=calibrate_alpha(domain, filt, constants))


def phase_of_config(domain: MbbDomain, config: StructureConfig,
                    constants: blockenc.ScalingConstants,
                    filt: FilterLike) -> PhaseRecord:
    """Signal-block quadratic form, its phase, and the recovered compliance.

    The estimate is flagged saturated (and reported as None) when t sits
    within the fit tolerance of the filter's plateau value Q(0), i.e. the
    design is dominated by penalized near-singular modes.
    """
    spec = _poly_spec_of(filt)
    t = _t_value(domain, config, constants, filt)
    plateau = float(qsvt.filter_values(filt, 0.0))
    saturated = t >= plateau - spec.eps
    estimate = None
    if not saturated and constants.alpha:
        estimate = t / constants.alpha
    return PhaseRecord(config, t, theta_of_t(t), estimate, saturated)


def filtered_inverse(domain: MbbDomain, config: StructureConfig,
                     constants: blockenc.ScalingConstants,
                     filt: FilterLike) -> np.ndarray:
    """Q(K_free(x)/beta) on the free DoFs; the per-config contraction M(x)."""
    k_free = reduce_free(assemble_global(domain, config), domain.fixed_dofs)
    return qsvt.apply_qsvt_matrix(k_free, constants.beta, filt).entries


# ---------------------------------------------------------------------------
# coherent circuits

def force_prep_operator(layout: qsim.RegisterLayout, f_hat: np.ndarray) -> qsim.Operator:
    """V_f: real Householder mapping |0...0>_d to the normalized force."""
    d_q = layout.qubits("d")
    dim = 2 ** len(d_q)
    target = np.zeros(dim)
    target[: f_hat.size] = f_hat
    target /= np.linalg.norm(target)
    e0 = np.zeros(dim)
    e0[0] = 1.0
    diff = e0 - target
    norm = np.linalg.norm(diff)
    if norm < 1e-14:
        mat = np.eye(dim)
    else:
        v = diff / norm
        mat = np.eye(dim) - 2.0 * np.outer(v, v)
    return qsim.dense_op(mat, d_q)


def hadamard_test_operator(u_sel: qsim.Operator,
                           layout: qsim.RegisterLayout,
                           f_hat: np.ndarray) -> qsim.Operator:
    """A = H_h · V_f · (U_sel controlled on h) · H_h, in time order."""
    h_q = layout.qubits("h")[0]
    return qsim.product(
        qsim.hadamard(h_q),
        force_prep_operator(layout, f_hat),
        u_sel.controlled(((h_q, 1),)),
        qsim.hadamard(h_q),
    )


def _qae_reflection_targets(layout: qsim.RegisterLayout) -> tuple[int, ...]:
    # everything A prepares: h plus the block-encoding ancilla and data;
    # the configuration register is spectator (per-sector reflection)
    targets: tuple[int, ...] = ()
    for name in ("h", "b", "d"):
        targets += layout.qubits(name)
    return targets


def grover_operator(a_op: qsim.Operator, layout: qsim.RegisterLayout) -> qsim.Operator:
    """G = A · (2|0><0| - 1) · A^dag · (1 - 2|0><0|_h), in time order."""
    h_q = layout.qubits("h")[0]
    s0_h = qsim.diagonal_op(np.array([-1.0, 1.0]), (h_q,))
    targets = _qae_reflection_targets(layout)
    zero = np.zeros(2 ** len(targets), dtype=complex)
    zero[0] = 1.0
    minus_s0 = qsim.reflection_about(zero, targets)
    return qsim.product(s0_h, a_op.adjoint(), minus_s0, a_op)


def phase_estimation_operator(g_op: qsim.Operator, a_op: qsim.Operator,
                              layout: qsim.RegisterLayout) -> qsim.Operator:
    """C: Hadamards on p, A, controlled powers G^{2^j}, inverse QFT.

    The first (most significant) phase qubit controls the largest power.
    """
    p_q = layout.qubits("p")
    n_p = len(p_q)
    factors: list[qsim.Operator] = [qsim.hadamard(q) for q in p_q]
    factors.append(a_op)
    for j, q in enumerate(p_q):
        power = 2 ** (n_p - 1 - j)
        controlled = g_op.controlled(((q, 1),))
        factors.extend([controlled] * power)
    factors.append(qsim.inverse_qft_operator(p_q))
    return qsim.product(*factors)


def qae_coherent_layout(domain: MbbDomain, n_p: int) -> qsim.RegisterLayout:
    d_width = max(1, math.ceil(math.log2(domain.n_free)))
    return qsim.RegisterLayout((("p", n_p), ("h", 1), ("b", 1), ("d", d_width)))


def qpe_response(theta: float, n_p: int) -> np.ndarray:
    """Exact two-branch phase-estimation distribution (squared Fejér kernel)."""
    n = 2**n_p
    p = np.arange(n)

    def fejer(x):
        x = np.mod(x, 1.0)
        num = np.sin(np.pi * n * x)
        den = n * np.sin(np.pi * x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(np.abs(den) < 1e-300, 1.0, num / np.where(den == 0, 1, den))
        out = np.where(np.minimum(x, 1 - x) < 1e-15, 1.0, out)
        return out**2

    return 0.5 * (fejer(theta - p / n) + fejer(theta + p / n))


def qae_distribution(domain: MbbDomain, config: StructureConfig,
                     params: QaeParams) -> QaeDistribution:
    """Exact phase-register distribution, emulated or fully coherent."""
    constants = params.constants or scaling_constants(
        domain, _poly_spec_of(params.filt))
    if params.backend == "emulated":
        record = phase_of_config(domain, config, constants, params.filt)
        return QaeDistribution(qpe_response(record.theta, params.n_p), params.n_p)

    layout = qae_coherent_layout(domain, params.n_p)
    m = filtered_inverse(domain, config, constants, params.filt)
    dim = 2 ** layout.width("d")
    padded = np.zeros((dim, dim))
    padded[: m.shape[0], : m.shape[1]] = m
    u_sel = qsim.dense_op(
        blockenc.dilate_contraction(padded),
        layout.qubits("b") + layout.qubits("d"))
    f = domain.reduced_force()
    a_op = hadamard_test_operator(u_sel, layout, f / np.linalg.norm(f))
    g_op = grover_operator(a_op, layout)
    c_op = phase_estimation_operator(g_op, a_op, layout)
    state = qsim.QuantumState(layout)
    qsim.apply(state, c_op)
    return QaeDistribution(qsim.marginal_probabilities(state, "p"), params.n_p)


def comparator_marks(n_p: int, theta0: float) -> np.ndarray:
    """U_< marking rule: min(p, 2^n_p - p)/2^n_p < theta0, strict, ties unmarked."""
    n = 2**n_p
    p = np.arange(n)
    return np.minimum(p, n - p) / n < theta0
