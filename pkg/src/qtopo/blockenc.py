"""Block-encoding of the configuration-dependent global stiffness matrix.

The circuit follows the six-step construction: a one-ancilla unitary
dilation of K^el/delta, zero-padding flagged into ancilla z, the gap
permutation separating left and right element nodes, controlled shifts by
the element offsets, a Hadamard LCU over the element-selector register l,
and void conditioning flagged into ancilla v.

The LCU prepare uses plain Hadamards over 2^ceil(log2 n_el) branches, so
the constructed unitary block-encodes K(x)/scale with
scale = 2^ceil(log2 n_el) * delta; branches beyond n_el are flagged void
unconditionally. For power-of-two element counts this equals the n_el*delta
normalization used by the phase-emulation pipeline (ScalingConstants.beta);
otherwise the two constants differ and both are reported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qsim
from .fem import MbbDomain, StructureConfig, SymMatrix, element_stiffness, offset_delta

NORM_TOL = 1e-12


@dataclass(frozen=True)
class ScalingConstants:
    """Scale factors tying the quantum pipeline to classical compliance.

    delta is the element dilation scale ||K^el||_2, beta = n_el*delta the
    stiffness-matrix normalization of the emulated pipeline, gamma = y0*mu
    the even-filter scale, and alpha the compliance-recovery factor fixed
    by calibration against the dense solve (None until calibrated).
    """

    delta: float
    beta: float
    gamma: float
    alpha: float | None = None

    def __post_init__(self):
        if self.delta <= 0 or self.beta <= 0 or self.gamma <= 0:
            raise ValueError("scaling constants must be positive")


@dataclass(frozen=True)
class ProjectorSpec:
    """Signal subspace: |0...0> on the ancilla registers, fixed rows excluded on d."""

    ancilla_registers: tuple[str, ...]
    excluded_d_indices: tuple[int, ...]


@dataclass(frozen=True)
class BlockEncoding:
    operator: qsim.Operator
    layout: qsim.RegisterLayout
    projector_spec: ProjectorSpec
    scale: float
    delta: float
    domain: MbbDomain


def dilate_contraction(m: np.ndarray) -> np.ndarray:
    """One-ancilla unitary completion [[M, sqrt(1-MM*)], [sqrt(1-M*M), -M*]].

    The printed construction with +M in both diagonal blocks is not unitary
    for general M; the standard reflection-type completion is used.
    """
    m = np.asarray(m, dtype=complex)
    u, s, vh = np.linalg.svd(m)
    if s.size and s[0] > 1.0 + NORM_TOL:
        raise ValueError(f"spectral norm {s[0]} exceeds 1")
    comp = np.sqrt(np.clip(1.0 - s**2, 0.0, None))
    upper_right = u @ np.diag(comp) @ u.conj().T
    lower_left = vh.conj().T @ np.diag(comp) @ vh
    top = np.hstack([m, upper_right])
    bottom = np.hstack([lower_left, -m.conj().T])
    return np.vstack([top, bottom])


def element_blockencoding(material) -> tuple[np.ndarray, float]:
    """Dilation of K^el/delta with delta = ||K^el||_2; 16x16 unitary."""
    k_el = element_stiffness(material).entries
    delta = float(np.abs(np.linalg.eigvalsh(k_el)).max())
    return dilate_contraction(k_el / delta), delta


def gap_permutation(n_y: int, qubits) -> qsim.Operator:
    """P_gap = P_+4 (P_+2(n_y-1) open-controlled on the MSB) P_-4.

    Maps element-local indices 0-3 to themselves and 4-7 past a gap of
    2(n_y-1), embedding the element block into the column-wise global
    ordering. The middle adder acts on all but the most significant data
    qubit and fires when that qubit is 0.
    """
    qs = tuple(qubits)
    if 2 ** len(qs) < 8:
        raise ValueError("gap permutation needs at least 3 qubits")
    minus4 = qsim.adder_permutation(-4, qs)
    middle = qsim.adder_permutation(2 * (n_y - 1), qs[1:]).controlled(((qs[0], 0),))
    plus4 = qsim.adder_permutation(4, qs)
    return qsim.product(minus4, middle, plus4)


def permutation_action(layout: qsim.RegisterLayout, op: qsim.Operator) -> np.ndarray:
    """Index map realized by a permutation-built operator (for verification)."""
    n = layout.total_qubits
    mat = qsim.operator_matrix(layout, op)
    out = np.full(2**n, -1, dtype=int)
    for j in range(2**n):
        col = mat[:, j]
        i = int(np.argmax(np.abs(col)))
        if not math.isclose(abs(col[i]), 1.0, abs_tol=1e-9):
            raise ValueError("operator is not a permutation")
        out[j] = i
    return out


def data_width(domain: MbbDomain) -> int:
    """n_d = 3 + ceil(log2(n_dof/8)) data qubits."""
    return 3 + max(0, math.ceil(math.log2(domain.n_dof / 8)))


def selector_width(domain: MbbDomain) -> int:
    return max(1, math.ceil(math.log2(domain.n_el)))


def default_layout(domain: MbbDomain, coherent: bool = True) -> qsim.RegisterLayout:
    regs = []
    if coherent:
        regs.append(("c", domain.n_el))
    regs += [("l", selector_width(domain)), ("v", 1), ("z", 1), ("b", 1),
             ("d", data_width(domain))]
    return qsim.RegisterLayout(tuple(regs))


def _lcu_controls(l_qubits, branch: int):
    """Control pattern putting the selector register at integer `branch`."""
    w = len(l_qubits)
    return tuple((l_qubits[i], (branch >> (w - 1 - i)) & 1) for i in range(w))


def _uk_factors(domain: MbbDomain, layout: qsim.RegisterLayout,
                config: StructureConfig | None) -> list[qsim.Operator]:
    """Time-ordered factor list of U_K; config None keeps c-register controls."""
    l_q = layout.qubits("l")
    d_q = layout.qubits("d")
    v_q = layout.qubits("v")[0]
    z_q = layout.qubits("z")[0]
    b_q = layout.qubits("b")[0]
    c_q = layout.qubits("c") if config is None else None
    n_el = domain.n_el
    n_branch = 2 ** len(l_q)

    factors = [qsim.hadamard(q) for q in l_q]
    for e in range(1, n_el + 1):
        ctrl = _lcu_controls(l_q, e - 1)
        factors.append(
            qsim.adder_permutation(-offset_delta(e, domain.n_y), d_q).controlled(ctrl))
    for e in range(1, n_branch + 1):
        ctrl = _lcu_controls(l_q, e - 1)
        if e <= n_el:
            if config is None:
                # flip the void flag when x_e = 0 for branch e
                factors.append(qsim.pauli_x(v_q, controls=ctrl + ((c_q[e - 1], 0),)))
            elif config.bits[e - 1] == 0:
                factors.append(qsim.pauli_x(v_q, controls=ctrl))
        else:
            # padding branch beyond n_el: always void
            factors.append(qsim.pauli_x(v_q, controls=ctrl))
    gap = gap_permutation(domain.n_y, d_q)
    factors.append(gap.adjoint())
    u_kel, _ = element_blockencoding(domain.material)
    factors.append(qsim.dense_op(u_kel, (b_q,) + d_q[-3:]))
    factors.append(_padding_flag(z_q, d_q))
    factors.append(gap)
    for e in range(1, n_el + 1):
        ctrl = _lcu_controls(l_q, e - 1)
        factors.append(
            qsim.adder_permutation(offset_delta(e, domain.n_y), d_q).controlled(ctrl))
    factors += [qsim.hadamard(q) for q in l_q]
    return factors


def _padding_flag(z_qubit: int, d_qubits) -> qsim.Operator:
    """F: flip z whenever the padding (high) data qubits differ from zero."""
    high = d_qubits[:-3]
    if not high:
        return qsim.permutation_op(np.arange(2), (z_qubit,))
    nh = 2 ** len(high)
    idx = np.arange(2 * nh)
    z = idx >> len(high)
    h = idx & (nh - 1)
    flipped = ((z ^ (h != 0).astype(int)) << len(high)) | h
    return qsim.permutation_op(flipped, (z_qubit,) + tuple(high))


def global_blockencoding(domain: MbbDomain,
                         layout: qsim.RegisterLayout | None = None) -> BlockEncoding:
    """U_K block-encoding K(x)/scale for every configuration basis state |x>."""
    if layout is None:
        layout = default_layout(domain, coherent=True)
    factors = _uk_factors(domain, layout, config=None)
    _, delta = element_blockencoding(domain.material)
    scale = 2 ** selector_width(domain) * delta
    spec = ProjectorSpec(("l", "v", "z", "b"), tuple(domain.fixed_dofs))
    return BlockEncoding(qsim.product(*factors), layout, spec, scale, delta, domain)


def config_operator(be: BlockEncoding, config: StructureConfig) -> tuple[qsim.Operator, qsim.RegisterLayout]:
    """U_K restricted to one configuration sector (exact: U_K is c-block-diagonal)."""
    layout = default_layout(be.domain, coherent=False)
    factors = _uk_factors(be.domain, layout, config=config)
    return qsim.product(*factors), layout


def extract_block(be: BlockEncoding, config: StructureConfig) -> np.ndarray:
    """Signal block <0_lvzb, i| U_K(x) |0_lvzb, j> as a 2^n_d square matrix."""
    op, layout = config_operator(be, config)
    n = layout.total_qubits
    nd = 2 ** layout.width("d")
    cols = np.zeros((2**n, nd), dtype=complex)
    # ancillas l, v, z, b sit above d, all zero: basis index equals the d value
    cols[np.arange(nd), np.arange(nd)] = 1.0
    out = qsim.apply_to_columns(layout, op, cols)
    return out[:nd, :]


def verify_block(be: BlockEncoding, config: StructureConfig,
                 reference: SymMatrix) -> float:
    """Max-abs deviation of the signal block from reference/scale."""
    block = extract_block(be, config)
    nd = block.shape[1]
    target = np.zeros((nd, nd))
    r = reference.entries
    target[: r.shape[0], : r.shape[1]] = r / be.scale
    return float(np.max(np.abs(block - target)))


def unitarity_error(be: BlockEncoding, config: StructureConfig,
                    n_vectors: int = 4, seed: int = 0) -> float:
    """max ||U*U v - v||_inf over random vectors in the config sector."""
    op, layout = config_operator(be, config)
    n = layout.total_qubits
    rng = np.random.default_rng(seed)
    vecs = rng.normal(size=(2**n, n_vectors)) + 1j * rng.normal(size=(2**n, n_vectors))
    vecs /= np.linalg.norm(vecs, axis=0)
    forward = qsim.apply_to_columns(layout, op, vecs)
    back = qsim.apply_to_columns(layout, op.adjoint(), forward)
    return float(np.max(np.abs(back - vecs)))


def config_selected_dilation(matrices: dict[tuple[int, ...], np.ndarray],
                             layout: qsim.RegisterLayout) -> qsim.Operator:
    """Sum_x |x><x| (x) dilate(M(x)) on registers c, b, d.

    Stands in for the inverse-stiffness block-encoding in coherent circuits:
    each configuration sector holds the one-ancilla dilation of its
    (filtered) matrix. Matrices must be contractions on the d space.
    """
    c_q = layout.qubits("c")
    b_q = layout.qubits("b")[0]
    d_q = layout.qubits("d")
    dim = 2 ** (1 + len(d_q))
    stack = np.zeros((2 ** len(c_q), dim, dim), dtype=complex)
    identity = np.eye(dim, dtype=complex)
    for s in range(2 ** len(c_q)):
        bits = tuple((s >> (len(c_q) - 1 - i)) & 1 for i in range(len(c_q)))
        m = matrices.get(bits)
        if m is None:
            # unused sector: any unitary completes the block-diagonal; identity
            stack[s] = identity
            continue
        padded = np.zeros((2 ** len(d_q), 2 ** len(d_q)), dtype=complex)
        padded[: m.shape[0], : m.shape[1]] = m
        stack[s] = dilate_contraction(padded)
    return qsim.selected_op(stack, c_q, (b_q,) + d_q)
