"""Dense statevector simulation with named registers and structured operators.

Conventions, fixed here and relied on by every other module:
  * qubit 0 is the most significant bit of the global basis index, so
    amplitudes.reshape((2,)*n) puts qubit q on axis q;
  * within a register the first listed qubit is the most significant bit
    of the register value (the qubit controlling the largest Grover power
    in phase estimation is the register's first qubit);
  * a phase register of width m holding integer p encodes the phase
    fraction p / 2^m.

Operators are either small dense matrices or matrix-free structures
(permutations, diagonals, rank-1 reflections, selector-indexed dense
blocks, products). Controls carry polarities and distribute over product
factors, which is what keeps 20+ qubit coherent runs tractable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .fem import GuardError

MAX_QUBITS = 26
DENSE_TARGET_LIMIT = 10


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered named registers mapped onto global qubit indices."""

    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        regs = tuple((str(n), int(w)) for n, w in self.registers)
        object.__setattr__(self, "registers", regs)
        names = [n for n, _ in regs]
        if len(set(names)) != len(names):
            raise ValueError("register names must be unique")
        if any(w < 1 for _, w in regs):
            raise ValueError("register widths must be >= 1")
        if self.total_qubits > MAX_QUBITS:
            raise GuardError(
                f"layout needs {self.total_qubits} qubits, above the "
                f"simulability guard of {MAX_QUBITS}")

    @property
    def total_qubits(self) -> int:
        return sum(w for _, w in self.registers)

    def width(self, name: str) -> int:
        for n, w in self.registers:
            if n == name:
                return w
        raise KeyError(name)

    def qubits(self, name: str) -> tuple[int, ...]:
        """Global qubit indices of a register, most significant bit first."""
        start = 0
        for n, w in self.registers:
            if n == name:
                return tuple(range(start, start + w))
            start += w
        raise KeyError(name)

    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.registers)


class QuantumState:
    """Complex amplitude vector over a register layout, kept unit norm."""

    def __init__(self, layout: RegisterLayout, amplitudes: np.ndarray | None = None):
        self.layout = layout
        n = layout.total_qubits
        if amplitudes is None:
            amplitudes = np.zeros(2**n, dtype=complex)
            amplitudes[0] = 1.0
        else:
            amplitudes = np.asarray(amplitudes, dtype=complex).reshape(2**n)
        self.amplitudes = amplitudes

    @property
    def n_qubits(self) -> int:
        return self.layout.total_qubits

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "QuantumState":
        return QuantumState(self.layout, self.amplitudes.copy())

    def register_value_index(self, assignments: dict[str, int]) -> int:
        """Global basis index with the given register integer values, rest 0."""
        idx = 0
        for name, width in self.layout.registers:
            v = assignments.get(name, 0)
            if not 0 <= v < 2**width:
                raise ValueError(f"value {v} out of range for register {name}")
            idx = (idx << width) | v
        return idx


def basis_state(layout: RegisterLayout, **register_values: int) -> QuantumState:
    state = QuantumState(layout)
    idx = state.register_value_index(register_values)
    state.amplitudes[:] = 0.0
    state.amplitudes[idx] = 1.0
    return state


@dataclass(frozen=True)
class Operator:
    """A (controlled) unitary bound to global target qubits.

    kind/payload pairs:
      'dense'           matrix (2^k, 2^k) on k target qubits
      'selected'        matrices (2^s, 2^m, 2^m); the first s targets select the block
      'selected_reflect' vecs (2^s, 2^m); per-sector Householder 1 - 2vv*, zero
                        rows meaning identity
      'perm'            perm: index map j -> perm[j] on the targets' joint space
      'diag'            diag: complex values on the targets' joint space
      'reflect'         psi: 2|psi><psi| - 1 on the targets' joint space
      'product'         factors applied in time order (first factor acts first)
    """

    kind: str
    targets: tuple[int, ...] = ()
    controls: tuple[tuple[int, int], ...] = ()
    matrix: np.ndarray | None = None
    matrices: np.ndarray | None = None
    vecs: np.ndarray | None = None
    n_select: int = 0
    perm: np.ndarray | None = None
    diag: np.ndarray | None = None
    psi: np.ndarray | None = None
    factors: tuple["Operator", ...] = ()

    def __post_init__(self):
        tset = set(self.targets)
        if len(tset) != len(self.targets):
            raise ValueError("duplicate target qubits")
        if tset & {q for q, _ in self.controls}:
            raise ValueError("target and control sets overlap")
        if self.kind == "dense":
            dim = 2 ** len(self.targets)
            if self.matrix.shape != (dim, dim):
                raise ValueError("dense matrix shape does not match targets")
            if len(self.targets) > DENSE_TARGET_LIMIT:
                raise GuardError("dense operators limited to "
                                 f"{DENSE_TARGET_LIMIT} target qubits")
        if self.kind == "reflect":
            if not math.isclose(float(np.linalg.norm(self.psi)), 1.0,
                                abs_tol=1e-10):
                raise ValueError("reflection axis must be a unit vector")

    def controlled(self, controls: tuple[tuple[int, int], ...]) -> "Operator":
        return replace(self, controls=self.controls + tuple(controls))

    def adjoint(self) -> "Operator":
        if self.kind == "dense":
            return replace(self, matrix=self.matrix.conj().T)
        if self.kind == "selected":
            return replace(self, matrices=np.conj(np.swapaxes(self.matrices, 1, 2)))
        if self.kind == "selected_reflect":
            return self
        if self.kind == "perm":
            return replace(self, perm=np.argsort(self.perm))
        if self.kind == "diag":
            return replace(self, diag=self.diag.conj())
        if self.kind == "reflect":
            return self
        if self.kind == "product":
            return replace(self, factors=tuple(f.adjoint() for f in reversed(self.factors)))
        raise ValueError(self.kind)


def product(*factors: Operator) -> Operator:
    return Operator(kind="product", factors=tuple(factors))


def dense_op(matrix: np.ndarray, targets) -> Operator:
    return Operator(kind="dense", targets=tuple(targets),
                    matrix=np.asarray(matrix, dtype=complex))


def selected_op(matrices: np.ndarray, select_qubits, data_qubits) -> Operator:
    """Block-diagonal over the selector register: |s> ⊗ v -> |s> ⊗ M_s v."""
    mats = np.asarray(matrices, dtype=complex)
    sel = tuple(select_qubits)
    dat = tuple(data_qubits)
    if mats.shape[0] != 2 ** len(sel) or mats.shape[1] != 2 ** len(dat):
        raise ValueError("selected matrices shape does not match qubits")
    return Operator(kind="selected", targets=sel + dat, matrices=mats,
                    n_select=len(sel))


def selected_householder(vecs: np.ndarray, select_qubits, data_qubits) -> Operator:
    """Per-sector Householder 1 - 2 v_s v_s*; a zero row acts as identity."""
    v = np.asarray(vecs, dtype=complex)
    sel = tuple(select_qubits)
    dat = tuple(data_qubits)
    if v.shape != (2 ** len(sel), 2 ** len(dat)):
        raise ValueError("householder vectors shape does not match qubits")
    norms = np.linalg.norm(v, axis=1)
    live = norms > 0
    if not np.allclose(norms[live], 1.0, atol=1e-10):
        raise ValueError("householder vectors must be unit or zero")
    return Operator(kind="selected_reflect", targets=sel + dat, vecs=v,
                    n_select=len(sel))


def permutation_op(perm: np.ndarray, targets) -> Operator:
    perm = np.asarray(perm, dtype=np.intp)
    if np.any(np.sort(perm) != np.arange(perm.size)):
        raise ValueError("index map is not a permutation")
    return Operator(kind="perm", targets=tuple(targets), perm=perm)


def diagonal_op(diag: np.ndarray, targets) -> Operator:
    return Operator(kind="diag", targets=tuple(targets),
                    diag=np.asarray(diag, dtype=complex))


def reflection_about(psi: np.ndarray, targets) -> Operator:
    """2|psi><psi| - 1 on the listed qubits."""
    return Operator(kind="reflect", targets=tuple(targets),
                    psi=np.asarray(psi, dtype=complex))


_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)


def hadamard(qubit: int) -> Operator:
    return dense_op(_H, (qubit,))


def pauli_x(qubit: int, controls=()) -> Operator:
    return Operator(kind="dense", targets=(qubit,), matrix=_X.copy(),
                    controls=tuple(controls))


def pauli_z(qubit: int) -> Operator:
    return diagonal_op(np.array([1.0, -1.0]), (qubit,))


def rz_exp(qubit: int, phi: float) -> Operator:
    """exp(-i*phi*Z) on one qubit."""
    return diagonal_op(np.array([np.exp(-1j * phi), np.exp(1j * phi)]), (qubit,))


def mcx(target: int, controls) -> Operator:
    """Multi-controlled X; controls are (qubit, polarity) pairs."""
    return pauli_x(target, controls)


def adder_permutation(shift: int, targets) -> Operator:
    """Modular adder |i> -> |i + shift mod 2^w> on a qubit group."""
    w = len(tuple(targets))
    n = 2**w
    perm = (np.arange(n) + shift) % n
    return permutation_op(perm, targets)


# ---------------------------------------------------------------------------
# application engine

def _axis_adjust(targets, control_axes):
    """Target axis positions after control axes have been sliced away."""
    out = []
    for t in targets:
        out.append(t - sum(1 for c in control_axes if c < t))
    return out


def _apply_core(arr: np.ndarray, op: Operator, axes: list[int]) -> np.ndarray:
    """Apply an uncontrolled structured op on given axes of arr.

    arr has one axis per remaining qubit plus a trailing batch axis.
    """
    k = len(axes)
    nax = arr.ndim - 1
    moved = np.moveaxis(arr, axes, range(nax - k, nax))
    lead = moved.shape[: nax - k]
    batch = moved.shape[-1]
    flat = moved.reshape(-1, 2**k, batch)
    if op.kind == "dense":
        out = np.einsum("ij,ajb->aib", op.matrix, flat)
    elif op.kind == "selected":
        s = op.n_select
        m = k - s
        sel = flat.reshape(-1, 2**s, 2**m, batch)
        out = np.einsum("sij,asjb->asib", op.matrices, sel).reshape(flat.shape)
    elif op.kind == "selected_reflect":
        s = op.n_select
        m = k - s
        sel = flat.reshape(-1, 2**s, 2**m, batch)
        amp = np.einsum("sj,asjb->asb", op.vecs.conj(), sel)
        out = (sel - 2.0 * np.einsum("sj,asb->asjb", op.vecs, amp)).reshape(flat.shape)
    elif op.kind == "perm":
        out = flat[:, np.argsort(op.perm), :]
    elif op.kind == "diag":
        out = flat * op.diag[None, :, None]
    elif op.kind == "reflect":
        amp = np.einsum("j,ajb->ab", op.psi.conj(), flat)
        out = 2.0 * np.einsum("j,ab->ajb", op.psi, amp) - flat
    else:
        raise ValueError(op.kind)
    out = out.reshape(moved.shape)
    return np.moveaxis(out, range(nax - k, nax), axes)


def _apply_nd(arr: np.ndarray, op: Operator, extra_controls=()) -> np.ndarray:
    controls = op.controls + tuple(extra_controls)
    if op.kind == "product":
        for f in op.factors:
            arr = _apply_nd(arr, f, controls)
        return arr
    if not controls:
        return _apply_core(arr, op, list(op.targets))
    ctrl_qubits = [q for q, _ in controls]
    if set(ctrl_qubits) & set(op.targets):
        raise ValueError("target and control sets overlap")
    idx = [slice(None)] * (arr.ndim - 1) + [slice(None)]
    for q, pol in controls:
        idx[q] = int(pol)
    view = arr[tuple(idx)]
    axes = _axis_adjust(op.targets, ctrl_qubits)
    arr[tuple(idx)] = _apply_core(view, op, axes)
    return arr


def apply(state: QuantumState, op: Operator) -> QuantumState:
    """Apply a (controlled) operator; amplitudes are updated in place."""
    n = state.n_qubits
    bad = [q for q in op.targets if not 0 <= q < n]
    bad += [q for q, _ in op.controls if not 0 <= q < n]
    if bad:
        raise ValueError(f"qubit indices {bad} outside the layout")
    arr = state.amplitudes.reshape((2,) * n + (1,))
    arr = _apply_nd(arr, op)
    state.amplitudes = arr.reshape(-1)
    return state


def apply_to_columns(layout: RegisterLayout, op: Operator,
                     columns: np.ndarray) -> np.ndarray:
    """Apply op to a batch of basis columns (shape (2^n, B)) at once."""
    n = layout.total_qubits
    arr = np.array(columns, dtype=complex).reshape((2,) * n + (columns.shape[-1],))
    arr = _apply_nd(arr, op)
    return arr.reshape(2**n, columns.shape[-1])


# ---------------------------------------------------------------------------
# register-level operations

def _register_axes(state: QuantumState, register: str) -> tuple[int, ...]:
    return state.layout.qubits(register)


def prepare_dicke(state: QuantumState, register: str, k: int) -> QuantumState:
    """Write the Hamming-weight-k uniform superposition into a zeroed register."""
    axes = _register_axes(state, register)
    w = len(axes)
    if not 0 <= k <= w:
        raise ValueError("Hamming weight out of range")
    n = state.n_qubits
    arr = state.amplitudes.reshape((2,) * n)
    moved = np.moveaxis(arr, axes, range(n - w, n)).reshape(-1, 2**w)
    if np.linalg.norm(moved[:, 1:]) > 1e-12:
        raise ValueError("register must be in |0...0> before Dicke preparation")
    values = np.arange(2**w)
    mask = np.array([bin(v).count("1") == k for v in values])
    amp = np.zeros(2**w)
    amp[mask] = 1.0 / math.sqrt(math.comb(w, k))
    out = moved[:, :1] * amp[None, :]
    out = out.reshape((2,) * (n - w) + (2,) * w)
    state.amplitudes = np.moveaxis(out, range(n - w, n), axes).reshape(-1)
    return state


def dicke_vector(width: int, k: int) -> np.ndarray:
    """Amplitude vector of the Dicke state on `width` qubits."""
    values = np.arange(2**width)
    mask = np.array([bin(v).count("1") == k for v in values])
    amp = np.zeros(2**width, dtype=complex)
    amp[mask] = 1.0 / math.sqrt(math.comb(width, k))
    return amp


def uniform_vector(width: int) -> np.ndarray:
    return np.full(2**width, 1.0 / math.sqrt(2**width), dtype=complex)


def _qft_factors(qubits, inverse: bool) -> list[Operator]:
    """Textbook QFT circuit: H + controlled phases + bit reversal."""
    qs = list(qubits)
    m = len(qs)
    sign = -1.0 if inverse else 1.0
    stage = []
    for i in range(m):
        stage.append(hadamard(qs[i]))
        for j in range(i + 1, m):
            angle = sign * math.pi / 2 ** (j - i)
            cp = diagonal_op(np.array([1.0, np.exp(1j * angle)]), (qs[i],))
            stage.append(cp.controlled(((qs[j], 1),)))
    rev = np.arange(2**m)
    rev_bits = np.zeros_like(rev)
    for b in range(m):
        rev_bits |= ((rev >> b) & 1) << (m - 1 - b)
    swap = permutation_op(rev_bits, qs)
    if inverse:
        # adjoint of the forward circuit: bit reversal first, then the
        # reversed stage (phases already negated above, H self-adjoint)
        return [swap] + list(reversed(stage))
    return stage + [swap]


def qft_operator(qubits) -> Operator:
    return Operator(kind="product", factors=tuple(_qft_factors(qubits, inverse=False)))


def inverse_qft_operator(qubits) -> Operator:
    return Operator(kind="product", factors=tuple(_qft_factors(qubits, inverse=True)))


def inverse_qft(state: QuantumState, register: str) -> QuantumState:
    """Inverse QFT on a register: sum_j e^{2pi i j p/N} |j> -> |p>."""
    return apply(state, inverse_qft_operator(state.layout.qubits(register)))


def qft(state: QuantumState, register: str) -> QuantumState:
    return apply(state, qft_operator(state.layout.qubits(register)))


def marginal_probabilities(state: QuantumState, register: str) -> np.ndarray:
    """Exact marginal distribution over a register's integer values."""
    axes = _register_axes(state, register)
    n = state.n_qubits
    probs = np.abs(state.amplitudes.reshape((2,) * n)) ** 2
    others = tuple(a for a in range(n) if a not in axes)
    if others:
        probs = probs.sum(axis=others)
    # remaining axes are the register axes in ascending global order == MSB-first
    return probs.reshape(-1)


def measure_distribution(state: QuantumState, register: str) -> dict[str, float]:
    probs = marginal_probabilities(state, register)
    w = state.layout.width(register)
    return {format(i, f"0{w}b"): float(p) for i, p in enumerate(probs)}


def sample_register(state: QuantumState, register: str, shots: int,
                    seed: int = 0) -> dict[str, int]:
    """Seeded multinomial sampling of a register's marginal."""
    probs = marginal_probabilities(state, register)
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, probs)
    w = state.layout.width(register)
    return {format(i, f"0{w}b"): int(c) for i, c in enumerate(counts) if c}


def operator_matrix(layout: RegisterLayout, op: Operator) -> np.ndarray:
    """Materialize a (small) operator as a dense matrix, for verification."""
    n = layout.total_qubits
    if n > 14:
        raise GuardError("dense materialization limited to 14 qubits")
    return apply_to_columns(layout, op, np.eye(2**n, dtype=complex))
