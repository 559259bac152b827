"""Classical finite-element core for the binary MBB beam problem.

Plane-stress bilinear quadrilateral elements on a regular n_x-by-n_y grid.
Nodes are counted column-wise, top to bottom then left to right; node i
carries horizontal DoF 2i and vertical DoF 2i+1 (0-indexed). The element
stiffness matrix is the closed-form 8x8 pattern parametrized by Young's
modulus and Poisson's ratio, independent of the element side length.

Feasibility of a binary design is load-consistency: a configuration has
finite compliance iff the reduced force lies in the range of the reduced
stiffness matrix. Rank-deficient designs whose zero modes are orthogonal
to the load (dangling nodes away from the load path) are feasible.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

# relative eigenvalue threshold declaring a mode numerically zero
SINGULAR_RTOL = 1e-12
# mass of the force on zero modes above which the design is infeasible
NULL_MASS_TOL = 1e-12
# enumeration guard
MAX_ENUM_ELEMENTS = 24


class GuardError(RuntimeError):
    """A desk-scale guard (qubit count, enumeration size) was exceeded."""


@dataclass(frozen=True)
class Material:
    """Isotropic plane-stress material."""

    young_modulus: float = 1.0
    poisson_ratio: float = 0.3

    def __post_init__(self):
        if not self.young_modulus > 0:
            raise ValueError("young_modulus must be positive")
        if not 0.0 <= self.poisson_ratio < 0.5:
            raise ValueError("poisson_ratio must lie in [0, 0.5)")


@dataclass(frozen=True)
class SymMatrix:
    """Dense symmetric matrix; construction guarantees exact symmetry."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("entries must be square")
        if not np.array_equal(a, a.T):
            raise ValueError("entries must be exactly symmetric")
        object.__setattr__(self, "entries", a)

    @property
    def order(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class StructureConfig:
    """Binary material assignment; bit e-1 is x_e (1 solid, 0 void)."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0/1")

    @classmethod
    def from_bitstring(cls, s: str) -> "StructureConfig":
        return cls(tuple(int(ch) for ch in s))

    @classmethod
    def from_int(cls, value: int, n_el: int) -> "StructureConfig":
        """Integer encoding with x_1 as the most significant bit."""
        return cls(tuple((value >> (n_el - 1 - i)) & 1 for i in range(n_el)))

    @classmethod
    def all_solid(cls, n_el: int) -> "StructureConfig":
        return cls((1,) * n_el)

    @classmethod
    def all_void(cls, n_el: int) -> "StructureConfig":
        return cls((0,) * n_el)

    @property
    def n_el(self) -> int:
        return len(self.bits)

    @property
    def weight(self) -> int:
        return sum(self.bits)

    def to_int(self) -> int:
        v = 0
        for b in self.bits:
            v = (v << 1) | b
        return v

    def bitstring(self) -> str:
        return "".join(str(b) for b in self.bits)

    def glyph_grid(self, n_x: int, n_y: int) -> list[str]:
        """Row-major picture of the design, '#' solid and '.' void."""
        if len(self.bits) != n_x * n_y:
            raise ValueError("config length does not match the grid")
        return [
            "".join("#" if self.bits[c * n_y + r] else "." for c in range(n_x))
            for r in range(n_y)
        ]

    def __str__(self) -> str:
        return self.bitstring()


def _mbb_fixed_dofs(n_x: int, n_y: int) -> tuple[int, ...]:
    # horizontal DoFs of all left-edge nodes + vertical DoF of the
    # bottom-right node (geometry-derived MBB supports)
    fixed = [2 * i for i in range(n_y + 1)]
    fixed.append(2 * (n_x * (n_y + 1) + n_y) + 1)
    return tuple(sorted(fixed))


def _mbb_force(n_x: int, n_y: int) -> np.ndarray:
    f = np.zeros(2 * (n_x + 1) * (n_y + 1))
    f[1] = -1.0  # unit load, downward, vertical DoF of the top-left node
    return f


@dataclass(frozen=True)
class MbbDomain:
    """Mesh dimensions, material, supports and load of the physical problem."""

    n_x: int
    n_y: int
    material: Material = Material()
    fixed_dofs: tuple[int, ...] = ()
    force: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("mesh must have at least one element per direction")
        if len(self.fixed_dofs) == 0 and self.force.size == 0:
            object.__setattr__(self, "fixed_dofs", _mbb_fixed_dofs(self.n_x, self.n_y))
            object.__setattr__(self, "force", _mbb_force(self.n_x, self.n_y))
        if len(set(self.fixed_dofs)) != len(self.fixed_dofs):
            raise ValueError("duplicate fixed DoF indices")
        if any(not 0 <= i < self.n_dof for i in self.fixed_dofs):
            raise ValueError("fixed DoF index out of range")
        if self.force.shape != (self.n_dof,):
            raise ValueError("force vector has wrong length")
        self.force.setflags(write=False)

    @classmethod
    def mbb(cls, n_x: int, n_y: int, material: Material = Material()) -> "MbbDomain":
        """Default MBB setup: left-edge rollers, bottom-right support, top-left load."""
        return cls(n_x, n_y, material,
                   _mbb_fixed_dofs(n_x, n_y), _mbb_force(n_x, n_y))

    @property
    def n_el(self) -> int:
        return self.n_x * self.n_y

    @property
    def n_dof(self) -> int:
        return 2 * (self.n_x + 1) * (self.n_y + 1)

    @property
    def free_dofs(self) -> tuple[int, ...]:
        fixed = set(self.fixed_dofs)
        return tuple(i for i in range(self.n_dof) if i not in fixed)

    @property
    def n_free(self) -> int:
        return self.n_dof - len(self.fixed_dofs)

    def reduced_force(self) -> np.ndarray:
        return self.force[list(self.free_dofs)]


def element_stiffness(material: Material) -> SymMatrix:
    """Closed-form 8x8 element stiffness matrix E/(1-nu^2) * K0."""
    nu = material.poisson_ratio
    k1 = 1 / 2 - nu / 6
    k2 = -1 / 8 - nu / 8
    k3 = nu / 6
    k4 = -1 / 8 + 3 * nu / 8
    k5 = -1 / 4 - nu / 12
    k6 = 1 / 8 - 3 * nu / 8
    k7 = -1 / 4 + nu / 12
    k8 = 1 / 8 + nu / 8
    pattern = [
        [k1, k2, k3, k4, k5, k6, k7, k8],
        [k2, k1, k6, k5, k4, k3, k8, k7],
        [k3, k6, k1, k8, k7, k2, k5, k4],
        [k4, k5, k8, k1, k2, k7, k6, k3],
        [k5, k4, k7, k2, k1, k8, k3, k6],
        [k6, k3, k2, k7, k8, k1, k4, k5],
        [k7, k8, k5, k6, k3, k4, k1, k2],
        [k8, k7, k4, k3, k6, k5, k2, k1],
    ]
    k0 = np.array(pattern)
    return SymMatrix(material.young_modulus / (1 - nu**2) * k0)


def element_norm(material: Material) -> float:
    """Spectral norm of the element stiffness matrix (the dilation scale)."""
    return float(np.abs(np.linalg.eigvalsh(element_stiffness(material).entries)).max())


def offset_delta(e: int, n_y: int) -> int:
    """Global row/column offset of element e's block, elements counted 1..n_el."""
    if e < 1:
        raise ValueError("element index is 1-based")
    return 2 * (e - 1 + (e - 1) // n_y)


def element_dofs(e: int, n_y: int) -> list[int]:
    """Global DoF indices of element e: four contiguous, a gap of 2(n_y-1), four more."""
    d = offset_delta(e, n_y)
    gap = 2 * (n_y - 1)
    return [d + i for i in range(4)] + [d + 4 + gap + i for i in range(4)]


def assemble_global(domain: MbbDomain, config: StructureConfig,
                    void_density: float = 0.0) -> SymMatrix:
    """Sum of element blocks over solid elements; void elements weighted by void_density."""
    if config.n_el != domain.n_el:
        raise ValueError("config length does not match the domain")
    k_el = element_stiffness(domain.material).entries
    k = np.zeros((domain.n_dof, domain.n_dof))
    for e in range(1, domain.n_el + 1):
        w = 1.0 if config.bits[e - 1] else void_density
        if w == 0.0:
            continue
        idx = element_dofs(e, domain.n_y)
        k[np.ix_(idx, idx)] += w * k_el
    return SymMatrix(k)


def reduce_free(k: SymMatrix, fixed_dofs) -> SymMatrix:
    """Submatrix on the free DoFs, relative order preserved."""
    fixed = list(fixed_dofs)
    if len(set(fixed)) != len(fixed):
        raise ValueError("duplicate fixed DoF indices")
    keep = [i for i in range(k.order) if i not in set(fixed)]
    return SymMatrix(k.entries[np.ix_(keep, keep)])


def _solve_consistent(k_free: np.ndarray, f_free: np.ndarray) -> float:
    """fᵀK⁺f when f is in range(K), else inf."""
    w, v = np.linalg.eigh(k_free)
    lmax = w[-1] if w.size else 0.0
    if lmax <= 0.0:
        return math.inf
    tol = SINGULAR_RTOL * lmax
    ov = v.T @ f_free
    null_mass = float(np.sum(ov[w < tol] ** 2))
    if null_mass > NULL_MASS_TOL:
        return math.inf
    pos = w >= tol
    return float(np.sum(ov[pos] ** 2 / w[pos]))


def compliance_direct(domain: MbbDomain, config: StructureConfig,
                      void_density: float = 0.0) -> float:
    """Compliance fᵀu from a dense solve; inf signals an infeasible design.

    With void_density > 0 the system is positive definite and solved
    directly (the SIMP-style pseudo-density comparison). At void_density 0
    the solve is the consistent pseudo-inverse: designs whose zero modes
    carry load weight are infeasible.
    """
    k = assemble_global(domain, config, void_density)
    k_free = reduce_free(k, domain.fixed_dofs).entries
    f_free = domain.reduced_force()
    if void_density > 0.0:
        w = np.linalg.eigvalsh(k_free)
        if w.size == 0 or w[0] < SINGULAR_RTOL * max(w[-1], 0.0):
            return _solve_consistent(k_free, f_free)
        u = np.linalg.solve(k_free, f_free)
        return float(f_free @ u)
    return _solve_consistent(k_free, f_free)


def is_feasible(domain: MbbDomain, config: StructureConfig) -> bool:
    return math.isfinite(compliance_direct(domain, config))


def volume_fraction(config: StructureConfig) -> float:
    if config.n_el == 0:
        return 0.0
    return config.weight / config.n_el


@dataclass(frozen=True)
class ThetaRow:
    config: StructureConfig
    compliance: float
    theta: float
    t_value: float


@dataclass(frozen=True)
class ThetaTable:
    """Brute-force oracle table: classical compliance and emulated phase per config."""

    rows: tuple[ThetaRow, ...]

    def theta_of(self, config: StructureConfig) -> float:
        try:
            return self._by_bits[config.bits]
        except AttributeError:
            object.__setattr__(self, "_by_bits",
                               {r.config.bits: r.theta for r in self.rows})
            return self._by_bits[config.bits]

    def configs(self) -> list[StructureConfig]:
        return [r.config for r in self.rows]

    def sorted_by_theta(self) -> list[ThetaRow]:
        return sorted(self.rows, key=lambda r: r.theta)


def iter_configs(n_el: int, volume_k: int | None = None):
    """All configs, or all configs of Hamming weight volume_k."""
    if volume_k is None:
        for value in range(2**n_el):
            yield StructureConfig.from_int(value, n_el)
    else:
        for solid in itertools.combinations(range(n_el), volume_k):
            yield StructureConfig(tuple(1 if i in solid else 0 for i in range(n_el)))


def enumerate_thetas(domain: MbbDomain, poly_spec, volume_k: int | None = None,
                     mode: str = "exact") -> ThetaTable:
    """Evaluate compliance and the QSVT-emulated phase for every configuration.

    mode 'exact' applies the target filter directly to the singular values,
    'polynomial' the fitted Chebyshev filter (fit once, shared).
    """
    if domain.n_el > MAX_ENUM_ELEMENTS:
        raise GuardError(
            f"enumeration over {domain.n_el} elements exceeds the guard "
            f"({MAX_ENUM_ELEMENTS})")
    from . import qae, qsvt  # late import; qae depends on this module

    if mode == "polynomial":
        filt = qsvt.fit_even_poly(poly_spec)
    elif mode == "exact":
        filt = poly_spec
    else:
        raise ValueError("mode must be 'exact' or 'polynomial'")
    constants = qae.scaling_constants(domain, poly_spec)

    configs, eigs, weights, comps = [], [], [], []
    for config in iter_configs(domain.n_el, volume_k):
        k_free = reduce_free(assemble_global(domain, config), domain.fixed_dofs)
        f_free = domain.reduced_force()
        f_hat = f_free / np.linalg.norm(f_free)
        w, v = np.linalg.eigh(k_free.entries / constants.beta)
        configs.append(config)
        eigs.append(w)
        weights.append((v.T @ f_hat) ** 2)
        comps.append(compliance_direct(domain, config))

    # one batched filter evaluation over all eigenvalues
    all_eigs = np.concatenate(eigs)
    filtered = qsvt.filter_values(filt, all_eigs)
    split = np.split(filtered, np.cumsum([len(w) for w in eigs])[:-1])
    rows = []
    for config, q, wts, c in zip(configs, split, weights, comps):
        t = float(np.sum(q * wts))
        rows.append(ThetaRow(config, c, qae.theta_of_t(t), t))
    return ThetaTable(tuple(rows))
