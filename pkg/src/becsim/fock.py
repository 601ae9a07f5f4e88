"""Truncated Fock-space and quantum-dot operator algebra.

The composite space is ordered as the 4-level quantum dot first, followed by
one truncated Fock factor per (mode, polarization) pair.  Basis indices are
big-endian: the quantum dot is the most significant digit.

Operators are assembled sparsely (the composite spaces are ~10^3 dimensional
but the operators are extremely sparse) and exposed densely through
:attr:`Operator.matrix`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, InvalidCutoffError, MissingModeError

QD_DIM = 4


class QDState(enum.IntEnum):
    """Quantum-dot basis states; the value is the basis index."""

    G = 0
    X1 = 1
    X2 = 2
    XX = 3

    def ket(self) -> np.ndarray:
        v = np.zeros(QD_DIM, dtype=complex)
        v[self.value] = 1.0
        return v


class Pol(str, enum.Enum):
    H = "H"
    V = "V"


FSS_MODES = ("lambda1", "lambda2", "lambda3", "lambda4")
DEGENERATE_MODES = ("early", "late")


@dataclass(frozen=True)
class FockFactor:
    mode_label: str
    polarization: Pol
    cutoff_dim: int


@dataclass(frozen=True)
class HilbertLayout:
    """Ordered tensor-factor list: QD first, then the Fock factors."""

    factors: tuple[FockFactor, ...]
    qd_dim: int = QD_DIM

    def __post_init__(self) -> None:
        seen = set()
        for f in self.factors:
            if f.cutoff_dim < 2:
                raise InvalidCutoffError(f"cutoff_dim must be >= 2, got {f.cutoff_dim}")
            key = (f.mode_label, Pol(f.polarization))
            if key in seen:
                raise ValueError(f"duplicate factor {key}")
            seen.add(key)

    @property
    def photonic_dims(self) -> tuple[int, ...]:
        return tuple(f.cutoff_dim for f in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.qd_dim,) + self.photonic_dims

    @property
    def photonic_dim(self) -> int:
        return int(np.prod(self.photonic_dims, dtype=np.int64))

    @property
    def total_dim(self) -> int:
        return self.qd_dim * self.photonic_dim

    @property
    def mode_labels(self) -> tuple[str, ...]:
        out: list[str] = []
        for f in self.factors:
            if f.mode_label not in out:
                out.append(f.mode_label)
        return tuple(out)

    @property
    def fss_nonzero(self) -> bool:
        return self.mode_labels == FSS_MODES

    def factor_index(self, mode_label: str, polarization: Pol | str) -> int:
        """Position of the factor among the photonic factors (QD excluded)."""
        pol = Pol(polarization)
        for i, f in enumerate(self.factors):
            if f.mode_label == mode_label and f.polarization == pol:
                return i
        raise MissingModeError(f"no factor ({mode_label!r}, {pol.value}) in layout")

    def vacuum_index(self, qd: QDState = QDState.G) -> int:
        return int(qd) * self.photonic_dim

    def basis_index(self, qd: QDState, occupations: Mapping[tuple[str, str], int] | None = None) -> int:
        """Flat index of ``|qd> (x) |n_1, n_2, ...>``; unnamed factors are in vacuum."""
        digits = [0] * len(self.factors)
        for (label, pol), n in (occupations or {}).items():
            i = self.factor_index(label, pol)
            if not 0 <= n < self.factors[i].cutoff_dim:
                raise DomainError(f"occupation {n} outside cutoff for ({label}, {pol})")
            digits[i] = n
        return int(np.ravel_multi_index((int(qd), *digits), self.dims))


def make_layout(fss_nonzero: bool, cutoff: int = 2) -> HilbertLayout:
    """Build the standard cascade layout.

    With fine-structure splitting each transition gets its own wavelength
    (``lambda1..lambda4``); without it the cascade collapses onto an early and
    a late mode.  Every mode carries an H and a V factor, H first.
    """
    if cutoff < 2:
        raise InvalidCutoffError(f"cutoff must be >= 2, got {cutoff}")
    modes = FSS_MODES if fss_nonzero else DEGENERATE_MODES
    factors = tuple(FockFactor(m, p, cutoff) for m in modes for p in (Pol.H, Pol.V))
    return HilbertLayout(factors)


def single_mode_annihilation(d: int) -> np.ndarray:
    """``a = sum_n sqrt(n) |n-1><n|`` on a ``d``-level Fock space."""
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex)


@dataclass(frozen=True, eq=False)
class Operator:
    """Operator on the full layout, stored sparsely."""

    layout: HilbertLayout
    sparse: sp.csr_matrix

    def __post_init__(self) -> None:
        n = self.layout.total_dim
        if self.sparse.shape != (n, n):
            raise ValueError(f"operator shape {self.sparse.shape} does not match total_dim {n}")

    @cached_property
    def matrix(self) -> np.ndarray:
        m = self.sparse.toarray()
        m.setflags(write=False)
        return m

    def dag(self) -> "Operator":
        return Operator(self.layout, self.sparse.conj().T.tocsr())

    def _check(self, other: "Operator") -> None:
        if other.layout != self.layout:
            raise ValueError("operators live on different layouts")

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.layout, (self.sparse + other.sparse).tocsr())

    def __sub__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.layout, (self.sparse - other.sparse).tocsr())

    def __mul__(self, scalar: complex) -> "Operator":
        out = (self.sparse * scalar).tocsr()
        out.eliminate_zeros()
        return Operator(self.layout, out)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.layout, (self.sparse @ other.sparse).tocsr())
        return self.sparse @ other


def embed(
    layout: HilbertLayout,
    qd_op: np.ndarray | None = None,
    factor_ops: Mapping[int, np.ndarray] | None = None,
) -> Operator:
    """Tensor ``qd_op`` and per-factor operators together, identity elsewhere."""
    factor_ops = dict(factor_ops or {})
    parts = [qd_op if qd_op is not None else None]
    parts += [factor_ops.pop(i, None) for i in range(len(layout.factors))]
    if factor_ops:
        raise MissingModeError(f"factor indices {sorted(factor_ops)} outside layout")
    out = sp.identity(1, dtype=complex, format="csr")
    for d, op in zip(layout.dims, parts):
        block = sp.identity(d, dtype=complex, format="csr") if op is None else sp.csr_matrix(op, dtype=complex)
        if block.shape != (d, d):
            raise ValueError(f"factor operator shape {block.shape} does not match dimension {d}")
        out = sp.kron(out, block, format="csr")
    out.eliminate_zeros()
    return Operator(layout, out)


def identity(layout: HilbertLayout) -> Operator:
    return embed(layout)


def ladder(
    layout: HilbertLayout,
    mode_label: str,
    polarization: Pol | str,
    kind: Literal["create", "annihilate"],
) -> Operator:
    i = layout.factor_index(mode_label, polarization)
    a = single_mode_annihilation(layout.factors[i].cutoff_dim)
    if kind == "create":
        a = a.T.conj()
    elif kind != "annihilate":
        raise ValueError(f"kind must be 'create' or 'annihilate', got {kind!r}")
    return embed(layout, factor_ops={i: a})


def number_op(layout: HilbertLayout, mode_label: str, polarization: Pol | str) -> Operator:
    i = layout.factor_index(mode_label, polarization)
    d = layout.factors[i].cutoff_dim
    return embed(layout, factor_ops={i: np.diag(np.arange(d, dtype=float))})


def _check_angles(theta: float, phi: float) -> None:
    eps = 1e-12
    if not -eps <= theta <= np.pi / 2 + eps:
        raise DomainError(f"theta={theta} outside [0, pi/2]")
    if not -eps <= phi < 2 * np.pi:
        raise DomainError(f"phi={phi} outside [0, 2pi)")


def rotation_coefficients(sign: str, theta: float, phi: float) -> tuple[complex, complex]:
    """(H, V) coefficients of the rotated *creation* operator.

    The annihilators are the rows of the SU(2) matrix
    ``[[cos, e^{i phi} sin], [-e^{-i phi} sin, cos]]``; creators are their
    exact adjoints, so the two rotated modes stay orthonormal.
    """
    _check_angles(theta, phi)
    c, s = np.cos(theta), np.sin(theta)
    if sign in ("+", "plus"):
        return complex(c), np.exp(-1j * phi) * s
    if sign in ("-", "minus"):
        return -np.exp(1j * phi) * s, complex(c)
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def rotated_create(layout: HilbertLayout, mode_label: str, sign: str, theta: float, phi: float) -> Operator:
    ch, cv = rotation_coefficients(sign, theta, phi)
    return ch * ladder(layout, mode_label, Pol.H, "create") + cv * ladder(layout, mode_label, Pol.V, "create")


def rotated_annihilate(layout: HilbertLayout, mode_label: str, sign: str, theta: float, phi: float) -> Operator:
    return rotated_create(layout, mode_label, sign, theta, phi).dag()


def qd_projector_matrix(to: QDState, frm: QDState) -> np.ndarray:
    m = np.zeros((QD_DIM, QD_DIM), dtype=complex)
    m[int(to), int(frm)] = 1.0
    return m


def qd_transition(layout: HilbertLayout, frm: QDState, to: QDState) -> Operator:
    """``|to><from|`` on the dot, identity on every Fock factor."""
    return embed(layout, qd_op=qd_projector_matrix(QDState(to), QDState(frm)))


def product_state(layout: HilbertLayout, qd: QDState, occupations: Mapping[tuple[str, str], int] | None = None) -> np.ndarray:
    """Basis ket ``|qd> (x) |occupations>`` as a dense vector."""
    v = np.zeros(layout.total_dim, dtype=complex)
    v[layout.basis_index(qd, occupations)] = 1.0
    return v


def photonic_basis_index(layout: HilbertLayout, occupations: Sequence[int]) -> int:
    return int(np.ravel_multi_index(tuple(occupations), layout.photonic_dims))
