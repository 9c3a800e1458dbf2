"""Finite-dimensional Hilbert spaces over labeled optical modes.

A basis is a strictly increasing tuple of :class:`ModeLabel`.  States and
operators are immutable numpy-backed values tied to one basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

MAX_DIMENSION = 2**20
POLARIZATIONS = ("H", "V")

HERMITIAN_TOL = 1e-10
PROJECTOR_TOL = 1e-12


class BasisMismatchError(ValueError):
    """Raised when labels or bases do not line up."""


class NotHermitianError(ValueError):
    pass


@dataclass(frozen=True)
class ModeLabel:
    """One basis element: spatial path, optional polarization, optional tag.

    ``path`` may be empty for purely internal factors (e.g. a bare
    polarization qubit used in a tensor product).
    """

    path: str
    pol: str | None = None
    tag: str | None = None

    def __post_init__(self):
        if self.pol is not None and self.pol not in POLARIZATIONS:
            raise ValueError(f"polarization must be one of {POLARIZATIONS}, got {self.pol!r}")
        if not self.path and self.pol is None and self.tag is None:
            raise ValueError("mode label needs at least one of path, pol, tag")

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.path, self.pol or "", self.tag or "")

    @property
    def internal(self) -> tuple[str, str]:
        """Internal (non-spatial) part of the label."""
        return (self.pol or "", self.tag or "")

    def __lt__(self, other: "ModeLabel") -> bool:
        return self.key < other.key

    def __le__(self, other: "ModeLabel") -> bool:
        return self.key <= other.key

    def __gt__(self, other: "ModeLabel") -> bool:
        return self.key > other.key

    def __ge__(self, other: "ModeLabel") -> bool:
        return self.key >= other.key

    def __str__(self) -> str:
        s = self.path
        if self.pol:
            s += "." + self.pol
        if self.tag:
            s += "#" + self.tag
        return s

    @classmethod
    def parse(cls, text: str) -> "ModeLabel":
        """Inverse of ``str()``: ``path[.pol][#tag]``."""
        tag = None
        if "#" in text:
            text, tag = text.split("#", 1)
        pol = None
        if "." in text:
            text, pol = text.split(".", 1)
        return cls(text, pol, tag)

    def matches(self, ref: str) -> bool:
        """True if this label is selected by a (possibly partial) reference.

        ``"B"`` selects every label on path B; ``"B.H"`` only the H ones.
        """
        want = ModeLabel.parse(ref)
        if want.path != self.path:
            return False
        if want.pol is not None and want.pol != self.pol:
            return False
        if want.tag is not None and want.tag != self.tag:
            return False
        return True


Basis = tuple[ModeLabel, ...]
ModeRef = Union[ModeLabel, str]


def make_basis(labels: Iterable[ModeLabel | str]) -> Basis:
    """Sort labels into canonical order; reject duplicates."""
    out = [ModeLabel.parse(x) if isinstance(x, str) else x for x in labels]
    out.sort()
    for a, b in zip(out, out[1:]):
        if a == b:
            raise BasisMismatchError(f"duplicate mode label {a}")
    if len(out) > MAX_DIMENSION:
        raise ValueError(f"basis dimension {len(out)} exceeds {MAX_DIMENSION}")
    return tuple(out)


def product_basis(paths: Sequence[str], pols: Sequence[str | None] = (None,),
                  tags: Sequence[str | None] = (None,)) -> Basis:
    return make_basis(ModeLabel(p, q, t) for p in paths for q in pols for t in tags)


def _check_basis(basis: Basis) -> None:
    for a, b in zip(basis, basis[1:]):
        if not a < b:
            raise BasisMismatchError(f"basis not in canonical order at {a}, {b}")


def resolve_modes(basis: Basis, refs: Iterable[ModeRef]) -> list[int]:
    """Indices of basis labels selected by ``refs`` (labels or path references)."""
    idx: set[int] = set()
    for ref in refs:
        if isinstance(ref, ModeLabel):
            try:
                idx.add(basis.index(ref))
            except ValueError:
                raise BasisMismatchError(f"mode {ref} not in basis") from None
            continue
        hits = [i for i, lab in enumerate(basis) if lab.matches(ref)]
        if not hits:
            raise BasisMismatchError(f"mode reference {ref!r} matches nothing in basis")
        idx.update(hits)
    return sorted(idx)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StateVector:
    basis: Basis
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_basis(self.basis)
        amps = _frozen(self.amplitudes)
        if amps.shape != (len(self.basis),):
            raise BasisMismatchError(
                f"{amps.shape[0] if amps.ndim == 1 else amps.shape} amplitudes for "
                f"basis of size {len(self.basis)}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("state has non-finite amplitudes")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_dict(cls, basis: Basis, amps: dict) -> "StateVector":
        vec = np.zeros(len(basis), dtype=np.complex128)
        for ref, a in amps.items():
            for i in resolve_modes(basis, [ref]):
                vec[i] += a
        return cls(basis, vec)

    @classmethod
    def basis_state(cls, basis: Basis, label: ModeRef) -> "StateVector":
        (i,) = resolve_modes(basis, [label])
        vec = np.zeros(len(basis), dtype=np.complex128)
        vec[i] = 1.0
        return cls(basis, vec)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amplitudes / n)

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def amplitude(self, label: ModeRef) -> complex:
        (i,) = resolve_modes(self.basis, [label])
        return complex(self.amplitudes[i])

    def restrict(self, refs: Iterable[ModeRef]) -> "StateVector":
        """Zero every amplitude outside ``refs`` (keeps the basis)."""
        keep = resolve_modes(self.basis, refs)
        vec = np.zeros_like(self.amplitudes)
        vec[keep] = self.amplitudes[keep]
        return StateVector(self.basis, vec)

    def to_dict(self, tol: float = 0.0) -> dict[str, complex]:
        return {str(lab): complex(a) for lab, a in zip(self.basis, self.amplitudes) if abs(a) > tol}

    def __add__(self, other: "StateVector") -> "StateVector":
        _same_basis(self.basis, other.basis)
        return StateVector(self.basis, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "StateVector") -> "StateVector":
        _same_basis(self.basis, other.basis)
        return StateVector(self.basis, self.amplitudes - other.amplitudes)

    def __mul__(self, c: complex) -> "StateVector":
        return StateVector(self.basis, self.amplitudes * c)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return self.basis == other.basis and np.array_equal(self.amplitudes, other.amplitudes)

    def __hash__(self):
        return hash((self.basis, self.amplitudes.tobytes()))

    def __repr__(self):
        terms = " + ".join(f"({a:.4g})|{k}>" for k, a in self.to_dict(1e-15).items())
        return f"StateVector({terms or '0'})"


@dataclass(frozen=True, eq=False)
class Operator:
    basis: Basis
    matrix: np.ndarray
    projector: bool = field(default=False)

    def __post_init__(self):
        _check_basis(self.basis)
        m = _frozen(self.matrix)
        n = len(self.basis)
        if m.shape != (n, n):
            raise BasisMismatchError(f"matrix shape {m.shape} does not match basis size {n}")
        object.__setattr__(self, "matrix", m)
        if self.projector:
            if np.linalg.norm(m @ m - m) > PROJECTOR_TOL or np.linalg.norm(m.conj().T - m) > PROJECTOR_TOL:
                raise ValueError("operator flagged as projector is not an orthogonal projector")

    @classmethod
    def identity(cls, basis: Basis) -> "Operator":
        return cls(basis, np.eye(len(basis)), projector=True)

    @classmethod
    def zeros(cls, basis: Basis) -> "Operator":
        return cls(basis, np.zeros((len(basis), len(basis))), projector=True)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def adjoint(self) -> "Operator":
        return Operator(self.basis, self.matrix.conj().T, self.projector)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return float(np.linalg.norm(self.matrix - self.matrix.conj().T)) <= tol

    def unitarity_defect(self) -> float:
        return float(np.linalg.norm(self.matrix.conj().T @ self.matrix - np.eye(self.dim)))

    def apply(self, state: StateVector) -> StateVector:
        _same_basis(self.basis, state.basis)
        return StateVector(self.basis, self.matrix @ state.amplitudes)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return self.apply(other)
        if isinstance(other, Operator):
            _same_basis(self.basis, other.basis)
            return Operator(self.basis, self.matrix @ other.matrix)
        return NotImplemented

    def __add__(self, other: "Operator") -> "Operator":
        _same_basis(self.basis, other.basis)
        return Operator(self.basis, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        _same_basis(self.basis, other.basis)
        return Operator(self.basis, self.matrix - other.matrix)

    def __mul__(self, c: complex) -> "Operator":
        return Operator(self.basis, self.matrix * c)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        return self.basis == other.basis and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash((self.basis, self.matrix.tobytes()))


def _same_basis(a: Basis, b: Basis) -> None:
    if a != b:
        raise BasisMismatchError("operands live on different bases")


def inner(bra: StateVector, ket: StateVector) -> complex:
    """<bra|ket>, conjugate-linear in ``bra``."""
    _same_basis(bra.basis, ket.basis)
    return complex(np.vdot(bra.amplitudes, ket.amplitudes))


def projector(modes: Iterable[ModeRef], basis: Basis) -> Operator:
    """Diagonal 0/1 projector onto the selected modes."""
    diag = np.zeros(len(basis))
    diag[resolve_modes(basis, modes)] = 1.0
    return Operator(basis, np.diag(diag), projector=True)


def _merge_labels(a: ModeLabel, b: ModeLabel) -> ModeLabel:
    if a.path and b.path:
        path = f"{a.path}|{b.path}"
    else:
        path = a.path or b.path
    if a.pol and b.pol:
        raise BasisMismatchError(f"both factors carry polarization ({a}, {b})")
    if a.tag and b.tag:
        raise BasisMismatchError(f"both factors carry a tag ({a}, {b})")
    return ModeLabel(path, a.pol or b.pol, a.tag or b.tag)


def _product_permutation(ba: Basis, bb: Basis) -> tuple[Basis, np.ndarray]:
    raw = [_merge_labels(x, y) for x in ba for y in bb]
    order = sorted(range(len(raw)), key=lambda i: raw[i].key)
    basis = tuple(raw[i] for i in order)
    _check_basis(basis)
    return basis, np.asarray(order)


def tensor(a, b):
    """Tensor product of two states or two operators.

    Labels are merged field-wise (paths joined with ``|``) and the result is
    re-sorted into canonical order, so the outcome does not depend on which
    factor carries the spatial part.
    """
    if type(a) is not type(b) or not isinstance(a, (StateVector, Operator)):
        raise TypeError("tensor needs two StateVectors or two Operators")
    if a.dim * b.dim > MAX_DIMENSION:
        raise ValueError(f"tensor dimension {a.dim * b.dim} exceeds {MAX_DIMENSION}")
    basis, order = _product_permutation(a.basis, b.basis)
    if isinstance(a, StateVector):
        return StateVector(basis, np.kron(a.amplitudes, b.amplitudes)[order])
    m = np.kron(a.matrix, b.matrix)[np.ix_(order, order)]
    return Operator(basis, m, a.projector and b.projector)


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: tuple[float, ...]
    eigenvectors: tuple[StateVector, ...]

    def reconstruct(self) -> np.ndarray:
        basis_dim = self.eigenvectors[0].dim if self.eigenvectors else 0
        out = np.zeros((basis_dim, basis_dim), dtype=np.complex128)
        for o, v in zip(self.eigenvalues, self.eigenvectors):
            out += o * np.outer(v.amplitudes, v.amplitudes.conj())
        return out

    def eigenprojectors(self, tol: float = 1e-9) -> list[tuple[float, Operator]]:
        """Group (numerically) degenerate eigenvalues into spectral projectors."""
        groups: list[tuple[list[float], list[StateVector]]] = []
        for o, v in sorted(zip(self.eigenvalues, self.eigenvectors), key=lambda t: t[0]):
            if groups and abs(o - groups[-1][0][-1]) <= tol:
                groups[-1][0].append(o)
                groups[-1][1].append(v)
            else:
                groups.append(([o], [v]))
        out = []
        for vals, vecs in groups:
            m = sum(np.outer(v.amplitudes, v.amplitudes.conj()) for v in vecs)
            # snap to exact 0/1 entries when the projector is diagonal in the mode basis
            if np.allclose(m, np.diag(np.diag(m)), atol=1e-13):
                m = np.diag(np.round(np.diag(m).real))
            value = float(np.mean(vals))
            if abs(value - round(value)) < 1e-13:
                value = float(round(value))
            out.append((value, Operator(vecs[0].basis, m, projector=True)))
        return out


def eigh(op: Operator) -> EigenDecomposition:
    if not op.is_hermitian():
        raise NotHermitianError("eigh requires a Hermitian operator")
    w, v = np.linalg.eigh(op.matrix)
    vecs = tuple(StateVector(op.basis, v[:, k]) for k in range(len(w)))
    return EigenDecomposition(tuple(float(x) for x in w), vecs)
