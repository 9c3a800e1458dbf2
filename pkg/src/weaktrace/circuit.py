"""Layered unitary interferometer circuits.

Modes are rails: a beamsplitter between rails ``A`` and ``B`` mixes the two
and leaves their names unchanged.  "Cut ``k``" means the state after the
first ``k`` layers, so cut 0 is the input and cut ``len(layers)`` the output.

Conventions
-----------
* Beamsplitter, ``symmetric``: ``[[t, i r], [i r, t]]`` with
  ``t = sqrt(1 - R)``, ``r = sqrt(R)``.  ``real``: ``[[t, -r], [r, t]]``.
* Phase shift multiplies amplitudes by ``exp(i angle)``.
* Polarizing beamsplitter: H stays on its rail, V swaps rails (no phase).
* Switchable mirror: off passes the beam (identity); on deflects the rail
  into its sink rail (swap), which is how blocking is kept unitary.
* Tag: rotation on the tag qubit of one rail, ``|0> -> cos t|0> + sin t|1>``,
  so ``<0|tag(t)|0> = cos t``.
* Rotator: polarization rotation ``H -> cos t H + sin t V``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Union

import numpy as np

from weaktrace.hilbert import (
    Basis,
    BasisMismatchError,
    ModeLabel,
    Operator,
    StateVector,
    _check_basis,
    resolve_modes,
)

UNITARY_TOL = 1e-12


class DimensionMismatchError(BasisMismatchError):
    """Two ports of an element select different numbers of modes."""


class NonUnitaryError(ValueError):
    pass


class LayerIndexError(IndexError):
    pass


@dataclass(frozen=True)
class BeamSplitter:
    mode1: str
    mode2: str
    reflectivity: float = 0.5
    convention: str = "symmetric"

    def __post_init__(self):
        if not 0.0 <= self.reflectivity <= 1.0:
            raise NonUnitaryError(f"reflectivity {self.reflectivity} outside [0, 1]")
        if self.convention not in ("symmetric", "real"):
            raise ValueError(f"unknown beamsplitter convention {self.convention!r}")


@dataclass(frozen=True)
class PhaseShift:
    mode: str
    angle: float


@dataclass(frozen=True)
class Mirror:
    mode: str


@dataclass(frozen=True)
class PolarizingBS:
    mode1: str
    mode2: str


@dataclass(frozen=True)
class SwitchableMirror:
    mode: str
    on: bool
    sink: str = ""

    def __post_init__(self):
        if not self.sink:
            object.__setattr__(self, "sink", default_sink(self.mode))


@dataclass(frozen=True)
class Tag:
    mode: str
    theta: float


@dataclass(frozen=True)
class Rotator:
    mode: str
    theta: float


@dataclass(frozen=True)
class Identity:
    pass


Element = Union[BeamSplitter, PhaseShift, Mirror, PolarizingBS, SwitchableMirror, Tag, Rotator, Identity]


def default_sink(mode: str) -> str:
    lab = ModeLabel.parse(mode)
    return str(ModeLabel(lab.path + "_sink", lab.pol, lab.tag))


def element_modes(e: Element) -> tuple[str, ...]:
    if isinstance(e, (BeamSplitter, PolarizingBS)):
        return (e.mode1, e.mode2)
    if isinstance(e, SwitchableMirror):
        return (e.mode, e.sink)
    if isinstance(e, Identity):
        return ()
    return (e.mode,)


def _paired(basis: Basis, ref1: str, ref2: str) -> list[tuple[int, int]]:
    a = resolve_modes(basis, [ref1])
    b = resolve_modes(basis, [ref2])
    if len(a) != len(b):
        raise DimensionMismatchError(
            f"ports {ref1!r} ({len(a)} modes) and {ref2!r} ({len(b)} modes) differ in size")
    if set(a) & set(b):
        raise DimensionMismatchError(f"ports {ref1!r} and {ref2!r} overlap")
    return list(zip(a, b))


def _cos_sin(angle: float) -> tuple[float, float]:
    # exact zeros at multiples of pi/2 keep golden amplitudes free of 1e-17 residue
    c, s = math.cos(angle), math.sin(angle)
    return (0.0 if abs(c) < 1e-15 else c), (0.0 if abs(s) < 1e-15 else s)


def _two_mode(basis: Basis, pairs, block: np.ndarray) -> np.ndarray:
    u = np.eye(len(basis), dtype=np.complex128)
    for i, j in pairs:
        u[np.ix_([i, j], [i, j])] = block
    return u


def _internal_pairs(basis: Basis, ref: str, first: str, second: str, field_name: str):
    """Pairs (i, j) on rail ``ref`` differing only in one internal field."""
    idx = resolve_modes(basis, [ref])
    pairs = []
    for i in idx:
        lab = basis[i]
        if getattr(lab, field_name) != first:
            continue
        partner = ModeLabel(lab.path, second if field_name == "pol" else lab.pol,
                            second if field_name == "tag" else lab.tag)
        try:
            pairs.append((i, basis.index(partner)))
        except ValueError:
            raise BasisMismatchError(f"{partner} missing from basis") from None
    if not pairs:
        raise BasisMismatchError(f"rail {ref!r} has no {field_name}={first!r} modes")
    return pairs


def element_unitary(e: Element, basis: Basis) -> Operator:
    """Full-basis unitary of one element (identity off its support)."""
    n = len(basis)
    if isinstance(e, BeamSplitter):
        t, r = math.sqrt(1.0 - e.reflectivity), math.sqrt(e.reflectivity)
        if e.convention == "symmetric":
            block = np.array([[t, 1j * r], [1j * r, t]])
        else:
            block = np.array([[t, -r], [r, t]], dtype=np.complex128)
        u = _two_mode(basis, _paired(basis, e.mode1, e.mode2), block)
    elif isinstance(e, PhaseShift):
        u = np.eye(n, dtype=np.complex128)
        for i in resolve_modes(basis, [e.mode]):
            c, s = _cos_sin(e.angle)
            u[i, i] = complex(c, s)
    elif isinstance(e, (Mirror,)):
        resolve_modes(basis, [e.mode])
        u = np.eye(n, dtype=np.complex128)
    elif isinstance(e, Identity):
        u = np.eye(n, dtype=np.complex128)
    elif isinstance(e, PolarizingBS):
        pairs = _paired(basis, e.mode1, e.mode2)
        for i, j in pairs:
            if basis[i].pol is None or basis[i].pol != basis[j].pol:
                raise BasisMismatchError("polarizing beamsplitter needs polarized rails")
        swap = [(i, j) for i, j in pairs if basis[i].pol == "V"]
        u = _two_mode(basis, swap, np.array([[0, 1], [1, 0]], dtype=np.complex128))
    elif isinstance(e, SwitchableMirror):
        pairs = _paired(basis, e.mode, e.sink)
        u = np.eye(n, dtype=np.complex128)
        if e.on:
            u = _two_mode(basis, pairs, np.array([[0, 1], [1, 0]], dtype=np.complex128))
    elif isinstance(e, Tag):
        c, s = _cos_sin(e.theta)
        pairs = _internal_pairs(basis, e.mode, "0", "1", "tag")
        u = _two_mode(basis, pairs, np.array([[c, -s], [s, c]], dtype=np.complex128))
    elif isinstance(e, Rotator):
        c, s = _cos_sin(e.theta)
        pairs = _internal_pairs(basis, e.mode, "H", "V", "pol")
        u = _two_mode(basis, pairs, np.array([[c, -s], [s, c]], dtype=np.complex128))
    else:
        raise TypeError(f"unknown element {e!r}")
    op = Operator(basis, u)
    if op.unitarity_defect() > UNITARY_TOL:
        raise NonUnitaryError(f"{type(e).__name__} is not unitary (defect {op.unitarity_defect():.2e})")
    return op


@dataclass(frozen=True)
class Segment:
    """A named stretch of path: the given rails at one cut."""

    cut: int
    modes: tuple[str, ...]


@dataclass(frozen=True)
class Circuit:
    basis: Basis
    layers: tuple[Element, ...]
    segments: Mapping[str, Segment] = field(default_factory=dict)
    detectors: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        _check_basis(self.basis)
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "segments", dict(self.segments))
        object.__setattr__(self, "detectors", {k: tuple(v) for k, v in self.detectors.items()})
        for name, seg in self.segments.items():
            if not 0 <= seg.cut <= len(self.layers):
                raise LayerIndexError(f"segment {name!r} cut {seg.cut} out of range")
            resolve_modes(self.basis, seg.modes)
        for name, modes in self.detectors.items():
            resolve_modes(self.basis, modes)
        self.layer_unitaries  # validate every element now

    @property
    def depth(self) -> int:
        return len(self.layers)

    @cached_property
    def layer_unitaries(self) -> tuple[np.ndarray, ...]:
        return tuple(element_unitary(e, self.basis).matrix for e in self.layers)

    def unitary(self, start: int = 0, stop: int | None = None) -> Operator:
        """Composed unitary taking cut ``start`` to cut ``stop``."""
        stop = self.depth if stop is None else stop
        self._check_cut(start)
        self._check_cut(stop)
        if stop < start:
            raise LayerIndexError("stop before start")
        u = np.eye(len(self.basis), dtype=np.complex128)
        for m in self.layer_unitaries[start:stop]:
            u = m @ u
        return Operator(self.basis, u)

    def _check_cut(self, k: int) -> None:
        if not isinstance(k, (int, np.integer)) or not 0 <= k <= self.depth:
            raise LayerIndexError(f"cut {k} out of range 0..{self.depth}")

    def detector_modes(self, name: str) -> tuple[str, ...]:
        try:
            return self.detectors[name]
        except KeyError:
            raise UnknownDetectorError(name) from None


class UnknownDetectorError(KeyError):
    pass


def propagate_forward(c: Circuit, s: StateVector, upto: int | None = None, start: int = 0) -> StateVector:
    """Evolve ``s`` (living at cut ``start``) forward to cut ``upto``."""
    upto = c.depth if upto is None else upto
    c._check_cut(start)
    c._check_cut(upto)
    if upto < start:
        raise LayerIndexError(f"cannot propagate forward from {start} to {upto}")
    if s.basis != c.basis:
        raise BasisMismatchError("state basis differs from circuit basis")
    v = s.amplitudes
    for m in c.layer_unitaries[start:upto]:
        v = m @ v
    return StateVector(c.basis, v)


def propagate_backward(c: Circuit, f: StateVector, downto: int = 0, start: int | None = None) -> StateVector:
    """Evolve ``f`` (living at cut ``start``, default the output) back to cut ``downto``.

    The result is the ket whose bra is the backward-evolving state.
    """
    start = c.depth if start is None else start
    c._check_cut(start)
    c._check_cut(downto)
    if downto > start:
        raise LayerIndexError(f"cannot propagate backward from {start} to {downto}")
    if f.basis != c.basis:
        raise BasisMismatchError("state basis differs from circuit basis")
    v = f.amplitudes
    for m in reversed(c.layer_unitaries[downto:start]):
        v = m.conj().T @ v
    return StateVector(c.basis, v)


def detection_probabilities(c: Circuit, s: StateVector) -> dict[str, float]:
    out = propagate_forward(c, s)
    probs = {}
    for name, modes in c.detectors.items():
        idx = resolve_modes(c.basis, modes)
        probs[name] = float(np.sum(np.abs(out.amplitudes[idx]) ** 2))
    return probs
