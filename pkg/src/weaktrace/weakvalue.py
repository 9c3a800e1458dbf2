"""Weak values, two-state vectors and per-segment trace maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from weaktrace.circuit import propagate_backward, propagate_forward
from weaktrace.hilbert import (
    Basis,
    ModeRef,
    Operator,
    StateVector,
    inner,
    projector,
    resolve_modes,
)
from weaktrace.scenarios import Scenario

EPS_ORTHO = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULI = {"sx": SIGMA_X, "sy": SIGMA_Y, "sz": SIGMA_Z}


class OrthogonalPostselection(ZeroDivisionError):
    """Pre- and postselection are (numerically) orthogonal: the weak value is undefined."""


class UnknownSegmentError(KeyError):
    pass


@dataclass(frozen=True)
class WeakValueResult:
    value: complex
    numerator: complex
    denominator: complex
    postselection_probability: float

    @property
    def real(self) -> float:
        return self.value.real


def weak_value(op: Operator, pre: StateVector, post: StateVector, eps_ortho: float = EPS_ORTHO) -> WeakValueResult:
    """``<post|op|pre> / <post|pre>``.

    Raises OrthogonalPostselection when ``|<post|pre>| <= eps_ortho``.
    """
    den = inner(post, pre)
    if abs(den) <= eps_ortho:
        raise OrthogonalPostselection(f"|<post|pre>| = {abs(den):.3e} <= {eps_ortho:g}")
    num = inner(post, op.apply(pre))
    return WeakValueResult(num / den, num, den, min(1.0, abs(den) ** 2))


@dataclass(frozen=True)
class TwoStateVector:
    cut: int
    forward: StateVector
    backward: StateVector

    @property
    def overlap(self) -> complex:
        return inner(self.backward, self.forward)

    def weak_value(self, op: Operator, eps_ortho: float = EPS_ORTHO) -> WeakValueResult:
        return weak_value(op, self.forward, self.backward, eps_ortho)


def two_state_at_cut(sc: Scenario, detector: str, cut: int | None = None) -> TwoStateVector:
    cut = sc.default_cut if cut is None else cut
    post = sc.postselection(detector)
    fwd = propagate_forward(sc.circuit, sc.input, cut)
    bwd = propagate_backward(sc.circuit, post, cut)
    return TwoStateVector(cut, fwd, bwd)


def lift_internal(matrix: np.ndarray, basis: Basis, dof: str = "pol") -> Operator:
    """Lift a 2x2 matrix on polarization (H, V) or tag (0, 1) to the whole basis."""
    levels = ("H", "V") if dof == "pol" else ("0", "1")
    m = np.asarray(matrix, dtype=np.complex128)
    if m.shape != (2, 2):
        raise ValueError("internal operator must be 2x2")
    out = np.zeros((len(basis), len(basis)), dtype=np.complex128)
    pos = {lab: i for i, lab in enumerate(basis)}
    for i, lab in enumerate(basis):
        val = getattr(lab, dof)
        if val not in levels:
            raise ValueError(f"mode {lab} has no {dof} degree of freedom")
        a = levels.index(val)
        for b, other in enumerate(levels):
            kw = {"path": lab.path, "pol": lab.pol, "tag": lab.tag, dof: other}
            j = pos[type(lab)(**kw)]
            out[j, i] = m[b, a]
    return Operator(basis, out)


@dataclass(frozen=True)
class SegmentTrace:
    name: str
    cut: int
    modes: tuple[str, ...]
    forward: tuple[complex, ...]
    backward: tuple[complex, ...]
    conditional: complex
    weak_value: complex

    @property
    def sign(self) -> int:
        re = self.weak_value.real
        return 0 if abs(re) <= 1e-12 else (1 if re > 0 else -1)


@dataclass(frozen=True)
class SegmentTraceMap:
    detector: str
    denominator: complex
    traces: dict[str, SegmentTrace]

    def __getitem__(self, name: str) -> SegmentTrace:
        return self.traces[name]

    def weak_values(self) -> dict[str, complex]:
        return {k: t.weak_value for k, t in self.traces.items()}


def _segment(sc: Scenario, name: str):
    try:
        return sc.circuit.segments[name]
    except KeyError:
        raise UnknownSegmentError(name) from None


def segment_trace_map(sc: Scenario, detector: str, eps_ortho: float = EPS_ORTHO) -> SegmentTraceMap:
    """Forward/backward amplitudes and projector weak value of every segment.

    The conditional amplitude of a segment is ``<f|P_seg|i>`` at that
    segment's own cut; dividing by ``<f|i>`` gives its weak value, sign
    included.
    """
    tsv_cache: dict[int, TwoStateVector] = {}
    traces = {}
    den = None
    for name, seg in sc.circuit.segments.items():
        if seg.cut not in tsv_cache:
            tsv_cache[seg.cut] = two_state_at_cut(sc, detector, seg.cut)
        tsv = tsv_cache[seg.cut]
        wv = tsv.weak_value(projector(seg.modes, sc.basis), eps_ortho)
        den = wv.denominator if den is None else den
        idx = resolve_modes(sc.basis, seg.modes)
        traces[name] = SegmentTrace(
            name, seg.cut, tuple(str(sc.basis[i]) for i in idx),
            tuple(complex(x) for x in tsv.forward.amplitudes[idx]),
            tuple(complex(x) for x in tsv.backward.amplitudes[idx]),
            wv.numerator, wv.value,
        )
    if den is None:
        den = two_state_at_cut(sc, detector).overlap
    return SegmentTraceMap(detector, den, traces)


def coarse_grained_weak_value(segments: Iterable[str], sc: Scenario, detector: str,
                              eps_ortho: float = EPS_ORTHO) -> WeakValueResult:
    """Weak value of the projector onto the union of same-cut segments."""
    names = list(segments)
    if not names:
        raise ValueError("need at least one segment")
    segs = [_segment(sc, n) for n in names]
    cuts = {s.cut for s in segs}
    if len(cuts) != 1:
        raise ValueError(f"segments {names} lie on different cuts {sorted(cuts)}")
    modes = [m for s in segs for m in s.modes]
    tsv = two_state_at_cut(sc, detector, cuts.pop())
    return tsv.weak_value(projector(modes, sc.basis), eps_ortho)


def region_projector(region: Iterable[ModeRef], basis: Basis) -> Operator:
    return projector(region, basis)


def compound_weak_value(property_op, region: Iterable[ModeRef], sc: Scenario, detector: str,
                        cut: int | None = None, eps_ortho: float = EPS_ORTHO) -> WeakValueResult:
    """Weak value of ``property_op * P_region`` at ``cut``.

    ``property_op`` is a full-basis Operator, a 2x2 matrix acting on
    polarization, or one of ``"sx"``, ``"sy"``, ``"sz"``.
    """
    if isinstance(property_op, str):
        property_op = PAULI[property_op]
    if not isinstance(property_op, Operator):
        property_op = lift_internal(property_op, sc.basis)
    op = property_op @ projector(region, sc.basis)
    return two_state_at_cut(sc, detector, cut).weak_value(op, eps_ortho)
