"""Builders for the canonical pre/post-selected interferometer scenarios."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

from weaktrace.circuit import (
    BeamSplitter,
    Circuit,
    PhaseShift,
    PolarizingBS,
    Rotator,
    Segment,
    SwitchableMirror,
    Tag,
    UnknownDetectorError,
)
from weaktrace.hilbert import StateVector, product_basis

NORM_TOL = 1e-12


class UnknownScenarioError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Scenario:
    """A circuit with a preparation and per-detector postselection states.

    Postselection states live at the circuit output; ``default_cut`` is the
    cut where the scenario's headline two-state vector is read.  ``roles``
    names the segments/detectors that specific analyses rely on.
    """

    name: str
    circuit: Circuit
    input: StateVector
    postselections: Mapping[str, StateVector]
    description: str = ""
    default_cut: int = 0
    params: Mapping[str, Any] = field(default_factory=dict)
    roles: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.input.is_normalized(NORM_TOL):
            raise ValueError(f"input state of {self.name!r} is not normalized")
        for det, st in self.postselections.items():
            if det not in self.circuit.detectors:
                raise UnknownDetectorError(det)
            if not st.is_normalized(NORM_TOL):
                raise ValueError(f"postselection for {det!r} is not normalized")
        self.circuit._check_cut(self.default_cut)

    @property
    def basis(self):
        return self.circuit.basis

    def postselection(self, detector: str) -> StateVector:
        try:
            return self.postselections[detector]
        except KeyError:
            raise UnknownDetectorError(detector) from None


SQRT_HALF = math.sqrt(2) / 2


def mach_zehnder(phase: float = 0.0, reflectivity: float = 0.5, *, dark_port: bool = False) -> Scenario:
    """Two-beamsplitter interferometer on rails ``a``/``b`` with a phase on arm ``a``."""
    basis = product_basis(["a", "b"])
    layers = (
        BeamSplitter("a", "b", reflectivity),
        PhaseShift("a", phase),
        BeamSplitter("a", "b", reflectivity),
    )
    segments = {"arm_a": Segment(1, ("a",)), "arm_b": Segment(1, ("b",))}
    if dark_port:
        detectors = {"dark": ("a",), "bright": ("b",)}
    else:
        detectors = {"D1": ("a",), "D2": ("b",)}
    circuit = Circuit(basis, layers, segments, detectors)
    posts = {d: StateVector.basis_state(basis, modes[0]) for d, modes in detectors.items()}
    if dark_port:
        return Scenario(
            "dark_port_mz", circuit, StateVector.basis_state(basis, "a"), posts,
            description="Balanced Mach-Zehnder tuned so that rail a is a dark output port.",
            default_cut=1,
            roles={"dark_detector": "dark", "coupled_segment": "arm_a"},
        )
    return Scenario(
        "mach_zehnder", circuit, StateVector.basis_state(basis, "a"), posts,
        description=f"Mach-Zehnder interferometer, arm phase {phase}, reflectivity {reflectivity}.",
        default_cut=1, params={"phase": phase, "reflectivity": reflectivity},
    )


def nested(tag_b: float | None = None, tag_c: float | None = None) -> Scenario:
    """Nested interferometer: outer arm A, inner arms B/C, inner feed D and exit E.

    Rails A, B, C.  Rail B carries D before the inner split and E after the
    inner recombination; rail C leaves to D3.  Phase layers make the mid-cut
    forward state ``(sqrt2 A + B + C)/2`` and the D2 backward state
    ``(sqrt2 A + B - C)/2`` exactly, and balance the inner interferometer so
    light entering from D leaves entirely to D3.

    ``tag_b``/``tag_c`` (tag-element angles) add a tag qubit and mark the
    inner arms just before the mid cut.
    """
    tagged = tag_b is not None or tag_c is not None
    tags = ("0", "1") if tagged else (None,)
    basis = product_basis(["A", "B", "C"], tags=tags)
    layers = [
        BeamSplitter("A", "B", 0.5),
        BeamSplitter("B", "C", 0.5),
        PhaseShift("B", -math.pi / 2),
        PhaseShift("C", math.pi),
    ]
    if tagged:
        layers += [Tag("B", tag_b or 0.0), Tag("C", tag_c or 0.0)]
    mid = len(layers)
    layers += [
        PhaseShift("C", math.pi / 2),
        BeamSplitter("B", "C", 0.5),
    ]
    exit_cut = len(layers)
    layers += [
        PhaseShift("A", -math.pi / 2),
        BeamSplitter("A", "B", 0.5),
    ]
    segments = {
        "A": Segment(mid, ("A",)),
        "B": Segment(mid, ("B",)),
        "C": Segment(mid, ("C",)),
        "D": Segment(1, ("B",)),
        "E": Segment(exit_cut, ("B",)),
    }
    detectors = {"D1": ("A",), "D2": ("B",), "D3": ("C",)}
    circuit = Circuit(basis, tuple(layers), segments, detectors)

    def port(rail: str) -> StateVector:
        return StateVector.basis_state(basis, f"{rail}#0" if tagged else rail)

    posts = {d: port(m[0]) for d, m in detectors.items()}
    params = {"tag_b": tag_b, "tag_c": tag_c} if tagged else {}
    return Scenario(
        "nested", circuit, port("A"), posts,
        description=("Nested interferometer; the inner interferometer (B, C) sends light "
                     "entering from D entirely to D3, so D1 and D2 each fire with probability 1/4."),
        default_cut=mid, params=params,
        roles={"inner_feed": "D", "inner_exit": "E", "inner_arms": ("B", "C")},
    )


def cheshire_cat() -> Scenario:
    """Quantum Cheshire cat with rails L/R and polarization.

    Mid-cut states: pre ``(L + R)|+>/sqrt2``, post ``(L|+> + R|->)/sqrt2``
    with ``|+-> = (H +- V)/sqrt2``.  Then the R projector has weak value 0 and
    ``sigma_z * Pi_R`` (``sigma_z = diag(1, -1)`` on H, V) has weak value 1.
    """
    basis = product_basis(["L", "R"], pols=("H", "V"))
    s = SQRT_HALF
    layers = (
        BeamSplitter("L", "R", 0.5),
        PhaseShift("R", -math.pi / 2),
        Rotator("R", math.pi / 2),
        PhaseShift("R", -math.pi / 2),
        BeamSplitter("L", "R", 0.5),
    )
    segments = {"L": Segment(2, ("L",)), "R": Segment(2, ("R",))}
    detectors = {"D1": ("L",), "D2": ("R",)}
    circuit = Circuit(basis, layers, segments, detectors)
    posts = {
        "D1": StateVector.from_dict(basis, {"L.H": s, "L.V": s}),
        "D2": StateVector.from_dict(basis, {"R.H": s, "R.V": s}),
    }
    return Scenario(
        "cheshire_cat", circuit, StateVector.from_dict(basis, {"L.H": s, "L.V": s}), posts,
        description=("Cheshire cat. Pre (L + R)|+>/sqrt2, post at D1 (L|+> + R|->)/sqrt2 "
                     "at the mid cut, |+-> = (H +- V)/sqrt2; property sigma_z = diag(1,-1) on H,V."),
        default_cut=2, roles={"cat_detector": "D1", "grin_region": "R"},
    )


def salih_single_outer(inner_cycles: int = 3, mirrors_on: bool = True) -> Scenario:
    """Polarization chained-Zeno link with one outer cycle and ``M`` inner cycles.

    The photon enters rail I in H.  Each inner cycle rotates its polarization
    by pi/(2M), a PBS sends the V part to Bob's rail Bk, Bob's switchable
    mirror either passes it back (off) or deflects it into sink Bk_sink (on),
    and a second PBS returns Bk to I.  A final PBS sends V to rail O.

    Mirrors off: the rotations add up and the photon leaves in V at D1.
    Mirrors on: every V part is removed, the photon stays H and reaches D0
    with probability cos(pi/2M)^(2M).
    """
    m = int(inner_cycles)
    if m < 1:
        raise ValueError("inner_cycles must be >= 1")
    bob = [f"B{k}" for k in range(1, m + 1)]
    paths = ["I", "O"] + bob + [f"{b}_sink" for b in bob]
    basis = product_basis(paths, pols=("H", "V"))
    layers = []
    segments = {}
    for k, b in enumerate(bob, start=1):
        layers.append(Rotator("I", math.pi / (2 * m)))
        layers.append(PolarizingBS("I", b))
        segments[f"alice{k}"] = Segment(len(layers), ("I",))
        segments[f"bob{k}"] = Segment(len(layers), (b,))
        layers.append(SwitchableMirror(b, mirrors_on))
        segments[f"bob{k}_return"] = Segment(len(layers), (b,))
        layers.append(PolarizingBS("I", b))
    layers.append(PolarizingBS("I", "O"))
    detectors = {
        "D0": ("I.H",),
        "D1": ("O.V",),
        "Bob": tuple(f"{b}_sink" for b in bob),
    }
    circuit = Circuit(basis, tuple(layers), segments, detectors)
    posts = {
        "D0": StateVector.basis_state(basis, "I.H"),
        "D1": StateVector.basis_state(basis, "O.V"),
    }
    bob_segments = tuple(n for n in segments if n.startswith("bob"))
    return Scenario(
        "salih_single_outer", circuit, StateVector.basis_state(basis, "I.H"), posts,
        description=(f"Single-outer-cycle polarization protocol, {m} inner cycles, "
                     f"Bob's mirrors {'on' if mirrors_on else 'off'}."),
        default_cut=segments["bob1"].cut,
        params={"inner_cycles": m, "mirrors_on": mirrors_on},
        roles={"bob_segments": bob_segments, "bob_paths": tuple(bob)},
    )


BUILDERS = {
    "mach_zehnder": mach_zehnder,
    "dark_port_mz": lambda: mach_zehnder(dark_port=True),
    "nested": nested,
    "cheshire_cat": cheshire_cat,
    "salih_single_outer": salih_single_outer,
}


def build_scenario(name: str, **params) -> Scenario:
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise UnknownScenarioError(f"unknown scenario {name!r}; known: {sorted(BUILDERS)}") from None
    return builder(**params)


def scenario_names() -> list[str]:
    return list(BUILDERS)
