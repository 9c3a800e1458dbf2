"""Which-path tags on the inner arms: distinguishability, visibility, leak to E.

Tag angles here are Bloch-sphere polar angles of the tag qubit, so two tags
are orthogonal when their angles differ by pi.  The circuit's Tag element
takes the state-space angle (overlap ``cos t`` with the untagged state),
which is half the Bloch angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from weaktrace.circuit import propagate_forward
from weaktrace.hilbert import StateVector, resolve_modes
from weaktrace.scenarios import Scenario, nested


class NotNestedError(ValueError):
    pass


@dataclass(frozen=True)
class FringeReport:
    distinguishability: float
    visibility: float
    leak_probability: float
    theta_b: float
    theta_c: float

    @property
    def dv_sum(self) -> float:
        return self.distinguishability**2 + self.visibility**2


def _tag_vector(state: StateVector, path: str) -> np.ndarray:
    """Amplitudes of one rail over the tag qubit, ordered (tag 0, tag 1)."""
    idx = resolve_modes(state.basis, [path])
    by_tag = {state.basis[i].tag: state.amplitudes[i] for i in idx}
    return np.array([by_tag["0"], by_tag["1"]])


def which_path_dv(b: np.ndarray, c: np.ndarray) -> tuple[float, float]:
    """Distinguishability and visibility for two arms carrying (unnormalized) tag vectors.

    ``V = 2|<b|c>| / (|b|^2 + |c|^2)`` and ``D`` is the trace distance between
    the weighted tag states ``|b><b|`` and ``|c><c|`` over the same total.
    """
    total = float(np.vdot(b, b).real + np.vdot(c, c).real)
    vis = float(2 * abs(np.vdot(b, c)) / total)
    diff = np.outer(b, b.conj()) - np.outer(c, c.conj())
    dist = float(np.sum(np.abs(np.linalg.eigvalsh(diff)))) / total
    return min(dist, 1.0), min(vis, 1.0)


def analyze_tagged_inner(sc: Scenario, theta_b: float, theta_c: float) -> FringeReport:
    """Tag arms B and C of a nested scenario and report D, V and the leak into E."""
    if sc.name != "nested":
        raise NotNestedError(f"fringe analysis needs the nested scenario, got {sc.name!r}")
    tagged = nested(tag_b=theta_b / 2, tag_c=theta_c / 2)
    circ = tagged.circuit
    fwd = propagate_forward(circ, tagged.input, tagged.default_cut)
    dist, vis = which_path_dv(_tag_vector(fwd, "B"), _tag_vector(fwd, "C"))

    feed, exit_ = circ.segments["D"], circ.segments["E"]
    from_d = StateVector.basis_state(circ.basis, f"{feed.modes[0]}#0")
    out = propagate_forward(circ, from_d, exit_.cut, start=feed.cut)
    idx = resolve_modes(circ.basis, exit_.modes)
    leak = float(np.sum(np.abs(out.amplitudes[idx]) ** 2))
    return FringeReport(dist, vis, leak, float(theta_b), float(theta_c))


def dv_inequality_sweep(thetas: Iterable[float], sc: Scenario | None = None) -> list[FringeReport]:
    """Tag arm B at each angle with arm C untagged."""
    thetas = list(thetas)
    if not thetas:
        raise ValueError("theta grid is empty")
    sc = sc or nested()
    return [analyze_tagged_inner(sc, t, 0.0) for t in thetas]


def default_theta_grid(points: int = 50) -> np.ndarray:
    return np.linspace(0.0, math.pi, points)
