"""Random-instance generators shared by the property tests."""

import numpy as np
from hypothesis import strategies as st

from weaktrace.circuit import (
    BeamSplitter,
    Circuit,
    Identity,
    Mirror,
    PhaseShift,
    PolarizingBS,
    Rotator,
    Segment,
    SwitchableMirror,
    Tag,
)
from weaktrace.hilbert import Operator, StateVector, make_basis, product_basis
from weaktrace.scenarios import Scenario

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def rng(seed):
    return np.random.default_rng(seed)


def basis_of(n):
    return make_basis(f"m{k:02d}" for k in range(n))


def random_state(r, basis):
    v = r.normal(size=len(basis)) + 1j * r.normal(size=len(basis))
    return StateVector(basis, v / np.linalg.norm(v))


def random_hermitian(r, basis, spectrum=None):
    n = len(basis)
    q, _ = np.linalg.qr(r.normal(size=(n, n)) + 1j * r.normal(size=(n, n)))
    vals = r.normal(size=n) if spectrum is None else np.asarray(spectrum, dtype=float)
    m = q @ np.diag(vals) @ q.conj().T
    return Operator(basis, (m + m.conj().T) / 2)


def random_unitary(r, n):
    z = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    q, rr = np.linalg.qr(z)
    return q * (np.diag(rr) / np.abs(np.diag(rr)))


def random_circuit(r):
    rails = ["A", "B", "C", "D"][: int(r.integers(2, 5))]
    b = product_basis(rails, pols=("H", "V"))
    layers = []
    for _ in range(int(r.integers(1, 12))):
        i, j = r.choice(len(rails), size=2, replace=False)
        kind = int(r.integers(0, 4))
        if kind == 0:
            layers.append(BeamSplitter(rails[i], rails[j], float(r.uniform()), ["symmetric", "real"][kind % 2]))
        elif kind == 1:
            layers.append(PhaseShift(rails[i], float(r.uniform(-7, 7))))
        elif kind == 2:
            layers.append(PolarizingBS(rails[i], rails[j]))
        else:
            layers.append(Rotator(rails[i], float(r.uniform(-7, 7))))
    return Circuit(b, tuple(layers))


def random_scenario(r) -> Scenario:
    rails = ["A", "B", "C"][: int(r.integers(2, 4))]
    tagged = bool(r.integers(0, 2))
    paths = rails + [f"{p}_sink" for p in rails]
    basis = product_basis(paths, pols=("H", "V"), tags=("0", "1") if tagged else (None,))
    layers = []
    for _ in range(int(r.integers(0, 10))):
        i, j = r.choice(len(rails), size=2, replace=False)
        a, b = rails[i], rails[j]
        pick = int(r.integers(0, 8))
        layers.append([
            BeamSplitter(a, b, float(r.uniform()), ["symmetric", "real"][int(r.integers(0, 2))]),
            PhaseShift(a, float(r.normal() * 3)),
            Mirror(a),
            PolarizingBS(a, b),
            SwitchableMirror(a, bool(r.integers(0, 2))),
            Tag(a, float(r.normal())) if tagged else Identity(),
            Rotator(a, float(r.normal())),
            Identity(),
        ][pick])
    segments = {f"s{k}": Segment(int(r.integers(0, len(layers) + 1)), (rails[k % len(rails)],))
                for k in range(int(r.integers(0, 4)))}
    detectors = {f"D{k}": (p,) for k, p in enumerate(rails)}
    circuit = Circuit(basis, tuple(layers), segments, detectors)
    posts = {d: random_state(r, basis) for d in detectors if r.integers(0, 2)}
    roles = {"pair": tuple(rails[:2]), "single": (rails[0],), "name": "x"}
    return Scenario("rand", circuit, random_state(r, basis), posts, description="random case",
                    default_cut=int(r.integers(0, len(layers) + 1)), roles=roles)
