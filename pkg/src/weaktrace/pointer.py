"""Von Neumann pointer coupling with a Gaussian pointer.

The coupling ``exp(-i lam O (x) P)`` translates the pointer by ``lam * o_k``
on the ``o_k`` eigenspace of ``O``, so the exact coupled state is a finite
sum of shifted Gaussians ("branches").  After postselecting the system on
``<f|`` the pointer wavefunction is ``sum_k c_k phi(x - lam o_k)`` with
``c_k = <f|Pi_k|i>``.  Everything below is evaluated from closed-form
Gaussian overlaps; ``numeric_pointer_density`` is an FFT-based cross-check.

Units: hbar = 1, interaction time absorbed into ``lam``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np

from weaktrace.hilbert import Operator, StateVector, eigh, inner, projector
from weaktrace.scenarios import Scenario

PLANCK = 6.62607015e-34  # J s, exact SI
SPEED_OF_LIGHT = 299792458.0  # m/s, exact SI

_RESIDUAL_DPS = 50


class NoClickError(ZeroDivisionError):
    """Every postselected branch amplitude vanishes."""


class DarkPortCalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianPointer:
    """Gaussian pointer; ``sigma`` is the position spread of ``|phi(x)|^2``."""

    mean: float = 0.0
    sigma: float = 1.0
    grid: tuple[float, float, int] | None = None

    def __post_init__(self):
        if not self.sigma > 0 or not math.isfinite(self.sigma):
            raise ValueError("sigma must be positive and finite")
        if self.grid is not None:
            lo, hi, n = self.grid
            if hi - lo < 8 * self.sigma or n < 256:
                raise ValueError("grid needs >= 8 sigma of support and >= 256 points")

    def wavefunction(self, x, shift: complex = 0.0):
        x = np.asarray(x, dtype=float)
        norm = (2 * math.pi * self.sigma**2) ** -0.25
        return norm * np.exp(-((x - self.mean - shift) ** 2) / (4 * self.sigma**2))

    def overlap(self, a: complex, b: complex) -> complex:
        """``<phi(x - a)|phi(x - b)>`` for (possibly complex) shifts."""
        return complex(np.exp(-((b - np.conj(a)) ** 2) / (8 * self.sigma**2)))

    def grid_points(self) -> np.ndarray:
        if self.grid is None:
            raise ValueError("pointer has no grid")
        lo, hi, n = self.grid
        return np.linspace(lo, hi, int(n))

    def with_grid(self, lo: float, hi: float, n: int) -> "GaussianPointer":
        return GaussianPointer(self.mean, self.sigma, (lo, hi, n))


@dataclass(frozen=True)
class Branch:
    state: StateVector  # Pi_k |pre>
    eigenvalue: float
    shift: float


@dataclass(frozen=True)
class BranchedState:
    pre: StateVector
    branches: tuple[Branch, ...]
    lam: float
    pointer: GaussianPointer

    @property
    def shifts(self) -> np.ndarray:
        return np.array([b.shift for b in self.branches])

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([b.eigenvalue for b in self.branches])


def couple_exact(pre: StateVector, op: Operator, pointer: GaussianPointer, lam: float) -> BranchedState:
    """Exact ``exp(-i lam O (x) P)`` acting on ``|pre> (x) |phi>``."""
    lam = float(lam)
    branches = []
    for value, proj in eigh(op).eigenprojectors():
        part = proj.apply(pre)
        if part.norm() == 0.0:
            continue
        branches.append(Branch(part, value, lam * value))
    return BranchedState(pre, tuple(branches), lam, pointer)


@dataclass(frozen=True)
class PointerOutcome:
    success_probability: float
    mean_shift: float
    variance: float
    first_order_mean_shift: float
    residual_norm: float
    weak_value: complex
    pointer_density: tuple[np.ndarray, np.ndarray] | None = None


def _coefficients(b: BranchedState, post: StateVector) -> np.ndarray:
    return np.array([inner(post, br.state) for br in b.branches], dtype=np.complex128)


def _gram(b: BranchedState) -> np.ndarray:
    s = b.shifts
    return np.exp(-((s[:, None] - s[None, :]) ** 2) / (8 * b.pointer.sigma**2))


def success_probability(b: BranchedState, post: StateVector) -> float:
    """Probability that the postselection succeeds after coupling.

    Written as ``|<f|i>|^2 - sum c_j* c_k (1 - G_jk)`` so that a zero
    overlap gives an exactly zero result at ``lam = 0`` and small leaks are
    free of cancellation.
    """
    c = _coefficients(b, post)
    d = inner(post, b.pre)
    s = b.shifts
    one_minus_g = -np.expm1(-((s[:, None] - s[None, :]) ** 2) / (8 * b.pointer.sigma**2))
    p = abs(d) ** 2 - float(np.real(np.conj(c) @ one_minus_g @ c))
    return min(1.0, max(0.0, p))


def _residual(c: np.ndarray, shifts: np.ndarray, d: complex, w: complex, sigma: float) -> float:
    """``|| E/|E| - F/|F| ||`` for ``E = sum c_k phi_{s_k}``, ``F = d phi_w``."""
    with mpmath.workdps(_RESIDUAL_DPS):
        c = [mpmath.mpc(complex(x)) for x in c]
        s = [mpmath.mpf(float(x)) for x in shifts]
        d = mpmath.mpc(d)
        w = mpmath.mpc(w)
        k8 = 8 * mpmath.mpf(sigma) ** 2

        def kern(a, b):
            return mpmath.exp(-((b - mpmath.conj(a)) ** 2) / k8)

        ee = mpmath.fsum(mpmath.conj(c[j]) * c[k] * kern(s[j], s[k])
                         for j in range(len(c)) for k in range(len(c)))
        ff = abs(d) ** 2 * kern(w, w)
        ef = mpmath.fsum(mpmath.conj(c[j]) * d * kern(s[j], w) for j in range(len(c)))
        val = 2 - 2 * mpmath.re(ef) / mpmath.sqrt(mpmath.re(ee) * mpmath.re(ff))
        return float(mpmath.sqrt(max(val, 0)))


def postselect_pointer(b: BranchedState, post: StateVector, eps_ortho: float = 1e-10) -> PointerOutcome:
    """Pointer statistics conditioned on the system passing ``post``.

    ``first_order_mean_shift`` is ``lam * Re(O_w)``; ``residual_norm`` is
    the distance between the exact normalized pointer state and the
    first-order one, ``phi(x - lam O_w)`` (a complex shift when ``O_w`` is
    complex).  Both are NaN when ``<f|i>`` is below ``eps_ortho``.
    """
    c = _coefficients(b, post)
    if not np.any(np.abs(c) > 0.0):
        raise NoClickError("all postselected branch amplitudes vanish")
    p = success_probability(b, post)
    if p <= 1e-300:
        raise NoClickError("postselection probability is zero")
    sigma = b.pointer.sigma
    s = b.shifts
    g = _gram(b)
    w = np.conj(c)[:, None] * c[None, :] * g
    norm = float(np.real(w.sum()))
    mid = (s[:, None] + s[None, :]) / 2
    mean_shift = float(np.real((w * mid).sum())) / norm
    second = float(np.real((w * (mid**2 + sigma**2)).sum())) / norm
    variance = second - mean_shift**2

    d = inner(post, b.pre)
    if abs(d) > eps_ortho:
        o_w = complex(np.sum(c * b.eigenvalues) / d)
        first = b.lam * o_w.real
        residual = _residual(c, s, d, b.lam * o_w, sigma)
    else:
        o_w = complex("nan")
        first = residual = float("nan")

    density = None
    if b.pointer.grid is not None:
        x = b.pointer.grid_points()
        psi = sum(ck * b.pointer.wavefunction(x, sk) for ck, sk in zip(c, s))
        density = (x, np.abs(psi) ** 2 / p)
    return PointerOutcome(p, mean_shift, variance, first, residual, o_w, density)


def first_order_residual(b: BranchedState, post: StateVector) -> float:
    return postselect_pointer(b, post).residual_norm


def numeric_pointer_density(b: BranchedState, post: StateVector) -> tuple[np.ndarray, np.ndarray]:
    """Grid oracle: translate the sampled pointer with FFT phases, sum, normalize numerically."""
    x = b.pointer.grid_points()
    dx = x[1] - x[0]
    k = 2 * np.pi * np.fft.fftfreq(x.size, d=dx)
    phi_k = np.fft.fft(b.pointer.wavefunction(x))
    c = _coefficients(b, post)
    psi_k = sum(ck * np.exp(-1j * k * sk) for ck, sk in zip(c, b.shifts)) * phi_k
    psi = np.fft.ifft(psi_k)
    dens = np.abs(psi) ** 2
    return x, dens / np.trapezoid(dens, x)


def pointer_sweep(pre: StateVector, post: StateVector, op: Operator, lambdas: Sequence[float],
                  sigma: float = 1.0) -> list[dict]:
    """Rows of (lambda, mean_shift, first_order_mean_shift, residual_norm, success_probability)."""
    ptr = GaussianPointer(0.0, sigma)
    rows = []
    for lam in lambdas:
        out = postselect_pointer(couple_exact(pre, op, ptr, lam), post)
        rows.append({
            "lambda": float(lam),
            "mean_shift": out.mean_shift,
            "first_order_mean_shift": out.first_order_mean_shift,
            "residual_norm": out.residual_norm,
            "success_probability": out.success_probability,
        })
    return rows


def dark_port_leak(sc: Scenario, lam: float, sigma: float = 1.0) -> float:
    """Probability of a dark-port click when the coupled arm carries a pointer.

    The scenario must name ``dark_detector`` and ``coupled_segment`` in its
    roles, and the dark port must receive no amplitude without coupling.
    """
    from weaktrace.weakvalue import two_state_at_cut

    try:
        det = sc.roles["dark_detector"]
        seg = sc.circuit.segments[sc.roles["coupled_segment"]]
    except KeyError:
        raise DarkPortCalibrationError(f"scenario {sc.name!r} has no dark port with a coupled arm") from None
    tsv = two_state_at_cut(sc, det, seg.cut)
    if abs(tsv.overlap) > 1e-14:
        raise DarkPortCalibrationError(f"dark port receives amplitude {abs(tsv.overlap):.3e} uncoupled")
    b = couple_exact(tsv.forward, projector(seg.modes, sc.basis), GaussianPointer(0.0, sigma), lam)
    return success_probability(b, tsv.backward)


def mirror_recoil_fraction(wavelength: float, mirror_mass: float) -> float:
    """Recoil energy left in a mirror by one normal reflection, over the photon energy.

    Momentum transfer ``2h/wl``; ratio ``(2h/wl)^2 / (2m) / (hc/wl) = 2h / (m c wl)``.
    """
    if not wavelength > 0 or not mirror_mass > 0:
        raise ValueError("wavelength and mirror mass must be positive")
    return 2 * PLANCK / (mirror_mass * SPEED_OF_LIGHT * wavelength)
