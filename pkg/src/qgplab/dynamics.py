"""Exact versus adiabatic evolution and the corrected adiabaticity ratio.

The adiabatic solution of level n carries the dynamic phase minus the
geometric one: |Phi_n(t)> = exp(-i * integral of (e_n - A_n)) |phi_n(t)>.
Its quality is judged by the ratio |<phi_m|phi_n_dot>| over the corrected
gap |e_m - e_n + Delta_mn|, compared with the traditional ratio that
omits Delta.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSamplesError
from .models import HamiltonianModel
from .numerics import TimeGrid, accumulate, propagate, require_normalized
from .spectral import GaugeTrajectory, overlap_rate_series
from .geometry import berry_connection, qgp_direct

GAP_FLOOR_RTOL = 1e-9


@dataclass(frozen=True)
class AdiabaticState:
    """Level-n adiabatic solution at one time: phase and assembled vector."""

    level: int
    time: float
    phase: float
    vector: np.ndarray


def adiabatic_phase_series(traj: GaugeTrajectory, n: int) -> np.ndarray:
    """Running phase -integral of (e_n - A_n) at every grid node."""
    key = ("adiabatic_phase", n)
    cached = traj._cache.get(key)
    if cached is None:
        integrand = traj.energies[:, n] - berry_connection(traj, n)
        cached = -accumulate(integrand, traj.grid)
        traj._cache[key] = cached
    return cached


def adiabatic_state(traj: GaugeTrajectory, n: int, t: float) -> AdiabaticState:
    """The level-n adiabatic solution at grid time t.

    As a physical state this is invariant under smooth gauge transforms of
    the trajectory (the phase shift of the frame cancels against the
    shifted connection integral).
    """
    i = traj.grid.index_of(t)
    phase = float(adiabatic_phase_series(traj, n)[i])
    vector = np.exp(1j * phase) * traj.frames[i, :, n]
    return AdiabaticState(level=n, time=float(traj.grid.samples[i]), phase=phase, vector=vector)


def adiabatic_states(traj: GaugeTrajectory, n: int) -> np.ndarray:
    """Adiabatic vectors at all grid nodes, shape (T, N)."""
    phases = adiabatic_phase_series(traj, n)
    return traj.frames[:, :, n] * np.exp(1j * phases)[:, None]


def exact_state(model: HamiltonianModel, psi0: np.ndarray, t: float, tol: float = 1e-9) -> np.ndarray:
    """Full Schroedinger propagation of psi0 from time 0 to t."""
    if t == 0.0:
        return np.asarray(psi0, dtype=np.complex128).copy()
    if t < 0.0:
        raise ValueError("exact_state propagates forward from t = 0")
    grid = TimeGrid.linspace(0.0, t, 2)
    return propagate(model.h_at if model.h_batch is None else model.h_batch, psi0, grid, tol)[-1]


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 for unit-norm states of equal dimension, in [0, 1]."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    require_normalized(a, "fidelity first state")
    require_normalized(b, "fidelity second state")
    return float(min(abs(np.vdot(a, b)) ** 2, 1.0))


@dataclass(frozen=True)
class AdiabaticityReport:
    """Corrected and traditional adiabaticity ratios along the grid.

    resonance_flags marks samples where the corrected gap fell below the
    floor (the ratio there is reported, possibly huge, never masked:
    gap compensation by Delta is physics, not a numerical defect).
    fidelity_trace is |<adiabatic level n | exact>|^2 when a propagation
    tolerance was supplied, else None.
    """

    grid: TimeGrid
    m: int
    n: int
    ratio_qgp: np.ndarray
    ratio_traditional: np.ndarray
    max_ratio_qgp: float
    max_ratio_traditional: float
    resonance_flags: np.ndarray
    fidelity_trace: np.ndarray | None


def adiabatic_report(
    traj: GaugeTrajectory,
    m: int,
    n: int,
    propagation_tol: float | None = None,
    gap_floor: float | None = None,
) -> AdiabaticityReport:
    """Eq-of-merit ratios for the (m, n) pair, optionally with a fidelity trace.

    ratio_qgp = |<phi_m|phi_n_dot>| / |e_m - e_n + Delta_mn|; the
    traditional variant drops Delta_mn. For the rotating-field model the
    corrected ratio is the constant K / (2 (xi/eta + eta/xi) + 2 K eta/xi).
    """
    if m == n:
        raise ValueError("adiabaticity ratios need m != n")
    num = np.abs(overlap_rate_series(traj, m, n))
    delta, valid = qgp_direct(traj, m, n, with_mask=True)
    if not valid.all():
        bad = traj.grid.samples[~valid][0]
        raise InvalidSamplesError(f"geometric potential invalid near t={bad!r}")
    bare = traj.energies[:, m] - traj.energies[:, n]
    corrected = bare + delta
    floor = gap_floor if gap_floor is not None else GAP_FLOOR_RTOL * float(np.abs(bare).max())
    resonance = np.abs(corrected) < floor
    with np.errstate(divide="ignore"):
        ratio_qgp = num / np.abs(corrected)
        ratio_traditional = num / np.abs(bare)
    fidelity_trace = None
    if propagation_tol is not None:
        psi0 = traj.frames[0, :, n]
        h = traj.model.h_batch if traj.model.h_batch is not None else traj.model.h_at
        states = propagate(h, psi0, traj.grid, propagation_tol)
        overlaps = np.einsum("ta,ta->t", np.conj(traj.frames[:, :, n]), states)
        fidelity_trace = np.minimum(np.abs(overlaps) ** 2, 1.0)
    return AdiabaticityReport(
        grid=traj.grid, m=m, n=n,
        ratio_qgp=ratio_qgp, ratio_traditional=ratio_traditional,
        max_ratio_qgp=float(ratio_qgp.max()),
        max_ratio_traditional=float(ratio_traditional.max()),
        resonance_flags=resonance,
        fidelity_trace=fidelity_trace,
    )
