"""Gauge-fixed instantaneous eigen-trajectories along a time grid.

track() produces a GaugeTrajectory: per-time ascending eigenvalues and
eigenvector frames whose phases follow one of three modes:

    parallel_transport  consecutive same-level overlaps made real positive
                        (default; minimizes numerical connection noise)
    analytic            the model's own smooth eigenstates, verbatim
    raw                 eigensolver output, phases arbitrary per time

Raw frames are not differentiable in time; operations that need frame
derivatives refuse them. Level identity across times is by ascending
eigenvalue, which for a spectrum bounded away from degeneracy (enforced)
coincides with continuity; maximal-overlap matching is still verified and
coarse grids or ambiguous assignments are rejected.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguousLevelMatchError,
    DegenerateSpectrumError,
    GridTooCoarseError,
)
from .models import HamiltonianModel
from .numerics import (
    DEGENERACY_RTOL,
    TimeGrid,
    eigh_stack,
    require_hermitian,
    time_derivative,
)

GAUGE_MODES = ("parallel_transport", "analytic", "raw")

MIN_STEP_OVERLAP = 0.9
MATCH_MARGIN = 0.1


@dataclass(frozen=True)
class GaugeTrajectory:
    """Eigenvalues and gauge-fixed eigenframes of a model along a grid.

    energies[i, k] is the k-th ascending eigenvalue at grid.samples[i];
    frames[i][:, k] the matching eigenvector. smooth marks whether the
    frame phases vary continuously (parallel transport, analytic, or a
    smooth gauge transform of either), which time differentiation needs.
    """

    model: HamiltonianModel
    grid: TimeGrid
    energies: np.ndarray
    frames: np.ndarray
    gauge_mode: str
    smooth: bool
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def levels(self) -> int:
        return self.model.dim

    def min_gap(self) -> float:
        return float(np.diff(self.energies, axis=1).min())


def _verify_matching(frames: np.ndarray, grid: TimeGrid):
    """Check consecutive-step level assignment; returns diagonal overlaps."""
    overlaps = np.einsum("tak,taj->tkj", np.conj(frames[:-1]), frames[1:])
    mags = np.abs(overlaps)
    order = np.sort(mags, axis=2)
    best = order[:, :, -1]
    second = order[:, :, -2] if mags.shape[2] > 1 else np.zeros_like(best)
    margin = best - second
    if np.any(margin < MATCH_MARGIN):
        t_bad, k_bad = np.argwhere(margin < MATCH_MARGIN)[0]
        raise AmbiguousLevelMatchError(
            f"level {k_bad} assignment ambiguous between t={grid.samples[t_bad]!r} "
            f"and the next sample (best overlaps within {MATCH_MARGIN})"
        )
    diag = np.abs(np.einsum("tkk->tk", overlaps))
    if np.any(best > diag + 1e-12):
        t_bad, k_bad = np.argwhere(best > diag + 1e-12)[0]
        raise GridTooCoarseError(
            f"grid too coarse: level {k_bad} at t={grid.samples[t_bad]!r} overlaps "
            "a different level best; refine the grid"
        )
    if np.any(diag < MIN_STEP_OVERLAP):
        t_bad, k_bad = np.argwhere(diag < MIN_STEP_OVERLAP)[0]
        raise GridTooCoarseError(
            f"grid too coarse: |<phi_{k_bad}(t_i)|phi_{k_bad}(t_i+1)>| = "
            f"{diag[t_bad, k_bad]:.3f} < {MIN_STEP_OVERLAP} at t={grid.samples[t_bad]!r}"
        )
    return np.einsum("tkk->tk", overlaps)


def _check_gap(energies: np.ndarray, grid: TimeGrid, tol: float | None):
    scale = float(np.abs(energies).max())
    gap_tol = tol if tol is not None else DEGENERACY_RTOL * scale
    gaps = np.diff(energies, axis=1)
    if gaps.size and float(gaps.min()) < gap_tol:
        i, k = np.unravel_index(np.argmin(gaps), gaps.shape)
        raise DegenerateSpectrumError(
            f"spectral gap {gaps[i, k]:.3e} between levels {k} and {k + 1} at "
            f"t={grid.samples[i]!r} is below tolerance {gap_tol:.3e}"
        )


def track(
    model: HamiltonianModel,
    grid: TimeGrid,
    gauge_mode: str = "parallel_transport",
    degeneracy_tolerance: float | None = None,
) -> GaugeTrajectory:
    """Build eigen-trajectories with a smooth (or raw) gauge along the grid."""
    if gauge_mode not in GAUGE_MODES:
        raise ValueError(f"gauge_mode must be one of {GAUGE_MODES}, got {gauge_mode!r}")

    if gauge_mode == "analytic":
        energies, frames = model.eig_stack(grid.samples)
        if np.any(np.diff(energies, axis=1) < 0):
            raise ValueError("model's analytic eigenvalues are not ascending")
        _check_gap(energies, grid, degeneracy_tolerance)
        _verify_matching(frames, grid)
        return GaugeTrajectory(model, grid, energies, frames, gauge_mode, smooth=True)

    hs = model.h_stack(grid.samples)
    require_hermitian(hs, "track: H(t) samples")
    energies, frames = eigh_stack(hs)
    _check_gap(energies, grid, degeneracy_tolerance)
    diag = _verify_matching(frames, grid)

    if gauge_mode == "raw":
        return GaugeTrajectory(model, grid, energies, frames, gauge_mode, smooth=False)

    # parallel transport: rotate each level's phase so every consecutive
    # same-level overlap becomes real positive (a left fold -> cumsum)
    alpha = np.zeros((grid.n, model.dim), dtype=np.float64)
    alpha[1:] = -np.cumsum(np.angle(diag), axis=0)
    frames = frames * np.exp(1j * alpha)[:, None, :]
    return GaugeTrajectory(model, grid, energies, frames, gauge_mode, smooth=True)


# ---------------------------------------------------------------------------
# frame derivatives and overlap rates
# ---------------------------------------------------------------------------

def frame_derivative(traj: GaugeTrajectory) -> np.ndarray:
    """d/dt of the gauge-fixed frames, (T, N, N); smooth gauges only."""
    if not traj.smooth:
        raise ValueError(
            "frame derivatives need a smooth gauge (parallel_transport or "
            "analytic); this trajectory is raw"
        )
    cached = traj._cache.get("frame_derivative")
    if cached is None:
        cached = time_derivative(traj.frames, traj.grid)
        traj._cache["frame_derivative"] = cached
    return cached


def _pair_gap_check(traj: GaugeTrajectory, m: int, n: int):
    gap = np.abs(traj.energies[:, n] - traj.energies[:, m])
    scale = float(np.abs(traj.energies).max())
    if float(gap.min()) < DEGENERACY_RTOL * scale:
        i = int(np.argmin(gap))
        raise DegenerateSpectrumError(
            f"levels {m} and {n} are degenerate at t={traj.grid.samples[i]!r}"
        )


def overlap_rate_series(traj: GaugeTrajectory, m: int, n: int) -> np.ndarray:
    """<phi_m(t) | d/dt phi_n(t)> at every grid node, as a complex array.

    When the model carries an analytic dH/dt the matrix-element identity
    <phi_m|dH/dt|phi_n> / (e_n - e_m) is used; otherwise the gauge-fixed
    frames are differentiated directly (fourth-order stencils).
    """
    if m == n:
        raise ValueError("overlap_rate is for m != n; use berry_connection for m == n")
    key = ("overlap_rate", m, n)
    cached = traj._cache.get(key)
    if cached is not None:
        return cached
    _pair_gap_check(traj, m, n)
    if traj.model.dh_dt_at is not None:
        dh = traj.model.dh_stack(traj.grid.samples)
        num = np.einsum("ta,tab,tb->t", np.conj(traj.frames[:, :, m]), dh, traj.frames[:, :, n])
        w = num / (traj.energies[:, n] - traj.energies[:, m])
    else:
        dF = frame_derivative(traj)
        w = np.einsum("ta,ta->t", np.conj(traj.frames[:, :, m]), dF[:, :, n])
    traj._cache[key] = w
    return w


def overlap_rate(traj: GaugeTrajectory, m: int, n: int, t: float) -> complex:
    """<phi_m(t)|phi_n_dot(t)> at a single grid time; see overlap_rate_series."""
    i = traj.grid.index_of(t)
    return complex(overlap_rate_series(traj, m, n)[i])
