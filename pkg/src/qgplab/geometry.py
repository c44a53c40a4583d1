"""Gauge-invariant geometric quantities of eigen-trajectories.

The central object is the inter-level geometric potential for an ordered
level pair (m, n),

    Delta_mn(t) = A_m(t) - A_n(t) + d/dt arg <phi_n(t) | phi_m_dot(t)>,

where A_k = i <phi_k|phi_k_dot> is the diagonal Berry connection. Delta is
antisymmetric in (m, n), invariant under smooth per-level phase changes
that vanish at the start, and for a two-level system whose field traces a
sphere path equals the geodesic curvature of that path times the path
speed. For the rotating-field model with (m, n) = (upper, lower) it is
the constant 2*K*eta*cos(theta).

Berry curvature is discretized gauge-invariantly by plaquette link
products (field-strength construction). With this package's orientation
convention, the upper level of the sphere family has curvature
+sin(theta)/2 per unit dtheta^dphi, and the winding number

    Theta = (surface integral of F_n - F_m  -  loop integral of Delta_mn dt) / 2*pi

is an exact integer on closed loops (for the north-polar cap at constant
theta0 and (m, n) = (upper, lower): Theta = -1 for every theta0).
"""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    InvalidSamplesError,
    StationaryPathError,
)
from .models import HamiltonianModel, SphereFieldParams
from .numerics import TimeGrid, accumulate, eigh_stack, integrate, time_derivative, unwrap_phase
from .spectral import GaugeTrajectory, frame_derivative, overlap_rate_series, track

OVERLAP_FLOOR_RTOL = 1e-12
_STENCIL_RADIUS = 4


# ---------------------------------------------------------------------------
# Berry connection and phases
# ---------------------------------------------------------------------------

def berry_connection(traj: GaugeTrajectory, n: int) -> np.ndarray:
    """A_n(t) = i <phi_n(t)|phi_n_dot(t)> at every grid node, real array.

    The imaginary part vanishes by normalization; it is asserted below
    1e-8 of the frame-derivative scale and discarded. Gauge-covariant: a
    phase change by exp(i f) shifts the result by -df/dt.
    """
    key = ("berry_connection", n)
    cached = traj._cache.get(key)
    if cached is not None:
        return cached
    if traj.gauge_mode == "analytic" and traj.model.connection_batch is not None:
        a = np.ascontiguousarray(traj.model.connection_stack(traj.grid.samples)[:, n])
        traj._cache[key] = a
        return a
    dF = frame_derivative(traj)
    raw = 1j * np.einsum("ta,ta->t", np.conj(traj.frames[:, :, n]), dF[:, :, n])
    # the imaginary residue is bounded by the stencil error, whose natural
    # scale is the frame-derivative magnitude
    dscale = float(np.sqrt((np.abs(dF[:, :, n]) ** 2).sum(axis=1)).max())
    scale = max(1.0, dscale, float(np.abs(raw.real).max()))
    worst = float(np.abs(raw.imag).max())
    if worst > 1e-8 * scale:
        raise ValueError(
            f"berry_connection: imaginary residue {worst:.3e} exceeds 1e-8 of "
            f"scale {scale:.3e}; frames are not normalized/smooth"
        )
    a = np.ascontiguousarray(raw.real)
    traj._cache[key] = a
    return a


def berry_phase(traj: GaugeTrajectory, n: int) -> float:
    """Discrete closed-loop Berry phase of level n, -Im log of the link chain.

    The chain closes with the wrap link from the last frame back to the
    first, so the result is gauge invariant. The grid must be dense enough
    that each link's phase is well inside (-pi, pi).
    """
    col = traj.frames[:, :, n]
    links = np.einsum("ta,ta->t", np.conj(col[:-1]), col[1:])
    closing = np.vdot(col[-1], col[0])
    return float(-(np.angle(links).sum() + np.angle(closing)))


# ---------------------------------------------------------------------------
# the geometric potential, three ways
# ---------------------------------------------------------------------------

def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    out = mask.copy()
    for shift in range(1, radius + 1):
        out[shift:] |= mask[:-shift]
        out[:-shift] |= mask[shift:]
    return out


def _masked_arg_rate(w: np.ndarray, grid: TimeGrid, overlap_floor: float | None):
    """d/dt of the unwrapped argument of w, with near-zero samples masked.

    Returns (rate, valid). Samples where |w| falls below the floor
    (default 1e-12 of the grid maximum, but never below the roundoff noise
    of a frame-difference, ~1e-13/h) are genuinely singular for the
    argument derivative; they and their stencil neighbours are marked
    invalid rather than given fabricated values.

    A w that is zero up to roundoff everywhere (static Hamiltonian: the
    per-step arc |w|*h is below 1e-12 rad) carries no phase information at
    all, and the rate is the honest zero with all samples valid.
    """
    mag = np.abs(w)
    h_mean = grid.span() / (grid.n - 1)
    if float(mag.max()) * h_mean < 1e-12:
        return np.zeros(grid.n), np.ones(grid.n, dtype=bool)
    if overlap_floor is not None:
        floor = overlap_floor
    else:
        floor = max(OVERLAP_FLOOR_RTOL * float(mag.max()), 1e-13 / h_mean)
    invalid = mag < floor
    ang = unwrap_phase(np.angle(w))
    rate = time_derivative(ang, grid)
    valid = ~_dilate(invalid, _STENCIL_RADIUS)
    return rate, valid


def qgp_direct(
    traj: GaugeTrajectory,
    m: int,
    n: int,
    overlap_floor: float | None = None,
    with_mask: bool = False,
):
    """Delta_mn sampled on the grid from its defining combination.

    Invalid samples (off-diagonal overlap rate below the floor) are NaN;
    pass with_mask=True to also receive the validity mask.
    """
    if m == n:
        raise ValueError("the geometric potential is defined for m != n")
    w = overlap_rate_series(traj, n, m)
    a_m = berry_connection(traj, m)
    a_n = berry_connection(traj, n)
    rate, valid = _masked_arg_rate(w, traj.grid, overlap_floor)
    delta = a_m - a_n + rate
    delta[~valid] = np.nan
    if with_mask:
        return delta, valid
    return delta


def qgp_compact(
    traj: GaugeTrajectory,
    m: int,
    n: int,
    overlap_floor: float | None = None,
    with_mask: bool = False,
):
    """Delta_mn from the single arg-derivative in the phase-dressed basis.

    Both levels are dressed by exp(i * running integral of their Berry
    connection); the potential is then the bare rate of the argument of
    <tilde_n | d/dt tilde_m>. Agrees with qgp_direct on valid samples.
    """
    if m == n:
        raise ValueError("the geometric potential is defined for m != n")
    gamma_m = accumulate(berry_connection(traj, m), traj.grid)
    gamma_n = accumulate(berry_connection(traj, n), traj.grid)
    tilde_m = traj.frames[:, :, m] * np.exp(1j * gamma_m)[:, None]
    tilde_n = traj.frames[:, :, n] * np.exp(1j * gamma_n)[:, None]
    d_tilde_m = time_derivative(tilde_m, traj.grid)
    w = np.einsum("ta,ta->t", np.conj(tilde_n), d_tilde_m)
    rate, valid = _masked_arg_rate(w, traj.grid, overlap_floor)
    delta = rate.copy()
    delta[~valid] = np.nan
    if with_mask:
        return delta, valid
    return delta


def qgp_geodesic(p: SphereFieldParams, t):
    """Closed-form Delta_(upper,lower) for a field tracing a sphere path.

    Equals the geodesic curvature of the path on the unit sphere times the
    path speed. Accepts a scalar or array of times; rejects stationary
    points, where the expression is 0/0.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    theta = np.asarray(p.theta_of_t(t_arr), dtype=np.float64)
    td = np.asarray(p.theta_dot()(t_arr), dtype=np.float64)
    pd = np.asarray(p.phi_dot()(t_arr), dtype=np.float64)
    tdd = np.asarray(p.theta_ddot()(t_arr), dtype=np.float64)
    pdd = np.asarray(p.phi_ddot()(t_arr), dtype=np.float64)
    s, c = np.sin(theta), np.cos(theta)
    denom = td * td + (pd * s) ** 2
    if np.any(denom <= 0):
        bad = t_arr[denom <= 0][0]
        raise StationaryPathError(f"sphere path is stationary at t={bad!r}")
    num = td * pdd * s + 2.0 * td * td * pd * c + pd**3 * s * s * c - pd * tdd * s
    out = num / denom
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(out[0])
    return out


@dataclass(frozen=True)
class GeometricSeries:
    """Per-time geometric samples for one ordered level pair.

    accumulated_* entries are running integrals consistent with
    integrate() at every prefix. delta is NaN where validity is False.
    """

    grid: TimeGrid
    m: int
    n: int
    a_m: np.ndarray
    a_n: np.ndarray
    delta: np.ndarray
    validity: np.ndarray
    accumulated_a_m: np.ndarray
    accumulated_a_n: np.ndarray
    accumulated_delta: np.ndarray


def geometric_series(traj: GaugeTrajectory, m: int, n: int) -> GeometricSeries:
    """Bundle connections, the potential, and their running integrals."""
    a_m = berry_connection(traj, m)
    a_n = berry_connection(traj, n)
    delta, valid = qgp_direct(traj, m, n, with_mask=True)
    if valid.all():
        cum_delta = accumulate(delta, traj.grid)
    else:
        cum_delta = np.full(traj.grid.n, np.nan)
    return GeometricSeries(
        grid=traj.grid, m=m, n=n, a_m=a_m, a_n=a_n, delta=delta, validity=valid,
        accumulated_a_m=accumulate(a_m, traj.grid),
        accumulated_a_n=accumulate(a_n, traj.grid),
        accumulated_delta=cum_delta,
    )


# ---------------------------------------------------------------------------
# parameter families and Berry curvature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParameterFamily:
    """Hermitian matrices over a 2-parameter patch.

    at(p, q) maps scalars to an (N, N) array; batch, when given, maps
    broadcastable arrays to (..., N, N) and is used to vectorize meshes.
    """

    dim: int
    at: Callable
    batch: Callable | None = None
    name: str = "family"

    def stack(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        if self.batch is not None:
            return np.asarray(self.batch(P, Q), dtype=np.complex128)
        out = np.empty(P.shape + (self.dim, self.dim), dtype=np.complex128)
        for idx in np.ndindex(P.shape):
            out[idx] = self.at(float(P[idx]), float(Q[idx]))
        return out


def sphere_family(B: float) -> ParameterFamily:
    """The spin-1/2 sphere family H(theta, phi) = B * n(theta, phi) . sigma."""
    if not B > 0:
        raise ValueError("sphere family requires B > 0")

    def batch(theta, phi):
        theta = np.asarray(theta, dtype=np.float64)
        phi = np.asarray(phi, dtype=np.float64)
        theta, phi = np.broadcast_arrays(theta, phi)
        st, ct = np.sin(theta), np.cos(theta)
        out = np.empty(theta.shape + (2, 2), dtype=np.complex128)
        out[..., 0, 0] = B * ct
        out[..., 1, 1] = -B * ct
        out[..., 0, 1] = B * st * np.exp(-1j * phi)
        out[..., 1, 0] = np.conj(out[..., 0, 1])
        return out

    def at(theta, phi):
        return batch(np.float64(theta), np.float64(phi))

    return ParameterFamily(dim=2, at=at, batch=batch, name="sphere")


def _family_frames(family: ParameterFamily, P, Q, degeneracy_tolerance):
    hs = family.stack(P, Q)
    evals, frames = eigh_stack(hs)
    scale = float(np.abs(evals).max())
    tol = degeneracy_tolerance if degeneracy_tolerance is not None else 1e-9 * scale
    gaps = np.diff(evals, axis=-1)
    if gaps.size and float(gaps.min()) < tol:
        idx = np.unravel_index(np.argmin(gaps), gaps.shape)[:-1]
        raise DegenerateSpectrumError(
            f"family degenerate inside the patch at (p, q) = "
            f"({P[idx]!r}, {Q[idx]!r})"
        )
    return frames


def _plaquette_phases(frames: np.ndarray, level: int, wrap_q: bool) -> np.ndarray:
    """Counterclockwise plaquette phases of one level's link field.

    frames has shape (Np, Nq, N, N). With wrap_q the q-direction is
    periodic and the output has Nq plaquette columns, else Nq - 1. The
    plaquette sum is a fixed-order numpy reduction, deterministic for a
    given mesh layout.
    """
    col = frames[:, :, :, level]
    link_p = np.einsum("ija,ija->ij", np.conj(col[:-1, :]), col[1:, :])
    if wrap_q:
        nxt = np.roll(col, -1, axis=1)
        link_q = np.einsum("ija,ija->ij", np.conj(col), nxt)
        lp0 = link_p
        lp1 = np.roll(link_p, -1, axis=1)
        lq0 = link_q[:-1, :]
        lq1 = link_q[1:, :]
    else:
        link_q = np.einsum("ija,ija->ij", np.conj(col[:, :-1]), col[:, 1:])
        lp0 = link_p[:, :-1]
        lp1 = link_p[:, 1:]
        lq0 = link_q[:-1, :]
        lq1 = link_q[1:, :]
    return np.angle(lp0 * lq1 * np.conj(lp1) * np.conj(lq0))


@dataclass(frozen=True)
class CurvatureField:
    """Berry curvature of one level over a parameter patch.

    values[i, j] is the curvature per unit area at the plaquette centered
    between p_centers[i] and q_centers[j]. The two-index component is
    antisymmetric: F^(qp) = -F^(pq), i.e. swapping the parameter axes
    negates values.
    """

    p_centers: np.ndarray
    q_centers: np.ndarray
    values: np.ndarray
    level: int


def berry_curvature(
    family: ParameterFamily,
    p_values: np.ndarray,
    q_values: np.ndarray,
    level: int,
    degeneracy_tolerance: float | None = None,
) -> CurvatureField:
    """Plaquette (field-strength) Berry curvature over a rectangular patch.

    Gauge invariant by construction and second-order accurate in the mesh
    spacing. Sign convention: the counterclockwise plaquette phase divided
    by the plaquette area, which for the sphere family gives +sin(theta)/2
    for the upper level and -sin(theta)/2 for the lower.
    """
    p_values = np.asarray(p_values, dtype=np.float64)
    q_values = np.asarray(q_values, dtype=np.float64)
    if p_values.size < 2 or q_values.size < 2:
        raise ValueError("patch needs at least 2 samples per axis")
    P, Q = np.meshgrid(p_values, q_values, indexing="ij")
    frames = _family_frames(family, P, Q, degeneracy_tolerance)
    phases = _plaquette_phases(frames, level, wrap_q=False)
    areas = np.outer(np.diff(p_values), np.diff(q_values))
    return CurvatureField(
        p_centers=0.5 * (p_values[:-1] + p_values[1:]),
        q_centers=0.5 * (q_values[:-1] + q_values[1:]),
        values=phases / areas,
        level=level,
    )


# ---------------------------------------------------------------------------
# quantized winding number
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaResult:
    """Winding-number extraction; theta itself is reported unrounded.

    The detail arrays trace the two integrals: ring_flux[i] is the flux of
    F_n - F_m through the i-th radial ring of plaquettes (summing to the
    surface integral), boundary_delta the potential samples whose
    quadrature is the boundary integral.
    """

    surface_integral: float
    boundary_integral: float
    theta: float
    nearest_integer: int
    residual: float
    ring_flux: np.ndarray | None = None
    boundary_times: np.ndarray | None = None
    boundary_delta: np.ndarray | None = None


def theta_winding(
    family: ParameterFamily,
    surface,
    period: float,
    m: int,
    n: int,
    mesh: tuple = (256, 256),
    boundary_samples: int = 4096,
    degeneracy_tolerance: float | None = None,
    overlap_floor: float | None = None,
) -> ThetaResult:
    """Quantized winding from curvature flux minus the loop's potential integral.

    Parameters
    ----------
    family:
        Two-parameter Hermitian family.
    surface:
        Chart callable (r, s) -> (p, q) for r, s in [0, 1]; s is periodic
        (equal Hamiltonians at s = 0 and s = 1), the r = 1 edge is the
        physical loop traversed as s = t / period, and the r = 0 edge may
        degenerate to a point. Orientation: plaquettes counterclockwise in
        (r, s), boundary in increasing time.
    period:
        Duration of one loop traversal.
    m, n:
        Ordered level pair; the flux integrand is F_n - F_m and the
        boundary integrand Delta_mn.
    mesh:
        (radial, around) plaquette counts for the surface integral.
    boundary_samples:
        Intervals for the boundary trajectory and its potential.

    2*pi*theta = (flux of F_n - F_m through the surface) - (integral of
    Delta_mn dt around the loop). The residual to the nearest integer is
    reported honestly; no rounding is applied to theta.
    """
    nr, ns = mesh
    if nr < 1 or ns < 3:
        raise ValueError("mesh must have at least (1, 3) plaquettes")
    r_nodes = np.linspace(0.0, 1.0, nr + 1)
    s_nodes = np.arange(ns) / ns
    R, S = np.meshgrid(r_nodes, s_nodes, indexing="ij")
    P, Q = surface(R, S)
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)

    # seam closure: H at s=1 must reproduce s=0 on every row
    p1, q1 = surface(r_nodes, np.ones_like(r_nodes))
    h_seam = family.stack(np.asarray(p1), np.asarray(q1))
    h_zero = family.stack(P[:, 0], Q[:, 0])
    scale = max(float(np.abs(h_zero).max()), 1e-300)
    defect = float(np.abs(h_seam - h_zero).max())
    if defect > 1e-12 * scale:
        raise ValueError(
            f"open loop: surface(r, 1) differs from surface(r, 0) by {defect:.3e} "
            f"(relative {defect / scale:.3e})"
        )

    frames = _family_frames(family, P, Q, degeneracy_tolerance)
    ring_flux = (
        _plaquette_phases(frames, n, wrap_q=True) - _plaquette_phases(frames, m, wrap_q=True)
    ).sum(axis=1)
    surface_integral = float(ring_flux.sum())

    grid = TimeGrid.linspace(0.0, period, boundary_samples + 1)

    def loop_h_batch(ts):
        s = np.asarray(ts, dtype=np.float64) / period
        p, q = surface(np.ones_like(s), s)
        return family.stack(np.asarray(p), np.asarray(q))

    loop_model = HamiltonianModel(
        dim=family.dim,
        h_at=lambda t: loop_h_batch(np.asarray([t]))[0],
        h_batch=loop_h_batch,
        name=f"{family.name}-loop",
        char_time=period,
    )
    traj = track(loop_model, grid, "parallel_transport", degeneracy_tolerance)
    delta, valid = qgp_direct(traj, m, n, overlap_floor=overlap_floor, with_mask=True)
    if not valid.all():
        bad = grid.samples[~valid][0]
        raise InvalidSamplesError(
            f"boundary potential invalid near t={bad!r} (overlap rate at/near "
            "zero); this loop has no well-defined boundary integral"
        )
    boundary_integral = integrate(delta, grid)

    theta = (surface_integral - boundary_integral) / (2.0 * np.pi)
    nearest = int(np.rint(theta))
    return ThetaResult(
        surface_integral=surface_integral,
        boundary_integral=boundary_integral,
        theta=theta,
        nearest_integer=nearest,
        residual=abs(theta - nearest),
        ring_flux=ring_flux,
        boundary_times=grid.samples,
        boundary_delta=delta,
    )


def polar_cap_surface(theta0: float):
    """Chart for the north-polar cap bounded by the constant-theta0 circle."""

    def surface(r, s):
        return theta0 * np.asarray(r), 2.0 * np.pi * np.asarray(s)

    return surface
