"""Dense complex linear algebra and ODE/quadrature kernels for small N.

Everything here is model-agnostic: Hermitian eigensolving (closed form for
two levels, LAPACK via numpy above that), unitary time propagation built
on per-step midpoint exponentials, prefix-consistent composite quadrature,
and phase unwrapping. All functions are pure; arrays are never mutated.
Units are natural (hbar = 1) throughout.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateSpectrumError, NonHermitianError, PropagationError

HERMITICITY_RTOL = 1e-12
NORM_ATOL = 1e-9
DEGENERACY_RTOL = 1e-9


# ---------------------------------------------------------------------------
# time grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing sample times, with uniform spacing detected.

    Attributes
    ----------
    samples:
        1-D float64 array of times, strictly increasing, length >= 2.
    uniform:
        True when all spacings agree to relative 1e-12.
    dt:
        The common spacing when uniform, else None.
    """

    samples: np.ndarray
    uniform: bool = field(init=False)
    dt: float | None = field(init=False)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError("TimeGrid needs a 1-D array of at least 2 times")
        if not np.all(np.isfinite(samples)):
            raise ValueError("TimeGrid samples must be finite")
        steps = np.diff(samples)
        if np.any(steps <= 0):
            raise ValueError("TimeGrid samples must be strictly increasing")
        samples = samples.copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        h = (samples[-1] - samples[0]) / (samples.size - 1)
        # rounding of the samples themselves jitters diffs by ~eps * |t|
        tol = 1e-12 * abs(h) + 8.0 * np.finfo(np.float64).eps * float(np.abs(samples).max())
        uniform = bool(np.all(np.abs(steps - h) <= tol))
        object.__setattr__(self, "uniform", uniform)
        object.__setattr__(self, "dt", float(h) if uniform else None)

    @classmethod
    def linspace(cls, t0: float, t1: float, n: int) -> "TimeGrid":
        return cls(np.linspace(t0, t1, n))

    @property
    def t0(self) -> float:
        return float(self.samples[0])

    @property
    def t1(self) -> float:
        return float(self.samples[-1])

    @property
    def n(self) -> int:
        return int(self.samples.size)

    def index_of(self, t: float, rtol: float = 1e-6) -> int:
        """Index of the grid node equal to t, within rtol of the mean spacing."""
        i = int(np.argmin(np.abs(self.samples - t)))
        step = (self.t1 - self.t0) / (self.n - 1)
        if abs(self.samples[i] - t) > rtol * step:
            raise ValueError(f"time {t!r} is not a grid node")
        return i

    def span(self) -> float:
        return self.t1 - self.t0


# ---------------------------------------------------------------------------
# hermitian checks and eigensolving
# ---------------------------------------------------------------------------

def hermiticity_defect(h: np.ndarray) -> float:
    """max |H - H+| over the matrix (or stack of matrices)."""
    return float(np.abs(h - np.conj(np.swapaxes(h, -1, -2))).max())


def require_hermitian(h: np.ndarray, context: str = "matrix") -> None:
    scale = float(np.abs(h).max())
    defect = hermiticity_defect(h)
    if defect > HERMITICITY_RTOL * max(scale, 1e-300):
        raise NonHermitianError(
            f"{context}: hermiticity defect {defect:.3e} exceeds "
            f"{HERMITICITY_RTOL:.0e} * max|H| = {HERMITICITY_RTOL * scale:.3e}"
        )


def _eigh2_stack(h: np.ndarray):
    """Closed-form eigensystem for a (..., 2, 2) Hermitian stack.

    Returns ascending eigenvalues (..., 2) and orthonormal column frames
    (..., 2, 2); columns are exactly orthogonal by construction.
    """
    a = h[..., 0, 0].real
    d = h[..., 1, 1].real
    b = h[..., 0, 1]
    c0 = 0.5 * (a + d)
    dz = 0.5 * (a - d)
    r = np.hypot(dz, np.abs(b))
    evals = np.stack([c0 - r, c0 + r], axis=-1)

    # upper eigenvector, branch chosen for cancellation-free normalization
    use_a = dz >= 0
    x = np.where(use_a, dz + r, b)
    y = np.where(use_a, np.conj(b), r - dz)
    nrm = np.sqrt(np.abs(x) ** 2 + np.abs(y) ** 2)
    degenerate = nrm == 0
    safe = np.where(degenerate, 1.0, nrm)
    x = np.where(degenerate, 1.0, x) / safe
    y = np.where(degenerate, 0.0, y) / safe

    frames = np.empty(h.shape, dtype=np.complex128)
    frames[..., 0, 1] = x
    frames[..., 1, 1] = y
    frames[..., 0, 0] = -np.conj(y)
    frames[..., 1, 0] = np.conj(x)
    return evals, frames


def eigh_stack(h: np.ndarray):
    """Eigensystems for a stack of Hermitian matrices, ascending order.

    No hermiticity or degeneracy checking; callers own the preconditions.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.shape[-1] == 2:
        return _eigh2_stack(h)
    return np.linalg.eigh(h)


def hermitian_eigh(
    h: np.ndarray,
    degeneracy_tolerance: float | None = None,
    check_degenerate: bool = True,
):
    """Eigenvalues (ascending) and orthonormal eigenvector columns of H.

    Parameters
    ----------
    h:
        (N, N) Hermitian matrix, N >= 2. Hermiticity is verified to
        relative 1e-12 and violations are rejected.
    degeneracy_tolerance:
        Absolute gap below which the spectrum is treated as degenerate and
        refused. Defaults to 1e-9 * max|eigenvalue|.
    check_degenerate:
        Set False for uses (e.g. matrix exponentials) that are indifferent
        to degeneracy.

    Returns
    -------
    (evals, evecs):
        evals[k] ascending; evecs[:, k] is the k-th eigenvector.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 2:
        raise ValueError(f"expected a square matrix of dim >= 2, got shape {h.shape}")
    require_hermitian(h, "hermitian_eigh")
    evals, evecs = eigh_stack(h)
    if check_degenerate:
        scale = float(np.abs(evals).max())
        tol = degeneracy_tolerance if degeneracy_tolerance is not None else DEGENERACY_RTOL * scale
        gaps = np.diff(evals)
        if gaps.size and float(gaps.min()) < tol:
            k = int(np.argmin(gaps))
            raise DegenerateSpectrumError(
                f"eigenvalue gap {gaps[k]:.3e} between levels {k} and {k + 1} "
                f"is below the degeneracy tolerance {tol:.3e}"
            )
    return evals, evecs


def norm_defect(psi: np.ndarray) -> float:
    return abs(float(np.linalg.norm(psi)) - 1.0)


def require_normalized(psi: np.ndarray, context: str = "state") -> None:
    d = norm_defect(psi)
    if d > NORM_ATOL:
        raise ValueError(f"{context}: norm defect {d:.3e} exceeds {NORM_ATOL:.0e}")


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PropagationReport:
    """States at the grid nodes plus the accumulated error estimate."""

    states: np.ndarray          # (n_grid, N) complex
    error_estimate: float       # Richardson estimate of the global error
    steps_taken: int            # internal fine substeps actually applied


def _evaluate_h_stack(h_at, ts: np.ndarray, dim: int) -> np.ndarray:
    """Evaluate a Hamiltonian callable on many times, batched if supported."""
    try:
        out = np.asarray(h_at(ts), dtype=np.complex128)
        if out.shape == (ts.size, dim, dim):
            return out
    except Exception:
        pass
    out = np.empty((ts.size, dim, dim), dtype=np.complex128)
    for i, t in enumerate(ts):
        out[i] = h_at(float(t))
    return out


def _su2_params(hs: np.ndarray):
    c0 = 0.5 * (hs[:, 0, 0].real + hs[:, 1, 1].real)
    bz = 0.5 * (hs[:, 0, 0].real - hs[:, 1, 1].real)
    bx = hs[:, 0, 1].real.copy()
    by = -hs[:, 0, 1].imag
    return c0, bx, by, bz


def _substeps(h_at, dim, ta: float, tb: float, n_sub: int, psi: np.ndarray) -> np.ndarray:
    """n_sub midpoint-exponential steps across [ta, tb]; returns final state."""
    edges = np.linspace(ta, tb, n_sub + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    dts = np.diff(edges)
    hs = _evaluate_h_stack(h_at, mids, dim)
    require_hermitian(hs, f"H(t) on [{ta!r}, {tb!r}]")
    if dim == 2:
        c0, bx, by, bz = _su2_params(hs)
        traj = kernels.evolve_su2(c0, bx, by, bz, dts, psi)
    else:
        evals, evecs = eigh_stack(hs)
        traj = kernels.evolve_eig(evals, evecs, dts, psi)
    return traj[-1]

_MAX_SUBSTEPS = 1 << 24


def propagate_report(h_at, psi0: np.ndarray, grid: TimeGrid, tol: float = 1e-9) -> PropagationReport:
    """Solve i dpsi/dt = H(t) psi, reporting at the grid nodes.

    Each internal step applies the exponential of the midpoint Hamiltonian
    (unitary by construction, so norms are conserved to rounding). Between
    consecutive grid nodes the substep count is adapted by step doubling
    until the Richardson estimate of the local error per step is below
    ``tol``; the doubled (fine) solution is the one advanced.

    Raises PropagationError (carrying the last good time) if the required
    substep count underflows the step size limit.
    """
    psi = np.asarray(psi0, dtype=np.complex128)
    require_normalized(psi, "propagate initial state")
    dim = psi.shape[0]
    n_grid = grid.n
    states = np.empty((n_grid, dim), dtype=np.complex128)
    states[0] = psi
    err_total = 0.0
    steps = 0
    n_sub = 1
    for k in range(n_grid - 1):
        ta = float(grid.samples[k])
        tb = float(grid.samples[k + 1])
        while True:
            coarse = _substeps(h_at, dim, ta, tb, n_sub, psi)
            fine = _substeps(h_at, dim, ta, tb, 2 * n_sub, psi)
            interval_err = float(np.linalg.norm(coarse - fine)) / 3.0
            per_step = interval_err / (2 * n_sub)
            if per_step <= tol:
                break
            grow = (per_step / tol) ** (1.0 / 3.0) * 1.15
            n_sub = int(np.ceil(n_sub * min(grow, 64.0)))
            if 2 * n_sub > _MAX_SUBSTEPS:
                raise PropagationError(
                    f"step size underflow before reaching tol={tol:g}",
                    last_good_time=ta,
                )
        psi = fine
        err_total += interval_err
        steps += 2 * n_sub
        d = norm_defect(psi)
        if d > NORM_ATOL:
            raise PropagationError(
                f"norm drift {d:.3e} exceeded {NORM_ATOL:.0e}", last_good_time=tb
            )
        states[k + 1] = psi
        if per_step < 0.1 * tol and n_sub > 1:
            shrink = max((per_step / (0.5 * tol)) ** (1.0 / 3.0), 1.0 / 64.0)
            n_sub = max(1, int(np.ceil(n_sub * shrink)))
    return PropagationReport(states=states, error_estimate=err_total, steps_taken=steps)


def propagate(h_at, psi0: np.ndarray, grid: TimeGrid, tol: float = 1e-9) -> np.ndarray:
    """States at the grid nodes; see propagate_report for the contract."""
    return propagate_report(h_at, psi0, grid, tol).states


def propagate_fixed(h_at, psi0: np.ndarray, grid: TimeGrid, substeps: int = 1) -> np.ndarray:
    """Fixed-step variant: `substeps` midpoint-exponential steps per interval.

    Used by order-scaling tests and benchmarks, where the step size must be
    controlled exactly.
    """
    psi = np.asarray(psi0, dtype=np.complex128)
    require_normalized(psi, "propagate initial state")
    dim = psi.shape[0]
    states = np.empty((grid.n, dim), dtype=np.complex128)
    states[0] = psi
    for k in range(grid.n - 1):
        psi = _substeps(h_at, dim, float(grid.samples[k]), float(grid.samples[k + 1]), substeps, psi)
        states[k + 1] = psi
    return states


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def accumulate(values: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Running integral of samples over the grid, F[i] = integral to t_i.

    Uniform grids use a prefix-consistent composite Simpson scheme (even
    prefixes are classic composite Simpson; odd prefixes close with the
    three-point end rule), globally fourth order. Non-uniform grids use
    the trapezoid rule. ``integrate`` is by definition the last entry, so
    the two are consistent at every prefix.
    """
    values = np.asarray(values)
    if np.iscomplexobj(values):
        raise TypeError("accumulate expects real samples")
    values = values.astype(np.float64)
    if values.ndim != 1 or values.size != grid.n:
        raise ValueError(f"got {values.shape} values for a grid of {grid.n} samples")
    n = values.size
    out = np.zeros(n, dtype=np.float64)
    if not grid.uniform:
        dt = np.diff(grid.samples)
        out[1:] = np.cumsum(0.5 * dt * (values[:-1] + values[1:]))
        return out
    h = grid.dt
    if n == 2:
        out[1] = 0.5 * h * (values[0] + values[1])
        return out
    # even-index chain: composite Simpson pairs from index 0
    pair = (h / 3.0) * (values[:-2:2] + 4.0 * values[1:-1:2] + values[2::2])
    out[2::2] = np.cumsum(pair)
    # odd-index chain: three-point end rule from index 1, then Simpson pairs
    out[1] = (h / 12.0) * (5.0 * values[0] + 8.0 * values[1] - values[2])
    if n > 3:
        pair_odd = (h / 3.0) * (values[1:-2:2] + 4.0 * values[2:-1:2] + values[3::2])
        out[3::2] = out[1] + np.cumsum(pair_odd)
    return out


def integrate(values: np.ndarray, grid: TimeGrid) -> float:
    """Definite integral of the samples over the whole grid span."""
    return float(accumulate(values, grid)[-1])


# ---------------------------------------------------------------------------
# phase unwrapping and differentiation
# ---------------------------------------------------------------------------

def unwrap_phase(angles: np.ndarray) -> np.ndarray:
    """Remove 2*pi branch jumps from a sampled phase.

    The output is congruent to the input mod 2*pi elementwise, with
    consecutive differences folded into (-pi, pi]. The caller owns the
    density contract (true consecutive differences below pi).
    """
    angles = np.asarray(angles, dtype=np.float64)
    return np.unwrap(angles)


def time_derivative(series: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """d/dt of samples along axis 0, fourth order on uniform grids.

    Interior nodes use the five-point central stencil; the two nodes at
    each end use one-sided five-point stencils of the same order. Falls
    back to np.gradient (second order) for non-uniform or short grids.
    """
    series = np.asarray(series)
    n = series.shape[0]
    if n != grid.n:
        raise ValueError("series length does not match grid")
    if not grid.uniform or n < 5:
        return np.gradient(series, grid.samples, axis=0)
    h = grid.dt
    out = np.empty_like(series, dtype=np.result_type(series.dtype, np.float64))
    out[2:-2] = (series[:-4] - 8 * series[1:-3] + 8 * series[3:-1] - series[4:]) / (12 * h)
    out[0] = (-25 * series[0] + 48 * series[1] - 36 * series[2] + 16 * series[3] - 3 * series[4]) / (12 * h)
    out[1] = (-3 * series[0] - 10 * series[1] + 18 * series[2] - 6 * series[3] + series[4]) / (12 * h)
    out[-2] = (3 * series[-1] + 10 * series[-2] - 18 * series[-3] + 6 * series[-4] - series[-5]) / (12 * h)
    out[-1] = (25 * series[-1] - 48 * series[-2] + 36 * series[-3] - 16 * series[-4] + 3 * series[-5]) / (12 * h)
    return out
