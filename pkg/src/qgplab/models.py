"""Concrete parameterized Hamiltonians and gauge transforms.

Two-level presets (rotating transverse field, field tracing a sphere path)
carry analytic eigensystems so trajectories can be built in the printed
gauge; arbitrary N-level models are wrapped by custom_model. Level
indices are always by ascending instantaneous eigenvalue, so for the
two-level models index 0 is the lower ("-") branch and index 1 the upper
("+") branch.

All energies and rates are angular (hbar = 1). Laboratory-facing
frequencies in Hz (E/h) are converted with the 2*pi factor by the
``from_frequencies`` constructors and by the CLI.
"""

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .errors import NonHermitianError
from .numerics import hermiticity_defect

TWO_PI = 2.0 * np.pi

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)


@dataclass(frozen=True)
class HamiltonianModel:
    """An N-level Hermitian matrix-valued function of time.

    h_at maps a scalar time to an (N, N) complex array. Optional members:
    dh_dt_at (analytic time derivative), eig_at (analytic instantaneous
    eigensystem, returning ascending eigenvalues and eigenvector columns),
    and batched variants h_batch/eig_batch mapping a (T,) time array to
    (T, N, N) / ((T, N), (T, N, N)) arrays. char_time is a characteristic
    period used to scale finite-difference steps.

    Models are immutable; the callables must be re-entrant.
    """

    dim: int
    h_at: Callable
    dh_dt_at: Callable | None = None
    eig_at: Callable | None = None
    h_batch: Callable | None = None
    eig_batch: Callable | None = None
    connection_batch: Callable | None = None
    name: str = "model"
    params: dict = field(default_factory=dict)
    char_time: float = 1.0

    def h_stack(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=np.float64)
        if self.h_batch is not None:
            return np.asarray(self.h_batch(ts), dtype=np.complex128)
        out = np.empty((ts.size, self.dim, self.dim), dtype=np.complex128)
        for i, t in enumerate(ts):
            out[i] = self.h_at(float(t))
        return out

    def eig_stack(self, ts: np.ndarray):
        if self.eig_at is None:
            raise ValueError(f"model {self.name!r} has no analytic eigensystem")
        ts = np.asarray(ts, dtype=np.float64)
        if self.eig_batch is not None:
            evals, frames = self.eig_batch(ts)
            return np.asarray(evals, dtype=np.float64), np.asarray(frames, dtype=np.complex128)
        evals = np.empty((ts.size, self.dim), dtype=np.float64)
        frames = np.empty((ts.size, self.dim, self.dim), dtype=np.complex128)
        for i, t in enumerate(ts):
            evals[i], frames[i] = self.eig_at(float(t))
        return evals, frames

    def dh_stack(self, ts: np.ndarray) -> np.ndarray:
        if self.dh_dt_at is None:
            raise ValueError(f"model {self.name!r} has no analytic dH/dt")
        ts = np.asarray(ts, dtype=np.float64)
        out = np.empty((ts.size, self.dim, self.dim), dtype=np.complex128)
        for i, t in enumerate(ts):
            out[i] = self.dh_dt_at(float(t))
        return out

    def connection_stack(self, ts: np.ndarray) -> np.ndarray:
        """Analytic Berry connections (T, N) in the model's own gauge."""
        if self.connection_batch is None:
            raise ValueError(f"model {self.name!r} has no analytic connections")
        return np.asarray(self.connection_batch(np.asarray(ts, dtype=np.float64)), dtype=np.float64)


def with_fd_derivative(model: HamiltonianModel, step: float | None = None) -> HamiltonianModel:
    """Attach a symmetric-difference dH/dt to a model lacking one.

    The step defaults to 1e-6 * char_time.
    """
    delta = step if step is not None else 1e-6 * model.char_time

    def dh(t):
        return (model.h_at(t + delta) - model.h_at(t - delta)) / (2.0 * delta)

    return HamiltonianModel(
        dim=model.dim, h_at=model.h_at, dh_dt_at=dh, eig_at=model.eig_at,
        h_batch=model.h_batch, eig_batch=model.eig_batch,
        connection_batch=model.connection_batch,
        name=model.name, params=model.params, char_time=model.char_time,
    )


# ---------------------------------------------------------------------------
# rotating transverse field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RotatingFieldParams:
    """Longitudinal coupling eta, transverse coupling xi, winding rate K.

    The transverse field rotates at angular rate 2*K*eta. Both couplings
    are angular energies and must be positive (the geometry assumes a
    non-degenerate spectrum with a well-defined cone angle).
    """

    eta: float
    xi: float
    K: float

    def __post_init__(self):
        if not (self.eta > 0 and self.xi > 0):
            raise ValueError("rotating field requires eta > 0 and xi > 0")
        if not np.isfinite(self.K):
            raise ValueError("K must be finite")

    @classmethod
    def from_frequencies(cls, eta_hz: float, xi_hz: float, K: float) -> "RotatingFieldParams":
        return cls(eta=TWO_PI * eta_hz, xi=TWO_PI * xi_hz, K=K)

    @property
    def energy(self) -> float:
        """Magnitude of either eigenvalue, sqrt(eta^2 + xi^2)."""
        return float(np.hypot(self.eta, self.xi))

    @property
    def cos_theta(self) -> float:
        return self.eta / self.energy

    @property
    def sin_theta(self) -> float:
        return self.xi / self.energy

    @property
    def theta(self) -> float:
        return float(np.arccos(self.cos_theta))

    @property
    def omega(self) -> float:
        """Angular rotation rate of the transverse field, 2*K*eta."""
        return 2.0 * self.K * self.eta

    @property
    def qgp(self) -> float:
        """Closed-form geometric potential for (upper, lower), 2*K*eta*cos(theta)."""
        return 2.0 * self.K * self.eta * self.cos_theta

    @property
    def period(self) -> float:
        """One full rotation of the transverse field."""
        if self.omega == 0.0:
            return np.inf
        return TWO_PI / abs(self.omega)


def rotating_field(p: RotatingFieldParams) -> HamiltonianModel:
    """Spin-1/2 in a uniformly rotating transverse field plus static bias.

    h(t) = eta*sz + xi*(sx cos(w t) + sy sin(w t)), w = 2*K*eta. The
    spectrum is time independent (+-sqrt(eta^2+xi^2)) and the eigenframes
    are supplied analytically with the smooth phase choice
    phi_plus = (cos(theta/2), e^{iwt} sin(theta/2)),
    phi_minus = (sin(theta/2), -e^{iwt} cos(theta/2)).
    """
    eta, xi, w = p.eta, p.xi, p.omega
    energy = p.energy
    half = 0.5 * p.theta
    c, s = float(np.cos(half)), float(np.sin(half))

    def h_batch(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
        out = np.zeros((ts.size, 2, 2), dtype=np.complex128)
        rot = np.exp(-1j * w * ts)
        out[:, 0, 0] = eta
        out[:, 1, 1] = -eta
        out[:, 0, 1] = xi * rot
        out[:, 1, 0] = xi * np.conj(rot)
        return out

    def h_at(t):
        return h_batch(np.asarray([t]))[0]

    def dh_dt_at(t):
        rot = np.exp(-1j * w * t)
        out = np.zeros((2, 2), dtype=np.complex128)
        out[0, 1] = -1j * w * xi * rot
        out[1, 0] = np.conj(out[0, 1])
        return out

    def eig_batch(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
        evals = np.empty((ts.size, 2), dtype=np.float64)
        evals[:, 0] = -energy
        evals[:, 1] = energy
        rot = np.exp(1j * w * ts)
        frames = np.empty((ts.size, 2, 2), dtype=np.complex128)
        frames[:, 0, 0] = s
        frames[:, 1, 0] = -c * rot
        frames[:, 0, 1] = c
        frames[:, 1, 1] = s * rot
        return evals, frames

    def eig_at(t):
        evals, frames = eig_batch(np.asarray([t]))
        return evals[0], frames[0]

    def connection_batch(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
        out = np.empty((ts.size, 2), dtype=np.float64)
        out[:, 0] = -w * c * c
        out[:, 1] = -w * s * s
        return out

    return HamiltonianModel(
        dim=2, h_at=h_at, dh_dt_at=dh_dt_at, eig_at=eig_at,
        h_batch=h_batch, eig_batch=eig_batch, connection_batch=connection_batch,
        name="rotating_field",
        params={"eta": eta, "xi": xi, "K": p.K},
        char_time=p.period if np.isfinite(p.period) else 1.0,
    )


# ---------------------------------------------------------------------------
# field tracing a path on the unit sphere
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SphereFieldParams:
    """Field magnitude B and smooth angles theta(t), phi(t) in radians.

    First and second derivative callables may be supplied; missing ones
    are formed by symmetric differences with step fd_step. All callables
    must accept numpy arrays as well as scalars.
    """

    B: float
    theta_of_t: Callable
    phi_of_t: Callable
    dtheta_of_t: Callable | None = None
    dphi_of_t: Callable | None = None
    d2theta_of_t: Callable | None = None
    d2phi_of_t: Callable | None = None
    fd_step: float = 1e-6
    char_time: float = 1.0

    def __post_init__(self):
        if not self.B > 0:
            raise ValueError("sphere field requires B > 0 (B = 0 is fully degenerate)")

    def _d1(self, f, df):
        if df is not None:
            return df
        h = self.fd_step
        return lambda t: (f(t + h) - f(t - h)) / (2.0 * h)

    def _d2(self, f, d2f):
        if d2f is not None:
            return d2f
        h = self.fd_step
        return lambda t: (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h)

    def theta_dot(self):
        return self._d1(self.theta_of_t, self.dtheta_of_t)

    def phi_dot(self):
        return self._d1(self.phi_of_t, self.dphi_of_t)

    def theta_ddot(self):
        return self._d2(self.theta_of_t, self.d2theta_of_t)

    def phi_ddot(self):
        return self._d2(self.phi_of_t, self.d2phi_of_t)


def sphere_field(p: SphereFieldParams) -> HamiltonianModel:
    """Spin-1/2 coupled to a field of fixed magnitude and moving direction.

    h(t) = B * (sin th cos ph, sin th sin ph, cos th) . sigma with
    eigenvalues -B and +B at every time. Analytic eigenframes use the
    standard spinors phi_plus = (cos(th/2), e^{iph} sin(th/2)) and
    phi_minus = (sin(th/2), -e^{iph} cos(th/2)).
    """
    B = p.B
    th, ph = p.theta_of_t, p.phi_of_t

    def h_batch(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
        theta = np.asarray(th(ts), dtype=np.float64)
        phi = np.asarray(ph(ts), dtype=np.float64)
        st, ct = np.sin(theta), np.cos(theta)
        out = np.empty((ts.size, 2, 2), dtype=np.complex128)
        out[:, 0, 0] = B * ct
        out[:, 1, 1] = -B * ct
        out[:, 0, 1] = B * st * np.exp(-1j * phi)
        out[:, 1, 0] = np.conj(out[:, 0, 1])
        return out

    def h_at(t):
        return h_batch(np.asarray([t]))[0]

    tdot, pdot = p.theta_dot(), p.phi_dot()

    def dh_dt_at(t):
        theta = float(th(t))
        phi = float(ph(t))
        td, pd = float(tdot(t)), float(pdot(t))
        st, ct = np.sin(theta), np.cos(theta)
        dn = np.array([
            td * ct * np.cos(phi) - pd * st * np.sin(phi),
            td * ct * np.sin(phi) + pd * st * np.cos(phi),
            -td * st,
        ])
        return B * (dn[0] * SIGMA_X + dn[1] * SIGMA_Y + dn[2] * SIGMA_Z)

    def eig_batch(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
        theta = np.asarray(th(ts), dtype=np.float64)
        phi = np.asarray(ph(ts), dtype=np.float64)
        c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
        rot = np.exp(1j * phi)
        evals = np.empty((ts.size, 2), dtype=np.float64)
        evals[:, 0] = -B
        evals[:, 1] = B
        frames = np.empty((ts.size, 2, 2), dtype=np.complex128)
        frames[:, 0, 0] = s
        frames[:, 1, 0] = -c * rot
        frames[:, 0, 1] = c
        frames[:, 1, 1] = s * rot
        return evals, frames

    def eig_at(t):
        evals, frames = eig_batch(np.asarray([t]))
        return evals[0], frames[0]

    def connection_batch(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
        theta = np.asarray(th(ts), dtype=np.float64)
        pd = np.asarray(pdot(ts), dtype=np.float64)
        half = 0.5 * theta
        out = np.empty((ts.size, 2), dtype=np.float64)
        out[:, 0] = -pd * np.cos(half) ** 2
        out[:, 1] = -pd * np.sin(half) ** 2
        return out

    return HamiltonianModel(
        dim=2, h_at=h_at, dh_dt_at=dh_dt_at, eig_at=eig_at,
        h_batch=h_batch, eig_batch=eig_batch, connection_batch=connection_batch,
        name="sphere_field",
        params={"B": B},
        char_time=p.char_time,
    )


# ---------------------------------------------------------------------------
# user-supplied models
# ---------------------------------------------------------------------------

def custom_model(
    dim: int,
    h_at: Callable,
    dh_dt_at: Callable | None = None,
    probe_times: tuple = (0.0, 0.31, 0.77),
    name: str = "custom",
    char_time: float = 1.0,
) -> HamiltonianModel:
    """Wrap an arbitrary Hamiltonian callable after Hermiticity probing.

    Each probe time is evaluated and rejected with the offending time if
    the result is not square of the stated dimension or not Hermitian
    within relative 1e-12.
    """
    for t in probe_times:
        h = np.asarray(h_at(float(t)), dtype=np.complex128)
        if h.shape != (dim, dim):
            raise ValueError(f"h_at({t!r}) has shape {h.shape}, expected {(dim, dim)}")
        defect = hermiticity_defect(h)
        scale = max(float(np.abs(h).max()), 1e-300)
        if defect > 1e-12 * scale:
            raise NonHermitianError(
                f"h_at({t!r}) is not Hermitian: defect {defect:.3e} vs scale {scale:.3e}"
            )
    return HamiltonianModel(
        dim=dim, h_at=h_at, dh_dt_at=dh_dt_at, name=name, char_time=char_time
    )


# ---------------------------------------------------------------------------
# gauge transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaugeTransform:
    """Smooth per-level phase functions f_k(t) with f_k(start) = 0.

    fs has one callable per level; optional dfs carries the analytic time
    derivatives (used by covariance tests). Callables must accept arrays.
    """

    fs: tuple
    dfs: tuple | None = None


def apply_gauge(traj, g: GaugeTransform):
    """Multiply each eigenframe column by exp(i f_k(t)).

    Rejects transforms that do not vanish at the trajectory start (the
    initial phase is fixed by convention). Eigenvalues are untouched. The
    result keeps the source's smoothness, with gauge_mode "custom".
    """
    from .spectral import GaugeTrajectory

    if len(g.fs) != traj.model.dim:
        raise ValueError(f"need {traj.model.dim} phase functions, got {len(g.fs)}")
    t0 = float(traj.grid.samples[0])
    for k, f in enumerate(g.fs):
        if float(f(t0)) != 0.0:
            raise ValueError(f"gauge transform f_{k}({t0!r}) = {f(t0)!r}, must be 0")
    ts = traj.grid.samples
    phases = np.stack([np.asarray(f(ts), dtype=np.float64) for f in g.fs], axis=-1)
    frames = traj.frames * np.exp(1j * phases)[:, None, :]
    return GaugeTrajectory(
        model=traj.model,
        grid=traj.grid,
        energies=traj.energies.copy(),
        frames=frames,
        gauge_mode="custom",
        smooth=traj.smooth,
    )
