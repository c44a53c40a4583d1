"""Independent closed-form references used as test oracles.

Everything here is derived by hand from the rotating-field model's
analytic structure and computed through numpy primitives only, so it
shares no code path with the kernels it checks.
"""

import numpy as np

SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def rotating_exact_state(p, t, psi0):
    """Exact evolution under the rotating-field Hamiltonian.

    Transform to the frame corotating with the transverse field, where the
    Hamiltonian is static: psi(t) = Rz(w t) exp(-i H_rot t) psi(0) with
    H_rot = (eta - w/2) sz + xi sx and Rz the frame rotation back.
    """
    w = p.omega
    h_rot = (p.eta - 0.5 * w) * SZ + p.xi * SX
    ev, vec = np.linalg.eigh(h_rot)
    u = (vec * np.exp(-1j * ev * t)) @ vec.conj().T
    rz = np.diag([np.exp(-0.5j * w * t), np.exp(0.5j * w * t)])
    return rz @ u @ np.asarray(psi0, dtype=complex)


def corrected_rate(p):
    """Phase rate of the differential interferogram, e- - e+ + Delta_(+,-)."""
    return -2.0 * p.energy + p.qgp


def rotating_intensity(p, t1, t2):
    """Closed-form two-arm intensity for the rotating-field model."""
    s = np.sin(0.5 * p.theta)
    c = np.cos(0.5 * p.theta)
    w = p.omega
    a_minus = -w * c * c
    a_plus = -w * s * s
    phase = (-p.energy - a_minus) * t1 - (p.energy - a_plus) * t2
    val = np.exp(1j * phase) * s * c * (1.0 - np.exp(1j * w * (t2 - t1)))
    return 1.0 + val.real


def rotating_differential(p, t1):
    """Exact dI/dt2 at t2 -> t1: K*eta*sin(theta) * sin(G*t1)."""
    return p.K * p.eta * p.sin_theta * np.sin(corrected_rate(p) * np.asarray(t1))


def cap_flux(theta0):
    """Analytic flux of F_lower - F_upper through the north cap."""
    return -2.0 * np.pi * (1.0 - np.cos(theta0))


def cap_boundary(theta0):
    """Analytic loop integral of Delta_(upper,lower) over one traversal."""
    return 2.0 * np.pi * np.cos(theta0)
