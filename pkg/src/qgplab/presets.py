"""Named model presets addressable from scenario configs.

Presets speak laboratory units (frequencies in Hz, i.e. E/h); conversion
to the package's internal angular rates happens here.
"""

import dataclasses
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .geometry import ParameterFamily, sphere_family
from .models import (
    TWO_PI,
    HamiltonianModel,
    RotatingFieldParams,
    SphereFieldParams,
    rotating_field,
    sphere_field,
)


@dataclass(frozen=True)
class ModelBundle:
    """A built model plus the derived numbers scenario runners need."""

    preset: str
    model: HamiltonianModel | None
    family: ParameterFamily | None
    params_hz: dict
    rotation_period_s: float
    gap_hz: float
    expected_frequency_hz: float | None
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    model_keys: tuple
    defaults: dict
    builder: Callable | None = None


def _build_rotating(params_hz: dict) -> ModelBundle:
    eta_hz = params_hz["eta_hz"]
    xi_hz = params_hz["xi_hz"]
    K = params_hz["K"]
    p = RotatingFieldParams.from_frequencies(eta_hz, xi_hz, K)
    model = rotating_field(p)
    gap_hz = 2.0 * float(np.hypot(eta_hz, xi_hz))
    qgp_hz = 2.0 * K * eta_hz * p.cos_theta
    return ModelBundle(
        preset="",
        model=model,
        family=None,
        params_hz=dict(params_hz),
        rotation_period_s=p.period,
        gap_hz=gap_hz,
        expected_frequency_hz=abs(qgp_hz - gap_hz),
        info={
            "cos_theta": p.cos_theta,
            "qgp_over_eta": 2.0 * K * p.cos_theta,
            "eta_rad_per_s": p.eta,
        },
    )


def _sphere_bundle(params_hz: dict, theta0: float) -> ModelBundle:
    b_hz = params_hz["b_hz"]
    omega_hz = params_hz["omega_hz"]
    B = TWO_PI * b_hz
    omega = TWO_PI * omega_hz
    sp = SphereFieldParams(
        B=B,
        theta_of_t=lambda t: np.full_like(np.asarray(t, dtype=np.float64), theta0),
        phi_of_t=lambda t: omega * np.asarray(t, dtype=np.float64),
        dtheta_of_t=lambda t: np.zeros_like(np.asarray(t, dtype=np.float64)),
        dphi_of_t=lambda t: np.full_like(np.asarray(t, dtype=np.float64), omega),
        d2theta_of_t=lambda t: np.zeros_like(np.asarray(t, dtype=np.float64)),
        d2phi_of_t=lambda t: np.zeros_like(np.asarray(t, dtype=np.float64)),
        char_time=TWO_PI / omega,
    )
    model = sphere_field(sp)
    gap_hz = 2.0 * b_hz
    qgp_hz = omega_hz * np.cos(theta0)
    return ModelBundle(
        preset="",
        model=model,
        family=sphere_family(B),
        params_hz=dict(params_hz),
        rotation_period_s=TWO_PI / omega,
        gap_hz=gap_hz,
        expected_frequency_hz=abs(qgp_hz - gap_hz),
        info={"theta0_rad": theta0, "sphere_params": sp},
    )


def _build_sphere_cap(params_hz: dict) -> ModelBundle:
    return _sphere_bundle(params_hz, float(params_hz["theta0_rad"]))


def _build_gap_only(params_hz: dict) -> ModelBundle:
    # transverse coupling only: the field rotates in the equatorial plane,
    # cos(theta) = 0, so the geometric potential vanishes identically and
    # the interference oscillates at the bare gap 2*xi
    params = dict(params_hz)
    params["b_hz"] = params["xi_hz"]
    return _sphere_bundle(params, 0.5 * np.pi)


PRESETS = {
    "paper-neutron": Preset(
        name="paper-neutron",
        description=(
            "Spin-1/2 in a rotating transverse field at neutron-beam scale: "
            "eta = 721 kHz, xi = 7.21 kHz, K = 5 (7.21 MHz field rotation); "
            "the differential interferogram oscillates near 5.77 MHz"
        ),
        model_keys=("eta_hz", "xi_hz", "K"),
        defaults={"eta_hz": 721e3, "xi_hz": 7.21e3, "K": 5.0},
        builder=_build_rotating,
    ),
    "sphere-cap": Preset(
        name="sphere-cap",
        description=(
            "Field of fixed magnitude tracing a constant-latitude circle on "
            "the sphere; the constant-theta0 loop bounds a polar cap with "
            "integer winding -1"
        ),
        model_keys=("b_hz", "omega_hz", "theta0_rad"),
        defaults={"b_hz": 721e3, "omega_hz": 7.21e6, "theta0_rad": 0.25 * np.pi},
        builder=_build_sphere_cap,
    ),
    "gap-only": Preset(
        name="gap-only",
        description=(
            "Control with the longitudinal coupling removed (equatorial "
            "rotation, xi only): the geometric potential vanishes and the "
            "interferogram oscillates at the bare gap 2*xi"
        ),
        model_keys=("xi_hz", "omega_hz"),
        defaults={"xi_hz": 7.21e3, "omega_hz": 7.21e6},
        builder=_build_gap_only,
    ),
}


def list_presets():
    """Preset (name, description) pairs in declaration order."""
    return [(p.name, p.description) for p in PRESETS.values()]


def build_bundle(preset_name: str, overrides: dict | None = None) -> ModelBundle:
    """Instantiate a preset with optional Hz-facing parameter overrides."""
    if preset_name not in PRESETS:
        known = ", ".join(PRESETS)
        raise ConfigError(f"unknown preset {preset_name!r}; known presets: {known}")
    preset = PRESETS[preset_name]
    params = dict(preset.defaults)
    for key, value in (overrides or {}).items():
        if key not in preset.model_keys:
            raise ConfigError(
                f"model.{key} is not a parameter of preset {preset_name!r} "
                f"(accepts: {', '.join(preset.model_keys)})"
            )
        params[key] = value
    for key in ("eta_hz", "xi_hz", "b_hz", "omega_hz"):
        if key in params and not params[key] > 0:
            raise ConfigError(f"model.{key} must be positive, got {params[key]!r}")
    return dataclasses.replace(preset.builder(params), preset=preset_name)
