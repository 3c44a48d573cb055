"""
Run configuration: a small TOML document turned into simulation objects.

Angles in the file are in degrees (keys end in ``_deg``) and everything else
is SI. Every section is optional; missing keys take the defaults below.

.. code-block:: toml

    seed = 7
    variant = "TransformedECEF"
    schemes = ["ConstantGlobalAccel", "ZeroOrderHoldBody", "TwoSampleCompensated"]

    [earth]                 # any EarthParams field
    omega_ie = 7.2921151467e-5

    [trajectory]
    kind = "Coning"         # Static | ConstantTwist | Coning | GreatCircle
    duration = 10.0
    rate_hz = 400.0
    lat_deg = 45.0
    lon_deg = 10.0
    height = 100.0
    roll_deg = 0.0
    pitch_deg = 0.0
    yaw_deg = 0.0
    amplitude_deg = 1.0     # Coning
    frequency_hz = 50.0     # Coning
    phase_deg = 0.0         # Coning
    omega_b = [0, 0, 0.1]   # ConstantTwist, rad/s
    v_b = [10, 0, 0]        # ConstantTwist, m/s
    speed = 200.0           # GreatCircle, m/s
    radius = 6.4e6          # GreatCircle, m (default: start point distance)

    [sensor]
    gyro_psd = 1e-8         # rad^2/s
    accel_psd = 1e-6        # m^2/s^3
    bias_model = "GaussMarkov"   # None | GaussMarkov | RandomWalk
    gyro_bias_sigma = 1e-5
    accel_bias_sigma = 1e-3
    tau = 3600.0
    initial_gyro_bias = [0, 0, 0]
    initial_accel_bias = [0, 0, 0]

    [filter]                # covariance propagation; densities default to [sensor]
    gyro_psd = 1e-8
    accel_psd = 1e-6
    initial_sigma = [1e-4, 1e-3, 1e-2]   # attitude rad, velocity m/s, position m

    [preintegrate]
    window = 1.0            # s
    scheme = "TwoSampleCompensated"

    [monotonicity]
    steps = 1000
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

from ..earth_models import WGS84, EarthParams, FrameVariant
from ..increments import ImuBias, SchemeKind
from ..propagation import NoiseParams
from .sensors import SensorErrorSpec
from .trajectories import Coning, ConstantTwist, GreatCircle, Static, start_geodetic

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

__all__ = ["RunConfig", "load_config", "parse_config", "build_trajectory"]

_TRAJECTORIES = {"static": Static, "constanttwist": ConstantTwist, "coning": Coning, "greatcircle": GreatCircle}


@dataclass(frozen=True, eq=False)
class RunConfig:
    seed: int = 0
    variant: FrameVariant = FrameVariant.TRANSFORMED_ECEF
    schemes: tuple = tuple(SchemeKind)
    earth: EarthParams = WGS84
    trajectory: dict = field(default_factory=dict)
    sensor: SensorErrorSpec = field(default_factory=SensorErrorSpec)
    noise: NoiseParams = field(default_factory=NoiseParams)
    initial_sigma: tuple = (0.0, 0.0, 0.0)
    window: float = 1.0
    preintegration_scheme: SchemeKind = SchemeKind.TWO_SAMPLE
    monotonicity_steps: int = 1000

    def build_trajectory(self):
        return build_trajectory(self.trajectory, self.earth)


def _check_keys(section, name, allowed):
    unknown = set(section) - set(allowed)
    if unknown:
        raise ValueError(f"unknown keys in [{name}]: {sorted(unknown)}")


def build_trajectory(t, params=WGS84):
    """Trajectory object from a ``[trajectory]`` mapping."""
    t = dict(t)
    _check_keys(
        t,
        "trajectory",
        {
            "kind", "duration", "rate_hz", "lat_deg", "lon_deg", "height", "roll_deg", "pitch_deg", "yaw_deg",
            "amplitude_deg", "frequency_hz", "phase_deg", "omega_b", "v_b", "speed", "radius",
        },
    )
    kind = str(t.get("kind", "Static"))
    cls = _TRAJECTORIES.get(kind.lower())
    if cls is None:
        raise ValueError(f"unknown trajectory kind {kind!r}")
    common = dict(
        duration=float(t.get("duration", 10.0)),
        rate_hz=float(t.get("rate_hz", 100.0)),
        start=start_geodetic(float(t.get("lat_deg", 45.0)), float(t.get("lon_deg", 0.0)), float(t.get("height", 0.0))),
        rpy=tuple(math.radians(float(t.get(k, 0.0))) for k in ("roll_deg", "pitch_deg", "yaw_deg")),
        params=params,
    )
    if cls is ConstantTwist:
        return cls(**common, omega_b=tuple(map(float, t.get("omega_b", (0.0, 0.0, 0.0)))), v_b=tuple(map(float, t.get("v_b", (0.0, 0.0, 0.0)))))
    if cls is Coning:
        return cls(
            **common,
            amplitude=math.radians(float(t.get("amplitude_deg", 1.0))),
            frequency=float(t.get("frequency_hz", 1.0)),
            phase=math.radians(float(t.get("phase_deg", 0.0))),
        )
    if cls is GreatCircle:
        radius = t.get("radius")
        return cls(**common, speed=float(t.get("speed", 0.0)), radius=None if radius is None else float(radius))
    return cls(**common)


def parse_config(doc):
    """:class:`RunConfig` from an already-parsed TOML mapping."""
    doc = dict(doc)
    _check_keys(doc, "top level", {"seed", "variant", "schemes", "earth", "trajectory", "sensor", "filter", "preintegrate", "monotonicity"})
    earth = EarthParams.from_mapping(doc.get("earth", {}))
    s = dict(doc.get("sensor", {}))
    _check_keys(
        s,
        "sensor",
        {"gyro_psd", "accel_psd", "bias_model", "gyro_bias_sigma", "accel_bias_sigma", "tau", "initial_gyro_bias", "initial_accel_bias"},
    )
    sensor = SensorErrorSpec(
        gyro_psd=float(s.get("gyro_psd", 0.0)),
        accel_psd=float(s.get("accel_psd", 0.0)),
        bias_model=s.get("bias_model", "None"),
        gyro_bias_sigma=float(s.get("gyro_bias_sigma", 0.0)),
        accel_bias_sigma=float(s.get("accel_bias_sigma", 0.0)),
        tau=float(s.get("tau", math.inf)),
        initial_bias=ImuBias(s.get("initial_gyro_bias", (0.0, 0.0, 0.0)), s.get("initial_accel_bias", (0.0, 0.0, 0.0))),
    )
    f = dict(doc.get("filter", {}))
    _check_keys(f, "filter", {"gyro_psd", "accel_psd", "initial_sigma"})
    noise = NoiseParams(float(f.get("gyro_psd", sensor.gyro_psd)), float(f.get("accel_psd", sensor.accel_psd)))
    sigma0 = tuple(float(x) for x in f.get("initial_sigma", (0.0, 0.0, 0.0)))
    if len(sigma0) != 3 or min(sigma0) < 0:
        raise ValueError("initial_sigma must be three non-negative numbers")
    p = dict(doc.get("preintegrate", {}))
    _check_keys(p, "preintegrate", {"window", "scheme"})
    m = dict(doc.get("monotonicity", {}))
    _check_keys(m, "monotonicity", {"steps"})
    schemes = tuple(SchemeKind.parse(x) for x in doc.get("schemes", [k.value for k in SchemeKind]))
    cfg = RunConfig(
        seed=int(doc.get("seed", 0)),
        variant=FrameVariant.parse(doc.get("variant", "TransformedECEF")),
        schemes=schemes,
        earth=earth,
        trajectory=dict(doc.get("trajectory", {})),
        sensor=sensor,
        noise=noise,
        initial_sigma=sigma0,
        window=float(p.get("window", 1.0)),
        preintegration_scheme=SchemeKind.parse(p.get("scheme", "TwoSampleCompensated")),
        monotonicity_steps=int(m.get("steps", 1000)),
    )
    cfg.build_trajectory()  # validate early
    return cfg


def load_config(path=None):
    """Read a TOML file; ``None`` gives the all-defaults configuration."""
    if path is None:
        return parse_config({})
    with open(path, "rb") as fh:
        return parse_config(tomllib.load(fh))
