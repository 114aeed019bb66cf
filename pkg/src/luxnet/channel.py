"""Line-of-sight optical channel: geometry, path loss, photometry.

The propagation model is the generalised Lambertian emitter.  A source with
half-intensity angle Phi_1/2 has mode number

    m = -ln 2 / ln(cos Phi_1/2)

so m = 1 for a 60 degree source and m ~ 20 for a 15 degree spot LED.  The
line-of-sight channel gain onto a detector of area A at distance D is

    L = (m + 1) A / (2 pi D^2) * cos(alpha)^m * cos(beta)

with alpha the angle off the transmitter boresight and beta the angle of
incidence at the receiver.  Incidence beyond the receiver field of view
contributes nothing.

Photometric and radiometric quantities are tied together by a single
luminous efficacy constant (lm emitted per radiated watt).  That single
knob is deliberate: the sources in play are white phosphor LEDs whose
spectra we do not track, so illuminance at a face is

    E_v [lux] = efficacy * irradiance [W/m^2]

Photovoltaic harvest is linear in illuminance through one calibration
point (power produced at a reference illuminance with conversion losses
folded in), which holds well for small indoor cells over the range the
network operates in.

Optical interference: while an energy burst is on the air near a receiver,
downlink decoding degrades as ambient signal strength falls.  The failure
ratio is modelled as a logistic curve in ambient illuminance; with no
burst in progress frames are assumed clean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Tuple

import numpy as np

PLANCK_J_S = 6.62607015e-34
LIGHT_SPEED_M_S = 2.99792458e8

# lm per radiated watt for a generic warm-white phosphor LED spectrum
LUMINOUS_EFFICACY_LM_W = 250.0

Vec3 = Tuple[float, float, float]


def lambertian_order(half_angle_deg: float) -> float:
    """Lambertian mode number m for a given half-intensity angle.

    half_angle_deg must lie strictly inside (0, 90).
    """
    if not 0.0 < half_angle_deg < 90.0:
        raise ValueError(f"half angle must be in (0, 90) deg, got {half_angle_deg}")
    return -math.log(2.0) / math.log(math.cos(math.radians(half_angle_deg)))


def photon_energy(wavelength_m: float) -> float:
    """Energy of one photon, h*c/lambda, in joules."""
    if wavelength_m <= 0.0:
        raise ValueError(f"wavelength must be positive, got {wavelength_m}")
    return PLANCK_J_S * LIGHT_SPEED_M_S / wavelength_m


@dataclass(frozen=True)
class OpticalTransmitter:
    """A Lambertian source: radiated power, beam width, pose."""

    optical_power_w: float
    half_angle_deg: float = 60.0
    position: Vec3 = (0.0, 0.0, 0.0)
    boresight: Vec3 = (0.0, 0.0, -1.0)

    def __post_init__(self):
        if self.optical_power_w < 0.0:
            raise ValueError("optical power must be non-negative")
        if not 0.0 < self.half_angle_deg < 90.0:
            raise ValueError("half angle must be in (0, 90) deg")

    @property
    def order(self) -> float:
        return lambertian_order(self.half_angle_deg)


@dataclass(frozen=True)
class OpticalReceiver:
    """A flat detector or photovoltaic face: area, field of view, pose."""

    area_m2: float
    field_of_view_half_angle_deg: float = 90.0
    position: Vec3 = (0.0, 0.0, 0.0)
    normal: Vec3 = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.area_m2 <= 0.0:
            raise ValueError("receiver area must be positive")
        if not 0.0 < self.field_of_view_half_angle_deg <= 90.0:
            raise ValueError("field of view half angle must be in (0, 90] deg")


@dataclass(frozen=True)
class OpticalLink:
    """Resolved geometry of one transmitter-receiver pair."""

    distance_m: float
    irradiance_angle_deg: float   # alpha, off transmitter boresight
    incidence_angle_deg: float    # beta, off receiver normal
    order: float = 1.0            # Lambertian mode number of the source

    def __post_init__(self):
        if self.distance_m <= 0.0:
            raise ValueError("link distance must be positive")
        for name, angle in (("irradiance", self.irradiance_angle_deg),
                            ("incidence", self.incidence_angle_deg)):
            if not 0.0 <= angle <= 90.0:
                raise ValueError(f"{name} angle must be in [0, 90] deg, got {angle}")


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("zero-length direction vector")
    return v / n


def _angle_deg(a: np.ndarray, b: np.ndarray) -> float:
    cosine = float(np.clip(np.dot(_unit(a), _unit(b)), -1.0, 1.0))
    return math.degrees(math.acos(cosine))


def link_between(tx: OpticalTransmitter, rx: OpticalReceiver) -> OpticalLink:
    """Compute the link geometry from the two poses.

    Angles beyond 90 degrees (source behind the face, or face turned away)
    are clamped to 90 so the cosine terms zero the gain rather than going
    negative for back-facing geometry.
    """
    p_tx = np.asarray(tx.position, dtype=float)
    p_rx = np.asarray(rx.position, dtype=float)
    sep = p_rx - p_tx
    distance = float(np.linalg.norm(sep))
    if distance <= 0.0:
        raise ValueError("transmitter and receiver are co-located")
    alpha = _angle_deg(np.asarray(tx.boresight, dtype=float), sep)
    beta = _angle_deg(np.asarray(rx.normal, dtype=float), -sep)
    return OpticalLink(distance_m=distance,
                       irradiance_angle_deg=min(alpha, 90.0),
                       incidence_angle_deg=min(beta, 90.0),
                       order=tx.order)


def path_loss(link: OpticalLink, area_m2: float,
              field_of_view_half_angle_deg: float = 90.0) -> float:
    """Line-of-sight channel gain (dimensionless power ratio).

    Returns 0 when the incidence angle lies outside the receiver field of
    view.  Raises for non-positive distance or area (enforced on the types).
    """
    if area_m2 <= 0.0:
        raise ValueError("receiver area must be positive")
    if link.incidence_angle_deg > field_of_view_half_angle_deg:
        return 0.0
    m = link.order
    alpha = math.radians(link.irradiance_angle_deg)
    beta = math.radians(link.incidence_angle_deg)
    geometric = (m + 1.0) * area_m2 / (2.0 * math.pi * link.distance_m ** 2)
    return geometric * math.cos(alpha) ** m * math.cos(beta)


def received_optical_power(tx: OpticalTransmitter, rx: OpticalReceiver,
                           link: OpticalLink | None = None) -> float:
    """Optical watts collected by the receiver over the link."""
    if link is None:
        link = link_between(tx, rx)
    return tx.optical_power_w * path_loss(link, rx.area_m2,
                                          rx.field_of_view_half_angle_deg)


def irradiance_at(tx: OpticalTransmitter, rx: OpticalReceiver,
                  link: OpticalLink | None = None) -> float:
    """Irradiance (W/m^2) on the receiver plane from one source."""
    if link is None:
        link = link_between(tx, rx)
    return tx.optical_power_w * path_loss(link, rx.area_m2,
                                          rx.field_of_view_half_angle_deg) / rx.area_m2


def illuminance_at(rx: OpticalReceiver, ambient_lux: float,
                   active_sources: Iterable[OpticalTransmitter] = (),
                   efficacy_lm_w: float = LUMINOUS_EFFICACY_LM_W) -> float:
    """Total illuminance on a face: ambient plus every active source.

    Contributions superpose; ambient_lux stands in for the room light that
    the scenario does not trace ray by ray.
    """
    if ambient_lux < 0.0:
        raise ValueError("ambient illuminance must be non-negative")
    lux = ambient_lux
    for tx in active_sources:
        lux += efficacy_lm_w * irradiance_at(tx, rx)
    return lux


@dataclass(frozen=True)
class PvCalibration:
    """One-point linear calibration of a photovoltaic cell.

    reference_power_w is the electrical output measured at
    reference_illuminance_lux; conversion and regulator losses are folded
    into that measurement.
    """

    reference_power_w: float = 0.9e-3
    reference_illuminance_lux: float = 1000.0

    def __post_init__(self):
        if self.reference_power_w <= 0.0 or self.reference_illuminance_lux <= 0.0:
            raise ValueError("calibration point must be positive")


def pv_input_power(illuminance_lux: float, cal: PvCalibration = PvCalibration()) -> float:
    """Electrical watts from one cell at the given illuminance (linear model)."""
    if illuminance_lux < 0.0:
        raise ValueError("illuminance must be non-negative")
    return cal.reference_power_w * illuminance_lux / cal.reference_illuminance_lux


@dataclass(frozen=True)
class InterferenceModel:
    """Logistic frame-failure curve against ambient illuminance.

    failure = floor + (1 - floor) / (1 + exp(steepness * (lux - midpoint)))

    Monotone non-increasing in lux; approaches 1 - o(1) in the dark and
    `floor` under strong ambient light.  Applies only while an energy
    burst is actually on the air near the receiver.
    """

    midpoint_lux: float = 300.0
    steepness_per_lux: float = 0.02
    floor: float = 0.0

    def __post_init__(self):
        if self.steepness_per_lux <= 0.0:
            raise ValueError("steepness must be positive")
        if not 0.0 <= self.floor < 1.0:
            raise ValueError("floor must be in [0, 1)")


def frame_failure_probability(ambient_lux: float, etx_active: bool,
                              model: InterferenceModel = InterferenceModel()) -> float:
    """Probability that a downlink frame is lost to burst interference."""
    if ambient_lux < 0.0:
        raise ValueError("ambient illuminance must be non-negative")
    if not etx_active:
        return 0.0
    z = model.steepness_per_lux * (ambient_lux - model.midpoint_lux)
    # exp overflow guard: the curve is flat to double precision out here
    if z > 700.0:
        logistic = 0.0
    elif z < -700.0:
        logistic = 1.0
    else:
        logistic = 1.0 / (1.0 + math.exp(z))
    return model.floor + (1.0 - model.floor) * logistic
