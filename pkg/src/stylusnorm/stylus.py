"""Stylus profiles and pressure mapping between stylus spaces.

Raw tablet levels of one pen are normalized to a pen-independent pressure,
and denormalized into the raw space of another pen. Because the plastic pen
saturates at a lower physical pressure than the ink pen, physical pressures
beyond the destination's full scale are clamped to its top level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .calib import (
    INK_LOG,
    INK_NIB,
    PLASTIC_ELLIPSE,
    PLASTIC_NIB,
    RAW_MAX,
    EllipseModel,
    LogSaturationModel,
    NibSpec,
)
from .dataio import Signature

TransferModel = Union[LogSaturationModel, EllipseModel]

WEIGHT_MODES = ("published", "exact")


class DomainError(ValueError):
    """Input outside the domain of a transfer curve."""


@dataclass(frozen=True)
class StylusProfile:
    """A named pen: nib geometry plus an invertible transfer curve.

    ``nominal_max`` is the full-scale pressure read off the characterization
    plot (45 and 25 N/mm^2 for the built-in pens); the published pressure
    weights use it. ``physical_max`` is the full scale implied by the fitted
    curve itself.
    """

    name: str
    nib: NibSpec
    transfer: TransferModel
    raw_max: float = RAW_MAX
    nominal_max: float | None = None
    physical_max: float = field(init=False)

    def __post_init__(self):
        if self.transfer.raw_limit < self.raw_max:
            raise ValueError(f"transfer curve of {self.name!r} does not cover [0, {self.raw_max}]")
        object.__setattr__(self, "physical_max", float(self.transfer.physical(self.raw_max)))

    @property
    def rescale(self) -> float:
        return self.transfer.rescale

    @property
    def model_kind(self) -> str:
        return "log" if isinstance(self.transfer, LogSaturationModel) else "ellipse"


INK = StylusProfile("ink", INK_NIB, INK_LOG, nominal_max=45.0)
PLASTIC = StylusProfile("plastic", PLASTIC_NIB, PLASTIC_ELLIPSE, nominal_max=25.0)
BUILTIN_PROFILES = {"ink": INK, "plastic": PLASTIC}


def _scalar_or_array(x: np.ndarray):
    return float(x) if x.ndim == 0 else x


def _check_raw(profile: StylusProfile, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    bad = ~((w >= 0) & (w <= profile.raw_max))
    if np.any(bad):
        first = w[bad].ravel()[0]
        raise DomainError(f"raw level {first} outside [0, {profile.raw_max}] for {profile.name!r}")
    return w


def normalize(profile: StylusProfile, w):
    """Raw level -> rescaled pressure (~0-1024)."""
    w = _check_raw(profile, w)
    return _scalar_or_array(profile.rescale * profile.transfer.physical(w))


def denormalize(profile: StylusProfile, p):
    """Rescaled pressure -> raw level; the analytic inverse of :func:`normalize`."""
    p = np.asarray(p, dtype=float)
    top = profile.rescale * profile.physical_max
    # allow a few ulps above the top so normalize(raw_max) round-trips
    bad = ~((p >= 0) & (p <= top * (1 + 1e-12)))
    if np.any(bad):
        first = p[bad].ravel()[0]
        raise DomainError(f"pressure {first} outside [0, {top}] for {profile.name!r}")
    w = profile.transfer.inverse_physical(np.minimum(p, top) / profile.rescale)
    return _scalar_or_array(np.minimum(w, profile.raw_max))


def to_physical(profile: StylusProfile, w):
    """Raw level -> pressure in N/mm^2."""
    w = _check_raw(profile, w)
    return _scalar_or_array(profile.transfer.physical(w))


def from_physical(profile: StylusProfile, p):
    """Pressure in N/mm^2 -> raw level, saturating at ``raw_max``."""
    p = np.asarray(p, dtype=float)
    if np.any(~(p >= 0)):
        raise DomainError("physical pressure must be non-negative")
    w = np.where(
        p >= profile.physical_max,
        profile.raw_max,
        profile.transfer.inverse_physical(np.minimum(p, profile.physical_max)),
    )
    return _scalar_or_array(np.minimum(w, profile.raw_max))


def map_pressure(src: StylusProfile, dst: StylusProfile, w):
    """Raw level of ``src`` -> raw level ``dst`` would report at the same pressure."""
    return from_physical(dst, to_physical(src, w))


def saturated(src: StylusProfile, dst: StylusProfile, w) -> np.ndarray:
    """Mask of samples whose ``src`` pressure exceeds the ``dst`` full scale."""
    p = np.asarray(to_physical(src, w))
    return (p >= dst.physical_max) & (np.asarray(w) > 0)


def map_signature(src: StylusProfile, dst: StylusProfile, sig: Signature) -> Signature:
    p = sig.pressure
    bad = np.flatnonzero(~((p >= 0) & (p <= src.raw_max)))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"sample {i}: pressure {p[i]} outside [0, {src.raw_max}] for {src.name!r}")
    return sig.with_pressure(np.asarray(map_pressure(src, dst, p), dtype=float))


def physical_signature(profile: StylusProfile, sig: Signature) -> Signature:
    """Replace raw pressure by N/mm^2 (the shared normalized space)."""
    p = sig.pressure
    bad = np.flatnonzero(~((p >= 0) & (p <= profile.raw_max)))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"sample {i}: pressure {p[i]} outside [0, {profile.raw_max}] for {profile.name!r}")
    return sig.with_pressure(np.asarray(to_physical(profile, p), dtype=float), validate=False)


def pressure_weight(profile: StylusProfile, mode: str = "published") -> float:
    """Weight that brings N/mm^2 back to the 0-1024 scale of the raw channels.

    ``published`` uses the nominal full scale (1024/45 ink, 1024/25 plastic);
    ``exact`` uses the fitted curve's full scale.
    """
    if mode == "published":
        full = profile.nominal_max if profile.nominal_max is not None else round(profile.physical_max)
    elif mode == "exact":
        full = profile.physical_max
    else:
        raise ValueError(f"unknown weight mode {mode!r}; expected one of {WEIGHT_MODES}")
    return profile.raw_max / full


_PARAM_KEYS = {"log": ("a1", "a2", "f1"), "ellipse": ("r1", "r2", "f")}


def format_profile(profile: StylusProfile) -> str:
    kind = profile.model_kind
    lines = [f"name={profile.name}", f"model={kind}"]
    lines += [f"{k}={v!r}" for k, v in profile.transfer.params().items()]
    lines.append(f"nib_diameter_mm={profile.nib.diameter_mm!r}")
    lines.append(f"raw_max={profile.raw_max!r}")
    if profile.nominal_max is not None:
        lines.append(f"nominal_max={profile.nominal_max!r}")
    if np.isfinite(profile.transfer.r_squared):
        lines.append(f"r_squared={profile.transfer.r_squared!r}")
    return "\n".join(lines) + "\n"


def parse_profile(text: str) -> StylusProfile:
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        fields[key.strip()] = value.strip()
    try:
        kind = fields["model"]
        keys = _PARAM_KEYS[kind]
    except KeyError:
        raise ValueError("profile needs model=log or model=ellipse") from None
    missing = [k for k in ("name", "nib_diameter_mm", *keys) if k not in fields]
    if missing:
        raise ValueError(f"profile is missing fields: {', '.join(missing)}")
    params = {k: float(fields[k]) for k in keys}
    r2 = float(fields.get("r_squared", "nan"))
    transfer = LogSaturationModel(**params, r_squared=r2) if kind == "log" else EllipseModel(**params, r_squared=r2)
    nominal = fields.get("nominal_max")
    return StylusProfile(
        name=fields["name"],
        nib=NibSpec(float(fields["nib_diameter_mm"])),
        transfer=transfer,
        raw_max=float(fields.get("raw_max", RAW_MAX)),
        nominal_max=float(nominal) if nominal is not None else None,
    )


def load_profile(name_or_path: str) -> StylusProfile:
    """Built-in profile by name, otherwise a profile file path."""
    if name_or_path in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[name_or_path]
    with open(name_or_path, encoding="utf-8") as fh:
        return parse_profile(fh.read())
