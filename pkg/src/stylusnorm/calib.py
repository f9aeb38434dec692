"""Pressure sensor characterization and transfer-function fitting.

A balance load (grams) is turned into a force, divided by the nib contact
surface to get a pressure in N/mm^2, and paired with the digital level the
tablet reports. Three curve families describe that pairing:

* a degree-6 polynomial, pressure -> raw level (reference only, not invertible)
* a logarithmic saturation curve, raw level -> pressure
* an elliptic curve, raw level -> pressure

The two invertible families carry a rescale factor chosen so that the full
digital scale maps to ~1024, the range of the tablet itself.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

GRAVITY = 9.807  # m/s^2
RAW_MAX = 1024.0


class CalibrationError(ValueError):
    """Raised for invalid physical inputs (negative mass, zero surface...)."""


class FitError(RuntimeError):
    """Raised when a transfer function cannot be fitted."""

    def __init__(self, message: str, residual_norm: float | None = None):
        super().__init__(message)
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class CalibrationPoint:
    mass_g: float
    raw_level: float

    def __post_init__(self):
        if not self.mass_g >= 0:
            raise CalibrationError(f"mass must be >= 0 g, got {self.mass_g}")
        if not 0 <= self.raw_level <= RAW_MAX:
            raise CalibrationError(f"raw level must lie in [0, 1024], got {self.raw_level}")


@dataclass(frozen=True)
class NibSpec:
    diameter_mm: float

    def __post_init__(self):
        if not self.diameter_mm > 0:
            raise CalibrationError(f"nib diameter must be > 0 mm, got {self.diameter_mm}")

    @property
    def surface_mm2(self) -> float:
        return nib_surface(self.diameter_mm)


@dataclass(frozen=True)
class Poly6Model:
    """Degree-6 polynomial, highest power first (numpy.polyval order)."""

    coefficients: tuple[float, ...]
    r_squared: float = float("nan")

    def __post_init__(self):
        if len(self.coefficients) != 7:
            raise ValueError(f"a degree-6 polynomial needs 7 coefficients, got {len(self.coefficients)}")

    def __call__(self, pressure):
        return eval_poly6(self, pressure)


@dataclass(frozen=True)
class LogSaturationModel:
    """``p(w) = f1 * (-1/a2) * ln(1 - w/a1)`` and its inverse.

    ``a1`` is the raw-level asymptote, ``a2`` the decay rate (per N/mm^2) and
    ``f1`` the factor taking N/mm^2 to the 0-1024 rescaled space.
    """

    a1: float
    a2: float
    f1: float
    r_squared: float = float("nan")

    def __post_init__(self):
        if not (self.a1 > RAW_MAX and self.a2 > 0 and self.f1 > 0):
            raise ValueError(f"invalid log model parameters a1={self.a1}, a2={self.a2}, f1={self.f1}")

    @property
    def rescale(self) -> float:
        return self.f1

    @property
    def raw_limit(self) -> float:
        return self.a1

    def physical(self, w):
        return -np.log1p(-np.asarray(w, dtype=float) / self.a1) / self.a2

    def inverse_physical(self, p):
        return -self.a1 * np.expm1(-self.a2 * np.asarray(p, dtype=float))

    def params(self) -> dict[str, float]:
        return {"a1": self.a1, "a2": self.a2, "f1": self.f1}


@dataclass(frozen=True)
class EllipseModel:
    """``p(w) = f * [r1 - sqrt(r1^2 - (w/r2)^2)]`` and its inverse.

    ``r1`` is a semi-axis in N/mm^2, ``r2`` scales raw levels, ``f`` takes
    N/mm^2 to the rescaled space. Raw levels are valid up to ``r1 * r2``.
    """

    r1: float
    r2: float
    f: float
    r_squared: float = float("nan")

    def __post_init__(self):
        if not (self.r1 > 0 and self.r2 > 0 and self.f > 0):
            raise ValueError(f"invalid ellipse parameters r1={self.r1}, r2={self.r2}, f={self.f}")
        if self.r1 * self.r2 < RAW_MAX:
            raise ValueError(f"ellipse domain r1*r2={self.r1 * self.r2:.3f} does not cover [0, 1024]")

    @property
    def rescale(self) -> float:
        return self.f

    @property
    def raw_limit(self) -> float:
        return self.r1 * self.r2

    def physical(self, w):
        u = np.asarray(w, dtype=float) / self.r2
        # r1 - sqrt(r1^2 - u^2) written without cancellation near the origin
        return u * u / (self.r1 + np.sqrt(self.r1 * self.r1 - u * u))

    def inverse_physical(self, p):
        p = np.asarray(p, dtype=float)
        return self.r2 * np.sqrt(np.maximum(2.0 * self.r1 * p - p * p, 0.0))

    def params(self) -> dict[str, float]:
        return {"r1": self.r1, "r2": self.r2, "f": self.f}


# Published transfer functions of the Intuos 4 ink and plastic pens.
INK_LOG = LogSaturationModel(a1=1148.6344, a2=0.0468, f1=21.5761, r_squared=0.995)
PLASTIC_ELLIPSE = EllipseModel(r1=33.5234, r2=31.1303, f=37.8450, r_squared=0.991)
PLASTIC_POLY6 = Poly6Model(
    (-3.83e-5, 0.00345, -0.12586, 2.4219, -27.1975, 199.89, 5.6416), r_squared=0.9986
)
INK_POLY6 = Poly6Model(
    (5.48e-6, -0.0007, 0.03419, -0.7571, 6.5224, 28.89, -9.90398), r_squared=0.9983
)
INK_NIB = NibSpec(0.319)
PLASTIC_NIB = NibSpec(0.45)


def mass_to_force(mass_g):
    """Weight in newtons of a mass given in grams."""
    m = np.asarray(mass_g, dtype=float)
    if np.any(~(m >= 0)):
        raise CalibrationError("mass must be non-negative")
    force = m / 1000.0 * GRAVITY
    return float(force) if force.ndim == 0 else force


def nib_surface(diameter_mm: float) -> float:
    """Contact surface pi*D^2/4 of a circular nib, in mm^2."""
    if not diameter_mm > 0:
        raise CalibrationError(f"nib diameter must be > 0, got {diameter_mm}")
    return math.pi * diameter_mm * diameter_mm / 4.0


def force_to_pressure(force, surface_mm2: float):
    if not surface_mm2 > 0:
        raise CalibrationError(f"surface must be > 0, got {surface_mm2}")
    f = np.asarray(force, dtype=float)
    if np.any(~(f >= 0)):
        raise CalibrationError("force must be non-negative")
    p = f / surface_mm2
    return float(p) if p.ndim == 0 else p


def points_to_pressure(points: Sequence[CalibrationPoint], nib: NibSpec) -> tuple[np.ndarray, np.ndarray]:
    """Convert balance measurements to ``(raw_level, pressure)`` arrays."""
    mass = np.array([pt.mass_g for pt in points], dtype=float)
    raw = np.array([pt.raw_level for pt in points], dtype=float)
    return raw, force_to_pressure(mass_to_force(mass), nib.surface_mm2)


def eval_poly6(model: Poly6Model, pressure):
    out = np.polyval(np.asarray(model.coefficients, dtype=float), np.asarray(pressure, dtype=float))
    return float(out) if out.ndim == 0 else out


def r_squared(predicted, observed) -> float:
    """Coefficient of determination ``1 - SS_res / SS_tot``."""
    pred = np.asarray(predicted, dtype=float).ravel()
    obs = np.asarray(observed, dtype=float).ravel()
    if pred.size == 0 or pred.size != obs.size:
        raise ValueError("predicted and observed must have the same non-zero length")
    ss_tot = float(np.sum((obs - obs.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("R^2 is undefined for a constant observed vector")
    return 1.0 - float(np.sum((obs - pred) ** 2)) / ss_tot


def _pairs(points) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise FitError("points must be a sequence of (x, y) pairs")
    return arr[:, 0], arr[:, 1]


def fit_poly6(points) -> Poly6Model:
    """Least-squares degree-6 polynomial through ``(pressure, raw_level)`` pairs."""
    x, y = _pairs(points)
    if x.size < 8:
        raise FitError(f"need at least 8 points for a degree-6 fit, got {x.size}")
    if np.unique(x).size < 7:
        raise FitError("design matrix is rank deficient (fewer than 7 distinct pressures)")
    # column scaling keeps the Vandermonde system well conditioned
    scale = float(np.max(np.abs(x))) or 1.0
    vander = np.vander(x / scale, 7)
    coef, _, rank, _ = np.linalg.lstsq(vander, y, rcond=None)
    if rank < 7:
        raise FitError("design matrix is rank deficient")
    coef = coef / scale ** np.arange(6, -1, -1)
    model = Poly6Model(tuple(float(c) for c in coef))
    return Poly6Model(model.coefficients, r_squared(eval_poly6(model, x), y))


def gauss_newton(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0,
    *,
    max_iter: int = 200,
    rtol: float = 1e-10,
    max_halvings: int = 60,
) -> tuple[np.ndarray, float, int]:
    """Damped Gauss-Newton for ``min ||residual(x)||^2``.

    The full step is halved until the residual norm decreases. A residual
    function may return non-finite values to flag a parameter vector outside
    the model domain; such trial steps are treated as failures and halved.

    Returns:
      (x, residual_norm, iterations)

    Raises:
      FitError: if ``max_iter`` is exhausted before the relative improvement
        of the residual norm drops below ``rtol``.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = residual(x)
    if not np.all(np.isfinite(r)):
        raise FitError("initial guess lies outside the model domain")
    norm = float(np.linalg.norm(r))
    for it in range(1, max_iter + 1):
        if norm == 0.0:
            return x, norm, it
        J = jacobian(x)
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        alpha = 1.0
        for _ in range(max_halvings):
            trial = x + alpha * step
            r_trial = residual(trial)
            if np.all(np.isfinite(r_trial)):
                trial_norm = float(np.linalg.norm(r_trial))
                if trial_norm < norm:
                    break
            alpha *= 0.5
        else:
            # no decreasing step along the GN direction: stationary point
            return x, norm, it
        improvement = (norm - trial_norm) / norm
        x, r, norm = trial, r_trial, trial_norm
        if improvement < rtol:
            return x, norm, it
    raise FitError(f"no convergence after {max_iter} iterations", residual_norm=norm)


def _check_curve_points(points, what: str) -> tuple[np.ndarray, np.ndarray]:
    w, p = _pairs(points)
    if w.size < 4:
        raise FitError(f"{what} fit needs at least 4 points, got {w.size}")
    if np.any(w < 0) or np.any(p < 0):
        raise FitError("raw levels and pressures must be non-negative")
    if np.max(w) <= 0 or np.max(p) <= 0:
        raise FitError("points do not span any pressure range")
    return w, p


def fit_log(points, raw_max: float = RAW_MAX) -> LogSaturationModel:
    """Fit the logarithmic saturation curve to ``(raw_level, pressure)`` pairs.

    Pressures are physical (N/mm^2). Only ``a1`` and ``a2`` shape the curve;
    ``f1`` multiplies it and is set so that ``raw_max`` maps to ``raw_max``.
    """
    w, p = _check_curve_points(points, "log")
    w_max, p_max = float(np.max(w)), float(np.max(p))
    a1 = 1.1 * w_max
    a2 = -math.log1p(-w_max / a1) / p_max

    def residual(theta):
        a1_, a2_ = theta
        if a1_ <= w_max or a2_ <= 0:
            return np.full_like(w, np.nan)
        return -np.log1p(-w / a1_) / a2_ - p

    def jacobian(theta):
        a1_, a2_ = theta
        d_a1 = -(w / (a1_ * a1_)) / (1.0 - w / a1_) / a2_
        d_a2 = np.log1p(-w / a1_) / (a2_ * a2_)
        return np.column_stack([d_a1, d_a2])

    (a1, a2), _, _ = gauss_newton(residual, jacobian, [a1, a2])
    if a1 <= raw_max:
        raise FitError(f"fitted asymptote a1={a1:.3f} does not cover the raw range")
    f1 = raw_max / float(-math.log1p(-raw_max / a1) / a2)
    model = LogSaturationModel(float(a1), float(a2), f1)
    r2 = r_squared(model.physical(w), p)
    return LogSaturationModel(model.a1, model.a2, model.f1, r2)


def fit_ellipse(points, raw_max: float = RAW_MAX) -> EllipseModel:
    """Fit the elliptic curve to ``(raw_level, pressure)`` pairs.

    Same conventions as :func:`fit_log`; ``f`` comes from the rescaling rule.
    """
    w, p = _check_curve_points(points, "ellipse")
    w_max, p_max = float(np.max(w)), float(np.max(p))
    r1 = 1.3 * p_max
    # start on the curve through the largest measurement
    r2 = w_max / math.sqrt(2.0 * r1 * p_max - p_max * p_max)

    def residual(theta):
        r1_, r2_ = theta
        if r1_ <= 0 or r2_ <= 0 or w_max / r2_ >= r1_:
            return np.full_like(w, np.nan)
        u = w / r2_
        return u * u / (r1_ + np.sqrt(r1_ * r1_ - u * u)) - p

    def jacobian(theta):
        r1_, r2_ = theta
        u = w / r2_
        root = np.sqrt(r1_ * r1_ - u * u)
        d_r1 = 1.0 - r1_ / root
        d_r2 = -(u * u) / (r2_ * root)
        return np.column_stack([d_r1, d_r2])

    (r1, r2), _, _ = gauss_newton(residual, jacobian, [r1, r2])
    if r1 * r2 < raw_max:
        raise FitError(f"fitted ellipse domain r1*r2={r1 * r2:.3f} does not cover the raw range")
    u = raw_max / r2
    f = raw_max / float(r1 - math.sqrt(r1 * r1 - u * u))
    model = EllipseModel(float(r1), float(r2), f)
    r2_fit = r_squared(model.physical(w), p)
    return EllipseModel(model.r1, model.r2, model.f, r2_fit)


def read_calibration_csv(text: str) -> list[CalibrationPoint]:
    """Parse ``mass_g,raw_level`` CSV text.

    Raises:
      ValueError: with the offending 1-based line number.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("line 1: empty calibration file") from None
    if [h.strip() for h in header] != ["mass_g", "raw_level"]:
        raise ValueError(f"line 1: expected header 'mass_g,raw_level', got {','.join(header)!r}")
    points = []
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ValueError(f"line {lineno}: expected 2 fields, got {len(row)}")
        try:
            points.append(CalibrationPoint(float(row[0]), float(row[1])))
        except (ValueError, CalibrationError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if not points:
        raise ValueError("no calibration points")
    return points


def write_calibration_csv(points: Iterable[CalibrationPoint]) -> str:
    lines = ["mass_g,raw_level"]
    lines += [f"{float(pt.mass_g)!r},{float(pt.raw_level)!r}" for pt in points]
    return "\n".join(lines) + "\n"
