"""Characterize a pen from balance measurements and fit its transfer curve.

We press the pen onto a scale with known masses, read the raw level the
tablet reports, and turn mass into pressure on the nib. Two curve families
are tried; the one with the better R^2 is kept.

    python3 demos/01_calibration.py
"""

import numpy as np

from stylusnorm import calib
from stylusnorm.calib import INK_LOG, INK_NIB, CalibrationPoint

rng = np.random.default_rng(0)

# Fake a measurement session: 25 raw levels, each with the mass that the
# reference ink curve says produces it, read off a balance with 1% error.
raw = np.linspace(20, 1024, 25)
grams = INK_LOG.physical(raw) * INK_NIB.surface_mm2 / calib.GRAVITY * 1000
grams *= 1 + 0.01 * rng.standard_normal(raw.size)
points = [CalibrationPoint(g, w) for g, w in zip(grams, raw)]
print(f"{len(points)} measurements, heaviest load {grams.max():.0f} g")

# mass -> force (N) -> pressure on the nib (N/mm^2)
w, p = calib.points_to_pressure(points, INK_NIB)
pairs = np.column_stack([w, p])

log_fit = calib.fit_log(pairs)
print(f"log fit:     a1={log_fit.a1:.2f} a2={log_fit.a2:.5f} f1={log_fit.f1:.3f} R^2={log_fit.r_squared:.5f}")
print(f"reference:   a1={INK_LOG.a1:.2f} a2={INK_LOG.a2:.5f} f1={INK_LOG.f1:.3f}")

try:
    ell = calib.fit_ellipse(pairs)
    print(f"ellipse fit: R^2={ell.r_squared:.5f}")
except calib.FitError as err:
    # log-shaped data pushes the ellipse towards an infinite semi-axis
    print(f"ellipse fit failed: {err}")

# The fitted curve saturates near the top of the raw range.
for level in (256, 512, 768, 1024):
    print(f"raw {level:4d} -> {float(log_fit.physical(level)):6.2f} N/mm^2")
