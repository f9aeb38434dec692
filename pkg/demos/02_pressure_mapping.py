"""Move a pressure track from one pen's raw scale to another's.

Raw levels are converted to N/mm^2 through the source pen's curve, then back
to raw levels through the inverse of the target pen's curve. The plastic pen
saturates at a lower pressure, so hard strokes written with the ink pen get
clamped at the top of the plastic scale.

    python3 demos/02_pressure_mapping.py
"""

import numpy as np

from stylusnorm import stylus
from stylusnorm.stylus import INK, PLASTIC

print(f"full scale: ink {INK.physical_max:.2f} N/mm^2, plastic {PLASTIC.physical_max:.2f} N/mm^2")
print(f"normalize(1024): ink {stylus.normalize(INK, 1024):.3f}, plastic {stylus.normalize(PLASTIC, 1024):.4f}")

# A stroke that rises to a hard press and releases.
track = np.round(900 * np.sin(np.linspace(0, np.pi, 11)))
mapped = stylus.map_pressure(INK, PLASTIC, track)
clamped = stylus.saturated(INK, PLASTIC, track)
print("ink raw   ", track.astype(int).tolist())
print("as plastic", np.round(mapped).astype(int).tolist())
print(f"{int(clamped.sum())} of {track.size} samples exceed the plastic pen's range")

# Both pens agree once expressed in N/mm^2, up to saturation.
back = stylus.map_pressure(PLASTIC, INK, mapped)
keep = ~clamped
print(f"round trip error on unclamped samples: {np.max(np.abs(back[keep] - track[keep])):.2e}")

# Per-channel weights that bring N/mm^2 back onto the raw 0-1024 scale.
for prof in (INK, PLASTIC):
    print(f"{prof.name:8s} pressure weight published={stylus.pressure_weight(prof):.3f} "
          f"exact={stylus.pressure_weight(prof, 'exact'):.3f}")
