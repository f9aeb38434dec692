"""Signature containers, the text file format, and a synthetic database.

Each sample carries five channels recorded by the tablet at 100 Hz::

    x         [0, 12700]  tablet units (0.01 mm)
    y         [0, 9700]
    p         [0, 1024]   pressure level
    azimuth   [0, 3600]   0.1 degree units
    altitude  [300, 900]  0.1 degree units
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.interpolate import PchipInterpolator

CHANNELS = ("x", "y", "p", "azimuth", "altitude")
CHANNEL_RANGES = {
    "x": (0.0, 12700.0),
    "y": (0.0, 9700.0),
    "p": (0.0, 1024.0),
    "azimuth": (0.0, 3600.0),
    "altitude": (300.0, 900.0),
}
PRESSURE = CHANNELS.index("p")
RATE_HZ = 100
KINDS = ("genuine", "skilled_forgery")
_FILE_KINDS = {"genuine": "genuine", "forgery": "skilled_forgery"}

_LO = np.array([CHANNEL_RANGES[c][0] for c in CHANNELS])
_HI = np.array([CHANNEL_RANGES[c][1] for c in CHANNELS])


class SignatureFormatError(ValueError):
    pass


class PenSample(NamedTuple):
    t: float
    x: float
    y: float
    p: float
    azimuth: float
    altitude: float


def validate_ranges(features: np.ndarray, row_offset: int = 0) -> None:
    """Raise if any channel value leaves its declared range."""
    bad = (features < _LO) | (features > _HI)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        lo, hi = CHANNEL_RANGES[CHANNELS[j]]
        raise SignatureFormatError(
            f"line {i + row_offset}: channel {CHANNELS[j]} value {features[i, j]:g} outside [{lo:g}, {hi:g}]"
        )


@dataclass(frozen=True, eq=False)
class Signature:
    """A pen trajectory: ``t`` holds sample indices, ``features`` is (n, 5)."""

    user_id: str
    session_id: str
    t: np.ndarray
    features: np.ndarray
    kind: str = "genuine"
    rate_hz: int = RATE_HZ
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        feats = np.asarray(self.features, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise SignatureFormatError("no samples")
        if feats.shape != (t.size, len(CHANNELS)):
            raise SignatureFormatError(f"features must have shape ({t.size}, 5), got {feats.shape}")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise SignatureFormatError("timestamps must be strictly increasing")
        if self.kind not in KINDS:
            raise SignatureFormatError(f"unknown signature kind {self.kind!r}")
        if self.validate:
            validate_ranges(feats)
        t.flags.writeable = False
        feats.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "features", feats)

    def __len__(self) -> int:
        return self.t.size

    def __iter__(self):
        for ti, row in zip(self.t, self.features):
            yield PenSample(float(ti), *map(float, row))

    @property
    def pressure(self) -> np.ndarray:
        return self.features[:, PRESSURE]

    def with_pressure(self, pressure: np.ndarray, validate: bool = True) -> "Signature":
        feats = self.features.copy()
        feats[:, PRESSURE] = pressure
        return Signature(self.user_id, self.session_id, self.t, feats, self.kind, self.rate_hz, validate)

    def same_as(self, other: "Signature") -> bool:
        return (
            self.user_id == other.user_id
            and self.session_id == other.session_id
            and self.kind == other.kind
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.features, other.features)
        )


def _parse_header(line: str) -> dict[str, str]:
    parts = line.split()
    if len(parts) < 2 or parts[0] != "#SIG" or parts[1] != "v1":
        raise SignatureFormatError(f"line 1: expected '#SIG v1 ...' header, got {line!r}")
    fields = {}
    for item in parts[2:]:
        key, sep, value = item.partition("=")
        if not sep:
            raise SignatureFormatError(f"line 1: malformed header field {item!r}")
        fields[key] = value
    for key in ("user", "session", "kind", "rate"):
        if key not in fields:
            raise SignatureFormatError(f"line 1: header is missing {key}=")
    if fields["kind"] not in _FILE_KINDS:
        raise SignatureFormatError(f"line 1: kind must be genuine or forgery, got {fields['kind']!r}")
    if fields["rate"] != str(RATE_HZ):
        raise SignatureFormatError(f"line 1: only rate={RATE_HZ} is supported, got {fields['rate']}")
    return fields


def parse_signature(text: str) -> Signature:
    """Parse the ``#SIG v1`` text format.

    Raises:
      SignatureFormatError: with a 1-based line number for malformed rows or
        channel values outside their range.
    """
    lines = text.split("\n")
    if not lines or not lines[0].strip():
        raise SignatureFormatError("line 1: missing header")
    header = _parse_header(lines[0].strip())
    rows = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise SignatureFormatError(f"line {lineno}: expected 6 fields, got {len(parts)}")
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise SignatureFormatError(f"line {lineno}: non-numeric field in {line!r}") from None
    if not rows:
        raise SignatureFormatError("no samples")
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        raise SignatureFormatError("non-finite sample value")
    validate_ranges(data[:, 1:], row_offset=2)
    return Signature(
        user_id=header["user"],
        session_id=header["session"],
        t=data[:, 0],
        features=data[:, 1:],
        kind=_FILE_KINDS[header["kind"]],
    )


def _fmt(v: float) -> str:
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def write_signature(sig: Signature) -> str:
    """Serialize to the ``#SIG v1`` format, rounding pressure to integer levels."""
    kind = "forgery" if sig.kind == "skilled_forgery" else "genuine"
    out = [f"#SIG v1 user={sig.user_id} session={sig.session_id} kind={kind} rate={sig.rate_hz}"]
    pressure = np.floor(sig.pressure + 0.5)
    for ti, row, p in zip(sig.t, sig.features, pressure):
        vals = [ti, row[0], row[1], p, row[3], row[4]]
        out.append(" ".join(_fmt(v) for v in vals))
    return "\n".join(out) + "\n"


def read_signature_file(path) -> Signature:
    return parse_signature(Path(path).read_text(encoding="utf-8"))


def write_signature_file(path, sig: Signature) -> None:
    Path(path).write_text(write_signature(sig), encoding="utf-8", newline="\n")


def section_bounds(n: int, s: int) -> list[tuple[int, int]]:
    """Half-open index ranges ``[floor((k-1)n/s), floor(kn/s))`` for k = 1..s."""
    if s < 1:
        raise ValueError(f"section count must be >= 1, got {s}")
    if n < s:
        raise ValueError(f"cannot split {n} samples into {s} sections")
    return [((k - 1) * n // s, k * n // s) for k in range(1, s + 1)]


def split_sections(sig: Signature | np.ndarray, s: int) -> list[np.ndarray]:
    """Split a signature's feature rows into ``s`` contiguous sections."""
    feats = sig.features if isinstance(sig, Signature) else np.asarray(sig)
    return [feats[a:b] for a, b in section_bounds(len(feats), s)]


@dataclass(frozen=True)
class SyntheticConfig:
    """Settings for :func:`synth_database`.

    ``intra_user_jitter`` is the per-variant noise as a fraction of each
    channel's range; zero reproduces every variant exactly.
    """

    n_users: int = 50
    n_train: int = 5
    n_test: int = 5
    n_samples_mean: int = 300
    seed: int = 7
    intra_user_jitter: float = 0.03

    def __post_init__(self):
        if self.n_users < 2:
            raise ValueError("n_users must be >= 2")
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("n_train and n_test must be >= 1")
        if self.n_samples_mean < 16:
            raise ValueError("n_samples_mean must be >= 16")
        if self.intra_user_jitter < 0:
            raise ValueError("intra_user_jitter must be >= 0")


@dataclass(frozen=True)
class _UserTemplate:
    # control curves sampled on a normalized time axis [0, 1]
    knots: np.ndarray
    values: np.ndarray  # (n_knots, 5)
    length: int


# x/y: the writing box of a typical signature, centered on the tablet
_BOX_CENTER = np.array([6350.0, 4850.0])
_BOX_HALF = np.array([2600.0, 900.0])
_RANGE = _HI - _LO


def _user_template(rng: np.random.Generator, n_mean: int) -> _UserTemplate:
    n_knots = int(rng.integers(8, 17))
    knots = np.linspace(0.0, 1.0, n_knots)
    vals = np.empty((n_knots, 5))
    # position: a random walk inside the writing box
    steps = rng.normal(0.0, 0.45, size=(n_knots, 2)) * _BOX_HALF
    walk = np.cumsum(steps, axis=0)
    walk -= walk.mean(axis=0)
    vals[:, :2] = _BOX_CENTER + np.clip(walk, -_BOX_HALF, _BOX_HALF)
    # pressure: user level times a slowly varying profile, 0 at both ends
    level = rng.uniform(200.0, 650.0)
    profile = np.clip(1.0 + np.cumsum(rng.normal(0.0, 0.12, n_knots)), 0.55, 1.25)
    vals[:, 2] = np.clip(level * profile, 0.0, 1000.0)
    vals[0, 2] = vals[-1, 2] = 0.0
    # pen orientation drifts slowly around a user-specific grip
    vals[:, 3] = rng.uniform(500.0, 2500.0) + np.cumsum(rng.normal(0.0, 40.0, n_knots))
    vals[:, 4] = rng.uniform(450.0, 750.0) + np.cumsum(rng.normal(0.0, 8.0, n_knots))
    vals = np.clip(vals, _LO, _HI)
    length = int(max(16, round(n_mean * rng.uniform(0.75, 1.25))))
    return _UserTemplate(knots, vals, length)


def _render(tpl: _UserTemplate, rng: np.random.Generator, jitter: float) -> np.ndarray:
    n = tpl.length
    u = np.linspace(0.0, 1.0, n)
    if jitter > 0:
        n = max(16, int(round(tpl.length * (1.0 + rng.normal(0.0, jitter)))))
        u = np.linspace(0.0, 1.0, n)
        # monotone time warp fixing both ends
        bump = rng.normal(0.0, jitter) * np.sin(np.pi * u)
        u = np.clip(u + bump, 0.0, 1.0)
        u = np.maximum.accumulate(u)
    curve = PchipInterpolator(tpl.knots, tpl.values, axis=0)(u)
    if jitter > 0:
        # smooth offset: a few low-frequency components per channel
        k = np.arange(1, 4)[:, None]
        basis = np.sin(np.pi * k * u[None, :])  # (3, n)
        coef = rng.normal(0.0, jitter / np.sqrt(3.0), size=(3, 5)) * _RANGE
        curve = curve + basis.T @ coef
        curve += rng.normal(0.0, 0.1 * jitter, size=curve.shape) * _RANGE
        # keep the pen down/up envelope shape of the template
        env = np.sin(np.pi * u) ** 0.25
        curve[:, 2] *= env
    curve = np.clip(curve, _LO, _HI)
    curve[[0, -1], 2] = 0.0  # pen-down and pen-up samples
    return curve


def _separated(vals: np.ndarray, others: list[np.ndarray], min_dist: float) -> bool:
    """Control-point check: mean per-knot distance to every earlier user."""
    grid = np.linspace(0.0, 1.0, 32)
    mine = np.column_stack([np.interp(grid, np.linspace(0, 1, len(vals)), vals[:, j]) for j in range(5)])
    for other in others:
        d = np.sqrt(np.mean(np.sum(((mine - other) / _RANGE) ** 2, axis=1)))
        if d < min_dist:
            return False
    return True


def synth_database(cfg: SyntheticConfig) -> dict[str, tuple[list[Signature], list[Signature]]]:
    """Seeded multi-user database in ink raw pressure space.

    Returns:
      ``{user_id: (train, test)}``; user ids are ``u000``, ``u001``, ...
    """
    db: dict[str, tuple[list[Signature], list[Signature]]] = {}
    accepted: list[np.ndarray] = []
    min_dist = 6.0 * cfg.intra_user_jitter
    width = max(3, int(math.log10(cfg.n_users)) + 1)
    for idx in range(cfg.n_users):
        uid = f"u{idx:0{width}d}"
        rng = np.random.default_rng([cfg.seed, idx])
        for _ in range(100):
            tpl = _user_template(rng, cfg.n_samples_mean)
            grid = np.linspace(0.0, 1.0, 32)
            resampled = PchipInterpolator(tpl.knots, tpl.values, axis=0)(grid)
            if _separated(tpl.values, accepted, min_dist):
                break
        accepted.append(resampled)
        sigs = []
        for j in range(cfg.n_train + cfg.n_test):
            feats = _render(tpl, rng, cfg.intra_user_jitter)
            session = f"{'train' if j < cfg.n_train else 'test'}{j + 1:02d}"
            sigs.append(Signature(uid, session, np.arange(len(feats), dtype=float), feats))
        db[uid] = (sigs[: cfg.n_train], sigs[cfg.n_train :])
    return db


def save_database(db, root, forgeries=None) -> None:
    """Write ``root/<user>/{train,test,forgery}/NN.sig``."""
    root = Path(root)
    for uid, (train, test) in db.items():
        groups = {"train": train, "test": test}
        if forgeries and uid in forgeries:
            groups["forgery"] = forgeries[uid]
        for name, sigs in groups.items():
            folder = root / uid / name
            folder.mkdir(parents=True, exist_ok=True)
            for k, sig in enumerate(sigs, 1):
                write_signature_file(folder / f"{k:02d}.sig", sig)


def load_database(root):
    """Inverse of :func:`save_database`.

    Returns:
      ``(db, forgeries)`` where ``forgeries`` maps user id to its labeled
      skilled forgeries (empty when no ``forgery`` folders exist).
    """
    root = Path(root)
    db, forgeries = {}, {}
    for user_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        groups = {}
        for name in ("train", "test", "forgery"):
            folder = user_dir / name
            groups[name] = [read_signature_file(f) for f in sorted(folder.glob("*.sig"))] if folder.is_dir() else []
        if not groups["train"] or not groups["test"]:
            raise SignatureFormatError(f"{user_dir}: needs train/ and test/ signatures")
        db[user_dir.name] = (groups["train"], groups["test"])
        if groups["forgery"]:
            forgeries[user_dir.name] = groups["forgery"]
    if not db:
        raise SignatureFormatError(f"{root}: no user folders")
    return db, forgeries
