"""Identification and verification metrics.

Scores are dissimilarities, so a trial is accepted when its score is at or
below the decision threshold.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .dataio import Signature
from .vq import MultiSectionModel, score, score_matrix

PROBIT_CLIP = 1e-6


@dataclass(frozen=True)
class CostParams:
    c_fr: float = 1.0
    c_fa: float = 1.0
    p_true: float = 0.5

    def __post_init__(self):
        if not (self.c_fr > 0 and self.c_fa > 0):
            raise ValueError("costs must be positive")
        if not 0 < self.p_true < 1:
            raise ValueError("p_true must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class ScoreSet:
    genuine: np.ndarray
    impostor: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "genuine", np.asarray(self.genuine, dtype=float).ravel())
        object.__setattr__(self, "impostor", np.asarray(self.impostor, dtype=float).ravel())


@dataclass(frozen=True, eq=False)
class DetCurve:
    """Operating points ordered by decreasing threshold.

    Along the arrays FAR is non-increasing and FRR non-decreasing. The first
    threshold is ``+inf`` (accept all) and the last ``-inf`` (reject all).
    """

    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray

    def __len__(self) -> int:
        return len(self.thresholds)

    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.far.tolist(), self.frr.tolist()))


def identify(models: Sequence[MultiSectionModel], sig: Signature) -> str:
    """User id of the closest model; exact ties go to the lowest user id."""
    if not models:
        raise ValueError("need at least one model")
    scored = [(score(m, sig), m.user_id) for m in models]
    return min(scored)[1]


def _argmin_by_id(scores: np.ndarray, user_ids: Sequence[str]) -> np.ndarray:
    """Row-wise argmin with ties resolved to the lexicographically lowest id."""
    order = np.argsort(np.asarray(user_ids), kind="stable")
    return order[np.argmin(scores[:, order], axis=1)]


def identification_rate(models: Sequence[MultiSectionModel], test_set) -> float:
    """Fraction of ``(true_user, signature)`` trials identified correctly."""
    test_set = list(test_set)
    if not test_set:
        raise ValueError("empty test set")
    ids = [m.user_id for m in models]
    S = score_matrix(models, [sig for _, sig in test_set])
    best = _argmin_by_id(S, ids)
    hits = sum(ids[b] == truth for b, (truth, _) in zip(best, test_set))
    return hits / len(test_set)


def far_frr_sweep(scores: ScoreSet) -> DetCurve:
    g, imp = scores.genuine, scores.impostor
    if g.size == 0 or imp.size == 0:
        raise ValueError("genuine and impostor score lists must be non-empty")
    distinct = np.unique(np.concatenate([g, imp]))[::-1]
    thresholds = np.concatenate([[np.inf], distinct, [-np.inf]])
    g_sorted, i_sorted = np.sort(g), np.sort(imp)
    accepted_imp = np.searchsorted(i_sorted, thresholds, side="right")
    accepted_gen = np.searchsorted(g_sorted, thresholds, side="right")
    far = accepted_imp / imp.size
    frr = (g.size - accepted_gen) / g.size
    return DetCurve(thresholds, far, frr)


def dcf(p_fr, p_fa, cp: CostParams = CostParams()):
    """Detection cost ``C_FR*P_FR*P_true + C_FA*P_FA*(1 - P_true)``."""
    return cp.c_fr * p_fr * cp.p_true + cp.c_fa * p_fa * (1.0 - cp.p_true)


def min_dcf(curve: DetCurve, cp: CostParams = CostParams()) -> tuple[float, float]:
    """Minimum cost over the curve and its threshold (lowest on ties)."""
    if len(curve) == 0:
        raise ValueError("empty curve")
    costs = dcf(curve.frr, curve.far, cp)
    # rational rates that tie exactly can differ by an ulp in floating point
    best = np.flatnonzero(np.isclose(costs, costs.min(), rtol=1e-12, atol=1e-15))
    # thresholds decrease along the curve: the last minimizer is the lowest
    i = int(best[-1])
    return float(costs[i]), float(curve.thresholds[i])


def eer(curve: DetCurve) -> float:
    """Rate where the DET polyline crosses FAR = FRR.

    An operating point with FAR == FRR is returned as is; otherwise the value
    is interpolated linearly between the two bracketing points.
    """
    if len(curve) == 0:
        raise ValueError("empty curve")
    diff = curve.far - curve.frr
    exact = np.flatnonzero(diff == 0)
    if exact.size:
        return float(curve.far[exact[0]])
    # diff starts at +1 (accept all) and ends at -1 (reject all)
    i = int(np.flatnonzero(diff < 0)[0]) - 1
    return _cross(curve.far[i], curve.frr[i], curve.far[i + 1], curve.frr[i + 1])


def _cross(a1: float, b1: float, a2: float, b2: float) -> float:
    # a step in one coordinate crosses the diagonal at the other one
    if a1 == a2:
        return float(a1)
    if b1 == b2:
        return float(b1)
    d1, d2 = a1 - b1, a2 - b2
    t = d1 / (d1 - d2)
    return float(a1 + t * (a2 - a1))


def det_points(curve: DetCurve) -> np.ndarray:
    """``(probit(FAR), probit(FRR))`` rows with rates clipped away from 0 and 1."""
    far = np.clip(curve.far, PROBIT_CLIP, 1 - PROBIT_CLIP)
    frr = np.clip(curve.frr, PROBIT_CLIP, 1 - PROBIT_CLIP)
    return np.column_stack([ndtri(far), ndtri(frr)])


def det_csv(curve: DetCurve) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["threshold", "far", "frr", "probit_far", "probit_frr"])
    for (t, fa, fr), (pfa, pfr) in zip(curve.points(), det_points(curve)):
        writer.writerow([repr(t), repr(fa), repr(fr), f"{pfa:.6f}", f"{pfr:.6f}"])
    return buf.getvalue()


def write_det_svg(path, curves: dict, cp: CostParams = CostParams(), title: str = "DET") -> None:
    """Probit-axis DET plot with the EER diagonal and min-DCF circles.

    Args:
      curves: label -> DetCurve.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ticks = np.array([0.001, 0.01, 0.05, 0.2, 0.5, 0.8, 0.95])
    with plt.rc_context({"svg.hashsalt": "det", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 5))
        lim = ndtri(np.array([5e-4, 0.99]))
        ax.plot(lim, lim, color="0.6", lw=0.8, ls="--", label="EER line")
        for label, curve in curves.items():
            pts = det_points(curve)
            line, = ax.plot(pts[:, 0], pts[:, 1], lw=1.2, label=label)
            value, thr = min_dcf(curve, cp)
            i = int(np.flatnonzero(curve.thresholds == thr)[0])
            ax.plot(pts[i, 0], pts[i, 1], "o", mfc="none", color=line.get_color())
        ax.set_xticks(ndtri(ticks), [f"{100 * t:g}" for t in ticks])
        ax.set_yticks(ndtri(ticks), [f"{100 * t:g}" for t in ticks])
        ax.set_xlim(*lim)
        ax.set_ylim(*lim)
        ax.set_xlabel("False Acceptance Rate (%)")
        ax.set_ylabel("False Rejection Rate (%)")
        ax.set_title(title)
        ax.grid(True, lw=0.3)
        ax.legend(fontsize=7, loc="upper right")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def read_scores_csv(text: str) -> ScoreSet:
    """Read ``label,score`` rows; labels are ``genuine`` or ``impostor``."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["label", "score"]:
        raise ValueError("line 1: expected header 'label,score'")
    gen, imp = [], []
    for row in reader:
        if not row:
            continue
        if len(row) != 2 or row[0] not in ("genuine", "impostor"):
            raise ValueError(f"line {reader.line_num}: expected 'genuine|impostor,<score>'")
        try:
            (gen if row[0] == "genuine" else imp).append(float(row[1]))
        except ValueError:
            raise ValueError(f"line {reader.line_num}: bad score {row[1]!r}") from None
    return ScoreSet(gen, imp)
