"""Brute-force threshold enumeration, written without numpy.

Every distinct score splits the real line into intervals; one threshold per
interval (plus one below all scores) enumerates every operating point a
``score <= threshold`` rule can reach.
"""

from fractions import Fraction


def operating_points(genuine, impostor):
    """``[(threshold, far, frr)]`` by decreasing threshold, as Fractions."""
    distinct = sorted(set(genuine) | set(impostor), reverse=True)
    thresholds = [float("inf")] + distinct + [float("-inf")]
    out = []
    for t in thresholds:
        far = Fraction(sum(1 for s in impostor if s <= t), len(impostor))
        frr = Fraction(sum(1 for s in genuine if s > t), len(genuine))
        out.append((t, far, frr))
    return out


def min_dcf(genuine, impostor, c_fr=1, c_fa=1, p_true=0.5):
    """Minimum cost and the lowest threshold reaching it."""
    p_true = Fraction(p_true)
    best = None
    # ascending thresholds: the first minimizer met is the lowest
    for t, far, frr in reversed(operating_points(genuine, impostor)):
        cost = c_fr * frr * p_true + c_fa * far * (1 - p_true)
        if best is None or cost < best[0]:
            best = (cost, t)
    return best


def eer(genuine, impostor):
    """Exact FAR == FRR point if any, else the linear crossing, in Fractions."""
    pts = operating_points(genuine, impostor)
    for _, far, frr in pts:
        if far == frr:
            return far
    for (_, a1, b1), (_, a2, b2) in zip(pts, pts[1:]):
        if a1 > b1 and a2 < b2:
            t = (a1 - b1) / ((a1 - b1) - (a2 - b2))
            return a1 + t * (a2 - a1)
    raise AssertionError("curve never crosses the diagonal")


def min_max_rate(genuine, impostor):
    return min(max(far, frr) for _, far, frr in operating_points(genuine, impostor))
