"""Algebraic blow-up criteria: parameter regions, kappa bounds, gamma windows.

Everything in this module is a closed-form function of the inputs
``(n, p, q, m, alpha, kappa)``.  Comparisons are performed exactly as the
inequalities are written (strict vs non-strict), with no tolerance fuzzing:
region boundaries are exact rational expressions of the inputs.

The first family (tags A*, B*, C*, D*, selected by the dimension n) feeds the
kappa rules I-IV and the gamma-window variants L4_1/L4_2.  The second family
(tags E1/F1/F2) is the initial-data construction route; its kappa bounds are
the I-IV rules evaluated at the derived exponent p0 = n(n-1)/((m-alpha)n+1).
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "RegionLabel",
    "GammaWindow",
    "classify_region",
    "kappa_thresholds",
    "kappa_threshold",
    "kappa_threshold_alpha1",
    "gamma_window",
    "theta_exponent",
    "classify_thm2",
    "kappa_threshold_thm2",
    "kappa_threshold_thm2_m1",
    "exponent_p0",
    "region_grid",
    "thm2_grid",
    "KAPPA_RULE_OF",
    "WINDOW_L41_TAGS",
]


def _pos(x: float) -> float:
    return x if x > 0.0 else 0.0


_COARSE_OF = {
    "A1": "A1", "A2": "A2", "A3_1": "A3", "A3_2": "A3", "A4": "A4",
    "B1_1": "B1", "B1_2": "B1", "B2": "B2", "B3": "B3",
    "C1_1": "C1", "C1_2": "C1", "C2": "C2",
    "C3_1": "C3", "C3_2": "C3", "C3_3": "C3",
    "D1": "D1", "D2_1": "D2", "D2_2": "D2",
}

# kappa rule per coarse region: I for A2; II for A1/B1/C1/D1; III for A3/B2/C2;
# IV for A4/B3/C3/D2.
KAPPA_RULE_OF = {
    "A1": "II", "A2": "I", "A3": "III", "A4": "IV",
    "B1": "II", "B2": "III", "B3": "IV",
    "C1": "II", "C2": "III", "C3": "IV",
    "D1": "II", "D2": "IV",
}

# Sub-cases routed to the first gamma-window variant; everything else uses the
# second.
WINDOW_L41_TAGS = frozenset(
    {"A4", "B1_2", "B3", "C1_2", "C3_1", "C3_2", "C3_3", "D1", "D2_1", "D2_2"}
)


@dataclass(frozen=True)
class RegionLabel:
    tag: str
    coarse: str


def _make_label(tag: str) -> RegionLabel:
    return RegionLabel(tag, _COARSE_OF[tag])


def _tags_n3(p: float, m: float, a: float) -> list[str]:
    out = []
    if 1 - 1 / p < a < 1 + 3 / (2 * p) and 0 < m < 1 / p:
        out.append("A1")
    if 1 + 3 / (2 * p) <= a < 1 + 2 / p and 0 < m < 2 / p and 2 * a - m > 2 + 2 / p:
        out.append("A2")
    if 1 - 1 / p < a < 1 + 2 / p and 1 / p <= m < 2 / p and 2 * a - m <= 2 + 2 / p:
        out.append("A3_1")
    if 1 - 1 / p < a < 1 and 2 / p <= m < 3 / p and m + a < 1 + 2 / p:
        out.append("A3_2")
    if (1 - 1 / p < a < 1 + 2 / p and 2 / p <= m < 1 + 1 / p
            and m + a >= 1 + 2 / p and m - a < 1 / p):
        out.append("A4")
    return out


def _tags_n4(p: float, m: float, a: float) -> list[str]:
    out = []
    if 1 - 2 / p < a < 1 and 0 < m < 2 / p:
        out.append("B1_1")
    if 1 <= a < 1 + 2 / p and 0 < m < 2 / p:
        out.append("B1_2")
    if 1 - 2 / p < a < 1 and 2 / p <= m < 4 / p and m + a < 1 + 2 / p:
        out.append("B2")
    if (1 - 2 / p < a < 1 + 2 / p and 2 / p <= m < 1 + 2 / p
            and m + a >= 1 + 2 / p and m - a < 2 / p):
        out.append("B3")
    return out


def _tags_n5(p: float, m: float, a: float) -> list[str]:
    out = []
    if 1 - 2 / p < a <= 1 - 1 / p and 0 < m < 3 / p:
        out.append("C1_1")
    if 1 - 1 / p < a < 1 + 2 / p and 0 < m < 1 + 1 / (2 * p) and 2 * m - a < 1 + 1 / p:
        out.append("C1_2")
    if 1 - 2 / p < a < 1 - 1 / p and 3 / p <= m < 4 / p and m + a < 1 + 2 / p:
        out.append("C2")
    if 1 - 2 / p < a <= 1 - 1 / p and 3 / p <= m < 1 and m + a >= 1 + 2 / p:
        out.append("C3_1")
    if 1 - 2 / p < a < 1 and 1 <= m < 1 + 1 / (2 * p) and 2 * m - a >= 1 + 1 / p:
        out.append("C3_2")
    if 1 - 2 / p < a < 1 + 2 / p and 1 + 1 / (2 * p) <= m < 1 + 3 / p and m - a < 3 / p:
        out.append("C3_3")
    return out


def _tags_n6(n: int, p: float, m: float, a: float) -> list[str]:
    out = []
    if (1 - 2 / p < a < 1 + 2 / p and 0 < m < 1 + (n - 4) / (2 * p)
            and 2 * m - a < 1 + (n - 4) / p):
        out.append("D1")
    if (1 - 2 / p < a < 1 + 2 / p and 1 + (n - 6) / (2 * p) <= m < 1 + (n - 4) / (2 * p)
            and 2 * m - a >= 1 + (n - 4) / p):
        out.append("D2_1")
    if (1 - 2 / p < a < 1 + 2 / p and 1 + (n - 4) / (2 * p) <= m < 1 + (n - 2) / p
            and m - a < (n - 2) / p):
        out.append("D2_2")
    return out


def _check_inputs(n: int, p: float, m: float, alpha: float) -> None:
    if int(n) != n or n < 3:
        raise ValueError(f"n must be an integer >= 3, got {n}")
    if p < n:
        raise ValueError(f"p must be >= n, got p={p}, n={n}")
    if m <= 0:
        raise ValueError(f"m must be > 0, got {m}")
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")


def classify_region(n: int, p: float, m: float, alpha: float) -> list[RegionLabel]:
    """Return every sub-case label whose full inequality list holds.

    The family is selected by the dimension (n=3 -> A, n=4 -> B, n=5 -> C,
    n>=6 -> D).  An empty list means no condition of the family holds.  Labels
    can overlap (A1 overlaps A3/A4 on sets of positive measure); all matches
    are returned.
    """
    _check_inputs(n, p, m, alpha)
    n = int(n)
    if n == 3:
        tags = _tags_n3(p, m, alpha)
    elif n == 4:
        tags = _tags_n4(p, m, alpha)
    elif n == 5:
        tags = _tags_n5(p, m, alpha)
    else:
        tags = _tags_n6(n, p, m, alpha)
    return [_make_label(t) for t in tags]


def _kappa_bound(rule: str, n: int, p: float, q: float, m: float, alpha: float) -> float:
    if rule == "I":
        return 1 + 3 / p + q / p - (alpha - 1)
    if rule == "II":
        return 1 + n / (2 * p) + q / p - _pos(1 - alpha) / 2
    if rule == "III":
        return 1 + (n - 1) / p + q / p - m / 2 - _pos(1 - alpha) / 2
    if rule == "IV":
        return 1 + (n - 2) / p + q / p - _pos(m - 1) - _pos(1 - alpha)
    raise ValueError(f"unknown kappa rule {rule!r}")


def kappa_thresholds(n: int, p: float, q: float, m: float, alpha: float) -> dict[str, float]:
    """Strict upper bound on kappa per matched label (empty dict: no region)."""
    if q < 0:
        raise ValueError(f"q must be >= 0, got {q}")
    labels = classify_region(n, p, m, alpha)
    return {
        lab.tag: _kappa_bound(KAPPA_RULE_OF[lab.coarse], n, p, q, m, alpha)
        for lab in labels
    }


def kappa_threshold(n: int, p: float, q: float, m: float, alpha: float) -> float | None:
    """Effective strict upper bound on kappa: the min over matched labels.

    Overlapping labels each impose their own rule, so kappa must stay below
    all of them.  Returns None when no region matches.
    """
    per_label = kappa_thresholds(n, p, q, m, alpha)
    if not per_label:
        return None
    return min(per_label.values())


def kappa_threshold_alpha1(n: int, p: float, q: float, m: float) -> float | None:
    """Closed form of the effective kappa bound at alpha = 1.

    Valid for m in (0, 1+(n-2)/p); two branches split at m = 2/p.  Used as a
    consistency oracle for :func:`kappa_threshold`.
    """
    if 2 / p <= m < 1 + (n - 2) / p:
        return 1 + q / p + min(n / (2 * p), (n - 2) / p - _pos(m - 1))
    if 0 < m < 2 / p:
        return 1 + q / p + min(n / (2 * p), (n - 1) / p - m / 2)
    return None


@dataclass(frozen=True)
class GammaWindow:
    """Open interval of admissible moment weights gamma (exclusive bounds)."""

    lower: float
    upper: float
    lemma: str  # "L4_1" or "L4_2"
    feasible: bool

    def contains(self, gamma: float) -> bool:
        return self.lower < gamma < self.upper

    def midpoint(self) -> float:
        if not self.feasible:
            raise ValueError("window is infeasible; no midpoint")
        return 0.5 * (self.lower + self.upper)


def window_lemma(labels: list[RegionLabel]) -> str:
    """Window variant for a set of matched labels (L4_1 takes precedence)."""
    if not labels:
        raise ValueError("no matched region label; gamma window undefined")
    if any(lab.tag in WINDOW_L41_TAGS for lab in labels):
        return "L4_1"
    return "L4_2"


def gamma_window(n: int, p: float, q: float, m: float, alpha: float,
                 kappa: float, lemma: str | None = None) -> GammaWindow:
    """Admissible gamma interval for the matched region and kappa.

    ``lower >= upper`` is reported as infeasible rather than raised: under the
    admissibility preconditions (region matched, kappa below its bound) the
    window is provably nonempty, so infeasibility flags a precondition
    violation upstream.
    """
    if lemma is None:
        lemma = window_lemma(classify_region(n, p, m, alpha))
    pn = p / n
    lo_common = (pn * _pos(1 - alpha),
                 pn * (2 * (kappa - 1) + _pos(1 - alpha)) - 2 * q / n)
    if lemma == "L4_1":
        lower = max(*lo_common, 1 - 2 / n - pn * _pos(m - 1))
        upper = min(1.0, 2 - 4 / n - pn * (2 * _pos(m - 1) + _pos(1 - alpha)))
    elif lemma == "L4_2":
        lower = max(*lo_common)
        upper = min(1.0, 2 - 2 / n - pn * m, 2 - 2 * pn * _pos(alpha - 1))
    else:
        raise ValueError(f"unknown window variant {lemma!r}")
    return GammaWindow(lower=lower, upper=upper, lemma=lemma, feasible=lower < upper)


def theta_exponent(n: int, p: float, q: float, m: float, alpha: float,
                   kappa: float, lemma: str) -> float:
    """Growth exponent theta of the comparison inequality's forcing term.

    theta is the largest of four exponents; it must lie strictly inside
    (0, 2 - (p/n)(1-alpha)_+), else the inputs are inconsistent with the
    admissibility preconditions and a ValueError is raised.
    """
    pn = p / n
    shared = (
        2 / n,
        2 - 4 / n + pn * (_pos(1 - alpha) + 2 * _pos(alpha - 1)),
        -2 * q / n + pn * (2 * (kappa - 1) + _pos(1 - alpha)),
    )
    if lemma == "L4_1":
        theta = max(4 / n + pn * (2 * _pos(m - 1) + _pos(1 - alpha)), *shared)
    elif lemma == "L4_2":
        theta = max(2 / n + pn * m, *shared)
    else:
        raise ValueError(f"unknown window variant {lemma!r}")
    hi = 2 - pn * _pos(1 - alpha)
    if not (0 < theta < hi):
        raise ValueError(
            f"theta={theta} outside (0, {hi}); inputs violate admissibility preconditions"
        )
    return theta


# -- second family: initial-data construction route --------------------------

def _thm2_lines(n: int, m: float) -> dict[str, float]:
    # Boundary lines of the E/F conditions as functions of m.
    lines = {
        "U": 2 * m / (n + 1) + (n * n - n + 2) / (n * (n + 1)),
        "B": -m / (n - 2) + (n * n - 2) / (n * (n - 2)),
    }
    if n >= 5:
        lines["L"] = -2 * m / (n - 3) + (n * n - n - 2) / (n * (n - 3))
        lines["X"] = -(n + 2) * m / (n - 4) + (2 * n * n - n - 4) / (n * (n - 4))
        lines["Y"] = (n + 2) * m / 3 - (n * n - 4) / (3 * n)
    return lines


def classify_thm2(n: int, m: float, alpha: float) -> str | None:
    """Label of the initial-data construction region: E1, F1, F2 or None.

    E1 is only defined for n in {3,4}; F1/F2 only for n >= 5.  F1 carries the
    steep-diffusion branches (kappa rule IV at p0), F2 the shallow branch
    (kappa rule II at p0); the split line is alpha = Y(m) with
    Y = (n+2)m/3 - (n^2-4)/(3n), and F1's second branch starts at
    alpha = X(m) with X = -(n+2)m/(n-4) + (2n^2-n-4)/(n(n-4)).
    """
    if int(n) != n or n < 3:
        raise ValueError(f"n must be an integer >= 3, got {n}")
    if m <= 0 or alpha <= 0:
        raise ValueError("m and alpha must be > 0")
    n = int(n)
    ln = _thm2_lines(n, m)
    if n in (3, 4):
        if m >= 1 and alpha < ln["U"] and alpha < ln["B"] and m - alpha < (n - 2) / n:
            return "E1"
        return None
    if not (m >= 1 and ln["L"] < alpha < ln["U"]):
        return None
    if alpha < ln["X"] and alpha <= ln["Y"]:
        return "F1"
    if ln["X"] <= alpha < ln["B"] and m - alpha < (n - 2) / n:
        return "F1"
    if ln["Y"] < alpha < ln["X"]:
        return "F2"
    return None


def exponent_p0(n: int, m: float, alpha: float, eps: float = 0.0) -> float:
    """Pointwise-decay exponent p0 + eps with p0 = n(n-1)/((m-alpha)n+1)."""
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    denom = (m - alpha) * n + 1
    if denom <= 0:
        raise ValueError(
            f"(m-alpha)*n+1 = {denom} <= 0: m-alpha must exceed -1/n"
        )
    return n * (n - 1) / denom + eps


def kappa_threshold_thm2(n: int, q: float, m: float, alpha: float) -> float | None:
    """Strict kappa bound of the initial-data construction route.

    E1 and F1 use 1 + (n-2)P/(n(n-1)) + qP/(n(n-1)) - (m-1) - (1-alpha)_+,
    F2 uses 1 + P/(2(n-1)) + qP/(n(n-1)) - (1-alpha)_+/2, with
    P = (m-alpha)n+1.  These are rules IV and II evaluated at p = p0.
    """
    if q < 0:
        raise ValueError(f"q must be >= 0, got {q}")
    label = classify_thm2(n, m, alpha)
    if label is None:
        return None
    P = (m - alpha) * n + 1
    qterm = q * P / (n * (n - 1))
    if label in ("E1", "F1"):
        return 1 + (n - 2) * P / (n * (n - 1)) + qterm - (m - 1) - _pos(1 - alpha)
    return 1 + P / (2 * (n - 1)) + qterm - _pos(1 - alpha) / 2


def kappa_threshold_thm2_m1(n: int, alpha: float) -> float | None:
    """Closed form of the thm2 kappa bound at m = 1, q = 0, alpha < 1.

    Consistency oracle: for n in {3,4} valid on 2/n < alpha < 1; for n = 5 the
    two branches split at alpha = 14/15; for n >= 6 valid on
    1 - 2/(n(n-3)) < alpha < 1.
    """
    if not alpha < 1:
        return None
    if n in (3, 4):
        if alpha > 2 / n:
            return 1 + ((n - 2) - (1 - alpha) * n) / (n * (n - 1))
        return None
    if n == 5:
        if 4 / 5 < alpha <= 14 / 15:
            return 1 + ((n - 2) - (1 - alpha) * n) / (n * (n - 1))
        if 14 / 15 < alpha:
            return 1 + (2 - alpha) / (2 * (n - 1))
        return None
    if alpha > 1 - 2 / (n * (n - 3)):
        return 1 + (2 - alpha) / (2 * (n - 1))
    return None


# -- parameter-plane grids ----------------------------------------------------

@dataclass(frozen=True)
class GridCell:
    m: float
    alpha: float
    label: str                 # "+"-joined tags, or "None"
    kappa_max: float | None
    gamma_lo: float | None
    gamma_hi: float | None
    p0: float | None = None


def _axis(lo: float, hi: float, res: int) -> list[float]:
    # Cell centers; the half-cell offset keeps the first sample strictly
    # positive when the range starts at 0.
    step = (hi - lo) / res
    return [lo + (j + 0.5) * step for j in range(res)]


def region_grid(n: int, p: float, m_range: tuple[float, float],
                alpha_range: tuple[float, float], resolution: int,
                q: float = 0.0) -> list[GridCell]:
    """Row-major grid of region labels and kappa bounds over (m, alpha).

    gamma_lo/gamma_hi are the window endpoints at kappa = 1 (the smallest
    admissible kappa).  Rows iterate m in the outer loop, alpha inner.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2 per axis")
    cells = []
    for m in _axis(*m_range, resolution):
        for a in _axis(*alpha_range, resolution):
            labels = classify_region(n, p, m, a)
            if not labels:
                cells.append(GridCell(m, a, "None", None, None, None))
                continue
            kap = kappa_threshold(n, p, q, m, a)
            win = gamma_window(n, p, q, m, a, kappa=1.0,
                               lemma=window_lemma(labels))
            cells.append(GridCell(m, a, "+".join(lab.tag for lab in labels),
                                  kap, win.lower, win.upper))
    return cells


def thm2_grid(n: int, m_range: tuple[float, float],
              alpha_range: tuple[float, float], resolution: int,
              q: float = 0.0) -> list[GridCell]:
    """Row-major grid of initial-data-construction labels over (m, alpha)."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2 per axis")
    cells = []
    for m in _axis(*m_range, resolution):
        for a in _axis(*alpha_range, resolution):
            label = classify_thm2(n, m, a)
            if label is None:
                cells.append(GridCell(m, a, "None", None, None, None, None))
                continue
            kap = kappa_threshold_thm2(n, q, m, a)
            cells.append(GridCell(m, a, label, kap, None, None,
                                  exponent_p0(n, m, a)))
    return cells
