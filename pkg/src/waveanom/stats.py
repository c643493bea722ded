"""One-way ANOVA, F p-values, the studentized range, and Tukey HSD.

The studentized range CDF is computed directly by nested quadrature --
an outer integral over the scaled chi density of the pooled standard
deviation and an inner normal-range integral -- and quantiles by bisection
on that CDF. Monte Carlo simulation is used as the independent oracle in
the test suite, never here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DataError, NumericalError
from .special import f_sf, norm_pdf, panel_nodes

__all__ = [
    "AnovaTable", "TukeyRow", "one_way_anova", "f_pvalue",
    "studentized_range_cdf", "studentized_range_quantile", "tukey_hsd",
    "render_anova_text", "render_anova_kv", "render_tukey_text", "render_tukey_kv",
]


@dataclass
class AnovaTable:
    ss_between: float
    ss_within: float
    df_between: int
    df_within: int
    ms_between: float
    ms_within: float
    f: float
    p: float


@dataclass
class TukeyRow:
    group1: str
    group2: str
    meandiff: float
    p_adj: float
    lower: float
    upper: float
    reject: bool


def one_way_anova(groups) -> AnovaTable:
    """Classical decomposition over a list of 1-D samples."""
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(arrays) < 2:
        raise DataError("ANOVA needs at least 2 groups")
    for i, a in enumerate(arrays):
        if a.size < 2:
            raise DataError(f"group {i} has fewer than 2 values")
    n_total = sum(a.size for a in arrays)
    grand = sum(a.sum() for a in arrays) / n_total
    ss_between = float(sum(a.size * (a.mean() - grand) ** 2 for a in arrays))
    ss_within = float(sum(((a - a.mean()) ** 2).sum() for a in arrays))
    df_between = len(arrays) - 1
    df_within = n_total - len(arrays)
    ms_between = ss_between / df_between
    ms_within = ss_within / df_within
    if ms_between == 0.0:
        f, p = 0.0, 1.0
    elif ms_within == 0.0:
        f, p = math.inf, 0.0
    else:
        f = ms_between / ms_within
        p = f_pvalue(f, df_between, df_within)
    return AnovaTable(ss_between, ss_within, df_between, df_within,
                      ms_between, ms_within, f, p)


def f_pvalue(f: float, df1: int, df2: int) -> float:
    """Upper tail of the F distribution via the regularized incomplete beta."""
    return f_sf(f, df1, df2)


# ---------------------------------------------------------------------------
# studentized range distribution

# Dense table of the standard normal CDF for the quadrature inner loop;
# linear interpolation on this grid is accurate to ~3e-10.
_PHI_STEP = 1e-4
_PHI_GRID = None
_PHI_TABLE = None


def _phi_interp(x: np.ndarray) -> np.ndarray:
    global _PHI_GRID, _PHI_TABLE
    if _PHI_GRID is None:
        _PHI_GRID = np.arange(-9.5, 9.5 + _PHI_STEP, _PHI_STEP)
        erfc = np.vectorize(math.erfc, otypes=[np.float64])
        _PHI_TABLE = 0.5 * erfc(-_PHI_GRID * math.sqrt(0.5))
    return np.interp(x, _PHI_GRID, _PHI_TABLE)


def _range_prob(w: np.ndarray, k: int, z_nodes, z_weights) -> np.ndarray:
    """P(range of k iid standard normals <= w), vectorized over w >= 0."""
    phi_z = _phi_interp(z_nodes)
    diff = phi_z[None, :] - _phi_interp(z_nodes[None, :] - w[:, None])
    np.clip(diff, 0.0, 1.0, out=diff)
    integrand = norm_pdf(z_nodes)[None, :] * diff ** (k - 1)
    return k * (integrand @ z_weights)


def _cdf_once(q: float, k: int, df: int, s_panels: int, z_panels: int, pts: int) -> float:
    s_hi = 1.0 + 12.0 / math.sqrt(2.0 * df)
    s_nodes, s_weights = panel_nodes(np.linspace(1e-12, s_hi, s_panels + 1), pts)
    z_nodes, z_weights = panel_nodes(np.linspace(-9.0, 9.0, z_panels + 1), pts)
    # density of chi_df / sqrt(df), in the log domain to keep large df finite
    log_dens = ((df / 2.0) * math.log(df) + (df - 1) * np.log(s_nodes)
                - df * s_nodes ** 2 / 2.0
                - math.lgamma(df / 2.0) - (df / 2.0 - 1.0) * math.log(2.0))
    dens = np.exp(log_dens)
    r = _range_prob(q * s_nodes, k, z_nodes, z_weights)
    return float(np.dot(dens * s_weights, r))


def studentized_range_cdf(q: float, k: int, df: int) -> float:
    """P(Q <= q) for the studentized range of k means with df error dof."""
    if k < 2 or df < 2:
        raise DataError(f"studentized range needs k >= 2 and df >= 2, got ({k}, {df})")
    if q <= 0:
        return 0.0
    estimate = _cdf_once(q, k, df, 16, 14, 16)
    for s_panels, z_panels, pts in ((24, 18, 20), (36, 26, 24)):
        refined = _cdf_once(q, k, df, s_panels, z_panels, pts)
        if abs(refined - estimate) < 5e-7:
            return min(max(refined, 0.0), 1.0)
        estimate = refined
    raise NumericalError(
        f"studentized range quadrature did not converge for q={q}, k={k}, df={df}")


def studentized_range_sf(q: float, k: int, df: int) -> float:
    return 1.0 - studentized_range_cdf(q, k, df)


@lru_cache(maxsize=256)
def studentized_range_quantile(alpha: float, k: int, df: int) -> float:
    """The 1-alpha quantile, by bisection on the quadrature CDF."""
    if not 0.0 < alpha < 1.0:
        raise DataError(f"alpha must be in (0, 1), got {alpha}")
    target = 1.0 - alpha
    lo, hi = 0.0, 2.0
    for _ in range(64):
        if studentized_range_cdf(hi, k, df) >= target:
            break
        lo, hi = hi, hi * 2.0
    else:
        raise NumericalError(f"failed to bracket the range quantile for k={k}, df={df}")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if studentized_range_cdf(mid, k, df) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-9 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Tukey HSD


def tukey_hsd(groups: dict, alpha: float = 0.05) -> list[TukeyRow]:
    """All-pairs mean comparison with family-wise error control.

    `groups` maps group name -> 1-D sample. Unequal sizes use the
    Tukey-Kramer standard error. Row orientation is name-sorted:
    meandiff = mean(group2) - mean(group1).
    """
    if len(groups) < 2:
        raise DataError("Tukey HSD needs at least 2 groups")
    names = sorted(groups)
    arrays = {n: np.asarray(groups[n], dtype=np.float64) for n in names}
    table = one_way_anova([arrays[n] for n in names])
    if table.ms_within <= 0.0:
        raise DataError("zero pooled within-group variance")
    k, df = len(names), table.df_within
    q_crit = studentized_range_quantile(alpha, k, df)
    rows = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = arrays[names[i]], arrays[names[j]]
            meandiff = float(b.mean() - a.mean())
            se = math.sqrt(table.ms_within / 2.0 * (1.0 / a.size + 1.0 / b.size))
            stat = abs(meandiff) / se
            p_adj = min(max(studentized_range_sf(stat, k, df), 0.0), 1.0)
            half = q_crit * se
            rows.append(TukeyRow(
                group1=names[i], group2=names[j], meandiff=meandiff,
                p_adj=p_adj, lower=meandiff - half, upper=meandiff + half,
                reject=bool(p_adj < alpha),
            ))
    return rows


# ---------------------------------------------------------------------------
# rendering


def _sig6(x) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "NaN"
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return format(x, ".6g")


def render_anova_text(table: AnovaTable) -> str:
    header = ["Source of Variation", "Sums of Squares (SS)", "Degrees Freedom (df)",
              "Means Squares (MS)", "F", "PR(>F)"]
    rows = [
        ["Between networks", _sig6(table.ss_between), str(table.df_between),
         _sig6(table.ms_between), _sig6(table.f), _sig6(table.p)],
        ["Error (or Residual)", _sig6(table.ss_within), str(table.df_within),
         _sig6(table.ms_within), "NaN", "NaN"],
    ]
    return _align([header] + rows)


def render_anova_kv(table: AnovaTable) -> str:
    items = [
        ("anova.ss_between", table.ss_between), ("anova.ss_within", table.ss_within),
        ("anova.df_between", table.df_between), ("anova.df_within", table.df_within),
        ("anova.ms_between", table.ms_between), ("anova.ms_within", table.ms_within),
        ("anova.f", table.f), ("anova.p", table.p),
    ]
    return "\n".join(f"{k} = {v!r}" for k, v in items) + "\n"


def render_tukey_text(rows: list[TukeyRow]) -> str:
    header = ["Group pair 1", "Group pair2", "Meandiff", "P-adj", "Lower", "Upper", "Reject"]
    body = [[r.group1, r.group2, _sig6(r.meandiff), _sig6(r.p_adj),
             _sig6(r.lower), _sig6(r.upper), str(r.reject)] for r in rows]
    return _align([header] + body)


def render_tukey_kv(rows: list[TukeyRow]) -> str:
    lines = []
    for r in rows:
        key = f"tukey.{r.group1}.vs.{r.group2}"
        lines.append(f"{key}.meandiff = {r.meandiff!r}")
        lines.append(f"{key}.p_adj = {r.p_adj!r}")
        lines.append(f"{key}.lower = {r.lower!r}")
        lines.append(f"{key}.upper = {r.upper!r}")
        lines.append(f"{key}.reject = {r.reject}")
    return "\n".join(lines) + "\n"


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    out = []
    for r in rows:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(out) + "\n"
