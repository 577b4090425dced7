"""Isoline intersection geometry: triangulation, uncertainty boxes, sensitivity.

Uncertainty follows the one-standard-deviation band convention: every isoline
is widened by ``+-c*sigma_s`` in force and the set of (position, force)
hypotheses inside all bands is summarised by its bounding box half-extents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage, optimize

from .errors import EmptyRegion, NoIntersection, UnboundedSolution
from .model import (AttenuationModel, ContactEvent, NoiseModel, TaxelLayout, forward_response,
                    is_active)

KINDS = ("between-pair", "outside-pair", "multi-taxel", "unbounded", "ambiguous")

ROOT_TOL = 1e-9
_N_SAMPLES = 4001


@dataclass
class UncertaintyEstimate:
    """Position/force estimate with its one-sigma box half-extents.

    For 2D layouts ``position`` is ``(x, y)`` and ``sigma_p`` is ``(sigma_px, sigma_py)``.
    """

    position: float | tuple[float, float]
    force: float
    sigma_p: float | tuple[float, float]
    sigma_f: float
    kind: str
    region_count: int = 1
    candidates: list[tuple[float, float]] = field(default_factory=list)

    @property
    def sigma_px(self) -> float:
        return self.sigma_p[0] if isinstance(self.sigma_p, tuple) else self.sigma_p

    @property
    def sigma_py(self) -> float:
        return self.sigma_p[1] if isinstance(self.sigma_p, tuple) else float("nan")

    @property
    def ambiguous(self) -> bool:
        return self.kind == "ambiguous" or self.region_count > 1


@dataclass
class SensitivityField:
    """Minimal localisable force ``F_S`` sampled on ``grid``."""

    grid: np.ndarray
    values: np.ndarray
    k_required: int


# -- root finding -----------------------------------------------------------------

def _bisect(func, a: np.ndarray, b: np.ndarray, tol: float = ROOT_TOL) -> np.ndarray:
    """Vectorised bisection; each ``[a_i, b_i]`` must bracket a sign change."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    fa = func(a)
    while np.any(np.abs(b - a) > tol):
        m = 0.5 * (a + b)
        fm = func(m)
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left, m, a)
        fa = np.where(left, fm, fa)
        b = np.where(left, b, m)
    return 0.5 * (a + b)


def _all_roots(func, lo: float, hi: float, extra: Sequence[float] = ()) -> np.ndarray:
    """All sign changes of ``func`` on ``[lo, hi]`` refined to ``ROOT_TOL``."""
    xs = np.union1d(np.linspace(lo, hi, _N_SAMPLES), [e for e in extra if lo <= e <= hi])
    ys = func(xs)
    exact = xs[ys == 0.0]
    s = np.sign(ys)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    roots = _bisect(func, xs[idx], xs[idx + 1]) if idx.size else np.zeros(0)
    return np.sort(np.concatenate([roots, exact]))


def _pair_gap(model: AttenuationModel, x1: float, x2: float, f1: float, f2: float):
    """``I1(p) - I2(p)`` for isolines with force offsets ``f1``, ``f2`` at distance 0."""
    lam, alpha = model.lam, model.alpha

    def gap(p):
        return (f1 + lam * np.abs(p - x1) ** alpha) - (f2 + lam * np.abs(p - x2) ** alpha)

    return gap


def _default_domain(x1: float, x2: float, pad_factor: float = 10.0) -> tuple[float, float]:
    span = abs(x2 - x1)
    return min(x1, x2) - pad_factor * span, max(x1, x2) + pad_factor * span


def _pair_roots(model, x1, x2, f1, f2, domain):
    gap = _pair_gap(model, x1, x2, f1, f2)
    return _all_roots(gap, domain[0], domain[1], extra=(x1, x2))


def intersect_tvis_1d(model: AttenuationModel, taxel_positions: Sequence[float],
                      readings: Sequence[float],
                      domain: tuple[float, float] | None = None) -> list[tuple[float, float]]:
    """All crossings of two taxels' isolines as ``(position, force)`` pairs.

    Raises:
        NoIntersection: the isolines never meet on ``domain``.
        UnboundedSolution: linear attenuation with ``|c*(S1-S2)| == lam*D``; the
            isolines coincide along the half-line outside the pair.
    """
    x1, x2 = (float(v) for v in taxel_positions)
    s1, s2 = (float(v) for v in readings)
    if x1 == x2:
        raise ValueError("taxel positions must differ")
    if min(s1, s2) < model.s_min:
        raise ValueError(f"readings must be >= s_min={model.s_min}")
    if model.alpha == 1.0:
        offset = abs(model.c * (s1 - s2))
        if abs(offset - model.lam * abs(x2 - x1)) <= 1e-12 * max(1.0, offset):
            raise UnboundedSolution("isolines coincide outside the taxel pair")
    domain = domain or _default_domain(x1, x2)
    roots = _pair_roots(model, x1, x2, model.c * s1, model.c * s2, domain)
    if roots.size == 0:
        raise NoIntersection(f"isolines of readings {s1}, {s2} do not meet on {domain}")
    forces = model.c * s1 + model.lam * np.abs(roots - x1) ** model.alpha
    return [(float(p), float(f)) for p, f in zip(roots, forces)]


def _pair_kind(p: float, x1: float, x2: float) -> str:
    return "between-pair" if min(x1, x2) < p < max(x1, x2) else "outside-pair"


def corner_uncertainty(model: AttenuationModel, taxel_positions: Sequence[float],
                       readings: Sequence[float], sigma_s: float,
                       near: float | None = None,
                       domain: tuple[float, float] | None = None) -> UncertaintyEstimate:
    """Bounding box of the four crossings of the noise-band edges of two isolines.

    ``near`` selects among multiple crossings (concave isolines); without it the
    estimate is flagged ``ambiguous`` and the between-pair crossing is used.
    """
    x1, x2 = (float(v) for v in taxel_positions)
    s1, s2 = (float(v) for v in readings)
    domain = domain or _default_domain(x1, x2)
    inf = float("inf")
    try:
        nominal = intersect_tvis_1d(model, (x1, x2), (s1, s2), domain)
    except UnboundedSolution:
        return UncertaintyEstimate(float("nan"), float("nan"), inf, inf, "unbounded", 1)

    if near is not None:
        p0, f0 = min(nominal, key=lambda pf: abs(pf[0] - near))
    else:
        between = [pf for pf in nominal if _pair_kind(pf[0], x1, x2) == "between-pair"]
        p0, f0 = between[0] if between else nominal[0]
    kind = _pair_kind(p0, x1, x2)
    if len(nominal) > 1 and near is None:
        kind = "ambiguous"

    band = model.c * sigma_s
    corners = []
    for a in (1.0, -1.0):
        for b in (1.0, -1.0):
            roots = _pair_roots(model, x1, x2, model.c * s1 + a * band, model.c * s2 + b * band,
                                domain)
            if roots.size == 0:
                return UncertaintyEstimate(p0, f0, inf, inf, "unbounded", len(nominal),
                                           candidates=nominal)
            p = roots[np.argmin(np.abs(roots - p0))]
            corners.append((p, model.c * s1 + a * band + model.lam * abs(p - x1) ** model.alpha))
    ps, fs = np.array(corners).T
    return UncertaintyEstimate(
        position=p0, force=f0,
        sigma_p=float(ps.max() - ps.min()) / 2, sigma_f=float(fs.max() - fs.min()) / 2,
        kind=kind, region_count=len(nominal), candidates=nominal,
    )


def approx_sigma_p(model: AttenuationModel, D: float, d: float, sigma_s: float) -> float:
    """Parallelogram approximation ``2*c*sigma_s / (m1 + m2)`` between two taxels.

    ``m1``, ``m2`` are the isoline slopes at distances ``d`` and ``D - d``.
    """
    if not 0 < d < D:
        raise ValueError(f"d must lie strictly inside (0, D={D}), got {d}")
    m1 = model.lam * model.alpha * d ** (model.alpha - 1)
    m2 = model.lam * model.alpha * (D - d) ** (model.alpha - 1)
    if m1 + m2 == 0:
        return float("inf")
    return 2 * model.c * sigma_s / (m1 + m2)


# -- feasible region --------------------------------------------------------------

def default_resolution(model: AttenuationModel, D: float, sigma_s: float) -> float:
    r = min(D / 200, sigma_s * model.c / (5 * model.lam * D))
    return float(np.clip(r, 1e-4, 0.1))


class _Bands:
    """Force intervals allowed by each active taxel's noise band at a point."""

    def __init__(self, model: AttenuationModel, layout: TaxelLayout, readings: np.ndarray,
                 sigma: float):
        self.model = model
        self.layout = layout
        self.readings = readings
        c = model.c
        self.upper0 = c * (readings + sigma)
        # a band reaching zero also admits sub-threshold (clamped) responses
        self.lower0 = np.where(readings - sigma > 0, c * (readings - sigma), -np.inf)

    def _shift(self, dist):
        return self.model.lam * dist ** self.model.alpha

    def interval(self, points, inflate: float = 0.0):
        dist = self.layout.distances(points)
        shift = self._shift(dist)
        lo = self.lower0 + shift
        hi = self.upper0 + shift
        if inflate > 0:
            a = self.model.alpha
            slack = self.model.lam * ((dist + inflate) ** a - np.maximum(dist - inflate, 0.0) ** a)
            lo = lo - slack
            hi = hi + slack
        lo = np.maximum(lo.max(axis=-1), 0.0)
        hi = hi.min(axis=-1)
        return lo, hi

    def gap(self, points):
        lo, hi = self.interval(points)
        return lo - hi


def feasible_region(model: AttenuationModel, noise: NoiseModel, layout: TaxelLayout,
                    readings, resolution: float | None = None,
                    domain=None, band: float = 1.0) -> UncertaintyEstimate:
    """Set of (position, force) hypotheses inside every active taxel's noise band.

    Only taxels with detectable readings constrain the region. For each sampled
    position the admissible forces form an exact interval, so the grid runs over
    position only; region edges are refined by bisection in 1D.

    Args:
        readings: one reading per taxel of ``layout``.
        resolution: grid step in mm (default resolves sigma_p with >= 5 cells).
        domain: ``(lo, hi)`` in 1D or ``((xlo, xhi), (ylo, yhi))`` in 2D; by default
            the layout extent padded by twice the nominal spacing (1D) or one
            spacing (2D). Regions touching the domain edge are reported unbounded.
        band: multiple of ``sigma_s`` defining the band half-width.

    Raises:
        EmptyRegion: no hypothesis is consistent with all active readings.
    """
    readings = np.asarray(readings, dtype=float)
    if readings.shape != (len(layout),):
        raise ValueError(f"expected {len(layout)} readings, got shape {readings.shape}")
    active = is_active(model, readings)
    if not active.any():
        raise ValueError("feasible_region needs at least one active reading")
    sigma = noise.sigma_s * band
    if sigma <= 0:
        raise ValueError("feasible_region needs a positive noise band")
    sub = TaxelLayout(layout.positions[active], layout.dimensionality)
    bands = _Bands(model, sub, readings[active], sigma)
    D = layout.nominal_spacing
    if resolution is None:
        resolution = default_resolution(model, D, sigma)
    n_active = int(active.sum())
    if layout.dimensionality == 1:
        return _region_1d(bands, D, resolution, domain, n_active)
    return _region_2d(bands, D, resolution, domain, n_active)


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive index ranges of consecutive True entries."""
    if not mask.any():
        return []
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


def _region_1d(bands: _Bands, D: float, res: float, domain, n_active: int) -> UncertaintyEstimate:
    lo_dom, hi_dom = domain if domain is not None else (
        bands.layout.positions.min() - 2 * D, bands.layout.positions.max() + 2 * D)
    coarse_n = int(min(max((hi_dom - lo_dom) / res, 2), 4000)) + 1
    xs = np.linspace(lo_dom, hi_dom, coarse_n)
    h = xs[1] - xs[0]
    lo, hi = bands.interval(xs, inflate=h)
    candidate = lo <= hi

    comps: list[tuple[float, float, bool, bool]] = []
    for a, b in _runs(candidate):
        seg_lo, seg_hi = max(xs[a] - h, lo_dom), min(xs[b] + h, hi_dom)
        n = int(np.ceil((seg_hi - seg_lo) / min(res, h))) + 1
        fx = np.linspace(seg_lo, seg_hi, max(n, 3))
        feas = bands.gap(fx) <= 0
        if not feas.any():
            # region thinner than the fine grid: look for an isolated feasible point
            opt = optimize.minimize_scalar(bands.gap, bounds=(seg_lo, seg_hi), method="bounded",
                                           options={"xatol": 1e-12})
            if opt.fun > 0:
                continue
            fx = np.array([opt.x])
            feas = np.array([True])
        for i, j in _runs(feas):
            left, right = fx[i], fx[j]
            touch_lo = i == 0 and fx[0] <= lo_dom
            touch_hi = j == len(fx) - 1 and fx[-1] >= hi_dom
            if i > 0:
                left = float(_bisect(bands.gap, np.array([fx[i]]), np.array([fx[i - 1]]))[0])
            if j < len(fx) - 1:
                right = float(_bisect(bands.gap, np.array([fx[j]]), np.array([fx[j + 1]]))[0])
            comps.append((left, right, touch_lo, touch_hi))

    if not comps:
        raise EmptyRegion("readings are inconsistent beyond the noise band")

    f_lo, f_hi = np.inf, -np.inf
    for left, right, _, _ in comps:
        pts = np.linspace(left, right, max(int((right - left) / res) + 2, 3))
        lo_v, hi_v = bands.interval(pts)
        k_hi, k_lo = int(np.argmax(hi_v)), int(np.argmin(lo_v))
        f_hi = max(f_hi, hi_v[k_hi], -_local_min(lambda p: -bands.interval(p)[1], pts, k_hi))
        f_lo = min(f_lo, lo_v[k_lo], _local_min(lambda p: bands.interval(p)[0], pts, k_lo))

    p_min = min(c[0] for c in comps)
    p_max = max(c[1] for c in comps)
    unbounded = any(c[2] or c[3] for c in comps)
    inf = float("inf")
    sigma_p = inf if unbounded else (p_max - p_min) / 2
    sigma_f = inf if unbounded else (f_hi - f_lo) / 2
    if len(comps) > 1:
        kind = "ambiguous"
    elif unbounded:
        kind = "unbounded"
    elif n_active >= 3:
        kind = "multi-taxel"
    else:
        xs_act = bands.layout.positions
        kind = _pair_kind((p_min + p_max) / 2, xs_act.min(), xs_act.max())
    centre = (p_min + p_max) / 2
    lo_c, hi_c = bands.interval(np.array([centre]))
    mids = np.array([(c[0] + c[1]) / 2 for c in comps])
    lo_m, hi_m = bands.interval(mids)
    candidates = [(float(m), float((a + b) / 2)) for m, a, b in zip(mids, lo_m, hi_m)]
    return UncertaintyEstimate(
        position=float(centre), force=float((lo_c[0] + hi_c[0]) / 2),
        sigma_p=float(sigma_p), sigma_f=float(sigma_f), kind=kind, region_count=len(comps),
        candidates=candidates,
    )


def _local_min(func, pts: np.ndarray, k: int) -> float:
    """Minimum of ``func`` between the neighbours of grid index ``k``."""
    a, b = pts[max(k - 1, 0)], pts[min(k + 1, len(pts) - 1)]
    if b <= a:
        return float(func(np.array([a]))[0])
    opt = optimize.minimize_scalar(lambda p: float(func(np.array([p]))[0]), bounds=(a, b),
                                   method="bounded", options={"xatol": 1e-12})
    return float(opt.fun)


def _region_2d(bands: _Bands, D: float, res: float, domain, n_active: int) -> UncertaintyEstimate:
    if domain is None:
        b = bands.layout.positions
        domain = ((b[:, 0].min() - D, b[:, 0].max() + D), (b[:, 1].min() - D, b[:, 1].max() + D))
    (x0, x1), (y0, y1) = domain
    nc = 241
    gx, gy = np.linspace(x0, x1, nc), np.linspace(y0, y1, nc)
    h = max(gx[1] - gx[0], gy[1] - gy[0])
    pts = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1)
    lo, hi = bands.interval(pts, inflate=h)
    cand = ndimage.binary_dilation(lo <= hi, iterations=1)
    if not cand.any():
        raise EmptyRegion("readings are inconsistent beyond the noise band")
    ii, jj = np.nonzero(cand)
    bx = (gx[ii.min()], gx[ii.max()])
    by = (gy[jj.min()], gy[jj.max()])

    max_cells = 700
    nx = int(np.clip(np.ceil((bx[1] - bx[0]) / res), 2, max_cells)) + 1
    ny = int(np.clip(np.ceil((by[1] - by[0]) / res), 2, max_cells)) + 1
    fx, fy = np.linspace(*bx, nx), np.linspace(*by, ny)
    fpts = np.stack(np.meshgrid(fx, fy, indexing="ij"), axis=-1)
    flo, fhi = bands.interval(fpts)
    feas = flo <= fhi
    if not feas.any():
        raise EmptyRegion("no feasible grid point; refine the resolution")
    labels, count = ndimage.label(feas, structure=np.ones((3, 3)))
    fi, fj = np.nonzero(feas)
    nodes = np.column_stack([fx[fi], fy[fj]])
    tol = 1e-9
    x_min, x_max = nodes[:, 0].min(), nodes[:, 0].max()
    y_min, y_max = nodes[:, 1].min(), nodes[:, 1].max()
    unb_x = x_min <= x0 + tol or x_max >= x1 - tol
    unb_y = y_min <= y0 + tol or y_max >= y1 - tol
    f_hi = float(fhi[feas].max())
    f_lo = float(flo[feas].min())
    if not unb_x:
        x_min = min(x_min, _extreme_2d(bands, nodes[np.argmin(nodes[:, 0])], np.array([1.0, 0, 0])))
        x_max = max(x_max, -_extreme_2d(bands, nodes[np.argmax(nodes[:, 0])], np.array([-1.0, 0, 0])))
    if not unb_y:
        y_min = min(y_min, _extreme_2d(bands, nodes[np.argmin(nodes[:, 1])], np.array([0, 1.0, 0])))
        y_max = max(y_max, -_extreme_2d(bands, nodes[np.argmax(nodes[:, 1])], np.array([0, -1.0, 0])))
    if not (unb_x or unb_y):
        k_hi, k_lo = np.argmax(fhi[feas]), np.argmin(flo[feas])
        f_hi = max(f_hi, -_extreme_2d(bands, nodes[k_hi], np.array([0, 0, -1.0]), f_hi))
        f_lo = min(f_lo, _extreme_2d(bands, nodes[k_lo], np.array([0, 0, 1.0]), f_lo))
    inf = float("inf")
    spx = inf if unb_x else (x_max - x_min) / 2
    spy = inf if unb_y else (y_max - y_min) / 2
    sigma_f = inf if (unb_x or unb_y) else (f_hi - f_lo) / 2
    if count > 1:
        kind = "ambiguous"
    elif unb_x or unb_y:
        kind = "unbounded"
    elif n_active >= 3:
        kind = "multi-taxel"
    else:
        kind = "between-pair"
    centre = ((x_min + x_max) / 2, (y_min + y_max) / 2)
    lo_c, hi_c = bands.interval(np.array(centre))
    return UncertaintyEstimate(
        position=(float(centre[0]), float(centre[1])), force=float((lo_c + hi_c) / 2),
        sigma_p=(float(spx), float(spy)), sigma_f=float(sigma_f), kind=kind,
        region_count=int(count),
    )


def _extreme_2d(bands: _Bands, start: np.ndarray, weights: np.ndarray,
                f_start: float | None = None) -> float:
    """Minimise ``weights . (x, y, F)`` over the feasible set from a feasible node.

    Falls back to the starting value when the optimiser does not return a
    feasible point.
    """
    if f_start is None:
        lo, hi = bands.interval(start)
        f_start = float((lo + hi) / 2)
    z0 = np.array([start[0], start[1], f_start])
    finite = np.isfinite(bands.lower0)

    def bounds_at(z):
        shift = bands._shift(bands.layout.distances(z[:2]))
        return bands.lower0[finite] + shift[finite], bands.upper0 + shift

    def cons(z):
        lo, hi = bounds_at(z)
        return np.concatenate([z[2] - lo, hi - z[2], [z[2]]])

    res = optimize.minimize(lambda z: float(weights @ z), z0, method="SLSQP",
                            constraints=[{"type": "ineq", "fun": cons}],
                            options={"ftol": 1e-14, "maxiter": 200})
    best = float(weights @ z0)
    if res.success and cons(res.x).min() >= -1e-10:
        best = min(best, float(res.fun))
    return best


# -- sensitivity ------------------------------------------------------------------

def default_grid(layout: TaxelLayout, n: int | None = None) -> np.ndarray:
    D = layout.nominal_spacing
    b = layout.bounds()
    if layout.dimensionality == 1:
        return np.linspace(b[0, 0] - D / 2, b[0, 1] + D / 2, n or 401)
    gx = np.linspace(b[0, 0] - D / 2, b[0, 1] + D / 2, n or 121)
    gy = np.linspace(b[1, 0] - D / 2, b[1, 1] + D / 2, n or 121)
    return np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)


def sensitivity_map(model: AttenuationModel, layout: TaxelLayout, k_required: int | None = None,
                    grid=None) -> SensitivityField:
    """Force needed at each grid point to activate ``k_required`` taxels.

    ``F_S(p)`` is the k-th smallest activation force ``c*s_min + lam*|p - x_i|**alpha``.
    """
    k = k_required or (2 if layout.dimensionality == 1 else 3)
    if not 1 <= k <= len(layout):
        raise ValueError(f"k_required={k} must lie in [1, {len(layout)}]")
    pts = default_grid(layout) if grid is None else np.asarray(grid, dtype=float)
    act = model.activation_force(layout.distances(pts))
    values = np.partition(act, k - 1, axis=-1)[..., k - 1]
    return SensitivityField(grid=pts, values=values, k_required=k)


def overlap_count(model: AttenuationModel, layout: TaxelLayout, contact: ContactEvent) -> int:
    """Number of taxels whose noiseless reading is detectable for ``contact``."""
    r = forward_response(model, contact.force, layout.distances(contact.position))
    return int(np.count_nonzero(is_active(model, r)))
