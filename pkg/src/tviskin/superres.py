"""Super-resolution factors and two-contact discriminability.

The super-resolution factor counts distinguishable (virtual) locations per real
taxel. Four closed forms are provided: the pairwise definition from a position
error, the analytic worst-case value for a taxel pair, the variant that adds a
reference-force noise term, and the area form for planar layouts.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import ComplexityLimit, InfiniteOmega
from .geometry import _all_roots, _default_domain, _pair_gap
from .model import (AttenuationModel, ContactEvent, TaxelLayout, forward_response, is_active,
                    mean_readings)

METHODS = ("pairwise", "analytic", "dual-noise", "area-2d", "empirical-ml")

MATCH_TOL = 0.05  # mm; a candidate this close to a true contact is not spurious
DEFAULT_THRESHOLDS = np.round(np.arange(1, 76) * 0.02, 10)  # 0.02 .. 1.5 N


@dataclass(frozen=True)
class OmegaReport:
    """A super-resolution factor with how it was obtained.

    ``infinite`` marks a zero position error; ``omega`` then holds the cap used.
    """

    omega: float
    method: str
    force_range: tuple[float, float] | None = None
    per_force_curve: list[tuple[float, float]] = field(default_factory=list)
    infinite: bool = False
    notes: tuple[str, ...] = ()
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not self.omega > 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "omega": self.omega, "method": self.method,
            "force_range": list(self.force_range) if self.force_range else None,
            "per_force_curve": [list(p) for p in self.per_force_curve],
            "infinite": self.infinite, "notes": list(self.notes), **self.extra,
        }


@dataclass(frozen=True)
class DiscriminabilityVerdict:
    """Rule verdict for two simultaneous contacts, with the oracle kept alongside.

    ``discriminable`` is the rule; ``oracle_discriminable`` is whether the brute
    force decoder returned exactly the true contacts (no spurious point, none
    missed). They are never reconciled.
    """

    discriminable: bool
    n_between: int
    n_shared: int
    n_exclusive: tuple[int, int]
    spurious_points: list[float] = field(default_factory=list)
    missed_contacts: int = 0

    @property
    def rule_basis(self) -> dict[str, Any]:
        return {"n_between": self.n_between, "n_shared": self.n_shared,
                "n_exclusive": list(self.n_exclusive)}

    @property
    def oracle_discriminable(self) -> bool:
        return not self.spurious_points and self.missed_contacts == 0

    @property
    def agrees(self) -> bool:
        return self.discriminable == self.oracle_discriminable


# -- closed forms -------------------------------------------------------------------

def omega_pairwise(D: float, n: int, sigma_p: float) -> float:
    """Virtual taxels per real taxel, ``D / (n * 2 * sigma_p)``.

    Raises:
        InfiniteOmega: ``sigma_p`` is zero.
    """
    if not D > 0:
        raise ValueError(f"D must be > 0, got {D}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if sigma_p == 0:
        raise InfiniteOmega("zero position error gives an unbounded factor")
    if not sigma_p > 0:
        raise ValueError(f"sigma_p must be > 0, got {sigma_p}")
    return D / (n * 2 * sigma_p)


def omega_analytic_1d(model: AttenuationModel, D: float, sigma_s: float) -> float:
    """Closed-form factor for a taxel pair, evaluated at the midpoint.

    The midpoint is the worst position only for ``alpha >= 2``; a warning is
    issued otherwise.
    """
    if not D > 0 or not sigma_s > 0:
        raise ValueError("D and sigma_s must be > 0")
    if model.alpha < 2:
        warnings.warn(f"alpha={model.alpha} < 2: the midpoint is not the worst case",
                      stacklevel=2)
    a = model.alpha
    return D * model.lam * a * (D / 2) ** (a - 1) / (2 * 2 * model.c * sigma_s)


def omega_dual_noise(lam, alpha, c, sigma_sf, sigma_si, D):
    """Pair factor with reading noise plus force-reference noise (vectorised).

    ``sigma_sf`` is in N, ``sigma_si`` in counts. Reduces to
    :func:`omega_analytic_1d` for ``sigma_sf = 0``.
    """
    lam, alpha, c = (np.asarray(v, dtype=float) for v in (lam, alpha, c))
    sigma_sf, sigma_si = np.asarray(sigma_sf, dtype=float), np.asarray(sigma_si, dtype=float)
    if np.any(lam <= 0) or np.any(alpha <= 0) or np.any(c <= 0) or not D > 0:
        raise ValueError("lambda, alpha, c and D must be positive")
    if np.any(sigma_sf < 0) or np.any(sigma_si < 0) or np.any(sigma_sf + sigma_si <= 0):
        raise ValueError("noise terms must be non-negative and not both zero")
    out = D * lam * alpha * (D / 2) ** (alpha - 1) / (2 * 2 * (sigma_sf + c * sigma_si))
    return float(out) if out.ndim == 0 else out


def device_omega(tables: Sequence[dict[str, Any]], sigma_sf: float, sigma_si, D: float,
                 thresholds=None) -> OmegaReport:
    """Device factor: mean over taxels of the dual-noise factor, swept over force.

    Each entry of ``tables`` describes one taxel with ``c`` and per-level arrays
    ``g``, ``lambda``, ``alpha``. At every force threshold the taxel's ``lambda``
    and ``alpha`` are interpolated against ``g`` (held constant beyond the fitted
    range); the per-threshold taxel mean forms the curve, and its mean over
    thresholds is the reported factor.
    """
    thresholds = DEFAULT_THRESHOLDS if thresholds is None else np.asarray(thresholds, float)
    sig = np.broadcast_to(np.asarray(sigma_si, dtype=float), (len(tables),))
    per_taxel = []
    for tab, s in zip(tables, sig):
        g = np.asarray(tab["g"], dtype=float)
        order = np.argsort(g)
        lam = np.interp(thresholds, g[order], np.asarray(tab["lambda"], float)[order])
        alpha = np.interp(thresholds, g[order], np.asarray(tab["alpha"], float)[order])
        per_taxel.append(omega_dual_noise(lam, alpha, tab["c"], sigma_sf, s, D))
    curve = np.mean(per_taxel, axis=0)
    return OmegaReport(
        omega=float(curve.mean()), method="dual-noise",
        force_range=(float(thresholds[0]), float(thresholds[-1])),
        per_force_curve=[(float(f), float(o)) for f, o in zip(thresholds, curve)],
    )


def omega_area_2d(area: float, sigma_px: float, sigma_py: float, n_real: int) -> float:
    """Planar factor: surface area over virtual-taxel ellipse area, per real taxel."""
    if not (area > 0 and n_real >= 1):
        raise ValueError("area and n_real must be positive")
    if sigma_px == 0 or sigma_py == 0:
        raise InfiniteOmega("zero position error gives an unbounded factor")
    if not (sigma_px > 0 and sigma_py > 0):
        raise ValueError("sigma_px and sigma_py must be > 0")
    return area / (np.pi * sigma_px * sigma_py) / n_real


# -- multiple contacts ----------------------------------------------------------------

def _single_activation(model: AttenuationModel, layout: TaxelLayout,
                       contact: ContactEvent) -> np.ndarray:
    r = forward_response(model, contact.force, layout.distances(contact.position))
    return is_active(model, r)


def discriminable_two_contacts_1d(model: AttenuationModel, layout: TaxelLayout,
                                  contacts: Sequence[ContactEvent],
                                  sigma_s: float = 0.0,
                                  with_oracle: bool = True) -> DiscriminabilityVerdict:
    """Rule check for telling two simultaneous contacts apart on a line.

    The reading used here was calibrated against the brute-force decoder: each
    contact needs at least two taxels that respond to it alone (a pair to
    triangulate from), and at most one taxel may respond to both. The count of
    taxels strictly between the contacts is reported in the basis but is not
    required, since it adds nothing once the two exclusive pairs exist.
    """
    if layout.dimensionality != 1:
        raise ValueError("discriminable_two_contacts_1d needs a 1D layout")
    if len(contacts) != 2:
        raise ValueError("exactly two contacts are required")
    a, b = sorted(contacts, key=lambda c: c.position)
    act_a = _single_activation(model, layout, a)
    act_b = _single_activation(model, layout, b)
    x = layout.positions
    n_between = int(np.count_nonzero((x > a.position) & (x < b.position)))
    n_shared = int(np.count_nonzero(act_a & act_b))
    excl = (int(np.count_nonzero(act_a & ~act_b)), int(np.count_nonzero(act_b & ~act_a)))
    verdict = min(excl) >= 2 and n_shared <= 1
    spurious, missed = _oracle(model, layout, [a, b], sigma_s, MATCH_TOL) if with_oracle else ([], 0)
    return DiscriminabilityVerdict(verdict, n_between, n_shared, excl, spurious, missed)


def _pair_candidates(model: AttenuationModel, x: np.ndarray, readings: np.ndarray,
                     active: np.ndarray) -> np.ndarray:
    """All isoline crossings of active taxel pairs as rows ``(position, force)``."""
    out = []
    for i, j in itertools.combinations(active, 2):
        fi, fj = model.c * readings[i], model.c * readings[j]
        if model.alpha == 1.0 and abs(abs(fi - fj) - model.lam * abs(x[j] - x[i])) <= 1e-12:
            continue  # coincident half-lines carry no position information
        domain = _default_domain(x[i], x[j], pad_factor=2.0)
        for p in _all_roots(_pair_gap(model, x[i], x[j], fi, fj), *domain, extra=(x[i], x[j])):
            out.append((p, fi + model.lam * abs(p - x[i]) ** model.alpha))
    if not out:
        return np.zeros((0, 2))
    cands = np.array(sorted(out))
    keep = np.concatenate([[True], np.diff(cands[:, 0]) > 1e-7])
    return cands[keep]


def decode_contacts(model: AttenuationModel, layout: TaxelLayout, readings,
                    max_contacts: int, sigma_s: float = 0.0) -> tuple[np.ndarray, bool]:
    """Contact hypotheses recovered by pairwise isoline triangulation.

    Candidates are crossings of every active taxel pair, using the readings as
    observed (a taxel touched by two contacts reports their sum). Sets of up to
    ``max_contacts`` candidates whose summed responses reproduce every reading
    within ``sigma_s`` are explanations; their points are returned with ``True``.
    If no set explains the readings, every candidate that does not over-predict any
    taxel is returned with ``False``.
    """
    readings = np.asarray(readings, dtype=float)
    x = layout.positions
    active = np.flatnonzero(is_active(model, readings))
    cands = _pair_candidates(model, x, readings, active)
    if len(cands) == 0:
        return cands, False
    tol = sigma_s + 1e-7 * max(1.0, float(np.abs(readings).max()))
    pred = forward_response(model, cands[:, 1][:, None], np.abs(cands[:, 0][:, None] - x))
    usable = np.flatnonzero(np.all(pred <= readings + tol, axis=1))
    hits: set[int] = set()
    for k in range(1, max_contacts + 1):
        for combo in itertools.combinations(usable, k):
            if np.all(np.abs(pred[list(combo)].sum(axis=0) - readings) <= tol):
                hits.update(int(i) for i in combo)
    if hits:
        return cands[sorted(hits)], True
    return cands[usable], False


def spurious_intersections(model: AttenuationModel, layout: TaxelLayout,
                           contacts: Sequence[ContactEvent], sigma_s: float = 0.0,
                           tol: float = MATCH_TOL) -> list[float]:
    """Decoded contact positions farther than ``tol`` from every true contact.

    Runs :func:`decode_contacts` on the combined noiseless readings, allowing
    as many contacts as were applied.

    Raises:
        ComplexityLimit: more than three contacts.
    """
    return _oracle(model, layout, contacts, sigma_s, tol)[0]


def _oracle(model, layout, contacts, sigma_s, tol):
    if len(contacts) > 3:
        raise ComplexityLimit("the brute-force oracle handles at most 3 contacts")
    if layout.dimensionality != 1:
        raise ValueError("spurious_intersections needs a 1D layout")
    readings = mean_readings(model, layout, contacts)
    points, _ = decode_contacts(model, layout, readings, max(len(contacts), 1), sigma_s)
    truth = np.array([c.position for c in contacts], dtype=float)
    pos = points[:, 0] if len(points) else np.zeros(0)
    if len(truth) == 0:
        return [float(p) for p in pos], 0
    dist = np.abs(pos[:, None] - truth[None, :])
    spurious = [float(p) for p in pos[dist.min(axis=1) > tol]] if len(pos) else []
    missed = int(np.count_nonzero(dist.min(axis=0) > tol)) if len(pos) else len(truth)
    return spurious, missed


def localizable_2d(model: AttenuationModel, layout: TaxelLayout,
                   contacts: ContactEvent | Sequence[ContactEvent],
                   area_tol: float = 1e-6) -> bool:
    """Whether enough non-collinear taxels respond for planar localisation.

    One contact needs three responding taxels, two contacts need six. The
    responding taxels must span a triangle of area above ``area_tol`` (mm^2),
    since a mirror image across their common line reads identically.
    """
    if layout.dimensionality != 2:
        raise ValueError("localizable_2d needs a 2D layout")
    if isinstance(contacts, ContactEvent):
        contacts = [contacts]
    need = 3 * len(contacts)
    act = is_active(model, mean_readings(model, layout, contacts))
    pts = layout.positions[act]
    if len(pts) < need:
        return False
    rel = pts - pts[0]
    cross = rel[:, None, 0] * rel[None, :, 1] - rel[:, None, 1] * rel[None, :, 0]
    return bool(np.abs(cross).max() / 2 > area_tol)


def discrimination_sweep(model: AttenuationModel, layout: TaxelLayout, forces: Sequence[float],
                         step: float = 0.5, sigma_s: float = 0.0,
                         extent: tuple[float, float] | None = None) -> list[dict[str, Any]]:
    """Rule and oracle verdicts for every ordered contact pair on a grid.

    Positions run over ``extent`` (default: outermost taxels) in ``step``
    increments; both contacts share each force level.
    """
    lo, hi = extent or (float(layout.positions[0]), float(layout.positions[-1]))
    grid = lo + step * np.arange(int(np.floor((hi - lo) / step + 1e-9)) + 1)
    rows = []
    for force in forces:
        for p1, p2 in itertools.combinations(grid, 2):
            v = discriminable_two_contacts_1d(
                model, layout, [ContactEvent(float(p1), force), ContactEvent(float(p2), force)],
                sigma_s)
            rows.append({"force": float(force), "p1": float(p1), "p2": float(p2),
                         "separation": float(p2 - p1), "rule": v.discriminable,
                         "oracle": v.oracle_discriminable, "n_between": v.n_between,
                         "n_shared": v.n_shared, "n_exclusive": list(v.n_exclusive),
                         "spurious": v.spurious_points, "missed": v.missed_contacts})
    return rows


def separation_summary(rows: Sequence[dict[str, Any]], key: str = "oracle") -> list[dict[str, Any]]:
    """Per force: discriminable fraction and the smallest separation always discriminable.

    ``min_separation`` is the smallest ``s`` such that every pair at least ``s``
    apart is discriminable by ``key``.
    """
    out = []
    for force in sorted({r["force"] for r in rows}):
        sub = [r for r in rows if r["force"] == force]
        seps = np.array([r["separation"] for r in sub])
        ok = np.array([r[key] for r in sub], dtype=bool)
        bad = seps[~ok]
        above = seps[seps > bad.max()] if bad.size else seps
        min_sep = float(above.min()) if above.size else float("inf")
        out.append({"force": force, "fraction": float(ok.mean()), "min_separation": min_sep})
    return out


__all__ = [
    "OmegaReport", "DiscriminabilityVerdict", "omega_pairwise", "omega_analytic_1d",
    "omega_dual_noise", "device_omega", "omega_area_2d", "discriminable_two_contacts_1d",
    "spurious_intersections", "decode_contacts", "localizable_2d", "discrimination_sweep", "separation_summary",
]
