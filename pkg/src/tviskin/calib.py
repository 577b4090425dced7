"""Isoline extraction and attenuation-law fitting from scan data.

For one taxel, every scanned position gives a force-vs-reading curve across the
depth steps. Interpolating that curve at a fixed reading level yields one point
(distance, force) on the level's isoline; fitting ``F = g + lam * d**alpha`` to
those points recovers the attenuation law, and ``g`` against the level gives ``c``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import DegenerateFit, InsufficientCoverage
from .model import AttenuationModel, NoiseModel
from .synth import ScanDataset

ALPHA_BOUNDS = (0.2, 6.0)
MIN_POINTS = 4
_GOLDEN = (np.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class IsolineSample:
    """Points ``(distance, force)`` where one taxel reads ``level``."""

    level: float
    distance: np.ndarray
    force: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.distance, dtype=float)
        f = np.asarray(self.force, dtype=float)
        if d.shape != f.shape or d.ndim != 1:
            raise ValueError("distance and force must be 1D arrays of equal length")
        if np.any(d < 0):
            raise ValueError("distances must be >= 0")
        object.__setattr__(self, "distance", d)
        object.__setattr__(self, "force", f)

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.distance, self.force])


@dataclass(frozen=True)
class IsolineFit:
    level: float
    g: float
    lam: float
    alpha: float
    residual_rms: float
    n_points: int = 0

    def predict(self, distance):
        return self.g + self.lam * np.power(distance, self.alpha)

    def to_dict(self) -> dict[str, float]:
        return {"level": self.level, "g": self.g, "lambda": self.lam, "alpha": self.alpha,
                "residual_rms": self.residual_rms, "n_points": self.n_points}


@dataclass(frozen=True)
class CEstimate:
    c: float
    ratios: np.ndarray
    spread: float


@dataclass(frozen=True)
class CalibratedModel:
    """Constant-parameter model plus the per-level table it was reduced from."""

    model: AttenuationModel
    table: list[dict[str, float]]
    noise: NoiseModel | None = None
    c_spread: float = 0.0
    extra: dict[str, Any] = field(default_factory=dict)

    def level_table(self) -> dict[str, Any]:
        """Arrays in the form :func:`tviskin.superres.device_omega` expects."""
        return {"c": self.model.c,
                "g": [r["g"] for r in self.table],
                "lambda": [r["lambda"] for r in self.table],
                "alpha": [r["alpha"] for r in self.table]}

    def to_dict(self) -> dict[str, Any]:
        d = {**self.model.to_dict(), "c_spread": self.c_spread, "levels": self.table}
        if self.noise is not None:
            d["sigma_s"] = self.noise.sigma_s
            d["sigma_sf"] = self.noise.sigma_sf
        return {**d, **self.extra}


# -- extraction ---------------------------------------------------------------------

def default_levels(dataset: ScanDataset, taxel_index: int, s_min: float = 0.0,
                   count: int = 8) -> np.ndarray:
    """``count`` evenly spaced levels strictly between ``s_min`` and the 95th percentile."""
    r = dataset.readings[:, taxel_index]
    active = r[r > s_min]
    if active.size == 0:
        raise InsufficientCoverage(f"taxel {taxel_index} never responds")
    top = float(np.percentile(active, 95))
    return np.linspace(s_min, top, count + 2)[1:-1]


def _group_by_position(dataset: ScanDataset):
    pos = dataset.positions.reshape(len(dataset), -1)
    order = np.lexsort((dataset.depth,) + tuple(pos[:, k] for k in reversed(range(pos.shape[1]))))
    pos_sorted = pos[order]
    breaks = np.flatnonzero(np.any(np.diff(pos_sorted, axis=0) != 0, axis=1)) + 1
    return np.split(order, breaks)


def _crossing_force(reading: np.ndarray, force: np.ndarray, level: float) -> float | None:
    """Force where ``reading`` first rises through ``level`` (linear interpolation).

    A bracket whose lower end is clamped at zero is replaced by the next segment
    (extrapolated), since the response is linear in force only once positive.
    """
    up = np.flatnonzero((reading[:-1] < level) & (reading[1:] >= level))
    if up.size == 0:
        return None
    k = int(up[0])
    if reading[k] <= 0 and k + 2 < len(reading) and reading[k + 1] > 0:
        k += 1
    r0, r1 = reading[k], reading[k + 1]
    if r1 == r0:
        return float(force[k])
    return float(force[k] + (level - r0) * (force[k + 1] - force[k]) / (r1 - r0))


def extract_isolines(dataset: ScanDataset, taxel_index: int, levels=None,
                     s_min: float | None = None) -> list[IsolineSample]:
    """Isoline samples for one taxel at each reading level.

    Raises:
        InsufficientCoverage: fewer than four crossings for some level.
    """
    layout = dataset.layout()
    if not 0 <= taxel_index < len(layout):
        raise IndexError(f"taxel {taxel_index} out of range")
    if s_min is None:
        s_min = float(dataset.metadata.get("model", {}).get("s_min", 0.0))
    levels = default_levels(dataset, taxel_index, s_min) if levels is None else np.atleast_1d(levels)
    centre = layout.positions[taxel_index]
    reading = dataset.readings[:, taxel_index]
    groups = _group_by_position(dataset)
    pos = dataset.positions.reshape(len(dataset), -1)
    dist = np.linalg.norm(pos - np.reshape(centre, (1, -1)), axis=1)

    samples = []
    for level in levels:
        ds, fs = [], []
        for idx in groups:
            if len(idx) < 2:
                continue
            f = _crossing_force(reading[idx], dataset.force[idx], float(level))
            if f is not None:
                ds.append(dist[idx[0]])
                fs.append(f)
        if len(ds) < MIN_POINTS:
            raise InsufficientCoverage(
                f"level {level:g} of taxel {taxel_index}: {len(ds)} crossings, need {MIN_POINTS}")
        samples.append(IsolineSample(float(level), np.array(ds), np.array(fs)))
    return samples


# -- fitting ------------------------------------------------------------------------

def _linear_part(d: np.ndarray, f: np.ndarray, alpha: float):
    design = np.column_stack([np.ones_like(d), d ** alpha])
    coef, *_ = np.linalg.lstsq(design, f, rcond=None)
    resid = f - design @ coef
    return coef, float(resid @ resid)


def fit_isoline(sample: IsolineSample, alpha_bounds=ALPHA_BOUNDS, tol: float = 1e-9) -> IsolineFit:
    """Least-squares fit of ``F = g + lam * d**alpha``.

    For fixed ``alpha`` the problem is linear in ``(g, lam)`` and solved exactly;
    ``alpha`` is found by a coarse scan over ``alpha_bounds`` followed by
    golden-section search on the bracketing interval until it is narrower than ``tol``.

    Raises:
        DegenerateFit: fewer than three distinct distances, or a non-positive fit.
    """
    d, f = sample.distance, sample.force
    if len(d) < MIN_POINTS:
        raise DegenerateFit(f"{len(d)} points; need at least {MIN_POINTS}")
    if len(np.unique(d)) < 3:
        raise DegenerateFit("fewer than three distinct distances: alpha is unidentifiable")
    scale = d.max()
    u = d / scale  # keeps u**alpha well conditioned across the scan

    grid = np.linspace(*alpha_bounds, 59)
    sse = np.array([_linear_part(u, f, a)[1] for a in grid])
    k = int(np.argmin(sse))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    s1, s2 = _linear_part(u, f, x1)[1], _linear_part(u, f, x2)[1]
    while hi - lo > tol:
        if s1 <= s2:
            hi, x2, s2 = x2, x1, s1
            x1 = hi - _GOLDEN * (hi - lo)
            s1 = _linear_part(u, f, x1)[1]
        else:
            lo, x1, s1 = x1, x2, s2
            x2 = lo + _GOLDEN * (hi - lo)
            s2 = _linear_part(u, f, x2)[1]
    alpha = (lo + hi) / 2
    (g, lam_u), sse_best = _linear_part(u, f, alpha)
    lam = lam_u / scale ** alpha
    if not lam > 0:
        raise DegenerateFit(f"fitted attenuation coefficient {lam:g} is not positive")
    return IsolineFit(sample.level, float(g), float(lam), float(alpha),
                      float(np.sqrt(sse_best / len(d))), len(d))


def estimate_c(fits: Sequence[IsolineFit]) -> CEstimate:
    """Force per count as the through-origin slope of ``g`` against level."""
    levels = np.array([fit.level for fit in fits])
    g = np.array([fit.g for fit in fits])
    if len(np.unique(levels)) < 2:
        raise ValueError("estimate_c needs fits at two or more distinct levels")
    if np.any(levels <= 0):
        raise ValueError("levels must be > 0")
    c = float(levels @ g / (levels @ levels))
    ratios = g / levels
    spread = float(ratios.std() / abs(ratios.mean())) if ratios.mean() != 0 else float("inf")
    return CEstimate(c, ratios, spread)


def build_model_from_fits(fits: Sequence[IsolineFit], noise: NoiseModel | None = None,
                          s_min: float = 0.0) -> CalibratedModel:
    """Reduce per-level fits to one constant-parameter model.

    ``c`` comes from :func:`estimate_c` (a single fit gives ``g / level``);
    ``lam`` and ``alpha`` are means weighted by inverse squared residual, so
    cleaner isolines count more. The per-level table is kept alongside.
    """
    if not fits:
        raise ValueError("no fits given")
    table = [fit.to_dict() for fit in sorted(fits, key=lambda f: f.level)]
    if len(fits) == 1:
        c, spread = fits[0].g / fits[0].level, 0.0
    else:
        est = estimate_c(fits)
        c, spread = est.c, est.spread
    rms = np.array([fit.residual_rms for fit in fits])
    floor = max(float(rms.max()) * 1e-6, 1e-300)
    w = 1.0 / np.maximum(rms, floor) ** 2
    w /= w.sum()
    lam = float(w @ np.array([fit.lam for fit in fits]))
    alpha = float(w @ np.array([fit.alpha for fit in fits]))
    model = AttenuationModel(c=c, lam=lam, alpha=alpha, s_min=s_min)
    return CalibratedModel(model, table, noise, spread)


def calibrate_taxel(dataset: ScanDataset, taxel_index: int, levels=None,
                    noise: NoiseModel | None = None) -> CalibratedModel:
    s_min = float(dataset.metadata.get("model", {}).get("s_min", 0.0))
    samples = extract_isolines(dataset, taxel_index, levels, s_min)
    fits = [fit_isoline(s) for s in samples]
    cal = build_model_from_fits(fits, noise, s_min)
    return CalibratedModel(cal.model, cal.table, cal.noise, cal.c_spread,
                           {"taxel": int(taxel_index)})


def calibrate_dataset(dataset: ScanDataset, taxels: Sequence[int] | None = None,
                      levels=None) -> tuple[AttenuationModel, list[CalibratedModel]]:
    """Fit every requested taxel; the device model averages the per-taxel parameters."""
    meta_noise = dataset.metadata.get("noise")
    noise = NoiseModel(meta_noise["sigma_s"], meta_noise["sigma_sf"]) if meta_noise else None
    taxels = range(dataset.n_taxels) if taxels is None else taxels
    per = [calibrate_taxel(dataset, t, levels, noise) for t in taxels]
    s_min = float(dataset.metadata.get("model", {}).get("s_min", 0.0))
    device = AttenuationModel(
        c=float(np.mean([p.model.c for p in per])),
        lam=float(np.mean([p.model.lam for p in per])),
        alpha=float(np.mean([p.model.alpha for p in per])), s_min=s_min)
    return device, per


def write_fit_json(path: str | Path, device: AttenuationModel,
                   per_taxel: Sequence[CalibratedModel]) -> Path:
    doc = {"device": device.to_dict(), "taxels": [p.to_dict() for p in per_taxel]}
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def read_fit_json(path: str | Path) -> tuple[AttenuationModel, list[dict[str, Any]]]:
    doc = json.loads(Path(path).read_text())
    return AttenuationModel.from_dict(doc["device"]), doc["taxels"]
