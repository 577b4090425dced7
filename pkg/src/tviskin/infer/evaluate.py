"""Held-out error maps and the achieved super-resolution factor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InfiniteOmega
from ..model import AttenuationModel, NoiseModel
from ..superres import OmegaReport, omega_area_2d, omega_dual_noise, omega_pairwise
from .regressor import Regressor, split_masks, target_values, within_extent

N_BANDS = 5
OMEGA_CAP = 1e6


class EmptySplit(ValueError):
    """No held-out rows are available for evaluation."""


@dataclass(frozen=True)
class ErrorMap:
    """Position and force RMSE per spatial cell and force band.

    Arrays are indexed ``[band, cell]``; cells without rows hold NaN.
    """

    cells: np.ndarray
    band_edges: np.ndarray
    position_rmse: np.ndarray
    force_rmse: np.ndarray
    counts: np.ndarray

    def __post_init__(self) -> None:
        if np.any(np.diff(self.band_edges) <= 0):
            raise ValueError("band edges must increase")
        for arr in (self.position_rmse, self.force_rmse):
            if np.any(arr[np.isfinite(arr)] < 0):
                raise ValueError("RMSE must be non-negative")

    @property
    def n_bands(self) -> int:
        return len(self.band_edges) - 1

    def table(self) -> tuple[list[str], np.ndarray]:
        """Long-format rows: cell coordinates, band, count, position and force RMSE."""
        dim = self.cells.shape[1]
        head = ["x_mm", "y_mm"][:dim] + ["band", "force_lo_N", "force_hi_N", "count",
                                          "position_rmse_mm", "force_rmse_N"]
        rows = []
        for b in range(self.n_bands):
            for k, cell in enumerate(self.cells):
                rows.append([*cell, b, self.band_edges[b], self.band_edges[b + 1],
                             self.counts[b, k], self.position_rmse[b, k], self.force_rmse[b, k]])
        return head, np.array(rows, dtype=float)


def localizable_force(model: AttenuationModel, layout, region=None, k_required=None) -> float:
    """Smallest force at which every point of ``region`` activates enough taxels.

    ``k_required`` defaults to 2 in 1D and 3 in 2D. The region defaults to the
    bounding box of the layout.
    """
    dim = layout.dimensionality
    k = (2 if dim == 1 else 3) if k_required is None else k_required
    box = layout.bounds()
    if region is not None:
        box = np.tile(np.asarray(region, dtype=float), (dim, 1))
    axes = [np.linspace(lo, hi, 401 if dim == 1 else 81) for lo, hi in box]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    d = np.sort(layout.distances(pts[:, 0] if dim == 1 else pts), axis=-1)[:, k - 1]
    return float(np.max(model.c * model.s_min + model.lam * d ** model.alpha))


def _cells(pos: np.ndarray, width: float):
    idx = np.floor(pos / width).astype(int)
    keys, inverse = np.unique(idx, axis=0, return_inverse=True)
    return (keys + 0.5) * width, inverse.reshape(-1)


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.sum(np.atleast_2d(x.T).T ** 2, axis=-1)))) if len(x) else np.nan


def evaluate(regressor_pos: Regressor, regressor_force: Regressor | None, dataset,
             force_bands=None, model: AttenuationModel | None = None,
             noise: NoiseModel | None = None, region=None, cell: float | None = None,
             rows=None) -> tuple[ErrorMap, OmegaReport]:
    """Score regressors on held-out rows and turn the position error into a factor.

    Args:
        force_bands: band edges in N. By default five equal bands from the
            force at which the whole region is localizable up to the largest
            test force.
        model, noise: the generating model for the theory factor; read from
            the dataset metadata when omitted.
        region: (low, high) in mm on every axis; defaults to the position
            regressor's training extent, else the taxel bounding box.
        cell: spatial cell width in mm (default a quarter of the spacing).
        rows: optional boolean mask overriding the test split.

    Returns:
        The error map and an empirical OmegaReport. ``extra`` carries the
        theory factor, their ratio, per-band RMSE, the factor computed from the
        error standard deviation instead of the RMSE, and skipped-row counts.

    Raises:
        EmptySplit: no test rows inside the region.
    """
    meta = dataset.metadata
    model = model or AttenuationModel.from_dict(meta["model"])
    if noise is None:
        noise = NoiseModel(meta["noise"]["sigma_s"], meta["noise"].get("sigma_sf", 0.0))
    layout = dataset.layout()
    dim = layout.dimensionality
    if region is None:
        region = regressor_pos.spec.train_extent
    if region is None:
        box = layout.bounds()
        region = (float(box[:, 0].min()), float(box[:, 1].max()))

    test = split_masks(dataset)["test"] if rows is None else np.asarray(rows, dtype=bool)
    test = test & within_extent(dataset.positions, region)
    if not test.any():
        raise EmptySplit("empty test split")

    x = dataset.readings[test]
    pos_hat, low = regressor_pos.predict(x)
    pos_true = target_values(dataset, "position")[test]
    pos_err = np.asarray(pos_hat).reshape(len(x), -1) - pos_true
    force = dataset.force[test]
    if regressor_force is not None:
        f_hat, _ = regressor_force.predict(x)
        f_err = f_hat - force
    else:
        f_err = np.full(len(x), np.nan)
    keep = ~low
    pos_err, f_err, force, pos_true = pos_err[keep], f_err[keep], force[keep], pos_true[keep]

    taxels = layout.positions.reshape(len(layout), -1)
    inside = np.all((taxels >= region[0]) & (taxels <= region[1]), axis=1)
    n_real = int(inside.sum()) or len(layout)
    if force_bands is None:
        f_lo = localizable_force(model, layout, region)
        f_hi = float(force.max()) if len(force) else f_lo
        if f_hi <= f_lo:
            f_lo = 0.0
        force_bands = np.linspace(f_lo, f_hi * (1 + 1e-12), N_BANDS + 1)
    edges = np.asarray(force_bands, dtype=float)
    band = np.digitize(force, edges) - 1
    band[(band < 0) | (band >= len(edges) - 1)] = -1

    width = layout.nominal_spacing / 4 if cell is None else cell
    centers, which = _cells(pos_true, width)
    nb, nc = len(edges) - 1, len(centers)
    p_map = np.full((nb, nc), np.nan)
    f_map = np.full((nb, nc), np.nan)
    counts = np.zeros((nb, nc), dtype=int)
    for b in range(nb):
        for k in range(nc):
            m = (band == b) & (which == k)
            counts[b, k] = m.sum()
            if m.any():
                p_map[b, k] = _rms(pos_err[m])
                f_map[b, k] = _rms(f_err[m])
    emap = ErrorMap(centers, edges, p_map, f_map, counts)

    span = taxels[inside]
    if dim == 1:
        extent = float(np.ptp(span)) if len(span) > 1 else layout.nominal_spacing
    else:
        extent = float(np.prod(np.ptp(span, axis=0))) if len(span) > 2 else layout.nominal_spacing ** 2

    def factor(err):
        if dim == 1:
            s = _rms(err)
            return omega_pairwise(extent, n_real, s) if s > 0 else np.inf
        sx, sy = _rms(err[:, 0]), _rms(err[:, 1])
        return omega_area_2d(extent, sx, sy, n_real) if sx > 0 and sy > 0 else np.inf

    def factor_std(err):
        if len(err) < 2:
            return np.nan
        sd = err.std(axis=0, ddof=1)
        try:
            if dim == 1:
                return omega_pairwise(extent, n_real, float(sd[0]))
            return omega_area_2d(extent, float(sd[0]), float(sd[1]), n_real)
        except InfiniteOmega:
            return np.inf

    notes, curve, std_curve, band_rmse, band_frmse, band_counts = [], [], [], [], [], []
    for b in range(nb):
        m = band == b
        band_counts.append(int(m.sum()))
        if not m.any():
            notes.append(f"EmptyBand: no rows in {edges[b]:.4g}-{edges[b + 1]:.4g} N")
            continue
        mid = 0.5 * (edges[b] + edges[b + 1])
        curve.append((float(mid), float(factor(pos_err[m]))))
        std_curve.append((float(mid), float(factor_std(pos_err[m]))))
        band_rmse.append(_rms(pos_err[m]))
        band_frmse.append(_rms(f_err[m]))
    if not curve:
        raise EmptySplit("no test rows inside any force band")

    values = np.array([o for _, o in curve])
    infinite = bool(np.any(np.isinf(values)))
    omega = float(np.mean(np.minimum(values, OMEGA_CAP)))
    if infinite:
        notes.append(f"zero position error in some band; factor capped at {OMEGA_CAP:g}")
        curve = [(f, min(o, OMEGA_CAP)) for f, o in curve]

    theory = omega_theory(model, noise, layout)
    extra = {
        "omega_theory": theory,
        "ratio": omega / theory if theory else None,
        "band_edges": edges.tolist(),
        "band_counts": band_counts,
        "band_position_rmse": band_rmse,
        "band_force_rmse": band_frmse,
        "omega_std": float(np.mean([o for _, o in std_curve])),
        "per_force_curve_std": std_curve,
        "position_rmse": _rms(pos_err[band >= 0]),
        "force_rmse": _rms(f_err[band >= 0]),
        "n_test": int(test.sum()),
        "n_low_confidence": int(low.sum()),
        "n_outside_bands": int((band < 0).sum()),
        "extent": extent,
        "n_real": n_real,
    }
    report = OmegaReport(omega=omega, method="empirical-ml",
                         force_range=(float(edges[0]), float(edges[-1])), per_force_curve=curve,
                         infinite=infinite, notes=tuple(notes), extra=extra)
    return emap, report


def omega_theory(model: AttenuationModel, noise: NoiseModel, layout) -> float:
    """Pair factor at the nominal spacing under both noise sources."""
    return float(omega_dual_noise(model.lam, model.alpha, model.c, noise.sigma_sf,
                                  noise.sigma_s, layout.nominal_spacing))


def band_inversions(curve) -> int:
    """Number of adjacent bands where the factor drops as force rises."""
    values = [o for _, o in curve]
    return int(sum(b < a for a, b in zip(values, values[1:])))
