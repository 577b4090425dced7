"""Synthetic indentation scans over taxel layouts.

A scan visits every position of a protocol and presses in a fixed sequence of
cumulative depths; the force follows an indentation law and the readings follow
the forward model plus Gaussian noise. Noise for row ``r`` comes from a generator
keyed on ``(seed, r)`` so rows can be produced in any order with identical output.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import OutOfBounds
from .model import AttenuationModel, NoiseModel, TaxelLayout

PROTOCOL_KINDS = ("line-1d", "grid-2d", "pattern")


@dataclass(frozen=True)
class IndentationLaw:
    """Depth to force law ``F = k * depth**p`` (Hertzian sphere for ``p = 1.5``)."""

    k: float = 0.12
    p: float = 1.5

    def __post_init__(self) -> None:
        if not (self.k > 0 and self.p > 0):
            raise ValueError("indentation law needs k > 0 and p > 0")

    def force(self, depth):
        return self.k * np.power(np.asarray(depth, dtype=float), self.p)

    def depth(self, force):
        return np.power(np.asarray(force, dtype=float) / self.k, 1.0 / self.p)


@dataclass(frozen=True)
class ScanProtocol:
    """Where and how deep to indent.

    Attributes:
        kind: ``line-1d``, ``grid-2d`` or ``pattern``.
        extent: scanned length (1D) or square side (2D), centred on the origin, mm.
        positions_count: positions along the line, or ``(nx, ny)`` for a grid.
        depth_steps: number of cumulative indentation depths per position.
        depth_increment: depth added per step, mm.
        first_depth: depth of the first step (defaults to ``depth_increment``).
        dwell: hold time between steps; recorded only, statics are simulated.
    """

    kind: str = "line-1d"
    extent: float = 50.0
    positions_count: int | tuple[int, int] = 2501
    depth_steps: int = 40
    depth_increment: float = 0.1
    first_depth: float | None = None
    dwell: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in PROTOCOL_KINDS:
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        counts = np.atleast_1d(self.positions_count)
        if self.kind != "pattern" and np.any(counts < 2):
            raise ValueError("positions_count must be >= 2")
        if self.kind == "grid-2d" and counts.size == 1:
            object.__setattr__(self, "positions_count", (int(counts[0]), int(counts[0])))
        if self.depth_steps < 1:
            raise ValueError("depth_steps must be >= 1")
        if not self.depth_increment > 0:
            raise ValueError("depth_increment must be > 0")

    @classmethod
    def default_1d(cls) -> "ScanProtocol":
        return cls("line-1d", 50.0, 2501, 40, 0.1)

    @classmethod
    def default_2d(cls) -> "ScanProtocol":
        return cls("grid-2d", 34.0, (69, 69), 20, 0.2)

    @property
    def dimensionality(self) -> int:
        return 1 if self.kind == "line-1d" else 2

    def depths(self) -> np.ndarray:
        first = self.depth_increment if self.first_depth is None else self.first_depth
        return first + self.depth_increment * np.arange(self.depth_steps)

    def positions(self) -> np.ndarray:
        half = self.extent / 2
        if self.kind == "line-1d":
            return np.linspace(-half, half, int(self.positions_count))
        if self.kind == "grid-2d":
            nx, ny = self.positions_count
            gx, gy = np.linspace(-half, half, nx), np.linspace(-half, half, ny)
            return np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
        raise ValueError("pattern protocols take their positions from a point list")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        if isinstance(d["positions_count"], tuple):
            d["positions_count"] = list(d["positions_count"])
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ScanProtocol":
        d = dict(d)
        if isinstance(d.get("positions_count"), list):
            d["positions_count"] = tuple(d["positions_count"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class ScanDataset:
    """Rows of (position, depth, force, readings) plus regeneration metadata.

    ``positions`` has shape ``(rows,)`` in 1D and ``(rows, 2)`` in 2D.
    """

    positions: np.ndarray
    depth: np.ndarray
    force: np.ndarray
    readings: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.depth)

    @property
    def dimensionality(self) -> int:
        return 1 if self.positions.ndim == 1 else 2

    @property
    def n_taxels(self) -> int:
        return self.readings.shape[1]

    def layout(self) -> TaxelLayout:
        return TaxelLayout.from_dict(self.metadata["layout"])

    def model(self) -> AttenuationModel:
        return AttenuationModel.from_dict(self.metadata["model"])

    def subset(self, mask) -> "ScanDataset":
        return ScanDataset(self.positions[mask], self.depth[mask], self.force[mask],
                           self.readings[mask], dict(self.metadata))

    def header(self) -> list[str]:
        pos = ["x_mm"] if self.dimensionality == 1 else ["x_mm", "y_mm"]
        return pos + ["depth_mm", "force_N"] + [f"s_{i + 1}" for i in range(self.n_taxels)]

    def table(self) -> np.ndarray:
        pos = self.positions.reshape(len(self), -1)
        return np.column_stack([pos, self.depth, self.force, self.readings])

    def save(self, path: str | Path) -> tuple[Path, Path]:
        """Write ``<path>`` (CSV) and its JSON sidecar; returns both paths."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write(",".join(self.header()) + "\n")
            np.savetxt(fh, self.table(), fmt="%.17g", delimiter=",")
        meta = sidecar_path(path)
        meta.write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")
        return path, meta

    @classmethod
    def load(cls, path: str | Path) -> "ScanDataset":
        path = Path(path)
        with path.open() as fh:
            header = next(csv.reader(fh))
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != len(header):
            raise ValueError(f"{path}: {data.shape[1]} columns but {len(header)} header fields")
        dim = 2 if header[1] == "y_mm" else 1
        pos = data[:, 0] if dim == 1 else data[:, :2]
        meta_path = sidecar_path(path)
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        return cls(pos, data[:, dim], data[:, dim + 1], data[:, dim + 2:], meta)


def sidecar_path(csv_path: str | Path) -> Path:
    return Path(csv_path).with_suffix(".json")


def make_layout(kind: str, spacing: float = 6.5, count=None, positions=None) -> TaxelLayout:
    """Centred taxel layouts.

    Args:
        kind: ``line`` (``count`` taxels), ``grid`` (``count`` = (nx, ny) or n),
            ``hex`` (``count`` = (rows, cols) of a triangular lattice) or
            ``explicit`` (``positions`` as given).
        spacing: centre-to-centre spacing in mm.
    """
    if kind == "explicit":
        if positions is None:
            raise ValueError("explicit layouts need positions")
        return TaxelLayout(np.asarray(positions, dtype=float))
    if not spacing > 0:
        raise ValueError(f"spacing must be > 0, got {spacing}")
    if kind == "line":
        n = int(count or 6)
        return TaxelLayout(spacing * (np.arange(n) - (n - 1) / 2))
    shape = (int(count), int(count)) if np.ndim(count) == 0 else tuple(int(v) for v in count)
    if kind == "grid":
        gx = spacing * (np.arange(shape[0]) - (shape[0] - 1) / 2)
        gy = spacing * (np.arange(shape[1]) - (shape[1] - 1) / 2)
        pts = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
        return TaxelLayout(pts)
    if kind == "hex":
        rows, cols = shape
        pts = [((c + 0.5 * (r % 2)) * spacing, r * spacing * np.sqrt(3) / 2)
               for r in range(rows) for c in range(cols)]
        pts = np.array(pts)
        return TaxelLayout(pts - (pts.min(axis=0) + pts.max(axis=0)) / 2)
    raise ValueError(f"unknown layout kind {kind!r}")


def _metadata(model, noise, layout, protocol, law, seed, points=None) -> dict[str, Any]:
    meta = {
        "model": model.to_dict(),
        "noise": {"sigma_s": noise.sigma_s, "sigma_sf": noise.sigma_sf},
        "layout": layout.to_dict(),
        "protocol": protocol.to_dict(),
        "law": asdict(law),
        "seed": int(seed),
    }
    if points is not None:
        meta["points"] = np.asarray(points).tolist()
    return meta


def _scan_rows(model, noise, layout, pos, depths, law, seed) -> ScanDataset:
    n_pos, n_dep = len(pos), len(depths)
    pos_rows = np.repeat(pos, n_dep, axis=0)
    depth_rows = np.tile(depths, n_pos)
    force = law.force(depth_rows)
    dist = layout.distances(pos_rows)
    mean = np.maximum(0.0, (force[:, None] - model.lam * dist ** model.alpha) / model.c)
    readings = mean.copy()
    if noise.sigma_s > 0 or noise.sigma_sf > 0:
        n = len(layout)
        for r in range(len(force)):
            draw = np.random.default_rng([int(seed), r]).standard_normal(n + 1)
            readings[r] += noise.sigma_s * draw[:n]
            force[r] += noise.sigma_sf * draw[n]
    return ScanDataset(pos_rows, depth_rows, force, readings)


def generate_scan(model: AttenuationModel, noise: NoiseModel, layout: TaxelLayout,
                  protocol: ScanProtocol | None = None, law: IndentationLaw | None = None,
                  seed: int | None = None) -> ScanDataset:
    """Scan every protocol position at every cumulative depth.

    Rows are position-major. ``seed`` defaults to ``noise.seed``. The recorded
    force carries the reference noise ``sigma_sf``; readings carry ``sigma_s``.
    """
    law = law or IndentationLaw()
    if protocol is None:
        protocol = ScanProtocol.default_1d() if layout.dimensionality == 1 else ScanProtocol.default_2d()
    if protocol.dimensionality != layout.dimensionality:
        raise ValueError(f"{protocol.kind} protocol does not match a {layout.dimensionality}D layout")
    seed = noise.seed if seed is None else seed
    ds = _scan_rows(model, noise, layout, protocol.positions(), protocol.depths(), law, seed)
    return ScanDataset(ds.positions, ds.depth, ds.force, ds.readings,
                       _metadata(model, noise, layout, protocol, law, seed))


def default_surface(layout: TaxelLayout) -> np.ndarray:
    """Sensing surface: the layout's bounding box padded by one nominal spacing."""
    pad = layout.nominal_spacing
    b = layout.bounds()
    return np.column_stack([b[:, 0] - pad, b[:, 1] + pad])


def pattern_scan(model: AttenuationModel, noise: NoiseModel, layout: TaxelLayout,
                 points, depth_steps: int, depth_increment: float,
                 law: IndentationLaw | None = None, seed: int | None = None,
                 surface=None) -> ScanDataset:
    """Like :func:`generate_scan` over an arbitrary list of points.

    Raises:
        OutOfBounds: a point lies outside ``surface`` (per-axis ``[lo, hi]`` rows;
            default :func:`default_surface`).
    """
    law = law or IndentationLaw()
    pts = np.asarray(points, dtype=float)
    pts = pts.reshape(-1) if layout.dimensionality == 1 else pts.reshape(-1, 2)
    box = default_surface(layout) if surface is None else np.asarray(surface, dtype=float)
    coords = pts.reshape(len(pts), -1)
    outside = np.any((coords < box[:, 0]) | (coords > box[:, 1]), axis=1)
    if outside.any():
        raise OutOfBounds(f"{int(outside.sum())} point(s) outside the surface, first at "
                          f"{coords[np.argmax(outside)].tolist()}")
    protocol = ScanProtocol("pattern", 0.0, len(pts), depth_steps, depth_increment)
    seed = noise.seed if seed is None else seed
    ds = _scan_rows(model, noise, layout, pts, protocol.depths(), law, seed)
    return ScanDataset(ds.positions, ds.depth, ds.force, ds.readings,
                       _metadata(model, noise, layout, protocol, law, seed, points=pts))


def circle_pattern(diameter: float = 26.0, n: int = 100, center=(0.0, 0.0)) -> np.ndarray:
    """``n`` points evenly spaced on a circle, a stand-in contour for pattern scans."""
    t = 2 * np.pi * np.arange(n) / n
    r = diameter / 2
    return np.column_stack([center[0] + r * np.cos(t), center[1] + r * np.sin(t)])


def load_points(path: str | Path) -> np.ndarray:
    """Read points from CSV (``x_mm[,y_mm]`` header optional)."""
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
    skip = 1 if any(ch.isalpha() for ch in first) else 0
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    return data[:, 0] if data.shape[1] == 1 else data[:, :2]


def regenerate(metadata: dict[str, Any]) -> ScanDataset:
    """Rebuild a dataset bit-identically from its metadata."""
    model = AttenuationModel.from_dict(metadata["model"])
    noise = NoiseModel(metadata["noise"]["sigma_s"], metadata["noise"]["sigma_sf"],
                       metadata["seed"])
    layout = TaxelLayout.from_dict(metadata["layout"])
    protocol = ScanProtocol.from_dict(metadata["protocol"])
    law = IndentationLaw(**metadata["law"])
    if protocol.kind == "pattern":
        return pattern_scan(model, noise, layout, metadata["points"], protocol.depth_steps,
                            protocol.depth_increment, law, metadata["seed"],
                            surface=np.full((layout.dimensionality, 2), [-np.inf, np.inf]))
    return generate_scan(model, noise, layout, protocol, law, metadata["seed"])

