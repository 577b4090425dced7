"""Core value types and the forward taxel-response model.

A taxel reading is modelled as

    s = max(0, (F - lambda * d**alpha) / c) + eps,   eps ~ N(0, sigma_s**2)

so the level set for a fixed mean reading S is the isoline
``F = c * S + lambda * d**alpha`` (force needed at distance ``d``).
Units are mm, N and dimensionless sensor counts throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np


@dataclass(frozen=True)
class AttenuationModel:
    """Power-law attenuation of a taxel's response with contact distance.

    Attributes:
        c: force per sensor count (N/count); ``F = c * S`` at distance 0.
        lam: attenuation coefficient (N * mm**-alpha).
        alpha: attenuation exponent.
        s_min: smallest detectable reading (counts).
    """

    c: float = 1.0
    lam: float = 1.0
    alpha: float = 2.0
    s_min: float = 0.0

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError(f"c must be > 0, got {self.c}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not self.s_min >= 0:
            raise ValueError(f"s_min must be >= 0, got {self.s_min}")

    def activation_force(self, distance):
        """Smallest force that produces a detectable reading at ``distance``."""
        return self.c * self.s_min + self.lam * np.power(distance, self.alpha)

    def to_dict(self) -> dict[str, float]:
        return {"c": self.c, "lambda": self.lam, "alpha": self.alpha, "s_min": self.s_min}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AttenuationModel":
        return cls(c=float(d["c"]), lam=float(d["lambda"]), alpha=float(d["alpha"]),
                   s_min=float(d.get("s_min", 0.0)))


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian reading noise (counts) and force-reference noise (N)."""

    sigma_s: float = 0.0
    sigma_sf: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.sigma_s >= 0:
            raise ValueError(f"sigma_s must be >= 0, got {self.sigma_s}")
        if not self.sigma_sf >= 0:
            raise ValueError(f"sigma_sf must be >= 0, got {self.sigma_sf}")

    def rng(self, stream: int = 0) -> np.random.Generator:
        """Generator keyed on (seed, stream); independent per stream index."""
        return np.random.default_rng([int(self.seed), int(stream)])


@dataclass(frozen=True, eq=False)
class TaxelLayout:
    """Taxel centres on a line (shape ``(n,)``) or a plane (shape ``(n, 2)``)."""

    positions: np.ndarray
    dimensionality: int = field(default=0)

    def __post_init__(self) -> None:
        pos = np.array(self.positions, dtype=float)
        dim = self.dimensionality
        if dim == 0:
            dim = 1 if pos.ndim == 1 else 2
        if dim == 1:
            pos = pos.reshape(-1)
            if pos.size and np.any(np.diff(pos) <= 0):
                if len(np.unique(pos)) != pos.size:
                    raise ValueError("taxel positions must be distinct")
                raise ValueError("1D taxel positions must be sorted ascending")
        elif dim == 2:
            pos = pos.reshape(-1, 2)
            if len(np.unique(pos, axis=0)) != len(pos):
                raise ValueError("taxel positions must be distinct")
        else:
            raise ValueError(f"dimensionality must be 1 or 2, got {dim}")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "dimensionality", dim)

    def __len__(self) -> int:
        return len(self.positions)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TaxelLayout):
            return NotImplemented
        return (self.dimensionality == other.dimensionality
                and np.array_equal(self.positions, other.positions))

    @property
    def spacings(self) -> np.ndarray:
        """Adjacent-pair spacing (1D) or nearest-neighbour distance per taxel (2D)."""
        if len(self) < 2:
            return np.zeros(0)
        if self.dimensionality == 1:
            return np.diff(self.positions)
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(dist, np.inf)
        return dist.min(axis=1)

    @property
    def nominal_spacing(self) -> float:
        s = self.spacings
        return float(np.median(s)) if s.size else 1.0

    def distances(self, point) -> np.ndarray:
        """Distances from ``point`` (or an array of points) to every taxel.

        The result has shape ``point_shape + (n_taxels,)``.
        """
        p = np.asarray(point, dtype=float)
        if self.dimensionality == 1:
            return np.abs(p[..., None] - self.positions)
        diff = p[..., None, :] - self.positions
        return np.hypot(diff[..., 0], diff[..., 1])

    def bounds(self) -> np.ndarray:
        """``[[lo, hi]]`` per axis."""
        if self.dimensionality == 1:
            return np.array([[self.positions.min(), self.positions.max()]])
        return np.stack([self.positions.min(axis=0), self.positions.max(axis=0)], axis=1)

    def to_dict(self) -> dict[str, Any]:
        return {"dimensionality": self.dimensionality, "positions": self.positions.tolist()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TaxelLayout":
        return cls(np.asarray(d["positions"], dtype=float), int(d.get("dimensionality", 0)))


@dataclass(frozen=True)
class ContactEvent:
    """A single indentation at ``position`` with normal ``force`` (and optional depth)."""

    position: float | tuple[float, float]
    force: float
    depth: float | None = None

    def __post_init__(self) -> None:
        if np.ndim(self.position) == 1:
            object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        else:
            object.__setattr__(self, "position", float(self.position))
        if not self.force >= 0:
            raise ValueError(f"force must be >= 0, got {self.force}")
        if self.depth is not None and not self.depth >= 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")


def forward_response(model: AttenuationModel, force, distance):
    """Noiseless reading of a taxel at ``distance`` from a contact of ``force``.

    Vectorised over ``force`` and ``distance``; returns a float for scalar input.
    """
    f = np.asarray(force, dtype=float)
    d = np.asarray(distance, dtype=float)
    if np.any(f < 0):
        raise ValueError("force must be non-negative")
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    s = np.maximum(0.0, (f - model.lam * np.power(d, model.alpha)) / model.c)
    return float(s) if s.ndim == 0 else s


def tvi_force(model: AttenuationModel, level, distance):
    """Force on the isoline of reading ``level`` at ``distance``: ``c*S + lam*d**alpha``."""
    s = np.asarray(level, dtype=float)
    d = np.asarray(distance, dtype=float)
    if np.any(s < model.s_min):
        raise ValueError(f"isoline undefined below detection threshold s_min={model.s_min}")
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    f = model.c * s + model.lam * np.power(d, model.alpha)
    return float(f) if f.ndim == 0 else f


def is_active(model: AttenuationModel, reading) -> np.ndarray:
    """Detectable readings: positive and at or above ``s_min`` (boundary counts)."""
    r = np.asarray(reading, dtype=float)
    tol = 1e-9 * max(1.0, model.s_min)
    return (r > 0) & (r >= model.s_min - tol)


def mean_readings(model: AttenuationModel, layout: TaxelLayout,
                  contacts: Sequence[ContactEvent]) -> np.ndarray:
    """Noiseless readings of every taxel; multiple contacts superpose additively."""
    if len(layout) == 0:
        raise ValueError("layout is empty")
    total = np.zeros(len(layout))
    for contact in contacts:
        total += forward_response(model, contact.force, layout.distances(contact.position))
    return total


def noisy_readings(model: AttenuationModel, noise: NoiseModel, layout: TaxelLayout,
                   contacts: Sequence[ContactEvent], stream: int = 0) -> np.ndarray:
    """Mean readings plus one Gaussian draw per taxel, keyed on ``(noise.seed, stream)``."""
    readings = mean_readings(model, layout, contacts)
    if noise.sigma_s > 0:
        readings = readings + noise.sigma_s * noise.rng(stream).standard_normal(len(layout))
    return readings


def save_setup(path: str | Path, model: AttenuationModel, noise: NoiseModel,
               layout: TaxelLayout) -> None:
    """Write model, noise and layout to one flat JSON document."""
    doc = {**model.to_dict(), "sigma_s": noise.sigma_s, "sigma_sf": noise.sigma_sf,
           "seed": noise.seed, **layout.to_dict()}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_setup(path: str | Path) -> tuple[AttenuationModel, NoiseModel, TaxelLayout]:
    doc = json.loads(Path(path).read_text())
    return setup_from_dict(doc)


def setup_from_dict(doc: dict[str, Any]) -> tuple[AttenuationModel, NoiseModel, TaxelLayout]:
    model = AttenuationModel.from_dict(doc)
    noise = NoiseModel(sigma_s=float(doc.get("sigma_s", 0.0)),
                       sigma_sf=float(doc.get("sigma_sf", 0.0)),
                       seed=int(doc.get("seed", 0)))
    return model, noise, TaxelLayout.from_dict(doc)
