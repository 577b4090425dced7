"""Monte-Carlo maximum-likelihood estimate of localisation scatter."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import NonConvergent
from ..model import AttenuationModel, ContactEvent, NoiseModel, TaxelLayout, mean_readings

STEP_TOL = 1e-7
MAX_ITER = 100
FAIL_LIMIT = 0.05
CHUNK = 1000


@dataclass(frozen=True)
class OracleResult:
    """Sample statistics of the least-squares estimates over noisy trials.

    ``sigma_p`` is a scalar in 1D and the per-axis pair ``(sx, sy)`` in 2D.
    """

    sigma_p: float | tuple[float, float]
    sigma_f: float
    mean_position: float | tuple[float, float]
    mean_force: float
    trials: int
    failed: int

    @property
    def sigma_p_total(self) -> float:
        return float(np.hypot(*self.sigma_p)) if isinstance(self.sigma_p, tuple) else self.sigma_p

    def to_dict(self) -> dict:
        as_list = lambda v: list(v) if isinstance(v, tuple) else v  # noqa: E731
        return {"sigma_p": as_list(self.sigma_p), "sigma_f": self.sigma_f,
                "mean_position": as_list(self.mean_position), "mean_force": self.mean_force,
                "trials": self.trials, "failed": self.failed}


def _predict(model, taxels, theta):
    """Clamped responses and Jacobian for a batch of parameter vectors.

    ``theta`` is (T, k) with position coordinates first and force last.
    """
    dim = taxels.shape[1]
    delta = theta[:, None, :dim] - taxels[None]
    d = np.sqrt(np.sum(delta ** 2, axis=2))
    a = model.alpha
    raw = (theta[:, None, dim] - model.lam * d ** a) / model.c
    on = raw > 0
    jac = np.zeros(raw.shape + (dim + 1,))
    jac[..., dim] = on / model.c
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(d > 0, model.lam * a * d ** (a - 2) / model.c, 0.0)
    jac[..., :dim] = -(on * slope)[..., None] * delta
    return np.where(on, raw, 0.0), jac


def _grid_start(model, taxels, readings, lo, hi, step, sigma_s):
    """Best grid position per trial, force solved in closed form at each node."""
    dim = taxels.shape[1]
    axes = [np.arange(lo[k], hi[k] + step / 2, step) for k in range(dim)]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    dpow = np.sum((nodes[:, None, :] - taxels[None]) ** 2, axis=2) ** (model.alpha / 2)
    # force from the taxels that clearly respond, then the clamped cost on all
    thresh = max(3.0 * sigma_s, model.s_min, 1e-12)
    act = readings > thresh
    act[act.sum(axis=1) == 0, :] = True
    na = act.sum(axis=1)[:, None]
    cr = np.where(act, model.c * readings, 0.0)
    f = (cr.sum(axis=1)[:, None] + act.astype(float) @ (model.lam * dpow).T) / na
    f = np.maximum(f, 0.0)
    best_cost = np.full(len(readings), np.inf)
    best = np.zeros((len(readings), dim + 1))
    for j in range(len(nodes)):
        pred = np.maximum(0.0, (f[:, j:j + 1] - model.lam * dpow[j]) / model.c)
        cost = np.sum((readings - pred) ** 2, axis=1)
        better = cost < best_cost
        best_cost[better] = cost[better]
        best[better, :dim] = nodes[j]
        best[better, dim] = f[better, j]
    return best


def _gauss_newton(model, taxels, readings, theta):
    """Batched Gauss-Newton with step halving; returns (theta, converged)."""
    theta = theta.copy()
    done = np.zeros(len(theta), dtype=bool)
    ok = np.zeros(len(theta), dtype=bool)
    pred, jac = _predict(model, taxels, theta)
    cost = np.sum((readings - pred) ** 2, axis=1)
    for _ in range(MAX_ITER):
        live = ~done
        if not live.any():
            break
        j = jac[live]
        res = readings[live] - pred[live]
        step = np.einsum("tji,ti->tj", np.linalg.pinv(j), res)
        t = np.ones(live.sum())
        idx = np.flatnonzero(live)
        pending = np.ones(len(idx), dtype=bool)
        new_theta = theta[idx].copy()
        new_cost = cost[idx].copy()
        for _ in range(40):
            trial = theta[idx] + t[:, None] * step
            p_try, _ = _predict(model, taxels, trial)
            c_try = np.sum((readings[idx] - p_try) ** 2, axis=1)
            accept = pending & (c_try <= cost[idx])
            new_theta[accept] = trial[accept]
            new_cost[accept] = c_try[accept]
            pending &= ~accept
            if not pending.any():
                break
            t[pending] *= 0.5
        moved = np.max(np.abs(t[:, None] * step), axis=1)
        small = moved <= STEP_TOL
        theta[idx] = new_theta
        cost[idx] = new_cost
        # a step that cannot reduce the cost is only acceptable once it is tiny
        finished = small | (pending & (moved <= 10 * STEP_TOL))
        ok[idx[finished]] = True
        done[idx[finished]] = True
        pred, jac = _predict(model, taxels, theta)
    # singular normal equations at the solution mean the contact is not pinned down
    rank = np.linalg.matrix_rank(jac)
    ok &= rank == theta.shape[1]
    return theta, ok


def solve_contact(model: AttenuationModel, layout: TaxelLayout, readings,
                  sigma_s: float = 0.0, resolution: float | None = None):
    """Least-squares (position, force) for each row of ``readings``.

    Returns:
        (theta, converged) where theta holds position coordinates then force.
    """
    readings = np.atleast_2d(np.asarray(readings, dtype=float))
    taxels = layout.positions.reshape(len(layout), -1)
    D = layout.nominal_spacing
    box = layout.bounds()
    lo, hi = box[:, 0] - D, box[:, 1] + D
    fine = D / 50 if resolution is None else resolution
    if taxels.shape[1] == 1:
        start = _grid_start(model, taxels, readings, lo, hi, fine, sigma_s)
    else:
        # planar grids are searched coarse first, then at full resolution nearby
        start = _grid_start(model, taxels, readings, lo, hi, D / 10, sigma_s)
        refined = np.empty_like(start)
        for i in range(len(start)):
            c = start[i, :2]
            refined[i] = _grid_start(model, taxels, readings[i:i + 1], c - D / 5, c + D / 5,
                                     fine, sigma_s)[0]
        start = refined
    return _gauss_newton(model, taxels, readings, start)


def mc_oracle(model: AttenuationModel, noise: NoiseModel, layout: TaxelLayout,
              contact: ContactEvent, trials: int = 10_000, seed: int | None = None,
              workers: int = 1) -> OracleResult:
    """Scatter of least-squares estimates over ``trials`` noisy readings.

    Noise for trial ``t`` is drawn from stream ``t`` of ``seed`` (default
    ``noise.seed``), so any subset of trials is reproducible on its own and the
    result does not depend on ``workers``.

    Raises:
        NonConvergent: more than 5% of trials failed to converge.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    seed = noise.seed if seed is None else seed
    mean = mean_readings(model, layout, [contact])
    n = len(layout)

    def run(start):
        count = min(CHUNK, trials - start)
        if noise.sigma_s > 0:
            draws = np.stack([np.random.default_rng([int(seed), start + t]).standard_normal(n)
                              for t in range(count)])
            readings = mean + noise.sigma_s * draws
        else:
            readings = np.tile(mean, (count, 1))
        return solve_contact(model, layout, readings, noise.sigma_s)

    starts = range(0, trials, CHUNK)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    theta = np.concatenate([p[0] for p in parts])
    ok = np.concatenate([p[1] for p in parts])
    failed = int((~ok).sum())
    if failed > FAIL_LIMIT * trials:
        raise NonConvergent(f"{failed} of {trials} trials did not converge")
    good = theta[ok]
    std = good.std(axis=0, ddof=1)
    avg = good.mean(axis=0)
    if good.shape[1] == 2:
        return OracleResult(float(std[0]), float(std[1]), float(avg[0]), float(avg[1]),
                            trials, failed)
    return OracleResult((float(std[0]), float(std[1])), float(std[2]),
                        (float(avg[0]), float(avg[1])), float(avg[2]), trials, failed)
