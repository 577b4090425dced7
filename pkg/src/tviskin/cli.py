"""Command-line front end: config-driven simulation, analysis, fitting and learning.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric or runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import report
from .calib import calibrate_dataset, write_fit_json
from .errors import TVIError
from .geometry import corner_uncertainty, feasible_region, sensitivity_map
from .infer import (EmptySplit, Regressor, RegressorSpec, band_inversions, evaluate, mc_oracle,
                    train_regressor)
from .model import AttenuationModel, ContactEvent, NoiseModel, TaxelLayout, mean_readings
from .superres import (device_omega, discrimination_sweep, omega_analytic_1d, separation_summary)
from .synth import IndentationLaw, ScanDataset, ScanProtocol, generate_scan, make_layout

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class ConfigError(Exception):
    pass


class RuntimeFailure(Exception):
    pass


# -- config schema ----------------------------------------------------------------------

def _num(positive=False, nonneg=False):
    def check(v, where):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            raise ConfigError(f"{where} must be a number")
        if positive and not v > 0:
            raise ConfigError(f"{where} must be > 0")
        if nonneg and v < 0:
            raise ConfigError(f"{where} must be >= 0")
        return float(v)
    return check


def _int(minimum=None):
    def check(v, where):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{where} must be an integer")
        if minimum is not None and v < minimum:
            raise ConfigError(f"{where} must be >= {minimum}")
        return v
    return check


def _str(choices=None):
    def check(v, where):
        if not isinstance(v, str):
            raise ConfigError(f"{where} must be a string")
        if choices and v not in choices:
            raise ConfigError(f"{where} must be one of {sorted(choices)}")
        return v
    return check


def _list(item=None, optional=False):
    def check(v, where):
        if v is None and optional:
            return None
        if not isinstance(v, list):
            raise ConfigError(f"{where} must be a list")
        return [item(x, f"{where}[{i}]") for i, x in enumerate(v)] if item else v
    return check


def _count(v, where):
    if isinstance(v, list):
        return [_int(1)(x, f"{where}[{i}]") for i, x in enumerate(v)]
    return _int(0)(v, where)


def _pair(v, where):
    v = _list(_num())(v, where)
    if len(v) != 2 or not v[0] < v[1]:
        raise ConfigError(f"{where} must be [low, high] with low < high")
    return v


def _optional(check):
    return lambda v, where: None if v is None else check(v, where)


def _positions(v, where):
    v = _list()(v, where)
    for i, p in enumerate(v):
        if isinstance(p, list):
            _list(_num())(p, f"{where}[{i}]")
        else:
            _num()(p, f"{where}[{i}]")
    return v


SCHEMA = {
    "model": ({"c": _num(positive=True), "lambda": _num(positive=True),
               "alpha": _num(positive=True), "s_min": _num(nonneg=True)}, {"lambda", "alpha"}),
    "noise": ({"sigma_s": _num(nonneg=True), "sigma_sf": _num(nonneg=True)}, {"sigma_s"}),
    "layout": ({"kind": _str({"line", "grid", "hex", "explicit"}), "spacing": _num(positive=True),
                "count": _count, "positions": _positions}, {"kind"}),
    "protocol": ({"kind": _str({"line-1d", "grid-2d"}), "extent": _num(nonneg=True),
                  "positions_count": _count, "depth_steps": _int(1),
                  "depth_increment": _num(positive=True),
                  "first_depth": _optional(_num(nonneg=True)), "dwell": _num(nonneg=True)},
                 {"kind"}),
    "law": ({"k": _num(positive=True), "p": _num(positive=True)}, set()),
    "fit": ({"levels": _list(_num(), optional=True), "taxels": _list(_int(0), optional=True)},
            set()),
    "train": ({"hidden_layers": _int(1), "width": _int(1), "learning_rate": _num(positive=True),
               "adam_epsilon": _num(positive=True), "batch_size": _int(1),
               "iterations": _int(0), "train_extent": _optional(_pair), "eval_every": _int(1)},
              set()),
    "evaluate": ({"force_bands": _list(_num(nonneg=True), optional=True),
                  "cell": _optional(_num(positive=True)), "region": _optional(_pair)}, set()),
    "analyze": ({"alphas": _list(_num(positive=True), optional=True),
                 "force": _optional(_num(positive=True)), "points": _int(2),
                 "grid": _int(2)}, set()),
    "oracle": ({"position": _positions, "force": _num(positive=True), "trials": _int(2)},
               {"position", "force"}),
    "discriminate": ({"forces": _list(_num(positive=True)), "step": _num(positive=True),
                      "extent": _optional(_pair)}, {"forces"}),
}
TOP_LEVEL = {"seed": _int(0), "out": _str()}

NEEDS = {
    "simulate": ("model", "noise", "layout"),
    "analyze": ("model", "noise", "layout"),
    "fit": (),
    "train": (),
    "evaluate": (),
    "oracle": ("model", "noise", "layout", "oracle"),
    "discriminate": ("model", "layout", "discriminate"),
}


def validate_config(doc, command: str) -> dict:
    """Check a config document against the schema; unknown keys are errors."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    out = {}
    for key, value in doc.items():
        if key in TOP_LEVEL:
            out[key] = TOP_LEVEL[key](value, key)
        elif key in SCHEMA:
            fields, required = SCHEMA[key]
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be an object")
            unknown = sorted(set(value) - set(fields))
            if unknown:
                raise ConfigError(f"unknown key(s) in {key!r}: {', '.join(unknown)}")
            missing = sorted(required - set(value))
            if missing:
                raise ConfigError(f"missing key(s) in {key!r}: {', '.join(missing)}")
            out[key] = {k: fields[k](v, f"{key}.{k}") for k, v in value.items()}
        else:
            raise ConfigError(f"unknown config section {key!r}")
    missing = [s for s in NEEDS[command] if s not in out]
    if missing:
        raise ConfigError(f"missing config section(s) for {command}: {', '.join(missing)}")
    return out


def load_config(path, command: str) -> dict:
    if path is None:
        return validate_config({}, command)
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return validate_config(doc, command)


# -- config -> domain objects ----------------------------------------------------------------

def build_model(cfg) -> AttenuationModel:
    return AttenuationModel.from_dict({"c": 1.0, "s_min": 0.0, **cfg["model"]})


def build_noise(cfg, seed: int) -> NoiseModel:
    n = cfg["noise"]
    return NoiseModel(n["sigma_s"], n.get("sigma_sf", 0.0), seed=seed)


def build_layout(cfg) -> TaxelLayout:
    lay = cfg["layout"]
    if lay["kind"] == "explicit" and not lay.get("positions"):
        raise ConfigError("layout.positions must list at least one taxel")
    if lay.get("count") == 0 or lay.get("count") == []:
        raise ConfigError("layout.count must be >= 1")
    return make_layout(lay["kind"], lay.get("spacing", 6.5), lay.get("count"),
                       lay.get("positions"))


def build_protocol(cfg, layout: TaxelLayout) -> ScanProtocol:
    if "protocol" not in cfg:
        return ScanProtocol.default_1d() if layout.dimensionality == 1 else ScanProtocol.default_2d()
    p = dict(cfg["protocol"])
    default = ScanProtocol.default_1d() if p["kind"] == "line-1d" else ScanProtocol.default_2d()
    return ScanProtocol.from_dict({**default.to_dict(), **p})


def _dim_check(layout: TaxelLayout, protocol: ScanProtocol) -> None:
    if layout.dimensionality != protocol.dimensionality:
        raise ConfigError(f"protocol {protocol.kind!r} does not match a "
                          f"{layout.dimensionality}D layout")


# -- output bookkeeping ------------------------------------------------------------------------

class Outputs:
    """Tracks written files so a failed command can remove them."""

    def __init__(self, root: Path):
        self.root = root
        self.created_root = not root.exists()
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        p = self.root / name
        self.files.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.files:
            if p.exists():
                p.unlink()
        if self.created_root and self.root.exists() and not any(self.root.iterdir()):
            self.root.rmdir()


def _step(name: str, func, *args, **kwargs):
    """Run one numeric operation, naming it if it fails."""
    try:
        return func(*args, **kwargs)
    except (TVIError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise RuntimeFailure(f"{name} failed: {type(exc).__name__}: {exc}") from exc


def _load_dataset(path) -> ScanDataset:
    if path is None:
        raise ConfigError("--dataset is required")
    try:
        return ScanDataset.load(path)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot load dataset {path}: {exc}") from exc


# -- commands ------------------------------------------------------------------------------------

def cmd_simulate(cfg, args, out: Outputs) -> None:
    model, layout = build_model(cfg), build_layout(cfg)
    noise = build_noise(cfg, args.seed)
    protocol = build_protocol(cfg, layout)
    _dim_check(layout, protocol)
    law = IndentationLaw(**cfg.get("law", {}))
    ds = _step("generate_scan", generate_scan, model, noise, layout, protocol, law, args.seed)
    csv_path = out.path("scan.csv")
    out.path("scan.json")
    ds.save(csv_path)
    print(f"wrote {len(ds)} rows")


def _pair_profile(model, D, sigma_s, force, points):
    d = np.linspace(0.02 * D, 0.98 * D, points)
    pair = np.array([0.0, D])
    rows = []
    for p in d:
        readings = mean_readings(model, TaxelLayout(pair), [ContactEvent(float(p), force)])
        est = _step("corner_uncertainty", corner_uncertainty, model, pair, readings, sigma_s,
                    near=float(p))
        fs = model.c * model.s_min + model.lam * max(p, D - p) ** model.alpha
        rows.append([model.alpha, p, est.sigma_p, est.sigma_f, fs])
    return np.array(rows)


def cmd_analyze(cfg, args, out: Outputs) -> None:
    model, layout = build_model(cfg), build_layout(cfg)
    noise = build_noise(cfg, args.seed)
    opts = cfg.get("analyze", {})
    D = layout.nominal_spacing if len(layout) > 1 else 1.0
    summary = {"spacing": D, "taxels": len(layout)}

    k = min(len(layout), 2 if layout.dimensionality == 1 else 3)
    field = _step("sensitivity_map", sensitivity_map, model, layout, k)
    if layout.dimensionality == 1:
        report.write_csv(out.path("sensitivity.csv"), ["x_mm", "force_N"],
                         zip(field.grid, field.values))
        report.line_chart(out.path("sensitivity.svg"), {f"F_S (k={k})": (field.grid, field.values)},
                          "Force needed to reach k taxels", "position (mm)", "force (N)")
    else:
        report.write_csv(out.path("sensitivity.csv"), ["x_mm", "y_mm", "force_N"],
                         [[*p, v] for p, v in zip(field.grid, field.values)])
        report.heatmap(out.path("sensitivity.svg"), field.grid[:, 0], field.grid[:, 1],
                       field.values, f"Force needed to reach {k} taxels")

    alphas = opts.get("alphas") or [model.alpha]
    if layout.dimensionality == 1:
        points = opts.get("points", 49)
        profiles, series = [], {}
        flat = {}
        for a in alphas:
            m = replace(model, alpha=a)
            force = opts.get("force") or (m.c * m.s_min + 2 * m.lam * D ** a)
            prof = _pair_profile(m, D, noise.sigma_s, force, points)
            profiles.append(prof)
            series[f"sigma_P alpha={a:g}"] = (prof[:, 1], prof[:, 2])
            finite = prof[np.isfinite(prof[:, 2]), 2]
            flat[f"{a:g}"] = {
                "sigma_p_min": float(finite.min()) if finite.size else None,
                "sigma_p_max": float(finite.max()) if finite.size else None,
                "relative_variation": float(np.ptp(finite) / finite.mean()) if finite.size else None,
                "sigma_f_mean": float(np.mean(prof[np.isfinite(prof[:, 3]), 3])),
            }
        report.write_csv(out.path("sigma_profile.csv"),
                         ["alpha", "d_mm", "sigma_p_mm", "sigma_f_N", "f_s_N"],
                         np.vstack(profiles))
        report.line_chart(out.path("sigma_profile.svg"), series,
                          "Position uncertainty between two taxels", "distance from taxel (mm)",
                          "sigma_P (mm)")
        summary["profiles"] = flat
    else:
        n = opts.get("grid", 5)
        box = layout.bounds()
        force = opts.get("force") or (model.c * model.s_min + 2 * model.lam * D ** model.alpha)
        gx, gy = (np.linspace(lo, hi, n) if hi > lo else np.array([lo]) for lo, hi in box)
        rows = []
        for x in gx:
            for y in gy:
                readings = mean_readings(model, layout, [ContactEvent((float(x), float(y)), force)])
                try:
                    est = feasible_region(model, noise, layout, readings)
                    rows.append([x, y, est.sigma_px, est.sigma_py, est.sigma_f])
                except TVIError:
                    rows.append([x, y, np.inf, np.inf, np.inf])
        rows = np.array(rows)
        report.write_csv(out.path("sigma_map.csv"),
                         ["x_mm", "y_mm", "sigma_px_mm", "sigma_py_mm", "sigma_f_N"], rows)
        report.heatmap(out.path("sigma_map.svg"), rows[:, 0], rows[:, 1],
                       np.hypot(rows[:, 2], rows[:, 3]), "Position uncertainty (mm)")
        centre = layout.positions.mean(axis=0)
        readings = mean_readings(model, layout, [ContactEvent(tuple(centre), force)])
        est = _step("feasible_region", feasible_region, model, noise, layout, readings)
        sx, sy = est.sigma_px, est.sigma_py
        summary["centre"] = {"sigma_px": sx, "sigma_py": sy,
                             "anisotropy": float(max(sx, sy) / min(sx, sy))}
        if len(layout) == 2:
            axis = np.diff(layout.positions, axis=0)[0]
            along_x = abs(axis[0]) >= abs(axis[1])
            summary["centre"]["transverse_axial_ratio"] = float(sy / sx if along_x else sx / sy)

    if noise.sigma_s > 0 or noise.sigma_sf > 0:
        table = {"c": model.c, "g": [0.0, 1.0], "lambda": [model.lam] * 2,
                 "alpha": [model.alpha] * 2}
        rep = _step("device_omega", device_omega, [table] * len(layout), noise.sigma_sf,
                    noise.sigma_s, D)
        curve = np.array(rep.per_force_curve)
        report.write_csv(out.path("omega_curve.csv"), ["force_N", "omega"], curve)
        report.line_chart(out.path("omega_curve.svg"), {"theory": (curve[:, 0], curve[:, 1])},
                          "Super-resolution factor", "force threshold (N)", "omega")
        summary["omega_device"] = rep.omega
        if noise.sigma_s > 0 and noise.sigma_sf == 0 and model.alpha >= 2:
            summary["omega_analytic"] = omega_analytic_1d(model, D, noise.sigma_s)
    report.write_json(out.path("analysis.json"), summary)


def cmd_fit(cfg, args, out: Outputs) -> None:
    ds = _load_dataset(args.dataset)
    opts = cfg.get("fit", {})
    device, per = _step("calibrate_dataset", calibrate_dataset, ds, opts.get("taxels"),
                        opts.get("levels"))
    write_fit_json(out.path("fit.json"), device, per)
    print(f"c={device.c:.6g}, lambda={device.lam:.6g}, alpha={device.alpha:.6g}")


def _train_spec(cfg, args, target) -> RegressorSpec:
    opts = dict(cfg.get("train", {}))
    if opts.get("train_extent") is not None:
        opts["train_extent"] = tuple(opts["train_extent"])
    return RegressorSpec(target=target, seed=args.seed, **opts)


def cmd_train(cfg, args, out: Outputs) -> None:
    ds = _load_dataset(args.dataset)
    curves = {}
    for target in ("position", "force"):
        reg = _step(f"train_regressor[{target}]", train_regressor, ds, _train_spec(cfg, args, target))
        reg.save(out.path(f"{target}.json"))
        curves[target] = reg.history
        print(f"{target}: train_rmse={reg.history['train_rmse']:.6g}, "
              f"val_rmse={reg.history['val_rmse']}")
    it = np.asarray(curves["position"]["val_iteration"])
    report.write_csv(out.path("loss.csv"), ["iteration", "position_val_loss", "force_val_loss"],
                     zip(it, curves["position"]["val_loss"], curves["force"]["val_loss"]))
    report.line_chart(out.path("loss.svg"),
                      {t: (it, np.log10(np.asarray(curves[t]["val_loss"]))) for t in curves},
                      "Validation loss", "iteration", "log10 loss (scaled units)")


def cmd_evaluate(cfg, args, out: Outputs) -> None:
    ds = _load_dataset(args.dataset)
    if args.weights is None:
        raise ConfigError("--weights is required")
    wdir = Path(args.weights)
    try:
        reg_pos = Regressor.load(wdir / "position.json")
        force_path = wdir / "force.json"
        reg_force = Regressor.load(force_path) if force_path.exists() else None
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot load weights from {wdir}: {exc}") from exc
    opts = cfg.get("evaluate", {})
    try:
        emap, rep = evaluate(reg_pos, reg_force, ds, opts.get("force_bands"),
                             region=opts.get("region"), cell=opts.get("cell"))
    except EmptySplit as exc:
        raise ConfigError(str(exc)) from exc
    except TVIError as exc:
        raise RuntimeFailure(f"evaluate failed: {exc}") from exc
    head, rows = emap.table()
    report.write_csv(out.path("error_map.csv"), head, rows)
    cells = emap.cells
    pooled = np.sqrt(np.nansum(emap.position_rmse ** 2 * emap.counts, axis=0)
                     / np.maximum(emap.counts.sum(axis=0), 1))
    pooled[emap.counts.sum(axis=0) == 0] = np.nan
    if cells.shape[1] == 1:
        report.line_chart(out.path("error_map.svg"), {"position RMSE": (cells[:, 0], pooled)},
                          "Position error along the line", "position (mm)", "RMSE (mm)")
    else:
        report.heatmap(out.path("error_map.svg"), cells[:, 0], cells[:, 1], pooled,
                       "Position RMSE (mm)")
    curve = np.array(rep.per_force_curve)
    theory = rep.extra["omega_theory"]
    report.write_csv(out.path("omega_curve.csv"), ["force_N", "omega_ml", "omega_theory"],
                     [[f, o, theory] for f, o in curve])
    report.line_chart(out.path("omega_curve.svg"),
                      {"machine learning": (curve[:, 0], curve[:, 1]),
                       "theory": (curve[:, 0], np.full(len(curve), theory))},
                      "Super-resolution factor by force", "force (N)", "omega")
    report.write_json(out.path("omega.json"), rep.to_dict())
    for note in rep.notes:
        print(f"note: {note}")
    print(f"ratio={rep.extra['ratio']:.4g}, band_inversions={band_inversions(rep.per_force_curve)}")
    return f"omega_ml={rep.omega:.4g}, omega_theory={theory:.4g}"


def cmd_oracle(cfg, args, out: Outputs) -> None:
    model, layout = build_model(cfg), build_layout(cfg)
    noise = build_noise(cfg, args.seed)
    o = cfg["oracle"]
    pos = o["position"]
    if layout.dimensionality == 2:
        if not (isinstance(pos, list) and len(pos) == 1 and isinstance(pos[0], list)
                and len(pos[0]) == 2):
            raise ConfigError("oracle.position must be [[x, y]] for a 2D layout")
        pos = tuple(pos[0])
    else:
        if len(pos) != 1 or isinstance(pos[0], list):
            raise ConfigError("oracle.position must be [x] for a 1D layout")
        pos = pos[0]
    res = _step("mc_oracle", mc_oracle, model, noise, layout, ContactEvent(pos, o["force"]),
                o.get("trials", 10_000), args.seed, args.threads)
    report.write_json(out.path("oracle.json"), res.to_dict())
    print(f"sigma_p={res.sigma_p}, sigma_f={res.sigma_f:.6g}, failed={res.failed}")


def cmd_discriminate(cfg, args, out: Outputs) -> None:
    model, layout = build_model(cfg), build_layout(cfg)
    if layout.dimensionality != 1:
        raise ConfigError("discriminate needs a 1D layout")
    opts = cfg["discriminate"]
    sigma = cfg.get("noise", {}).get("sigma_s", 0.0)
    extent = tuple(opts["extent"]) if opts.get("extent") else None
    rows = _step("discrimination_sweep", discrimination_sweep, model, layout, opts["forces"],
                 opts.get("step", 0.5), sigma, extent)
    head = ["force_N", "p1_mm", "p2_mm", "separation_mm", "rule", "oracle", "n_between",
            "n_shared", "n_exclusive_1", "n_exclusive_2", "n_spurious", "missed"]
    table = [[r["force"], r["p1"], r["p2"], r["separation"], int(r["rule"]), int(r["oracle"]),
              r["n_between"], r["n_shared"], *r["n_exclusive"], len(r["spurious"]), r["missed"]]
             for r in rows]
    report.write_csv(out.path("discrimination.csv"), head, table)
    report.write_csv(out.path("disagreements.csv"), head,
                     [t for t, r in zip(table, rows) if r["rule"] != r["oracle"]])
    agree = float(np.mean([r["rule"] == r["oracle"] for r in rows]))
    summary = {"agreement": agree, "configurations": len(rows),
               "oracle": separation_summary(rows, "oracle"),
               "rule": separation_summary(rows, "rule")}
    report.write_json(out.path("discrimination_summary.json"), summary)
    for s in summary["oracle"]:
        print(f"force={s['force']:g}: fraction={s['fraction']:.3f}, "
              f"min_separation={s['min_separation']:g}")
    print(f"agreement={agree:.4f}")


COMMANDS = {
    "simulate": cmd_simulate, "analyze": cmd_analyze, "fit": cmd_fit, "train": cmd_train,
    "evaluate": cmd_evaluate, "oracle": cmd_oracle, "discriminate": cmd_discriminate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON pipeline config")
    common.add_argument("--seed", type=int, help="seed for all randomness (overrides config)")
    common.add_argument("--out", help="output directory (overrides config; default: out)")
    common.add_argument("--threads", type=int, help="worker threads (default: CPU count)")
    parser = argparse.ArgumentParser(prog="tviskin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "generate a synthetic scan (CSV + JSON sidecar)",
        "analyze": "sensitivity, uncertainty and super-resolution reports",
        "fit": "calibrate attenuation parameters from a scan",
        "train": "train position and force regressors",
        "evaluate": "error map and achieved super-resolution factor",
        "oracle": "Monte-Carlo least-squares scatter for one contact",
        "discriminate": "two-contact rule versus oracle sweep",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        if name in ("fit", "train", "evaluate"):
            p.add_argument("--dataset", help="scan CSV (sidecar JSON next to it)")
        if name == "evaluate":
            p.add_argument("--weights", help="directory holding position.json [and force.json]")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    out = None
    try:
        cfg = load_config(args.config, args.command)
        if args.seed is None:
            args.seed = cfg.get("seed", 0)
        if args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        if args.threads is None:
            args.threads = os.cpu_count() or 1
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = Outputs(Path(args.out or cfg.get("out", "out")))
        final = COMMANDS[args.command](cfg, args, out)
    except RuntimeFailure as exc:
        if out:
            out.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (TVIError, ArithmeticError, MemoryError) as exc:
        if out:
            out.cleanup()
        print(f"error: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ConfigError, ValueError, TypeError) as exc:
        if out:
            out.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for p in out.files:
        print(p)
    if final:
        print(final)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
