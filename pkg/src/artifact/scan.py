"""Experiment runner: figure-style scans, tongue diagrams, recurrent sets and the error ladder.

Every experiment writes CSV files (with '#'-prefixed metadata lines), optional
PPM/PGM images and a ``manifest.json``. Data files depend only on the
configuration and seed, never on the worker count; the manifest additionally
records wall time.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import manifold, plmap, sawtooth, sectors, shrink
from .symbolic import RotationalParams

log = logging.getLogger(__name__)

THREADS_ENV = "ARTIFACT_THREADS"
KINDS = ("fig1", "fig2-zoom", "fig4-tongues", "fig6-recurrent", "theorem-ladder")

# located shrinking points used as defaults; the guesses converge in a few Newton steps
KNOWN_POINTS = {
    "3,3,8": (-1.3604, 0.1398),
    "2,2,5": (-2.0, 0.2),
}


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


# ---------------------------------------------------------------------------
# file formats


def write_csv(path, header, rows, meta: dict | None = None) -> Path:
    """CSV with leading '# key: value' lines. Floats use repr so values round-trip."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k}: {json.dumps(v, sort_keys=True, default=_jsonable)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_, bool)):
        return int(bool(v))
    return v


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return str(v)


def read_csv(path) -> tuple[dict, list[str], list[dict]]:
    """Inverse of ``write_csv``: (metadata, header, rows); numeric cells become int or float."""
    meta, lines = {}, []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(": ")
                try:
                    meta[key] = json.loads(val)
                except json.JSONDecodeError:
                    meta[key] = val
            else:
                lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    rows = [{h: _parse(v) for h, v in zip(header, r)} for r in reader]
    return meta, header, rows


def _parse(s: str):
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def write_ppm(path, rgb: np.ndarray) -> Path:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.tobytes())
    return path


def write_pgm(path, gray: np.ndarray) -> Path:
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    h, w = gray.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(gray.tobytes())
    return path


def read_pnm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    magic, w, h = parts[0], int(parts[1]), int(parts[2])
    body = parts[4]
    if magic == b"P6":
        return np.frombuffer(body, np.uint8).reshape(h, w, 3)
    if magic == b"P5":
        return np.frombuffer(body, np.uint8).reshape(h, w)
    raise ValueError(f"unsupported image type {magic!r}")


def label_colour(num: int, den: int) -> tuple[int, int, int]:
    """Stable colour for a rotation number; black when unlabelled."""
    if den <= 0:
        return (0, 0, 0)
    digest = hashlib.sha1(f"{num}/{den}".encode()).digest()
    return tuple(64 + b % 192 for b in digest[:3])


def label_image(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    img = np.zeros(num.shape + (3,), np.uint8)
    for idx in np.ndindex(num.shape):
        img[idx] = label_colour(int(num[idx]), int(den[idx]))
    # rows go up the page
    return img[::-1]


def gray_image(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    v = np.nan_to_num(np.asarray(values, float), nan=lo)
    g = np.clip((v - lo) / (hi - lo), 0, 1) * 255
    return np.round(g).astype(np.uint8)[::-1]


# ---------------------------------------------------------------------------
# configuration


@dataclass
class Fig1Config:
    slice: str = "bcnf3-fig1"
    x_min: float = -3.0
    x_max: float = 0.0
    nx: int = 128
    y_min: float = -0.3
    y_max: float = 0.6
    ny: int = 32
    mode: str = "cycle-solve"
    p_max: int = 50


@dataclass
class ZoomConfig:
    slice: str = "bcnf3-fig1"
    base: str = "3,3,8"
    half_x: float = 0.3
    half_y: float = 0.08
    nx: int = 96
    ny: int = 32
    mode: str = "orbit"
    p_max: int = 150
    n_transient: int = 4000
    n_max: int = 8000
    sector_k: int = 2
    sector_dl: int = 0
    n_delta: int = 8
    n_theta: int = 8


@dataclass
class TongueConfig:
    slice: str = "bcnf3-fig1"
    base: str = "3,3,8"
    k: int = 2
    dl: int = 0
    sign: int = 1
    nw: int = 128
    ntheta: int = 48
    n_iter: int = 4000
    lyap_n: int = 2000


@dataclass
class RecurrentConfig:
    slice: str = "bcnf3-fig1"
    base: str = "3,3,8"
    tau_R: float = -1.45
    delta_L: float = 0.1
    k: int = 2
    dl: int = 0
    Q: float = 0.07
    n_points: int = 1000
    n_iter: int = 30


@dataclass
class LadderConfig:
    slice: str = "bcnf3-fig1"
    base: str = "3,3,8"
    ks: str = "2,3,4,6"
    dl: int = 0
    n_grid: int = 400
    c0: float = 0.5


CONFIG_TYPES = {
    "fig1": Fig1Config,
    "fig2-zoom": ZoomConfig,
    "fig4-tongues": TongueConfig,
    "fig6-recurrent": RecurrentConfig,
    "theorem-ladder": LadderConfig,
}


@dataclass
class Experiment:
    kind: str
    params: object
    out_dir: Path = Path("out")
    seed: int = 0
    threads: int = 1
    tolerances: dict = field(default_factory=dict)

    def describe(self) -> dict:
        return {"kind": self.kind, "params": asdict(self.params), "seed": self.seed, "tolerances": self.tolerances}


def _coerce(tp, text: str):
    tp = {"int": int, "float": float, "str": str}.get(tp, tp) if isinstance(tp, str) else tp
    return tp(text)


def make_params(kind: str, overrides: dict | None = None):
    if kind not in CONFIG_TYPES:
        raise ValueError(f"unknown experiment kind {kind!r}; choose from {', '.join(KINDS)}")
    cls = CONFIG_TYPES[kind]
    params = cls()
    known = {f.name: f.type for f in fields(cls)}
    for key, val in (overrides or {}).items():
        if key not in known:
            raise ValueError(f"unknown option {key!r} for {kind}")
        setattr(params, key, _coerce(known[key], str(val)))
    return params


def load_config(path, out_dir=None, seed=None, threads=None, overrides: dict | None = None) -> Experiment:
    """Read an INI-style file with an [experiment] section (kind, out_dir, seed) and a [params] section.

    Entries in ``overrides`` take precedence over the [params] section.
    """
    cp = configparser.ConfigParser()
    cp.optionxform = str  # option names such as Q are case sensitive
    if not cp.read(path):
        raise FileNotFoundError(path)
    if "experiment" not in cp:
        raise ValueError("config needs an [experiment] section")
    ex = cp["experiment"]
    kind = ex.get("kind")
    given = dict(cp["params"]) if "params" in cp else {}
    params = make_params(kind, {**given, **(overrides or {})})
    return Experiment(
        kind,
        params,
        Path(out_dir or ex.get("out_dir", "out")),
        int(seed if seed is not None else ex.get("seed", 0)),
        resolve_threads(threads if threads is not None else ex.getint("threads", fallback=None)),
    )


# ---------------------------------------------------------------------------
# experiments


def _shrink_point(slice_name: str, base: str) -> shrink.ShrinkPointData:
    b = RotationalParams.parse(base)
    guess = KNOWN_POINTS.get(base)
    if guess is None:
        raise ValueError(f"no starting guess stored for base {base}")
    return shrink.locate(plmap.get_slice(slice_name), b, guess)


def _grid_csv(path, grid: plmap.ScanGrid, meta):
    rows = []
    for i, y in enumerate(grid.y):
        for j, x in enumerate(grid.x):
            rows.append((x, y, grid.period[i, j], grid.l[i, j], grid.m[i, j]))
    return write_csv(path, ["x", "y", "period", "l", "m"], rows, meta)


def run_fig1(ex: Experiment) -> dict:
    p: Fig1Config = ex.params
    xs = np.linspace(p.x_min, p.x_max, p.nx)
    ys = np.linspace(p.y_min, p.y_max, p.ny)
    grid = plmap.mode_lock_scan(p.slice, xs, ys, mode=p.mode, threads=ex.threads, p_max=p.p_max)
    meta = {"experiment": "fig1", **asdict(p)}
    out = {
        "grid": _grid_csv(ex.out_dir / "fig1_grid.csv", grid, meta),
        "image": write_ppm(ex.out_dir / "fig1_labels.ppm", label_image(grid.m, grid.period)),
    }
    labels = sorted(grid.labels(), key=lambda s: tuple(map(int, s.split("/"))))
    write_csv(ex.out_dir / "fig1_labels.csv", ["label", "cells"],
              [(lab, int(np.sum((grid.m == int(lab.split('/')[0])) & (grid.period == int(lab.split('/')[1])))))
               for lab in labels], meta)
    return {"files": out, "labels": labels}


def run_zoom(ex: Experiment) -> dict:
    p: ZoomConfig = ex.params
    data = _shrink_point(p.slice, p.base)
    x0, y0 = data.xi
    xs = np.linspace(x0 - p.half_x, x0 + p.half_x, p.nx)
    ys = np.linspace(y0 - p.half_y, y0 + p.half_y, p.ny)
    grid = plmap.mode_lock_scan(p.slice, xs, ys, mode=p.mode, threads=ex.threads, p_max=p.p_max,
                                n_transient=p.n_transient, n_max=p.n_max)
    meta = {"experiment": "fig2-zoom", "shrinking_point": data.xi, **asdict(p)}
    grid_path = _grid_csv(ex.out_dir / "zoom_grid.csv", grid, meta)
    img = write_ppm(ex.out_dir / "zoom_labels.ppm", label_image(grid.m, grid.period))
    # (delta, theta) mesh of one sector mapped into parameter space
    pf = sectors.PolarFrame(data)
    rows, failures = [], 0
    try:
        spec = sectors.sector_spec(data, 1, p.sector_k, p.sector_dl)
    except sectors.SectorError as exc:
        log.warning("sector mesh skipped: %s", exc)
        spec = None
    if spec is not None:
        for th in np.linspace(spec.theta_min, spec.theta_max, p.n_theta):
            d_in = sectors.inner_delta(pf, spec, th)
            for dlt in np.linspace(0, d_in, p.n_delta):
                try:
                    xi = sectors.deltatheta_to_xi(pf, spec, dlt, th)
                    rows.append((dlt, th, xi[0], xi[1], "ok"))
                except (sectors.SectorError, shrink.ShrinkError) as exc:
                    failures += 1
                    rows.append((dlt, th, float("nan"), float("nan"), f"error: {exc}"))
    mesh = write_csv(ex.out_dir / "sector_mesh.csv", ["delta", "theta", "tau_R", "delta_L", "status"], rows, meta)
    return {"files": {"grid": grid_path, "image": img, "mesh": mesh}, "labels": sorted(grid.labels()),
            "mesh_failures": failures}


def run_tongues(ex: Experiment) -> dict:
    p: TongueConfig = ex.params
    data = _shrink_point(p.slice, p.base)
    spec = sectors.sector_spec(data, p.sign, p.k, p.dl)
    rule = sectors.SawtoothRule.from_spec(spec)
    # cell centres: the closed edges have a_L = 1 or a_R = 1 exactly
    ths = spec.theta_min + (np.arange(p.ntheta) + 0.5) / p.ntheta * (spec.theta_max - spec.theta_min)
    ws = (np.arange(p.nw) + 0.5) / p.nw
    grid = sawtooth.tongue_scan(rule, ws, ths, n_iter=p.n_iter, lyap_n=p.lyap_n, threads=ex.threads)
    meta = {"experiment": "fig4-tongues", "theta_min": spec.theta_min, "theta_max": spec.theta_max,
            "ratio": rule.ratio, **asdict(p)}
    rows = []
    for i, th in enumerate(ths):
        a_L, a_R = rule.slopes(th)
        for j, w in enumerate(ws):
            rows.append((th, w, a_L, a_R, grid.num[i, j], grid.den[i, j], grid.multiplier[i, j], grid.lyap[i, j],
                         grid.branches[i, j], int(grid.stability_loss[i, j])))
    path = write_csv(ex.out_dir / "tongues.csv",
                     ["theta", "w", "a_L", "a_R", "num", "den", "multiplier", "lyapunov", "branches", "stability_loss"],
                     rows, meta)
    img = write_ppm(ex.out_dir / "tongues.ppm", label_image(grid.num, grid.den))
    lyap = write_pgm(ex.out_dir / "tongues_lyapunov.pgm", gray_image(grid.lyap, -1.0, 0.5))
    summary = {"files": {"csv": path, "image": img, "lyapunov": lyap},
               "stability_loss_cells": int(grid.stability_loss.sum()),
               "positive_lyapunov_cells": int(np.sum(grid.lyap > 0))}
    # with an unmixed plus rule a_L = 1 exactly at theta_min, where g is a rigid rotation
    a_L, a_R = rule.slopes(spec.theta_min)
    if abs(a_L - 1) < 1e-12:
        summary["rigid_edge_error"] = max(
            abs(sawtooth.rotation_number(sawtooth.SawtoothParams(1.0, a_R, w)).rho - w) for w in (0.2, 0.5, 0.7))
    return summary


def run_recurrent(ex: Experiment) -> dict:
    p: RecurrentConfig = ex.params
    data = _shrink_point(p.slice, p.base)
    f = data.pslice((p.tau_R, p.delta_L))
    frame = manifold.centre_frame(f, data.base)
    rset = manifold.build_recurrent_set(frame, p.k, p.dl, data.rho_max, data.a, p.Q)
    rng = np.random.default_rng(ex.seed)
    pts = rset.sample(rng, p.n_points)
    inside, near_face, dks = 0, 0, {}
    for x in pts:
        res = manifold.return_map(rset, x)
        dks[res.dk] = dks.get(res.dk, 0) + 1
        if rset.contains(res.x):
            inside += 1
        elif rset.distance_to_H(res.x) < 1e-9:
            near_face += 1
    inv = manifold.invariant_set(rset, n_iter=p.n_iter, n_points=min(p.n_points, 200), seed=ex.seed)
    meta = {"experiment": "fig6-recurrent", "h_L": rset.domain.h_L, "h_R": rset.domain.h_R, "R": rset.radius,
            "seed": ex.seed, **asdict(p)}
    cloud = write_csv(ex.out_dir / "lambda_cloud.csv", ["h", "q_norm", "phi"],
                      zip(inv["h"], inv["q_norm"], inv["z"]), meta)
    sample = write_csv(ex.out_dir / "phi_sample.csv", ["x0", "x1", "x2"], pts, meta)
    return {"files": {"cloud": cloud, "sample": sample}, "inside_fraction": inside / p.n_points,
            "outside_near_face": near_face, "dk_counts": {str(k): v for k, v in sorted(dks.items())},
            "coverage": inv["coverage"]}


def _ladder_one(args):
    slice_name, base, k, dl, n_grid, c0 = args
    data = _shrink_point(slice_name, base)
    pf = sectors.PolarFrame(data)
    try:
        rset, params, xi = manifold.sector_recurrent_set(data, pf, k, dl)
        rep = manifold.theorem_verify(rset, params, n_grid=n_grid, c0=c0)
    except (manifold.ManifoldError, sectors.SectorError, shrink.ShrinkError, plmap.SingularCycleError,
            np.linalg.LinAlgError) as exc:  # record and continue with the other k
        log.warning("ladder k=%d failed: %s", k, exc)
        return (k, "error: " + str(exc).replace("\n", " "))
    return (k, rep, xi, rset.domain.width)


def run_ladder(ex: Experiment) -> dict:
    p: LadderConfig = ex.params
    ks = [int(s) for s in p.ks.split(",")]
    jobs = [(p.slice, p.base, k, p.dl, p.n_grid, p.c0) for k in ks]
    if ex.threads > 1:
        with ProcessPoolExecutor(max_workers=ex.threads) as pool:
            results = list(pool.map(_ladder_one, jobs))
    else:
        results = [_ladder_one(j) for j in jobs]
    rows, sups = [], []
    for res in results:
        if isinstance(res[1], str):
            rows.append((res[0],) + (float("nan"),) * 10 + (res[1],))
            continue
        k, rep, xi, width = res
        sups.append(rep.sup_error)
        rows.append((k, xi[0], xi[1], rep.w, rep.a_L, rep.a_R, rep.sup_error, rep.mean_error, rep.sup_error_h,
                     rep.agreement, rep.word_length_ok, "ok"))
    meta = {"experiment": "theorem-ladder", **asdict(p)}
    path = write_csv(ex.out_dir / "ladder.csv",
                     ["k", "tau_R", "delta_L", "w", "a_L", "a_R", "sup_error", "mean_error", "sup_error_h",
                      "dk_agreement", "word_length_ok", "status"], rows, meta)
    mono = bool(len(sups) == len(ks) and all(a > b for a, b in zip(sups, sups[1:])))
    return {"files": {"csv": path}, "sup_errors": sups, "monotone": mono}


RUNNERS = {
    "fig1": run_fig1,
    "fig2-zoom": run_zoom,
    "fig4-tongues": run_tongues,
    "fig6-recurrent": run_recurrent,
    "theorem-ladder": run_ladder,
}


def run(ex: Experiment) -> dict:
    """Run one experiment and write its manifest next to the outputs."""
    ex.out_dir.mkdir(parents=True, exist_ok=True)
    ex.tolerances = {
        "tau_adm": plmap.TAU_ADM,
        "tau_sing": plmap.TAU_SING,
        "snap_tol": sawtooth.SNAP_TOL,
        "close_tol": sawtooth.CLOSE_TOL,
        "zero_eig": manifold.ZERO_EIG,
    }
    t0 = time.perf_counter()
    summary = RUNNERS[ex.kind](ex)
    wall = time.perf_counter() - t0
    files = {k: str(Path(v).name) for k, v in summary.pop("files").items()}
    manifest = {**ex.describe(), "threads": ex.threads, "files": files, "summary": summary, "wall_time_s": wall}
    (ex.out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable))
    return manifest
