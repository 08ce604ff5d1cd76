"""Command-line entry point.

Exit codes: 0 on success, 1 when a solver fails, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import manifold, plmap, sawtooth, scan, sectors, shrink
from .symbolic import RotationalParams, farey_roots, g_word, partitions

SOLVER_ERRORS = (
    shrink.ShrinkError,
    sectors.SectorError,
    manifold.ManifoldError,
    plmap.SingularCycleError,
    np.linalg.LinAlgError,
)


class UsageError(Exception):
    pass


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return a, b


def _axis(text: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(",")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo,hi,n, got {text!r}")


def _rot(text: str) -> RotationalParams:
    try:
        return RotationalParams.parse(text)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _echo(args: argparse.Namespace, out=None) -> None:
    out = out or sys.stdout
    for k, v in sorted(vars(args).items()):
        if k == "func":
            continue
        if isinstance(v, np.ndarray):
            v = f"{v[0]:g}..{v[-1]:g} ({len(v)})"
        print(f"# {k} = {v}", file=out)


def _located(args) -> shrink.ShrinkPointData:
    pslice = plmap.get_slice(args.slice)
    guess = args.guess or scan.KNOWN_POINTS.get(f"{args.base.l},{args.base.m},{args.base.n}")
    if guess is None:
        raise UsageError("no stored starting point for this base; pass --guess")
    return shrink.locate(pslice, args.base, guess)


# ---------------------------------------------------------------------------
# subcommands


def cmd_word(args) -> int:
    b = args.rot
    print(b.word)
    if args.detail:
        roots = farey_roots(b.m, b.n, b.l)
        X, Y, Xh = partitions(b)
        print(f"d,{b.d}")
        print(f"farey_left,{roots.left[0]}/{roots.left[1]}")
        print(f"farey_right,{roots.right[0]}/{roots.right[1]}")
        print(f"X,{X or ''}\nY,{Y or ''}\nXhat,{Xh or ''}")
    if args.g is not None:
        sign, k, dl = args.g
        print(g_word(sign, k, dl, b))
    return 0


def cmd_shrink(args) -> int:
    data = _located(args)
    rep = shrink.genericity_report(data)
    print(f"tau_R,{float(data.xi[0])!r}\ndelta_L,{float(data.xi[1])!r}")
    for key in ("a", "b", "c", "rho_max"):
        print(f"{key},{float(getattr(data, key))!r}")
    print(f"residual,{float(data.residual)!r}\nfour_t_residual,{float(data.four_t_residual())!r}\ngeneric,{rep['generic']}")
    tab = shrink.kappa_table(data, args.lo, args.hi)
    print("dl,kappa_plus,theta_plus,kappa_minus,theta_minus")
    for row in zip(tab.dls, tab.kappa_plus, tab.theta_plus, tab.kappa_minus, tab.theta_minus):
        print(",".join(f"{v:.6f}" if isinstance(v, float) else str(v) for v in row))
    return 0


def cmd_sectors(args) -> int:
    data = _located(args)
    spec = sectors.sector_spec(data, args.sign, args.k, args.dl)
    print(f"theta_min,{spec.theta_min:.6f}\ntheta_max,{spec.theta_max:.6f}\nmixed,{spec.mixed}")
    print(f"ratio_theta,{sectors.slope_ratio(spec):.6f}")
    print(f"ratio_kappa,{sectors.slope_ratio_kappa(data, spec):.6f}")
    if args.mesh:
        pf = sectors.PolarFrame(data)
        rows = []
        for th in np.linspace(spec.theta_min, spec.theta_max, args.n_theta + 2)[1:-1]:
            d_in = sectors.inner_delta(pf, spec, th)
            for dlt in (np.arange(args.n_delta) + 0.5) / args.n_delta * d_in:
                xi = sectors.deltatheta_to_xi(pf, spec, dlt, th)
                rows.append((dlt, th, xi[0], xi[1]))
        meta = {"slice": args.slice, "base": f"{args.base.l},{args.base.m},{args.base.n}", "sign": args.sign,
                "k": args.k, "dl": args.dl}
        path = scan.write_csv(Path(args.out_dir) / args.mesh, ["delta", "theta", "tau_R", "delta_L"], rows, meta)
        print(f"mesh,{path}")
    return 0


def cmd_sawtooth(args) -> int:
    try:
        p = sawtooth.SawtoothParams(args.aL, args.aR, args.w)
    except ValueError as exc:
        raise UsageError(str(exc))
    if args.trace:
        for i, z in enumerate(sawtooth.trace(p, args.z0, args.trace)):
            print(f"{i},{float(z)!r}")
    res = sawtooth.rotation_number(p, n_iter=args.n_iter)
    print(f"# rotation,{res.snapped if res.snapped is not None else res.rho}")
    print(f"# lyapunov,{float(sawtooth.lyapunov(p, max(args.n_iter, 1000)))!r}")
    return 0


def cmd_mlscan(args) -> int:
    grid = plmap.mode_lock_scan(args.slice, args.x, args.y, mode=args.mode, threads=args.threads, p_max=args.p_max)
    meta = {"slice": args.slice, "mode": args.mode, "p_max": args.p_max}
    out = Path(args.out_dir)
    path = scan._grid_csv(out / "mlscan.csv", grid, meta)
    scan.write_ppm(out / "mlscan.ppm", scan.label_image(grid.m, grid.period))
    print(f"grid,{path}")
    print("labels," + " ".join(sorted(grid.labels())))
    return 0


def cmd_verify(args) -> int:
    out = Path(args.out_dir)
    if args.mesh:
        meta, _, rows = scan.read_csv(args.mesh)
        base = RotationalParams.parse(meta["base"])
        k, dl = int(meta["k"]), int(meta["dl"])
        if int(meta.get("sign", 1)) != 1:
            raise UsageError("the verifier handles plus sectors only")
        points = [(r["tau_R"], r["delta_L"], r["delta"], r["theta"]) for r in rows]
        slice_name = meta["slice"]
    else:
        base, k, dl, slice_name = args.base, None, args.dl, args.slice
        points = None
    ns = argparse.Namespace(slice=slice_name, base=base, guess=args.guess)
    data = _located(ns)
    pf = sectors.PolarFrame(data)
    rows = []

    def record(i, kk, job, cloud_name, tr=float("nan"), dL=float("nan")):
        # one failing point is logged in its row; the rest still runs
        try:
            rset, params, tr, dL = job()
            r = manifold.theorem_verify(rset, params, n_grid=args.n_grid, c0=args.c0)
            _write_cloud(out / cloud_name, rset, args)
        except SOLVER_ERRORS as exc:
            rows.append((i, kk, tr, dL) + (float("nan"),) * 6 + (f"error: {exc}",))
            return
        rows.append((i, kk, tr, dL, r.w, r.sup_error, r.mean_error, r.sup_error_h, r.agreement, r.word_length_ok, "ok"))

    if points is not None:
        spec = sectors.sector_spec(data, 1, k, dl)
        for i, (tr, dL, dlt, th) in enumerate(points):
            def job(tr=tr, dL=dL, dlt=dlt, th=th):
                frame = manifold.centre_frame(data.pslice((tr, dL)), base)
                rset = manifold.build_recurrent_set(frame, k, dl, data.rho_max, data.a, args.Q)
                return rset, sectors.sector_params(spec, dlt, th), tr, dL

            record(i, k, job, f"lambda_{i:03d}.csv", tr, dL)
    else:
        try:
            ks = [int(s) for s in args.ks.split(",")]
        except ValueError:
            raise UsageError(f"--ks expects comma-separated integers, got {args.ks!r}")
        for i, kk in enumerate(ks):
            def job(kk=kk):
                rset, params, xi = manifold.sector_recurrent_set(data, pf, kk, dl, Q=args.Q)
                return rset, params, float(xi[0]), float(xi[1])

            record(i, kk, job, f"lambda_k{kk}.csv")
    header = ["id", "k", "tau_R", "delta_L", "w", "sup_error", "mean_error", "sup_error_h",
              "dk_agreement", "word_length_ok", "status"]
    path = scan.write_csv(out / "errors.csv", header, rows, {"c0": args.c0, "n_grid": args.n_grid})
    print(",".join(header))
    for row in rows:
        print(",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    print(f"# errors,{path}")
    return 0


def _write_cloud(path, rset, args):
    inv = manifold.invariant_set(rset, n_iter=args.n_iter, n_points=args.n_points, seed=args.seed)
    scan.write_csv(path, ["h", "q_norm", "phi"], zip(inv["h"], inv["q_norm"], inv["z"]),
                   {"k": rset.k, "dl": rset.dl, "Q": rset.Q, "coverage": inv["coverage"]})


def cmd_run(args) -> int:
    overrides = {}
    for item in args.set or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = val.strip()
    try:
        if args.config:
            ex = scan.load_config(args.config, args.out_dir_given, args.seed_given, args.threads_given, overrides)
        elif args.kind:
            params = scan.make_params(args.kind, overrides)
            ex = scan.Experiment(args.kind, params, Path(args.out_dir), args.seed, args.threads)
        else:
            raise UsageError("pass --config or --kind")
    except (ValueError, FileNotFoundError) as exc:
        raise UsageError(str(exc))
    manifest = scan.run(ex)
    print(f"# manifest,{ex.out_dir / 'manifest.json'}")
    for k, v in manifest["summary"].items():
        print(f"{k},{v}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker processes (default: ${scan.THREADS_ENV} or 1)")
    common.add_argument("--out-dir", default=None, help="directory for output files (default: out)")
    common.add_argument("--seed", type=int, default=None, help="random seed for sampling (default: 0)")

    where = argparse.ArgumentParser(add_help=False)
    where.add_argument("--slice", default="bcnf3-fig1", choices=sorted(plmap.SLICES))
    where.add_argument("--base", type=_rot, default=RotationalParams(3, 3, 8), help="rotational word l,m,n")
    where.add_argument("--guess", type=_pair, default=None, help="starting point tau_R,delta_L")

    p = argparse.ArgumentParser(prog="artifact", description="Mode-locking near shrinking points of piecewise-linear maps.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("word", parents=[common], help="rotational words, their partitions and G-family words")
    s.add_argument("--rot", type=_rot, required=True, help="l,m,n")
    s.add_argument("--detail", action="store_true", help="also print d, Farey roots and the X/Y partition")
    s.add_argument("--g", type=lambda t: tuple(int(v) for v in t.split(",")), default=None,
                   help="sign,k,dl: print the G-family word as well")
    s.set_defaults(func=cmd_word)

    s = sub.add_parser("shrink", parents=[common, where], help="locate a shrinking point and print its theta table")
    s.add_argument("--lo", type=int, default=-2)
    s.add_argument("--hi", type=int, default=2)
    s.set_defaults(func=cmd_shrink)

    s = sub.add_parser("sectors", parents=[common, where], help="sector angles, slope ratio and (delta, theta) meshes")
    s.add_argument("--sign", type=int, choices=(-1, 1), default=1)
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--dl", type=int, default=0)
    s.add_argument("--mesh", default=None, help="write a (delta, theta) mesh to this file name")
    s.add_argument("--n-delta", type=int, default=4)
    s.add_argument("--n-theta", type=int, default=4)
    s.set_defaults(func=cmd_sectors)

    s = sub.add_parser("sawtooth", parents=[common], help="iterate the skew sawtooth map")
    s.add_argument("--aL", type=float, required=True)
    s.add_argument("--aR", type=float, required=True)
    s.add_argument("--w", type=float, required=True)
    s.add_argument("--z0", type=float, default=0.0)
    s.add_argument("--trace", type=int, default=0, help="print this many iterates")
    s.add_argument("--n-iter", type=int, default=10000)
    s.set_defaults(func=cmd_sawtooth)

    s = sub.add_parser("mlscan", parents=[common], help="mode-locking scan over a parameter grid")
    s.add_argument("--slice", default="bcnf3-fig1", choices=sorted(plmap.SLICES))
    s.add_argument("--x", type=_axis, default=np.linspace(-3, 0, 64), help="lo,hi,n for tau_R")
    s.add_argument("--y", type=_axis, default=np.linspace(-0.3, 0.6, 16), help="lo,hi,n for delta_L")
    s.add_argument("--mode", choices=("cycle-solve", "orbit"), default="cycle-solve")
    s.add_argument("--p-max", type=int, default=50)
    s.set_defaults(func=cmd_mlscan)

    s = sub.add_parser("verify", parents=[common, where],
                       help="compare the return map with the sawtooth map on a mesh or a k-ladder")
    s.add_argument("--mesh", default=None, help="mesh CSV written by the sectors subcommand")
    s.add_argument("--ks", default="2,3,4,6", help="k values for the ladder when no mesh is given")
    s.add_argument("--dl", type=int, default=0)
    s.add_argument("--Q", type=float, default=None, help="ball size factor (default: automatic)")
    s.add_argument("--n-grid", type=int, default=400)
    s.add_argument("--c0", type=float, default=0.5, help="half-width constant of the excluded strips")
    s.add_argument("--n-iter", type=int, default=30)
    s.add_argument("--n-points", type=int, default=200)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("run", parents=[common], help="run a configured experiment")
    s.add_argument("--config", default=None, help="INI file with [experiment] and [params] sections")
    s.add_argument("--kind", choices=scan.KINDS, default=None)
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a parameter")
    s.set_defaults(func=cmd_run)
    return p


VALUE_FLAGS = ("--guess", "--x", "--y", "--aL", "--aR", "--w", "--z0", "--g")


def _join_negative_values(argv):
    """Turn ``--guess -1.36,0.14`` into ``--guess=-1.36,0.14`` so argparse keeps the value."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if tok in VALUE_FLAGS and nxt is not None and nxt[:1] == "-" and nxt[1:2] in set("0123456789."):
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    # keep the explicit values for config files, then fill defaults
    args.out_dir_given, args.seed_given, args.threads_given = args.out_dir, args.seed, args.threads
    args.out_dir = args.out_dir or "out"
    args.seed = 0 if args.seed is None else args.seed
    args.threads = scan.resolve_threads(args.threads)
    _echo(argparse.Namespace(**{k: v for k, v in vars(args).items() if not k.endswith("_given")}))
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
