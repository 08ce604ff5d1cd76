"""Run every configured experiment in turn, each into its own output directory."""

import argparse
from pathlib import Path

from artifact import scan

QUICK = {
    "fig1": {"nx": "64", "ny": "16", "p_max": "30"},
    "fig2-zoom": {"nx": "32", "ny": "16"},
    "fig4-tongues": {"nw": "48", "ntheta": "24"},
    "fig6-recurrent": {"n_points": "200"},
    "theorem-ladder": {"n_grid": "200"},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--quick", action="store_true", help="coarser grids for a fast look")
    ap.add_argument("--only", choices=scan.KINDS, nargs="*", default=list(scan.KINDS))
    args = ap.parse_args()

    for kind in args.only:
        params = scan.make_params(kind, QUICK[kind] if args.quick else None)
        ex = scan.Experiment(kind, params, Path(args.out_dir) / kind, args.seed, scan.resolve_threads(args.threads))
        manifest = scan.run(ex)
        summary = {k: v for k, v in manifest["summary"].items() if k != "files"}
        print(f"{kind},{manifest['wall_time_s']:.1f}s,{summary}")


if __name__ == "__main__":
    main()
