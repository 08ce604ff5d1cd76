"""Check the word identities for every base up to a given period."""

import argparse
import time

from artifact.symbolic import all_bases, family_identity_failures, main_identity_holds


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=50)
    ap.add_argument("--k-max", type=int, default=8)
    args = ap.parse_args()

    t0 = time.perf_counter()
    n_bases, failures = 0, []
    for b in all_bases(args.n_max):
        n_bases += 1
        if not main_identity_holds(b):
            failures.append((b, "main", 0, 0))
        failures += [(b, name, k, dl) for name, k, dl in family_identity_failures(b, args.k_max)]
    for b, name, k, dl in failures[:20]:
        print(f"mismatch,{b.l},{b.m},{b.n},{name},{k},{dl}")
    print(f"bases,{n_bases}")
    print(f"mismatches,{len(failures)}")
    print(f"seconds,{time.perf_counter() - t0:.1f}")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
