"""Roll out every policy on the default synthetic corpus and write the
per-episode metrics CSV plus a short summary table."""

import argparse
import sys
import time

from conan_air.simenv import PolicyKind, SimConfig, default_corpus, run_policy


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--episodes", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="simulation.csv", help="CSV path ('-' for stdout)")
    args = ap.parse_args()

    corpus = default_corpus()
    start = time.perf_counter()
    reports = {p: run_policy(corpus, p, args.episodes, SimConfig(), args.seed) for p in PolicyKind}
    elapsed = time.perf_counter() - start

    text = "".join(rep.to_csv(header=(k == 0)) for k, rep in enumerate(reports.values()))
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)

    print(f"{'policy':8} {'r_total':>8} {'r_ide':>8} {'r_ret':>8} {'retr/ep':>8} {'acc':>6}", file=sys.stderr)
    for p, rep in reports.items():
        m = rep.summary()
        print(
            f"{p.value:8} {m['mean_r_total']:8.3f} {m['mean_r_ide']:8.3f} {m['mean_r_ret']:8.3f} "
            f"{m['mean_retrievals']:8.3f} {m['accuracy']:6.3f}",
            file=sys.stderr,
        )
    print(f"{args.episodes} episodes per policy in {elapsed:.2f}s", file=sys.stderr)


if __name__ == "__main__":
    main()
