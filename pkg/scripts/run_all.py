"""Run every shipped experiment config through the CLI and tabulate exit codes.

usage: python3 scripts/run_all.py [--out DIR] [--workers N]
"""
import argparse
import os
import sys
import time

from simlab import cli

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIGS = os.path.join(HERE, "..", "configs")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    status = {}
    for name in sorted(os.listdir(CONFIGS)):
        exp = name[:-4]
        start = time.perf_counter()
        code = cli.main([exp, "--config", os.path.join(CONFIGS, name),
                         "--out", os.path.join(args.out, exp), "--workers", str(args.workers)])
        status[exp] = (code, time.perf_counter() - start)
    print()
    for exp, (code, secs) in status.items():
        print(f"{exp:22s} exit={code} {secs:7.1f}s")
    return max(code for code, _ in status.values())


if __name__ == "__main__":
    sys.exit(main())
