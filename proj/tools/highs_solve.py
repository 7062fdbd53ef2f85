#!/usr/bin/env python3
"""Solve an MPS file with HiGHS and write a raw solution file.

usage: highs_solve.py MODEL.mps SOLUTION.sol [--time-limit S] [--mip-rel-gap G] [--threads N]
"""
import argparse
import sys

try:
    import highspy
except ImportError:
    sys.stderr.write("highspy is not installed\n")
    sys.exit(127)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("mps")
    p.add_argument("sol")
    p.add_argument("--time-limit", type=float)
    p.add_argument("--mip-rel-gap", type=float, default=1e-6)
    p.add_argument("--threads", type=int, default=1)
    a = p.parse_args()

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", a.mip_rel_gap)
    h.setOptionValue("threads", a.threads)
    h.setOptionValue("random_seed", 0)
    if a.time_limit is not None:
        h.setOptionValue("time_limit", a.time_limit)
    if h.readModel(a.mps) == highspy.HighsStatus.kError:
        sys.stderr.write("cannot read %s\n" % a.mps)
        return 2
    h.run()
    h.writeSolution(a.sol, 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
