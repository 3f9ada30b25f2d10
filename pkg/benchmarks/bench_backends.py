"""Compiled vs pure-Python kernel throughput.

    python3 benchmarks/bench_backends.py [--trials N] [--repeat R]

Same as ``transmittance bench``; exits nonzero if the backends disagree.
"""

import argparse
import sys

from transmittance import available_backends
from transmittance.bench import CASES, format_table, run_bench


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=20_000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--case", action="append", choices=sorted(CASES))
    args = p.parse_args(argv)
    print(f"backends: {', '.join(available_backends())}")
    print(format_table(run_bench(args.trials, args.case, args.repeat)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
