"""Recompute the reference figures and derived numbers.

Each target prints computed values next to the printed ones.  Pass
``--montecarlo`` to simulate the full 6e7-pulse interference run, which
takes about a minute.
"""
from __future__ import annotations

import sys

from fiberqkd import reproduce


def main(argv: list[str]) -> None:
    mode = "montecarlo" if "--montecarlo" in argv else "analytic"
    print(reproduce.fig6(mode=mode).format())
    for target in ("fig7", "budget", "bounds", "multiphoton", "opteta"):
        print()
        print(reproduce.run_target(target).format())


if __name__ == "__main__":
    main(sys.argv[1:])
