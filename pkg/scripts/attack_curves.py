"""Information curves n*I_SI(e) and I_CMP(n, e) plus their crossover QBERs.

    python3 scripts/attack_curves.py --out-dir figures
"""
import argparse
from pathlib import Path

import numpy as np

from pnrqkd.attacks import cmp_information, crossover_qber, si_information
from pnrqkd.cli import Table, write_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="figures")
    ap.add_argument("--n-max", type=int, default=5)
    ap.add_argument("--steps", type=int, default=501)
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    es = np.linspace(0.0, 0.5, args.steps)
    ns = range(1, args.n_max + 1)
    cols = ("e",) + tuple(f"si_x{n}" for n in ns) + tuple(f"cmp_{n}" for n in ns)
    rows = []
    for e in map(float, es):
        rows.append((e,) + tuple(n * si_information(e) for n in ns) + tuple(cmp_information(n, e) for n in ns))
    write_table(Table(cols, rows), "csv", out / "attack_curves.csv")

    cross = [(n, crossover_qber(n)) for n in ns if n >= 2]
    write_table(Table(("n", "e_star"), cross), "csv", out / "crossovers.csv")
    for n, e in cross:
        print(f"n={n}: I_CMP(n) > n I_SI for e < {e:.6f}")


if __name__ == "__main__":
    main()
