"""Rate-vs-distance curves and the calibration report for one or more presets.

For each preset writes <preset>_rate_curve.csv (mu = 0.1 and the
distance-optimal mu) and <preset>_calibration.json.

    python3 scripts/rate_distance_calibration.py --preset gys --preset gys-fig2
"""
import argparse
from pathlib import Path

from pnrqkd.calibration import calibration_report
from pnrqkd.channel import load_preset
from pnrqkd.cli import Table, write_json, write_table
from pnrqkd.optimize import DISTANCE_COLUMNS, distance_optimal_mu, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", action="append")
    ap.add_argument("--out-dir", default="figures")
    ap.add_argument("--d-max", type=float, default=180.0)
    ap.add_argument("--steps", type=int, default=361)
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    for name in args.preset or ["gys", "gys-fig2"]:
        preset = load_preset(name)
        mu_opt = distance_optimal_mu(preset).mu
        rows = []
        for mu in (0.1, mu_opt):
            t = sweep(preset, "distance", 0.0, args.d_max, args.steps, mu=mu)
            rows.extend((mu,) + r for r in t.rows)
        write_table(Table(("mu",) + DISTANCE_COLUMNS, rows), "csv", out / f"{name}_rate_curve.csv")

        report = calibration_report(preset)
        write_json(report, out / f"{name}_calibration.json")
        print(f"[{name}]")
        for row in report["rows"]:
            print(f"  {row['quantity']:<24} target {row['target']:>8g}  measured {row['measured']:>10.4f}  "
                  f"deviation {row['deviation']:+.4f}")


if __name__ == "__main__":
    main()
