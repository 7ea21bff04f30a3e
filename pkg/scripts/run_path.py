"""Path network of 11 users: max-mean control against the no-ban baseline.

Writes one run directory per setting under --out and prints terminal means.
"""
import argparse
from dataclasses import replace
from pathlib import Path

from shadowban.dynamics import DynamicsParams
from shadowban.engine import SimulationConfig, run_to_directory
from shadowban.network import generate_path
from shadowban.policy import BanBudget


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/path")
    ap.add_argument("--n", type=int, default=11)
    args = ap.parse_args()

    net, theta = generate_path(args.n)
    cfg = SimulationConfig(objective="max-mean", budget=BanBudget(0.5, 1.0),
                           dynamics=DynamicsParams(omega=0.003, epsilon=0.101))
    runs = {"baseline": replace(cfg, baseline=True), "max-mean": cfg,
            "min-var": replace(cfg, objective="min-var"), "max-var": replace(cfg, objective="max-var")}
    for name, c in runs.items():
        result = run_to_directory(c, net, theta, Path(args.out) / name)
        last = result.frames[-1]
        print(f"{name:9s} terminal mean {last.mean:.4f} variance {last.variance:.4f}")


if __name__ == "__main__":
    main()
