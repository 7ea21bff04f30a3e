"""Two five-user cliques joined by sparse cross links, under each objective."""
import argparse
from dataclasses import replace
from pathlib import Path

from shadowban.dynamics import DynamicsParams
from shadowban.engine import SimulationConfig, run_to_directory
from shadowban.network import generate_sbm
from shadowban.policy import BanBudget


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/sbm")
    ap.add_argument("--seed", type=int, default=1131, help="graph realization")
    ap.add_argument("--p-inter", type=float, default=0.05)
    args = ap.parse_args()

    p = args.p_inter
    net, theta = generate_sbm([5, 5], [[1, p], [p, 1]], [0.35, 0.65], seed=args.seed)
    inter = int(((net.source < 5) != (net.target < 5)).sum())
    print(f"{net.edge_count} edges, {inter} between clusters")
    cfg = SimulationConfig(objective="max-mean", budget=BanBudget(0.5, 1.0),
                           dynamics=DynamicsParams(omega=0.003, epsilon=0.4))
    for name, c in {"baseline": replace(cfg, baseline=True), "max-mean": cfg,
                    "min-var": replace(cfg, objective="min-var"),
                    "max-var": replace(cfg, objective="max-var")}.items():
        final = run_to_directory(c, net, theta, Path(args.out) / name).final_opinions
        print(f"{name:9s} mean {final.mean():.4f}  cluster means {final[:5].mean():.4f} / {final[5:].mean():.4f}")


if __name__ == "__main__":
    main()
