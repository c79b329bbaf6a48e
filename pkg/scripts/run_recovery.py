"""Rank-correlation recovery of simulated affinities across seeds and corpus sizes.

    python3 scripts/run_recovery.py --seeds 5 --playlists 5000 20000 50000
"""

import argparse
from dataclasses import dataclass, field, replace

import numpy as np

from songmood.experiments import recovery_medians
from songmood.simulate import SimConfig


@dataclass
class RecoveryExperiment:
    base: SimConfig = field(default_factory=SimConfig)
    n_seeds: int = 5
    playlist_counts: tuple[int, ...] = (5_000, 20_000, 50_000)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--playlists", type=int, nargs="+", default=[5_000, 20_000, 50_000])
    args = ap.parse_args()
    exp = RecoveryExperiment(n_seeds=args.seeds, playlist_counts=tuple(args.playlists))
    print("n_playlists,seed_medians,overall_median")
    for n in exp.playlist_counts:
        meds = recovery_medians(replace(exp.base, n_playlists=n), range(exp.n_seeds))
        print(f"{n},{' '.join(f'{m:.4f}' for m in meds)},{np.median(meds):.4f}")


if __name__ == "__main__":
    main()
