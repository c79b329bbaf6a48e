"""Per-modality F1 on a corpus with one lyric-driven and one acoustic-driven mood.

    python3 scripts/run_modality.py --seeds 5 > modality.csv
"""

import argparse
from dataclasses import dataclass

from songmood.experiments import KINDS, modality_config, modality_f1
from songmood.models import TrainConfig


@dataclass
class ModalityExperiment:
    n_seeds: int = 5
    tau: float = 0.1
    train_fraction: float = 0.75
    train: TrainConfig = TrainConfig()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--tau", type=float, default=0.1)
    args = ap.parse_args()
    exp = ModalityExperiment(n_seeds=args.seeds, tau=args.tau)
    print("seed,mood,driver,n_test," + ",".join(KINDS))
    for seed in range(exp.n_seeds):
        res = modality_f1(modality_config(seed), exp.tau, exp.train_fraction, exp.train)
        for mood, n in sorted(res.n_test.items()):
            scores = ",".join(f"{100 * res.f1[(mood, k)]:.2f}" for k in KINDS)
            print(f"{seed},{mood},{res.drivers[mood]},{n},{scores}")


if __name__ == "__main__":
    main()
