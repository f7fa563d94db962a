"""Mean code activations of a 16-unit AE trained with and without the KL penalty."""

import argparse

import numpy as np

from ae2lstm.rng import Rng
from ae2lstm.sparse_ae import AeTrainConfig, SparseAE, train_ae


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epochs", type=int, default=400)
    ap.add_argument("--rho", type=float, default=0.05)
    ap.add_argument("--betas", default="0,1,4")
    args = ap.parse_args()

    X = Rng(31).uniform(size=(200, 64))
    np.set_printoptions(precision=3, suppress=True)
    for beta in (float(b) for b in args.betas.split(",")):
        ae = SparseAE(64, 16, rho=args.rho, beta=beta, lam=0.004, rng=Rng(32))
        _, trace = train_ae(ae, X, AeTrainConfig(max_epochs=args.epochs, optimizer="adam", lr=1e-3, seed=33))
        act = ae.encode(X).mean(axis=0)
        loss = ae.loss(X)
        print(f"beta={beta:g}  loss={trace[-1]:.4f}  mse={loss.mse:.4f}  kl={loss.kl:.4f}  "
              f"mean act in [{act.min():.3f}, {act.max():.3f}]")
        print("  ", act)


if __name__ == "__main__":
    main()
