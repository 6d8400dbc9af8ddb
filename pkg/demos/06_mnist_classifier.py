"""Labeled-MPS image classification on MNIST.

Needs the four standard IDX files (optionally gzipped) in a directory
pointed to by MPSLAB_MNIST_DIR.  A chi=6 run over 1024 images with the
paper-scale budget (100 sweeps x 5 CG steps) takes a while; this demo
uses a shorter budget to show the mechanics.

Run:  MPSLAB_MNIST_DIR=/path/to/mnist python demos/06_mnist_classifier.py
"""

import os
import sys

from mpslab.classify import load_idx, preprocess, subset, train_classifier
from mpslab.dmrg import CROSS_ENTROPY, TrainConfig

root = os.environ.get("MPSLAB_MNIST_DIR")
if not root:
    sys.exit("set MPSLAB_MNIST_DIR to the directory with the MNIST IDX files")


def find(stem):
    for suffix in ("", ".gz"):
        path = os.path.join(root, stem + suffix)
        if os.path.exists(path):
            return path
    sys.exit(f"missing {stem} in {root}")


train_pool = preprocess(load_idx(find("train-images-idx3-ubyte"),
                                 find("train-labels-idx1-ubyte")),
                        downsample=2)
test_set = preprocess(load_idx(find("t10k-images-idx3-ubyte"),
                               find("t10k-labels-idx1-ubyte")),
                      downsample=2)
print(f"{train_pool.count} training images pooled to "
      f"{train_pool.images.shape[1]}x{train_pool.images.shape[2]}; "
      f"{test_set.count} test images")

train_set = subset(train_pool, 1024, seed=0)
config = TrainConfig(sweeps=10, cg_steps=5, ridge=0.0,
                     loss_kind=CROSS_ENTROPY, checkpoint="last",
                     sweep_tol=0.0)
model, trace = train_classifier(train_set, None, test_set, chi=6,
                                config=config, seed=0)

print("\nsweep   train xent   train acc   test acc")
for s, loss, tacc, teacc in zip(trace.sweeps, trace.train_loss,
                                trace.train_accuracy, trace.test_accuracy):
    print(f"{s:>5}   {loss:10.4f}   {tacc:9.4f}   {teacc:8.4f}")
