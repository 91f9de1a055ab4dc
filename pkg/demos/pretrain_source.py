"""Pretrain a source model on simulated polarization data.

Run generate_source_data.py first (or pass --fresh to rebuild here).
fcnet takes ~15 s at the shipped recipe; convnet is ~7 min.
"""

import argparse
import os
import time

import numpy as np

from echemfsl.dataset import (
    apply_standardizer, default_source_bundle, fit_standardizer,
    load_dataset, load_standardizer,
)
from echemfsl.metrics import rrmse
from echemfsl.netcore import save_model
from echemfsl.transfer import pretrain_source

RECIPES = {
    "fcnet": dict(lr0=3e-3, batch_size=256, epochs=200, seed=1),
    "convnet": dict(lr0=5e-3, batch_size=128, epochs=600, seed=0),
}

OUT = os.path.join(os.path.dirname(__file__), "demo_runs")

parser = argparse.ArgumentParser()
parser.add_argument("--arch", choices=RECIPES, default="fcnet")
parser.add_argument("--epochs", type=int, default=None,
                    help="override the recipe's epoch count")
parser.add_argument("--fresh", action="store_true",
                    help="rebuild the subsample instead of loading it")
args = parser.parse_args()

os.makedirs(OUT, exist_ok=True)
data_path = os.path.join(OUT, "source20k.dat")
std_path = os.path.join(OUT, "source20k.standardizer.json")

if args.fresh or not os.path.exists(data_path):
    sub = default_source_bundle().subsample(20000, seed=0)
    std = fit_standardizer(sub)
else:
    sub = load_dataset(data_path)
    std = load_standardizer(std_path)
sub_std = apply_standardizer(std, sub)

recipe = dict(RECIPES[args.arch])
if args.epochs:
    recipe["epochs"] = args.epochs

t0 = time.time()
model, history = pretrain_source(args.arch, sub_std, standardizer=std,
                                 **recipe)
print(f"{args.arch}: {history.epochs_run()} epochs in {time.time() - t0:.1f}s, "
      f"train loss {history.train_loss[-1]:.3e}, "
      f"held-out loss {history.eval_loss[-1]:.3e}")

# score on the same internal split pretrain_source held out, in volts,
# over the positive-voltage operating window
rng = np.random.default_rng(recipe["seed"])
_, held = sub_std.split(0.1, rng)
pred = std.invert_labels(model.forward(held.features)[:, 0])
truth = std.invert_labels(held.labels)
mask = truth > 0
print(f"held-out rRMSE: {rrmse(pred[mask], truth[mask]):.2f}%")

out = os.path.join(OUT, f"source_{args.arch}.ecm")
save_model(model, out)
print("wrote", out)
