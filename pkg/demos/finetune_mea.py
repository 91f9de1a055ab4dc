"""Few-shot adaptation of a pretrained source model to a new MEA.

The target here is synthetic: polarization curves from a deliberately
perturbed physics model (stiffer ohmic losses, weaker cathode, different
conduction activation energy), so the source model is systematically
wrong and adaptation has something real to fix. Three temperatures,
roughly 50 points; the middle temperature is never trained on.
"""

import argparse
import os

from echemfsl.dataset import split_holdout
from echemfsl.metrics import evaluate_all, export_curve_plot, predict_curve, rrmse
from echemfsl.netcore import load_model
from echemfsl.synthetic import eem_baseline_curve, synthetic_fuel_cell_target
from echemfsl.transfer import LRScheme, finetune, group_displacement

SCHEMES = {"fcnet": "[1e-6, 2e-4]", "convnet": "[1e-8, 8e-6, 2e-4]"}
OUT = os.path.join(os.path.dirname(__file__), "demo_runs")

parser = argparse.ArgumentParser()
parser.add_argument("--source", default=os.path.join(OUT, "source_fcnet.ecm"),
                    help="pretrained model from pretrain_source.py")
args = parser.parse_args()

source = load_model(args.source)
target = synthetic_fuel_cell_target()
scheme = LRScheme.parse(SCHEMES.get(source.arch, SCHEMES["fcnet"]))

print(f"source: {source.arch}, target: {target.id}, "
      f"holdout {target.holdout_condition:g} C, scheme {scheme}")

model, history = finetune(source, target, scheme, batch_size=5,
                          epochs=2000, seed=0)
print(f"finetuned for {history.epochs_run()} epochs"
      + (" (early stop)" if history.stopped_early else ""))

disp = group_displacement(source, model)
print("parameter movement by group:",
      {g.value: f"{v:.3g}" for g, v in disp.items()})

print(f"{'temp':>8}  {'source':>8}  {'finetuned':>9}")
for rep0, rep1 in zip(evaluate_all(source, target),
                      evaluate_all(model, target)):
    tag = " (held out)" if rep1.is_holdout else ""
    print(f"{rep1.condition_temp_c:>7g}C  {rep0.rrmse_percent:>7.2f}%  "
          f"{rep1.rrmse_percent:>8.2f}%{tag}")

# knowledge-based baseline on the same held-out curve: the unperturbed
# equations scored against the perturbed device
_, test_b = split_holdout(target)
base = eem_baseline_curve(target.design_at(target.holdout_condition),
                          test_b.features[:, -1])
print(f"explicit-equation baseline on holdout: "
      f"{rrmse([p.voltage for p in base], test_b.labels):.2f}%")

# plot the held-out curve: measured points vs finetuned model vs baseline
import numpy as np
from echemfsl.physics import PolarizationPoint

os.makedirs(OUT, exist_ok=True)
hold = target.condition_bundle(target.holdout_condition)
measured = [PolarizationPoint(float(i), float(v))
            for i, v in zip(hold.features[:, -1], hold.labels)]
grid = np.sort(hold.features[:, -1])
export_curve_plot(
    os.path.join(OUT, "finetune_holdout.svg"),
    os.path.join(OUT, "finetune_holdout.csv"),
    f"{target.id} at {target.holdout_condition:g} C (held out)",
    measured,
    predict_curve(model, target.design_at(target.holdout_condition), grid),
    baseline_curve=base,
)
print("wrote", os.path.join(OUT, "finetune_holdout.svg"))
