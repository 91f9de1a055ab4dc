"""Reuse a fuel-cell source model for a different device class.

A hydrogen pump has no oxygen electrode and no concentration losses, so
its curves look nothing like the source task. Instead of finetuning the
old head, the trained trunk is kept, a fresh two-layer head is attached,
and training runs with slow rates on the old layers and fast rates on
the new ones.
"""

import argparse
import os

import numpy as np

from echemfsl.metrics import evaluate_all
from echemfsl.netcore import load_model
from echemfsl.synthetic import synthetic_pump_target
from echemfsl.transfer import LRScheme, extend_for_new_task, new_task_train

OUT = os.path.join(os.path.dirname(__file__), "demo_runs")

parser = argparse.ArgumentParser()
parser.add_argument("--source", default=os.path.join(OUT, "source_fcnet.ecm"))
parser.add_argument("--scheme", default="[4e-4, 1e-2, 6e-2]")
args = parser.parse_args()

source = load_model(args.source)
target = synthetic_pump_target()

# sanity check: attaching the new head must not disturb the kept layers
extended = extend_for_new_task(source, seed=1)
probe = source.standardizer.transform_features(
    target.condition_bundle(target.conditions[0]).features)
kept = len(source.layers) - 1
old = source.forward_collect(probe)[:kept + 1]
new = extended.forward_collect(probe)[:kept + 1]
assert all(np.array_equal(a, b) for a, b in zip(old, new))
print(f"retained {kept} layers, activations unchanged; "
      f"extended arch: {extended.arch}")

model, history = new_task_train(source, target, LRScheme.parse(args.scheme),
                                batch_size=80, epochs=2000, seed=1)
print(f"trained {history.epochs_run()} epochs"
      + (" (early stop)" if history.stopped_early else ""))

for report in evaluate_all(model, target):
    tag = " (held out)" if report.is_holdout else ""
    print(f"  {report.condition_temp_c:g} C: {report.rrmse_percent:.2f}%{tag}")
