"""Cosine dispersion of target sets in standardized feature space.

Low dispersion means the set's records point the same way after
standardization, which is the regime where few-shot finetuning has the
easiest job. Pump sets spread wider than the fuel-cell family here.
"""

import os

import numpy as np

from echemfsl.dataset import load_standardizer
from echemfsl.metrics import cosine_dispersion
from echemfsl.synthetic import fuel_cell_family, pump_family

OUT = os.path.join(os.path.dirname(__file__), "demo_runs")
std_path = os.path.join(OUT, "source20k.standardizer.json")
if not os.path.exists(std_path):
    raise SystemExit("run generate_source_data.py first")
std = load_standardizer(std_path)


def dispersion(expset):
    feats = np.concatenate(
        [expset.condition_bundle(t).features for t in expset.conditions])
    return cosine_dispersion(std.transform_features(feats))


print(f"{'set':<12} {'dispersion':>10}")
for expset in fuel_cell_family() + pump_family():
    print(f"{expset.id:<12} {dispersion(expset):>10.5f}")

fc = [dispersion(e) for e in fuel_cell_family()]
pump = [dispersion(e) for e in pump_family()]
print(f"\nmax fuel cell {max(fc):.5f} < min pump {min(pump):.5f}: "
      f"{max(fc) < min(pump)}")
