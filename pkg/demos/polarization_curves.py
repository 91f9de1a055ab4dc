"""Plot closed-form polarization curves for a fuel cell and a hydrogen pump."""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from echemfsl.physics import CellDesign, Mode, PhysicsParams, sample_curve

OUT = os.path.join(os.path.dirname(__file__), "demo_runs")
os.makedirs(OUT, exist_ok=True)

params = PhysicsParams()

base = dict(s_h2=1.5, s_o2=2.5, pressure=1.5, iec_mem=2.25, iec_io=2.25,
            delta_mem=0.005, delta_io=1e-4, load_anode=0.35,
            load_cathode=0.35)

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))

for temp_c in (160, 180, 220):
    design = CellDesign(temperature=temp_c + 273.15, co_h2_ratio=0.0, **base)
    curve = sample_curve(design, 40, params)
    ax1.plot([p.current_density for p in curve], [p.voltage for p in curve],
             label=f"{temp_c} C")
ax1.set_title("fuel cell, clean H2")

# CO poisoning drags the anode kinetics down
design = CellDesign(temperature=433.15, co_h2_ratio=0.1, **base)
curve = sample_curve(design, 40, params)
ax1.plot([p.current_density for p in curve], [p.voltage for p in curve],
         "k--", label="160 C, 10% CO")
ax1.legend(fontsize=8)

pump = CellDesign(temperature=433.15, co_h2_ratio=0.0,
                  mode=Mode.HYDROGEN_PUMP, **base)
curve = sample_curve(pump, 40, params)
ax2.plot([p.current_density for p in curve], [p.voltage for p in curve],
         color="#c23b22")
ax2.set_title("hydrogen pump")

for ax in (ax1, ax2):
    ax.set_xlabel("current density / A cm$^{-2}$")
    ax.set_ylabel("cell voltage / V")
fig.tight_layout()

out = os.path.join(OUT, "polarization_curves.svg")
fig.savefig(out)
print("wrote", out)
