import time
from types import SimpleNamespace

import numpy as np
import pytest

from echemfsl.physics import PhysicsParams
from echemfsl.dataset import (
    FactorialSpec,
    apply_standardizer,
    build_source_dataset,
    default_source_bundle,
    fit_standardizer,
    generate_factorial,
)


@pytest.fixture(scope="session")
def tiny_spec():
    # 2 x 2 x 3 = 12 designs; everything else pinned to one level
    return FactorialSpec(
        s_h2=(1.0, 2.0),
        s_o2=(2.0, 3.0),
        temperature=(423.0, 463.0, 503.0),
        pressure=(1.5,),
        iec_mem=(2.25,),
        iec_io=(2.25,),
        delta_mem=(0.005,),
        delta_io=(1e-4,),
        co_h2_ratio=(0.0,),
        load_anode=(0.35,),
        load_cathode=(0.35,),
    )


@pytest.fixture(scope="session")
def tiny_bundle(tiny_spec):
    return build_source_dataset(generate_factorial(tiny_spec), 5, PhysicsParams())


@pytest.fixture(scope="session")
def tiny_standardized(tiny_bundle):
    std = fit_standardizer(tiny_bundle)
    return std, apply_standardizer(std, tiny_bundle)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def source_std20k():
    """Seeded 20k subsample of the full source dataset plus its standardizer.

    Shared by the dispersion-geometry tests and the acceptance pipeline;
    elapsed covers generation + subsampling so downstream timing budgets
    can account for it even when another test built the fixture first.
    """
    t0 = time.perf_counter()
    sub = default_source_bundle().subsample(20000, seed=0)
    std = fit_standardizer(sub)
    sub_std = apply_standardizer(std, sub)
    elapsed = time.perf_counter() - t0
    return SimpleNamespace(sub=sub, std=std, sub_std=sub_std, elapsed=elapsed)
