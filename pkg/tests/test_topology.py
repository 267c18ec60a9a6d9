import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geosim.topology import (
    GCP_MACROS,
    DuplicatePair,
    LatencyModel,
    Macro,
    MissingPair,
    NonPositiveLatency,
    RegionTable,
    UnknownRegion,
    bundled_dataset_path,
    calibrated_mu,
    load_latency_dataset,
)

from conftest import TWO_REGION_MACROS, make_world, random_world


def test_calibrated_mu_oracle():
    # mean 100 ms at sigma 0.5: mu = ln(100) - 0.125
    assert calibrated_mu(100.0, 0.5) == pytest.approx(4.480170185988092, abs=1e-12)


def test_calibration_recovers_mean(two_region_world):
    table, model = two_region_world
    assert model.expected_latency(0, 1) == pytest.approx(100.0, rel=1e-12)
    assert model.expected_latency(0, 0) == pytest.approx(2.0, rel=1e-12)


def test_cdf_frozen_values(two_region_world):
    table, model = two_region_world
    # Phi((ln t - mu)/sigma) at t=150 and t=60 for mean 100, sigma 0.5
    assert model.latency_cdf(0, 1, 150.0) == pytest.approx(0.8556391919608232, abs=1e-12)
    assert model.latency_cdf(0, 1, 60.0) == pytest.approx(0.22016050642567841, abs=1e-12)


def test_cdf_nonpositive_time_is_zero(two_region_world):
    table, model = two_region_world
    assert model.latency_cdf(0, 1, 0.0) == 0.0
    assert model.latency_cdf(0, 1, -5.0) == 0.0


def test_sigma_zero_cdf_is_step(two_region_world_det):
    table, model = two_region_world_det
    assert model.latency_cdf(0, 1, 99.999) == 0.0
    assert model.latency_cdf(0, 1, 100.0) == 1.0
    assert model.latency_cdf(0, 1, 100.001) == 1.0


@given(
    mean=st.floats(min_value=0.5, max_value=5000.0),
    sigma=st.one_of(st.just(0.0), st.floats(min_value=1e-6, max_value=2.0)),
    t=st.floats(min_value=-10.0, max_value=10000.0),
)
def test_cdf_bounds_property(mean, sigma, t):
    csv = f"source,destination,mean_rtt_ms\na,b,{mean}\nb,a,{mean}\n"
    table, model = make_world(csv, sigma, TWO_REGION_MACROS)
    v = model.latency_cdf(0, 1, t)
    assert 0.0 <= v <= 1.0
    if t <= 0:
        assert v == 0.0


@given(
    mean=st.floats(min_value=0.5, max_value=5000.0),
    t1=st.floats(min_value=0.1, max_value=5000.0),
    dt=st.floats(min_value=0.0, max_value=5000.0),
)
def test_cdf_monotone_in_time(mean, t1, dt):
    csv = f"source,destination,mean_rtt_ms\na,b,{mean}\nb,a,{mean}\n"
    table, model = make_world(csv, 0.5, TWO_REGION_MACROS)
    assert model.latency_cdf(0, 1, t1 + dt) >= model.latency_cdf(0, 1, t1)


def test_sample_latency_statistics(two_region_world):
    table, model = two_region_world
    rng = np.random.default_rng(7)
    xs = np.array([model.sample_latency(0, 1, rng) for _ in range(20000)])
    assert xs.min() > 0
    assert np.mean(xs) == pytest.approx(100.0, rel=0.03)
    assert np.median(xs) == pytest.approx(math.exp(calibrated_mu(100.0, 0.5)), rel=0.03)


def test_loader_first_appearance_order():
    csv = "source,destination,mean_rtt_ms\nb,a,10\na,b,12\n"
    table, model = make_world(csv, 0.5, TWO_REGION_MACROS)
    assert table.names() == ["b", "a"]
    # values used as given, asymmetric
    assert model.expected_latency(0, 1) == pytest.approx(10.0)
    assert model.expected_latency(1, 0) == pytest.approx(12.0)


def test_loader_intra_default_and_override():
    csv = "source,destination,mean_rtt_ms\na,b,10\nb,a,10\na,a,5\n"
    table, model = make_world(csv, 0.5, TWO_REGION_MACROS)
    assert model.expected_latency(0, 0) == pytest.approx(5.0)
    assert model.expected_latency(1, 1) == pytest.approx(2.0)


def test_loader_missing_pair():
    csv = "source,destination,mean_rtt_ms\na,b,10\n"
    with pytest.raises(MissingPair):
        make_world(csv, 0.5, TWO_REGION_MACROS)


def test_loader_duplicate_pair():
    csv = "source,destination,mean_rtt_ms\na,b,10\na,b,11\nb,a,10\n"
    with pytest.raises(DuplicatePair):
        make_world(csv, 0.5, TWO_REGION_MACROS)


def test_loader_nonpositive_latency():
    csv = "source,destination,mean_rtt_ms\na,b,0\nb,a,10\n"
    with pytest.raises(NonPositiveLatency):
        make_world(csv, 0.5, TWO_REGION_MACROS)


def test_loader_unknown_region():
    csv = "source,destination,mean_rtt_ms\na,zz,10\nzz,a,10\n"
    with pytest.raises(UnknownRegion):
        make_world(csv, 0.5, {"a": Macro.EUROPE})


def test_region_table_lookup(two_region_world):
    table, _ = two_region_world
    assert table.index("a") == 0
    assert table[1].name == "b"
    assert table[1].macro is Macro.NORTH_AMERICA
    with pytest.raises(UnknownRegion):
        table.index("nope")


def test_macro_median_small_world():
    # two Europe regions 10 ms apart, one NA region 100 ms away from both
    csv = (
        "source,destination,mean_rtt_ms\n"
        "e1,e2,10\ne2,e1,10\n"
        "e1,n1,100\nn1,e1,100\n"
        "e2,n1,120\nn1,e2,120\n"
    )
    macros = {"e1": Macro.EUROPE, "e2": Macro.EUROPE, "n1": Macro.NORTH_AMERICA}
    table, model = make_world(csv, 0.5, macros)
    med = model.macro_median_latency()
    eu, na = int(Macro.EUROPE), int(Macro.NORTH_AMERICA)
    assert med[eu, na] == pytest.approx(110.0)  # median of 100, 100, 120, 120
    assert med[eu, eu] == pytest.approx(6.0)  # median of 2, 10, 10, 2
    assert np.isnan(med[int(Macro.ASIA), eu])
    rows = model.macro_row_averages()
    assert rows[eu] == pytest.approx(110.0)
    assert rows[na] == pytest.approx(110.0)
    assert np.isnan(rows[int(Macro.ASIA)])


def test_bundled_dataset_regions_and_ordering():
    table, model = load_latency_dataset(bundled_dataset_path(), 0.5)
    assert len(table) == 40
    assert set(table.names()) == set(GCP_MACROS)
    rows = model.macro_row_averages()
    order = np.argsort(rows)
    assert Macro(order[0]) is Macro.NORTH_AMERICA
    assert Macro(order[-1]) is Macro.SOUTH_AMERICA


def test_bundled_dataset_all_pairs_positive():
    table, model = load_latency_dataset(bundled_dataset_path(), 0.5)
    exp = model.expected
    assert exp.shape == (40, 40)
    assert np.all(exp > 0)
    assert np.allclose(np.diag(exp), 2.0)


@settings(max_examples=20)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_random_world_roundtrip(seed):
    rng = np.random.default_rng(seed)
    table, model = random_world(rng, 5)
    assert len(table) == 5
    for i in range(5):
        for j in range(5):
            mean = model.expected_latency(i, j)
            mu = calibrated_mu(mean, model.sigma)
            assert model.mu[i, j] == pytest.approx(mu, abs=1e-9)
