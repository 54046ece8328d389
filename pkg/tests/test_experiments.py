import dataclasses
import json

import numpy as np
import pytest

from locstat import models
from locstat.experiments import (
    CHUNK,
    ExperimentConfig,
    InadmissibleSchemeError,
    _union_offsets,
    run_clt,
    run_coupling,
    run_lipschitz_u,
    run_lln,
)
from locstat.kernels import biweight
from locstat.noise import LevyTriplet
from locstat.observation import BandwidthRule, StepRuleO1, make_scheme

BROWNIAN = LevyTriplet(0.0, 1.0)


def test_config_validation():
    with pytest.raises(ValueError, match="increasing"):
        ExperimentConfig("coupling", models.ou(1.0), BROWNIAN, 1.0, (16, 16), 100, 0, 0.01, 8.0)
    with pytest.raises(ValueError, match="100"):
        ExperimentConfig("lln_discrete", models.ou(1.0), BROWNIAN, 1.0, (16,), 50, 0, 0.01, 8.0)
    with pytest.raises(ValueError, match="1000"):
        ExperimentConfig("clt_mean", models.ou(1.0), BROWNIAN, 1.0, (16,), 500, 0, 0.01, 8.0)


def test_union_offsets_merges_o1_lag():
    scheme = make_scheme(1.0, 256, BandwidthRule(0.5, 1.0 / 3.0), StepRuleO1(1.0))
    offsets, base_idx, shift_idx = _union_offsets(scheme, 1)
    # lag 1 equals one grid spacing: union adds exactly one extra node
    assert len(offsets) == len(scheme.grid) + 1
    assert np.array_equal(shift_idx, base_idx + 1)


def test_coupling_constant_coefficient_distance_is_roundoff():
    cfg = ExperimentConfig(
        "coupling", models.ou(1.5), BROWNIAN, 1.0, (16, 64), 120, 3, 0.01, 8.0
    )
    rep = run_coupling(cfg)
    for row in rep.rows:
        assert row["estimate"] < 1e-12


def test_coupling_rate_and_negative_control():
    cfg = ExperimentConfig(
        "coupling", models.tvcar_sin(), BROWNIAN, 1.0, (16, 64, 256), 200, 3, 0.01, 8.0
    )
    rep = run_coupling(cfg)
    assert rep.passed
    assert -1.3 <= rep.summary["slope"] <= -0.7
    for row in rep.rows:  # Monte Carlo agrees with the exact discretized gap
        assert row["pass"]
    neg = dataclasses.replace(cfg, model=models.tvcar_step(), validate_inputs=False)
    nrep = run_coupling(neg)
    assert not nrep.passed
    assert nrep.summary["slope"] > -0.7


def test_coupling_refuses_invalid_model():
    cfg = ExperimentConfig(
        "coupling", models.tvcar_step(), BROWNIAN, 1.0, (16,), 100, 3, 0.01, 8.0
    )
    with pytest.raises(ValueError, match="invariants"):
        run_coupling(cfg)


def test_lln_small_scale():
    cfg = ExperimentConfig(
        "lln_discrete",
        models.tvcar_sin(),
        LevyTriplet(1.0, 1.0),
        1.0,
        (2**8, 2**12),
        150,
        4,
        1.0 / 128.0,
        8.0,
        bandwidth=BandwidthRule(0.5, 1.0 / 3.0),
        step_rule=StepRuleO1(1.0),
        statistic="mean",
        rmse_tol=0.05,
    )
    rep = run_lln(cfg)
    assert rep.summary["strictly_decreasing"]
    assert rep.passed
    assert rep.rows[0]["target"] == pytest.approx(1.0 / (2.0 + np.sin(1.0)), abs=1e-12)


def test_lln_continuous_small_scale():
    cfg = ExperimentConfig(
        "lln_continuous",
        models.tvcar_sin(),
        LevyTriplet(1.0, 1.0),
        1.0,
        (2**8,),
        150,
        5,
        1e-3,
        8.0,
        n_quad=1024,
    )
    rep = run_lln(cfg, discrete=False)
    assert rep.passed


def test_clt_gates():
    bad_beta = ExperimentConfig(
        "clt_mean", models.ou(1.0), BROWNIAN, 1.0, (2**10,), 1000, 6, 0.01, 8.0,
        bandwidth=BandwidthRule(0.5, 0.25), step_rule=StepRuleO1(1.0),
    )
    with pytest.raises(InadmissibleSchemeError, match="sqrt"):
        run_clt(bad_beta)
    bad_kernel = ExperimentConfig(
        "clt_mean", models.ou(1.0), BROWNIAN, 1.0, (2**10,), 1000, 6, 0.01, 8.0,
        bandwidth=BandwidthRule(0.5, 2.0 / 3.0), step_rule=StepRuleO1(1.0), kernel=biweight(),
    )
    with pytest.raises(InadmissibleSchemeError, match="rectangular"):
        run_clt(bad_kernel)
    uncentered = ExperimentConfig(
        "clt_mean", models.ou(1.0), LevyTriplet(0.5, 1.0), 1.0, (2**10,), 1000, 6, 0.01, 8.0,
        bandwidth=BandwidthRule(0.5, 2.0 / 3.0), step_rule=StepRuleO1(1.0),
    )
    with pytest.raises(ValueError, match="centered"):
        run_clt(uncentered)


def test_clt_small_o1_mean():
    cfg = ExperimentConfig(
        "clt_mean", models.ou(1.0), BROWNIAN, 1.0, (2**10,), 1000, 7, 1.0 / 64.0, 8.0,
        bandwidth=BandwidthRule(0.5, 0.55), step_rule=StepRuleO1(1.0),
    )
    rep = run_clt(cfg)
    assert "O1" == rep.summary["scheme"]
    cand = rep.summary["candidates"]["series"]
    assert abs(cand["variance"] - 1.0) < 0.2
    assert rep.replication_values is not None
    assert len(rep.replication_values) == 1000


def test_lipschitz_small():
    cfg = ExperimentConfig(
        "lipschitz_u", models.tvcar_sin(), BROWNIAN, 1.0, (1,), 150, 8, 0.01, 8.0,
        ladder=(0.02, 0.1, 0.5), p_norm=2, time_points=32,
    )
    rep = run_lipschitz_u(cfg)
    assert rep.passed
    assert rep.summary["slope"] >= 0.9
    for row in rep.rows:
        assert row["pass"]  # matches the closed-form distance of the joint system


def test_determinism_across_runs_and_workers():
    cfg = ExperimentConfig(
        "coupling", models.tvcar_sin(), BROWNIAN, 1.0, (16, 64), CHUNK * 3, 9, 0.01, 8.0
    )
    a = json.dumps(run_coupling(cfg).to_dict(), sort_keys=True)
    b = json.dumps(run_coupling(cfg).to_dict(), sort_keys=True)
    c = json.dumps(run_coupling(dataclasses.replace(cfg, workers=3)).to_dict(), sort_keys=True)
    assert a == b == c
