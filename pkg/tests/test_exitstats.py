import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opioid_residence.domain import Domain
from opioid_residence.exceptions import ComputationError, ValidationError
from opioid_residence.exitstats import (
    Censored,
    ExitEnsemble,
    estimate_exit_rate,
    first_exit,
    mean_exit_time,
    paired_rate_comparison,
    run_ensemble,
    survival_curve,
)
from opioid_residence.model import addiction_free_equilibrium
from opioid_residence.sde import LinearDynamics, ModelDynamics, SdeConfig

from oracles import ou_mean_exit_dense, ou_mean_exit_quadrature

# oracle values, computed once with tests/oracles.py and frozen
MEAN_OU = 4.501602131185847  # a=1, r=1, eps=0.5, from x=0

OU = LinearDynamics([[-1.0]])
UNIT = Domain.box([-1.0], [1.0])


def _ens(times, t_max=10.0):
    return ExitEnsemble(np.asarray(times, dtype=float), 0, SdeConfig(0.1, 0.01, t_max, 0))


def test_frozen_oracle_is_reproducible():
    assert ou_mean_exit_quadrature() == pytest.approx(MEAN_OU, rel=1e-7)
    assert ou_mean_exit_dense() == pytest.approx(MEAN_OU, rel=1e-5)


# --- first exit --------------------------------------------------------------------

def test_equilibrium_without_noise_is_censored(params):
    x = addiction_free_equilibrium(params).as_array()
    r = first_exit(x, ModelDynamics(params), SdeConfig(0.0, 0.01, 50.0, 0), Domain.simplex())
    assert isinstance(r, Censored) and r.t_max == 50.0


def test_box_not_containing_start_exits_after_one_step(params):
    x = addiction_free_equilibrium(params).as_array()
    d = Domain.box([0.0, -1, -1], [0.5, 1, 1])
    assert first_exit(x, ModelDynamics(params), SdeConfig(0.01, 0.01, 5.0, 3), d) == 0.01


def test_first_exit_matches_ensemble_member():
    cfg = SdeConfig(0.5, 1e-3, 100.0, 11)
    ens = run_ensemble([0.0], OU, cfg, UNIT, 8)
    for i in range(8):
        assert first_exit([0.0], OU, cfg, UNIT, path_index=i) == ens.path_exit_times[i]


def test_ou_mean_exit_time_against_oracle():
    cfg = SdeConfig(0.5, 1e-4, 200.0, 1)
    m = mean_exit_time(run_ensemble([0.0], OU, cfg, UNIT, 2000))
    assert not m.censoring_flag
    assert abs(m.mean - MEAN_OU) <= 3 * m.stderr


# --- ensembles ----------------------------------------------------------------------

def test_single_path_ensemble():
    cfg = SdeConfig(0.5, 1e-3, 100.0, 2)
    ens = run_ensemble([0.0], OU, cfg, UNIT, 1)
    assert ens.n_paths == 1
    assert ens.path_exit_times[0] == first_exit([0.0], OU, cfg, UNIT)


def test_worker_count_does_not_change_results(params):
    x = addiction_free_equilibrium(params).as_array()
    cfg = SdeConfig(0.01, 0.01, 20.0, 5)
    d = Domain.simplex()
    e1 = run_ensemble(x, ModelDynamics(params), cfg, d, 200, n_workers=1)
    e4 = run_ensemble(x, ModelDynamics(params), cfg, d, 200, n_workers=4)
    assert e1 == e4
    np.testing.assert_array_equal(e1.exit_states, e4.exit_states)


def test_first_path_offset_selects_streams():
    cfg = SdeConfig(0.5, 1e-3, 100.0, 4)
    full = run_ensemble([0.0], OU, cfg, UNIT, 10)
    tail = run_ensemble([0.0], OU, cfg, UNIT, 4, first_path=6)
    np.testing.assert_array_equal(full.path_exit_times[6:], tail.path_exit_times)


def test_censoring_is_counted():
    cfg = SdeConfig(0.05, 1e-2, 5.0, 0)
    ens = run_ensemble([0.0], OU, cfg, UNIT, 50)
    assert ens.n_censored == 50 and ens.exit_times.size == 0
    m = mean_exit_time(ens)
    assert m.mean == 5.0 and m.censoring_flag and m.censored_fraction == 1.0


def test_ensemble_validation():
    cfg = SdeConfig(0.5, 1e-3, 1.0, 0)
    with pytest.raises(ValidationError):
        run_ensemble([0.0], OU, cfg, UNIT, 0)
    with pytest.raises(ValidationError):
        run_ensemble([0.0], OU, cfg, UNIT, 5, n_workers=0)


# --- survival and rates --------------------------------------------------------------

def test_survival_examples():
    e = _ens([1, 2, 3, 4])
    c = survival_curve(e, [0.0, 2.5, 4.0, 5.0])
    np.testing.assert_array_equal(c.survival, [1.0, 0.5, 0.0, 0.0])
    c = survival_curve(_ens([np.inf] * 3))
    assert np.all(c.survival == 1.0)
    c = survival_curve(_ens([1.0, np.inf]), [0.5, 1.0, 9.0])
    np.testing.assert_array_equal(c.survival, [1.0, 0.5, 0.5])


def test_survival_grid_validation():
    e = _ens([1.0, 2.0])
    with pytest.raises(ValidationError):
        survival_curve(e, [0.0, 0.0, 1.0])
    with pytest.raises(ValidationError):
        survival_curve(e, [0.0, 11.0])


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.one_of(st.floats(0.001, 10.0), st.just(math.inf)), min_size=1, max_size=60),
    st.lists(st.floats(0.0, 10.0), min_size=2, max_size=40, unique=True),
)
def test_survival_is_monotone_and_bounded(times, grid):
    c = survival_curve(_ens(times), sorted(grid))
    assert np.all(np.diff(c.survival) <= 0)
    assert np.all((c.survival >= 0) & (c.survival <= 1))
    n_exited = sum(np.isfinite(times))
    assert c.survival[-1] >= 1 - n_exited / len(times)


def test_half_ensembles_agree():
    cfg = SdeConfig(0.5, 1e-3, 100.0, 9)
    ens = run_ensemble([0.0], OU, cfg, UNIT, 4000)
    a = np.sort(ens.path_exit_times[:2000])
    b = np.sort(ens.path_exit_times[2000:])
    grid = np.concatenate([a, b])
    Fa = np.searchsorted(a, grid, side="right") / a.size
    Fb = np.searchsorted(b, grid, side="right") / b.size
    ks = np.abs(Fa - Fb).max()
    assert ks < 1.63 * math.sqrt(2 / 2000)  # 1% level


def test_rate_recovers_exponential_exactly():
    t = np.linspace(0, 20, 201)
    from opioid_residence.exitstats import SurvivalCurve

    c = SurvivalCurve(t, np.exp(-0.2 * t + 0.1), 10**6)
    r = estimate_exit_rate(c, (1.0, 15.0))
    assert r.lambda_hat == pytest.approx(0.2, abs=1e-12)
    assert r.intercept == pytest.approx(-0.1, abs=1e-12)
    r2 = estimate_exit_rate(c, (1.0, 19.0))
    assert r2.lambda_hat == pytest.approx(0.2, abs=1e-12)


def test_rate_errors():
    c = survival_curve(_ens([1, 2, 3, 4]), np.linspace(0, 10, 101))
    with pytest.raises(ComputationError, match="zero"):
        estimate_exit_rate(c, (0.5, 6.0))
    with pytest.raises(ComputationError, match="points"):
        estimate_exit_rate(c, (0.5, 0.7))


def test_ou_rate_is_close_to_spectral_gap():
    cfg = SdeConfig(0.5, 1e-3, 100.0, 3)
    ens = run_ensemble([0.0], OU, cfg, UNIT, 20000)
    r = estimate_exit_rate(survival_curve(ens))
    assert r.lambda_hat == pytest.approx(0.24299292363128888, rel=0.1)


def test_mean_exit_examples():
    m = mean_exit_time(_ens([1, 2, 3, 4]))
    assert m.mean == 2.5
    assert m.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert not m.censoring_flag
    assert mean_exit_time(_ens([1] * 99 + [np.inf])).censoring_flag is False
    assert mean_exit_time(_ens([1] * 98 + [np.inf] * 2)).censoring_flag is True


def test_csv_headers(tmp_path):
    e = _ens([1.0, np.inf])
    e.to_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "path,exit_time,censored"
    assert lines[2].split(",")[2] == "1"
    survival_curve(e).to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "t,survival"


# --- paired comparison ---------------------------------------------------------------

def test_paired_comparison_detects_faster_exit():
    cfg = SdeConfig(0.5, 1e-3, 100.0, 6)
    fast = run_ensemble([0.0], LinearDynamics([[-0.5]]), cfg, UNIT, 1000)
    slow = run_ensemble([0.0], OU, cfg, UNIT, 1000)
    cmp = paired_rate_comparison(fast, slow, n_boot=200)
    assert cmp.difference > 0 and cmp.a_exceeds_b
    rev = paired_rate_comparison(slow, fast, n_boot=200)
    assert not rev.a_exceeds_b
    assert rev.difference == pytest.approx(-cmp.difference)


def test_paired_comparison_of_identical_ensembles():
    cfg = SdeConfig(0.5, 1e-3, 100.0, 6)
    e = run_ensemble([0.0], OU, cfg, UNIT, 300)
    cmp = paired_rate_comparison(e, e, n_boot=50)
    assert cmp.difference == 0.0 and cmp.lower_bound == 0.0 and not cmp.a_exceeds_b


def test_paired_comparison_requires_matching_streams():
    a = run_ensemble([0.0], OU, SdeConfig(0.5, 1e-3, 50.0, 1), UNIT, 20)
    b = run_ensemble([0.0], OU, SdeConfig(0.5, 1e-3, 50.0, 2), UNIT, 20)
    with pytest.raises(ValidationError):
        paired_rate_comparison(a, b)


# --- continuity correction ------------------------------------------------------------

def test_corrected_domain_shift():
    from opioid_residence.exitstats import corrected_domain

    d = Domain.intersection(Domain.simplex(), Domain.box([0.1, 0.0, 0.0], [0.9, 0.5, 0.5]))
    cfg = SdeConfig(0.04, 0.01, 1.0, 0)
    c = corrected_domain(d, cfg)
    shift = d.h - c.h
    expect = 0.5826 * 0.02 * np.abs(d.G[:, 0])
    np.testing.assert_allclose(shift, expect, rtol=1e-15)
    np.testing.assert_array_equal(c.closed, d.closed)
    assert np.all(corrected_domain(d, SdeConfig(0.0, 0.01, 1.0, 0)).h == d.h)


def test_continuity_correction_removes_monitoring_bias():
    cfg = SdeConfig(0.5, 1e-2, 200.0, 8)
    raw = mean_exit_time(run_ensemble([0.0], OU, cfg, UNIT, 4000))
    cor = mean_exit_time(run_ensemble([0.0], OU, cfg, UNIT, 4000, continuity_correction=True))
    assert raw.mean - MEAN_OU > 3 * raw.stderr
    assert abs(cor.mean - MEAN_OU) <= 3 * cor.stderr
    assert first_exit([0.0], OU, cfg, UNIT, path_index=5, continuity_correction=True) <= first_exit(
        [0.0], OU, cfg, UNIT, path_index=5
    )
