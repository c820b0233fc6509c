import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opioid_residence.domain import Domain
from opioid_residence.exceptions import ValidationError
from opioid_residence.quasipotential import (
    log_residence_scaling,
    matrix_norm,
    matrix_norm_spectral,
    quasipotential,
)
from opioid_residence.sde import LinearDynamics

CUBE = Domain.box([-1, -1, -1], [1, 1, 1])


def _random_psd(rng, n=3, rank=None):
    M = rng.normal(size=(n, rank or n))
    return M @ M.T


def _boundary_samples(rng, lower, upper, n):
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    x = rng.uniform(lower, upper, size=(n, lower.size))
    axis = rng.integers(0, lower.size, n)
    side = rng.integers(0, 2, n)
    x[np.arange(n), axis] = np.where(side == 1, upper[axis], lower[axis])
    return x


def test_identity_on_unit_cube():
    r = quasipotential(np.eye(3), CUBE)
    assert r.phi == pytest.approx(0.5, abs=1e-15)
    assert np.abs(r.minimizer).max() == pytest.approx(1.0)
    assert r.norm == 1.0 and r.norm_kind == "spectral"


def test_domain_scaling_is_quadratic():
    P = np.diag([1.0, 2.0, 4.0])
    base = quasipotential(P, CUBE).phi
    for c in (0.5, 2.0, 3.0):
        assert quasipotential(P, CUBE.scaled(c)).phi == pytest.approx(c**2 * base, rel=1e-12)
    assert quasipotential(np.eye(3), CUBE.scaled(2.0)).phi == pytest.approx(2.0, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 2**31 - 1))
def test_invariant_under_scaling_P(c, seed):
    P = _random_psd(np.random.default_rng(seed))
    a = quasipotential(P, CUBE).phi
    b = quasipotential(c * P, CUBE).phi
    assert b == pytest.approx(a, rel=1e-10)


def test_against_boundary_sampling(rng):
    lower, upper = [-0.3, -1.0, -0.5], [0.8, 0.6, 1.2]
    d = Domain.box(lower, upper)
    for _ in range(5):
        P = _random_psd(rng)
        r = quasipotential(P, d)
        x = _boundary_samples(rng, lower, upper, 200000)
        sampled = np.einsum("ij,jk,ik->i", x, P, x).min() / (2 * matrix_norm_spectral(P))
        assert r.phi <= sampled + 1e-12
        assert sampled <= r.phi * (1 + 2e-2) + 1e-6


def test_rank_deficient_P(rng):
    P = _random_psd(rng, rank=1)
    r = quasipotential(P, CUBE)
    assert r.phi >= 0
    x = _boundary_samples(rng, [-1] * 3, [1] * 3, 100000)
    sampled = np.einsum("ij,jk,ik->i", x, P, x).min() / (2 * matrix_norm_spectral(P))
    assert r.phi <= sampled + 1e-12


def test_minimizer_lies_on_reported_facet(rng):
    d = Domain.intersection(Domain.simplex(), Domain.box([0.05, 0.02, 0.01], [0.9, 0.5, 0.5]))
    c = np.array([0.4, 0.2, 0.15])
    for _ in range(20):
        P = _random_psd(rng)
        r = quasipotential(P, d, center=c)
        slack = d.facet_slack(r.minimizer)
        assert abs(slack[r.facet_index]) <= 1e-12
        assert slack.min() >= -1e-12
        assert r.facet == d.names[r.facet_index]


def test_center_shifts_the_form():
    d = Domain.box([0, 0, 0], [2, 2, 2])
    r = quasipotential(np.eye(3), d, center=[0.5, 1.0, 1.0])
    assert r.phi == pytest.approx(0.125)
    assert r.facet == "x1=lo"


def test_norms(rng):
    P = _random_psd(rng) - 0.5 * np.eye(3)
    ref = np.sqrt(np.linalg.eigvalsh(P.T @ P).max())
    assert matrix_norm_spectral(P) == pytest.approx(ref, rel=1e-10)
    assert matrix_norm(P, "frobenius") == pytest.approx(np.linalg.norm(P), rel=1e-14)
    Q = _random_psd(rng)
    r = quasipotential(Q, CUBE, norm_kind="frobenius")
    s = quasipotential(Q, CUBE)
    assert r.phi == pytest.approx(s.phi * s.norm / r.norm, rel=1e-12)
    with pytest.raises(ValidationError):
        matrix_norm(Q, "nuclear")


def test_errors():
    with pytest.raises(ValidationError, match="semidefinite"):
        quasipotential(np.diag([1.0, -1.0, 1.0]), CUBE)
    with pytest.raises(ValidationError, match="inside"):
        quasipotential(np.eye(3), CUBE, center=[1.0, 0, 0])
    with pytest.raises(ValidationError, match="symmetric"):
        quasipotential(np.array([[1.0, 1, 0], [0, 1, 0], [0, 0, 1]]), CUBE)
    with pytest.raises(ValidationError, match="zero"):
        quasipotential(np.zeros((3, 3)), CUBE)
    with pytest.raises(ValidationError):
        quasipotential(np.eye(2), CUBE)


def test_csv(tmp_path):
    quasipotential(np.eye(3), CUBE).to_csv(tmp_path / "phi.csv")
    head, row = (tmp_path / "phi.csv").read_text().splitlines()
    assert head == "phi,min_x1,min_x2,min_x3,facet,norm_kind"
    assert row.startswith("0.5,")


# --- residence-time scaling -----------------------------------------------------------

OU = LinearDynamics([[-1.0]])


def test_scaling_table_in_one_dimension():
    d = Domain.box([-1.0], [1.0])
    phi = quasipotential(np.eye(1), d).phi
    tab = log_residence_scaling(phi, OU, d, [0.5, 0.35, 0.25], 400, dt=1e-2, t_max=1e3, seed=1)
    assert np.all(tab.column("phi") == phi)
    assert np.all(np.diff(tab.column("mean_tau")) > 0)
    assert np.all(tab.column("censored_fraction") == 0)
    np.testing.assert_allclose(tab.column("eps_log_tau"), tab.column("epsilon") * np.log(tab.column("mean_tau")))


def test_larger_domain_longer_residence():
    res = []
    for r in (0.8, 1.0, 1.2):
        d = Domain.box([-r], [r])
        tab = log_residence_scaling(0.0, OU, d, [0.5], 1000, dt=1e-2, t_max=1e3, seed=3)
        res.append(tab.rows[0].mean_tau)
    assert res[0] < res[1] < res[2]


def test_scaling_csv_and_validation(tmp_path):
    d = Domain.box([-1.0], [1.0])
    tab = log_residence_scaling(0.5, OU, d, [0.5], 50, dt=1e-2, t_max=100)
    tab.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "epsilon,eps_log_tau,mean_tau,stderr,censored_fraction,phi"
    for bad in ([], [0.1, 0.2], [0.5, 0.0]):
        with pytest.raises(ValidationError):
            log_residence_scaling(0.5, OU, d, bad, 10)
