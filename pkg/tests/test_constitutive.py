import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fibercrack.constitutive import DomainError, ModelParams, energy_direct, energy_inverse, stress_direct

P = ModelParams()


def test_defaults():
    assert (P.epsilon, P.beta, P.k) == (0.03, 3.0, 2.0)


@pytest.mark.parametrize("field", ["epsilon", "beta", "k"])
@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_params_must_be_positive(field, bad):
    with pytest.raises(ValueError):
        ModelParams(**{field: bad})


def test_direct_values():
    assert energy_direct(1.0, P) == 0.0
    assert energy_direct(2.0, P) == pytest.approx(0.125, abs=1e-15)


@pytest.mark.parametrize("F", [0.0, -0.5])
def test_direct_domain(F):
    with pytest.raises(DomainError):
        energy_direct(F, P)


def test_inverse_values():
    assert energy_inverse(0.0, P) == 0.0
    assert energy_inverse(1.0, P) == 0.0
    assert energy_inverse(0.5, P) == pytest.approx(0.0625, abs=1e-15)
    lam = 2.449
    assert energy_inverse(1 / lam, P, 2) == pytest.approx(3.0 / lam - 2.0, abs=1e-14)
    assert energy_inverse(1 / lam, P, 2) == pytest.approx(-0.77501, abs=1e-5)


def test_inverse_second_derivative_by_differences():
    H, h = 1 / 2.449, 1e-4
    fd = (energy_inverse(H + h, P) - 2 * energy_inverse(H, P) + energy_inverse(H - h, P)) / h**2
    assert fd == pytest.approx(energy_inverse(H, P, 2), abs=1e-6)


def test_inverse_domain_and_clamp():
    with pytest.raises(DomainError):
        energy_inverse(-1e-6, P)
    assert energy_inverse(-1e-13, P) == 0.0
    assert energy_inverse(-1e-3, P, check=False) < 0.0
    with pytest.raises(ValueError):
        energy_inverse(0.5, P, order=4)


def test_derivative_chain_on_grid():
    H = np.linspace(0.0, 2.0, 81)[1:-1]
    h = 1e-5
    for m in range(3):
        fd = (energy_inverse(H + h, P, m) - energy_inverse(H - h, P, m)) / (2 * h)
        assert np.max(np.abs(fd - energy_inverse(H, P, m + 1))) <= 1e-6


def test_wells_nonnegative():
    H = np.linspace(0.0, 1.0, 101)
    assert np.all(energy_inverse(H, P) >= 0)


@pytest.mark.parametrize("F", [1.1, 2.0, 5.0])
def test_inverse_direct_relation(F):
    assert abs(energy_inverse(1 / F, P) - energy_direct(F, P) / F) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(F=st.floats(0.2, 20.0), beta=st.floats(0.1, 10.0))
def test_stress_is_derivative_of_direct_energy(F, beta):
    p = ModelParams(beta=beta)
    h = 1e-6 * F
    fd = (energy_direct(F + h, p) - energy_direct(F - h, p)) / (2 * h)
    assert fd == pytest.approx(stress_direct(F, p), rel=1e-6, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(H=st.floats(0.01, 3.0), beta=st.floats(0.1, 10.0))
def test_inverse_energy_relation(H, beta):
    p = ModelParams(beta=beta)
    assert energy_inverse(H, p) == pytest.approx(H * energy_direct(1 / H, p), rel=1e-10, abs=1e-14)
