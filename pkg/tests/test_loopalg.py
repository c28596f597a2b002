import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loopcmc.loopalg import (
    DetDrift, LoopMatrix, TailWarning, check_structure, eval_and_dlambda,
    inverse, multiply, omega, omega_inverse,
)

from conftest import N, random_twisted, random_unipotent

UNIT_CIRCLE = np.exp(2j * np.pi * np.arange(16) / 16)


def test_identity_product():
    ident = LoopMatrix.identity(N)
    assert multiply(ident, ident).max_abs_diff(ident) == 0


def test_omega_products():
    # omega_1 squared is -I; omega_1 omega_-1 is -omega_2
    assert multiply(omega(1), omega(1)).max_abs_diff(-LoopMatrix.identity(N)) == 0
    assert multiply(omega(1), omega(-1)).max_abs_diff(-omega(2)) == 0
    assert multiply(omega(1), omega(2)).max_abs_diff(omega(-1)) == 0


def test_inverse_of_omega1():
    expected = LoopMatrix.from_terms({1: [[0, -1], [0, 0]], -1: [[0, 0], [1, 0]]}, N)
    assert inverse(omega(1)).max_abs_diff(expected) == 0
    assert omega_inverse(1).max_abs_diff(expected) == 0
    assert inverse(LoopMatrix.identity(N)).max_abs_diff(LoopMatrix.identity(N)) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_evaluation_homomorphism(seed):
    rng = np.random.default_rng(seed)
    a = random_twisted(rng, -4, 4)
    b = random_twisted(rng, -4, 3)
    ab = multiply(a, b)
    for lam in UNIT_CIRCLE:
        assert np.abs(ab(lam) - a(lam) @ b(lam)).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_adjugate_round_trip(seed):
    rng = np.random.default_rng(seed)
    a = random_unipotent(rng, -1) @ random_unipotent(rng, 1)
    prod = multiply(a, inverse(a))
    assert prod.max_abs_diff(LoopMatrix.identity(N)) < 1e-10
    rep = check_structure(prod)
    assert rep.parity == 0 and rep.ok


def test_det_drift_raised():
    a = LoopMatrix.from_terms({0: np.diag([2.0, 1.0])}, N)
    with pytest.raises(DetDrift):
        inverse(a)


def test_eval_and_dlambda_examples():
    v, d = eval_and_dlambda(LoopMatrix.identity(N), 1.0)
    assert np.array_equal(v, np.eye(2)) and np.array_equal(d, np.zeros((2, 2)))
    v, d = eval_and_dlambda(omega(1), 1.0)
    assert np.array_equal(v, [[0, 1], [-1, 0]])
    assert np.array_equal(d, [[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        eval_and_dlambda(omega(1), 0.0)


def test_dlambda_matches_finite_difference(rng):
    for _ in range(10):
        a = random_twisted(rng, -5, 5)
        lam = rng.uniform(0.5, 1.5)
        h = 1e-6
        _, d = eval_and_dlambda(a, lam)
        fd = (a(lam + h) - a(lam - h)) / (2 * h)
        assert np.abs(fd - d).max() < 1e-7


def test_check_structure():
    rep = check_structure(LoopMatrix.identity(N))
    assert rep.parity == 0 and rep.imaginary == 0 and rep.det_residual == 0
    rep = check_structure(omega(1))
    assert rep.ok and rep.parity == 0
    bad = LoopMatrix.from_terms({0: np.eye(2), 2: [[0, 1e-3], [0, 0]]}, N)
    assert check_structure(bad).parity == pytest.approx(1e-3)


def test_tail_mass_recorded_and_warned():
    big = LoopMatrix.from_terms({0: np.eye(2), N: [[1.0, 0], [0, 0]]}, N)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        prod = multiply(big, big)
    assert prod.tail_mass == pytest.approx(1.0)
    assert any(issubclass(x.category, TailWarning) for x in w)
