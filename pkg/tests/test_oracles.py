import numpy as np
import pytest

from nonlocal_mems.oracles import (
    first_zero, shooting_capacitance, shooting_lambda, shooting_nonlocal_fold,
    shooting_profile, shooting_pull_in,
)

# frozen reference values of the shooting oracle
PULL_IN = {1: (0.350004, 0.38835), 2: (0.789229, 0.44429), 3: (1.298788, 0.50351)}


@pytest.mark.parametrize("n", sorted(PULL_IN))
def test_pull_in_values(n):
    lam, s = shooting_pull_in(n)
    assert lam == pytest.approx(PULL_IN[n][0], rel=1e-5)
    assert s == pytest.approx(PULL_IN[n][1], abs=1e-4)


def test_scaling_in_radius():
    assert shooting_pull_in(2, 2.0)[0] == pytest.approx(0.25 * shooting_pull_in(2)[0], rel=1e-8)


def test_small_lambda_expansion():
    # w ~ lam (1 - x^2)/2 for small lam
    lam = shooting_lambda(1e-4, 1, 1.0)
    assert lam == pytest.approx(2e-4, rel=1e-3)
    assert first_zero(0.0, 1) == 0.0


def test_profile_vanishes_at_edge():
    prof = shooting_profile(0.2, 1, 1.0, np.array([0.0, 0.5, 1.0]))
    assert prof[-1] == pytest.approx(0.0, abs=1e-8)
    assert prof[0] > prof[1] > 0
    with pytest.raises(ValueError):
        shooting_profile(0.4, 1, 1.0, np.array([0.0]))


def test_capacitance_and_nonlocal_fold():
    assert shooting_capacitance(0.0, 1, 1.0) == pytest.approx(2.0, rel=1e-8)
    assert shooting_capacitance(0.5, 1, 1.0) == pytest.approx(3.07154, rel=1e-5)
    lam, s = shooting_nonlocal_fold(1, 1.0, 1.0)
    assert lam == pytest.approx(5.648375, rel=1e-6)
    assert s == pytest.approx(0.6042, abs=1e-3)
    # the curve passes the local fold before reaching its nonlocal maximum
    assert s > PULL_IN[1][1]
