"""Pointwise reaction terms and their first two derivatives."""

import numpy as np
import pytest

from parastab import make_nonlinearity, nonlinearity_apply
from parastab.errors import ConfigError
from parastab.pde_core.nonlinearity import DEFAULT_SHIFT, KINDS


def test_zero_fixed_point_all_kinds():
    for kind in KINDS:
        nl = make_nonlinearity(kind)
        assert nonlinearity_apply(nl, 0.0, order=0) == 0.0, f"f(0) != 0 for {kind}"
        assert nonlinearity_apply(nl, 0.0, order=1) == 0.0, f"f'(0) != 0 for {kind}"


def test_linear_kind_is_identically_zero():
    nl = make_nonlinearity("linear")
    y = np.linspace(-3.0, 3.0, 11)
    for order in (0, 1, 2):
        assert np.array_equal(nonlinearity_apply(nl, y, order), np.zeros(11))


def test_cubic_first_derivative():
    nl = make_nonlinearity("schloegl")
    y = np.full(5, 2.0)
    out = nonlinearity_apply(nl, y, order=1)
    assert np.array_equal(out, np.full(5, 12.0)), f"3*s^2 at s=2 is 12, got {out}"
    assert nonlinearity_apply(nl, 2.0, order=0) == 8.0


def test_quadratic_second_derivative_constant():
    nl = make_nonlinearity("fisher")
    out = nonlinearity_apply(nl, np.full(4, 0.5), order=2)
    assert np.array_equal(out, np.full(4, -2.0)), f"f''(-s^2) = -2, got {out}"
    assert nonlinearity_apply(nl, 0.5, order=0) == -0.25


def test_smooth_bounded_kind_values():
    gamma = 0.7
    nl = make_nonlinearity("lipschitz_c2", gamma=gamma)
    s = 1.3
    assert nonlinearity_apply(nl, s, 0) == pytest.approx(gamma * (s - np.sin(s)))
    assert nonlinearity_apply(nl, s, 1) == pytest.approx(gamma * (1 - np.cos(s)))
    assert nonlinearity_apply(nl, s, 2) == pytest.approx(gamma * np.sin(s))
    # second derivative stays within [-gamma, gamma] everywhere
    grid = np.linspace(-50.0, 50.0, 2001)
    assert np.all(np.abs(nonlinearity_apply(nl, grid, 2)) <= gamma + 1e-15)


def test_derivatives_match_finite_differences():
    for kind in ("fisher", "schloegl", "lipschitz_c2"):
        nl = make_nonlinearity(kind, gamma=0.9)
        s = np.array([-0.8, 0.3, 1.7])
        eps = 1e-6
        fd1 = (nonlinearity_apply(nl, s + eps, 0) - nonlinearity_apply(nl, s - eps, 0)) / (2 * eps)
        fd2 = (nonlinearity_apply(nl, s + eps, 1) - nonlinearity_apply(nl, s - eps, 1)) / (2 * eps)
        assert np.allclose(fd1, nonlinearity_apply(nl, s, 1), atol=1e-7), (
            f"{kind}: first derivative disagrees with finite differences"
        )
        assert np.allclose(fd2, nonlinearity_apply(nl, s, 2), atol=1e-7), (
            f"{kind}: second derivative disagrees with finite differences"
        )


def test_pointwise_equivariance():
    # applying to an array equals mapping over scalars
    nl = make_nonlinearity("schloegl")
    y = np.array([-1.0, 0.25, 2.5])
    scalar = np.array([nonlinearity_apply(nl, float(s), 0) for s in y])
    assert np.array_equal(nonlinearity_apply(nl, y, 0), scalar)


def test_default_shift_folds_linear_part():
    # the quadratic kind carries its +y linear part in the operator shift
    assert DEFAULT_SHIFT["fisher"] == 1.0
    assert DEFAULT_SHIFT["linear"] == 0.0
    assert DEFAULT_SHIFT["schloegl"] == 0.0
    assert DEFAULT_SHIFT["lipschitz_c2"] == 0.0


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        make_nonlinearity("quintic")
    nl = make_nonlinearity("fisher")
    with pytest.raises(ConfigError):
        nonlinearity_apply(nl, 1.0, order=3)
