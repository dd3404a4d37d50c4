"""Pointwise reaction terms f acting by substitution, F(y)(x) = f(y(x)).

Every kind satisfies f(0) = 0 and f'(0) = 0, so the linearization at the
origin is carried entirely by the operator shift. Default shifts:

    linear        f(s) = 0                 shift 0
    fisher        f(s) = -s^2              shift 1   (logistic reaction y - y^2)
    schloegl      f(s) = s^3               shift 0
    lipschitz_c2  f(s) = gamma (s - sin s) shift 0   (f'' bounded, globally Lipschitz)
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConfigError

KINDS = ("linear", "fisher", "schloegl", "lipschitz_c2")

DEFAULT_SHIFT = {"linear": 0.0, "fisher": 1.0, "schloegl": 0.0, "lipschitz_c2": 0.0}


@dataclass(frozen=True)
class Nonlinearity:
    kind: str
    f: Callable = field(repr=False)
    fp: Callable = field(repr=False)
    fpp: Callable = field(repr=False)
    params: dict = field(default_factory=dict)

    @property
    def is_linear(self):
        return self.kind == "linear"


def make_nonlinearity(kind, gamma=0.5):
    kind = str(kind).lower()
    if kind == "linear":
        return Nonlinearity(
            kind,
            f=lambda s: np.zeros_like(s),
            fp=lambda s: np.zeros_like(s),
            fpp=lambda s: np.zeros_like(s),
        )
    if kind == "fisher":
        return Nonlinearity(
            kind,
            f=lambda s: -(s**2),
            fp=lambda s: -2.0 * s,
            fpp=lambda s: np.full_like(s, -2.0),
        )
    if kind == "schloegl":
        return Nonlinearity(
            kind,
            f=lambda s: s**3,
            fp=lambda s: 3.0 * s**2,
            fpp=lambda s: 6.0 * s,
        )
    if kind == "lipschitz_c2":
        g = float(gamma)
        return Nonlinearity(
            kind,
            f=lambda s: g * (s - np.sin(s)),
            fp=lambda s: g * (1.0 - np.cos(s)),
            fpp=lambda s: g * np.sin(s),
            params={"gamma": g},
        )
    raise ConfigError(f"unknown nonlinearity kind {kind!r}; choose from {KINDS}")


def nonlinearity_apply(nl, y, order=0):
    """Evaluate f, f' or f'' pointwise on the node values of y."""
    y = np.asarray(y, dtype=float)
    if order == 0:
        return nl.f(y)
    if order == 1:
        return nl.fp(y)
    if order == 2:
        return nl.fpp(y)
    raise ConfigError(f"order must be 0, 1 or 2, got {order}")
