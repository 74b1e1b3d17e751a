"""Linear lateral aircraft dynamics.

State order is ``[phi, p, beta, r]`` (bank angle, roll rate, sideslip, yaw rate)
and input order is ``[delta_a, delta_r]`` (aileron, rudder). Everything is in
radians and seconds.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

ACTION_BOUND = 1.0


class LateralState(NamedTuple):
    phi: float
    p: float
    beta: float
    r: float


class ControlInput(NamedTuple):
    delta_a: float
    delta_r: float


@dataclass(frozen=True)
class AeroParams:
    """Stability and control derivatives of the lateral model.

    Defaults are the coefficients of the reference aircraft. ``N_beta_prime``
    is listed there as ``3.382m``; the suffix is ignored.
    """

    Lp_prime: float = -1.699
    Lr_prime: float = 0.172
    Lbeta_prime: float = -4.546
    Lda_prime: float = 27.276
    Ldr_prime: float = 0.576
    Np_prime: float = -0.0654
    Nr_prime: float = -0.0893
    Nbeta_prime: float = 3.382
    Nda_prime: float = 0.0
    Ndr_prime: float = 0.0
    Yp_star: float = 0.0
    Yphi_star: float = 0.0488
    Yr_star: float = 0.0
    Ybeta: float = -0.0829
    Yda_star: float = 0.0
    Ydr_star: float = 0.116

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValueError(f"aero parameter {f.name} is not finite")

    @classmethod
    def from_mapping(cls, values: dict) -> "AeroParams":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise KeyError(f"unknown aero parameter(s): {', '.join(sorted(unknown))}")
        return cls(**{k: float(v) for k, v in values.items()})


@dataclass(frozen=True)
class ContinuousModel:
    Ac: np.ndarray  # (4, 4)
    Bc: np.ndarray  # (4, 2)


@dataclass(frozen=True)
class DiscreteModel:
    F: np.ndarray  # (4, 4)
    G: np.ndarray  # (4, 2)
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")


def build_continuous(params: AeroParams | None = None) -> ContinuousModel:
    """Assemble ``xdot = Ac x + Bc u`` from the aero derivatives."""
    q = params or AeroParams()
    Ac = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [0.0, q.Lp_prime, q.Lbeta_prime, q.Lr_prime],
            [q.Yphi_star, q.Yp_star, q.Ybeta, q.Yr_star - 1.0],
            [0.0, q.Np_prime, q.Nbeta_prime, q.Nr_prime],
        ]
    )
    Bc = np.array(
        [
            [0.0, 0.0],
            [q.Lda_prime, q.Ldr_prime],
            [q.Yda_star, q.Ydr_star],
            [q.Nda_prime, q.Ndr_prime],
        ]
    )
    Ac.flags.writeable = False
    Bc.flags.writeable = False
    return ContinuousModel(Ac, Bc)


def rk4_step(model: ContinuousModel, x, u, dt: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step with the input held constant."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    A, B = model.Ac, model.Bc
    x = np.asarray(x, dtype=float)
    bu = B @ np.asarray(u, dtype=float)
    k1 = A @ x + bu
    k2 = A @ (x + 0.5 * dt * k1) + bu
    k3 = A @ (x + 0.5 * dt * k2) + bu
    k4 = A @ (x + dt * k3) + bu
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def euler_discretize(params: AeroParams | None, dt: float) -> DiscreteModel:
    """First-order Euler discretization: ``F = I + Ac dt``, ``G = Bc dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    cont = build_continuous(params)
    return DiscreteModel(F=np.eye(4) + cont.Ac * dt, G=cont.Bc * dt, dt=float(dt))


def discrete_step(model: DiscreteModel, x, u) -> np.ndarray:
    return model.F @ np.asarray(x, dtype=float) + model.G @ np.asarray(u, dtype=float)


# Series oracle --------------------------------------------------------------

ORACLE_TOL = 1e-12
_MAX_TERMS = 60


def _expm_series(M: np.ndarray, tol: float = ORACLE_TOL) -> np.ndarray:
    """exp(M) by scaling-and-squaring around a truncated Taylor series.

    M is scaled by 2**-s so that ||M/2**s||_1 <= 0.5. With that scaling the
    Taylor remainder after the last included term T_k is bounded by
    ||T_k|| * 0.5 / (k + 1 - 0.5), and terms are added until this bound drops
    below ``tol * 2**-s`` (squaring amplifies the relative error by ~2**s).
    """
    norm = np.abs(M).sum(axis=0).max()
    s = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    X = M / (2.0**s)
    target = tol / (2.0**s)
    n = M.shape[0]
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, _MAX_TERMS + 1):
        term = term @ X / k
        result = result + term
        tnorm = np.abs(term).sum(axis=0).max()
        if tnorm * 0.5 / (k + 0.5) < target:
            break
    else:
        raise ArithmeticError(f"matrix exponential series did not reach tol={tol}")
    for _ in range(s):
        result = result @ result
    return result


def exact_step_oracle(model: ContinuousModel, x, u, dt: float) -> np.ndarray:
    """Zero-order-hold propagation of the linear model over ``dt``.

    Uses the block identity exp([[A, B], [0, 0]] dt) = [[e^{A dt}, (int_0^dt e^{As} ds) B], [0, I]].
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    n, m = model.Bc.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = model.Ac
    M[:n, n:] = model.Bc
    E = _expm_series(M * dt)
    return E[:n, :n] @ np.asarray(x, dtype=float) + E[:n, n:] @ np.asarray(u, dtype=float)
