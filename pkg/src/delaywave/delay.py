"""Distributed-delay kernel: quadrature over the delay window and the
admissibility conditions tying the delayed damping to the instantaneous one.

The kernel holds the window [tau1, tau2], trapezoid nodes/weights on it,
nonnegative density samples mu2(tau), the instantaneous coefficient mu1 and
the kernel mass M = integral mu2. Stability of the energy requires M < mu1
(mass condition) and, node-wise in x,

    M + (tau2 - tau1) * xi(x) / m(x) < mu1

for the positive weight field xi entering the energy. The canonical choice
xi = m * (mu1 - M) / (2 (tau2 - tau1)) satisfies it with margin (mu1 - M)/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditionError, GridMismatchError
from .spaces import ExponentField, Grid


@dataclass(eq=False)
class DelayKernel:
    tau1: float
    tau2: float
    nodes: np.ndarray
    weights: np.ndarray
    mu2: np.ndarray
    mu1: float
    mass: float

    @property
    def width(self):
        return self.tau2 - self.tau1


@dataclass(eq=False)
class WeightField:
    """Positive nodal weight multiplying the delay energy density."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridMismatchError("weight samples do not match the grid")


def build_kernel(mu2, tau1, tau2, n_tau=16, mu1=1.0) -> DelayKernel:
    """Sample the delay density on trapezoid nodes and compute its mass.

    ``mu2`` is either a callable of tau or an array of n_tau samples.
    """
    tau1 = float(tau1)
    tau2 = float(tau2)
    if not 0.0 < tau1 < tau2:
        raise ConditionError(f"need 0 < tau1 < tau2, got [{tau1}, {tau2}]")
    n_tau = int(n_tau)
    if n_tau < 2:
        raise ConditionError("need at least 2 delay quadrature nodes")
    if mu1 < 0.0:
        raise ConditionError("mu1 must be nonnegative")

    nodes = np.linspace(tau1, tau2, n_tau)
    h = (tau2 - tau1) / (n_tau - 1)
    weights = np.full(n_tau, h)
    weights[0] = weights[-1] = h / 2.0

    if callable(mu2):
        samples = np.asarray(mu2(nodes), dtype=float)
        samples = np.broadcast_to(samples, nodes.shape).copy()
    else:
        samples = np.asarray(mu2, dtype=float)
        if samples.shape != nodes.shape:
            raise ConditionError(
                f"tabulated mu2 must provide {n_tau} samples, got {samples.shape}"
            )
    if np.any(samples < 0.0):
        raise ConditionError("delay density mu2 must be nonnegative")

    mass = float(weights @ samples)
    return DelayKernel(tau1, tau2, nodes, weights, samples, float(mu1), mass)


def check_mass_condition(kernel: DelayKernel) -> bool:
    """Strict dominance of the instantaneous damping: mass < mu1."""
    return kernel.mass < kernel.mu1


def xi_default(kernel: DelayKernel, m: ExponentField) -> WeightField:
    """Canonical weight xi = m * (mu1 - mass) / (2 * width); requires mass < mu1."""
    if not check_mass_condition(kernel):
        raise ConditionError(
            "mass condition fails (mass >= mu1); default weight would not be positive"
        )
    vals = m.values * (kernel.mu1 - kernel.mass) / (2.0 * kernel.width)
    return WeightField(m.grid, vals)


def check_xi_condition(kernel: DelayKernel, xi: WeightField, m: ExponentField) -> bool:
    """Node-wise strict inequality mass + width * xi/m < mu1."""
    if xi.grid.counts != m.grid.counts:
        raise GridMismatchError("weight and exponent fields live on different grids")
    lhs = kernel.mass + kernel.width * xi.values / m.values
    return bool(np.all(lhs < kernel.mu1))


def dissipation_margins(kernel: DelayKernel, xi: WeightField, m: ExponentField):
    """The two node-wise infima controlling the energy decay rate.

    Returns (inf_x f(x), inf_x xi(x)/m(x)) with
    f(x) = mu1 - (mass + width * xi(x)/m(x)).
    """
    ratio = xi.values / m.values
    f = kernel.mu1 - (kernel.mass + kernel.width * ratio)
    return float(f.min()), float(ratio.min())


def dissipation_constant(kernel: DelayKernel, xi: WeightField, m: ExponentField) -> float:
    """Constant C0 > 0 such that the energy decays at least at rate
    C0 * (damping modular + boundary delay modular).

    Uses min of the two margins: the decay inequality needs a constant no
    larger than both coefficients; the max variant is exposed via
    ``dissipation_margins`` for logging.
    """
    if not check_xi_condition(kernel, xi, m):
        raise ConditionError("weight field violates the delay admissibility condition")
    lo_f, lo_ratio = dissipation_margins(kernel, xi, m)
    c0 = min(lo_f, lo_ratio)
    if c0 <= 0.0:
        raise ConditionError("dissipation constant is not positive")
    return c0
