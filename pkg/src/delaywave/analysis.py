"""Post-processing: life-span lower bound, global-existence gate, decay-rate
fits and regime classification.

The life-span bound is the improper integral

    T_low = integral_{phi0}^{inf} dy / (c y^{p2-1} + c y^{p1-1} + y + e0),

evaluated as adaptive quadrature on a finite head plus an analytic tail bound.
The constant c is certified empirically: the ratio the inequality must
dominate is maximized over a large randomized family of grid functions and
doubled. The same machinery certifies the smallness-gate constant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ConditionError
from .solver import TERMINATED_BLOWUP, TERMINATED_END
from .spaces import Grid, GridFunction, gradient_energy

log = logging.getLogger(__name__)

ENERGY_FLOOR = 1e-290  # below this the log-fit window is cut off


def blowup_lower_bound(phi0, e0, c, p1, p2, rel_tol=1e-6) -> float:
    """Life-span lower bound for negative-energy blow-up data.

    Head on [phi0, Y] via adaptive quadrature in log coordinates, plus the
    analytic tail bound Y^{2-p2} / (c (p2 - 2)), with Y chosen so the tail is
    below 1e-8 of the head.
    """
    if p2 < p1:
        raise ConditionError("need p2 >= p1")
    if p1 <= 2.0:
        raise ConditionError("need p1 > 2 for an integrable lower-bound kernel")
    if c <= 0.0:
        raise ConditionError("embedding constant must be positive")
    if phi0 <= 0.0:
        raise ConditionError("phi0 must be positive")

    def denom(y):
        return c * y ** (p2 - 1.0) + c * y ** (p1 - 1.0) + y + e0

    if denom(phi0) <= 0.0:
        raise ConditionError("denominator vanishes on the integration range")

    def head(upper):
        # substitute y = exp(s): integrand decays exponentially in s
        val, _ = quad(
            lambda s: np.exp(s) / denom(np.exp(s)),
            np.log(phi0),
            np.log(upper),
            epsabs=0.0,
            epsrel=min(rel_tol, 1e-9),
            limit=200,
        )
        return val

    def tail(upper):
        return upper ** (2.0 - p2) / (c * (p2 - 2.0))

    upper = max(2.0 * phi0, 1.0)
    head_val = head(upper)
    target = 1e-8 * max(head_val, 1e-300)
    # solve tail(Y) = target in closed form, then recheck
    upper = max(upper, (c * (p2 - 2.0) * target) ** (-1.0 / (p2 - 2.0)))
    head_val = head(upper)
    while tail(upper) > 1e-8 * head_val:
        upper *= 4.0
        head_val = head(upper)
    return head_val + tail(upper)


def _dirichlet_family(grid: Grid, batch, rng):
    """Random Dirichlet grid functions: low sine modes, sharp bumps, mixtures.

    Amplitudes are drawn log-uniformly across four decades so the certified
    ratio sees both the small- and the large-argument branch.
    """
    n_modes = 6
    decay = np.arange(1, n_modes + 1) ** 2
    axis_modes = [
        np.stack([np.sin((k + 1) * np.pi * grid.coords[axis] / L)
                  for k in range(n_modes)], axis=0)
        for axis, L in enumerate(grid.lengths)
    ]

    if grid.dimension == 1:
        coef = rng.standard_normal((batch, n_modes)) / decay
        smooth = coef @ axis_modes[0]
    else:
        coef2 = rng.standard_normal((batch, n_modes, n_modes))
        coef2 /= np.add.outer(decay, decay)
        smooth = np.einsum("bkl,ki,lj->bij", coef2, axis_modes[0], axis_modes[1])

    # sharp bumps, forced to zero at the walls by the first-mode envelope
    profiles = []
    for axis, L in enumerate(grid.lengths):
        x = grid.coords[axis]
        centers = rng.uniform(0.15 * L, 0.85 * L, size=batch)
        widths = np.exp(rng.uniform(np.log(0.01 * L), np.log(0.3 * L), size=batch))
        prof = np.exp(-((x[None, :] - centers[:, None]) ** 2) / widths[:, None] ** 2)
        prof *= np.sin(np.pi * x / L)[None, :]
        profiles.append(prof)
    if grid.dimension == 1:
        bump = profiles[0]
    else:
        bump = profiles[0][:, :, None] * profiles[1][:, None, :]

    pick = rng.uniform(size=(batch,) + (1,) * grid.dimension)
    fams = np.where(pick < 0.45, smooth, np.where(pick < 0.9, bump, smooth + bump))
    amp = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), size=(batch,)))
    fams = fams * amp.reshape([batch] + [1] * grid.dimension)
    fams[:, grid.boundary] = 0.0
    return fams


def _batched_gradient_energy(samples, grid):
    out = np.empty(samples.shape[0])
    for i in range(samples.shape[0]):
        out[i] = gradient_energy(GridFunction(grid, samples[i]))
    return out


def _max_split_ratio(grid, num_low, num_high, den_low, den_high, num_scale,
                     n_samples, rng, batch=500):
    """max over the family of

        num_scale * (int_{|u|>=1} |u|^num_high + int_{|u|<1} |u|^num_low)
        / (ge^{den_high/2} + ge^{den_low/2}),   ge = gradient energy.
    """
    w = grid.weights
    best = 0.0
    done = 0
    while done < n_samples:
        b = min(batch, n_samples - done)
        fam = _dirichlet_family(grid, b, rng)
        absu = np.abs(fam)
        big = absu >= 1.0
        num = num_scale * (
            np.sum(np.where(big, absu**num_high, 0.0) * w, axis=tuple(range(1, fam.ndim)))
            + np.sum(np.where(big, 0.0, absu**num_low) * w, axis=tuple(range(1, fam.ndim)))
        )
        ge = _batched_gradient_energy(fam, grid)
        den = ge ** (den_high / 2.0) + ge ** (den_low / 2.0)
        valid = den > 0.0
        if np.any(valid):
            best = max(best, float(np.max(num[valid] / den[valid])))
        done += b
    return best


def embedding_constant_for_bound(grid: Grid, p1, p2, n_samples=10000, seed=2024,
                                 safety=2.0) -> float:
    """Certified c with (1/2) int |u|^{2p(x)-2} <= c (ge^{p2-1} + ge^{p1-1}).

    Empirical maximization of the split ratio over >= n_samples random
    Dirichlet functions, times the safety factor. Valid for every exponent
    field with bounds [p1, p2] because the integrand is split at |u| = 1.
    """
    rng = np.random.default_rng(seed)
    ratio = _max_split_ratio(
        grid,
        num_low=2.0 * p1 - 2.0,
        num_high=2.0 * p2 - 2.0,
        den_low=2.0 * (p1 - 1.0),
        den_high=2.0 * (p2 - 1.0),
        num_scale=0.5,
        n_samples=n_samples,
        rng=rng,
    )
    return safety * ratio


def embedding_constant_for_gate(grid: Grid, p1, p2, n_samples=10000, seed=2024,
                                safety=2.0) -> float:
    """Certified c with int |u|^{p(x)} <= c (ge^{p2/2} + ge^{p1/2})."""
    rng = np.random.default_rng(seed)
    ratio = _max_split_ratio(
        grid,
        num_low=p1,
        num_high=p2,
        den_low=p1,
        den_high=p2,
        num_scale=1.0,
        n_samples=n_samples,
        rng=rng,
    )
    return safety * ratio


@dataclass(frozen=True)
class GateReport:
    """Smallness gate for global existence."""

    nehari0: float
    beta: float
    threshold: float
    initial_energy: float
    passed: bool


def global_existence_gate(report0, p1, p2, c_gate) -> GateReport:
    """Evaluate the initial smallness condition.

    beta = c_gate [ (2 p1/(p1-2) E0)^{(p2-2)/2} + (2 p1/(p1-2) E0)^{(p1-2)/2} ]
    must stay below (p1-2)/(2 p1), together with a positive initial Nehari
    functional. Negative initial energy fails the gate by construction.
    """
    threshold = (p1 - 2.0) / (2.0 * p1)
    e0 = report0.total_energy
    i0 = report0.nehari
    if e0 < 0.0:
        beta = np.inf
    else:
        base = 2.0 * p1 / (p1 - 2.0) * e0
        beta = c_gate * (base ** ((p2 - 2.0) / 2.0) + base ** ((p1 - 2.0) / 2.0))
    passed = bool(i0 > 0.0 and beta < threshold)
    return GateReport(i0, float(beta), float(threshold), float(e0), passed)


@dataclass(frozen=True)
class DecayFit:
    """Least-squares decay fit over the tail of a trajectory."""

    kind: str  # "exponential" | "polynomial"
    rate: float  # decay rate (exponential) or log-log slope (polynomial)
    r_squared: float
    boundedness: float  # sup E (1+t)^{2/(m2-2)} / E(0); nan for exponential
    window: tuple
    note: str


def _linear_fit(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return float(slope), r2


def fit_decay(trajectory, m2, window_frac=0.5) -> DecayFit:
    """Fit the sampled energy tail.

    m2 == 2: slope of log E versus t (exponential rate). m2 > 2: slope of
    log E versus log(1+t), plus the boundedness diagnostic
    sup E (1+t)^{2/(m2-2)} / E(0). Samples with E below the positivity floor
    shrink the window (logged); fewer than three usable samples is an error.
    """
    times = np.asarray(trajectory.times)
    energies = trajectory.energies
    t_lo = times[-1] * (1.0 - window_frac)
    sel = times >= t_lo
    note = ""
    usable = sel & (energies > ENERGY_FLOOR)
    if usable.sum() < sel.sum():
        note = f"window shrunk: {int(sel.sum() - usable.sum())} samples at or below the energy floor"
        log.info("fit_decay: %s", note)
    if usable.sum() < 3:
        raise ConditionError("decay fit window is empty")
    t = times[usable]
    e = energies[usable]
    e0 = trajectory.energies[0]

    if abs(m2 - 2.0) < 1e-12:
        slope, r2 = _linear_fit(t, np.log(e))
        return DecayFit("exponential", -slope, r2, float("nan"),
                        (float(t[0]), float(t[-1])), note)

    slope, r2 = _linear_fit(np.log1p(t), np.log(e))
    power = 2.0 / (m2 - 2.0)
    bounded = float(np.max(e * (1.0 + t) ** power) / e0) if e0 > 0 else float("inf")
    return DecayFit("polynomial", slope, r2, bounded,
                    (float(t[0]), float(t[-1])), note)


def fit_blowup_growth(trajectory, alpha) -> float:
    """Through-origin regression of dL/dt on L^{1/(1-alpha)} (diagnostic only)."""
    if alpha is None:
        return None
    times = np.asarray(trajectory.times)
    lvals = np.array(
        [np.nan if r.blowup_indicator is None else r.blowup_indicator
         for r in trajectory.reports]
    )
    good = np.isfinite(lvals) & (lvals > 0.0)
    if good.sum() < 3:
        return None
    t = times[good]
    lv = lvals[good]
    dl = np.diff(lv) / np.diff(t)
    mid = 0.5 * (lv[1:] + lv[:-1])
    x = mid ** (1.0 / (1.0 - alpha))
    denom = float(np.sum(x * x))
    if denom == 0.0:
        return None
    return float(np.sum(dl * x) / denom)


@dataclass(frozen=True)
class RegimeVerdict:
    """Final classification of a completed trajectory."""

    classification: str  # "blow-up" | "global-decay" | "inconclusive"
    t_measured: float
    t_low: float
    lower_bound_consistent: bool
    fit: DecayFit
    flags: dict


def classify(trajectory, gate: GateReport, t_low=None, flags=None,
             decay_factor=0.01, m2=None) -> RegimeVerdict:
    """Total classification: blow-up on threshold crossing, global-decay on a
    finished run whose final energy dropped below decay_factor * E(0), else
    inconclusive. A negative-energy run that merely reaches the horizon is
    inconclusive, never decay (the relative test is vacuous for E(0) < 0)."""
    flags = dict(flags or {})
    flags["gate_passed"] = gate.passed if gate is not None else None
    e = trajectory.energies
    fit = None
    t_measured = None
    if trajectory.termination == TERMINATED_BLOWUP:
        label = "blow-up"
        t_measured = trajectory.blowup_time
    elif (trajectory.termination == TERMINATED_END and e[0] >= 0.0
          and e[-1] <= decay_factor * e[0]):
        label = "global-decay"
        if m2 is not None:
            try:
                fit = fit_decay(trajectory, m2)
            except ConditionError as exc:
                log.info("decay fit unavailable: %s", exc)
    else:
        label = "inconclusive"

    consistent = None
    if t_measured is not None and t_low is not None:
        consistent = bool(t_measured >= t_low)
    return RegimeVerdict(label, t_measured, t_low, consistent, fit, flags)
