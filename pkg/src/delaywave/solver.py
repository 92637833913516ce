"""Explicit time integration of the delayed nonlinear wave system.

State layout: displacement u and velocity v on the spatial grid, plus the
memory field z(x, rho, tau) carrying the delayed velocity along the unit
rho-interval, one transport lane per delay-quadrature node tau. The update
per step is

    1. kick:  v -> v + dt/2 * a(u, v_half, z),  damping at the half-step
       velocity via one fixed-point pass,
    2. drift: u -> u + dt * v_half,
    3. first-order upwind shift of z along rho (speed 1/tau per lane,
       CFL number dt / (tau * d_rho) <= 1),
    4. kick with the updated u and z tail, then inflow z(., 0, .) = v.

A ring buffer of velocity snapshots spanning the largest delay supports an
interpolation oracle used to cross-validate z in tests. The acceleration is

    a = lap(u) - mu1 * v|v|^{m(x)-2} - integral mu2(tau) z_tail|z_tail|^{m(x)-2}
        + u|u|^{p(x)-2},

with homogeneous Dirichlet walls; boundary nodes never move.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .delay import DelayKernel, WeightField, build_kernel, check_mass_condition, \
    check_xi_condition, dissipation_constant, dissipation_margins, xi_default
from .energetics import alpha_window, energy_report
from .errors import ConditionError, ConfigError
from .expressions import compile_expression
from .spaces import ExponentField, Grid, GridFunction, make_grid, validate_exponent_pair

log = logging.getLogger(__name__)

TERMINATED_END = "reached-t-end"
TERMINATED_BLOWUP = "blowup-threshold"
TERMINATED_OVERFLOW = "numerical-overflow"


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run parameters; expression fields keep their source text."""

    dimension: int = 1
    lengths: tuple = (1.0,)
    nodes: tuple = (201,)
    m: str = "2"
    p: str = "3"
    log_holder_bound: float = 10.0
    log_holder_delta: float = 0.5
    mu1: float = 0.5
    mu2: str = "0.1"
    mu2_table: tuple = None
    tau1: float = 0.5
    tau2: float = 1.0
    n_tau: int = 16
    u0: str = "0"
    u1: str = "0"
    f0: str = "0"
    scale: float = 1.0
    t_end: float = 10.0
    dt: float = None
    n_rho: int = 32
    threshold: float = 1e6
    override_conditions: bool = False
    disable_source: bool = False
    freeze_velocity: bool = False
    seed: int = 1234
    alpha: float = None
    eps: float = None
    sample_dt: float = None
    decay_factor: float = 0.01


def auto_dt(lengths, nodes, tau1, n_rho) -> float:
    """CFL-safe step: 0.5 * min(spatial spacing, tau1 * rho spacing)."""
    h_min = min(L / (n - 1) for L, n in zip(lengths, nodes))
    d_rho = 1.0 / (n_rho - 1)
    return 0.5 * min(h_min, tau1 * d_rho)


def resolve_config(cfg: RunConfig) -> RunConfig:
    """Fill dt and sample_dt when unset; enforce the CFL contract."""
    dt = cfg.dt
    limit = auto_dt(cfg.lengths, cfg.nodes, cfg.tau1, cfg.n_rho)
    if dt is None:
        dt = limit
    elif dt <= 0.0:
        raise ConfigError("dt must be positive", key="dt")
    elif dt > limit * (1.0 + 1e-9):
        raise ConfigError(
            f"dt={dt} violates the CFL contract dt <= {limit:.6g}", key="dt"
        )
    sample_dt = cfg.sample_dt
    if sample_dt is None:
        sample_dt = max(cfg.t_end / 400.0, dt)
    return replace(cfg, dt=float(dt), sample_dt=float(sample_dt))


@dataclass(eq=False)
class Problem:
    """Config resolved into grid-level objects, ready to integrate."""

    config: RunConfig
    grid: Grid
    m: ExponentField
    p: ExponentField
    kernel: DelayKernel
    xi: WeightField
    exponent_report: object
    mass_ok: bool
    xi_ok: bool
    c0: float
    c0_max_margin: float
    alpha: float
    rho_nodes: np.ndarray
    rho_weights: np.ndarray
    u0_fn: object
    u1_fn: object
    f0_fn: object


def _spatial_vars(dimension):
    return ("x",) if dimension == 1 else ("x", "y")


def _sample_spatial(grid, expr, extra=None):
    env = dict(zip(_spatial_vars(grid.dimension), grid.meshes()))
    if extra:
        env.update(extra)
    vals = np.asarray(expr(**env), dtype=float)
    return np.broadcast_to(vals, grid.shape).copy()


def build_problem(config: RunConfig) -> Problem:
    """Compile expressions, sample fields, build the kernel and weight field."""
    config = resolve_config(config)
    grid = make_grid(config.lengths, config.nodes)
    svars = _spatial_vars(config.dimension)

    m = ExponentField(grid, _sample_spatial(grid, compile_expression(config.m, svars)))
    p = ExponentField(grid, _sample_spatial(grid, compile_expression(config.p, svars)))
    report = validate_exponent_pair(
        m, p, config.dimension, config.log_holder_bound, config.log_holder_delta
    )

    if config.mu2_table is not None:
        taus = np.array([row[0] for row in config.mu2_table])
        vals = np.array([row[1] for row in config.mu2_table])
        nodes = np.linspace(config.tau1, config.tau2, config.n_tau)
        mu2 = np.interp(nodes, taus, vals)
    else:
        expr = compile_expression(config.mu2, ("tau",))
        mu2 = lambda t: expr(tau=t)
    kernel = build_kernel(mu2, config.tau1, config.tau2, config.n_tau, config.mu1)

    mass_ok = check_mass_condition(kernel)
    if mass_ok:
        xi = xi_default(kernel, m)
    else:
        # No admissible weight exists; keep the energy well defined with a
        # positive surrogate (zero when damping is disabled entirely).
        xi = WeightField(grid, m.values * kernel.mu1 / (4.0 * kernel.width))
    xi_ok = check_xi_condition(kernel, xi, m)
    if xi_ok:
        c0 = dissipation_constant(kernel, xi, m)
        c0_max_margin = max(dissipation_margins(kernel, xi, m))
    else:
        c0 = 0.0
        c0_max_margin = 0.0

    alpha = None
    if report.chain_ok:
        window = alpha_window(m, p)
        if config.alpha is not None:
            if not 0.0 < config.alpha <= window:
                raise ConfigError(
                    f"alpha={config.alpha} outside the admissible window (0, {window:.6g}]",
                    key="alpha",
                )
            alpha = config.alpha
        else:
            alpha = 0.5 * window

    n_rho = config.n_rho
    rho_nodes = np.linspace(0.0, 1.0, n_rho)
    d_rho = 1.0 / (n_rho - 1)
    rho_weights = np.full(n_rho, d_rho)
    rho_weights[0] = rho_weights[-1] = d_rho / 2.0

    u0_fn = compile_expression(config.u0, svars)
    u1_fn = compile_expression(config.u1, svars)
    f0_fn = compile_expression(config.f0, svars + ("s",))

    return Problem(
        config=config,
        grid=grid,
        m=m,
        p=p,
        kernel=kernel,
        xi=xi,
        exponent_report=report,
        mass_ok=mass_ok,
        xi_ok=xi_ok,
        c0=c0,
        c0_max_margin=c0_max_margin,
        alpha=alpha,
        rho_nodes=rho_nodes,
        rho_weights=rho_weights,
        u0_fn=u0_fn,
        u1_fn=u1_fn,
        f0_fn=f0_fn,
    )


class History:
    """Ring buffer of velocity snapshots at the stepping cadence."""

    def __init__(self, depth, dt, shape):
        self.depth = int(depth)
        self.dt = float(dt)
        self._snaps = np.zeros((self.depth,) + tuple(shape))
        self._times = np.full(self.depth, np.nan)
        self._head = -1
        self._count = 0

    def push(self, t, values):
        self._head = (self._head + 1) % self.depth
        self._snaps[self._head] = values
        self._times[self._head] = t
        self._count = min(self._count + 1, self.depth)

    @property
    def newest_time(self):
        return self._times[self._head]

    @property
    def oldest_time(self):
        return self.newest_time - (self._count - 1) * self.dt

    def velocity_at(self, s):
        """Linear interpolation between stored snapshots at time s."""
        if self._count == 0:
            raise ConditionError("history buffer is empty")
        back = (self.newest_time - s) / self.dt
        if back < -1e-9 or back > self._count - 1 + 1e-9:
            raise ConditionError(
                f"time {s} outside the stored history window "
                f"[{self.oldest_time}, {self.newest_time}]"
            )
        back = min(max(back, 0.0), float(self._count - 1))
        k0 = int(math.floor(back))
        frac = back - k0
        i0 = (self._head - k0) % self.depth
        if frac <= 1e-12 or k0 + 1 > self._count - 1:
            return self._snaps[i0].copy()
        i1 = (self._head - k0 - 1) % self.depth
        return (1.0 - frac) * self._snaps[i0] + frac * self._snaps[i1]


@dataclass(eq=False)
class SimState:
    t: float
    u: GridFunction
    v: GridFunction
    z: np.ndarray
    history: History
    # step() caches the conservative acceleration of the final kick; it is
    # exactly the first-kick value of the next step as long as u and the
    # memory tail are not mutated in between. Reset to None after editing
    # the state by hand.
    accel: np.ndarray = None
    scratch: np.ndarray = None


def init_state(problem: Problem) -> SimState:
    """Sample initial data and pre-fill the memory field and ring buffer."""
    cfg = problem.config
    grid = problem.grid
    scale = cfg.scale

    u_vals = scale * _sample_spatial(grid, problem.u0_fn)
    v_vals = scale * _sample_spatial(grid, problem.u1_fn)
    u_vals[grid.boundary] = 0.0
    v_vals[grid.boundary] = 0.0

    n_rho = problem.rho_nodes.size
    n_tau = problem.kernel.nodes.size
    z = np.zeros(grid.shape + (n_rho, n_tau))
    for j, rho in enumerate(problem.rho_nodes):
        for k, tau in enumerate(problem.kernel.nodes):
            if rho == 0.0:
                z[..., j, k] = v_vals
                continue
            vals = scale * _sample_spatial(grid, problem.f0_fn, {"s": -rho * tau})
            vals[grid.boundary] = 0.0
            z[..., j, k] = vals

    depth = int(math.ceil(cfg.tau2 / cfg.dt - 1e-9)) + 2
    history = History(depth, cfg.dt, grid.shape)
    for i in range(depth - 1, 0, -1):
        s = -i * cfg.dt
        vals = scale * _sample_spatial(grid, problem.f0_fn, {"s": s})
        vals[grid.boundary] = 0.0
        history.push(s, vals)
    history.push(0.0, v_vals.copy())

    f0_at_zero = scale * _sample_spatial(grid, problem.f0_fn, {"s": 0.0})
    f0_at_zero[grid.boundary] = 0.0
    gap = float(np.max(np.abs(f0_at_zero - v_vals)))
    if gap > 1e-8:
        log.warning(
            "history f0(x, 0) differs from u1(x) by %.3e; proceeding anyway", gap
        )

    return SimState(
        t=0.0,
        u=GridFunction(grid, u_vals),
        v=GridFunction(grid, v_vals),
        z=z,
        history=history,
    )


def _scalar_or_array(values):
    """Collapse a spatially constant field to a scalar (fast ufunc path)."""
    if np.ptp(values) == 0.0:
        return float(values.flat[0])
    return values


def _odd_power(w, exponent):
    """Sign-preserving power w |w|^{exponent-1}; exactly zero at w = 0."""
    with np.errstate(over="ignore", invalid="ignore"):
        if np.ndim(exponent) == 0:
            q = float(exponent)
            if q == 1.0:
                return np.array(w, copy=True)
            return np.sign(w) * np.abs(w) ** q
        return np.sign(w) * np.abs(w) ** exponent


def _laplacian_values(vals, grid):
    out = np.zeros_like(vals)
    if grid.dimension == 1:
        h2 = grid.spacing[0] ** 2
        out[1:-1] = (vals[2:] - 2.0 * vals[1:-1] + vals[:-2]) / h2
        return out
    hx2 = grid.spacing[0] ** 2
    hy2 = grid.spacing[1] ** 2
    out[1:-1, 1:-1] = (
        (vals[2:, 1:-1] - 2.0 * vals[1:-1, 1:-1] + vals[:-2, 1:-1]) / hx2
        + (vals[1:-1, 2:] - 2.0 * vals[1:-1, 1:-1] + vals[1:-1, :-2]) / hy2
    )
    return out


def laplacian(u: GridFunction) -> GridFunction:
    """Second-order centered stencil; boundary rows stay zero (Dirichlet)."""
    return GridFunction(u.grid, _laplacian_values(u.values, u.grid))


def damping_force(v: GridFunction, m: ExponentField, mu1: float) -> GridFunction:
    """Instantaneous damping mu1 * v |v|^{m(x)-2}."""
    return GridFunction(v.grid, mu1 * _odd_power(v.values, m.values - 1.0))


def _delay_force_values(z_tail, kernel, m_values):
    coeff = kernel.weights * kernel.mu2
    return np.sum(_odd_power(z_tail, m_values[..., None] - 1.0) * coeff, axis=-1)


def delay_force(z_tail, kernel: DelayKernel, m: ExponentField) -> GridFunction:
    """Delay-window quadrature of mu2(tau) z|z|^{m(x)-2} at the rho = 1 tail."""
    return GridFunction(m.grid, _delay_force_values(z_tail, kernel, m.values))


def source_force(u: GridFunction, p: ExponentField) -> GridFunction:
    """Focusing source u |u|^{p(x)-2}."""
    return GridFunction(u.grid, _odd_power(u.values, p.values - 1.0))


def _upwind_shift(state, cfl):
    """In-place first-order upwind update of the memory field along rho.

    Temporaries are kept in a per-state scratch buffer; large allocations in
    the hot loop dominate the runtime otherwise.
    """
    z = state.z
    if state.scratch is None or state.scratch.shape != z[..., 1:, :].shape:
        state.scratch = np.empty_like(z[..., 1:, :])
    scratch = state.scratch
    np.subtract(z[..., 1:, :], z[..., :-1, :], out=scratch)
    np.multiply(scratch, cfl, out=scratch)
    np.subtract(z[..., 1:, :], scratch, out=z[..., 1:, :])


def step(state: SimState, problem: Problem) -> SimState:
    """Advance one dt: kick-drift-kick plus the upwind shift of the memory field."""
    cfg = problem.config
    grid = problem.grid
    dt = cfg.dt
    kernel = problem.kernel
    mexp = _scalar_or_array(problem.m.values - 1.0)
    pexp = _scalar_or_array(problem.p.values - 1.0)
    mu1 = kernel.mu1

    u0 = state.u.values
    v0 = state.v.values
    z = state.z

    d_rho = 1.0 / (problem.rho_nodes.size - 1)
    cfl = dt / (kernel.nodes * d_rho)

    if cfg.freeze_velocity:
        _upwind_shift(state, cfl)
        z[..., 0, :] = v0[..., None]
        state.t += dt
        state.history.push(state.t, v0.copy())
        return state

    tail_coeff = kernel.weights * kernel.mu2
    tail_exp = mexp if np.ndim(mexp) == 0 else mexp[..., None]

    def conservative(u_vals, z_tail):
        acc = _laplacian_values(u_vals, grid)
        acc -= np.sum(_odd_power(z_tail, tail_exp) * tail_coeff, axis=-1)
        if not cfg.disable_source:
            acc += _odd_power(u_vals, pexp)
        return acc

    g0 = state.accel if state.accel is not None else conservative(u0, z[..., -1, :])
    v_half = v0 + 0.5 * dt * (g0 - mu1 * _odd_power(v0, mexp))
    v_half = v0 + 0.5 * dt * (g0 - mu1 * _odd_power(v_half, mexp))

    u1 = u0 + dt * v_half

    _upwind_shift(state, cfl)

    g1 = conservative(u1, z[..., -1, :])
    v1 = v_half + 0.5 * dt * (g1 - mu1 * _odd_power(v_half, mexp))

    z[..., 0, :] = v1[..., None]
    state.u.values = u1
    state.v.values = v1
    state.accel = g1
    state.t += dt
    state.history.push(state.t, v1.copy())
    return state


def history_oracle(state: SimState, tau: float, rho: float) -> GridFunction:
    """Velocity at time t - tau*rho from the ring buffer (tests only)."""
    return GridFunction(state.u.grid, state.history.velocity_at(state.t - tau * rho))


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    reports: list
    sup_u: np.ndarray
    termination: str
    blowup_time: float
    eps: float
    problem: Problem

    @property
    def energies(self):
        return np.array([r.total_energy for r in self.reports])


def _auto_eps(report0, state0, problem):
    """Largest coupling keeping the blow-up indicator positive, halved."""
    h0 = report0.energy_deficit
    if problem.alpha is None or h0 <= 0.0:
        return 0.0
    cross = float(np.sum(problem.grid.weights * state0.u.values * state0.v.values))
    if cross >= 0.0:
        return 1.0
    return min(1.0, h0 ** (1.0 - problem.alpha) / (2.0 * abs(cross)))


def run(problem: Problem) -> Trajectory:
    """Integrate to t_end, a threshold crossing, or numerical overflow."""
    cfg = problem.config
    state = init_state(problem)

    sup0 = float(np.max(np.abs(state.u.values)))
    if cfg.threshold <= sup0:
        raise ConfigError(
            f"blow-up threshold {cfg.threshold} must exceed the initial sup-norm {sup0}",
            key="threshold",
        )

    def report_at(st, eps):
        return energy_report(
            st, problem.m, problem.p, problem.kernel, problem.xi,
            alpha=problem.alpha, eps=eps,
        )

    pre = report_at(state, 0.0)
    eps = cfg.eps if cfg.eps is not None else _auto_eps(pre, state, problem)

    times = [0.0]
    reports = [report_at(state, eps)]
    sups = [sup0]

    n_steps = int(math.ceil(cfg.t_end / cfg.dt - 1e-9))
    sample_every = max(1, int(round(cfg.sample_dt / cfg.dt)))

    termination = TERMINATED_END
    blowup_time = None
    for i in range(n_steps):
        step(state, problem)
        sup_u = float(np.max(np.abs(state.u.values)))
        sup_v = float(np.max(np.abs(state.v.values)))
        if not (np.isfinite(sup_u) and np.isfinite(sup_v)):
            termination = TERMINATED_OVERFLOW
            break
        crossed = sup_u >= cfg.threshold
        if crossed or (i + 1) % sample_every == 0 or i == n_steps - 1:
            times.append(state.t)
            reports.append(report_at(state, eps))
            sups.append(sup_u)
        if crossed:
            termination = TERMINATED_BLOWUP
            blowup_time = state.t
            break

    return Trajectory(
        times=np.array(times),
        reports=reports,
        sup_u=np.array(sups),
        termination=termination,
        blowup_time=blowup_time,
        eps=eps,
        problem=problem,
    )
