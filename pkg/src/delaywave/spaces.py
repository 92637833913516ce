"""Discrete variable-exponent Lebesgue machinery on uniform tensor grids.

The domain is a 1-D interval (0, L) or a 2-D box (0, Lx) x (0, Ly), sampled
on a uniform node lattice with composite-trapezoid quadrature. An exponent
field is a node sample of a user-supplied closed form; its essential bounds
are cached at construction. On top of that sit the modular

    rho_q(u) = integral |u(x)|^{q(x)} dx,

the Luxemburg norm  inf{ lam > 0 : rho_q(u/lam) <= 1 }  (solved by bisection,
the map lam -> rho_q(u/lam) being strictly decreasing), the modular/norm
sandwich bounds, a log-Hoelder continuity estimate for exponent fields, and
the sharp discrete Poincare constant obtained from the smallest Dirichlet
Laplacian eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConditionError, GridMismatchError, NumericalError


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor-product grid with trapezoid quadrature weights.

    Attributes:
        lengths: box extents per axis.
        counts: node counts per axis (boundary nodes included).
        spacing: node spacing per axis.
        coords: 1-D coordinate arrays per axis.
        weights: quadrature weight per node, shape ``counts``.
        boundary: boolean mask of boundary nodes, shape ``counts``.
    """

    lengths: tuple
    counts: tuple
    spacing: tuple
    coords: tuple
    weights: np.ndarray
    boundary: np.ndarray

    @property
    def dimension(self):
        return len(self.counts)

    @property
    def shape(self):
        return self.counts

    @property
    def measure(self):
        out = 1.0
        for length in self.lengths:
            out *= length
        return out

    def meshes(self):
        """Coordinate arrays broadcast to the full grid shape."""
        if self.dimension == 1:
            return (self.coords[0],)
        x, y = np.meshgrid(self.coords[0], self.coords[1], indexing="ij")
        return (x, y)

    def points(self):
        """All node coordinates as an (n_nodes, dimension) array."""
        return np.stack([m.ravel() for m in self.meshes()], axis=1)


def make_grid(lengths, counts) -> Grid:
    """Build a 1-D or 2-D uniform grid over (0, L1) [x (0, L2)]."""
    if np.isscalar(lengths):
        lengths = (float(lengths),)
    else:
        lengths = tuple(float(v) for v in lengths)
    if np.isscalar(counts):
        counts = (int(counts),)
    else:
        counts = tuple(int(v) for v in counts)
    if len(lengths) != len(counts):
        raise ValueError("lengths and counts must have matching dimension")
    if len(lengths) not in (1, 2):
        raise ValueError("only 1-D and 2-D domains are supported")
    for length, n in zip(lengths, counts):
        if length <= 0.0:
            raise ValueError(f"domain length must be positive, got {length}")
        if n < 3:
            raise ValueError(f"need at least 3 nodes per axis, got {n}")

    spacing = tuple(L / (n - 1) for L, n in zip(lengths, counts))
    coords = tuple(np.linspace(0.0, L, n) for L, n in zip(lengths, counts))

    axis_weights = []
    for h, n in zip(spacing, counts):
        w = np.full(n, h)
        w[0] = w[-1] = h / 2.0
        axis_weights.append(w)
    if len(counts) == 1:
        weights = axis_weights[0]
        boundary = np.zeros(counts, dtype=bool)
        boundary[0] = boundary[-1] = True
    else:
        weights = np.outer(axis_weights[0], axis_weights[1])
        boundary = np.zeros(counts, dtype=bool)
        boundary[0, :] = boundary[-1, :] = True
        boundary[:, 0] = boundary[:, -1] = True

    grid = Grid(lengths, counts, spacing, coords, weights, boundary)
    measure = grid.measure
    if abs(weights.sum() - measure) > 1e-12 * measure:
        raise NumericalError("quadrature weights do not sum to the domain measure")
    return grid


@dataclass(eq=False)
class GridFunction:
    """One real value per grid node."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def sample(cls, grid, fn):
        """Sample a callable of the coordinate meshes; fn(x[, y])."""
        vals = np.asarray(fn(*grid.meshes()), dtype=float)
        return cls(grid, np.broadcast_to(vals, grid.shape).copy())

    def is_dirichlet(self, tol=0.0):
        return bool(np.all(np.abs(self.values[self.grid.boundary]) <= tol))


@dataclass(eq=False)
class ExponentField:
    """Node-sampled exponent q(x) with cached essential bounds.

    ``low``/``high`` are the node-wise min/max; every value must be >= 1.
    """

    grid: Grid
    values: np.ndarray
    low: float = None
    high: float = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridMismatchError("exponent samples do not match the grid")
        if np.any(self.values < 1.0):
            raise ConditionError("exponent field must satisfy q(x) >= 1 everywhere")
        self.low = float(self.values.min())
        self.high = float(self.values.max())

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def sample(cls, grid, fn):
        vals = np.asarray(fn(*grid.meshes()), dtype=float)
        return cls(grid, np.broadcast_to(vals, grid.shape).copy())


def _require_same_grid(*objs):
    grid = objs[0].grid
    for other in objs[1:]:
        if other.grid is not grid and (
            other.grid.counts != grid.counts or other.grid.lengths != grid.lengths
        ):
            raise GridMismatchError("operands live on different grids")
    return grid


def l2_norm(u: GridFunction) -> float:
    return float(np.sqrt(np.sum(u.grid.weights * u.values**2)))


def gradient_energy(u: GridFunction) -> float:
    """Squared discrete H1 seminorm, cell-difference form.

    Defined so that <u, -lap_h(u)> == gradient_energy(u) exactly for
    homogeneous Dirichlet data; this makes discrete energy balances and the
    Poincare constant below mutually consistent.
    """
    vals = u.values
    grid = u.grid
    if grid.dimension == 1:
        h = grid.spacing[0]
        d = np.diff(vals)
        return float(np.sum(d * d) / h)
    hx, hy = grid.spacing
    wx = np.full(grid.counts[0], hx)
    wx[0] = wx[-1] = hx / 2.0
    wy = np.full(grid.counts[1], hy)
    wy[0] = wy[-1] = hy / 2.0
    dx = np.diff(vals, axis=0)
    dy = np.diff(vals, axis=1)
    ex = np.sum(dx * dx, axis=0) / hx
    ey = np.sum(dy * dy, axis=1) / hy
    return float(np.dot(wy, ex) + np.dot(wx, ey))


def modular(u: GridFunction, p: ExponentField) -> float:
    """Quadrature value of integral |u|^{p(x)} dx."""
    _require_same_grid(u, p)
    with np.errstate(over="ignore"):
        return float(np.sum(u.grid.weights * np.abs(u.values) ** p.values))


def luxemburg_norm(u: GridFunction, p: ExponentField, tol=1e-12, max_iter=200) -> float:
    """Solve inf{ lam > 0 : modular(u/lam) <= 1 } by bracketing + bisection.

    The bracket comes from the modular/norm sandwich: the norm lies between
    modular^{1/p_high} and modular^{1/p_low} (order depending on whether the
    modular exceeds 1). Returns 0 for the zero function. Raises
    NumericalError with the last bracket if the iteration cap is hit.
    """
    _require_same_grid(u, p)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not np.any(u.values):
        return 0.0

    rho = modular(u, p)
    if rho <= 0.0:
        return 0.0

    def modular_scaled(lam):
        with np.errstate(over="ignore"):
            return float(np.sum(u.grid.weights * (np.abs(u.values) / lam) ** p.values))

    if rho >= 1.0:
        lo, hi = rho ** (1.0 / p.high), rho ** (1.0 / p.low)
    else:
        lo, hi = rho ** (1.0 / p.low), rho ** (1.0 / p.high)

    # Constant exponent collapses the bracket to the exact root.
    if hi - lo <= 1e-15 * hi:
        return 0.5 * (lo + hi)

    # Guard against roundoff pushing the root outside the sandwich bracket.
    for _ in range(60):
        if modular_scaled(lo) >= 1.0:
            break
        lo *= 0.5
    for _ in range(60):
        if modular_scaled(hi) <= 1.0:
            break
        hi *= 2.0

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = modular_scaled(mid)
        if abs(val - 1.0) <= tol or (hi - lo) <= 1e-15 * mid:
            return mid
        if val > 1.0:
            lo = mid
        else:
            hi = mid
    raise NumericalError(
        "Luxemburg norm bisection did not converge",
        context={"bracket": (lo, hi), "modular": rho},
    )


def check_sandwich(u: GridFunction, p: ExponentField, tol=1e-9) -> bool:
    """min(lam^p_low, lam^p_high) <= modular(u) <= max(...), lam the norm."""
    rho = modular(u, p)
    lam = luxemburg_norm(u, p)
    a = lam**p.low
    b = lam**p.high
    slack = tol * max(1.0, rho)
    return (min(a, b) - slack) <= rho <= (max(a, b) + slack)


def log_holder_modulus(q: ExponentField, delta=0.5, _chunk=512) -> float:
    """max over node pairs with 0 < |x-y| < delta of |q(x)-q(y)|*|log|x-y||.

    Brute force over all pairs, chunked to bound memory; delta must lie in
    (0, 1) so the logarithm has one sign on the admissible pairs.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    pts = q.grid.points()
    vals = q.values.ravel()
    n = pts.shape[0]
    worst = 0.0
    for start in range(0, n, _chunk):
        block = slice(start, min(start + _chunk, n))
        diff = pts[block, None, :] - pts[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        mask = (dist > 0.0) & (dist < delta)
        if not np.any(mask):
            continue
        dq = np.abs(vals[block, None] - vals[None, :])
        score = np.where(mask, dq * np.abs(np.log(np.where(mask, dist, 1.0))), 0.0)
        worst = max(worst, float(score.max()))
    return worst


@dataclass(frozen=True)
class ExponentValidation:
    """Outcome of the admissibility checks for a damping/source exponent pair."""

    chain_ok: bool
    critical_cap: float
    damping_bounds: tuple
    source_bounds: tuple
    log_modulus_damping: float
    log_modulus_source: float
    log_bound: float
    log_ok: bool

    @property
    def ok(self):
        return self.chain_ok and self.log_ok


def validate_exponent_pair(
    m: ExponentField,
    p: ExponentField,
    dimension: int,
    log_bound=10.0,
    log_delta=0.5,
) -> ExponentValidation:
    """Check the exponent chain and log-Hoelder continuity of both fields.

    Chain: 2 <= m_low <= m_high < p_low <= p_high, plus p_high <= 2(n-1)/(n-2)
    when n >= 3. For n in {1, 2} every finite p_high is admissible, so only
    finiteness is required. The log-Hoelder moduli are measured on the node
    samples and compared against ``log_bound``.
    """
    _require_same_grid(m, p)
    if m.values.size == 0:
        raise GridMismatchError("empty grid")

    cap = np.inf if dimension < 3 else 2.0 * (dimension - 1) / (dimension - 2)
    chain_ok = (
        2.0 <= m.low
        and m.high < p.low
        and np.isfinite(p.high)
        and p.high <= cap
    )
    mod_m = log_holder_modulus(m, log_delta)
    mod_p = log_holder_modulus(p, log_delta)
    log_ok = mod_m <= log_bound and mod_p <= log_bound
    return ExponentValidation(
        chain_ok=bool(chain_ok),
        critical_cap=float(cap),
        damping_bounds=(m.low, m.high),
        source_bounds=(p.low, p.high),
        log_modulus_damping=mod_m,
        log_modulus_source=mod_p,
        log_bound=float(log_bound),
        log_ok=bool(log_ok),
    )


def _dirichlet_laplacian(grid: Grid):
    """Sparse negative Laplacian on interior nodes (SPD)."""
    mats = []
    for h, n in zip(grid.spacing, grid.counts):
        k = n - 2
        main = np.full(k, 2.0 / h**2)
        off = np.full(k - 1, -1.0 / h**2)
        mats.append(sp.diags([off, main, off], [-1, 0, 1], format="csr"))
    if grid.dimension == 1:
        return mats[0].tocsc()
    ax, ay = mats
    ix = sp.identity(ax.shape[0], format="csr")
    iy = sp.identity(ay.shape[0], format="csr")
    return (sp.kron(ax, iy) + sp.kron(ix, ay)).tocsc()


def discrete_poincare_constant(grid: Grid, tol=1e-10, max_iter=500) -> float:
    """1/sqrt(lambda_1) for the discrete Dirichlet Laplacian.

    lambda_1 is found by inverse power iteration (LU solve each sweep) with
    a deterministic all-ones start; convergence is a relative eigenvalue
    change below ``tol``. The returned constant is the sharp one for
    ``l2_norm(w) <= c * sqrt(gradient_energy(w))`` over discrete Dirichlet w.
    """
    a = _dirichlet_laplacian(grid)
    lu = spla.splu(a)
    x = np.ones(a.shape[0])
    x /= np.linalg.norm(x)
    lam_prev = None
    for _ in range(max_iter):
        y = lu.solve(x)
        ny = np.linalg.norm(y)
        if not np.isfinite(ny) or ny == 0.0:
            raise NumericalError("inverse power iteration broke down")
        x = y / ny
        lam = float(x @ (a @ x))
        if lam_prev is not None and abs(lam - lam_prev) <= tol * abs(lam):
            return 1.0 / np.sqrt(lam)
        lam_prev = lam
    raise NumericalError(
        "inverse power iteration did not converge",
        context={"last_eigenvalue": lam_prev},
    )
