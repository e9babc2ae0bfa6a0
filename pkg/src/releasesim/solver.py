"""Theta-scheme finite-volume solver for the coupled two-layer system.

Each layer carries its own uniform vertex-centered grid; the interface
x = l0 is a node of both.  Diffusing fields use the standard three-point
stencil with mirror-ghost closures at zero-flux boundaries.  The membrane
flux J = pm*(c0 - sigma*c1) enters the half cells on either side of the
interface, which makes the scheme exactly conservative: summing the
trapezoid-weighted semi-discrete equations telescopes every internal flux,
leaving only boundary outflow and the lysosomal sink.  With pm = INFINITE
the two interface unknowns are tied by the algebraic row c0 = sigma*c1 and
the two half-cell balances are summed into one conservative row.

All five fields advance in a single linear solve per step,

    (I - theta*dt*L) u(n+1) = (I + (1-theta)*dt*L) u(n) + dt*g,

with algebraic rows (interface tie, sink boundary) imposed exactly at the
new time level.  The step matrix is factorized once per
(params, grid, config) and reused by every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import NumericalError
from .params import DimensionlessParams

ZERO_FLUX = "zero-flux"
SINK = "sink"


@dataclass(frozen=True)
class CompositeGrid:
    """Two abutting uniform node grids sharing the interface at x = l0 = 1.

    ``nx0`` and ``nx1`` count cells, so the layers carry nx0+1 and nx1+1
    nodes; the last matrix node and the first tissue node sit at the same
    location.
    """

    nx0: int
    nx1: int
    l1: float = 2.0
    l0: float = 1.0

    def __post_init__(self):
        if self.nx0 < 4 or self.nx1 < 4:
            raise ValueError(f"need at least 4 cells per layer, got nx0={self.nx0}, nx1={self.nx1}")
        if not self.l1 > self.l0:
            raise ValueError(f"outer coordinate l1={self.l1} must exceed l0={self.l0}")

    @property
    def nm(self) -> int:
        return self.nx0 + 1

    @property
    def nt(self) -> int:
        return self.nx1 + 1

    @property
    def h0(self) -> float:
        return self.l0 / self.nx0

    @property
    def h1(self) -> float:
        return (self.l1 - self.l0) / self.nx1

    @property
    def x_matrix(self) -> np.ndarray:
        return np.linspace(0.0, self.l0, self.nm)

    @property
    def x_tissue(self) -> np.ndarray:
        return np.linspace(self.l0, self.l1, self.nt)

    def matrix_weights(self) -> np.ndarray:
        """Trapezoid quadrature weights on the matrix nodes."""
        w = np.full(self.nm, self.h0)
        w[0] = w[-1] = 0.5 * self.h0
        return w

    def tissue_weights(self) -> np.ndarray:
        """Trapezoid quadrature weights on the tissue nodes."""
        w = np.full(self.nt, self.h1)
        w[0] = w[-1] = 0.5 * self.h1
        return w


@dataclass(frozen=True)
class SimState:
    """Concentration fields at one instant; arrays are treated as immutable."""

    t: float
    c0s: np.ndarray   # solid drug, matrix nodes
    c0: np.ndarray    # free drug, matrix nodes
    c1s: np.ndarray   # bound drug, tissue nodes
    c1: np.ndarray    # free drug, tissue nodes
    ci: np.ndarray    # internalized drug, tissue nodes

    def min_values(self) -> dict[str, float]:
        """Most negative entry per field (undershoot report; nothing is clipped)."""
        return {name: float(getattr(self, name).min())
                for name in ("c0s", "c0", "c1s", "c1", "ci")}


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping controls.

    ``t_end`` is the horizon measured from the initial state's clock;
    ``theta`` = 0.5 gives the trapezoid scheme, 1.0 implicit Euler.
    Sampling keeps every ``sample_every``-th step plus the first and last.
    ``clamp_nonnegative`` zeroes negative entries after each step (off by
    default; the solid pool legitimately turns negative when km*c_lim > 0).
    """

    dt: float = 0.01
    t_end: float = 80.0
    theta: float = 0.5
    outer_bc: str = ZERO_FLUX
    sample_every: int = 10
    clamp_nonnegative: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.outer_bc not in (ZERO_FLUX, SINK):
            raise ValueError(f"outer_bc must be '{ZERO_FLUX}' or '{SINK}', got {self.outer_bc!r}")
        if self.sample_every < 1:
            raise ValueError(f"sample_every must be >= 1, got {self.sample_every}")


def make_grid(p: DimensionlessParams, nx0: int, nx1: int) -> CompositeGrid:
    return CompositeGrid(nx0=nx0, nx1=nx1, l1=p.l1, l0=p.l0)


def initialize(grid: CompositeGrid) -> SimState:
    """Uniform unit solid loading, every other field zero, clock at zero."""
    return SimState(
        t=0.0,
        c0s=np.ones(grid.nm),
        c0=np.zeros(grid.nm),
        c1s=np.zeros(grid.nt),
        c1=np.zeros(grid.nt),
        ci=np.zeros(grid.nt),
    )


def _pack(state: SimState) -> np.ndarray:
    return np.concatenate([state.c0s, state.c0, state.c1s, state.c1, state.ci])


def _unpack(u: np.ndarray, t: float, grid: CompositeGrid) -> SimState:
    nm, nt = grid.nm, grid.nt
    return SimState(
        t=t,
        c0s=u[:nm].copy(),
        c0=u[nm:2 * nm].copy(),
        c1s=u[2 * nm:2 * nm + nt].copy(),
        c1=u[2 * nm + nt:2 * nm + 2 * nt].copy(),
        ci=u[2 * nm + 2 * nt:].copy(),
    )


def _assemble(grid: CompositeGrid, p: DimensionlessParams, outer_bc: str):
    """Semi-discrete system du/dt = L u + g plus algebraic constraint rows.

    Returns (L, g, constraints) where constraints maps a row index to its
    list of (column, coefficient) pairs; constrained rows replace the ODE
    there and are imposed exactly at the new time level.
    """
    nm, nt = grid.nm, grid.nt
    h0, h1 = grid.h0, grid.h1
    n = 2 * nm + 3 * nt
    o_c0s, o_c0 = 0, nm
    o_c1s, o_c1, o_ci = 2 * nm, 2 * nm + nt, 2 * nm + 2 * nt
    r, q, s = p.solid_rate, p.free_rate, p.bound_rate
    src = p.km * p.c_lim
    dm = p.gamma / h0 ** 2
    dt_ = p.d1 / h1 ** 2

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    g = np.zeros(n)
    constraints: dict[int, list[tuple[int, float]]] = {}

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    # Solid pool: local kinetics at every matrix node.
    for i in range(nm):
        add(o_c0s + i, o_c0s + i, -r)
        add(o_c0s + i, o_c0 + i, q)
        g[o_c0s + i] = -src

    # Free matrix drug: diffusion with mirror ghost at x = 0.
    for i in range(nm - 1):
        row = o_c0 + i
        if i == 0:
            add(row, o_c0 + 1, 2.0 * dm)
            add(row, o_c0, -2.0 * dm)
        else:
            add(row, o_c0 + i - 1, dm)
            add(row, o_c0 + i, -2.0 * dm)
            add(row, o_c0 + i + 1, dm)
        add(row, o_c0s + i, r)
        add(row, o_c0 + i, -q)
        g[row] = src

    # Bound and internalized pools: local kinetics at every tissue node.
    for i in range(nt):
        add(o_c1s + i, o_c1 + i, p.ka)
        add(o_c1s + i, o_c1s + i, -s)
        add(o_ci + i, o_c1s + i, p.ki)
        add(o_ci + i, o_ci + i, -p.kid)

    # Free tissue drug, interior nodes.
    for i in range(1, nt - 1):
        row = o_c1 + i
        add(row, o_c1 + i - 1, dt_)
        add(row, o_c1 + i, -2.0 * dt_)
        add(row, o_c1 + i + 1, dt_)
        add(row, o_c1s + i, p.kd)
        add(row, o_c1 + i, -p.ka)

    # Interface coupling at the shared node.
    m_if = o_c0 + nm - 1   # matrix free drug at the interface
    t_if = o_c1            # tissue free drug at the interface
    if math.isinf(p.pm):
        # Perfect contact: algebraic tie c0 = sigma*c1, plus the two
        # half-cell balances summed so the membrane flux cancels exactly.
        constraints[m_if] = [(m_if, 1.0), (t_if, -p.sigma)]
        w = 0.5 * (p.sigma * h0 + h1)
        add(t_if, o_c0 + nm - 2, p.gamma / (h0 * w))
        add(t_if, m_if, -p.gamma / (h0 * w))
        add(t_if, o_c1 + 1, p.d1 / (h1 * w))
        add(t_if, t_if, -p.d1 / (h1 * w))
        add(t_if, o_c0s + nm - 1, 0.5 * h0 * r / w)
        add(t_if, m_if, -0.5 * h0 * q / w)
        add(t_if, o_c1s, 0.5 * h1 * p.kd / w)
        add(t_if, t_if, -0.5 * h1 * p.ka / w)
        g[t_if] = 0.5 * h0 * src / w
    else:
        # Finite permeability: flux J = pm*(c0 - sigma*c1) leaves the matrix
        # half cell and enters the tissue half cell.
        add(m_if, o_c0 + nm - 2, 2.0 * dm)
        add(m_if, m_if, -2.0 * dm)
        add(m_if, m_if, -2.0 * p.pm / h0)
        add(m_if, t_if, 2.0 * p.pm * p.sigma / h0)
        add(m_if, o_c0s + nm - 1, r)
        add(m_if, m_if, -q)
        g[m_if] = src
        add(t_if, o_c1 + 1, 2.0 * dt_)
        add(t_if, t_if, -2.0 * dt_)
        add(t_if, m_if, 2.0 * p.pm / h1)
        add(t_if, t_if, -2.0 * p.pm * p.sigma / h1)
        add(t_if, o_c1s, p.kd)
        add(t_if, t_if, -p.ka)

    # Outer boundary.
    row = o_c1 + nt - 1
    if outer_bc == ZERO_FLUX:
        add(row, o_c1 + nt - 2, 2.0 * dt_)
        add(row, row, -2.0 * dt_)
        add(row, o_c1s + nt - 1, p.kd)
        add(row, row, -p.ka)
    else:  # SINK: pinned concentration
        constraints[row] = [(row, 1.0)]

    L = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return L, g, constraints


class ThetaStepper:
    """One-step propagator; factorizes the step matrix once and reuses it."""

    def __init__(self, grid: CompositeGrid, p: DimensionlessParams, config: SolverConfig):
        self.grid = grid
        self.p = p
        self.config = config
        L, g, constraints = _assemble(grid, p, config.outer_bc)
        n = L.shape[0]
        keep = np.ones(n)
        for row in constraints:
            keep[row] = 0.0
        keep_diag = sp.diags(keep)
        eye = sp.identity(n, format="csr")
        dt, theta = config.dt, config.theta
        lhs = keep_diag @ (eye - theta * dt * L)
        if constraints:
            c_rows, c_cols, c_vals = [], [], []
            for row, entries in constraints.items():
                for col, coef in entries:
                    c_rows.append(row)
                    c_cols.append(col)
                    c_vals.append(coef)
            lhs = lhs + sp.coo_matrix((c_vals, (c_rows, c_cols)), shape=(n, n)).tocsr()
        self._rhs_mat = (keep_diag @ (eye + (1.0 - theta) * dt * L)).tocsr()
        self._rhs_src = dt * g * keep
        try:
            self._lu = splu(lhs.tocsc())
        except RuntimeError as exc:
            raise NumericalError(
                f"step matrix factorization failed (dt={dt}, theta={theta}): {exc}"
            ) from exc

    def step(self, state: SimState) -> SimState:
        u = _pack(state)
        u_new = self._lu.solve(self._rhs_mat @ u + self._rhs_src)
        t_new = state.t + self.config.dt
        if not np.isfinite(u_new).all():
            raise NumericalError(f"non-finite solution while advancing to t={t_new:.6g}; reduce dt")
        if self.config.clamp_nonnegative:
            np.maximum(u_new, 0.0, out=u_new)
        return _unpack(u_new, t_new, self.grid)


def step(state: SimState, grid: CompositeGrid, p: DimensionlessParams,
         config: SolverConfig) -> SimState:
    """Advance one dt.  Builds and factorizes the step matrix on every call;
    use :class:`ThetaStepper` directly when stepping in a loop."""
    return ThetaStepper(grid, p, config).step(state)


@dataclass(frozen=True)
class TimeSeries:
    """Sampled trajectory: times plus one (samples, nodes) array per field."""

    times: np.ndarray
    c0s: np.ndarray
    c0: np.ndarray
    c1s: np.ndarray
    c1: np.ndarray
    ci: np.ndarray
    grid: CompositeGrid
    params: DimensionlessParams
    config: SolverConfig

    @property
    def n_samples(self) -> int:
        return len(self.times)

    def state_at(self, i: int) -> SimState:
        return SimState(t=float(self.times[i]), c0s=self.c0s[i].copy(),
                        c0=self.c0[i].copy(), c1s=self.c1s[i].copy(),
                        c1=self.c1[i].copy(), ci=self.ci[i].copy())

    def min_values(self) -> dict[str, float]:
        """Most negative entry per field over the whole trajectory."""
        return {name: float(getattr(self, name).min())
                for name in ("c0s", "c0", "c1s", "c1", "ci")}


def simulate(p: DimensionlessParams, grid: CompositeGrid, config: SolverConfig,
             init_state: SimState | None = None) -> TimeSeries:
    """Run the theta scheme over the horizon ``config.t_end``.

    The number of steps is round(t_end / dt); the first and last states are
    always sampled.  Passing ``init_state`` starts from arbitrary fields (and
    clock), which the cross-verification against the closed forms relies on.
    """
    state = initialize(grid) if init_state is None else init_state
    t0 = state.t
    n_steps = int(round(config.t_end / config.dt))
    samples = [state]
    sample_idx = [0]
    if n_steps > 0:
        stepper = ThetaStepper(grid, p, config)
        for j in range(1, n_steps + 1):
            state = stepper.step(state)
            if j % config.sample_every == 0 or j == n_steps:
                samples.append(state)
                sample_idx.append(j)
    # record j*dt, not the stepper's accumulated clock, so sample times are
    # free of summation drift
    return TimeSeries(
        times=t0 + np.asarray(sample_idx, float) * config.dt,
        c0s=np.stack([s.c0s for s in samples]),
        c0=np.stack([s.c0 for s in samples]),
        c1s=np.stack([s.c1s for s in samples]),
        c1=np.stack([s.c1 for s in samples]),
        ci=np.stack([s.ci for s in samples]),
        grid=grid,
        params=p,
        config=config,
    )
