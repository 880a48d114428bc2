"""Finite-difference Cauchy solver for the variable-coefficient operators.

Space is (x, y) with diffusion only in x and a one-way coupling x * d/dy;
time stepping is Lie splitting with implicit divergence-form diffusion
(batched tridiagonal solves) and explicit monotone upwind transport, which
together preserve the discrete comparison principle.  The price-family
operator is solved in w = log x, where x*d/dx becomes d/dw and the
transport speed becomes e^w; the degenerate x -> 0 edge maps to w -> -inf
and is truncated with outflow conditions.

Grid functions serialize as flat binary arrays with a short header plus a
JSON sidecar; slices export as CSV.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .geometry import EventPoint, GeometryKind

__all__ = [
    "CoefficientField",
    "GridSpec",
    "MollifierMode",
    "MollifierSpec",
    "BoundViolationError",
    "CflError",
    "GridMismatchError",
    "Solution",
    "ReproductionReport",
    "mollify",
    "apply_operator",
    "solve_cauchy",
    "approximate_fundamental_solution",
    "adjoint_kernel_slice",
    "reproduction_check",
    "delta_approximant",
    "save_grid",
    "load_grid",
    "export_slice_csv",
]


class BoundViolationError(ValueError):
    """Mollified coefficients left the declared ellipticity band."""


class CflError(ValueError):
    """Transport CFL constraint violated."""


class GridMismatchError(ValueError):
    """Incompatible grid shapes."""


def _const_fn(c: float) -> Callable:
    return lambda x, y, t: np.broadcast_to(
        np.asarray(float(c)), np.broadcast(np.asarray(x), np.asarray(y)).shape
    ).copy()


@dataclass(frozen=True)
class CoefficientField:
    """Variable coefficients (a, b, r) with their ellipticity metadata.

    a, b, r are callables of (x, y, t) acting on broadcastable arrays (plain
    numbers are wrapped).  lam <= a <= Lam and |b|, |r| <= Lam must hold on
    any grid the field is used on; kind=L additionally requires r == 0.
    """

    a: Callable
    b: Callable
    r: Callable
    lam: float
    Lam: float
    kind: GeometryKind = GeometryKind.K
    holder_alpha: float = 1.0
    time_independent: bool = True

    def __post_init__(self) -> None:
        if not (0.0 < self.lam <= self.Lam):
            raise ValueError("need 0 < lam <= Lam")
        for name in ("a", "b", "r"):
            fn = getattr(self, name)
            if not callable(fn):
                object.__setattr__(self, name, _const_fn(fn))

    @classmethod
    def constant(cls, lam: float, kind: GeometryKind = GeometryKind.K,
                 Lam: float | None = None) -> "CoefficientField":
        return cls(a=lam, b=0.0, r=0.0, lam=lam,
                   Lam=Lam if Lam is not None else max(lam, 1.0), kind=kind)

    def check_bounds(self, xs: np.ndarray, ys: np.ndarray, t: float,
                     slack: float = 1e-10) -> None:
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        av = np.asarray(self.a(X, Y, t), dtype=float)
        if np.any(av < self.lam - slack) or np.any(av > self.Lam + slack):
            raise BoundViolationError(
                f"a leaves [{self.lam}, {self.Lam}] "
                f"(range [{av.min()}, {av.max()}])"
            )
        for name in ("b", "r"):
            v = np.asarray(getattr(self, name)(X, Y, t), dtype=float)
            if np.any(np.abs(v) > self.Lam + slack):
                raise BoundViolationError(f"|{name}| exceeds {self.Lam}")


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid; for kind=L the x axis carries w = log(price).

    The transport CFL ratio max|speed| * dt / dy is recorded at
    construction; solves refuse ratios above 1.
    """

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    t_range: tuple[float, float]
    nx: int
    ny: int
    nt: int
    kind: GeometryKind = GeometryKind.K
    cfl_ratio: float = dc_field(init=False)

    def __post_init__(self) -> None:
        if min(self.nx, self.ny) < 3 or self.nt < 1:
            raise ValueError("grid too small")
        if self.t_range[1] <= self.t_range[0]:
            raise ValueError("empty time range")
        speed = np.max(np.abs(self.transport_speed(self.xs)))
        object.__setattr__(self, "cfl_ratio",
                           float(speed * self.dt / self.dy))

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(*self.x_range, self.nx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(*self.y_range, self.ny)

    @property
    def ts(self) -> np.ndarray:
        return np.linspace(*self.t_range, self.nt + 1)

    @property
    def dx(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.y_range[1] - self.y_range[0]) / (self.ny - 1)

    @property
    def dt(self) -> float:
        return (self.t_range[1] - self.t_range[0]) / self.nt

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def physical_x(self, xs: np.ndarray) -> np.ndarray:
        return np.exp(xs) if self.kind is GeometryKind.L else xs

    def transport_speed(self, xs: np.ndarray) -> np.ndarray:
        # x * d/dy in original coordinates; e^w * d/dy in log coordinates.
        return self.physical_x(np.asarray(xs, dtype=float))


# ---------------------------------------------------------------------------
# Coefficient mollification
# ---------------------------------------------------------------------------

class MollifierMode(Enum):
    CUTOFF_CHI = "cutoff_chi"
    SMOOTH_RHO = "smooth_rho"


@dataclass(frozen=True)
class MollifierSpec:
    n: int
    mode: MollifierMode

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("mollifier index n must be >= 1")


def _smoothstep(u: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = np.where(u > 0.0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
        g = np.where(u < 1.0, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
    return f / (f + g)


def _chi_n(n: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # 1 on x^2 + y^2 <= n^2, 0 on x^2 + y^2 >= (n+1)^2, smooth in between.
    rho2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
    return _smoothstep(((n + 1.0) ** 2 - rho2) / ((n + 1.0) ** 2 - n**2))


def _bump_nodes(order: int = 12) -> tuple[np.ndarray, np.ndarray]:
    # 1D C0-infinity bump on [-s, s] with s = 1/(2*sqrt(3)); the tensor cube
    # then fits inside the ball of radius 1/2. Discrete weights renormalized
    # so the quadrature is an exact convex combination.
    s = 1.0 / (2.0 * math.sqrt(3.0))
    xg, wg = np.polynomial.legendre.leggauss(order)
    nodes = s * xg
    vals = np.exp(-1.0 / np.maximum(1.0 - (nodes / s) ** 2, 1e-300))
    weights = wg * s * vals
    return nodes, weights / weights.sum()


def mollify(field: CoefficientField, spec: MollifierSpec,
            check_grid: GridSpec | None = None) -> CoefficientField:
    """Regularized coefficient field.

    CUTOFF_CHI blends a toward the ellipticity floor lam and kills b, r
    outside the ball of radius n (transition finished by n+1).  SMOOTH_RHO
    convolves with a compactly supported bump, anisotropically scaled by x
    in the first slot so the price domain x > 0 is preserved; quadrature is
    a tensor Gauss rule with renormalized weights (an exact convex
    combination, so the (lam, Lam) band is preserved exactly).
    """
    expected = (MollifierMode.CUTOFF_CHI if field.kind is GeometryKind.K
                else MollifierMode.SMOOTH_RHO)
    if spec.mode is not expected:
        raise ValueError(
            f"mollifier mode {spec.mode.value} does not match field kind "
            f"{field.kind.value}"
        )
    n = spec.n
    if spec.mode is MollifierMode.CUTOFF_CHI:
        a0, b0, r0, lam = field.a, field.b, field.r, field.lam

        def a_n(x, y, t):
            chi = _chi_n(n, x, y)
            return chi * a0(x, y, t) + (1.0 - chi) * lam

        def b_n(x, y, t):
            return _chi_n(n, x, y) * b0(x, y, t)

        def r_n(x, y, t):
            return _chi_n(n, x, y) * r0(x, y, t)

        out = CoefficientField(a=a_n, b=b_n, r=r_n, lam=field.lam,
                               Lam=field.Lam, kind=field.kind,
                               holder_alpha=field.holder_alpha,
                               time_independent=field.time_independent)
    else:
        nodes, weights = _bump_nodes()

        def convolve(fn):
            def fn_n(x, y, t):
                x = np.asarray(x, dtype=float)
                y = np.asarray(y, dtype=float)
                acc = 0.0
                for xi, wx in zip(nodes, weights):
                    for et, wy in zip(nodes, weights):
                        for ta, wt in zip(nodes, weights):
                            acc = acc + (wx * wy * wt) * fn(
                                x - x * xi / n, y - et / n, t - ta / n
                            )
                return acc
            return fn_n

        out = CoefficientField(a=convolve(field.a), b=convolve(field.b),
                               r=convolve(field.r), lam=field.lam,
                               Lam=field.Lam, kind=field.kind,
                               holder_alpha=field.holder_alpha,
                               time_independent=field.time_independent)
    if check_grid is not None:
        out.check_bounds(check_grid.physical_x(check_grid.xs), check_grid.ys,
                         check_grid.t_range[0])
    return out


# ---------------------------------------------------------------------------
# Discrete operators
# ---------------------------------------------------------------------------

def _coef_arrays(field: CoefficientField, grid: GridSpec, t: float):
    xs_phys = grid.physical_x(grid.xs)
    xs_half = grid.physical_x(grid.xs[:-1] + grid.dx / 2.0)
    X, Y = np.meshgrid(xs_phys, grid.ys, indexing="ij")
    Xh, Yh = np.meshgrid(xs_half, grid.ys, indexing="ij")
    a_half = np.asarray(field.a(Xh, Yh, t), dtype=float)
    b_full = np.asarray(field.b(X, Y, t), dtype=float)
    r_full = np.asarray(field.r(X, Y, t), dtype=float)
    return a_half, b_full, r_full


def _transport_apply(u, speed, dy, scheme: str):
    dcol = np.zeros_like(u)
    if scheme == "central":
        dcol[:, 1:-1] = (u[:, 2:] - u[:, :-2]) / (2.0 * dy)
        dcol[:, 0] = (u[:, 1] - u[:, 0]) / (2.0 * dy)
        dcol[:, -1] = (u[:, -1] - u[:, -2]) / (2.0 * dy)
        return speed[:, None] * dcol
    fwd = np.zeros_like(u)
    bwd = np.zeros_like(u)
    fwd[:, :-1] = (u[:, 1:] - u[:, :-1]) / dy      # copy-out ghost at top
    bwd[:, 1:] = (u[:, 1:] - u[:, :-1]) / dy       # copy-out ghost at bottom
    s = speed[:, None]
    central = 0.5 * (fwd + bwd)
    return np.where(s > 0, s * fwd, np.where(s < 0, s * bwd, s * central))


def apply_operator(field: CoefficientField, u: np.ndarray, grid: GridSpec,
                   t: float, mode: str = "primal",
                   transport: str = "upwind") -> np.ndarray:
    """Spatial part of the operator (or its formal adjoint) on a grid slice.

    The full operator is spatial_part(u) - du/dt (primal) or
    spatial_part(u) + du/dt (adjoint); time differencing is the caller's
    business.  Valid on the interior only: the one-cell halo of the result
    is zeroed.  transport='central' replaces the upwind difference with the
    second-order central one (used by residual/order tests).
    """
    if u.shape != (grid.nx, grid.ny):
        raise GridMismatchError(
            f"grid function shape {u.shape} != {(grid.nx, grid.ny)}"
        )
    if mode not in ("primal", "adjoint"):
        raise ValueError(f"unknown mode {mode!r}")
    a_half, b_full, r_full = _coef_arrays(field, grid, t)
    speed = grid.transport_speed(grid.xs)
    dx, dy = grid.dx, grid.dy
    out = np.zeros_like(u)
    flux = a_half * (u[1:, :] - u[:-1, :]) / dx
    out[1:-1, :] = (flux[1:, :] - flux[:-1, :]) / dx
    if mode == "primal":
        out[1:-1, :] += b_full[1:-1, :] * (u[2:, :] - u[:-2, :]) / (2.0 * dx)
        out += _transport_apply(u, speed, dy, transport)
    else:
        bu = b_full * u
        out[1:-1, :] -= (bu[2:, :] - bu[:-2, :]) / (2.0 * dx)
        if transport == "central":
            out -= _transport_apply(u, speed, dy, "central")
        else:
            out -= _transport_apply_adjoint(u, speed, dy)
    out -= r_full * u
    out[0, :] = out[-1, :] = 0.0
    out[:, 0] = out[:, -1] = 0.0
    return out


def _transport_apply_adjoint(u, speed, dy):
    # the adjoint advects with velocity of the opposite sign, so the upwind
    # difference direction flips relative to the primal operator
    fwd = np.zeros_like(u)
    bwd = np.zeros_like(u)
    fwd[:, :-1] = (u[:, 1:] - u[:, :-1]) / dy
    bwd[:, 1:] = (u[:, 1:] - u[:, :-1]) / dy
    s = speed[:, None]
    central = 0.5 * (fwd + bwd)
    return np.where(s > 0, s * bwd, np.where(s < 0, s * fwd, s * central))


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------

DEFAULT_SCHEME = {
    "splitting": "lie",
    "diffusion": "implicit_euler",
    "transport": "explicit_upwind",
}


@dataclass
class Solution:
    """Space-time grid function with bookkeeping from the solve."""

    grid: GridSpec
    times: np.ndarray
    frames: np.ndarray            # (n_stored, nx, ny)
    mass_history: np.ndarray      # discrete integral after each step
    transport_leakage: np.ndarray  # mass lost at y edges, per step
    scheme: dict

    @property
    def final(self) -> np.ndarray:
        return self.frames[-1]


class _Tridiag:
    """Batched Thomas solver for (I - dt*D) with D the implicit x-operator."""

    def __init__(self, field: CoefficientField, grid: GridSpec, t: float,
                 dt: float, adjoint: bool = False) -> None:
        a_half, b_full, r_full = _coef_arrays(field, grid, t)
        nx, ny = grid.nx, grid.ny
        dx = grid.dx
        lower = np.zeros((nx, ny))
        upper = np.zeros((nx, ny))
        diag = np.ones((nx, ny))
        # zero-flux ghosts: interior rows carry both diffusion couplings
        al = a_half[:-1, :]   # a_{i-1/2} for interior rows i = 1..nx-2
        ar = a_half[1:, :]    # a_{i+1/2} for interior rows i = 1..nx-2
        lower[1:-1, :] = -dt * al / dx**2
        upper[1:-1, :] = -dt * ar / dx**2
        diag[1:-1, :] += dt * (al + ar) / dx**2
        # boundary rows keep the one-sided flux so constants stay exact
        upper[0, :] = -dt * a_half[0, :] / dx**2
        diag[0, :] += dt * a_half[0, :] / dx**2
        lower[-1, :] = -dt * a_half[-1, :] / dx**2
        diag[-1, :] += dt * a_half[-1, :] / dx**2
        if not adjoint:
            lower[1:-1, :] += dt * b_full[1:-1, :] / (2.0 * dx)
            upper[1:-1, :] += -dt * b_full[1:-1, :] / (2.0 * dx)
        else:
            lower[1:-1, :] += -dt * b_full[:-2, :] / (2.0 * dx)
            upper[1:-1, :] += dt * b_full[2:, :] / (2.0 * dx)
        diag += dt * r_full
        self._factorize(lower, diag, upper)

    def _factorize(self, lower, diag, upper):
        nx = diag.shape[0]
        w = np.zeros_like(diag)
        dd = diag.copy()
        for i in range(1, nx):
            w[i] = lower[i] / dd[i - 1]
            dd[i] = diag[i] - w[i] * upper[i - 1]
        self.w, self.dd, self.upper = w, dd, upper

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        nx = rhs.shape[0]
        d = rhs.copy()
        for i in range(1, nx):
            d[i] -= self.w[i] * d[i - 1]
        out = np.empty_like(d)
        out[-1] = d[-1] / self.dd[-1]
        for i in range(nx - 2, -1, -1):
            out[i] = (d[i] - self.upper[i] * out[i + 1]) / self.dd[i]
        return out


def solve_cauchy(field: CoefficientField, initial: np.ndarray,
                 grid: GridSpec, scheme: dict | None = None,
                 store: str = "all", adjoint: bool = False) -> Solution:
    """March the Cauchy problem from the initial slice to the final time.

    Lie splitting: explicit upwind transport in y (monotone under the CFL
    constraint), then implicit Euler for the x-diffusion/drift/zero-order
    block (unconditionally stable M-matrix solve).  For r >= 0 the scheme
    obeys the discrete maximum principle.  store: 'all' | 'final'.
    """
    if initial.shape != (grid.nx, grid.ny):
        raise GridMismatchError(
            f"initial shape {initial.shape} != {(grid.nx, grid.ny)}"
        )
    if grid.cfl_ratio > 1.0 + 1e-12:
        raise CflError(
            f"transport CFL ratio {grid.cfl_ratio:.3f} > 1; refine dt or dy"
        )
    scheme = {**DEFAULT_SCHEME, **(scheme or {})}
    dt = grid.dt
    speed = grid.transport_speed(grid.xs)
    nu = speed * dt / grid.dy
    if adjoint:
        nu = -nu  # adjoint advects the other way
    ts = grid.ts
    area = grid.cell_area

    u = initial.astype(float).copy()
    frames = [u.copy()] if store == "all" else None
    mass = [float(u.sum() * area)]
    leakage = []
    solver = None
    for n in range(grid.nt):
        # transport substep (explicit upwind, copy-out at y edges)
        before = u.sum() * area
        shift_up = np.empty_like(u)
        shift_up[:, :-1] = u[:, 1:]
        shift_up[:, -1] = u[:, -1]
        shift_dn = np.empty_like(u)
        shift_dn[:, 1:] = u[:, :-1]
        shift_dn[:, 0] = u[:, 0]
        nupos = np.maximum(nu, 0.0)[:, None]
        nuneg = np.maximum(-nu, 0.0)[:, None]
        u = u + nupos * (shift_up - u) + nuneg * (shift_dn - u)
        leakage.append(float(u.sum() * area - before))
        # diffusion substep (implicit)
        if solver is None or not field.time_independent:
            solver = _Tridiag(field, grid, ts[n + 1], dt, adjoint=adjoint)
        u = solver.solve(u)
        if not np.all(np.isfinite(u)):
            raise RuntimeError(f"solver produced non-finite values at step {n}")
        mass.append(float(u.sum() * area))
        if store == "all":
            frames.append(u.copy())
    frames_arr = np.array(frames) if store == "all" else u[None, :, :]
    times = ts if store == "all" else ts[-1:]
    return Solution(grid=grid, times=times, frames=frames_arr,
                    mass_history=np.array(mass),
                    transport_leakage=np.array(leakage), scheme=scheme)


def delta_approximant(grid: GridSpec, x0: float, y0: float,
                      delta_width: float) -> np.ndarray:
    """Normalized discrete Gaussian spike: mesh-independent unit mass."""
    if delta_width < 2.0:
        raise ValueError("delta_width must span at least 2 grid cells")
    sx = delta_width * grid.dx / 2.0
    sy = delta_width * grid.dy / 2.0
    X, Y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    g = np.exp(-((X - x0) ** 2) / (2 * sx**2) - ((Y - y0) ** 2) / (2 * sy**2))
    total = g.sum() * grid.cell_area
    if total <= 0.0:
        raise ValueError("delta approximant has no support on the grid")
    return g / total


def approximate_fundamental_solution(field: CoefficientField,
                                     pole: EventPoint, grid: GridSpec,
                                     delta_width: float = 3.0,
                                     store: str = "final") -> Solution:
    """Kernel slice Gamma(., ., T; pole) via a delta-approximant solve.

    The pole must sit inside the spatial grid and at the grid's initial
    time; for the price family the pole price is mapped to log coordinates.
    """
    x0 = math.log(pole.x) if grid.kind is GeometryKind.L else pole.x
    if not (grid.x_range[0] < x0 < grid.x_range[1]
            and grid.y_range[0] < pole.y < grid.y_range[1]):
        raise ValueError("pole lies outside the spatial grid")
    if abs(pole.t - grid.t_range[0]) > 1e-12:
        raise ValueError("grid must start at the pole time")
    initial = delta_approximant(grid, x0, pole.y, delta_width)
    return solve_cauchy(field, initial, grid, store=store)


def adjoint_kernel_slice(field: CoefficientField, point: EventPoint,
                         grid: GridSpec) -> np.ndarray:
    """Kernel of the primal operator in its pole variables,
    Gamma(point; xi, eta, t0) for all grid (xi, eta).

    Computed as one adjoint solve from a delta at the evaluation point,
    marched from point.t down to the grid's initial time.
    """
    x0 = math.log(point.x) if grid.kind is GeometryKind.L else point.x
    if abs(point.t - grid.t_range[1]) > 1e-12:
        raise ValueError("grid must end at the evaluation time")
    initial = delta_approximant(grid, x0, point.y, 3.0)
    sol = solve_cauchy(field, initial, grid, store="final", adjoint=True)
    return sol.final


@dataclass(frozen=True)
class ReproductionReport:
    l1: float
    linf: float
    rel_l1: float
    composed: np.ndarray


def reproduction_check(kernel_t0_to_tau: np.ndarray,
                       kernel_tau_to_t,
                       direct: np.ndarray,
                       grid: GridSpec) -> ReproductionReport:
    """Discrete composition through the intermediate time versus direct.

    kernel_t0_to_tau: slice over (xi, eta) of the kernel with the original
    pole.  kernel_tau_to_t: either a 4D array [x, y, xi, eta] or a callable
    (x, y) -> 2D array over (xi, eta).  The composition integral is the
    cell-area-weighted contraction over (xi, eta).
    """
    if kernel_t0_to_tau.shape != (grid.nx, grid.ny) \
            or direct.shape != (grid.nx, grid.ny):
        raise GridMismatchError("slices must match the grid shape")
    area = grid.cell_area
    if isinstance(kernel_tau_to_t, np.ndarray):
        if kernel_tau_to_t.shape != (grid.nx, grid.ny, grid.nx, grid.ny):
            raise GridMismatchError("4D kernel has wrong shape")
        composed = np.einsum("ijkl,kl->ij", kernel_tau_to_t,
                             kernel_t0_to_tau) * area
    else:
        composed = np.empty((grid.nx, grid.ny))
        for i, x in enumerate(grid.xs):
            for j, y in enumerate(grid.ys):
                composed[i, j] = np.sum(
                    kernel_tau_to_t(x, y) * kernel_t0_to_tau
                ) * area
    diff = composed - direct
    l1 = float(np.sum(np.abs(diff)) * area)
    ref = float(np.sum(np.abs(direct)) * area)
    return ReproductionReport(
        l1=l1, linf=float(np.max(np.abs(diff))),
        rel_l1=l1 / ref if ref > 0 else math.inf, composed=composed,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_MAGIC = b"APGR"
_HEADER_FMT = "<4sHcc3I6d"


def save_grid(sol: Solution, path: str) -> None:
    """Flat binary frames with a small header; metadata in a JSON sidecar."""
    g = sol.grid
    header = struct.pack(
        _HEADER_FMT, _MAGIC, 1, b"<", g.kind.value.encode(),
        g.nx, g.ny, sol.frames.shape[0],
        *g.x_range, *g.y_range, *g.t_range,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(sol.frames, dtype="<f8").tobytes())
    meta = {
        "nx": g.nx, "ny": g.ny, "nt": g.nt,
        "n_frames": int(sol.frames.shape[0]),
        "x_range": list(g.x_range), "y_range": list(g.y_range),
        "t_range": list(g.t_range), "kind": g.kind.value,
        "scheme": sol.scheme,
        "times": [float(t) for t in sol.times],
    }
    with open(path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)


def load_grid(path: str) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as fh:
        raw = fh.read(struct.calcsize(_HEADER_FMT))
        if len(raw) < struct.calcsize(_HEADER_FMT) \
                or raw[:4] != _MAGIC:
            raise ValueError(f"{path} is not a grid file")
        magic, version, endian, kind, nx, ny, nf, x0, x1, y0, y1, t0, t1 = \
            struct.unpack(_HEADER_FMT, raw)
        frames = np.frombuffer(fh.read(), dtype="<f8").reshape(nf, nx, ny)
    info = {"kind": kind.decode(), "nx": nx, "ny": ny, "n_frames": nf,
            "x_range": (x0, x1), "y_range": (y0, y1), "t_range": (t0, t1),
            "endianness": endian.decode(), "version": version}
    return frames.copy(), info


def export_slice_csv(sol: Solution, frame: int, path: str) -> None:
    g = sol.grid
    with open(path, "w") as fh:
        fh.write("x,y,value\n")
        for i, x in enumerate(g.xs):
            for j, y in enumerate(g.ys):
                fh.write(f"{x!r},{y!r},{sol.frames[frame, i, j]!r}\n")
