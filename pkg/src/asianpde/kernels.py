"""Constant-coefficient kernels for both operator families.

The log-price family has a Gaussian closed form.  The price family reduces
to the joint density of a Brownian motion and its integrated geometric
exponential, which carries the slowly decaying oscillatory integral handled
here by half-period-aligned panel quadrature with dual-rule error control.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._quadrature import panel_nodes, trapezoid_doubling
from .geometry import EventPoint

__all__ = [
    "KernelParams",
    "KernelResult",
    "YorArgs",
    "ThetaConvergenceError",
    "THETA_MIN_TIME",
    "gamma_k",
    "gamma_k_array",
    "gamma_k_mass",
    "theta",
    "theta_batch",
    "yor_density",
    "yor_density_batch",
    "yor_mass",
    "gamma_l1",
    "gamma_l1_batch",
    "gamma_l1_batch_eval",
    "gamma_l1_mass",
    "gamma_l_lambda",
]

# Hard reliability guards for the oscillatory integral: below THETA_MIN_TIME
# the true value is ~exp(-pi^2/(2t)) while the integrand is O(1), so double
# precision has no correct digits left and we refuse instead of guessing.
THETA_MIN_TIME = 0.05
THETA_MAX_PANELS = 4096
_EPS = np.finfo(float).eps


class ThetaConvergenceError(RuntimeError):
    """Oscillatory quadrature cannot meet its error contract."""


@dataclass(frozen=True)
class KernelParams:
    """Diffusion constant of the model operator, lambda = sigma^2 / 2."""

    lambda_: float

    def __post_init__(self) -> None:
        if self.lambda_ <= 0.0:
            raise ValueError(f"lambda must be positive, got {self.lambda_}")


@dataclass(frozen=True)
class KernelResult:
    value: float
    abs_error_estimate: float
    tolerance_used: float

    def __post_init__(self) -> None:
        if self.value < 0.0 or self.abs_error_estimate < 0.0:
            raise ValueError("kernel value and error estimate must be >= 0")


@dataclass(frozen=True)
class YorArgs:
    """Arguments of the joint density p(w, y, t): log coordinate w over R,
    integrated exponential y > 0, elapsed time t > 0."""

    w: float
    y: float
    t: float

    def __post_init__(self) -> None:
        if self.y <= 0.0:
            raise ValueError(f"y must be positive, got {self.y}")
        if self.t <= 0.0:
            raise ValueError(f"t must be positive, got {self.t}")


# ---------------------------------------------------------------------------
# Gaussian kernel of the log-price family
# ---------------------------------------------------------------------------

def gamma_k_array(
    lam: float,
    x, y, t,
    xi, eta, tau,
) -> np.ndarray:
    """Vectorized Gaussian kernel; zero on t <= tau."""
    x, y, t = np.asarray(x, float), np.asarray(y, float), np.asarray(t, float)
    xi, eta, tau = (np.asarray(xi, float), np.asarray(eta, float),
                    np.asarray(tau, float))
    dt = t - tau
    out = np.zeros(np.broadcast(x, y, t, xi, eta, tau).shape)
    fwd = dt > 0.0
    if np.any(fwd):
        dtp = np.where(fwd, dt, 1.0)
        shear = y - eta + dtp * (x + xi) / 2.0
        expo = -((x - xi) ** 2) / (4.0 * lam * dtp) \
            - 3.0 * shear**2 / (lam * dtp**3)
        with np.errstate(under="ignore"):
            vals = math.sqrt(3.0) / (2.0 * lam * math.pi * dtp**2) \
                * np.exp(expo)
        out = np.where(fwd, vals, 0.0)
    return out


def gamma_k(params: KernelParams, z: EventPoint, pole: EventPoint) -> float:
    """Closed-form kernel of the constant-coefficient log-price operator.

    Total function: exactly 0 for z.t <= pole.t, strictly positive after.
    """
    return float(gamma_k_array(params.lambda_, z.x, z.y, z.t,
                               pole.x, pole.y, pole.t))


def gamma_k_mass(params: KernelParams, z: EventPoint, tau: float,
                 order: int = 80) -> float:
    """Pole-variable integral of the Gaussian kernel by quadrature.

    Uses the shear substitution s = eta - (y + dt*(x+xi)/2), under which the
    double integral factorizes into two 1D Gaussian quadratures.
    """
    lam = params.lambda_
    dt = z.t - tau
    if dt <= 0.0:
        return 0.0
    sx = math.sqrt(2.0 * lam * dt)
    sy = math.sqrt(lam * dt**3 / 6.0)
    xg, wgt = np.polynomial.legendre.leggauss(order)
    xi = z.x + 10.0 * sx * xg
    s = 10.0 * sy * xg
    fx = np.exp(-((z.x - xi) ** 2) / (4.0 * lam * dt))
    fs = np.exp(-3.0 * s**2 / (lam * dt**3))
    ix = 10.0 * sx * float(np.dot(wgt, fx))
    iy = 10.0 * sy * float(np.dot(wgt, fs))
    return math.sqrt(3.0) / (2.0 * lam * math.pi * dt**2) * ix * iy


# ---------------------------------------------------------------------------
# Oscillatory integral
# ---------------------------------------------------------------------------

def _theta_integrand(xi: np.ndarray, z: float, t: float) -> np.ndarray:
    with np.errstate(under="ignore", over="ignore"):
        damp = np.exp(-(xi**2) / (2.0 * t) - z * np.cosh(xi))
    return damp * np.sinh(xi) * np.sin(math.pi * xi / t)


def _theta_envelope(xi: np.ndarray, z: float, t: float) -> np.ndarray:
    with np.errstate(under="ignore", over="ignore"):
        return np.exp(-(xi**2) / (2.0 * t) - z * np.cosh(xi)) * np.sinh(xi)


def _theta_cutoff(z: float, t: float, floor: float) -> float:
    """Smallest xi beyond which the non-oscillatory envelope stays < floor."""
    step = max(t, 0.25)
    xi = step
    peak = 0.0
    # hard cap: beyond this the Gaussian factor alone underflows
    cap = math.sqrt(2.0 * t * 750.0) + 5.0
    while xi < cap:
        env = float(_theta_envelope(np.array([xi]), z, t)[0])
        peak = max(peak, env)
        if env < floor and env <= peak:
            return xi
        xi += step
    return cap


def _theta_edges(z: float, t: float, tol: float) -> np.ndarray:
    if t < THETA_MIN_TIME:
        raise ThetaConvergenceError(
            f"t={t} below the reliable range (t >= {THETA_MIN_TIME}); "
            "the oscillatory integral loses all double-precision digits"
        )
    # truncating an alternating tail leaves a remainder of the order of the
    # envelope at the cutoff, so cut far deeper than the requested tol
    floor = min(tol * 1e-3, 1e-18)
    cutoff = _theta_cutoff(z, t, floor)
    # panels aligned to the half-periods of sin(pi*xi/t), each of width t
    n_half = int(math.ceil(cutoff / t))
    if n_half > THETA_MAX_PANELS:
        raise ThetaConvergenceError(
            f"{n_half} oscillation panels exceed the limit {THETA_MAX_PANELS}"
        )
    return np.linspace(0.0, n_half * t, n_half + 1)


def _adaptive_panel(f, a: float, b: float, tol: float, depth: int = 0
                     ) -> tuple[float, float, float]:
    x16, w16 = panel_nodes(np.array([a, b]), 16)
    x32, w32 = panel_nodes(np.array([a, b]), 32)
    lo = float(np.dot(w16, f(x16)))
    hi = float(np.dot(w32, f(x32)))
    scale = float(np.dot(w32, np.abs(f(x32))))
    err = abs(hi - lo)
    if err <= tol or depth >= 10:
        return hi, err, scale
    m = 0.5 * (a + b)
    v1, e1, s1 = _adaptive_panel(f, a, m, tol / 2.0, depth + 1)
    v2, e2, s2 = _adaptive_panel(f, m, b, tol / 2.0, depth + 1)
    return v1 + v2, e1 + e2, s1 + s2


def theta(z_arg: float, t: float, tol: float = 1e-10) -> KernelResult:
    """Oscillatory transform: integral over (0, inf) of
    exp(-xi^2/(2t)) * exp(-z*cosh(xi)) * sinh(xi) * sin(pi*xi/t) dxi.

    Rule A is adaptive Gauss quadrature on half-period panels; rule B is a
    resolution-doubled trapezoid over the same truncated range.  The error
    estimate is the worse of the two internal estimates, the inter-rule
    disagreement, and an explicit roundoff floor eps * integral(|integrand|).
    """
    if z_arg <= 0.0:
        raise ValueError(f"z_arg must be positive, got {z_arg}")
    if t <= 0.0:
        raise ValueError(f"t must be positive, got {t}")
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    edges = _theta_edges(z_arg, t, tol)
    f = lambda xi: _theta_integrand(xi, z_arg, t)
    per_panel_tol = tol / max(1, len(edges) - 1) / 4.0
    value = 0.0
    rule_err = 0.0
    abs_scale = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e, s = _adaptive_panel(f, a, b, per_panel_tol)
        value += v
        rule_err += e
        abs_scale += s
    value_b, err_b = trapezoid_doubling(f, float(edges[0]), float(edges[-1]),
                                        n0=16 * max(1, len(edges) - 1),
                                        atol=tol / 4.0)
    truncation = min(tol * 1e-3, 1e-18) * t
    roundoff = _EPS * abs_scale * max(1, len(edges) - 1) + truncation
    err = max(rule_err, abs(value - value_b)) + roundoff
    if abs(value) < roundoff:
        # noise around an unresolvably small positive value
        value = 0.0
    if value < 0.0:
        # the exact transform is positive; negative dust is clamped and
        # reported through the estimate
        err += -value
        value = 0.0
    return KernelResult(value=value, abs_error_estimate=err,
                        tolerance_used=tol)


def theta_batch(z: np.ndarray, t: float, tol: float = 1e-10,
                order: int = 24) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized theta over an array of z at one shared t.

    One node set is built from the smallest z (widest cutoff) and reused;
    the per-z error estimate is the dual-order rule disagreement plus the
    roundoff floor.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0.0):
        raise ValueError("z values must be positive")
    zmin = float(np.min(z))
    edges = _theta_edges(zmin, t, tol)
    xs_a, ws_a = panel_nodes(edges, order)
    xs_b, ws_b = panel_nodes(edges, 2 * order)

    def accumulate(xs, ws):
        with np.errstate(under="ignore", over="ignore"):
            pref = (np.exp(-(xs**2) / (2.0 * t)) * np.sinh(xs)
                    * np.sin(math.pi * xs / t)) * ws
            absref = np.abs(pref)
            vals = np.empty(z.shape)
            scales = np.empty(z.shape)
            flat = z.ravel()
            out = vals.ravel()
            sc = scales.ravel()
            chunk = max(1, int(4e6 // max(xs.size, 1)))
            for i in range(0, flat.size, chunk):
                zz = flat[i:i + chunk, None]
                damp = np.exp(-zz * np.cosh(xs)[None, :])
                out[i:i + chunk] = damp @ pref
                sc[i:i + chunk] = damp @ absref
        return vals, scales

    va, sa = accumulate(xs_a, ws_a)
    vb, _ = accumulate(xs_b, ws_b)
    floor = _EPS * sa * max(1, len(edges) - 1) + min(tol * 1e-3, 1e-18) * t
    err = np.abs(va - vb) + floor
    # below the roundoff floor the computed value is noise around an
    # exactly positive but unresolvable quantity: report 0 with the floor
    vb = np.where(np.abs(vb) < floor, 0.0, vb)
    return vb, err


# ---------------------------------------------------------------------------
# Joint density of (log coordinate, integrated exponential)
# ---------------------------------------------------------------------------

def _yor_prefactor_log(w, y, t):
    return (math.pi**2 / (2.0 * t)
            - math.log(math.pi) - 0.5 * math.log(2.0 * math.pi * t)
            - (1.0 + np.exp(2.0 * np.minimum(w, 350.0))) / (2.0 * y)
            + w - 2.0 * np.log(y))


def yor_density(args: YorArgs, tol: float = 1e-10) -> KernelResult:
    """Transition density value p(w, y, t), nonnegative up to quadrature dust.

    Tiny negative values produced by the oscillatory quadrature are clamped
    to 0 and the clamp magnitude is added to the error estimate.
    """
    th = theta(math.exp(args.w) / args.y, args.t, tol)
    pref = math.exp(_yor_prefactor_log(args.w, args.y, args.t))
    raw = pref * th.value
    err = pref * th.abs_error_estimate
    if raw < 0.0:
        return KernelResult(0.0, err + abs(raw), tol)
    return KernelResult(raw, err, tol)


def yor_density_batch(w: np.ndarray, y: np.ndarray, t: float,
                      tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized density over matching arrays of (w, y) at one shared t."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise ValueError("y values must be positive")
    z = np.exp(w) / y
    th, th_err = theta_batch(z, t, tol)
    with np.errstate(under="ignore", over="ignore"):
        pref = np.exp(_yor_prefactor_log(w, y, t))
    raw = pref * th
    err = pref * th_err + np.where(raw < 0.0, -raw, 0.0)
    return np.maximum(raw, 0.0), err


def yor_mass(t: float, tol: float = 1e-4, refine: int = 1
             ) -> KernelResult:
    """Double integral of p(., ., t) over R x (0, inf) by panelled quadrature.

    Substitutes y = e^v to resolve both the essential singularity at y -> 0+
    and the heavy right tail.  Should be 1 for every t (p is a probability
    density); returned as a KernelResult so callers can see the estimate.
    """
    w_half = 8.0 * math.sqrt(t) + 3.0
    v_lo, v_hi = -9.0, 13.0 * math.sqrt(t) + 3.0

    def compute(order: int, width: float) -> tuple[float, float]:
        we = np.arange(-w_half, w_half + width, width)
        ve = np.arange(v_lo, v_hi + width, width)
        wn, wwt = panel_nodes(we, order)
        vn, vwt = panel_nodes(ve, order)
        W = np.repeat(wn, vn.size)
        V = np.tile(vn, wn.size)
        Y = np.exp(V)
        dens, err = yor_density_batch(W, Y, t, tol)
        wt2 = np.repeat(wwt, vn.size) * np.tile(vwt, wn.size) * Y
        return float(np.dot(wt2, dens)), float(np.dot(wt2, err))

    coarse, _ = compute(8, 0.5)
    fine, qerr = compute(12, 0.34)
    est = abs(fine - coarse) + qerr
    return KernelResult(value=fine, abs_error_estimate=est,
                        tolerance_used=tol)


# ---------------------------------------------------------------------------
# Kernel of the price family
# ---------------------------------------------------------------------------

def gamma_l1(z: EventPoint, pole: EventPoint, tol: float = 1e-10
             ) -> KernelResult:
    """Kernel of the unit-diffusion price operator.

    Transition-density reading: the value at pole (xi, eta, tau) is the
    density of reaching (xi, eta) from (z.x, z.y) after elapsed time
    z.t - tau.  Identically 0 on {t <= tau} union {y >= eta}: time must
    advance and the running average can only increase.
    """
    if z.x <= 0.0 or pole.x <= 0.0:
        raise ValueError("both x coordinates must be positive")
    if z.t <= pole.t or z.y >= pole.y:
        return KernelResult(0.0, 0.0, tol)
    args = YorArgs(
        w=0.5 * math.log(pole.x / z.x),
        y=(pole.y - z.y) / (2.0 * z.x),
        t=(z.t - pole.t) / 2.0,
    )
    dens = yor_density(args, tol)
    pref = 1.0 / (4.0 * z.x * pole.x)
    return KernelResult(pref * dens.value, pref * dens.abs_error_estimate,
                        tol)


def gamma_l1_batch(z: EventPoint, xi: np.ndarray, eta: np.ndarray,
                   tau: float, tol: float = 1e-10
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized gamma_l1 over arrays of pole coordinates at one tau."""
    if z.x <= 0.0:
        raise ValueError("z.x must be positive")
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(xi <= 0.0):
        raise ValueError("pole x coordinates must be positive")
    vals = np.zeros(np.broadcast(xi, eta).shape)
    errs = np.zeros_like(vals)
    if z.t <= tau:
        return vals, errs
    xi_b = np.broadcast_to(xi, vals.shape)
    eta_b = np.broadcast_to(eta, vals.shape)
    alive = eta_b > z.y
    if np.any(alive):
        w = 0.5 * np.log(xi_b[alive] / z.x)
        y = (eta_b[alive] - z.y) / (2.0 * z.x)
        dens, errd = yor_density_batch(w, y, (z.t - tau) / 2.0, tol)
        pref = 1.0 / (4.0 * z.x * xi_b[alive])
        vals[alive] = pref * dens
        errs[alive] = pref * errd
    return vals, errs


def gamma_l1_batch_eval(xi: np.ndarray, eta: np.ndarray, tau: float,
                        pole: EventPoint, tol: float = 1e-10
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized gamma_l1 over arrays of evaluation points at one fixed pole.

    The elapsed time tau - pole.t is shared, so the oscillatory integral can
    reuse one node set across all points."""
    if pole.x <= 0.0:
        raise ValueError("pole.x must be positive")
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(xi <= 0.0):
        raise ValueError("evaluation x coordinates must be positive")
    vals = np.zeros(np.broadcast(xi, eta).shape)
    errs = np.zeros_like(vals)
    if tau <= pole.t:
        return vals, errs
    xi_b = np.broadcast_to(xi, vals.shape)
    eta_b = np.broadcast_to(eta, vals.shape)
    alive = eta_b < pole.y
    if np.any(alive):
        w = 0.5 * np.log(pole.x / xi_b[alive])
        y = (pole.y - eta_b[alive]) / (2.0 * xi_b[alive])
        dens, errd = yor_density_batch(w, y, (tau - pole.t) / 2.0, tol)
        pref = 1.0 / (4.0 * xi_b[alive] * pole.x)
        vals[alive] = pref * dens
        errs[alive] = pref * errd
    return vals, errs


def gamma_l1_mass(z: EventPoint, tau: float, tol: float = 1e-4
                  ) -> KernelResult:
    """Pole-variable double integral of gamma_l1; equals 1 in exact arithmetic.

    Substituting w = log(xi/x)/2 and u = (eta - y)/(2x) turns the integral
    into the total mass of the underlying joint density at elapsed/2, which
    is then integrated by the same panelled rule as yor_mass.
    """
    if z.t <= tau:
        return KernelResult(0.0, 0.0, tol)
    return yor_mass((z.t - tau) / 2.0, tol)


def gamma_l_lambda(params: KernelParams, z: EventPoint, pole: EventPoint,
                   tol: float = 1e-10) -> KernelResult:
    """General-diffusion price kernel via the diffusive rescaling
    (y, t) -> (lam*y, lam*t) with prefactor lam.

    This is the transition density of the drift-free exponential model with
    volatility sqrt(2*lam); at lam = 1 it coincides with gamma_l1.
    """
    lam = params.lambda_
    zs = EventPoint(z.x, lam * z.y, lam * z.t)
    ps = EventPoint(pole.x, lam * pole.y, lam * pole.t)
    base = gamma_l1(zs, ps, tol)
    return KernelResult(lam * base.value, lam * base.abs_error_estimate, tol)
