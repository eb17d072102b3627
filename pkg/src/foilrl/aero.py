"""Two-fidelity aerodynamic solver pair behind one result contract.

High fidelity: linear-strength vortex panel method with a Kutta condition
for lift, plus a profile-drag model combining flat-plate turbulent skin
friction (thickness form factor) with a pressure-drag proxy from the
trailing-edge momentum thickness of an integral boundary-layer march.
It reports kappa = 1 and can legitimately fail to converge.

Low fidelity: thin-airfoil theory on the camber line plus flat-plate
friction with a quadratic thickness form factor. It never fails and
reports a geometric-plausibility confidence kappa in [0, 1].

Both apply the subcritical compressibility correction cl / sqrt(1 - Ma^2).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractViolation, GeometryRejected, InvalidParams
from .geometry import AirfoilGeometry, cosine_stations, is_valid, max_thickness

CD_FLOOR = 1e-4

# Plausibility-score calibration: crossing area, thickness-curvature excess,
# and camber beyond what the surrogate can be trusted on. The thresholds are
# set so every airfoil in the bundled reset list scores above 0.99.
KAPPA_CROSSING_GAIN = 400.0
KAPPA_CURVATURE_GAIN = 0.02
KAPPA_CURVATURE_ALLOWANCE = 25.0
KAPPA_CAMBER_GAIN = 60.0
KAPPA_CAMBER_ALLOWANCE = 0.105
KAPPA_PINCH_GAIN = 35.0
KAPPA_PINCH_ALLOWANCE = 0.035

# Integral boundary layer constants (fully turbulent march).
_BL_H_INIT = 1.4
_BL_H_SEPARATION = 2.9
_BL_U_START = 0.3
_MASSIVE_SEPARATION_X = 0.3
_SEPARATED_DRAG_GAIN = 0.12


@dataclass(frozen=True)
class FlowConditions:
    """Single-point operating condition."""

    angle_of_attack_deg: float = 2.0
    reynolds: float = 1e6
    mach: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.mach < 0.7):
            raise InvalidParams("mach must be in [0, 0.7) for the compressibility correction")
        if self.reynolds <= 0.0:
            raise InvalidParams("reynolds must be positive")


@dataclass(frozen=True)
class SolverConfig:
    panel_count: int = 255
    max_iterations: int = 200
    tolerance: float = 1e-10
    timeout_s: float = 30.0
    fidelity: str = "high"
    nominal_cost_ms: float = 73.0


def high_fidelity_config(**overrides) -> SolverConfig:
    return replace(SolverConfig(), **overrides)


def low_fidelity_config(**overrides) -> SolverConfig:
    return replace(SolverConfig(fidelity="low", nominal_cost_ms=4.0), **overrides)


@dataclass(frozen=True)
class AeroResult:
    cl: float | None
    cd: float | None
    confidence: float
    converged: bool
    solver_calls_cost: float = 0.0

    @property
    def ratio(self) -> float:
        return lift_drag_ratio(self)


def lift_drag_ratio(result: AeroResult) -> float:
    """cl / cd of a converged result; consuming a failed solve is a bug."""
    if not result.converged:
        raise ContractViolation("lift_drag_ratio on a non-converged result")
    return result.cl / result.cd


def _prandtl_glauert(cl: float, mach: float) -> float:
    return cl / np.sqrt(1.0 - mach**2)


def _resample(geom: AirfoilGeometry, n_per_side: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = cosine_stations(n_per_side + 1)
    yu = np.interp(x, geom.x, geom.y_upper)
    yl = np.interp(x, geom.x, geom.y_lower)
    return x, yu, yl


def _panel_nodes(geom: AirfoilGeometry, n_panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed node loop: lower TE -> LE -> upper TE, cosine spaced per side."""
    n_side = max(n_panels // 2, 16)
    x, yu, yl = _resample(geom, n_side)
    xs = np.concatenate([x[::-1], x[1:]])
    ys = np.concatenate([yl[::-1], yu[1:]])
    return xs, ys


def _linear_vortex_solution(xs, ys, alpha_rad):
    """Nodal vortex strengths (normalized by 2 pi V) and panel geometry.

    Classic linear-strength formulation: flow tangency at panel midpoints
    plus the Kutta condition tying the two trailing-edge node strengths.
    """
    xj, yj = xs[:-1], ys[:-1]
    dx = np.diff(xs)
    dy = np.diff(ys)
    s = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    xm = xj + 0.5 * dx
    ym = yj + 0.5 * dy
    m = s.size

    rx = xm[:, None] - xj[None, :]
    ry = ym[:, None] - yj[None, :]
    sj = s[None, :]
    thj = theta[None, :]
    thi = theta[:, None]

    a = -rx * np.cos(thj) - ry * np.sin(thj)
    b = rx**2 + ry**2
    c = np.sin(thi - thj)
    d = np.cos(thi - thj)
    e = rx * np.sin(thj) - ry * np.cos(thj)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.log1p(sj * (sj + 2.0 * a) / b)
        g = np.arctan2(e * sj, b + a * sj)
        p = rx * np.sin(thi - 2.0 * thj) + ry * np.cos(thi - 2.0 * thj)
        q = rx * np.cos(thi - 2.0 * thj) - ry * np.sin(thi - 2.0 * thj)
        cn2 = d + 0.5 * q * f / sj - (a * c + d * e) * g / sj
        cn1 = 0.5 * d * f + c * g - cn2
        ct2 = c + 0.5 * p * f / sj + (a * d - c * e) * g / sj
        ct1 = 0.5 * c * f - d * g - ct2

    diag = np.eye(m, dtype=bool)
    cn1[diag] = -1.0
    cn2[diag] = 1.0
    ct1[diag] = 0.5 * np.pi
    ct2[diag] = 0.5 * np.pi

    an = np.zeros((m + 1, m + 1))
    at = np.zeros((m, m + 1))
    an[:m, 0] = cn1[:, 0]
    an[:m, m] = cn2[:, m - 1]
    an[:m, 1:m] = cn1[:, 1:] + cn2[:, :-1]
    at[:, 0] = ct1[:, 0]
    at[:, m] = ct2[:, m - 1]
    at[:, 1:m] = ct1[:, 1:] + ct2[:, :-1]
    an[m, 0] = 1.0
    an[m, m] = 1.0

    rhs = np.zeros(m + 1)
    rhs[:m] = np.sin(theta - alpha_rad)
    gamma = np.linalg.solve(an, rhs)
    v_t = np.cos(theta - alpha_rad) + at @ gamma
    return gamma, v_t, s, theta, xm


def _circulation_cl(gamma: np.ndarray, s: np.ndarray) -> float:
    """Kutta-Joukowski lift from total circulation (chord-normalized)."""
    return float(4.0 * np.pi * np.sum(0.5 * (gamma[:-1] + gamma[1:]) * s))


def _head_h1(h: np.ndarray | float):
    h = np.asarray(h, dtype=float)
    return np.where(
        h <= 1.6,
        3.3 + 0.8234 * np.maximum(h - 1.1, 1e-3) ** -1.287,
        3.3 + 1.5501 * np.maximum(h - 0.6778, 1e-3) ** -3.064,
    )


def _head_h_from_h1(h1: float) -> float:
    if h1 <= 3.32:
        return _BL_H_SEPARATION
    h = 1.1 + (0.8234 / (h1 - 3.3)) ** (1.0 / 1.287)
    if h > 1.6:
        h = 0.6778 + (1.5501 / (h1 - 3.3)) ** (1.0 / 3.064)
    return float(h)


def _cf_ludwieg_tillmann(h: float, re_theta: float) -> float:
    return 0.246 * 10.0 ** (-0.678 * h) * max(re_theta, 1.0) ** -0.268


def _march_boundary_layer(s, u_e, reynolds, max_substeps):
    """Head's entrainment method along one surface, turbulent from the start.

    Returns (theta, h, u) at the trailing edge or at separation, plus the
    arclength fraction covered before separation (1.0 means attached to TE).
    """
    s = np.asarray(s, dtype=float)
    u_e = np.asarray(u_e, dtype=float)
    s_total = s[-1] if s.size else 0.0

    # Start at the stagnation point: the front-region velocity minimum.
    front = s < 0.3 * s_total
    if front.sum() >= 2:
        i0 = int(np.argmin(u_e[front]))
        s, u_e = s[i0:], u_e[i0:]
    # Drop the blunt-trailing-edge velocity spike (potential-flow artifact).
    te_keep = s <= s_total - 0.01
    s, u_e = s[te_keep], u_e[te_keep]

    keep = u_e > _BL_U_START
    if keep.sum() < 4:
        return None
    s = s[keep]
    u = u_e[keep]
    s = s - s[0] + max(s[0], 1e-4)
    du_ds = np.clip(np.gradient(u, s), -60.0, 60.0)

    def flat_plate_theta(s_loc, u_loc):
        return 0.036 * s_loc * max(u_loc * reynolds * s_loc, 10.0) ** -0.2

    theta = flat_plate_theta(s[0], u[0])
    h = _BL_H_INIT
    h1 = float(_head_h1(h))

    for k in range(len(s) - 1):
        ds_full = s[k + 1] - s[k]
        n_sub = min(max(1, int(ds_full / 2e-3) + 1), max_substeps)
        ds = ds_full / n_sub
        for j in range(n_sub):
            frac = (j + 0.5) / n_sub
            u_loc = u[k] + frac * (u[k + 1] - u[k])
            dudx = du_ds[k] + frac * (du_ds[k + 1] - du_ds[k])
            re_theta = u_loc * theta * reynolds
            cf = _cf_ludwieg_tillmann(h, re_theta)
            dtheta = 0.5 * cf - (h + 2.0) * theta / u_loc * dudx
            dth1 = 0.0306 * max(h1 - 3.0, 0.05) ** -0.6169 - (theta * h1 / u_loc) * dudx
            theta_new = theta + ds * dtheta
            th1_new = theta * h1 + ds * dth1
            s_loc = s[k] + (j + 1) * ds
            if theta_new <= 0.0 or th1_new <= 3.32 * theta_new:
                # Strong acceleration collapsed the layer; restart it thin.
                theta = flat_plate_theta(s_loc, u_loc)
                h = _BL_H_INIT
                h1 = float(_head_h1(h))
                continue
            theta = theta_new
            h1 = min(th1_new / theta, 25.0)
            h = _head_h_from_h1(h1)
            if h >= _BL_H_SEPARATION and dudx < 0.0:
                return theta, h, u_loc, s_loc / s[-1]
    return theta, h, float(u[-1]), 1.0


def _squire_young(theta: float, h: float, u: float) -> float:
    return 2.0 * theta * u ** (0.5 * (h + 5.0))


def _flat_plate_cf(reynolds: float) -> float:
    return 0.074 * reynolds**-0.2


def _profile_drag(geom, v_t, s, theta_pan, reynolds, n_lower, max_substeps):
    """Friction plus pressure-drag proxy; None signals a failed drag model."""
    tc = max_thickness(geom)
    cf = _flat_plate_cf(reynolds)
    cd_friction = 2.0 * cf * (1.0 + 2.7 * tc + 100.0 * tc**4)

    # Arclength from the leading edge along each surface, midpoint stations.
    mid_s = np.concatenate([[0.0], np.cumsum(s)])
    mid = 0.5 * (mid_s[:-1] + mid_s[1:])
    s_le = mid_s[n_lower]
    lower_s = (s_le - mid[:n_lower])[::-1]
    lower_u = np.abs(v_t[:n_lower])[::-1]
    upper_s = mid[n_lower:] - s_le
    upper_u = np.abs(v_t[n_lower:])

    cd_wake = 0.0
    for s_arr, u_arr in ((upper_s, upper_u), (lower_s, lower_u)):
        out = _march_boundary_layer(s_arr, u_arr, reynolds, max_substeps)
        if out is None:
            return None
        theta_te, h_te, u_te, attached = out
        if attached < 1.0:
            x_sep = attached * s_arr[-1]
            if x_sep < _MASSIVE_SEPARATION_X:
                return None
            cd_wake += _squire_young(theta_te, h_te, u_te)
            cd_wake += _SEPARATED_DRAG_GAIN * (s_arr[-1] - x_sep) ** 2
        else:
            cd_wake += _squire_young(theta_te, h_te, u_te)

    # Excess momentum loss over a two-sided flat plate stands in for pressure drag.
    cd_flat = 4.0 * 0.036 * reynolds**-0.2
    cd_pressure = max(0.0, cd_wake - cd_flat)
    return cd_friction + cd_pressure


def solve_high_fidelity(
    geom: AirfoilGeometry,
    flow: FlowConditions | None = None,
    cfg: SolverConfig | None = None,
) -> AeroResult:
    """Panel-method lift and boundary-layer drag; honest non-convergence."""
    flow = flow or FlowConditions()
    cfg = cfg or SolverConfig()
    t0 = time.monotonic()
    cost = cfg.nominal_cost_ms

    ok, reason = is_valid(geom)
    if not ok:
        raise GeometryRejected(reason)

    xs, ys = _panel_nodes(geom, cfg.panel_count)
    n_lower = (xs.size - 1) // 2
    alpha = np.radians(flow.angle_of_attack_deg)
    try:
        gamma, v_t, s, theta_pan, _ = _linear_vortex_solution(xs, ys, alpha)
    except np.linalg.LinAlgError:
        return AeroResult(None, None, 1.0, False, cost)
    if not np.all(np.isfinite(gamma)):
        return AeroResult(None, None, 1.0, False, cost)

    cl = _circulation_cl(gamma, s)
    if time.monotonic() - t0 > cfg.timeout_s:
        return AeroResult(None, None, 1.0, False, cost)

    cd = _profile_drag(geom, v_t, s, theta_pan, flow.reynolds, n_lower, cfg.max_iterations)
    if cd is None or not np.isfinite(cd):
        return AeroResult(None, None, 1.0, False, cost)
    if cd <= 0.0:
        return AeroResult(None, None, 1.0, False, cost)

    cl = _prandtl_glauert(cl, flow.mach)
    return AeroResult(float(cl), float(max(cd, CD_FLOOR)), 1.0, True, cost)


def _camber_zero_lift_angle(x: np.ndarray, camber: np.ndarray) -> float:
    """Thin-airfoil zero-lift angle from the camber-line slope."""
    slope = np.gradient(camber, x)
    theta = np.arccos(np.clip(1.0 - 2.0 * x, -1.0, 1.0))
    return -np.trapezoid(slope * (np.cos(theta) - 1.0), theta) / np.pi


def plausibility_score(geom: AirfoilGeometry) -> float:
    """Confidence in [0, 1]; penalizes crossing, wavy thickness, wild camber.

    Shapes resembling catalogued airfoils score 1; the score decays on
    geometries outside the surrogate's trustworthy envelope.
    """
    gap = geom.y_upper - geom.y_lower
    crossing = float(np.trapezoid(np.maximum(0.0, -gap), geom.x))
    interior = (geom.x > 0.1) & (geom.x < 0.9)
    if interior.sum() >= 5:
        d1 = np.gradient(gap, geom.x)
        d2 = np.gradient(d1, geom.x)
        excess = np.maximum(0.0, np.abs(d2[interior]) - KAPPA_CURVATURE_ALLOWANCE)
        curvature = float(excess.mean())
    else:
        curvature = 0.0
    camber = 0.5 * np.abs(geom.y_upper + geom.y_lower)
    camber_excess = float(np.maximum(0.0, camber - KAPPA_CAMBER_ALLOWANCE).mean())
    # Gap shrinking faster than the normal taper towards the trailing edge
    # marks a shape about to self-intersect.
    aft = (geom.x > 0.1) & (geom.x < 0.95)
    if aft.any():
        pinch = float((gap[aft] / (1.0 - geom.x[aft] + 0.02)).min())
    else:
        pinch = KAPPA_PINCH_ALLOWANCE
    pinch_deficit = max(0.0, KAPPA_PINCH_ALLOWANCE - pinch)
    score = np.exp(
        -KAPPA_CROSSING_GAIN * crossing
        - KAPPA_CURVATURE_GAIN * curvature
        - KAPPA_CAMBER_GAIN * camber_excess
        - KAPPA_PINCH_GAIN * pinch_deficit
    )
    return float(np.clip(score, 0.0, 1.0))


def solve_low_fidelity(
    geom: AirfoilGeometry,
    flow: FlowConditions | None = None,
    cfg: SolverConfig | None = None,
) -> AeroResult:
    """Camber-line surrogate: always converges, grades itself with kappa."""
    flow = flow or FlowConditions()
    cfg = cfg or low_fidelity_config()
    arrays = (geom.x, geom.y_upper, geom.y_lower)
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise InvalidParams("geometry must be finite")

    camber = 0.5 * (geom.y_upper + geom.y_lower)
    alpha = np.radians(flow.angle_of_attack_deg)
    alpha_zl = _camber_zero_lift_angle(geom.x, camber)
    cl = 2.0 * np.pi * np.sin(alpha - alpha_zl)
    cl = _prandtl_glauert(cl, flow.mach)

    tc = max(max_thickness(geom), 0.0)
    cd = 2.0 * _flat_plate_cf(flow.reynolds) * (1.0 + 2.7 * tc + 60.0 * tc**2)
    cd = max(cd, CD_FLOOR)

    kappa = plausibility_score(geom)
    return AeroResult(float(cl), float(cd), kappa, True, cfg.nominal_cost_ms)


def get_solver(fidelity: str):
    if fidelity == "high":
        return solve_high_fidelity
    if fidelity == "low":
        return solve_low_fidelity
    raise InvalidParams(f"unknown fidelity {fidelity!r}")


@dataclass
class CountingSolver:
    """Wraps a solver function and accumulates call/cost bookkeeping."""

    fidelity: str
    flow: FlowConditions = field(default_factory=FlowConditions)
    cfg: SolverConfig | None = None
    calls: int = 0

    def __post_init__(self):
        if self.cfg is None:
            self.cfg = high_fidelity_config() if self.fidelity == "high" else low_fidelity_config()
        self._fn = get_solver(self.fidelity)

    def __call__(self, geom: AirfoilGeometry) -> AeroResult:
        self.calls += 1
        return self._fn(geom, self.flow, self.cfg)

    @property
    def nominal_cost_s(self) -> float:
        return self.calls * self.cfg.nominal_cost_ms / 1000.0
