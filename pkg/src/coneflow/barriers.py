"""Barrier constructions for curvature flow over mean convex cones.

Three families live here, plus the measurement tools that certify them:

* static power barriers w = k - r^(-alpha), whose curvature has a closed form
  (no finite differences; at r = 1e4 the power-law tail would drown in FD
  roundoff otherwise);
* the inverse-power normal-speed flow db/dt = -|F| * sqrt(1 + |Db|^2) with
  |F| = (r^2 + b^2)^(-(n-2)/4), realized twice: as a graphical upwind march
  (for sup/curvature certificates on a fixed grid) and as a Lagrangian
  particle flow of the profile curve (for residual checks of the evolution
  equations of g, h, H, |A|^2 and nu);
* max-type subsolutions B = max(U - m, b_scaled - delta/2) glued from an
  expanding soliton and a scaled flow barrier.

The log-heat-kernel machinery (psi = -(n/2) log t - |X|^2/(4t) and its
parabolic defect identity) and the half-space decay experiment sit at the
bottom since they share the same surface-derivative helpers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .analysis import DecayFit, decay_fit
from .cones import ConeProfile
from .errors import CertificationError, DomainError, ParameterError
from .expander import ExpanderProfile, evaluate_U, expander_time_derivative
from .flow import FlowRun, SolverConfig, evolve
from .geometry import (
    GridFunction,
    GridSpec,
    _d1_d2,
    _radial_derivatives,
    geometric_state,
    mean_curvature,
    radial_rhs,
)

__all__ = [
    "StaticBarrier",
    "static_barrier_w",
    "wk_difference_fit",
    "BarrierFlowPath",
    "LagrangianPath",
    "LemmaBarrierResult",
    "lemma_barrier_flow",
    "evolution_equation_residuals",
    "scale_barrier",
    "ScaledBarrier",
    "Subsolution",
    "assemble_subsolution",
    "HeatSupersolution",
    "PsiIdentityReport",
    "psi_identity_residual",
    "HalfSpaceReport",
    "half_space_experiment",
]


# ---------------------------------------------------------------------------
# static power barriers


def _power_barrier_parts(n: int, beta: float, alpha: float, r: np.ndarray):
    w = beta * r - r ** (-alpha)
    wr = beta + alpha * r ** (-alpha - 1.0)
    wrr = -alpha * (alpha + 1.0) * r ** (-alpha - 2.0)
    W = np.sqrt(1.0 + wr * wr)
    H = wrr / W ** 3 + (n - 1) * wr / (r * W)
    return w, wr, wrr, W, H


@dataclass(eq=False)
class StaticBarrier:
    """Sampled w = k - r^(-alpha) with exact derivatives and curvature."""

    cone: ConeProfile
    alpha: float
    r: np.ndarray
    w: np.ndarray
    w_r: np.ndarray
    H: np.ndarray
    r0: float | None

    @property
    def certified(self) -> bool:
        return self.r0 is not None

    def as_grid_function(self) -> GridFunction:
        return GridFunction(GridSpec(self.cone.n, self.r), self.w.copy())


def static_barrier_w(k: ConeProfile, alpha: float, r_lo: float = 1.0,
                     r_hi: float = 1e4, points: int = 400,
                     require_mean_convex: bool = True) -> StaticBarrier:
    """Static lower barrier k - r^(-alpha) on a log grid.

    Reports the smallest sampled radius r0 past which H[w] > 0 holds through
    r_hi, or r0 = None when the curvature stays nonpositive at the far end.
    A cone with H = 0 (a plane through the origin) keeps H[w] < 0 for large r
    whenever alpha > n-2, which is the documented failure mode; pass
    require_mean_convex=False to probe it.
    """
    if k.kind != "radial":
        raise ParameterError("static power barriers are built over radial cones")
    if alpha <= 0:
        raise ParameterError("alpha must be positive")
    if not (0 < r_lo < r_hi) or r_hi < 10 * r_lo:
        raise ParameterError("need 0 < r_lo and r_hi >= 10 r_lo")
    if require_mean_convex and k.scaled_mean_curvature() <= 0:
        raise ParameterError("cone is not strictly mean convex; pass "
                             "require_mean_convex=False to sample anyway")
    r = np.geomspace(r_lo, r_hi, points)
    w, wr, _, _, H = _power_barrier_parts(k.n, k.beta, alpha, r)
    pos = H > 0
    if not pos[-1]:
        r0 = None
    else:
        bad = np.nonzero(~pos)[0]
        r0 = float(r[bad[-1] + 1]) if bad.size else float(r[0])
    return StaticBarrier(k, alpha, r, w, wr, H, r0)


def wk_difference_fit(k: ConeProfile, alpha: float, r_lo: float = 1e3,
                      r_hi: float = 1e4, points: int = 160) -> dict:
    """Decay rate of the graph-speed difference between w and the cone.

    The graphical flow speed is W*H = u_rr/(1+u_r^2) + (n-1)u_r/r; for
    w = k - r^(-alpha) the difference from the cone's speed is exactly

        alpha * r^(-alpha-2) * [(n-1) - (alpha+1)/(1+w_r^2)],

    so the log-log fit should sit near exponent -(alpha+2).
    """
    if k.kind != "radial":
        raise ParameterError("radial cones only")
    r = np.geomspace(r_lo, r_hi, points)
    _, wr, wrr, _, _ = _power_barrier_parts(k.n, k.beta, alpha, r)
    diff = wrr / (1.0 + wr * wr) + (k.n - 1) * (wr - k.beta) / r
    fit = decay_fit(r, np.abs(diff))
    coef = alpha * ((k.n - 1) - (alpha + 1.0) / (1.0 + k.beta ** 2))
    return {"fit": fit, "predicted_exponent": -(alpha + 2.0),
            "predicted_coefficient": coef}


# ---------------------------------------------------------------------------
# the inverse-power speed flow, graphical form


def _speed(r: np.ndarray, b: np.ndarray, alpha: float, f_scale: float):
    return f_scale * (r * r + b * b) ** (-alpha)


def _upwind_rate(r: np.ndarray, b: np.ndarray, alpha: float, f_scale: float):
    """db/dt = -|F| sqrt(1+|Db|^2) with Godunov-type one-sided gradients."""
    F = _speed(r, b, alpha, f_scale)
    dr = np.diff(r)
    dm = np.empty_like(b)
    dp = np.empty_like(b)
    dm[1:] = (b[1:] - b[:-1]) / dr
    dp[:-1] = dm[1:]
    dm[0] = dp[0]
    dp[-1] = dm[-1]
    grad2 = np.maximum(dm, 0.0) ** 2 + np.minimum(dp, 0.0) ** 2
    return -F * np.sqrt(1.0 + grad2), F


@dataclass(eq=False)
class BarrierFlowPath:
    """Stored levels of the graphical barrier march."""

    spec: GridSpec
    alpha: float
    f_scale: float
    times: np.ndarray
    levels: np.ndarray

    def b(self, j: int) -> GridFunction:
        return GridFunction(self.spec, self.levels[j].copy())

    def state(self, j: int) -> dict:
        bf = self.b(j)
        return {"t": float(self.times[j]), "b": bf,
                "F": _speed(self.spec.nodes, bf.values, self.alpha, self.f_scale),
                "geometry": geometric_state(bf)}


@dataclass(eq=False)
class LagrangianPath:
    """Particle trajectories (R, Z)(s, t) of the profile curve."""

    n: int
    alpha: float
    f_scale: float
    s: np.ndarray
    times: np.ndarray
    R: np.ndarray
    Z: np.ndarray


def _lagrangian_velocity(s, R, Z, alpha, f_scale):
    Rs, _ = _d1_d2(s, R)
    Zs, _ = _d1_d2(s, Z)
    q = np.sqrt(Rs * Rs + Zs * Zs)
    Fmag = f_scale * (R * R + Z * Z) ** (-alpha)
    # velocity -F nu = |F| nu with nu = (Z_s, -R_s)/q the downward normal
    return Fmag * Zs / q, -Fmag * Rs / q


def _integrate_lagrangian(k: ConeProfile, s: np.ndarray, T: float, steps: int,
                          alpha: float, f_scale: float) -> LagrangianPath:
    nt = steps
    dt = T / nt
    R = np.empty((nt + 1, s.size))
    Z = np.empty((nt + 1, s.size))
    R[0] = s
    Z[0] = k.beta * s
    for j in range(nt):
        r0, z0 = R[j], Z[j]
        k1 = _lagrangian_velocity(s, r0, z0, alpha, f_scale)
        k2 = _lagrangian_velocity(s, r0 + 0.5 * dt * k1[0], z0 + 0.5 * dt * k1[1],
                                  alpha, f_scale)
        k3 = _lagrangian_velocity(s, r0 + 0.5 * dt * k2[0], z0 + 0.5 * dt * k2[1],
                                  alpha, f_scale)
        k4 = _lagrangian_velocity(s, r0 + dt * k3[0], z0 + dt * k3[1],
                                  alpha, f_scale)
        R[j + 1] = r0 + dt * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6.0
        Z[j + 1] = z0 + dt * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6.0
    times = dt * np.arange(nt + 1)
    return LagrangianPath(k.n, alpha, f_scale, s, times, R, Z)


@dataclass(eq=False)
class LemmaBarrierResult:
    """Graphical + Lagrangian realizations of the flow barrier, certified."""

    cone: ConeProfile
    alpha: float
    f_scale: float
    path: BarrierFlowPath
    lagrangian: LagrangianPath
    b_final: GridFunction
    k_values: np.ndarray
    r_cut: float
    certified: tuple | None
    min_gap: float | None
    H_min: float | None
    m1: float | None
    R1: float | None
    deficit_fit: DecayFit | None
    deficit_monotone: bool | None
    passed: bool | None

    def scaled(self, lam: float) -> "ScaledBarrier":
        if self.passed is not True:
            raise CertificationError("cannot scale an uncertified barrier",
                                     witness={"passed": self.passed})
        return ScaledBarrier.from_result(self, lam)


def lemma_barrier_flow(k: ConeProfile, r_inner: float = 10.0, T: float = 1.0,
                       r_outer: float | None = None, points: int = 600,
                       f_scale: float = 1.0, cfl: float = 0.4,
                       lagrangian_points: int = 240,
                       lagrangian_steps: int = 200) -> LemmaBarrierResult:
    """March the inverse-power speed flow from the cone for time T.

    The graphical form runs Heun steps with Godunov-type upwind gradients
    under a CFL cap.  The inner edge is an inflow boundary for the truncated
    domain, so a pollution collar of width 2 * max|F| * T is excluded from
    every certificate (b < k, H[b] > 0, deficit decay and monotonicity).
    The Lagrangian twin integrates the same motion particle-wise for the
    evolution-equation residual checks.
    """
    if k.kind != "radial":
        raise ParameterError("the flow barrier is built over radial cones")
    if k.n < 3:
        raise ParameterError("the inverse-power speed needs n >= 3")
    if k.scaled_mean_curvature() <= 0:
        raise ParameterError("cone must be strictly mean convex")
    if f_scale < 0:
        raise ParameterError("f_scale must be nonnegative")
    if r_inner <= 0 or T <= 0:
        raise ParameterError("need r_inner > 0 and T > 0")
    r_outer = 40.0 * r_inner if r_outer is None else r_outer
    if r_outer < 8 * r_inner:
        raise ParameterError("need r_outer >= 8 r_inner for a certifiable window")

    alpha = (k.n - 2) / 4.0
    r = np.geomspace(r_inner, r_outer, points)
    spec = GridSpec(k.n, r)
    kv = k.beta * r
    f0 = _speed(r_inner, k.beta * r_inner, alpha, f_scale)
    hmin = float(np.min(np.diff(r)))
    dt = min(cfl * hmin / max(f0 * 1.5, 1e-12), T / 64.0)
    nt = int(math.ceil(T / dt))
    dt = T / nt

    levels = np.empty((nt + 1, points))
    levels[0] = kv
    f_run_max = f0
    b = kv.copy()
    for j in range(nt):
        rate1, F1 = _upwind_rate(r, b, alpha, f_scale)
        b1 = b + dt * rate1
        rate2, F2 = _upwind_rate(r, b1, alpha, f_scale)
        b = b + 0.5 * dt * (rate1 + rate2)
        f_run_max = max(f_run_max, float(np.max(F1)), float(np.max(F2)))
        levels[j + 1] = b
    times = dt * np.arange(nt + 1)
    path = BarrierFlowPath(spec, alpha, f_scale, times, levels)
    b_final = GridFunction(spec, b.copy())

    s = np.geomspace(r_inner, r_outer, lagrangian_points)
    lagr = _integrate_lagrangian(k, s, T, lagrangian_steps, alpha, f_scale)

    r_cut = r_inner + 2.0 * f_run_max * T
    if f_scale == 0.0:
        return LemmaBarrierResult(k, alpha, f_scale, path, lagr, b_final, kv,
                                  r_cut, None, None, None, None, None, None,
                                  None, None)

    il = int(np.searchsorted(r, r_cut))
    iu = points - 3
    if iu - il < 16:
        raise CertificationError("certified window too small after the "
                                 "pollution cut", witness={"r_cut": r_cut})
    gap = kv - b
    H = mean_curvature(b_final).values
    min_gap = float(np.min(gap[il:iu]))
    H_min = float(np.min(H[il:iu]))
    mono = bool(np.all(np.diff(gap[il:iu]) <= 1e-12 * np.max(gap)))
    lo = r[il] * 1.3
    hi = r[iu - 1] / 1.05
    sel = (r >= lo) & (r <= hi)
    fit = decay_fit(r[sel], gap[sel])
    want = -(k.n - 2) / 2.0
    passed = (min_gap > 0 and H_min > 0 and mono
              and abs(fit.exponent - want) <= 0.2 * abs(want))
    return LemmaBarrierResult(k, alpha, f_scale, path, lagr, b_final, kv,
                              r_cut, (float(r[il]), float(r[iu - 1])), min_gap,
                              H_min, float(gap[il]), float(r[il]), fit, mono,
                              bool(passed))


# ---------------------------------------------------------------------------
# evolution-equation residuals along the Lagrangian path


def _profile_geometry(s, R, Z, n, alpha, f_scale):
    """Geometric record of one stored profile-curve level.

    The surface of revolution has one profile direction and n-1 rotational
    directions; the rotational block is isotropic, so a single representative
    component (g_th = R^2, h_th = R Z_s / q) with multiplicity n-1 carries it.
    Derivatives of the speed F = -f_scale * (R^2+Z^2)^(-alpha) are exact chain
    rules in the stored coordinates, not finite differences.
    """
    Rs, Rss = _d1_d2(s, R)
    Zs, Zss = _d1_d2(s, Z)
    q2 = Rs * Rs + Zs * Zs
    q = np.sqrt(q2)
    nu_r = Zs / q
    nu_z = -Rs / q
    g_ss = q2
    g_th = R * R
    h_ss = (Zss * Rs - Rss * Zs) / q
    h_th = R * Zs / q
    ks = h_ss / g_ss
    kt = h_th / g_th
    H = ks + (n - 1) * kt
    A2 = ks * ks + (n - 1) * kt * kt
    trA3 = ks ** 3 + (n - 1) * kt ** 3
    X2 = R * R + Z * Z
    F = -f_scale * X2 ** (-alpha)
    XdotXs = R * Rs + Z * Zs
    Xnu = (R * Zs - Z * Rs) / q
    F_s = -2.0 * alpha * F * XdotXs / X2
    Fcov_ss = (4.0 * alpha * (alpha + 1.0) * F * XdotXs ** 2 / X2 ** 2
               - 2.0 * alpha * F * (g_ss - Xnu * h_ss) / X2)
    Fcov_th = -2.0 * alpha * F * (g_th - Xnu * h_th) / X2
    lapF = Fcov_ss / g_ss + (n - 1) * Fcov_th / g_th
    return {"g_ss": g_ss, "g_th": g_th, "h_ss": h_ss, "h_th": h_th,
            "H": H, "A2": A2, "trA3": trA3, "F": F, "F_s": F_s,
            "Fcov_ss": Fcov_ss, "Fcov_th": Fcov_th, "lapF": lapF,
            "nu_r": nu_r, "nu_z": nu_z, "Rs": Rs, "Zs": Zs, "X2": X2}


def evolution_equation_residuals(path: LagrangianPath, t_stride: int = 10,
                                 s_margin: int = 3) -> dict:
    """Check the five evolution equations along the particle flow.

    Time derivatives at fixed particle label come from centered differences
    of the stored levels; the right-hand sides are evaluated analytically at
    the middle level.  Each residual is the sup over sampled interior nodes
    and times, normalized by the larger of the two sides' sup scales, so a
    value of 1e-2 means one percent of the equation's own size.
    """
    nt = path.times.size
    if nt < 3:
        raise ParameterError("need at least three stored levels")
    dt = float(path.times[1] - path.times[0])
    n, alpha, fs = path.n, path.alpha, path.f_scale
    sl = slice(s_margin, path.s.size - s_margin)

    keys = ["g_ss", "g_th", "h_ss", "h_th", "H", "A2", "nu_r", "nu_z"]
    num = {k: 0.0 for k in ["metric", "second_form", "mean_curvature",
                            "a_squared", "normal"]}
    den = dict(num)
    a_ratio = 0.0
    samples = 0
    js = range(1, nt - 1, max(1, t_stride))
    for j in js:
        gm = _profile_geometry(path.s, path.R[j - 1], path.Z[j - 1], n, alpha, fs)
        g0 = _profile_geometry(path.s, path.R[j], path.Z[j], n, alpha, fs)
        gp = _profile_geometry(path.s, path.R[j + 1], path.Z[j + 1], n, alpha, fs)
        lhs = {k: (gp[k] - gm[k]) / (2.0 * dt) for k in keys}
        rhs = {
            "g_ss": -2.0 * g0["F"] * g0["h_ss"],
            "g_th": -2.0 * g0["F"] * g0["h_th"],
            "h_ss": g0["Fcov_ss"] - g0["F"] * g0["h_ss"] ** 2 / g0["g_ss"],
            "h_th": g0["Fcov_th"] - g0["F"] * g0["h_th"] ** 2 / g0["g_th"],
            "H": g0["lapF"] + g0["F"] * g0["A2"],
            "A2": (2.0 * g0["F"] * g0["trA3"]
                   + 2.0 * (g0["h_ss"] * g0["Fcov_ss"] / g0["g_ss"] ** 2
                            + (n - 1) * g0["h_th"] * g0["Fcov_th"] / g0["g_th"] ** 2)),
            "nu_r": g0["F_s"] / g0["g_ss"] * g0["Rs"],
            "nu_z": g0["F_s"] / g0["g_ss"] * g0["Zs"],
        }
        groups = {"metric": ["g_ss", "g_th"], "second_form": ["h_ss", "h_th"],
                  "mean_curvature": ["H"], "a_squared": ["A2"],
                  "normal": ["nu_r", "nu_z"]}
        for gname, members in groups.items():
            for kq in members:
                err = np.max(np.abs(lhs[kq][sl] - rhs[kq][sl]))
                scale = max(np.max(np.abs(lhs[kq][sl])),
                            np.max(np.abs(rhs[kq][sl])))
                num[gname] = max(num[gname], float(err))
                den[gname] = max(den[gname], float(scale))
        if fs > 0:
            ratio = np.abs(lhs["A2"][sl]) * g0["X2"][sl] ** 1.5 / np.abs(g0["F"][sl])
            a_ratio = max(a_ratio, float(np.max(ratio)))
        samples += 1

    out = {k: (num[k] / den[k] if den[k] > 0 else 0.0) for k in num}
    out["a_evolution_ratio"] = a_ratio
    out["max"] = max(out[k] for k in
                     ["metric", "second_form", "mean_curvature", "a_squared",
                      "normal"])
    out["levels_sampled"] = samples
    return out


# ---------------------------------------------------------------------------
# scaling and the max-type subsolution


def scale_barrier(b: GridFunction, lam: float,
                  target: GridSpec | None = None) -> GridFunction:
    """Parabolic rescaling b_lam(x) = lam * b(x / lam).

    Without a target grid the result lives on the scaled nodes (exact, no
    interpolation).  With one, cubic interpolation is used and every target
    node must map back inside b's domain.
    """
    if lam <= 0:
        raise ParameterError("lam must be positive")
    spec = b.spec
    if spec.polar:
        raise ParameterError("scaling is implemented for radial grids")
    if target is None:
        return GridFunction(GridSpec(spec.n, lam * spec.nodes), lam * b.values)
    back = target.nodes / lam
    if back.min() < spec.nodes[0] - 1e-12 or back.max() > spec.nodes[-1] + 1e-12:
        raise DomainError("target grid maps outside the barrier's domain "
                          f"(needs [{spec.nodes[0]:.3g}, {spec.nodes[-1]:.3g}] "
                          f"after dividing by lam={lam:.3g})")
    return GridFunction(target, lam * CubicSpline(spec.nodes, b.values)(back))


@dataclass(eq=False)
class ScaledBarrier:
    """A certified flow barrier after parabolic rescaling by lam."""

    cone: ConeProfile
    lam: float
    m1: float
    R1: float
    grid: GridFunction
    certified: tuple
    H_min: float

    _spline: CubicSpline = None

    def __post_init__(self):
        if self._spline is None:
            object.__setattr__(self, "_spline",
                               CubicSpline(self.grid.spec.nodes, self.grid.values))

    @classmethod
    def from_result(cls, result: LemmaBarrierResult, lam: float) -> "ScaledBarrier":
        gf = scale_barrier(result.b_final, lam)
        lo, hi = result.certified
        return cls(result.cone, lam, result.m1, result.R1, gf,
                   (lam * lo, lam * hi), result.H_min / lam)

    @property
    def domain(self) -> tuple:
        return (float(self.grid.spec.nodes[0]), float(self.grid.spec.nodes[-1]))

    def evaluate(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        lo, hi = self.domain
        if np.any(r < lo - 1e-12) or np.any(r > hi + 1e-12):
            raise DomainError(f"barrier sampled outside [{lo:.3g}, {hi:.3g}]")
        return np.asarray(self._spline(r), dtype=float)


@dataclass(eq=False)
class Subsolution:
    """B(x, t) = max(U(x, t) - m, b_lam(x) - delta/2).

    The expander branch solves the flow exactly; the barrier branch is static
    with H >= 0 on its certified region, so each branch is a subsolution and
    the max inherits it.  Construction enforces the gluing inequalities
    lam * m1 > m and lam * R1 > R (deficit and hole scales of the barrier
    strictly dominate those of the perturbation).
    """

    profile: ExpanderProfile
    barrier: ScaledBarrier
    m: float
    delta: float
    R: float

    def __post_init__(self):
        if self.m <= 0 or self.delta <= 0 or self.R <= 0:
            raise ParameterError("m, delta, R must be positive")
        if self.barrier.lam * self.barrier.m1 <= self.m:
            raise ParameterError(
                f"need lam*m1 > m (got {self.barrier.lam * self.barrier.m1:.4g}"
                f" <= {self.m:.4g})")
        if self.barrier.lam * self.barrier.R1 <= self.R:
            raise ParameterError(
                f"need lam*R1 > R (got {self.barrier.lam * self.barrier.R1:.4g}"
                f" <= {self.R:.4g})")
        pc, bc = self.profile.cone(), self.barrier.cone
        if pc.n != bc.n or abs(pc.beta - bc.beta) > 1e-12:
            raise ParameterError("expander and barrier belong to different cones")

    def _expander_branch(self, r: np.ndarray, t: float) -> np.ndarray:
        # U extends continuously to t = 0 as the cone itself
        if t < 0:
            raise DomainError("subsolution defined for t >= 0")
        if t == 0:
            return self.barrier.cone.beta * r - self.m
        return evaluate_U(self.profile, r, t) - self.m

    def evaluate(self, r, t: float) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        B = self._expander_branch(r, t)
        lo, hi = self.barrier.domain
        inside = (r >= lo) & (r <= hi)
        if inside.any():
            B[inside] = np.maximum(B[inside],
                                   self.barrier.evaluate(r[inside]) - self.delta / 2)
        return B

    def on_grid(self, spec: GridSpec, t: float) -> GridFunction:
        return GridFunction(spec, self.evaluate(spec.nodes, t))

    def branch(self, r, t: float) -> np.ndarray:
        """0 where the expander branch is active, 1 where the barrier wins."""
        r = np.asarray(r, dtype=float)
        ub = self._expander_branch(r, t)
        out = np.zeros(r.shape, dtype=int)
        lo, hi = self.barrier.domain
        inside = (r >= lo) & (r <= hi)
        if inside.any():
            bb = self.barrier.evaluate(r[inside]) - self.delta / 2
            out[inside] = (bb > ub[inside]).astype(int)
        return out

    def residual_report(self, spec: GridSpec, times, crease_margin: int = 2) -> dict:
        """Branch-wise flow residuals away from the gluing crease.

        Expander branch: |d/dt U - W H[U - m]| on active nodes (pure
        discretization error of the sampled soliton).  Barrier branch: the
        static branch is a subsolution iff H >= 0, so the report carries the
        minimum sampled curvature on active certified nodes.
        """
        r = spec.nodes
        exp_res, bar_min_H = 0.0, np.inf
        clo, chi = self.barrier.certified
        for t in times:
            active = self.branch(r, t)
            ub = evaluate_U(self.profile, r, t) - self.m
            crease = np.zeros_like(active, dtype=bool)
            switches = np.nonzero(np.diff(active) != 0)[0]
            for i in switches:
                crease[max(0, i - crease_margin):i + crease_margin + 2] = True
            e_mask = (active == 0) & ~crease
            e_mask[:2] = e_mask[-2:] = False
            if e_mask.any():
                udot = expander_time_derivative(self.profile, r, t)
                rhs = radial_rhs(GridFunction(spec, ub)).values
                exp_res = max(exp_res, float(np.max(np.abs(udot - rhs)[e_mask])))
            b_mask = (active == 1) & ~crease & (r >= clo) & (r <= chi)
            if b_mask.any():
                bvals = self.barrier.evaluate(np.clip(r, *self.barrier.domain))
                Hb = mean_curvature(GridFunction(spec, bvals)).values
                bar_min_H = min(bar_min_H, float(np.min(Hb[b_mask])))
        return {"expander_residual": exp_res,
                "barrier_min_H": None if math.isinf(bar_min_H) else bar_min_H,
                "subsolution_ok": math.isinf(bar_min_H) or bar_min_H > -1e-10}


def assemble_subsolution(profile: ExpanderProfile, barrier: ScaledBarrier,
                         m: float, delta: float, R: float) -> Subsolution:
    """Glue the shifted expander and the scaled static barrier branch."""
    return Subsolution(profile, barrier, m, delta, R)


# ---------------------------------------------------------------------------
# log-heat-kernel identity and the half-space experiment


@dataclass(frozen=True)
class HeatSupersolution:
    """Majorant a * Phi + epsilon built from the ambient Gaussian kernel."""

    n: int
    a: float
    epsilon: float

    def phi(self, r, z, t: float) -> np.ndarray:
        if t <= 0:
            raise DomainError("kernel needs t > 0")
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        return (4.0 * np.pi * t) ** (-self.n / 2.0) * np.exp(-(r * r + z * z)
                                                             / (4.0 * t))

    def psi(self, r, z, t: float) -> np.ndarray:
        """log Phi + (n/2) log 4pi = -(n/2) log t - |X|^2/(4t), exactly."""
        if t <= 0:
            raise DomainError("kernel needs t > 0")
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        return -(self.n / 2.0) * np.log(t) - (r * r + z * z) / (4.0 * t)

    def majorant(self, u: GridFunction, t: float) -> np.ndarray:
        return self.a * self.phi(u.spec.nodes, u.values, t) + self.epsilon


@dataclass
class PsiIdentityReport:
    sup_residual: float
    per_time: np.ndarray
    times: np.ndarray
    spacing: float


def psi_identity_residual(run: FlowRun, outer_margin: int = 3) -> PsiIdentityReport:
    """Defect of the parabolic identity for psi = -(n/2) log t - |X|^2/(4t).

    Along the flow, d/dt psi - (surface Laplacian) psi - |grad psi|^2 equals
    <X, nu>^2 / (4 t^2) pointwise.  The time derivative at fixed surface
    point (normal parametrization) differs from the fixed-x derivative by the
    tangential drift of the graph parametrization,

        d/dt|_normal = d/dt|_x - (u_t u_r / W^2) * d/dr[psi on the graph],

    which is applied before comparing.  Outer nodes feel the one-sided FD
    stencil and boundary pinning, so ``outer_margin`` of them are excluded.
    """
    times = run.times
    if times.size < 3:
        raise ParameterError("need at least three snapshots")
    if times[0] <= 0:
        raise DomainError("identity checks need snapshots at t > 0")
    spec = run.snapshots[0].spec
    if spec.polar:
        raise ParameterError("implemented for radial runs")
    n = spec.n
    r = spec.nodes

    def psi_values(u, t):
        return -(n / 2.0) * np.log(t) - (r * r + u * u) / (4.0 * t)

    sups = []
    for j in range(1, times.size - 1):
        tm, t0, tp = times[j - 1], times[j], times[j + 1]
        if abs((tp - t0) - (t0 - tm)) > 1e-9 * (tp - tm):
            raise ParameterError("uniform snapshot cadence required")
        um = run.snapshots[j - 1].values
        u0 = run.snapshots[j].values
        up = run.snapshots[j + 1].values
        f0 = psi_values(u0, t0)
        dpsi_graph = (psi_values(up, tp) - psi_values(um, tm)) / (tp - tm)
        udot = (up - um) / (tp - tm)
        p, q = _radial_derivatives(spec, u0)
        W2 = 1.0 + p * p
        fr, frr = _radial_derivatives(spec, f0)
        with np.errstate(divide="ignore", invalid="ignore"):
            fr_over_r = np.where(r > 0, fr / np.where(r > 0, r, 1.0), frr)
        lap = (frr - (p * q / W2) * fr) / W2 + (n - 1) * fr_over_r / W2
        grad2 = fr * fr / W2
        dpsi_normal = dpsi_graph - udot * p * fr / W2
        Xnu = (r * p - u0) / np.sqrt(W2)
        resid = np.abs(dpsi_normal - lap - grad2 - Xnu ** 2 / (4.0 * t0 * t0))
        sups.append(float(np.max(resid[:-outer_margin])))
    per_time = np.asarray(sups)
    return PsiIdentityReport(float(np.max(per_time)), per_time,
                             times[1:-1], spec.max_spacing())


@dataclass
class HalfSpaceReport:
    supersolution: HeatSupersolution
    times: np.ndarray
    sup_trace: np.ndarray
    margins: np.ndarray
    margin_times: np.ndarray
    ordering_ok: bool
    first_below: float | None
    threshold: float
    passed: bool
    run: FlowRun


def half_space_experiment(bump_height: float = 1.0, bump_radius: float = 5.0,
                          epsilon: float = 0.025, t0: float = 0.1,
                          horizon: float = 50.0, threshold: float = 0.05,
                          n: int = 2, spec: GridSpec | None = None,
                          config: SolverConfig | None = None) -> HalfSpaceReport:
    """Flow a compact bump over the flat cone k = 0 and majorize it.

    The coefficient a is fixed at the first snapshot past t0 by
    a = sup (u - epsilon)_+ / Phi(X, t0); afterwards a*Phi + epsilon must stay
    above u at every snapshot, while sup u drains below the threshold.
    """
    if spec is None:
        spec = GridSpec.uniform(n, 0.0, 75.0, 1501)
    if config is None:
        config = SolverConfig(dt_init=1e-3, dt_max=0.1, snapshot_dt=0.1,
                              boundary="pin-to-initial")
    r = spec.nodes
    u0 = GridFunction(spec, bump_height
                      * _half_space_bump(r / bump_radius))
    if u0.values[-1] > epsilon:
        raise ParameterError("initial bump must sit below epsilon at the far edge")
    flat = ConeProfile.radial(n, 0.0)
    run = evolve(u0, horizon, config, cone=flat)
    times = run.times
    i0 = int(np.argmin(np.abs(times - t0)))
    if abs(times[i0] - t0) > config.snapshot_dt:
        raise ParameterError("no snapshot near t0; shrink snapshot_dt")
    t_fix = float(times[i0])
    u_fix = run.snapshots[i0].values
    hs_probe = HeatSupersolution(n, 1.0, epsilon)
    phi_fix = hs_probe.phi(r, u_fix, t_fix)
    over = u_fix > epsilon
    a = float(np.max((u_fix[over] - epsilon) / phi_fix[over])) if over.any() else 0.0
    hs = HeatSupersolution(n, a, epsilon)

    margins = []
    for j in range(i0, times.size):
        t = float(times[j])
        uj = run.snapshots[j].values
        margins.append(float(np.min(hs.majorant(run.snapshots[j], t) - uj)))
    margins = np.asarray(margins)
    sup_trace = np.asarray([float(np.max(s.values)) for s in run.snapshots])
    below = np.nonzero(sup_trace <= threshold)[0]
    first_below = float(times[below[0]]) if below.size else None
    ordering_ok = bool(np.all(margins >= -1e-9))
    passed = ordering_ok and first_below is not None
    return HalfSpaceReport(hs, times, sup_trace, margins, times[i0:],
                           ordering_ok, first_below, threshold, passed, run)


def _half_space_bump(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.cos(np.pi * s[inside] / 2.0) ** 2
    return out
