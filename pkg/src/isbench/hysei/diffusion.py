"""Radial pressure diffusion with irreversible permeability enhancement.

Finite-volume discretization on nodes ``r_i = r_well + i * dr``. Inter-node
transmissibility uses the exact steady radial geometry factor
``2 pi h / ln(r_{i+1} / r_i)`` and the harmonic mean of nodal
permeabilities. Pressure is advanced with backward Euler (permeability
lagged one step); the stimulation factor ``u`` is updated explicitly
afterwards and clamped to ``[u, u_t]`` so it can never decrease.
Injection enters at the innermost node; the outer boundary is closed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ..hydraulics import HydraulicSeries, InjectionPlan


class StabilityError(ValueError):
    """Time step too coarse for the explicit stimulation-factor update."""


@dataclass(frozen=True)
class HydraulicParams:
    """Reservoir and stimulation parameters (SI units, pressures in Pa).

    ``h_width`` smooths the pressure-threshold Heaviside, ``u_width`` the
    saturation Heaviside (dimensionless) and ``rate_width`` (Pa/s) the
    pressure-rate gate. A zero width gives a sharp step.
    """

    kappa0: float = 1e-13
    S: float = 1e-9
    C_u: float = 1e-4
    u_t: float = 50.0
    p_t: float = 5e6
    rho: float = 1000.0
    mu: float = 3e-4
    h_width: float = 1e5
    u_width: float = 0.01
    rate_width: float = 10.0

    def __post_init__(self):
        for name in ("kappa0", "S", "rho", "mu", "u_t"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.C_u < 0 or self.p_t < 0:
            raise ValueError("C_u and p_t must be nonnegative")
        if min(self.h_width, self.u_width, self.rate_width) < 0:
            raise ValueError("Heaviside widths must be nonnegative")

    @property
    def diffusivity(self) -> float:
        return self.kappa0 / (self.mu * self.S)


@dataclass(frozen=True)
class RadialMesh:
    radius: float = 1200.0
    n_nodes: int = 3000
    dt: float = 60.0
    r_well: float = 0.1
    thickness: float = 10.0

    def __post_init__(self):
        if self.n_nodes < 3 or not self.radius > self.r_well > 0 or self.dt <= 0 or self.thickness <= 0:
            raise ValueError("invalid radial mesh")

    @property
    def dr(self) -> float:
        return (self.radius - self.r_well) / (self.n_nodes - 1)

    @property
    def r(self) -> np.ndarray:
        return self.r_well + self.dr * np.arange(self.n_nodes)

    @property
    def volumes(self) -> np.ndarray:
        r = self.r
        faces = np.concatenate([[self.r_well], 0.5 * (r[1:] + r[:-1]), [self.radius]])
        return math.pi * self.thickness * (faces[1:] ** 2 - faces[:-1] ** 2)

    @property
    def geometry_factors(self) -> np.ndarray:
        r = self.r
        return 2 * math.pi * self.thickness / np.log(r[1:] / r[:-1])

    def refined(self, factor: int) -> RadialMesh:
        """Mesh with ``factor`` times finer spacing; original nodes are kept."""
        return RadialMesh(self.radius, (self.n_nodes - 1) * factor + 1, self.dt, self.r_well, self.thickness)


class FlowSchedule:
    """Injection rate history: observed samples up to ``switch``, a plan after."""

    def __init__(self, observed: HydraulicSeries | None = None, plan: InjectionPlan | None = None,
                 switch: float | None = None):
        if observed is None and plan is None:
            raise ValueError("a flow schedule needs observed data or a plan")
        if switch is None:
            if observed is not None and plan is not None:
                raise ValueError("switch time required when combining observed data and a plan")
            switch = math.inf if plan is None else -math.inf
        self.observed = observed
        self.plan = plan
        self.switch = float(switch)

    @classmethod
    def from_plan(cls, plan: InjectionPlan) -> FlowSchedule:
        return cls(None, plan, -math.inf)

    def cumulative_volume(self, t) -> np.ndarray:
        """Injected volume (m^3) since the start of the observed series or plan."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        if self.observed is not None and len(self.observed):
            out += self.observed.cumulative_volume(np.minimum(t, self.switch))
        if self.plan is not None:
            t0 = max(self.switch, float(self.plan.times[0]))
            out += np.where(t > t0, self.plan.cumulative_volume(np.maximum(t, t0))
                            - self.plan.cumulative_volume(t0), 0.0)
        return out

    def step_rates(self, t_start: float, n_steps: int, dt: float) -> np.ndarray:
        """Mean volumetric rate (m^3/s) over each time step."""
        edges = t_start + dt * np.arange(n_steps + 1)
        return np.diff(self.cumulative_volume(edges)) / dt


@numba.njit(cache=True, inline="always")
def _heaviside(x, width):
    if width == 0.0:
        return 1.0 if x > 0.0 else 0.0
    return 0.5 * (1.0 + math.tanh(x / width))


@numba.njit(cache=True)
def _march(p, u, vol_storage, geo, kappa0, mu, q, dt, stimulate, C_u, u_t, p_t,
           h_width, u_width, rate_width, record_every, p_well, rec_p, rec_max, rec_u):
    n = p.shape[0]
    n_steps = q.shape[0]
    kap = np.empty(n)
    trans = np.empty(n - 1)
    lower = np.empty(n)
    diag = np.empty(n)
    upper = np.empty(n)
    rhs = np.empty(n)
    cprime = np.empty(n)
    dprime = np.empty(n)
    p_old = np.empty(n)
    runmax = p.copy()
    p_well[0] = p[0]
    rec = 0
    if record_every > 0:
        for i in range(n):
            rec_p[0, i] = p[i]
            rec_max[0, i] = runmax[i]
            rec_u[0, i] = u[i]
        rec = 1
    for step in range(n_steps):
        for i in range(n):
            kap[i] = kappa0 * (u[i] + 1.0)
            p_old[i] = p[i]
        for i in range(n - 1):
            kf = 2.0 * kap[i] * kap[i + 1] / (kap[i] + kap[i + 1])
            trans[i] = kf / mu * geo[i]
        for i in range(n):
            c = vol_storage[i] / dt
            tl = trans[i - 1] if i > 0 else 0.0
            tr = trans[i] if i < n - 1 else 0.0
            lower[i] = -tl
            upper[i] = -tr
            diag[i] = c + tl + tr
            rhs[i] = c * p[i]
        rhs[0] += q[step]
        # Thomas algorithm
        cprime[0] = upper[0] / diag[0]
        dprime[0] = rhs[0] / diag[0]
        for i in range(1, n):
            m = diag[i] - lower[i] * cprime[i - 1]
            cprime[i] = upper[i] / m
            dprime[i] = (rhs[i] - lower[i] * dprime[i - 1]) / m
        p[n - 1] = dprime[n - 1]
        for i in range(n - 2, -1, -1):
            p[i] = dprime[i] - cprime[i] * p[i + 1]
        if stimulate:
            for i in range(n):
                if u[i] >= u_t:
                    continue
                xp = p[i] - p_t
                if h_width > 0.0 and xp < -20.0 * h_width:
                    continue
                hp = _heaviside(xp, h_width)
                hr = _heaviside((p[i] - p_old[i]) / dt, rate_width)
                hu = _heaviside(u_t - u[i], u_width)
                du = dt * C_u * hr * hu * hp
                if du > 0.0:
                    u[i] = min(u[i] + du, u_t)
        for i in range(n):
            if p[i] > runmax[i]:
                runmax[i] = p[i]
        p_well[step + 1] = p[0]
        if record_every > 0 and (step + 1) % record_every == 0:
            for i in range(n):
                rec_p[rec, i] = p[i]
                rec_max[rec, i] = runmax[i]
                rec_u[rec, i] = u[i]
            rec += 1
    if record_every > 0 and n_steps % record_every != 0:
        for i in range(n):
            rec_p[rec, i] = p[i]
            rec_max[rec, i] = runmax[i]
            rec_u[rec, i] = u[i]
    return runmax


@dataclass
class DiffusionResult:
    """Histories from one forward run.

    ``times``/``p_well`` hold every time step. Recorded snapshots
    (``record_times``, ``p_rec``, ``pmax_rec``, ``u_rec``) are kept every
    ``record_every`` steps and at the final step; ``pmax_rec`` is the running maximum of pressure
    at each node up to the snapshot.
    """

    mesh: RadialMesh
    params: HydraulicParams
    times: np.ndarray
    p_well: np.ndarray
    record_times: np.ndarray
    p_rec: np.ndarray
    pmax_rec: np.ndarray
    u_rec: np.ndarray
    p_final: np.ndarray
    u_final: np.ndarray
    p_initial: np.ndarray
    injected_volume: float

    @property
    def stored_volume(self) -> float:
        """Fluid volume accounted for by storage, sum of S V (p - p0)."""
        return float(np.sum(self.params.S * self.mesh.volumes * (self.p_final - self.p_initial)))

    @property
    def kappa_final(self) -> np.ndarray:
        return self.params.kappa0 * (self.u_final + 1.0)


def check_stability(params: HydraulicParams, mesh: RadialMesh) -> None:
    """The explicit ``u`` update must not cross the full range in one step."""
    if params.C_u * mesh.dt > params.u_t:
        raise StabilityError(
            f"C_u * dt = {params.C_u * mesh.dt:.3g} exceeds u_t = {params.u_t:.3g}; "
            f"reduce dt below {params.u_t / params.C_u:.3g} s")


def solve_diffusion(params: HydraulicParams, mesh: RadialMesh, schedule: FlowSchedule,
                    t_start: float, t_end: float, stimulate: bool = True,
                    p_init: np.ndarray | float = 0.0, u_init: np.ndarray | None = None,
                    record_every: int = 0) -> DiffusionResult:
    """Run the solver from ``t_start`` to ``t_end`` (rounded up to whole steps).

    Pressures are gauge overpressures in Pa. With ``stimulate=False`` the
    permeability stays at ``kappa0`` (and any ``u_init``).

    Raises:
        StabilityError: if the stimulation update is too coarse for ``dt``.
        RuntimeError: if the solution becomes non-finite.
    """
    if stimulate:
        check_stability(params, mesh)
    n = mesh.n_nodes
    n_steps = int(math.ceil((t_end - t_start) / mesh.dt - 1e-9))
    n_steps = max(n_steps, 0)
    q = schedule.step_rates(t_start, n_steps, mesh.dt)
    p = np.array(np.broadcast_to(np.asarray(p_init, dtype=float), (n,)), dtype=float)
    p0 = p.copy()
    u = np.zeros(n) if u_init is None else np.array(u_init, dtype=float)
    if np.any(u < 0) or np.any(u > params.u_t):
        raise ValueError("initial stimulation factor outside [0, u_t]")
    n_rec = n_steps // record_every + 1 + (n_steps % record_every != 0) if record_every > 0 else 1
    rec_shape = (n_rec, n) if record_every > 0 else (1, 1)
    rec_p = np.zeros(rec_shape)
    rec_max = np.zeros(rec_shape)
    rec_u = np.zeros(rec_shape)
    p_well = np.empty(n_steps + 1)
    _march(p, u, params.S * mesh.volumes, mesh.geometry_factors, params.kappa0, params.mu, q,
           mesh.dt, bool(stimulate), params.C_u, params.u_t, params.p_t, params.h_width,
           params.u_width, params.rate_width, int(record_every), p_well, rec_p, rec_max, rec_u)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(p_well))):
        raise RuntimeError("diffusion solver produced non-finite pressure")
    times = t_start + mesh.dt * np.arange(n_steps + 1)
    if record_every > 0:
        rec_times = times[::record_every]
        if n_steps % record_every:
            rec_times = np.append(rec_times, times[-1])
    else:
        rec_times = np.empty(0)
    if record_every <= 0:
        rec_p = rec_max = rec_u = np.empty((0, n))
    return DiffusionResult(mesh, params, times, p_well, rec_times, rec_p, rec_max, rec_u,
                           p, u, p0, float(np.sum(q) * mesh.dt))
