"""Desk-scale ground-truth generator: a scripted quasi-static biped.

The base follows a smooth scripted trajectory while stance feet produce
contact wrenches from a penalty model.  Tangential force, center of
pressure and yaw torque demands are scripted per step; wherever a demand
exceeds the friction cone, the CoP box or the rotational friction bound of
the local surface, the emitted wrench saturates on the constraint surface
and the foot slides or rotates accordingly.  Everything is deterministic
per seed.

Terrain is a list of surface segments tiled consecutively along +x
starting at x = 0; a raised low-friction patch is just a segment with a
nonzero height and a smaller friction coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .accel import maybe_jit
from .features import SampleHistory, WrenchSample
from .quatmath import rpy_to_quat

FZ_EPS = 1e-6

#: Single/double support periods of the named gaits, seconds.
GAIT_PERIODS = {"fast": (0.5, 0.05), "slow": (1.0, 0.5)}

LEFT, RIGHT = 0, 1


class ScenarioError(ValueError):
    """Scenario cannot be generated as configured."""


@dataclass(frozen=True)
class SurfaceSpec:
    """One terrain segment.

    ``extent`` is the along-track length; segments tile consecutively from
    x = 0 in list order.  ``mu_xy`` is the translational friction
    coefficient, ``mu_z`` the rotational one (meters), ``cop_x``/``cop_y``
    the support-polygon half-extents (meters).
    """

    extent: float
    height: float = 0.0
    mu_xy: float = 0.8
    mu_z: float = 0.1
    cop_x: float = 0.10
    cop_y: float = 0.06

    def __post_init__(self):
        if not self.extent > 0:
            raise ValueError("surface extent must be positive")
        for name in ("mu_xy", "mu_z", "cop_x", "cop_y"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class GaitScript:
    """Scripted gait parameters.

    ``gait_schedule`` optionally switches between the named gaits over
    time: a tuple of ``(time, name)`` pairs with names from
    ``GAIT_PERIODS``; when present it overrides the fixed support periods
    step by step.
    """

    single_support: float = 0.5
    double_support: float = 0.05
    step_length: float = 0.12
    step_height: float = 0.05
    duration: float = 60.0
    mode: str = "walk"
    gait_schedule: tuple = ()

    def __post_init__(self):
        for name in ("single_support", "double_support", "duration"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.mode not in ("walk", "walk_in_place"):
            raise ValueError("mode must be 'walk' or 'walk_in_place'")
        for t, name in self.gait_schedule:
            if name not in GAIT_PERIODS:
                raise ValueError(f"unknown gait {name!r} in schedule")

    def periods_at(self, t: float):
        """(single_support, double_support) active at time ``t``."""
        ss, ds = self.single_support, self.double_support
        for t_switch, name in self.gait_schedule:
            if t >= t_switch:
                ss, ds = GAIT_PERIODS[name]
        return ss, ds


def fast_gait(duration=60.0, mode="walk", **kw) -> GaitScript:
    ss, ds = GAIT_PERIODS["fast"]
    return GaitScript(single_support=ss, double_support=ds, duration=duration,
                      mode=mode, **kw)


def slow_gait(duration=60.0, mode="walk", **kw) -> GaitScript:
    ss, ds = GAIT_PERIODS["slow"]
    return GaitScript(single_support=ss, double_support=ds, duration=duration,
                      mode=mode, **kw)


def mixed_gait(duration=60.0, mode="walk", period=8.0, **kw) -> GaitScript:
    """Gait that alternates between fast and slow every ``period`` seconds."""
    names = ("fast", "slow")
    schedule = tuple(
        (k * period, names[k % 2]) for k in range(int(np.ceil(duration / period)))
    )
    ss, ds = GAIT_PERIODS["fast"]
    return GaitScript(single_support=ss, double_support=ds, duration=duration,
                      mode=mode, gait_schedule=schedule, **kw)


@dataclass(frozen=True)
class PhysicsConfig:
    """Plant and excitation parameters of the scripted biped.

    The default mass puts the per-foot double-support load (~weight/2)
    between the 200 N and 400 N contact thresholds, the regime the
    threshold studies assume.
    """

    mass: float = 62.0
    gravity: float = 9.81
    dt: float = 0.001
    contact_kp: float = 1e5  # N/m
    contact_kd: float = 300.0  # N s/m
    slip_damping: float = 150.0  # N s/m: tangential excess -> slide speed
    slip_vmax: float = 0.03  # m/s, saturation of the slide speed
    yaw_damping: float = 80.0  # N m s/rad
    tip_damping: float = 30.0  # N m s/rad
    tip_recovery: float = 0.05  # s
    swing_decay: float = 0.08  # s, foot re-levelling during swing
    base_height: float = 0.6
    stance_width: float = 0.1
    lead_time: float = 0.5  # standing lead-in/out
    # per-stance excitation, as fractions of the expected normal force.
    # Demands hold stance-long plateaus whose sign alternates step to step
    # (the rectified features fold the sign away), so loaded windows form a
    # tight cluster.  The plateaus stay inside the nominal friction cone;
    # slip on the low-friction patches comes from the mid-stance
    # unweighting dips shrinking the cone while the demand persists.
    tang_x_util: tuple = (0.24, 0.30)
    tang_y_util: tuple = (0.08, 0.12)
    # every stance carries two unweighting dips: a shallow one whose load
    # stays above the 200 N regime (its slips are visible to high-threshold
    # gating) and a deep one dropping the foot below it
    dip_shallow: tuple = (0.40, 0.48)
    dip_depth: tuple = (0.72, 0.80)
    cop_x_off: tuple = (0.044, 0.064)  # m, heel-to-toe sweep endpoint
    cop_y_off: tuple = (0.024, 0.034)  # m
    yaw_torque_util: tuple = (0.36, 0.48)  # fraction of mu_z_ref * expected load
    yaw_mu_ref: float = 0.1  # m, nominal rotational friction for scaling
    inplace_scale: float = 0.85  # tangential demand scale for walk_in_place
    inplace_cop_gain: float = 1.35
    inplace_shuffle: float = 0.05  # m, forward-back swing travel in place
    # stick-slip chatter: the wrench sensor sees a high-frequency force
    # oscillation while the foot slides
    chatter_frac: float = 0.5
    chatter_hz: float = 90.0
    judder_frac: float = 0.6  # slide-speed oscillation (stick-slip motion)
    judder_hz: float = 37.0
    # touchdown settling: a lateral demand burst while the foot is barely
    # loaded makes it slide a few millimeters into place at every landing.
    # Zero disables settling (the no-slip sanity configuration).
    settle_util: tuple = (3.0, 4.0)
    # lightly loaded feet rock: band-limited roll/pitch/yaw rates, faded
    # out as the load approaches rock_load. Zero rate disables rocking.
    rock_load: float = 200.0  # N
    rock_rate: float = 1.0  # rad/s
    rock_hz: float = 8.0
    # rolling contact: while lightly loaded the effective contact point
    # migrates along the sole (heel-strike to flat to toe-off), so the
    # kinematic position reference creeps while the CoP rides its bound
    migrate_load: float = 200.0  # N
    migrate_rate: float = 0.05  # m/s at zero load
    settle_twist: float = 0.7  # yaw-utilization fraction of the settle burst
    # demands are scripted at full-load magnitude regardless of the load
    # share, then capped at these fractions of the nominal friction and
    # rotation cones; on nominal ground the cap guarantees stick, on the
    # low-friction patches the capped demand still overpowers the surface
    tang_demand_cap: float = 0.92 * 0.8  # fraction of F_z
    yaw_demand_cap: float = 0.9 * 0.1  # m, fraction of F_z as torque arm
    # fast band-limited modulation riding on every demand channel: each
    # window spans about one period, so the texture is stationary
    wiggle_hz: float = 45.0
    wiggle_util: float = 0.025  # tangential utilization units
    wiggle_yaw: float = 0.04
    wiggle_cop: float = 0.006  # m


@dataclass
class SlipEpisode:
    """One annotated constraint-violation run of a stance foot."""

    foot: int
    kind: str  # "slip" | "cop" | "yaw"
    dof: str  # dominant DoF name
    t_start: float
    t_end: float


@dataclass
class GroundTruthLog:
    """True trajectories, wrenches, foot IMU quantities and annotations."""

    dt: float
    time: np.ndarray
    base_pos: np.ndarray  # (n, 3)
    base_quat: np.ndarray  # (n, 4)
    base_vel: np.ndarray  # (n, 3)
    base_angvel: np.ndarray  # (n, 3)
    base_accel_w: np.ndarray  # (n, 3)
    foot_pos: np.ndarray  # (n, 2, 3)
    foot_quat: np.ndarray  # (n, 2, 4)
    foot_vel: np.ndarray  # (n, 2, 3)
    foot_angvel: np.ndarray  # (n, 2, 3)
    foot_accel_w: np.ndarray  # (n, 2, 3)
    force: np.ndarray  # (n, 2, 3)
    torque: np.ndarray  # (n, 2, 3)
    violated: np.ndarray  # (n, 2, 3) bool: friction / cop / rotation
    stance: np.ndarray  # (n, 2) bool
    episodes: list = field(default_factory=list)

    def __len__(self):
        return self.time.shape[0]

    def true_history(self, foot: int) -> SampleHistory:
        """True wrench plus world-frame foot motion packed as a history.

        The IMU channels hold world-frame acceleration and angular rate;
        sensor corruption maps them through the foot frame.
        """
        return SampleHistory(
            forces=self.force[:, foot],
            torques=self.torque[:, foot],
            accels=self.foot_accel_w[:, foot],
            gyros=self.foot_angvel[:, foot],
            sample_period=self.dt,
        )


def flat_terrain(length: float = 40.0, **kw) -> list:
    return [SurfaceSpec(extent=length, **kw)]


def rough_terrain(
    n_patches: int = 16,
    lead: float = 1.2,
    patch_extent: float = 0.4,
    gap: float = 0.8,
    patch_height: float = 0.03,
    patch_mu: float = 0.4,
    tail: float = 4.0,
) -> list:
    """Flat ground interleaved with raised low-friction patches."""
    segs = [SurfaceSpec(extent=lead)]
    for _ in range(n_patches):
        segs.append(
            SurfaceSpec(extent=patch_extent, height=patch_height, mu_xy=patch_mu,
                        mu_z=0.05, cop_x=0.05, cop_y=0.035)
        )
        segs.append(SurfaceSpec(extent=gap))
    segs.append(SurfaceSpec(extent=tail))
    return segs


def patch_terrain(extent: float = 2.0) -> list:
    """A single rough patch large enough to stand on (walk-in-place tests)."""
    return [
        SurfaceSpec(extent=extent, height=0.03, mu_xy=0.4, mu_z=0.05,
                    cop_x=0.05, cop_y=0.035)
    ]


def check_constraints(wrench: WrenchSample, surface: SurfaceSpec):
    """Whether a wrench satisfies the friction, CoP and rotation constraints.

    Returns ``(translational_ok, cop_ok, rotational_ok)``.  With a normal
    force below ``FZ_EPS`` the contact carries nothing and all three
    report violated; a negative normal force is an error.
    """
    force = np.asarray(wrench.force, dtype=np.float64)
    torque = np.asarray(wrench.torque, dtype=np.float64)
    fz = force[2]
    if fz < 0:
        raise ValueError("normal force must be nonnegative")
    if fz < FZ_EPS:
        return (False, False, False)
    trans = np.hypot(force[0], force[1]) <= surface.mu_xy * fz
    cop = (abs(torque[1] / fz) <= surface.cop_x) and (abs(torque[0] / fz) <= surface.cop_y)
    rot = abs(torque[2]) <= surface.mu_z * fz
    return (bool(trans), bool(cop), bool(rot))


def contact_wrench(
    penetration: float,
    penetration_rate: float,
    tangential_demand,
    cop_demand,
    yaw_torque_demand: float,
    surface: SurfaceSpec,
    physics: PhysicsConfig = PhysicsConfig(),
) -> WrenchSample:
    """Penalty contact wrench with demands clamped to the constraint surfaces.

    Normal force is ``kp * penetration + kd * penetration_rate`` clamped at
    zero; the tangential demand saturates on the friction cone, the CoP
    demand on the support polygon and the yaw torque on the rotational
    friction bound.
    """
    fz = max(physics.contact_kp * penetration + physics.contact_kd * penetration_rate, 0.0)
    if fz < FZ_EPS:
        return WrenchSample(force=np.zeros(3), torque=np.zeros(3))
    dx, dy = float(tangential_demand[0]), float(tangential_demand[1])
    dn = np.hypot(dx, dy)
    lim = surface.mu_xy * fz
    if dn > lim and dn > 0.0:
        dx *= lim / dn
        dy *= lim / dn
    cx = min(max(float(cop_demand[0]), -surface.cop_x), surface.cop_x)
    cy = min(max(float(cop_demand[1]), -surface.cop_y), surface.cop_y)
    lim_z = surface.mu_z * fz
    tz = min(max(float(yaw_torque_demand), -lim_z), lim_z)
    return WrenchSample(
        force=np.array([dx, dy, fz]),
        torque=np.array([fz * cy, -fz * cx, tz]),
    )


# ---------------------------------------------------------------------------
# scenario assembly


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _cdiff(x, dt):
    """Central difference along axis 0, one-sided at the ends."""
    out = np.empty_like(x)
    out[1:-1] = (x[2:] - x[:-2]) / (2.0 * dt)
    out[0] = (x[1] - x[0]) / dt
    out[-1] = (x[-1] - x[-2]) / dt
    return out


def _wiggle(rng, time: np.ndarray, hz: float, amp: float) -> np.ndarray:
    """Band-limited modulation: uniform knots at ``hz`` linearly interpolated."""
    t_end = time[-1] if time.shape[0] else 0.0
    knots = np.arange(0.0, t_end + 2.0 / hz, 1.0 / hz)
    vals = rng.uniform(-amp, amp, knots.shape[0])
    return np.interp(time, knots, vals)


class _Terrain:
    def __init__(self, segments):
        if not segments:
            raise ScenarioError("terrain must contain at least one surface")
        self.segments = list(segments)
        self.edges = np.concatenate([[0.0], np.cumsum([s.extent for s in segments])])

    def at(self, x: float) -> SurfaceSpec:
        if x < 0.0 or x >= self.edges[-1]:
            raise ScenarioError(
                f"gait infeasible: step onto no surface at x = {x:.3f} m"
            )
        idx = int(np.searchsorted(self.edges, x, side="right")) - 1
        return self.segments[idx]


def run_scenario(gait: GaitScript, terrain, physics: PhysicsConfig | None = None,
                 seed: int = 0) -> GroundTruthLog:
    """Generate one ground-truth walking log at 1/dt Hz."""
    phys = physics or PhysicsConfig()
    terr = _Terrain(terrain)
    dt = phys.dt
    n = int(round(gait.duration / dt))
    if n < 10:
        raise ScenarioError("duration too short")
    time = np.arange(n) * dt
    rng = np.random.default_rng(seed)
    mg = phys.mass * phys.gravity
    in_place = gait.mode == "walk_in_place"

    def tick(t):
        return min(max(int(round(t / dt)), 0), n)

    # --- phase timeline -----------------------------------------------
    x_start = 0.3
    foot_x = [x_start, x_start]
    foot_y = [phys.stance_width, -phys.stance_width]
    lead = phys.lead_time
    if gait.duration < 2.0 * lead + 0.5:
        raise ScenarioError("duration must cover the standing lead-in and -out")

    stance = np.ones((n, 2), dtype=bool)
    share = np.full((n, 2), 0.5)  # includes mid-stance dips
    share_exp = np.full((n, 2), 0.5)  # dip-free expectation, scales demands
    ux = np.zeros((n, 2))
    uy = np.zeros((n, 2))
    u_z = np.zeros((n, 2))  # yaw torque utilization
    settle_u = np.zeros((n, 2))  # touchdown settling, rides above the cap
    settle_w = np.zeros((n, 2))  # settling twist
    wobble = np.zeros((n, 2, 3))  # light-load rocking rates
    cop_dem = np.zeros((n, 2, 2))
    script_pos = np.zeros((n, 2, 3))
    script_vel = np.zeros((n, 2, 3))
    surf_mu = np.zeros((n, 2))
    surf_muz = np.zeros((n, 2))
    surf_copx = np.zeros((n, 2))
    surf_copy = np.zeros((n, 2))

    for f in (LEFT, RIGHT):
        ux[:, f] += _wiggle(rng, time, phys.wiggle_hz, phys.wiggle_util)
        uy[:, f] += _wiggle(rng, time, phys.wiggle_hz, phys.wiggle_util)
        u_z[:, f] += _wiggle(rng, time, phys.wiggle_hz, phys.wiggle_yaw)
        cop_dem[:, f, 0] += _wiggle(rng, time, phys.wiggle_hz, phys.wiggle_cop)
        cop_dem[:, f, 1] += _wiggle(rng, time, phys.wiggle_hz, phys.wiggle_cop)
        for ax in range(3):
            wobble[:, f, ax] = _wiggle(rng, time, phys.rock_hz, phys.rock_rate)

    for f in (LEFT, RIGHT):
        script_pos[:, f, 0] = foot_x[f]
        script_pos[:, f, 1] = foot_y[f]
        s = terr.at(foot_x[f])
        script_pos[:, f, 2] = s.height
        surf_mu[:, f] = s.mu_xy
        surf_muz[:, f] = s.mu_z
        surf_copx[:, f] = s.cop_x
        surf_copy[:, f] = s.cop_y

    def set_share(i0, i1, start, target):
        if i1 <= i0:
            return
        u = _smoothstep(np.linspace(0.0, 1.0, i1 - i0, endpoint=False))
        for f in (LEFT, RIGHT):
            vals = start[f] + (target[f] - start[f]) * u
            share[i0:i1, f] = vals
            share_exp[i0:i1, f] = vals

    def hold_share(i0, i1, value):
        share[i0:i1] = value
        share_exp[i0:i1] = value

    def add_dip(f, t0, t1, amp):
        i0, i1 = tick(t0), tick(t1)
        if i1 <= i0:
            return
        u = (np.arange(i0, i1) - i0) / (i1 - i0)
        share[i0:i1, f] += -amp * np.sin(2.0 * np.pi * u)

    tang_scale = phys.inplace_scale if in_place else 1.0
    cop_gain = phys.inplace_cop_gain if in_place else 1.0

    def emit_stance_demands(f, t0, t1, sgn):
        """Stance-long demand plateaus with a trapezoid on-off envelope."""
        i0, i1 = tick(t0), tick(t1)
        if i1 - i0 < 4:
            return
        u = (np.arange(i0, i1) - i0) / (i1 - i0)
        env = np.minimum(1.0, np.minimum(12.0 * u, 12.0 * (1.0 - u)))
        ux[i0:i1, f] += env * sgn * rng.uniform(*phys.tang_x_util) * tang_scale
        uy[i0:i1, f] += env * rng.choice((-1.0, 1.0)) * rng.uniform(*phys.tang_y_util) * tang_scale
        u_z[i0:i1, f] += env * sgn * rng.uniform(*phys.yaw_torque_util)
        cop_hi = rng.uniform(*phys.cop_x_off) * cop_gain
        cop_dem[i0:i1, f, 0] += env * (-0.66 * cop_hi + 1.66 * cop_hi * u)
        cop_dem[i0:i1, f, 1] += env * rng.choice((-1.0, 1.0)) * rng.uniform(*phys.cop_y_off) * cop_gain
        # touchdown settling and toe-off drag: bursts while the load ramps
        # are still light (both peak well below 200 N of load)
        s_lo, s_hi = phys.settle_util
        if s_hi > 0.0 and t0 > 0.0:
            ds_here = gait.periods_at(t0)[1]
            j0, j1 = tick(t0 + 0.05 * ds_here), tick(t0 + 0.40 * ds_here)
            if j1 > j0:
                j1 = min(j1, i1)
                w = (np.arange(j0, j1) - j0) / max(j1 - j0, 1)
                burst = np.sin(np.pi * w) ** 2 * rng.uniform(s_lo, s_hi)
                settle_u[j0:j1, f] += rng.choice((-1.0, 1.0)) * burst
                settle_w[j0:j1, f] += rng.choice((-1.0, 1.0)) * phys.settle_twist * burst
        if s_hi > 0.0:
            ds_out = gait.periods_at(t1)[1]
            j0, j1 = tick(t1 - 0.40 * ds_out), tick(t1 - 0.05 * ds_out)
            if j1 > j0:
                j0 = max(j0, i0)
                w = (np.arange(j0, j1) - j0) / max(j1 - j0, 1)
                burst = np.sin(np.pi * w) ** 2 * rng.uniform(s_lo, s_hi)
                settle_u[j0:j1, f] += rng.choice((-1.0, 1.0)) * burst
                settle_w[j0:j1, f] += rng.choice((-1.0, 1.0)) * phys.settle_twist * burst

    cur = np.array([0.5, 0.5])
    t = lead
    step = 0
    swing_foot = RIGHT
    touchdown = [0.0, 0.0]
    while True:
        ss, ds = gait.periods_at(t)
        if t + ds + ss + ds + lead > gait.duration:
            break
        stance_foot = 1 - swing_foot
        i_ds0, i_ds1 = tick(t), tick(t + ds)
        i_ss1 = tick(t + ds + ss)
        target_state = np.zeros(2)
        target_state[stance_foot] = 1.0
        set_share(i_ds0, i_ds1, cur, target_state)
        cur = target_state
        hold_share(i_ds1, i_ss1, cur)
        stance[i_ds1:i_ss1, swing_foot] = False

        # swing trajectory
        x0 = foot_x[swing_foot]
        x1 = x0 if in_place else max(foot_x) + gait.step_length
        s0, s1 = terr.at(x0), terr.at(x1)
        z0, z1 = s0.height, s1.height
        idx = np.arange(i_ds1, i_ss1)
        if idx.size:
            u = (idx - i_ds1) / max(i_ss1 - i_ds1, 1)
            sig = _smoothstep(u)
            dsig = np.clip(u, 0, 1) * (6.0 - 6.0 * np.clip(u, 0, 1))  # d/du
            du_dt = 1.0 / (max(i_ss1 - i_ds1, 1) * dt)
            shuffle = phys.inplace_shuffle if in_place else 0.0
            script_pos[idx, swing_foot, 0] = (
                x0 + (x1 - x0) * sig + shuffle * np.sin(np.pi * u) ** 2
            )
            script_pos[idx, swing_foot, 2] = (
                z0 + (z1 - z0) * sig + gait.step_height * np.sin(np.pi * u) ** 2
            )
            script_vel[idx, swing_foot, 0] = (
                (x1 - x0) * dsig
                + shuffle * np.pi * np.sin(2.0 * np.pi * u)
            ) * du_dt
            script_vel[idx, swing_foot, 2] = (
                (z1 - z0) * dsig
                + gait.step_height * np.pi * np.sin(2.0 * np.pi * u)
            ) * du_dt
        foot_x[swing_foot] = x1
        # foot holds the landing pose from touchdown on
        script_pos[i_ss1:, swing_foot, 0] = x1
        script_pos[i_ss1:, swing_foot, 2] = z1
        surf_mu[i_ds1:, swing_foot] = s1.mu_xy
        surf_muz[i_ds1:, swing_foot] = s1.mu_z
        surf_copx[i_ds1:, swing_foot] = s1.cop_x
        surf_copy[i_ds1:, swing_foot] = s1.cop_y

        # the swing foot's stance interval just ended: emit its demands.
        # Walking braking is directional; in-place stepping is not.
        t_ss0, t_ss1 = t + ds, t + ds + ss
        emit_stance_demands(swing_foot, touchdown[swing_foot], t_ss0,
                            1.0 if not in_place else rng.choice((-1.0, 1.0)))
        touchdown[swing_foot] = t_ss1
        # mid-stance unweighting dips; bottoms land inside the demand
        # plateau, so low-friction stances slip while loaded.  Deep
        # unweighting mostly accompanies the poor footholds.
        stance_mu = terr.at(foot_x[stance_foot]).mu_xy
        do_shallow = rng.random() < 0.55
        do_deep = rng.random() < (0.8 if stance_mu < 0.6 else 0.25)
        dip_amp = rng.uniform(*phys.dip_shallow)
        dip_c = rng.uniform(0.28, 0.36)
        if do_shallow:
            add_dip(stance_foot, t_ss0 + (dip_c - 0.13) * ss, t_ss0 + (dip_c + 0.13) * ss, dip_amp)
        dip_amp = rng.uniform(*phys.dip_depth)
        dip_c = rng.uniform(0.58, 0.68)
        if do_deep:
            add_dip(stance_foot, t_ss0 + (dip_c - 0.13) * ss, t_ss0 + (dip_c + 0.13) * ss, dip_amp)

        t = t_ss1
        step += 1
        swing_foot = stance_foot

    # release back to double support and stand out
    ss, ds = gait.periods_at(t)
    i0, i1 = tick(t), tick(t + ds)
    set_share(i0, i1, cur, np.array([0.5, 0.5]))
    hold_share(i1, n, np.array([0.5, 0.5]))
    if step == 0:
        raise ScenarioError("duration too short for a single step")
    # demands stop at the release; standing carries only the wiggle floor
    for f in (LEFT, RIGHT):
        emit_stance_demands(f, touchdown[f], t + ds,
                            1.0 if not in_place else rng.choice((-1.0, 1.0)))

    # --- penalty + saturation pass ------------------------------------
    delta = share * (mg / phys.contact_kp)
    ddelta = _cdiff(delta, dt)
    # demands keep their full-load magnitude through double support (the
    # kernel caps them against the nominal cone), so half-loaded stance
    # carries the same wrench texture as single support
    dem_t = np.empty((n, 2, 2))
    dem_t[:, :, 0] = ux * mg
    dem_t[:, :, 1] = uy * mg
    tau_z_dem = u_z * (phys.yaw_mu_ref * mg)
    settle_dem = settle_u * share_exp * mg
    settle_tau = settle_w * (phys.yaw_mu_ref * mg) * share_exp

    foot_pos = np.empty((n, 2, 3))
    foot_vel = np.zeros((n, 2, 3))
    foot_quat = np.empty((n, 2, 4))
    foot_angvel = np.zeros((n, 2, 3))
    force = np.zeros((n, 2, 3))
    torque = np.zeros((n, 2, 3))
    violated = np.zeros((n, 2, 3), dtype=np.uint8)
    slip_vel = np.zeros((n, 2, 2))
    tip_rate = np.zeros((n, 2, 2))
    yaw_rate = np.zeros((n, 2))

    _contact_pass(
        stance.astype(np.uint8), delta, ddelta, dem_t, settle_dem, settle_tau,
        cop_dem, tau_z_dem, wobble, surf_mu, surf_muz, surf_copx, surf_copy,
        script_pos, script_vel,
        dt, phys.contact_kp, phys.contact_kd, phys.slip_damping, phys.slip_vmax,
        phys.yaw_damping, phys.tip_damping, phys.tip_recovery,
        phys.swing_decay, phys.tang_demand_cap, phys.yaw_demand_cap,
        phys.rock_load, phys.migrate_load, phys.migrate_rate,
        phys.chatter_frac, phys.chatter_hz, phys.judder_frac, phys.judder_hz,
        FZ_EPS,
        foot_pos, foot_vel, foot_quat, foot_angvel, force, torque,
        violated, slip_vel, tip_rate, yaw_rate,
    )
    if not (np.all(np.isfinite(foot_pos)) and np.all(np.isfinite(force))):
        raise ScenarioError("integration diverged")

    # --- base script ----------------------------------------------------
    base_pos = np.empty((n, 3))
    base_pos[:, 0] = 0.5 * (script_pos[:, LEFT, 0] + script_pos[:, RIGHT, 0])
    wsum = share_exp[:, LEFT] + share_exp[:, RIGHT]
    blend = (share_exp[:, LEFT] - share_exp[:, RIGHT]) / np.maximum(wsum, 1e-9)
    # sway follows the support side on its own, slower timescale
    win = int(round(0.3 / dt))
    kernel = np.hanning(2 * win + 1)
    kernel /= kernel.sum()
    blend = np.convolve(np.pad(blend, win, mode="edge"), kernel, mode="same")[win:-win]
    base_pos[:, 1] = 0.6 * phys.stance_width * blend
    base_pos[:, 2] = phys.base_height - 0.012 * (1.0 - blend**2)
    base_yaw = 0.03 * -blend
    base_quat = np.zeros((n, 4))
    base_quat[:, 0] = np.cos(0.5 * base_yaw)
    base_quat[:, 3] = np.sin(0.5 * base_yaw)
    base_vel = _cdiff(base_pos, dt)
    # forward difference: the filter's Euler velocity update then integrates
    # the true velocity sequence exactly
    base_accel_w = np.empty_like(base_vel)
    base_accel_w[:-1] = (base_vel[1:] - base_vel[:-1]) / dt
    base_accel_w[-1] = base_accel_w[-2]
    base_angvel = np.zeros((n, 3))
    base_angvel[:-1, 2] = (base_yaw[1:] - base_yaw[:-1]) / dt
    base_angvel[-1, 2] = base_angvel[-2, 2]
    foot_accel_w = np.stack(
        [_cdiff(foot_vel[:, f], dt) for f in (LEFT, RIGHT)], axis=1
    )

    log = GroundTruthLog(
        dt=dt, time=time,
        base_pos=base_pos, base_quat=base_quat, base_vel=base_vel,
        base_angvel=base_angvel, base_accel_w=base_accel_w,
        foot_pos=foot_pos, foot_quat=foot_quat, foot_vel=foot_vel,
        foot_angvel=foot_angvel, foot_accel_w=foot_accel_w,
        force=force, torque=torque,
        violated=violated.astype(bool), stance=stance,
    )
    log.episodes = _extract_episodes(log, slip_vel, tip_rate, dt)
    return log


@maybe_jit
def _contact_pass(
    stance, delta, ddelta, dem_t, settle_dem, settle_tau, cop_dem, tau_z_dem,
    wobble, surf_mu, surf_muz, surf_copx, surf_copy,
    script_pos, script_vel,
    dt, kp, kd, slip_damp, slip_vmax, yaw_damp, tip_damp, tip_recovery,
    swing_decay, tang_cap, yaw_cap, rock_load, migrate_load, migrate_rate,
    chatter_frac, chatter_hz, judder_frac, judder_hz, fz_eps,
    foot_pos, foot_vel, foot_quat, foot_angvel, force, torque,
    violated, slip_vel, tip_rate, yaw_rate,
):
    n = stance.shape[0]
    for f in range(2):
        offx = 0.0
        offy = 0.0
        roll = 0.0
        pitch = 0.0
        yaw = 0.0
        for k in range(n):
            roll_r = 0.0
            pitch_r = 0.0
            yaw_r = 0.0
            if stance[k, f] == 1:
                fz = kp * delta[k, f] + kd * ddelta[k, f]
                if fz < 0.0:
                    fz = 0.0
                if fz >= fz_eps:
                    dx = dem_t[k, f, 0]
                    dy = dem_t[k, f, 1]
                    dn = np.sqrt(dx * dx + dy * dy)
                    cap = tang_cap * fz
                    if dn > cap and dn > 1e-12:
                        dx *= cap / dn
                        dy *= cap / dn
                    dy += settle_dem[k, f]
                    dn = np.sqrt(dx * dx + dy * dy)
                    lim = surf_mu[k, f] * fz
                    svx = 0.0
                    svy = 0.0
                    if dn > lim and dn > 1e-12:
                        scale = lim / dn
                        speed = (dn - lim) / slip_damp
                        if speed > slip_vmax:
                            speed = slip_vmax
                        speed *= 1.0 + judder_frac * np.sin(
                            2.0 * np.pi * judder_hz * k * dt
                        )
                        svx = -speed * (dx / dn)
                        svy = -speed * (dy / dn)
                        offx += svx * dt
                        offy += svy * dt
                        chat = 1.0 + chatter_frac * np.sin(
                            2.0 * np.pi * chatter_hz * k * dt
                        )
                        dx *= scale * chat
                        dy *= scale * chat
                        violated[k, f, 0] = 1
                    # CoP box
                    cxd = cop_dem[k, f, 0]
                    cyd = cop_dem[k, f, 1]
                    bx = surf_copx[k, f]
                    by = surf_copy[k, f]
                    cx = min(max(cxd, -bx), bx)
                    cy = min(max(cyd, -by), by)
                    exc_x = cxd - cx
                    exc_y = cyd - cy
                    if exc_x != 0.0 or exc_y != 0.0:
                        violated[k, f, 1] = 1
                        pitch_r = fz * exc_x / tip_damp
                        roll_r = -fz * exc_y / tip_damp
                    else:
                        pitch_r = -pitch / tip_recovery
                        roll_r = -roll / tip_recovery
                    # rotational friction
                    tzd = tau_z_dem[k, f]
                    zcap = yaw_cap * fz
                    tzd = min(max(tzd, -zcap), zcap) + settle_tau[k, f]
                    lz = surf_muz[k, f] * fz
                    if tzd > lz:
                        tz = lz
                        yaw_r = -(tzd - lz) / yaw_damp
                        violated[k, f, 2] = 1
                    elif tzd < -lz:
                        tz = -lz
                        yaw_r = (-tzd - lz) / yaw_damp
                        violated[k, f, 2] = 1
                    else:
                        tz = tzd
                    # lightly loaded feet rock: their pose is not a steady
                    # reference until the load settles them
                    if fz < rock_load:
                        fade = 1.0 - fz / rock_load
                        roll_r += fade * wobble[k, f, 0]
                        pitch_r += fade * wobble[k, f, 1]
                        yaw_r += fade * wobble[k, f, 2]
                    # rolling contact point while lightly loaded; the CoP
                    # rides the support-polygon boundary while the sole rolls
                    if fz < migrate_load and migrate_rate > 0.0:
                        mig = migrate_rate * (1.0 - fz / migrate_load)
                        offx += mig * dt
                        foot_vel[k, f, 0] += mig
                        cx = bx
                        violated[k, f, 1] = 1
                    roll += roll_r * dt
                    pitch += pitch_r * dt
                    yaw += yaw_r * dt
                    force[k, f, 0] = dx
                    force[k, f, 1] = dy
                    force[k, f, 2] = fz
                    torque[k, f, 0] = fz * cy
                    torque[k, f, 1] = -fz * cx
                    torque[k, f, 2] = tz
                    foot_vel[k, f, 0] = svx
                    foot_vel[k, f, 1] = svy
                    slip_vel[k, f, 0] = svx
                    slip_vel[k, f, 1] = svy
                else:
                    violated[k, f, 0] = 1
                    violated[k, f, 1] = 1
                    violated[k, f, 2] = 1
            else:
                # airborne: reset slide offset, re-level the foot
                offx = 0.0
                offy = 0.0
                violated[k, f, 0] = 1
                violated[k, f, 1] = 1
                violated[k, f, 2] = 1
                roll_r = -roll / swing_decay
                pitch_r = -pitch / swing_decay
                yaw_r = -yaw / swing_decay
                roll += roll_r * dt
                pitch += pitch_r * dt
                yaw += yaw_r * dt
                foot_vel[k, f, 0] = script_vel[k, f, 0]
                foot_vel[k, f, 1] = script_vel[k, f, 1]
                foot_vel[k, f, 2] = script_vel[k, f, 2]
            foot_pos[k, f, 0] = script_pos[k, f, 0] + offx
            foot_pos[k, f, 1] = script_pos[k, f, 1] + offy
            foot_pos[k, f, 2] = script_pos[k, f, 2]
            q = rpy_to_quat(roll, pitch, yaw)
            foot_quat[k, f, 0] = q[0]
            foot_quat[k, f, 1] = q[1]
            foot_quat[k, f, 2] = q[2]
            foot_quat[k, f, 3] = q[3]
            foot_angvel[k, f, 0] = roll_r
            foot_angvel[k, f, 1] = pitch_r
            foot_angvel[k, f, 2] = yaw_r
            tip_rate[k, f, 0] = roll_r
            tip_rate[k, f, 1] = pitch_r
            yaw_rate[k, f] = yaw_r


def _extract_episodes(log, slip_vel, tip_rate, dt, merge_gap=0.02, min_len=0.03):
    """Contiguous constraint-violation runs of stance feet, labeled by DoF."""
    episodes = []
    gap_ticks = int(round(merge_gap / dt))
    min_ticks = int(round(min_len / dt))
    kinds = (("slip", 0), ("cop", 1), ("yaw", 2))
    for f in (LEFT, RIGHT):
        for kind, col in kinds:
            active = log.violated[:, f, col] & log.stance[:, f] & (
                log.force[:, f, 2] > FZ_EPS
            )
            runs = _runs(active, gap_ticks)
            for i0, i1 in runs:
                if i1 - i0 < min_ticks:
                    continue
                if kind == "slip":
                    seg = slip_vel[i0:i1, f]
                    dof = "x" if np.abs(seg[:, 0]).mean() >= np.abs(seg[:, 1]).mean() else "y"
                elif kind == "cop":
                    seg = tip_rate[i0:i1, f]
                    dof = "rx" if np.abs(seg[:, 0]).mean() >= np.abs(seg[:, 1]).mean() else "ry"
                else:
                    dof = "rz"
                episodes.append(
                    SlipEpisode(foot=f, kind=kind, dof=dof,
                                t_start=i0 * dt, t_end=i1 * dt)
                )
    episodes.sort(key=lambda e: (e.t_start, e.foot, e.kind))
    return episodes


def _runs(active: np.ndarray, gap_ticks: int):
    """[start, stop) index pairs of True runs, merging gaps below gap_ticks."""
    idx = np.nonzero(active)[0]
    if idx.size == 0:
        return []
    breaks = np.nonzero(np.diff(idx) > gap_ticks)[0]
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    stops = np.concatenate([idx[breaks] + 1, [idx[-1] + 1]])
    return list(zip(starts.tolist(), stops.tolist()))
