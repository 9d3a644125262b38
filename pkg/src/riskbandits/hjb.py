"""Explicit monotone finite differences for ``v_t + G(v_x, v_yy) = 0``.

The value ``V = v(0, 0, 0)`` of the bandit is the solution at the origin
of the PDE run backward from ``v(1, x, y) = u(x, y)``.

The solver works in a moving frame ``xi = x + m (1 - t)``. There the driver
becomes ``max_k (mu_k - m) p + sigma_k^2 q / 2`` and the origin maps to
``(m, 0)``. With ``m`` the mid-range of the means, transport in ``xi`` is at
most ``(mu_max - mu_min) / 2`` and vanishes for a single arm, so the grid
only needs to cover a narrow band around ``m``.

The x-derivative uses central differences plus a common numerical
viscosity ``c dx / 2 v_xx`` with ``c = max_k |mu_k - m|``. For the arms with
the largest drift this is exactly first-order upwinding; because every arm's
stencil is affine in ``(mu_k, sigma_k^2)`` the driver over all arms agrees
with the driver over the hull vertices. The y-derivative is central.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .arms import Arm, ArmSet, compute_bounds
from .exceptions import ConfigError, InvalidInputError, NumericalError
from .utility import UtilityIndex, UtilityKind, eval_index, single_arm_limit

T_HORIZON = 1.0
DEFAULT_CELLS = 200
MAX_STABILITY = 0.45


class BoundaryPolicy(str, enum.Enum):
    """Closure for ``v_yy`` on the two y-edges of the grid."""

    # v_yy = 0 on the edges: monotone, but wrong for utilities curved in y
    SECOND_DERIVATIVE_ZERO = "second_derivative_zero"
    # v_yy copied from the adjacent interior row, i.e. quadratic
    # extrapolation; exact for utilities quadratic in y (the default)
    ONE_SIDED_UPWIND = "one_sided_upwind"


class XScheme(str, enum.Enum):
    COMMON_VISCOSITY = "common_viscosity"
    PER_ARM_UPWIND = "per_arm_upwind"


@dataclass(frozen=True)
class Grid:
    """Space-time grid in the moving frame.

    ``x_points``/``y_points`` are node counts, ``x_range`` is given in
    ``xi`` coordinates, and ``frame_shift`` is the ``m`` of the frame.
    """

    t_steps: int
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    x_points: int
    y_points: int
    frame_shift: float = 0.0
    T: float = T_HORIZON

    def __post_init__(self):
        if self.t_steps < 1:
            raise ConfigError("t_steps must be >= 1")
        if self.x_points < 3 or self.y_points < 3:
            raise ConfigError("grids need at least 3 nodes per axis")
        if not (self.x_range[0] < self.x_range[1] and self.y_range[0] < self.y_range[1]):
            raise ConfigError("grid ranges must be non-empty intervals")

    @property
    def dt(self) -> float:
        return self.T / self.t_steps

    @property
    def dx(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / (self.x_points - 1)

    @property
    def dy(self) -> float:
        return (self.y_range[1] - self.y_range[0]) / (self.y_points - 1)

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_range[0], self.x_range[1], self.x_points)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y_range[0], self.y_range[1], self.y_points)

    def max_stable_dt(self, arm_set: ArmSet, stability_factor: float = MAX_STABILITY) -> float:
        drift = max(max(abs(float(a.mean) - self.frame_shift) for a in arm_set), 1.0)
        var = float(arm_set.var_max)
        diff = self.dy ** 2 / var if var > 0 else math.inf
        return stability_factor * min(diff, self.dx / drift)

    def check_stability(self, arm_set: ArmSet, stability_factor: float = MAX_STABILITY) -> None:
        if not 0 < stability_factor <= MAX_STABILITY:
            raise ConfigError(f"stability_factor must lie in (0, {MAX_STABILITY}]")
        limit = self.max_stable_dt(arm_set, stability_factor)
        if self.dt > limit * (1 + 1e-12):
            raise ConfigError(f"time step {self.dt:.3g} exceeds the stability bound {limit:.3g}; "
                              f"use at least {math.ceil(self.T / limit)} steps")

    @classmethod
    def for_arms(cls, arm_set: ArmSet, cells: int = DEFAULT_CELLS, y_cells: int | None = None,
                 frame: str = "centered", stability_factor: float = MAX_STABILITY) -> "Grid":
        """Default grid: ``cells`` intervals per axis (``cells + 1`` nodes),
        ``y`` over ``+-6 sigma_max``, and the fewest stable time steps.

        ``frame="centered"`` covers ``m +- (spread/2 + max(spread/2, 1))``
        around the mid-range mean; ``frame="absolute"`` uses ``m = 0`` and
        ``x`` over ``+-(|mu_min| + |mu_max| + 6 sigma_max)``.
        """
        y_cells = cells if y_cells is None else y_cells
        if cells < 2 or cells % 2 or y_cells < 2 or y_cells % 2:
            raise ConfigError("cell counts must be even and >= 2 so the origin is a node")
        mu_hi, mu_lo = float(arm_set.mu_max), float(arm_set.mu_min)
        sd = math.sqrt(float(arm_set.var_max))
        if sd == 0:
            raise ConfigError("all variances are zero; set epsilon_perturbation > 0")
        ymax = 6.0 * sd * math.sqrt(T_HORIZON)
        if frame == "centered":
            m = 0.5 * (mu_hi + mu_lo)
            half = 0.5 * (mu_hi - mu_lo)
            width = half + max(half, 1.0)
        elif frame == "absolute":
            m = 0.0
            width = abs(mu_lo) + abs(mu_hi) + 6.0 * sd
        else:
            raise ConfigError(f"unknown frame {frame!r}")
        probe = cls(1, (m - width, m + width), (-ymax, ymax), cells + 1, y_cells + 1, m)
        steps = math.ceil(T_HORIZON / probe.max_stable_dt(arm_set, stability_factor) - 1e-9)
        return replace(probe, t_steps=max(steps, 1))


@dataclass(frozen=True)
class SolverConfig:
    epsilon_perturbation: float = 0.0
    boundary_policy: BoundaryPolicy = BoundaryPolicy.ONE_SIDED_UPWIND
    # None: 2 * dy for shortfall indices, which need a continuous terminal
    smoothing_width: float | None = None
    stability_factor: float = MAX_STABILITY
    x_scheme: XScheme = XScheme.COMMON_VISCOSITY
    # also keep every k-th time slice (0: only t = 0 and t = T)
    save_every: int = 0
    check_every: int = 25

    def __post_init__(self):
        object.__setattr__(self, "boundary_policy", BoundaryPolicy(self.boundary_policy))
        object.__setattr__(self, "x_scheme", XScheme(self.x_scheme))
        if self.epsilon_perturbation < 0:
            raise ConfigError("epsilon_perturbation must be >= 0")
        if not 0 < self.stability_factor <= MAX_STABILITY:
            raise ConfigError(f"stability_factor must lie in (0, {MAX_STABILITY}]")
        if self.smoothing_width is not None and self.smoothing_width < 0:
            raise ConfigError("smoothing_width must be >= 0")


@dataclass
class PdeSolution:
    grid: Grid
    times: list[float]
    values: list[np.ndarray]
    corner_value: float
    control_field: np.ndarray | None
    arm_ids: tuple[int, ...]
    utility: UtilityIndex
    epsilon: float = 0.0
    notes: list[str] = field(default_factory=list)

    def slice_at(self, t: float) -> np.ndarray:
        for tt, v in zip(self.times, self.values):
            if abs(tt - t) < 1e-12:
                return v
        raise InvalidInputError(f"no saved slice at t={t}; saved: {self.times}")

    def value_at(self, x, y, t: float = 0.0):
        """Bilinear interpolation of ``v(t, x, y)`` in original coordinates."""
        g = self.grid
        v = self.slice_at(t)
        xi = np.asarray(x, dtype=float) + g.frame_shift * (g.T - t)
        y = np.asarray(y, dtype=float)
        fx = (xi - g.x_range[0]) / g.dx
        fy = (y - g.y_range[0]) / g.dy
        if np.any(fx < -1e-9) or np.any(fx > g.x_points - 1 + 1e-9) or \
                np.any(fy < -1e-9) or np.any(fy > g.y_points - 1 + 1e-9):
            raise InvalidInputError("point lies outside the grid")
        i = np.clip(np.floor(fx).astype(int), 0, g.x_points - 2)
        j = np.clip(np.floor(fy).astype(int), 0, g.y_points - 2)
        a = np.clip(fx - i, 0.0, 1.0)
        b = np.clip(fy - j, 0.0, 1.0)
        return ((1 - a) * (1 - b) * v[i, j] + a * (1 - b) * v[i + 1, j]
                + (1 - a) * b * v[i, j + 1] + a * b * v[i + 1, j + 1])

    def terminal_error(self) -> float:
        """Max-norm gap between the terminal slice and the sampled utility."""
        g = self.grid
        X, Y = np.meshgrid(g.xs, g.ys, indexing="ij")
        ref = np.broadcast_to(eval_index(self.utility, X, Y), X.shape)
        return float(np.max(np.abs(self.slice_at(g.T) - ref)))

    def write_csv(self, path) -> None:
        """``x, y, v, argmax_arm`` on the t = 0 slice, original coordinates."""
        g = self.grid
        v = self.slice_at(0.0)
        xs = g.xs - g.frame_shift * g.T
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "v", "argmax_arm"])
            for i, x in enumerate(xs):
                for j, y in enumerate(g.ys):
                    arm = int(self.control_field[i, j]) if self.control_field is not None else -1
                    w.writerow([repr(float(x)), repr(float(y)), repr(float(v[i, j])), arm])


def perturbed_driver(arm_set: ArmSet, epsilon: float) -> ArmSet:
    """Arm set with every variance replaced by ``sigma_k^2 + epsilon^2``."""
    if epsilon < 0:
        raise InvalidInputError("epsilon must be >= 0")
    if epsilon == 0:
        return arm_set
    arms = [Arm(a.id, a.distribution, a.mean, a.variance + epsilon * epsilon) for a in arm_set]
    return compute_bounds(arms)


def _grid_utility(u: UtilityIndex, grid: Grid, config: SolverConfig) -> UtilityIndex:
    if u.kind is UtilityKind.SHORTFALL and u.delta == 0:
        delta = 2.0 * grid.dy if config.smoothing_width is None else config.smoothing_width
        if delta == 0:
            raise ConfigError("the shortfall index needs smoothing_width > 0 on the grid")
        return u.with_smoothing(delta)
    return u


def effective_arms(arm_set: ArmSet, config: SolverConfig) -> ArmSet:
    """The arm set the solver actually uses, after any variance perturbation."""
    if float(arm_set.var_min) == 0 and config.epsilon_perturbation == 0:
        raise ConfigError("an arm has zero variance: epsilon_perturbation must be > 0")
    return perturbed_driver(arm_set, config.epsilon_perturbation)


def solve_hjb(arm_set: ArmSet, u: UtilityIndex, grid: Grid | None = None,
              config: SolverConfig | None = None) -> PdeSolution:
    """March ``v`` from ``t = T`` back to ``t = 0`` and return the solution.

    The shortfall index is smoothed on the grid (ramp of width
    ``config.smoothing_width``, default ``2 dy``); the solution records the
    utility actually used as terminal data.
    """
    config = config or SolverConfig()
    arms = effective_arms(arm_set, config)
    grid = grid or Grid.for_arms(arms, stability_factor=config.stability_factor)
    grid.check_stability(arms, config.stability_factor)
    u_grid = _grid_utility(u, grid, config)

    xs, ys = grid.xs, grid.ys
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    v = np.array(np.broadcast_to(eval_index(u_grid, X, Y), X.shape), dtype=float)
    if not np.all(np.isfinite(v)):
        i, j = np.argwhere(~np.isfinite(v))[0]
        raise NumericalError(f"terminal utility is non-finite at x={xs[i]:.6g}, y={ys[j]:.6g}")

    drift = np.array([float(a.mean) for a in arms]) - grid.frame_shift
    half_var = 0.5 * np.array([float(a.variance) for a in arms])
    ids = tuple(a.id for a in arms)
    c = float(np.max(np.abs(drift)))
    dt, dx, dy = grid.dt, grid.dx, grid.dy
    nx, ny = v.shape

    times, saved = [grid.T], [v.copy()]
    dplus = np.empty_like(v)
    dyy = np.empty_like(v)
    best = np.empty_like(v)
    cand = np.empty_like(v)
    arg = np.zeros(v.shape, dtype=np.int64)
    use_x = c > 0
    for step in range(grid.t_steps):
        # forward difference in x; the last row repeats its neighbour
        # (linear extrapolation past the edge)
        if use_x:
            np.subtract(v[1:], v[:-1], out=dplus[:-1])
            dplus[-1] = dplus[-2]
            dplus /= dx
            dminus = np.empty_like(v)
            dminus[1:] = dplus[:-1]
            dminus[0] = dplus[0]
        np.subtract(v[:, 2:] + v[:, :-2], 2.0 * v[:, 1:-1], out=dyy[:, 1:-1])
        dyy /= dy * dy
        if config.boundary_policy is BoundaryPolicy.SECOND_DERIVATIVE_ZERO:
            dyy[:, 0] = 0.0
            dyy[:, -1] = 0.0
        else:
            dyy[:, 0] = dyy[:, 1]
            dyy[:, -1] = dyy[:, -2]

        last = step == grid.t_steps - 1
        if use_x and config.x_scheme is XScheme.COMMON_VISCOSITY:
            central = 0.5 * (dplus + dminus)
            visc = (0.5 * c) * (dplus - dminus)
        for k in range(len(drift)):
            if not use_x or drift[k] == 0:
                np.multiply(dyy, half_var[k], out=cand)
                if use_x and config.x_scheme is XScheme.COMMON_VISCOSITY:
                    cand += visc
            elif config.x_scheme is XScheme.COMMON_VISCOSITY:
                np.multiply(central, drift[k], out=cand)
                cand += visc
                cand += half_var[k] * dyy
            else:
                np.multiply(dplus if drift[k] > 0 else dminus, drift[k], out=cand)
                cand += half_var[k] * dyy
            if k == 0:
                best[...] = cand
                if last:
                    arg[...] = 0
            else:
                if last:
                    better = cand > best
                    arg[better] = k
                np.maximum(best, cand, out=best)
        v += dt * best

        if (step + 1) % config.check_every == 0 or last:
            if not np.all(np.isfinite(v)):
                i, j = np.argwhere(~np.isfinite(v))[0]
                t = grid.T - (step + 1) * dt
                raise NumericalError(f"non-finite value at t={t:.6g}, xi={xs[i]:.6g}, y={ys[j]:.6g} "
                                     f"(step {step + 1})")
        if config.save_every and (step + 1) % config.save_every == 0 and not last:
            times.append(grid.T - (step + 1) * dt)
            saved.append(v.copy())

    times.append(0.0)
    saved.append(v.copy())
    order = np.argsort(times)
    times = [float(times[i]) for i in order]
    saved = [saved[i] for i in order]
    control = np.asarray(ids)[arg]
    sol = PdeSolution(grid, times, saved, 0.0, control, ids, u_grid, config.epsilon_perturbation)
    sol.corner_value = float(sol.value_at(0.0, 0.0))
    if u_grid is not u:
        sol.notes.append(f"shortfall indicator smoothed with ramp width {u_grid.delta:.6g}")
    if config.epsilon_perturbation:
        sol.notes.append(f"variances perturbed by epsilon^2 = {config.epsilon_perturbation ** 2:.6g}")
    return sol


def feynman_kac_value(mu: float, sigma2: float, u: UtilityIndex, quadrature_order: int = 64) -> float:
    """Single-arm value ``E u(mu, sigma Z)``: the linear-PDE oracle."""
    return single_arm_limit(u, mu, sigma2, quadrature_order)


def extreme_reduction_check(arm_set: ArmSet, u: UtilityIndex, grid: Grid | None = None,
                            config: SolverConfig | None = None) -> tuple[float, float, float]:
    """Solve with all arms and with the hull vertices only, on one grid."""
    config = config or SolverConfig()
    arms = effective_arms(arm_set, config)
    grid = grid or Grid.for_arms(arms, stability_factor=config.stability_factor)
    v_full = solve_hjb(arm_set, u, grid, config).corner_value
    v_ext = solve_hjb(arm_set.extremes(), u, grid, config).corner_value
    return v_full, v_ext, abs(v_full - v_ext)
