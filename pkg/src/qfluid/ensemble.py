"""Guided trajectory ensembles: transport, statistics and relaxation metrics.

Particles move with the local velocity of the wave field,

    dx/dt = (hbar/m) Im( grad(psi) / psi ) at x(t),

integrated with classic RK4 against a wave-field timeline stored at
half-step granularity, so every sub-stage samples a stored field and reruns
are bit-reproducible. Near density nodes the velocity field diverges; there
the sampled velocity is capped at the grid Nyquist velocity and the event
is counted, and runs where more than 0.1% of trajectories ever hit the cap
are marked degraded.

Statistics side: equilibrium sampling of a density (inverse CDF in 1D,
per-cell multinomial with in-cell jitter in 2D), histogram L1 distance to
|psi|^2 for equivariance checks, and the coarse-grained relative entropy

    H = sum over cells of P ln(P / rho) * cell volume,

which is zero exactly at equilibrium, positive otherwise, and whose decay
under guided transport from a non-equilibrium start is the relaxation
diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, GridMismatchError
from .grids import GridSpec, ScalarField, WaveField, complex_gradient, _interp_values
from .oracle import Potential, PropagatorState, split_step_evolve

__all__ = [
    "TrajectoryEnsemble",
    "HistogramGrid",
    "NodeEvents",
    "VelocityField",
    "WaveTimeline",
    "OracleTimeline",
    "guiding_velocity",
    "propagate_ensemble",
    "PropagationResult",
    "sample_equilibrium",
    "ks_statistic",
    "equivariance_distance",
    "coarse_grained_H",
    "bootstrap_coarse_H",
]

NODE_FLOOR_FRACTION = 1e-12
DEGRADED_CAP_FRACTION = 1e-3


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Particle positions with provenance (seed) and optional history.

    positions has shape (n,) in 1D or (n, 2) in 2D; history, when recorded,
    has shape (steps + 1, n[, 2]) including the initial positions.
    """

    grid: GridSpec
    positions: np.ndarray
    seed: int
    hbar: float = 1.0
    m: float = 1.0
    history: np.ndarray | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", pos)

    @property
    def size(self) -> int:
        return self.positions.shape[0]


@dataclass
class NodeEvents:
    """Counter for velocity evaluations inside flagged near-node regions."""

    evaluations: int = 0
    capped: int = 0


class VelocityField:
    """Sampled guiding velocity of one wave field.

    Interpolates psi and grad(psi) linearly at the requested positions and
    takes Im(grad/psi) afterwards. Doing the division after interpolation
    keeps factorized states exactly factorized, which the conditional
    wave-function machinery relies on.
    """

    def __init__(self, psi: WaveField, hbar: float = 1.0, m: float = 1.0,
                 floor_fraction: float = NODE_FLOOR_FRACTION,
                 masses: tuple[float, ...] | None = None):
        self.grid = psi.grid
        self.psi_values = psi.values
        self.grad_values = complex_gradient(psi)
        self.hbar = hbar
        self.m = m
        self.masses = masses if masses is not None else (m,) * psi.grid.dims
        rho = np.abs(psi.values) ** 2
        self.rho_floor = floor_fraction * rho.max()
        self.v_max = tuple(
            hbar * np.pi / (mi * h)
            for mi, h in zip(self.masses, self.grid.spacing)
        )

    def at(self, positions: np.ndarray, events: NodeEvents | None = None) -> np.ndarray:
        """Velocity components at the given positions, shape (n, dims)."""
        pos = np.asarray(positions, dtype=float)
        psi_here = _interp_values(self.psi_values, self.grid, pos)
        rho_here = np.abs(psi_here) ** 2
        flagged = rho_here < self.rho_floor
        denom = np.maximum(rho_here, self.rho_floor)
        comps = []
        for i in range(self.grid.dims):
            g_here = _interp_values(self.grad_values[i], self.grid, pos)
            v = (self.hbar / self.masses[i]) * np.imag(g_here * np.conj(psi_here)) / denom
            v = np.where(flagged, np.clip(v, -self.v_max[i], self.v_max[i]), v)
            comps.append(v)
        if events is not None:
            events.evaluations += int(flagged.size)
            events.capped += int(np.count_nonzero(flagged))
        out = np.stack(comps, axis=-1)
        return out[..., 0] if self.grid.dims == 1 else out


def guiding_velocity(psi: WaveField, x, hbar: float = 1.0, m: float = 1.0,
                     events: NodeEvents | None = None) -> np.ndarray:
    """Guiding velocity at one position or an array of positions."""
    return VelocityField(psi, hbar, m).at(x, events)


class WaveTimeline:
    """Wave fields on a uniform half-step time lattice.

    Entry j holds psi at t0 + j * (dt/2), which is exactly the set of times
    an RK4 trajectory step of size dt needs. Velocity data per entry is
    built lazily and only a few entries stay cached, since access is
    sequential.
    """

    def __init__(self, t0: float, half_dt: float, fields: list[WaveField],
                 hbar: float = 1.0, m: float = 1.0):
        if len(fields) < 3:
            raise ConfigError("timeline needs at least three stored fields")
        self.t0 = t0
        self.half_dt = half_dt
        self.fields = fields
        self.hbar = hbar
        self.m = m
        self._cache: dict[int, VelocityField] = {}

    @classmethod
    def from_oracle(cls, psi0: WaveField, potential: Potential, dt: float,
                    steps: int, hbar: float = 1.0, m: float = 1.0,
                    t0: float = 0.0) -> "WaveTimeline":
        """Evolve psi0 with the split-operator propagator at half the
        trajectory step and store every state."""
        state = PropagatorState(psi0, t0, dt / 2.0, hbar, m)
        fields = [state.psi]
        for _ in range(2 * steps):
            state = split_step_evolve(state, potential, 1)
            fields.append(state.psi)
        return cls(t0, dt / 2.0, fields, hbar, m)

    @property
    def grid(self) -> GridSpec:
        return self.fields[0].grid

    def index_of(self, t: float) -> int:
        j = round((t - self.t0) / self.half_dt)
        if not 0 <= j < len(self.fields):
            raise ConfigError(f"time {t!r} outside the stored timeline")
        if abs(self.t0 + j * self.half_dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ConfigError(
                f"time {t!r} does not align with the half-step lattice"
            )
        return j

    def at(self, t: float) -> WaveField:
        return self.fields[self.index_of(t)]

    def velocity(self, t: float) -> VelocityField:
        j = self.index_of(t)
        if j not in self._cache:
            if len(self._cache) > 4:
                self._cache.pop(next(iter(self._cache)))
            self._cache[j] = VelocityField(self.fields[j], self.hbar, self.m)
        return self._cache[j]


class OracleTimeline:
    """Streaming counterpart of WaveTimeline for grids too large to store.

    Advances the split-operator propagator lazily on the same half-step
    lattice and keeps a short sliding window of velocity fields. Time
    requests must move forward (RK4 sub-stage order is fine); rewinding
    past the window raises. Determinism is unchanged: the split-step
    sequence is identical to the stored variant.
    """

    def __init__(self, psi0: WaveField, potential: Potential, dt: float,
                 hbar: float = 1.0, m: float = 1.0, t0: float = 0.0,
                 window: int = 6):
        self.t0 = t0
        self.half_dt = dt / 2.0
        self.hbar = hbar
        self.m = m
        self.potential = potential
        self._state = PropagatorState(psi0, t0, self.half_dt, hbar, m)
        self._index = 0
        self._window = window
        self._fields: dict[int, WaveField] = {0: psi0}
        self._velocities: dict[int, VelocityField] = {}

    @property
    def grid(self) -> GridSpec:
        return self.potential.grid

    def index_of(self, t: float) -> int:
        j = round((t - self.t0) / self.half_dt)
        if abs(self.t0 + j * self.half_dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ConfigError(
                f"time {t!r} does not align with the half-step lattice"
            )
        return j

    def _advance_to(self, j: int):
        if j < min(self._fields):
            raise ConfigError(
                "streaming timeline cannot rewind; use WaveTimeline to replay"
            )
        while self._index < j:
            self._state = split_step_evolve(self._state, self.potential, 1)
            self._index += 1
            self._fields[self._index] = self._state.psi
            for old in [k for k in self._fields if k <= self._index - self._window]:
                self._fields.pop(old)
                self._velocities.pop(old, None)

    def at(self, t: float) -> WaveField:
        j = self.index_of(t)
        self._advance_to(j)
        return self._fields[j]

    def velocity(self, t: float) -> VelocityField:
        j = self.index_of(t)
        self._advance_to(j)
        if j not in self._velocities:
            self._velocities[j] = VelocityField(self._fields[j], self.hbar, self.m)
        return self._velocities[j]


@dataclass(frozen=True)
class PropagationResult:
    """Propagated ensemble plus node-capping statistics."""

    ensemble: TrajectoryEnsemble
    events: NodeEvents
    capped_trajectories: int
    degraded: bool


def propagate_ensemble(ens: TrajectoryEnsemble, timeline,
                       dt: float, steps: int,
                       record_history: bool = True,
                       t_start: float | None = None) -> PropagationResult:
    """Classic RK4 transport of all trajectories through the timeline.

    The timeline (stored WaveTimeline or streaming OracleTimeline) must sit
    on the dt/2 lattice so the sub-stages hit stored fields exactly.
    Positions wrap periodically. Runs where more than 0.1% of trajectories
    ever hit the near-node velocity cap are marked degraded and should be
    excluded from acceptance statistics. t_start defaults to the timeline
    origin; pass a later lattice time to continue a previous propagation.
    """
    if timeline.grid != ens.grid:
        raise GridMismatchError("ensemble and timeline grids differ")
    if abs(timeline.half_dt * 2.0 - dt) > 1e-12 * dt:
        raise ConfigError("timeline half-step must equal dt/2")
    grid = ens.grid
    x = np.array(ens.positions, dtype=float)
    events = NodeEvents()
    ever_capped = np.zeros(ens.size, dtype=bool)
    history = [x.copy()] if record_history else None
    t = timeline.t0 if t_start is None else t_start

    def wrap(pos):
        if grid.dims == 1:
            return grid.wrap(pos, 0)
        return np.stack([grid.wrap(pos[:, i], i) for i in range(2)], axis=-1)

    for n in range(steps):
        v0 = timeline.velocity(t)
        vh = timeline.velocity(t + dt / 2.0)
        v1 = timeline.velocity(t + dt)
        before = events.capped
        k1 = v0.at(x, events)
        k2 = vh.at(wrap(x + 0.5 * dt * k1), events)
        k3 = vh.at(wrap(x + 0.5 * dt * k2), events)
        k4 = v1.at(wrap(x + dt * k3), events)
        if events.capped > before:
            # re-evaluate per-trajectory flags only when something capped
            rho_floor = v0.rho_floor
            psi_here = _interp_values(v0.psi_values, grid, x)
            ever_capped |= np.abs(psi_here) ** 2 < rho_floor
        x = wrap(x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
        t += dt
        if record_history:
            history.append(x.copy())

    capped_count = int(ever_capped.sum())
    out = replace(
        ens,
        positions=x,
        history=np.array(history) if record_history else None,
    )
    return PropagationResult(
        ensemble=out,
        events=events,
        capped_trajectories=capped_count,
        degraded=capped_count > DEGRADED_CAP_FRACTION * ens.size,
    )


def sample_equilibrium(rho: ScalarField, n: int, seed: int,
                       hbar: float = 1.0, m: float = 1.0) -> TrajectoryEnsemble:
    """Draw n positions distributed as the (normalized) density rho.

    1D uses the inverse of the piecewise-linear CDF built on cell edges,
    which samples exactly the piecewise-constant density the grid
    represents. 2D draws per-cell counts from a multinomial and jitters
    uniformly inside each cell. Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    grid = rho.grid
    vals = np.maximum(rho.values, 0.0)
    # cells are centered on the nodes carrying the density values, so the
    # sampled piecewise-constant law is unbiased in the mean
    if grid.dims == 1:
        h = grid.spacing[0]
        cdf = np.concatenate([[0.0], np.cumsum(vals) * h])
        cdf /= cdf[-1]
        edges = grid.origin[0] + h * (np.arange(grid.points[0] + 1) - 0.5)
        u = rng.random(n)
        positions = grid.wrap(np.interp(u, cdf, edges), 0)
    else:
        p = (vals * grid.cell_volume).ravel()
        p = p / p.sum()
        counts = rng.multinomial(n, p)
        flat = np.repeat(np.arange(p.size), counts)
        ix, iy = np.unravel_index(flat, grid.shape)
        jitter = rng.random((n, 2))
        hx, hy = grid.spacing
        positions = np.stack(
            [
                grid.wrap(grid.origin[0] + (ix - 0.5 + jitter[:, 0]) * hx, 0),
                grid.wrap(grid.origin[1] + (iy - 0.5 + jitter[:, 1]) * hy, 1),
            ],
            axis=-1,
        )
    return TrajectoryEnsemble(grid=grid, positions=positions, seed=seed,
                              hbar=hbar, m=m)


def ks_statistic(positions: np.ndarray, rho: ScalarField) -> float:
    """Kolmogorov-Smirnov distance between sample and density CDF (1D).

    Uses the same node-centered piecewise-constant law as the sampler.
    """
    grid = rho.grid
    if grid.dims != 1:
        raise ConfigError("KS statistic implemented for 1D densities")
    h = grid.spacing[0]
    cdf = np.concatenate([[0.0], np.cumsum(np.maximum(rho.values, 0.0)) * h])
    cdf /= cdf[-1]
    edges = grid.origin[0] + h * (np.arange(grid.points[0] + 1) - 0.5)
    lo = edges[0]
    xs = np.sort(lo + np.mod(np.asarray(positions, dtype=float) - lo,
                             grid.extent[0]))
    f = np.interp(xs, edges, cdf)
    n = xs.size
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return float(max(upper, lower))


@dataclass(frozen=True)
class HistogramGrid:
    """Histogram over equal bins aligned with the field grid."""

    grid: GridSpec
    bins: tuple[int, ...]
    counts: np.ndarray
    density: np.ndarray = field(init=False)

    def __post_init__(self):
        total = self.counts.sum()
        binvol = self.bin_volume
        object.__setattr__(self, "density", self.counts / (total * binvol))

    @property
    def bin_volume(self) -> float:
        return float(
            np.prod([L / b for L, b in zip(self.grid.extent, self.bins)])
        )

    @classmethod
    def from_positions(cls, grid: GridSpec, positions: np.ndarray,
                       bins) -> "HistogramGrid":
        """Histogram on bins aligned with node-centered grid cells.

        Bin b groups whole grid cells, each spanning half a spacing on
        either side of its node, matching the law sample_equilibrium draws
        from; positions are wrapped into that window first.
        """
        bins = (bins,) * grid.dims if np.isscalar(bins) else tuple(bins)
        lows = [grid.origin[i] - grid.spacing[i] / 2 for i in range(grid.dims)]
        edges = [
            lows[i] + (grid.extent[i] / bins[i]) * np.arange(bins[i] + 1)
            for i in range(grid.dims)
        ]
        pos = np.asarray(positions, dtype=float)
        if grid.dims == 1:
            wrapped = lows[0] + np.mod(pos - lows[0], grid.extent[0])
            counts, _ = np.histogram(wrapped, bins=edges[0])
        else:
            wx = lows[0] + np.mod(pos[:, 0] - lows[0], grid.extent[0])
            wy = lows[1] + np.mod(pos[:, 1] - lows[1], grid.extent[1])
            counts, _, _ = np.histogram2d(wx, wy, bins=edges)
        return cls(grid=grid, bins=bins, counts=counts.astype(float))


def _bin_average(values: np.ndarray, grid: GridSpec, bins: tuple[int, ...]) -> np.ndarray:
    """Average a grid field over equal bins (bin counts must divide points)."""
    for n, b in zip(grid.points, bins):
        if n % b != 0:
            raise ConfigError(f"{b} bins do not divide {n} grid points")
    if grid.dims == 1:
        return values.reshape(bins[0], -1).mean(axis=1)
    bx, by = bins
    nx, ny = grid.points
    return values.reshape(bx, nx // bx, by, ny // by).mean(axis=(1, 3))


def equivariance_distance(ens: TrajectoryEnsemble, psi: WaveField,
                          bins) -> float:
    """L1 distance between the ensemble histogram and |psi|^2 on the bins."""
    if psi.grid != ens.grid:
        raise GridMismatchError("ensemble and wave field grids differ")
    hist = HistogramGrid.from_positions(ens.grid, ens.positions, bins)
    rho_bar = _bin_average(psi.density().values, psi.grid, hist.bins)
    return float(np.sum(np.abs(hist.density - rho_bar)) * hist.bin_volume)


def coarse_grained_H(ens: TrajectoryEnsemble, psi: WaveField,
                     cell_size: int) -> float:
    """Coarse-grained relative entropy of the ensemble against |psi|^2.

    cell_size is in grid spacings (at least 4) and must divide the point
    count. Cells with no particles contribute zero; empty-density cells
    under occupied particles are guarded with a tiny floor instead of
    returning infinity.
    """
    if cell_size < 4:
        raise ConfigError("coarse-graining cells must span at least 4 spacings")
    grid = ens.grid
    bins = tuple(n // cell_size for n in grid.points)
    hist = HistogramGrid.from_positions(grid, ens.positions, bins)
    rho_bar = _bin_average(psi.density().values, grid, bins)
    p_bar = hist.density
    mask = p_bar > 0
    ratio = p_bar[mask] / np.maximum(rho_bar[mask], 1e-300)
    return float(np.sum(p_bar[mask] * np.log(ratio)) * hist.bin_volume)


def bootstrap_coarse_H(ens: TrajectoryEnsemble, psi: WaveField,
                       cell_size: int, n_boot: int = 200,
                       seed: int = 0) -> tuple[float, float, float]:
    """H estimate with a bootstrap 95% band (resampling trajectories)."""
    h_value = coarse_grained_H(ens, psi, cell_size)
    rng = np.random.default_rng(seed)
    n = ens.size
    samples = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, size=n)
        resampled = replace(ens, positions=ens.positions[idx], history=None)
        samples[b] = coarse_grained_H(resampled, psi, cell_size)
    lo, hi = np.percentile(samples, [2.5, 97.5])
    return h_value, float(lo), float(hi)
