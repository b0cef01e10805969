"""Fixed-step RK4 for the delayed closed loop.

Delayed arguments come from a history buffer on the integration mesh.  Between
completed mesh points the buffer uses cubic Hermite interpolation with the
stored derivatives; on the newest interval, before its right-end derivative
is known (stage 1 of a step), it falls back to the quadratic through
(x_i, x_i', x_{i+1}).  Lookups past the newest point extrapolate the last
cubic.  Before ``t0`` the caller's history function is used.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, ScheduleError
from .linalg import NormSpec
from .netmodel import MultiplexNetwork

DT_GUARD_DIVISOR = 10.0
TAU_SAMPLES = 2001
HISTORY_SAMPLES = 201


@dataclass(frozen=True)
class SimConfig:
    t0: float = 0.0
    horizon: float = 10.0
    dt: float = 1e-3
    x_history: Callable[[float], np.ndarray] | None = None
    r_history: Callable[[float], np.ndarray] | None = None
    x0: np.ndarray | None = None
    seed: int | None = None
    init_std: float = 1.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if self.init_std < 0:
            raise ConfigError("init_std must be non-negative")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))


def initial_state(net: MultiplexNetwork, cfg: SimConfig) -> np.ndarray:
    """x(t0): explicit x0, else the history at t0, else N(0, std^2) draws, else x*(t0)."""
    if cfg.x0 is not None:
        return np.asarray(cfg.x0, dtype=float).reshape(net.N, net.n).copy()
    if cfg.x_history is not None:
        return np.asarray(cfg.x_history(cfg.t0), dtype=float).reshape(net.N, net.n).copy()
    if cfg.seed is not None:
        rng = np.random.default_rng(cfg.seed)
        return net.desired_state(cfg.t0) + cfg.init_std * rng.standard_normal((net.N, net.n))
    return net.desired_state(cfg.t0)


def check_step(net: MultiplexNetwork, cfg: SimConfig) -> float:
    """Median of sampled positive delays; raises when dt exceeds a tenth of it.

    The median is used instead of the infimum because oscillating delays may
    touch zero at isolated instants.
    """
    if net.q == 0:
        return math.inf
    ts = np.linspace(cfg.t0, cfg.t0 + cfg.horizon, TAU_SAMPLES)
    taus = net.delays.sample(ts)
    if np.any(taus < -1e-12) or np.any(taus > net.tau_max + 1e-12):
        raise ScheduleError("sampled delay outside [0, tau_max]")
    pos = taus[taus > 0]
    if pos.size == 0:
        return math.inf
    ref = float(np.median(pos))
    if cfg.dt > ref / DT_GUARD_DIVISOR:
        raise ConfigError(f"dt={cfg.dt} exceeds median delay / {DT_GUARD_DIVISOR:g} = {ref / DT_GUARD_DIVISOR:.3g}")
    return ref


class HistoryBuffer:
    """Mesh values and derivatives of x with dense output for delayed lookups."""

    def __init__(self, t0: float, dt: float, steps: int, shape, phi: Callable[[float], np.ndarray]):
        self.t0, self.dt = t0, dt
        self.X = np.zeros((steps + 1, *shape))
        self.D = np.zeros((steps + 1, *shape))
        self.last = -1          # index of the newest stored value
        self.have_deriv = -1    # index of the newest stored derivative
        self.phi = phi

    def push(self, x: np.ndarray) -> None:
        self.last += 1
        self.X[self.last] = x

    def set_derivative(self, k: int, dx: np.ndarray) -> None:
        self.D[k] = dx
        self.have_deriv = max(self.have_deriv, k)

    def mesh_time(self, k: int) -> float:
        return self.t0 + k * self.dt

    def lookup(self, s: np.ndarray, agents: np.ndarray) -> np.ndarray:
        """x_agent(s) for paired arrays of times and agent indices."""
        s = np.asarray(s, dtype=float)
        before = s < self.t0
        if not before.any():
            return self._dense(s, agents)
        out = np.empty((s.size, self.X.shape[-1]))
        cache = {}
        for idx in np.nonzero(before)[0]:
            key = float(s[idx])
            if key not in cache:
                cache[key] = np.asarray(self.phi(key), dtype=float)
            out[idx] = cache[key][agents[idx]]
        after = ~before
        if np.any(after):
            out[after] = self._dense(s[after], agents[after])
        return out

    def _dense(self, s, agents):
        dt = self.dt
        pos = (s - self.t0) / dt
        k = np.floor(pos).astype(int)
        k = np.clip(k, 0, max(self.last - 1, 0))
        theta = pos - k
        if self.last == 0:
            # only x(t0) known: first-order extrapolation with its derivative
            return self.X[0][agents] + (s - self.t0)[:, None] * self.D[0][agents]
        x0, x1 = self.X[k, agents], self.X[k + 1, agents]
        d0 = self.D[k, agents] * dt
        # the quadratic fallback is the Hermite cubic with end slope 2 (x1 - x0) - d0
        cubic = ((k + 1) <= self.have_deriv)[:, None]
        d1 = np.where(cubic, self.D[k + 1, agents] * dt, 2.0 * (x1 - x0) - d0)
        t_ = theta[:, None]
        t2 = t_ * t_
        t3 = t2 * t_
        out = ((2 * t3 - 3 * t2 + 1) * x0 + (t3 - 2 * t2 + t_) * d0
               + (-2 * t3 + 3 * t2) * x1 + (t3 - t2) * d1)
        # mesh points return the stored value bit for bit
        kr = np.rint(pos).astype(int)
        snap = (np.abs(pos - kr) <= 1e-9) & (kr <= self.last) & (kr >= 0)
        if snap.any():
            out[snap] = self.X[kr[snap], agents[snap]]
        return out


@dataclass
class _Compiled:
    """Dense matrices for the linear parts of the closed loop."""

    A: np.ndarray | None            # (Nn, Nn) intrinsic, block diagonal
    P: np.ndarray                   # (Nn, Nn) plant interconnections
    H: np.ndarray                   # (m+1, Nn, Nn) delay-free controller layers
    dl_target: np.ndarray           # (C,) target agent of each delayed linear channel
    dl_source: np.ndarray           # (C,) source agent (or -1)
    dl_slot: np.ndarray             # (C,) relabelled delay index
    dl_gt: np.ndarray               # (C, m+1, n, n)
    dl_gs: np.ndarray
    generic: list = field(default_factory=list)


def _compile(net: MultiplexNetwork) -> _Compiled:
    N, n, m = net.N, net.n, net.m
    Nn = N * n
    A = None
    if all(a.matrix is not None for a in net.agents):
        A = np.zeros((Nn, Nn))
        for i, a in enumerate(net.agents):
            A[i * n:(i + 1) * n, i * n:(i + 1) * n] = a.matrix
    P = np.zeros((Nn, Nn))
    H = np.zeros((m + 1, Nn, Nn))
    tg, sr, sl, gts, gss, generic = [], [], [], [], [], []
    for c in net.channels:
        if not c.linear or (c.is_leader and not c.delayed):
            generic.append(c)
            continue
        i, j = c.target, c.source
        si = slice(i * n, (i + 1) * n)
        if c.delayed:
            tg.append(i)
            sr.append(j)
            sl.append(net.delays.index(c.pair))
            gts.append(c.gain_target)
            gss.append(c.gain_source)
        elif c.plant:
            P[si, si] += c.gain_target[0]
            P[si, j * n:(j + 1) * n] += c.gain_source[0]
        else:
            H[:, si, si] += c.gain_target
            H[:, si, j * n:(j + 1) * n] += c.gain_source
    shape = (0, m + 1, n, n)
    return _Compiled(A, P, H, np.array(tg, dtype=int), np.array(sr, dtype=int), np.array(sl, dtype=int),
                     np.array(gts).reshape(-1, m + 1, n, n) if gts else np.zeros(shape),
                     np.array(gss).reshape(-1, m + 1, n, n) if gss else np.zeros(shape), generic)


class _Rhs:
    def __init__(self, net: MultiplexNetwork, hist: HistoryBuffer):
        self.net = net
        self.hist = hist
        self.c = _compile(net)
        c = self.c
        self.leader_delayed = c.dl_source == -1
        # lookup index arrays: targets then sources (leader sources looked up separately)
        self.src_safe = np.where(self.leader_delayed, 0, c.dl_source)
        self.lookup_agents = np.concatenate([c.dl_target, self.src_safe])
        self.any_leader = bool(np.any(self.leader_delayed))

    def __call__(self, t: float, x: np.ndarray, r: np.ndarray):
        """Returns (x', r', u) for x (N, n), r (N, m, n)."""
        net, c = self.net, self.c
        N, n, m = net.N, net.n, net.m
        xf = x.reshape(-1)
        if c.A is not None:
            fx = (c.A @ xf).reshape(N, n)
        else:
            fx = np.stack([a.f(x[i], t) for i, a in enumerate(net.agents)])
        h = np.einsum("kab,b->ka", c.H, xf).reshape(m + 1, N, n).transpose(1, 0, 2).copy()
        plant = (c.P @ xf).reshape(N, n)
        if c.dl_target.size:
            taus = net.delays(t)
            if taus.min() < -1e-12 or taus.max() > net.tau_max + 1e-12:
                raise ScheduleError(f"delay outside [0, {net.tau_max}] at t={t}")
            s = t - taus[c.dl_slot]
            both = self.hist.lookup(np.concatenate([s, s]), self.lookup_agents)
            C = s.size
            xt, xs = both[:C], both[C:]
            if self.any_leader:
                for idx in np.nonzero(self.leader_delayed)[0]:
                    xs[idx] = net.leader_state(float(s[idx]))
            contrib = np.einsum("ckab,cb->cka", c.dl_gt, xt) + np.einsum("ckab,cb->cka", c.dl_gs, xs)
            np.add.at(h, c.dl_target, contrib)
        if c.generic:
            self._generic(t, x, h, plant)
        u = h[:, 0, :] + (r[:, 0, :] if m > 0 else 0.0)
        rdot = h[:, 1:, :].copy()
        if m > 1:
            rdot[:, :-1, :] += r[:, 1:, :]
        xdot = fx + plant + u + net.disturbance(t)
        return xdot, rdot, u

    def _generic(self, t, x, h, plant):
        net = self.net
        taus = net.delays(t) if net.q else None
        for c in self.c.generic:
            if c.delayed:
                tau = taus[net.delays.index(c.pair)]
                if tau < -1e-12 or tau > net.tau_max + 1e-12:
                    raise ScheduleError(f"delay outside [0, {net.tau_max}] at t={t}")
                s = t - tau
                xt = self.hist.lookup(np.array([s]), np.array([c.target]))[0]
                if c.is_leader:
                    xs = net.leader_state(s)
                else:
                    xs = self.hist.lookup(np.array([s]), np.array([c.source]))[0]
            else:
                xt = x[c.target]
                xs = net.leader_state(t) if c.is_leader else x[c.source]
            val = c.evaluate(xt, xs, t)
            if c.plant:
                plant[c.target] += val[0]
            else:
                h[c.target] += val


@dataclass
class Trace:
    times: np.ndarray
    x: np.ndarray           # (K, N, n)
    r: np.ndarray           # (K, N, m, n)
    u: np.ndarray           # (K, N, n)
    y: np.ndarray           # (K, N, ny)
    error: np.ndarray       # (K,) composite output error
    zeta: np.ndarray        # (K, N, m, n)
    zeta_norm: np.ndarray   # (K,) sum_k ||zeta_k||_cmpst
    state_hist_sup: float
    zeta_hist_sup: float
    spec: NormSpec
    config: SimConfig

    def to_csv(self, path, stride: int = 1) -> None:
        """One row per (strided) mesh point, 17 significant digits."""
        K, N, n = self.x.shape
        m = self.r.shape[2]
        cols = ["t"]
        cols += [f"x_{i}_{a}" for i in range(N) for a in range(n)]
        cols += [f"r_{i}_{k + 1}_{a}" for i in range(N) for k in range(m) for a in range(n)]
        cols += [f"u_{i}_{a}" for i in range(N) for a in range(n)]
        cols += ["y_err"]
        data = np.column_stack([self.times, self.x.reshape(K, -1), self.r.reshape(K, -1),
                                self.u.reshape(K, -1), self.error])[::stride]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in data:
                w.writerow(["%.17g" % v for v in row])

    def metadata(self) -> dict:
        cfg = self.config
        return {
            "t0": cfg.t0, "horizon": cfg.horizon, "dt": cfg.dt, "seed": cfg.seed,
            "init_std": cfg.init_std, "points": int(self.times.size),
            "agents": int(self.x.shape[1]), "state_dim": int(self.x.shape[2]),
            "layers": int(self.r.shape[2]),
            "state_hist_sup": self.state_hist_sup, "zeta_hist_sup": self.zeta_hist_sup,
        }

    def write(self, csv_path, meta_path, stride: int = 1, extra: dict | None = None) -> None:
        self.to_csv(csv_path, stride)
        meta = self.metadata()
        meta["stride"] = stride
        if extra:
            meta.update(extra)
        with open(meta_path, "w") as fh:
            json.dump(meta, fh, indent=2)


def _composite(vals: np.ndarray, spec: NormSpec) -> np.ndarray:
    """max_i ||vals[..., i, :]||_p / eta_i over the agent axis (second to last)."""
    norms = np.linalg.norm(vals, ord=spec.local_p, axis=-1)
    return np.max(norms / spec.weights, axis=-1)


def zeta_series(net: MultiplexNetwork, times: np.ndarray, r: np.ndarray) -> np.ndarray:
    """zeta_{i,k}(t) = r_{i,k}(t) + offset_k(t) for every sample."""
    times = np.asarray(times, dtype=float)
    return np.asarray(r, dtype=float) + _zeta_offsets(net, times)


def _zeta_offsets(net: MultiplexNetwork, times: np.ndarray) -> np.ndarray:
    """(K, N, m, n) offsets, vectorised over time via monomial powers."""
    m = net.m
    poly = net.disturbance.poly   # (N, m, n)
    out = np.zeros((times.size, net.N, m, net.n))
    for k in range(1, m + 1):
        for b in range(m - k + 1):
            coeff = math.factorial(m - 1 - b) / math.factorial(m - k - b)
            out[:, :, k - 1, :] += coeff * poly[None, :, m - 1 - b, :] * (times ** (m - k - b))[:, None, None]
    return out


def history_sups(net: MultiplexNetwork, cfg: SimConfig, spec: NormSpec, x_hist, r_hist) -> tuple[float, float]:
    """sup ||x - x*||_cmpst and sum_k sup ||zeta_k||_cmpst over [t0 - tau_max, t0]."""
    if net.tau_max > 0:
        ss = np.linspace(cfg.t0 - net.tau_max, cfg.t0, HISTORY_SAMPLES)
    else:
        ss = np.array([cfg.t0])
    xs = np.stack([x_hist(s) - net.desired_state(s) for s in ss])
    state = float(np.max(_composite(xs, spec)))
    if net.m == 0:
        return state, 0.0
    rs = np.stack([r_hist(s) for s in ss]) + _zeta_offsets(net, ss)
    zsum = 0.0
    for k in range(net.m):
        zsum += float(np.max(_composite(rs[:, :, k, :], spec)))
    return state, zsum


def simulate(net: MultiplexNetwork, cfg: SimConfig, spec: NormSpec | None = None) -> Trace:
    N, n, m = net.N, net.n, net.m
    spec = NormSpec.uniform(N) if spec is None else spec
    check_step(net, cfg)
    steps = cfg.steps
    dt = cfg.dt
    x0 = initial_state(net, cfg)
    if cfg.x_history is not None and cfg.x0 is None:
        x_hist = lambda s: np.asarray(cfg.x_history(s), dtype=float).reshape(N, n)
    else:
        x_hist = lambda s: x0
    if cfg.r_history is not None:
        r_hist = lambda s: np.asarray(cfg.r_history(s), dtype=float).reshape(N, m, n)
    else:
        r_hist = lambda s: np.zeros((N, m, n))
    r0 = r_hist(cfg.t0).copy()

    hist = HistoryBuffer(cfg.t0, dt, steps, (N, n), x_hist)
    rhs = _Rhs(net, hist)
    times = cfg.t0 + dt * np.arange(steps + 1)
    X = hist.X
    Rs = np.zeros((steps + 1, N, m, n))
    U = np.zeros((steps + 1, N, n))
    x, r = x0, r0
    hist.push(x)
    Rs[0] = r
    h2 = 0.5 * dt
    for k in range(steps):
        t = times[k]
        k1x, k1r, u = rhs(t, x, r)
        hist.set_derivative(k, k1x)
        U[k] = u
        k2x, k2r, _ = rhs(t + h2, x + h2 * k1x, r + h2 * k1r)
        k3x, k3r, _ = rhs(t + h2, x + h2 * k2x, r + h2 * k2r)
        k4x, k4r, _ = rhs(t + dt, x + dt * k3x, r + dt * k3r)
        x = x + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        r = r + (dt / 6.0) * (k1r + 2 * k2r + 2 * k3r + k4r)
        hist.push(x)
        Rs[k + 1] = r
    dx, _, u = rhs(times[-1], x, r)
    hist.set_derivative(steps, dx)
    U[steps] = u

    Y = np.stack([net.output(X[k]) for k in range(steps + 1)]) if _has_output(net) else X.copy()
    Ystar = _desired_outputs(net, times)
    err = _composite(Y - Ystar, spec)
    Z = Rs + _zeta_offsets(net, times) if m else Rs.copy()
    znorm = np.zeros(steps + 1)
    for j in range(m):
        znorm += _composite(Z[:, :, j, :], spec)
    hs, zs = history_sups(net, cfg, spec, x_hist, r_hist)
    return Trace(times, X.copy(), Rs, U, Y, err, Z, znorm, hs, zs, spec, cfg)


def _has_output(net: MultiplexNetwork) -> bool:
    return any(a.output is not None for a in net.agents)


def _desired_outputs(net: MultiplexNetwork, times: np.ndarray) -> np.ndarray:
    if net.desired is None and not _has_output(net):
        return np.zeros((times.size, net.N, net.n))
    return np.stack([net.output(net.desired_state(float(t))) for t in times])


@dataclass(frozen=True)
class ErrorMetrics:
    tail_sup: float
    settle_time: float
    zeta_tail_sup: float
    final_error: float

    def to_dict(self) -> dict:
        settle = self.settle_time if math.isfinite(self.settle_time) else None
        return {"tail_sup": self.tail_sup, "settle_time": settle,
                "zeta_tail_sup": self.zeta_tail_sup, "final_error": self.final_error}


def error_metrics(trace: Trace, tail: float = 5.0, threshold: float = 1e-3) -> ErrorMetrics:
    """Tail sups of the composite output error and zeta norms, and the settle time.

    ``settle_time`` is the first mesh time after which the error stays below
    ``threshold`` (inf if it never does).
    """
    t = trace.times
    mask = t >= t[-1] - tail - 1e-12
    above = np.nonzero(trace.error >= threshold)[0]
    if above.size == 0:
        settle = float(t[0])
    elif above[-1] == t.size - 1:
        settle = math.inf
    else:
        settle = float(t[above[-1] + 1])
    return ErrorMetrics(float(np.max(trace.error[mask])), settle,
                        float(np.max(trace.zeta_norm[mask])), float(trace.error[-1]))
