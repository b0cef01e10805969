"""Network model with multiplex integral control and delayed communication.

Each agent ``i`` has state ``x_i`` in R^n and integrator layers
``r_{i,1}, ..., r_{i,m}``.  Couplings are described channel by channel: a
:class:`Channel` carries information from a source (another agent, the agent
itself, or the leader) to a target agent and contributes to all ``m + 1``
layers at once, so the per-layer coupling functions ``h_{i,k}`` are the sums
of the channel contributions for layer ``k``.  A delayed channel evaluates
both of its arguments at ``t - tau_ij(t)``.

Closed loop::

    x_i'     = f_i(x_i, t) + p_i(x) + u_i + d_i(t)
    u_i      = h_{i,0} + h_{i,0}^tau + r_{i,1}
    r_{i,k}' = h_{i,k} + h_{i,k}^tau + r_{i,k+1}      (r_{i,m+1} = 0)

``p_i`` collects optional plant interconnections (physical links such as
line currents): delay-free, state equation only, and not part of ``u_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, HistoryUnderflowError, ModelError

LEADER = -1

Field = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class AgentDynamics:
    """Intrinsic dynamics ``f_i`` with its Jacobian, plus the output map."""

    dim: int
    field: Field
    jacobian: Field
    output: Callable[[np.ndarray], np.ndarray] | None = None
    output_lipschitz: float = 1.0
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionError("agent state dimension must be >= 1")
        if self.output_lipschitz < 0:
            raise ModelError("output Lipschitz constant must be >= 0")

    @classmethod
    def linear(cls, A, output=None, output_lipschitz: float = 1.0) -> "AgentDynamics":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"dynamics matrix must be square, got {A.shape}")
        A.setflags(write=False)
        return cls(A.shape[0], lambda x, t: A @ x, lambda x, t: A,
                   output=output, output_lipschitz=output_lipschitz, matrix=A)

    def f(self, x, t: float) -> np.ndarray:
        return np.asarray(self.field(np.asarray(x, dtype=float), t), dtype=float).reshape(self.dim)

    def jac(self, x, t: float) -> np.ndarray:
        return np.asarray(self.jacobian(np.asarray(x, dtype=float), t), dtype=float).reshape(self.dim, self.dim)

    def g(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x.copy() if self.output is None else np.asarray(self.output(x), dtype=float).ravel()


@dataclass(frozen=True)
class Channel:
    """One coupling channel feeding agent ``target``.

    Contributions are stacked over layers: ``evaluate`` returns an
    ``(m + 1, n)`` array whose row ``k`` is added to ``h_{target,k}`` (or to
    the delayed ``h^tau`` when ``delayed``).  Linear channels carry gain
    stacks of shape ``(m + 1, n, n)``:

        contribution[k] = gain_target[k] @ x_target + gain_source[k] @ x_source
    """

    target: int
    source: int
    delayed: bool
    gain_target: np.ndarray | None = None
    gain_source: np.ndarray | None = None
    func: Callable | None = None
    jac: Callable | None = None
    plant: bool = False

    def __post_init__(self):
        if self.plant and self.delayed:
            raise ModelError("plant interconnections are delay-free")
        if self.func is None and (self.gain_target is None or self.gain_source is None):
            raise ModelError("channel needs either gain stacks or a function")
        if self.func is not None and self.jac is None:
            raise ModelError("nonlinear channel needs a Jacobian supplier")
        if self.gain_target is not None:
            gt = np.asarray(self.gain_target, dtype=float)
            gs = np.asarray(self.gain_source, dtype=float)
            if gt.ndim != 3 or gt.shape != gs.shape or gt.shape[1] != gt.shape[2]:
                raise DimensionError(f"gain stacks must be (m+1, n, n), got {gt.shape} / {gs.shape}")
            if self.plant and (np.any(gt[1:]) or np.any(gs[1:])):
                raise ModelError("plant interconnections act on the state equation only")
            gt.setflags(write=False)
            gs.setflags(write=False)
            object.__setattr__(self, "gain_target", gt)
            object.__setattr__(self, "gain_source", gs)

    @property
    def linear(self) -> bool:
        return self.func is None

    @property
    def is_self(self) -> bool:
        return self.source == self.target

    @property
    def is_leader(self) -> bool:
        return self.source == LEADER

    @property
    def pair(self) -> tuple[int, int]:
        return (self.target, self.source)

    def evaluate(self, x_target, x_source, t: float) -> np.ndarray:
        if self.linear:
            return (np.einsum("kab,b->ka", self.gain_target, x_target)
                    + np.einsum("kab,b->ka", self.gain_source, x_source))
        return np.asarray(self.func(x_target, x_source, t), dtype=float)

    def jacobians(self, x_target, x_source, t: float) -> tuple[np.ndarray, np.ndarray]:
        if self.linear:
            return self.gain_target, self.gain_source
        jt, js = self.jac(x_target, x_source, t)
        return np.asarray(jt, dtype=float), np.asarray(js, dtype=float)

    @classmethod
    def self_term(cls, i: int, gains) -> "Channel":
        gains = _stack(gains)
        return cls(i, i, False, gains, np.zeros_like(gains))

    @classmethod
    def diffusive(cls, i: int, j: int, gains, delayed: bool = False) -> "Channel":
        """gains[k] @ (x_j - x_i), with both arguments delayed when ``delayed``."""
        gains = _stack(gains)
        return cls(i, j, delayed, -gains, gains)

    @classmethod
    def line(cls, i: int, j: int, gain, order: int) -> "Channel":
        """Plant-side diffusive term gain @ (x_j - x_i) in the state equation of i.

        It enters x_i' directly and is not part of the control u_i.
        """
        g = np.atleast_2d(np.asarray(gain, dtype=float))
        stack = np.zeros((order + 1, *g.shape))
        stack[0] = g
        return cls(i, j, False, -stack, stack, plant=True)

    @classmethod
    def leader_term(cls, i: int, gains, delayed: bool = False) -> "Channel":
        """gains[k] @ (x_l - x_i)."""
        gains = _stack(gains)
        return cls(i, LEADER, delayed, -gains, gains)


def _stack(gains) -> np.ndarray:
    """Accept scalars, per-layer scalars, or per-layer n x n gains."""
    g = np.asarray(gains, dtype=float)
    if g.ndim == 0:
        g = g.reshape(1, 1, 1)
    elif g.ndim == 1:
        g = g.reshape(-1, 1, 1)
    elif g.ndim == 2:
        g = g.reshape(1, *g.shape)
    return g


@dataclass(frozen=True)
class DelaySchedule:
    """Time-varying delays, one per delayed (target, source) pair.

    ``func(t)`` returns the delays of all pairs in ``pairs`` order.  The
    position of a pair in ``pairs`` is its relabelled delay index.
    """

    pairs: tuple[tuple[int, int], ...]
    func: Callable[[float], np.ndarray]
    tau_max: float
    description: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((int(a), int(b)) for a, b in self.pairs))
        if len(set(self.pairs)) != len(self.pairs):
            raise ModelError("duplicate delayed pair in schedule")
        if self.tau_max < 0:
            raise ModelError("tau_max must be >= 0")

    @property
    def q(self) -> int:
        return len(self.pairs)

    def __call__(self, t: float) -> np.ndarray:
        if not self.pairs:
            return np.zeros(0)
        return np.asarray(self.func(t), dtype=float).reshape(len(self.pairs))

    def index(self, pair) -> int:
        return self.pairs.index(tuple(pair))

    def sample(self, times) -> np.ndarray:
        return np.array([self(t) for t in times]).reshape(len(times), self.q)

    @classmethod
    def none(cls) -> "DelaySchedule":
        return cls((), lambda t: np.zeros(0), 0.0, {"kind": "none"})

    @classmethod
    def constant(cls, pairs, tau: float, tau_max: float | None = None) -> "DelaySchedule":
        pairs = tuple(pairs)
        vals = np.full(len(pairs), float(tau))
        return cls(pairs, lambda t: vals, float(tau if tau_max is None else tau_max),
                   {"kind": "constant", "value": float(tau)})

    @classmethod
    def sinusoidal(cls, pairs, base: float, amplitude: float, frequency: float = 1.0,
                   phase_step: float = 1.0, tau_max: float | None = None) -> "DelaySchedule":
        """tau_ij(t) = base + amplitude * sin(frequency * t + phase_step * (i + 1)).

        The phase depends on the receiving agent only (agents numbered from 1
        in the phase), so all channels into agent i share one delay value.
        """
        pairs = tuple(pairs)
        phase = phase_step * (np.array([p[0] for p in pairs], dtype=float) + 1.0)
        tmax = base + abs(amplitude) if tau_max is None else tau_max
        return cls(pairs, lambda t: base + amplitude * np.sin(frequency * t + phase), float(tmax),
                   {"kind": "sinusoidal", "base": base, "amplitude": amplitude,
                    "frequency": frequency, "phase_step": phase_step})


@dataclass(frozen=True)
class DisturbanceModel:
    """d_i(t) = w_i(t) + sum_k dbar_{i,k} t^k.

    ``poly`` has shape ``(N, m, n)``.  ``residual_sup[i]`` bounds
    ``sup_t ||w_i(t)||_1``, which dominates the 2- and inf-norms as well.
    ``residual_envelope(t)`` optionally gives a time-dependent per-agent bound.
    """

    poly: np.ndarray
    residual: Callable[[float], np.ndarray] | None = None
    residual_sup: np.ndarray | None = None
    residual_envelope: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        poly = np.asarray(self.poly, dtype=float)
        if poly.ndim != 3:
            raise DimensionError(f"poly coefficients must be (N, m, n), got {poly.shape}")
        poly.setflags(write=False)
        object.__setattr__(self, "poly", poly)
        sup = np.zeros(poly.shape[0]) if self.residual_sup is None else np.asarray(self.residual_sup, float)
        if sup.shape != (poly.shape[0],) or np.any(sup < 0):
            raise ModelError("residual_sup must be a non-negative per-agent vector")
        if self.residual is not None and self.residual_sup is None:
            raise ModelError("a residual needs a declared sup bound")
        object.__setattr__(self, "residual_sup", sup)

    @classmethod
    def zero(cls, N: int, m: int, n: int) -> "DisturbanceModel":
        return cls(np.zeros((N, m, n)))

    @property
    def order(self) -> int:
        return self.poly.shape[1]

    def polynomial(self, t: float) -> np.ndarray:
        m = self.order
        if m == 0:
            return np.zeros((self.poly.shape[0], self.poly.shape[2]))
        powers = t ** np.arange(m)
        return np.einsum("imn,m->in", self.poly, powers)

    def w(self, t: float) -> np.ndarray:
        if self.residual is None:
            return np.zeros((self.poly.shape[0], self.poly.shape[2]))
        return np.asarray(self.residual(t), dtype=float).reshape(self.poly.shape[0], self.poly.shape[2])

    def envelope(self, t: float) -> np.ndarray:
        if self.residual_envelope is None:
            return self.residual_sup.copy()
        return np.minimum(np.asarray(self.residual_envelope(t), dtype=float), self.residual_sup)

    def __call__(self, t: float) -> np.ndarray:
        return self.polynomial(t) + self.w(t)


@dataclass(frozen=True)
class MultiplexNetwork:
    """N agents, m integrator layers, coupling channels and delays."""

    agents: tuple[AgentDynamics, ...]
    order: int
    channels: tuple[Channel, ...]
    delays: DelaySchedule
    disturbance: DisturbanceModel
    leader: Callable[[float], np.ndarray] | None = None
    desired: Callable[[float], np.ndarray] | None = None
    name: str = "network"

    def __post_init__(self):
        agents = tuple(self.agents)
        if not agents:
            raise ModelError("network has no agents")
        n = agents[0].dim
        if any(a.dim != n for a in agents):
            raise DimensionError("all agents must share one state dimension")
        if self.order < 0:
            raise ModelError("order must be >= 0")
        object.__setattr__(self, "agents", agents)
        object.__setattr__(self, "channels", tuple(self.channels))
        N, m = len(agents), self.order
        for c in self.channels:
            if not (0 <= c.target < N) or not (c.source == LEADER or 0 <= c.source < N):
                raise ModelError(f"channel {c.pair} refers to a missing agent")
            if c.is_leader and self.leader is None:
                raise ModelError("leader channel without a leader signal")
            if c.linear and c.gain_target.shape != (m + 1, n, n):
                raise DimensionError(
                    f"channel {c.pair} gains have shape {c.gain_target.shape}, expected {(m + 1, n, n)}")
            if c.delayed and c.pair not in self.delays.pairs:
                raise ModelError(f"delayed channel {c.pair} has no delay in the schedule")
        dist = self.disturbance
        if dist.poly.shape != (N, m, n):
            raise DimensionError(
                f"disturbance coefficients {dist.poly.shape} do not match (N, m, n) = {(N, m, n)}")

    @property
    def N(self) -> int:
        return len(self.agents)

    @property
    def n(self) -> int:
        return self.agents[0].dim

    @property
    def m(self) -> int:
        return self.order

    @property
    def block_dim(self) -> int:
        return (self.order + 1) * self.n

    @property
    def q(self) -> int:
        return self.delays.q

    @property
    def tau_max(self) -> float:
        return self.delays.tau_max

    @property
    def output_lipschitz(self) -> float:
        return max(a.output_lipschitz for a in self.agents)

    def neighbors(self, i: int) -> list[int]:
        return sorted({c.source for c in self.channels
                       if c.target == i and c.source not in (i, LEADER)})

    def desired_state(self, t: float) -> np.ndarray:
        if self.desired is None:
            return np.zeros((self.N, self.n))
        return np.asarray(self.desired(t), dtype=float).reshape(self.N, self.n)

    def leader_state(self, t: float) -> np.ndarray:
        if self.leader is None:
            return np.zeros(self.n)
        return np.asarray(self.leader(t), dtype=float).reshape(self.n)

    def output(self, x: np.ndarray) -> np.ndarray:
        return np.stack([a.g(x[i]) for i, a in enumerate(self.agents)])


class FunctionHistory:
    """State history given as a function of time, valid on ``[start, inf)``."""

    def __init__(self, func: Callable[[float], np.ndarray], start: float = -math.inf):
        self.func = func
        self.start = start

    def __call__(self, s: float) -> np.ndarray:
        if s < self.start - 1e-12:
            raise HistoryUnderflowError(f"history requested at {s}, available from {self.start}")
        return np.asarray(self.func(s), dtype=float)


def control_input(net: MultiplexNetwork, x, r, history, t: float):
    """Controls u_i(t) and integrator derivatives r_{i,k}'(t).

    Parameters
    ----------
    x : (N, n) current states.
    r : (N, m, n) integrator states.
    history : callable s -> (N, n) states, covering ``[t - tau_max, t]``.
        Objects with a ``start`` attribute are checked for coverage.

    Returns
    -------
    u : (N, n)
    rdot : (N, m, n)

    Plant interconnections (``Channel.plant``) are excluded; see
    :func:`plant_coupling`.
    """
    N, n, m = net.N, net.n, net.m
    x = np.asarray(x, dtype=float).reshape(N, n)
    r = np.asarray(r, dtype=float).reshape(N, m, n)
    start = getattr(history, "start", -math.inf)
    if t - net.tau_max < start - 1e-12 and any(c.delayed for c in net.channels):
        raise HistoryUnderflowError(
            f"history starts at {start}, delayed lookups need {t - net.tau_max}")
    h = np.zeros((N, m + 1, n))
    taus = net.delays(t)
    cache: dict[float, np.ndarray] = {}
    for c in net.channels:
        if c.plant:
            continue
        if c.delayed:
            tau = taus[net.delays.index(c.pair)]
            s = t - tau
            if s not in cache:
                cache[s] = np.asarray(history(s), dtype=float).reshape(N, n)
            xs = cache[s]
            xt = xs[c.target]
            xsrc = net.leader_state(s) if c.is_leader else xs[c.source]
        else:
            xt = x[c.target]
            xsrc = net.leader_state(t) if c.is_leader else x[c.source]
        h[c.target] += c.evaluate(xt, xsrc, t)
    u = h[:, 0, :] + (r[:, 0, :] if m > 0 else 0.0)
    rdot = h[:, 1:, :].copy()
    if m > 1:
        rdot[:, :-1, :] += r[:, 1:, :]
    return u, rdot


def plant_coupling(net: MultiplexNetwork, x, t: float) -> np.ndarray:
    """Sum of plant interconnection terms entering each x_i'."""
    x = np.asarray(x, dtype=float).reshape(net.N, net.n)
    out = np.zeros((net.N, net.n))
    for c in net.channels:
        if c.plant:
            xsrc = net.leader_state(t) if c.is_leader else x[c.source]
            out[c.target] += c.evaluate(x[c.target], xsrc, t)[0]
    return out


def zeta_offset(m: int, k: int, dbar, t: float) -> np.ndarray:
    """Polynomial shift turning r_{i,k} into the disturbance-free coordinate.

    sum_{b=0}^{m-k} (m-1-b)! / (m-k-b)! * dbar[m-1-b] * t^(m-k-b)

    ``dbar`` holds the coefficient vectors ``dbar[0..m-1]`` of one agent
    (or an ``(..., m, n)`` stack; the sum runs over the second-to-last axis).
    """
    if not 1 <= k <= m:
        raise ModelError(f"layer index k={k} outside 1..{m}")
    dbar = np.asarray(dbar, dtype=float)
    count = dbar.shape[0] if dbar.ndim == 1 else dbar.shape[-2]
    if count != m:
        raise DimensionError(f"expected {m} coefficient vectors, got {count}")
    out = 0.0
    for b in range(m - k + 1):
        coeff = math.factorial(m - 1 - b) / math.factorial(m - k - b)
        term = dbar[..., m - 1 - b, :] if dbar.ndim >= 2 else dbar[m - 1 - b]
        out = out + coeff * term * t ** (m - k - b)
    return np.asarray(out, dtype=float)


def zeta_offset_coefficients(m: int, k: int) -> dict[int, tuple[int, float]]:
    """Map power of t -> (index of dbar, factorial ratio) for zeta_offset(k)."""
    return {m - k - b: (m - 1 - b, math.factorial(m - 1 - b) / math.factorial(m - k - b))
            for b in range(m - k + 1)}


@dataclass(frozen=True)
class ZetaCheck:
    passed: bool
    symbolic_error: float
    numeric_error: float


def zeta_derivative_check(m: int, dbar, times: Sequence[float] = (-1.3, 0.0, 0.7, 2.5),
                          h: float = 1e-4, tol: float = 1e-8) -> ZetaCheck:
    """Check d/dt offset_k = offset_{k+1} (k < m) and d/dt offset_m = 0.

    Symbolic: compare the monomial coefficients after differentiation.
    Numeric: fourth-order central differences at ``times``.
    """
    dbar = np.asarray(dbar, dtype=float)
    if dbar.ndim == 1:
        dbar = dbar[:, None]
    sym_err = 0.0
    num_err = 0.0
    for k in range(1, m + 1):
        lhs = {}
        for power, (idx, coeff) in zeta_offset_coefficients(m, k).items():
            if power > 0:
                lhs[power - 1] = coeff * power * dbar[idx]
        rhs = {}
        if k < m:
            rhs = {pw: c * dbar[idx] for pw, (idx, c) in zeta_offset_coefficients(m, k + 1).items()}
        for pw in set(lhs) | set(rhs):
            a = lhs.get(pw, 0.0)
            b = rhs.get(pw, 0.0)
            sym_err = max(sym_err, float(np.max(np.abs(np.asarray(a) - np.asarray(b)))))
        for t in times:
            f = lambda s: zeta_offset(m, k, dbar, s)
            deriv = (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)
            target = zeta_offset(m, k + 1, dbar, t) if k < m else np.zeros_like(deriv)
            scale = max(1.0, float(np.max(np.abs(target))))
            num_err = max(num_err, float(np.max(np.abs(deriv - target))) / scale)
    return ZetaCheck(sym_err <= tol and num_err <= tol, sym_err, num_err)


@dataclass
class JacobianBlocks:
    """Augmented Jacobian blocks at one sample point.

    diag : (N, D, D) blocks A~_ii
    off : {(i, j): (D, D)} delay-free neighbour blocks A~_ij, j != i
    delayed : list over relabelled delays k of {(i, j): (D, D)} blocks (B~_k)_ij
    """

    diag: np.ndarray
    off: dict
    delayed: list


def assemble_jacobian_blocks(net: MultiplexNetwork, x=None, t: float = 0.0, x_leader=None) -> JacobianBlocks:
    """Augmented Jacobian blocks of the closed loop at ``(x, x_l, t)``.

    The first block column of each block stacks the layer Jacobians
    dh_{i,k}/dx_j; the diagonal blocks also carry the integrator chain as
    identities on the block superdiagonal.
    """
    N, n, m = net.N, net.n, net.m
    D = (m + 1) * n
    x = net.desired_state(t) if x is None else np.asarray(x, dtype=float).reshape(N, n)
    xl = net.leader_state(t) if x_leader is None else np.asarray(x_leader, dtype=float).reshape(n)
    diag = np.zeros((N, D, D))
    for i, agent in enumerate(net.agents):
        diag[i, :n, :n] = agent.jac(x[i], t)
        for k in range(m):
            diag[i, k * n:(k + 1) * n, (k + 1) * n:(k + 2) * n] = np.eye(n)
    off: dict = {}
    delayed: list = [dict() for _ in range(net.q)]
    for c in net.channels:
        xsrc = xl if c.is_leader else x[c.source]
        jt, js = c.jacobians(x[c.target], xsrc, t)
        if jt.shape != (m + 1, n, n) or js.shape != (m + 1, n, n):
            raise ModelError(f"channel {c.pair} Jacobian has the wrong shape")
        col_t = jt.reshape(D, n)
        col_s = js.reshape(D, n)
        i = c.target
        if not c.delayed:
            diag[i, :, :n] += col_t
            if c.is_self:
                diag[i, :, :n] += col_s
            elif not c.is_leader:
                blk = off.setdefault((i, c.source), np.zeros((D, D)))
                blk[:, :n] += col_s
        else:
            slot = delayed[net.delays.index(c.pair)]
            blk = slot.setdefault((i, i), np.zeros((D, D)))
            blk[:, :n] += col_t
            if c.is_self:
                blk[:, :n] += col_s
            elif not c.is_leader:
                blk = slot.setdefault((i, c.source), np.zeros((D, D)))
                blk[:, :n] += col_s
    return JacobianBlocks(diag, off, delayed)


@dataclass(frozen=True)
class C1Verdict:
    passed: bool
    max_delay_free: float
    max_delayed: float


def verify_c1(net: MultiplexNetwork, times: Sequence[float], tol: float = 1e-10) -> C1Verdict:
    """All coupling functions vanish along the desired solution."""
    N, n, m = net.N, net.n, net.m
    worst_free = worst_del = 0.0
    for t in times:
        xs = net.desired_state(t)
        h = np.zeros((N, m + 1, n))
        hd = np.zeros((N, m + 1, n))
        for c in net.channels:
            xsrc = net.leader_state(t) if c.is_leader else xs[c.source]
            (hd if c.delayed else h)[c.target] += c.evaluate(xs[c.target], xsrc, t)
        worst_free = max(worst_free, float(np.max(np.abs(h))) if h.size else 0.0)
        worst_del = max(worst_del, float(np.max(np.abs(hd))) if hd.size else 0.0)
    return C1Verdict(max(worst_free, worst_del) <= tol, worst_free, worst_del)


def check_desired_solution(net: MultiplexNetwork, times: Sequence[float], h: float = 1e-5) -> float:
    """Max relative mismatch between d/dt x* (central differences) and f(x*, t)."""
    worst = 0.0
    for t in times:
        dx = (net.desired_state(t + h) - net.desired_state(t - h)) / (2 * h)
        xs = net.desired_state(t)
        for i, a in enumerate(net.agents):
            fx = a.f(xs[i], t)
            worst = max(worst, float(np.max(np.abs(dx[i] - fx))) / max(1.0, float(np.max(np.abs(fx)))))
    return worst


def check_jacobians(net: MultiplexNetwork, points, h: float = 1e-6) -> float:
    """Max relative error of the supplied Jacobians against central differences.

    ``points`` is a sequence of ``(x, t)`` with ``x`` of shape (N, n).
    """
    n = net.n
    worst = 0.0

    def rel(a, b):
        return float(np.max(np.abs(a - b))) / max(1.0, float(np.max(np.abs(b))))

    eye = np.eye(n)
    for x, t in points:
        x = np.asarray(x, dtype=float).reshape(net.N, n)
        for i, a in enumerate(net.agents):
            fd = np.column_stack([(a.f(x[i] + h * eye[c], t) - a.f(x[i] - h * eye[c], t)) / (2 * h)
                                  for c in range(n)])
            worst = max(worst, rel(a.jac(x[i], t), fd))
        xl = net.leader_state(t)
        for ch in net.channels:
            if ch.linear:
                continue
            xt = x[ch.target]
            xs = xl if ch.is_leader else x[ch.source]
            jt, js = ch.jacobians(xt, xs, t)
            fdt = np.stack([(ch.evaluate(xt + h * eye[c], xs, t) - ch.evaluate(xt - h * eye[c], xs, t)) / (2 * h)
                            for c in range(n)], axis=-1)
            fds = np.stack([(ch.evaluate(xt, xs + h * eye[c], t) - ch.evaluate(xt, xs - h * eye[c], t)) / (2 * h)
                            for c in range(n)], axis=-1)
            worst = max(worst, rel(jt, fdt), rel(js, fds))
    return worst
