"""JSON input formats for networks, transforms, norms, simulation and search.

Network files use built-in linear kinds only::

    {
      "agents": 3, "dim": 1, "order": 1,
      "dynamics": {"kind": "linear", "matrix": [[-1.0]]},
      "topology": {"kind": "ring"}            # or {"kind": "edges", "edges": [[i, j], ...]}
      "layers": {"self": [-1.0, -0.5], "diffusive": [0.2, 0.0], "delayed": [0.05, 0.0]},
      "delays": {"kind": "constant", "value": 0.1},
      "disturbance": {"poly": {"0": [[1.0]]},
                      "residual": {"kind": "decaying_sine", "agents": [0], "amplitude": 1, "decay": 0.2}},
      "leader": {"kind": "constant", "value": [0.0]},
      "desired": {"kind": "zero"}
    }

An edge ``[i, j]`` means agent i receives from agent j.  Layer gains list one
entry per layer (scalar or n x n).  ``{"dynamics": {"kind": "mtdc", ...}}``
builds the ring case study directly.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .certify import Transformation
from .errors import ContractNetError, SpecParseError
from .linalg import NormSpec
from .netmodel import AgentDynamics, Channel, DelaySchedule, DisturbanceModel, MultiplexNetwork
from .simulator import SimConfig
from .synthesis import MtdcPlant, SearchConfig, TransformParams


def load_json(path) -> dict:
    """Parse a JSON file, reporting syntax errors as path:line:col."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecParseError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise SpecParseError(f"{path}:1:1: top-level value must be an object")
    return data


def _locate(text: str, key: str) -> str:
    """line:col of the first occurrence of a key, for semantic errors."""
    idx = text.find(f'"{key}"')
    if idx < 0:
        return "1:1"
    line = text.count("\n", 0, idx) + 1
    col = idx - (text.rfind("\n", 0, idx) + 1) + 1
    return f"{line}:{col}"


class _Ctx:
    def __init__(self, path):
        self.path = Path(path) if path is not None else None
        try:
            self.text = self.path.read_text() if self.path else ""
        except OSError:
            self.text = ""

    def fail(self, key: str, msg: str):
        where = f"{self.path}:{_locate(self.text, key)}" if self.path else f"<{key}>"
        raise SpecParseError(f"{where}: {msg}")


def _req(d: dict, key: str, ctx: _Ctx):
    if key not in d:
        ctx.fail(key, f"missing required field {key!r}")
    return d[key]


def _layer_stack(val, m: int, n: int, key: str, ctx: _Ctx) -> np.ndarray:
    try:
        arr = [np.asarray(v, dtype=float) for v in val]
    except (TypeError, ValueError):
        ctx.fail(key, f"{key!r} must list one gain per layer")
    if len(arr) != m + 1:
        ctx.fail(key, f"{key!r} needs {m + 1} layer gains, got {len(arr)}")
    out = np.zeros((m + 1, n, n))
    for k, g in enumerate(arr):
        if g.ndim == 0:
            out[k] = g * np.eye(n)
        elif g.shape == (n, n):
            out[k] = g
        else:
            ctx.fail(key, f"layer {k} of {key!r} must be a scalar or {n}x{n}")
    return out


def _edges(topo: dict, N: int, ctx: _Ctx) -> list[tuple[int, int]]:
    kind = topo.get("kind", "edges")
    if kind == "ring":
        if N < 2:
            ctx.fail("topology", "ring needs at least 2 agents")
        out = []
        for i in range(N):
            for j in sorted({(i - 1) % N, (i + 1) % N} - {i}):
                out.append((i, j))
        return out
    if kind == "complete":
        return [(i, j) for i in range(N) for j in range(N) if i != j]
    if kind == "edges":
        edges = []
        for e in topo.get("edges", []):
            if len(e) != 2 or not all(isinstance(v, int) for v in e):
                ctx.fail("edges", f"edge {e!r} must be a pair of agent indices")
            i, j = e
            if not (0 <= i < N and 0 <= j < N) or i == j:
                ctx.fail("edges", f"edge {e!r} out of range or a self-loop")
            edges.append((i, j))
        if len(set(edges)) != len(edges):
            ctx.fail("edges", "duplicate edge")
        return edges
    ctx.fail("topology", f"unknown topology kind {kind!r}")


def _delays(spec: dict, pairs, ctx: _Ctx) -> DelaySchedule:
    if not pairs:
        return DelaySchedule.none()
    kind = spec.get("kind", "constant")
    tmax = spec.get("tau_max")
    if kind == "constant":
        tau = float(_req(spec, "value", ctx))
        if tau < 0:
            ctx.fail("value", "delay must be non-negative")
        return DelaySchedule.constant(pairs, tau, tmax)
    if kind == "sinusoidal":
        base = float(_req(spec, "base", ctx))
        amp = float(_req(spec, "amplitude", ctx))
        if base < abs(amp):
            ctx.fail("amplitude", "amplitude exceeds base: delays would turn negative")
        return DelaySchedule.sinusoidal(pairs, base, amp, float(spec.get("frequency", 1.0)),
                                        float(spec.get("phase_step", 1.0)), tmax)
    ctx.fail("delays", f"unknown delay kind {kind!r}")


def _disturbance(spec: dict, N: int, m: int, n: int, ctx: _Ctx) -> DisturbanceModel:
    poly = np.zeros((N, m, n))
    for key, coeffs in (spec.get("poly") or {}).items():
        try:
            i = int(key)
        except ValueError:
            ctx.fail("poly", f"poly key {key!r} must be an agent index")
        c = np.asarray(coeffs, dtype=float)
        if not 0 <= i < N or c.shape != (m, n):
            ctx.fail("poly", f"poly for agent {key} must be {m}x{n} and refer to an agent")
        poly[i] = c
    res = spec.get("residual") or {"kind": "none"}
    kind = res.get("kind", "none")
    if kind == "none":
        return DisturbanceModel(poly)
    if kind == "decaying_sine":
        agents = [int(a) for a in res.get("agents", [0])]
        amp = float(res.get("amplitude", 1.0))
        decay = float(res.get("decay", 0.0))
        freq = float(res.get("frequency", 1.0))
        if decay < 0 or any(not 0 <= a < N for a in agents):
            ctx.fail("residual", "decay must be >= 0 and agents in range")
        mask = np.zeros((N, n))
        mask[agents] = amp
        sup = np.abs(mask).sum(axis=1)

        def w(t):
            return mask * math.exp(-decay * t) * math.sin(freq * t)

        def env(t):
            return sup * math.exp(-decay * max(t, 0.0))

        return DisturbanceModel(poly, w, sup, env)
    ctx.fail("residual", f"unknown residual kind {kind!r}")


def _signal(spec: dict | None, n: int, ctx: _Ctx, key: str):
    if spec is None:
        return None
    kind = spec.get("kind", "constant")
    if kind == "constant":
        v = np.asarray(spec.get("value", [0.0] * n), dtype=float).reshape(n)
        return lambda t: v
    if kind == "sine":
        a = np.asarray(_req(spec, "amplitude", ctx), dtype=float).reshape(n)
        f = float(spec.get("frequency", 1.0))
        return lambda t: a * math.sin(f * t)
    ctx.fail(key, f"unknown {key} kind {kind!r}")


def network_from_dict(d: dict, path=None) -> MultiplexNetwork:
    ctx = _Ctx(path)
    dyn = d.get("dynamics", {"kind": "linear"})
    if dyn.get("kind") == "mtdc":
        from .mtdc import MtdcParams, build_mtdc
        gains = _req(dyn, "gains", ctx)
        params = {k: dyn[k] for k in ("terminals", "capacitance", "resistance", "capacitance_mode",
                                      "delay_base", "delay_amplitude", "disturbed_agent",
                                      "disturbance_on") if k in dyn}
        try:
            return build_mtdc(MtdcParams(**params), gains)
        except (TypeError, ContractNetError) as exc:
            ctx.fail("dynamics", str(exc))
    N = _req(d, "agents", ctx)
    if not isinstance(N, int) or N < 1:
        ctx.fail("agents", "network needs at least one agent")
    n = int(d.get("dim", 1))
    m = int(d.get("order", 0))
    if n < 1 or m < 0:
        ctx.fail("dim", "dim must be >= 1 and order >= 0")
    if dyn.get("kind", "linear") != "linear":
        ctx.fail("dynamics", f"unknown dynamics kind {dyn.get('kind')!r}")
    mats = dyn.get("matrices")
    if mats is None:
        mats = [dyn.get("matrix", np.zeros((n, n)).tolist())] * N
    if len(mats) != N:
        ctx.fail("matrices", f"need {N} dynamics matrices")
    agents = []
    for A in mats:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape != (n, n):
            ctx.fail("matrix", f"dynamics matrix must be {n}x{n}")
        agents.append(AgentDynamics.linear(A))
    edges = _edges(d.get("topology", {"kind": "edges", "edges": []}), N, ctx)
    layers = d.get("layers", {})
    chans = []
    if "self" in layers:
        g = _layer_stack(layers["self"], m, n, "self", ctx)
        chans += [Channel(i, i, False, g, np.zeros_like(g)) for i in range(N)]
    if "line" in layers:
        g = np.asarray(layers["line"], dtype=float) * np.eye(n) if np.ndim(layers["line"]) == 0 \
            else np.asarray(layers["line"], dtype=float)
        chans += [Channel.line(i, j, g, m) for i, j in edges]
    if "diffusive" in layers:
        g = _layer_stack(layers["diffusive"], m, n, "diffusive", ctx)
        chans += [Channel.diffusive(i, j, g) for i, j in edges]
    pairs = []
    if "delayed" in layers:
        g = _layer_stack(layers["delayed"], m, n, "delayed", ctx)
        chans += [Channel.diffusive(i, j, g, delayed=True) for i, j in edges]
        pairs = list(edges)
    leader = _signal(d.get("leader"), n, ctx, "leader")
    if "leader" in layers:
        if leader is None:
            ctx.fail("leader", "leader gains given without a leader signal")
        g = _layer_stack(layers["leader"], m, n, "leader", ctx)
        delayed = bool(layers.get("leader_delayed", False))
        chans += [Channel.leader_term(i, g, delayed) for i in range(N)]
        if delayed:
            pairs += [(i, -1) for i in range(N)]
    delays = _delays(d.get("delays", {}), pairs, ctx)
    dist = _disturbance(d.get("disturbance", {}), N, m, n, ctx)
    des = d.get("desired", {"kind": "zero"})
    desired = None
    if des.get("kind") == "leader":
        if leader is None:
            ctx.fail("desired", "desired solution follows a leader that is not defined")
        desired = lambda t: np.tile(leader(t), (N, 1))
    elif des.get("kind") == "constant":
        v = np.asarray(_req(des, "value", ctx), dtype=float).reshape(N, n)
        desired = lambda t: v
    elif des.get("kind", "zero") != "zero":
        ctx.fail("desired", f"unknown desired kind {des.get('kind')!r}")
    try:
        return MultiplexNetwork(tuple(agents), m, tuple(chans), delays, dist, leader, desired,
                                name=str(d.get("name", "network")))
    except ContractNetError as exc:
        ctx.fail("agents", str(exc))


def load_network(path) -> MultiplexNetwork:
    return network_from_dict(load_json(path), path)


def transform_from_dict(d: dict, agents: int, dim: int, path=None) -> Transformation:
    ctx = _Ctx(path)
    try:
        if d.get("kind") == "identity":
            return Transformation.identity(agents, dim)
        if "alpha" in d or "beta" in d:
            tp = TransformParams(float(d.get("alpha", 0.0)), float(d.get("beta", 0.0)))
            if dim != 3:
                ctx.fail("alpha", "alpha/beta transforms need 3x3 agent blocks")
            return Transformation.uniform(tp.matrix, agents)
        blocks = _req(d, "blocks", ctx)
        if d.get("per_agent", False):
            if len(blocks) != agents:
                ctx.fail("blocks", f"need {agents} blocks")
            T = Transformation(tuple(np.asarray(b, dtype=float) for b in blocks))
        else:
            if len(blocks) != 1:
                ctx.fail("blocks", "shared transform takes exactly one block (or set per_agent)")
            T = Transformation.uniform(blocks[0], agents)
    except ContractNetError as exc:
        if isinstance(exc, SpecParseError):
            raise
        ctx.fail("blocks", str(exc))
    if T.dim != dim:
        ctx.fail("blocks", f"transform blocks must be {dim}x{dim}")
    return T


def load_transform(path, agents: int, dim: int) -> Transformation:
    return transform_from_dict(load_json(path), agents, dim, path)


def norm_from_dict(d: dict, agents: int, path=None) -> NormSpec:
    ctx = _Ctx(path)
    eta = d.get("eta", "uniform")
    if eta == "uniform":
        eta = [1.0] * agents
    if not isinstance(eta, list) or len(eta) != agents:
        ctx.fail("eta", f"eta must be 'uniform' or a list of {agents} weights")
    try:
        return NormSpec(d.get("local_p", 2), tuple(eta))
    except ContractNetError as exc:
        ctx.fail("local_p", str(exc))


def load_norm(path, agents: int) -> NormSpec:
    return norm_from_dict(load_json(path), agents, path)


def sim_from_dict(d: dict, path=None) -> SimConfig:
    ctx = _Ctx(path)
    x0 = d.get("x0")
    try:
        return SimConfig(t0=float(d.get("t0", 0.0)), horizon=float(_req(d, "horizon", ctx)),
                         dt=float(d.get("dt", 1e-3)),
                         x0=None if x0 is None else np.asarray(x0, dtype=float),
                         seed=d.get("seed"), init_std=float(d.get("init_std", 1.0)))
    except ContractNetError as exc:
        ctx.fail("dt", str(exc))


def search_from_dict(d: dict, path=None) -> SearchConfig:
    ctx = _Ctx(path)
    plant_d = d.get("plant", {})
    try:
        plant = MtdcPlant(**{k: plant_d[k] for k in ("terminals", "capacitance", "resistance",
                                                       "neighbors", "capacitance_mode") if k in plant_d})
        kw = {}
        for k in ("alpha_grid", "beta_grid", "ratio_levels", "eta"):
            if k in d:
                kw[k] = tuple(float(v) for v in d[k])
        for k in ("gain_max", "gain_tol", "delayed_cap"):
            if k in d:
                kw[k] = float(d[k])
        for k in ("coarse_points", "q", "bisection_steps"):
            if k in d:
                kw[k] = int(d[k])
        return SearchConfig(plant=plant, **kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SpecParseError):
            raise
        ctx.fail("plant", str(exc))
