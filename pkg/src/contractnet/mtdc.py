"""Multi-terminal HVDC ring: model builder and end-to-end case study.

Terminal i holds voltage deviation v_i, lines to i-1 and i+1 carry
(v_i - v_j)/R, and the injected current is the three-layer controller

    u_i   = -k0 v_i - k0t sum_j (v_i - v_j)(t - tau) + r_1
    r_1'  = -k1 v_i - k1t sum_j (v_i - v_j)(t - tau) + r_2
    r_2'  = -k2 v_i - k2t sum_j (v_i - v_j)(t - tau)

with delays tau_ij(t) = base + amplitude sin(t + i) (terminals numbered
from 1 in the phase).  Terminal ``disturbed_agent`` receives
d(t) = 3 + t + exp(-0.2 t) sin t.

In "physical" mode every closed-loop gain and the disturbance are divided
by the capacitance (integrator states are then r / c); in "normalized" mode
the loop runs at unit capacitance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, asdict, replace

import numpy as np

from .certify import Certificate, Transformation, certify, iss_envelope
from .errors import ConfigError
from .linalg import NormSpec
from .netmodel import (AgentDynamics, Channel, DelaySchedule, DisturbanceModel, MultiplexNetwork,
                       verify_c1)
from .simulator import SimConfig, Trace, error_metrics, simulate
from .synthesis import (REFERENCE_GAINS, GainVector, MtdcPlant, SearchConfig, TransformParams, synthesize)

DEFAULT_SEED = 20240607
POLY = (3.0, 1.0)
W_DECAY = 0.2


@dataclass(frozen=True)
class MtdcParams:
    terminals: int = 30
    capacitance: float = 1e-3
    resistance: float = 20.0
    disturbed_agent: int = 0
    delay_base: float = 0.1
    delay_amplitude: float = 0.1
    horizon: float = 40.0
    dt: float = 1e-3
    seed: int = DEFAULT_SEED
    capacitance_mode: str = "normalized"
    disturbance_on: bool = True
    alpha: float = -0.5
    beta: float = -1.0
    tail: float = 5.0

    def __post_init__(self):
        if self.terminals < 3:
            raise ConfigError("ring needs at least 3 terminals")
        if not (self.capacitance > 0 and self.resistance > 0):
            raise ConfigError("capacitance and resistance must be positive")
        if not 0 <= self.disturbed_agent < self.terminals:
            raise ConfigError("disturbed agent out of range")
        if self.capacitance_mode not in ("normalized", "physical"):
            raise ConfigError(f"unknown capacitance mode {self.capacitance_mode!r}")
        if self.delay_base < abs(self.delay_amplitude):
            raise ConfigError("delay base must dominate the amplitude (delays stay >= 0)")

    @property
    def scale(self) -> float:
        return 1.0 / self.capacitance if self.capacitance_mode == "physical" else 1.0

    @property
    def plant(self) -> MtdcPlant:
        return MtdcPlant(self.terminals, self.capacitance, self.resistance, 2, self.capacitance_mode)


def ring_pairs(N: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(N) for j in ((i - 1) % N, (i + 1) % N)]


def _residual(t: float) -> float:
    return math.exp(-W_DECAY * t) * math.sin(t)


def build_mtdc(p: MtdcParams, gains) -> MultiplexNetwork:
    g = gains if isinstance(gains, GainVector) else GainVector.from_tuple(gains)
    N, s = p.terminals, p.scale
    m = 2
    agents = tuple(AgentDynamics.linear([[0.0]]) for _ in range(N))
    chans = []
    pairs = ring_pairs(N)
    for i in range(N):
        chans.append(Channel.self_term(i, -s * g.free))
        for j in ((i - 1) % N, (i + 1) % N):
            chans.append(Channel.line(i, j, s / p.resistance, m))
            chans.append(Channel.diffusive(i, j, s * g.delayed, delayed=True))
    delays = DelaySchedule.sinusoidal(pairs, p.delay_base, p.delay_amplitude)
    poly = np.zeros((N, m, 1))
    sup = np.zeros(N)
    k = p.disturbed_agent
    residual = envelope = None
    if p.disturbance_on:
        poly[k, :, 0] = np.array(POLY) * s
        sup[k] = s
        idx = np.zeros((N, 1))
        idx[k, 0] = s

        def residual(t, idx=idx):
            return idx * _residual(t)

        def envelope(t, idx=idx):
            return idx[:, 0] * math.exp(-W_DECAY * max(t, 0.0))
    dist = DisturbanceModel(poly, residual, sup if p.disturbance_on else None, envelope)
    return MultiplexNetwork(agents, m, tuple(chans), delays, dist, name=f"mtdc-ring-{N}")


def reference_transform(p: MtdcParams) -> Transformation:
    return Transformation.uniform(TransformParams(p.alpha, p.beta).matrix, p.terminals)


def certify_mtdc(p: MtdcParams, gains, tp: TransformParams | None = None, eta=None) -> Certificate:
    tp = TransformParams(p.alpha, p.beta) if tp is None else tp
    net = build_mtdc(p, gains)
    spec = NormSpec(2, tuple(np.ones(p.terminals) if eta is None else eta))
    return certify(net, Transformation.uniform(tp.matrix, p.terminals), spec)


def eta_grid(N: int, levels=(0.5, 1.0, 2.0), agent: int = 0) -> list[tuple[float, ...]]:
    """Small family of weightings: uniform, plus one terminal re-weighted."""
    out = [tuple([1.0] * N)]
    for lv in levels:
        if lv == 1.0:
            continue
        w = [1.0] * N
        w[agent] = lv
        out.append(tuple(w))
    return out


def certify_with_eta_fallback(p: MtdcParams, gains, tp: TransformParams | None = None):
    """Certify with uniform eta, falling back to the small eta grid. Returns (cert, eta, label)."""
    cert = None
    for k, eta in enumerate(eta_grid(p.terminals, agent=p.disturbed_agent)):
        cert = certify_mtdc(p, gains, tp, eta)
        if cert.feasible:
            return cert, eta, "uniform" if k == 0 else f"grid[{k}]"
    return cert, None, "none"


@dataclass
class CaseStudyReport:
    params: MtdcParams
    gains: GainVector
    transform: TransformParams
    source: str
    certificate: Certificate
    eta_label: str
    trace: Trace | None
    checks: dict
    metrics: dict
    timings: dict

    @property
    def passed(self) -> bool:
        return self.certificate.feasible and all(c["passed"] for c in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "gains_source": self.source,
            "gains": self.gains.to_dict(),
            "transform": asdict(self.transform),
            "eta": self.eta_label,
            "certificate": {k: v for k, v in self.certificate.to_dict().items() if k != "rows"},
            "checks": self.checks,
            "metrics": self.metrics,
            "timings": self.timings,
            "passed": self.passed,
        }


def case_study_checks(p: MtdcParams, net: MultiplexNetwork, cert: Certificate, trace: Trace) -> tuple[dict, dict]:
    """Tail regulation, ramp compensation, envelope dominance and the zeta band."""
    t = trace.times
    tail = t >= t[-1] - p.tail - 1e-12
    v = trace.x[:, :, 0]
    v0 = float(np.max(np.abs(v[0])))
    tail_v = float(np.max(np.abs(v[tail])))
    ratio = tail_v / v0 if v0 > 0 else 0.0
    k = p.disturbed_agent
    d = np.array([net.disturbance(float(tt))[k, 0] for tt in t[tail]])
    ud = float(np.max(np.abs(trace.u[tail, k, 0] + d)))
    w_tail = p.scale * math.exp(-W_DECAY * float(t[tail][0]))
    spec = trace.spec
    w_sup = float(np.max(net.disturbance.residual_sup / spec.weights))
    env = iss_envelope(cert, trace.state_hist_sup, trace.zeta_hist_sup, w_sup, t0=float(t[0]))
    bound = env(t)
    excess = float(np.max(trace.error - bound))
    band = cert.output_lipschitz * cert.cond_T * w_sup / cert.margin
    z12 = float(np.max(np.abs(trace.zeta[tail, k, 1, 0]))) / spec.eta[k]
    checks = {
        "tail_ratio": {"value": ratio, "limit": 1e-3, "passed": ratio <= 1e-3},
        "ramp_compensation": {"value": ud, "limit": 10 * w_tail, "passed": ud <= 10 * w_tail},
        "envelope_dominance": {"value": excess, "limit": 1e-9, "passed": excess <= 1e-9},
        "zeta_band": {"value": z12, "limit": band, "passed": z12 <= band},
    }
    m = error_metrics(trace, p.tail)
    metrics = {"v0_max": v0, "tail_v_max": tail_v, "w_tail": w_tail, "w_sup": w_sup,
               "state_hist_sup": trace.state_hist_sup, "zeta_hist_sup": trace.zeta_hist_sup,
               **m.to_dict()}
    return checks, metrics


def run_case_study(p: MtdcParams | None = None, search: SearchConfig | None = None,
                   gains=None, tp: TransformParams | None = None, simulate_run: bool = True) -> CaseStudyReport:
    """Synthesize (unless gains are given), certify, then simulate the ring."""
    p = MtdcParams() if p is None else p
    timings = {}
    t_start = time.perf_counter()
    if gains is None:
        search = SearchConfig(plant=p.plant) if search is None else search
        res = synthesize(search, cross_certify=False)
        if not res.success:
            raise ConfigError("synthesis found no feasible gains: " + "; ".join(res.diagnostics[:5]))
        gains, tp, source = res.gains, res.transform, "synthesized"
    else:
        gains = gains if isinstance(gains, GainVector) else GainVector.from_tuple(gains)
        tp = TransformParams(p.alpha, p.beta) if tp is None else tp
        source = "supplied"
    timings["synthesis_s"] = time.perf_counter() - t_start
    t1 = time.perf_counter()
    cert, eta, label = certify_with_eta_fallback(p, gains, tp)
    timings["certify_s"] = time.perf_counter() - t1
    net = build_mtdc(p, gains)
    c1 = verify_c1(net, np.linspace(0.0, p.horizon, 11))
    checks, metrics, trace = {}, {"c1_max": max(c1.max_delay_free, c1.max_delayed)}, None
    if simulate_run and cert.feasible:
        t2 = time.perf_counter()
        spec = NormSpec(2, eta)
        trace = simulate(net, SimConfig(0.0, p.horizon, p.dt, seed=p.seed), spec)
        timings["simulate_s"] = time.perf_counter() - t2
        checks, more = case_study_checks(p, net, cert, trace)
        metrics.update(more)
    timings["total_s"] = time.perf_counter() - t_start
    return CaseStudyReport(p, gains, tp, source, cert, label, trace, checks, metrics, timings)


def reference_gains() -> GainVector:
    return GainVector.from_tuple(REFERENCE_GAINS)


def with_params(p: MtdcParams, **kw) -> MtdcParams:
    return replace(p, **kw)
