"""Gain design for the three-layer MTDC-form controller.

Decision variables are the delay-free gains (k0, k1, k2) and the delayed
gains (k0t, k1t, k2t).  For a coordinate change

    T~ = [[1, alpha, 0], [0, 1, beta], [0, 0, 1]]

the LMI constraints reduce to norm and measure bounds on 3x3 matrices:

    b1 = -mu_2(T~ A_ii T~^-1)
    b3 = max_edges (eta_j/eta_i) ||T~ A_ij T~^-1||_2,   b2 = neighbors * b3
    b4 = ||T~ B_ii T~^-1||_2,  b5 = max_edges (eta_j/eta_i) ||T~ B_ij T~^-1||_2
    sigma_bar = b1 - b2,       sigma_under = q (b4 + b5)

so the tightest auxiliaries are computed directly and PSD checks are only
used as a consistency test.  The delay-free gains fix sigma_bar, and the
delayed gains only enter sigma_under (linearly in their common scale), which
is what the outer coordinate search / inner bisection split exploits.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError
from .linalg import matrix_measure, min_symmetric_eigenvalue, spectral_norm

REFERENCE_GAINS = (0.7445, 1.3399, 0.5052, 0.00057, 0.00076, 0.00048)
DEFAULT_GRID = (-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0)
PSD_TOL = 1e-9


@dataclass(frozen=True)
class GainVector:
    k0: float
    k1: float
    k2: float
    k0t: float = 0.0
    k1t: float = 0.0
    k2t: float = 0.0
    sigma_bar: float = float("nan")
    sigma_under: float = float("nan")

    def __post_init__(self):
        for f in ("k0", "k1", "k2", "k0t", "k1t", "k2t", "sigma_bar", "sigma_under"):
            object.__setattr__(self, f, float(getattr(self, f)))

    @classmethod
    def from_tuple(cls, vals) -> "GainVector":
        return cls(*[float(v) for v in vals])

    @property
    def free(self) -> np.ndarray:
        return np.array([self.k0, self.k1, self.k2])

    @property
    def delayed(self) -> np.ndarray:
        return np.array([self.k0t, self.k1t, self.k2t])

    @property
    def delayed_sum(self) -> float:
        return float(self.k0t + self.k1t + self.k2t)

    def as_tuple(self) -> tuple[float, ...]:
        return (self.k0, self.k1, self.k2, self.k0t, self.k1t, self.k2t)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TransformParams:
    alpha: float
    beta: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[1.0, self.alpha, 0.0], [0.0, 1.0, self.beta], [0.0, 0.0, 1.0]])

    @property
    def inverse(self) -> np.ndarray:
        # unit upper triangular, inverse in closed form
        a, b = self.alpha, self.beta
        return np.array([[1.0, -a, a * b], [0.0, 1.0, -b], [0.0, 0.0, 1.0]])

    @property
    def condition(self) -> float:
        return spectral_norm(self.matrix) * spectral_norm(self.inverse)


@dataclass(frozen=True)
class MtdcPlant:
    """Ring plant constants: per-terminal capacitance, line resistance, degree.

    ``capacitance_mode`` is "normalized" (unit capacitance in the closed loop;
    c only labels the instance) or "physical" (all closed-loop gains
    and the disturbance divided by c).
    """

    terminals: int = 30
    capacitance: float = 1e-3
    resistance: float = 20.0
    neighbors: int = 2
    capacitance_mode: str = "normalized"

    def __post_init__(self):
        if self.terminals < 3:
            raise ConfigError("ring needs at least 3 terminals")
        if not (self.capacitance > 0 and self.resistance > 0):
            raise ConfigError("capacitance and resistance must be positive")
        if self.capacitance_mode not in ("normalized", "physical"):
            raise ConfigError(f"unknown capacitance mode {self.capacitance_mode!r}")

    @property
    def q(self) -> int:
        return self.terminals * self.neighbors

    @property
    def scale(self) -> float:
        return 1.0 / self.capacitance if self.capacitance_mode == "physical" else 1.0


@dataclass(frozen=True)
class SearchConfig:
    alpha_grid: tuple[float, ...] = DEFAULT_GRID
    beta_grid: tuple[float, ...] = DEFAULT_GRID
    gain_max: float = 10.0
    gain_tol: float = 1e-3
    coarse_points: int = 6
    delayed_cap: float = 10.0
    ratio_levels: tuple[float, ...] = (0.0, 0.5, 1.0)
    eta: tuple[float, ...] | None = None
    q: int | None = None
    plant: MtdcPlant = field(default_factory=MtdcPlant)
    bisection_steps: int = 60

    def __post_init__(self):
        if not self.alpha_grid or not self.beta_grid:
            raise ConfigError("alpha and beta grids must be non-empty")
        if self.gain_max <= 0 or self.gain_tol <= 0 or self.delayed_cap <= 0:
            raise ConfigError("gain ranges and tolerances must be positive")
        if self.coarse_points < 2:
            raise ConfigError("coarse grid needs at least 2 points per axis")
        if self.q is not None and self.q <= 0:
            raise ConfigError("q must be positive")
        if self.eta is not None:
            if len(self.eta) != self.plant.terminals or min(self.eta) <= 0:
                raise ConfigError("eta must have one positive weight per terminal")

    @property
    def q_eff(self) -> int:
        return self.plant.q if self.q is None else int(self.q)

    @property
    def eta_vec(self) -> np.ndarray:
        if self.eta is None:
            return np.ones(self.plant.terminals)
        return np.asarray(self.eta, dtype=float)


def mtdc_jacobian_blocks(gains: GainVector, plant: MtdcPlant):
    """Constant closed-loop blocks (A_ii, A_ij, B_ii, B_ij) of one ring terminal."""
    s = plant.scale
    a = 1.0 / plant.resistance
    Aii = np.array([[-(plant.neighbors * a + gains.k0) * s, 1.0, 0.0],
                    [-gains.k1 * s, 0.0, 1.0],
                    [-gains.k2 * s, 0.0, 0.0]])
    Aij = np.zeros((3, 3))
    Aij[0, 0] = a * s
    Bij = np.zeros((3, 3))
    Bij[:, 0] = gains.delayed * s
    return Aii, Aij, -Bij, Bij


def _ring_ratio_max(eta: np.ndarray, neighbors: int) -> float:
    """max over ring edges i -> i±k of eta_j / eta_i."""
    N = eta.size
    best = 0.0
    for i in range(N):
        for k in range(1, neighbors // 2 + 1):
            for j in ((i - k) % N, (i + k) % N):
                best = max(best, eta[j] / eta[i])
    return best


def _norm_form(M: np.ndarray, b: float) -> np.ndarray:
    n = M.shape[0]
    return np.block([[b * np.eye(n), M.T], [M, b * np.eye(n)]])


def is_psd(S, tol: float = PSD_TOL) -> bool:
    return min_symmetric_eigenvalue(S) >= -tol


def lmi_norm_equivalent(M, b: float) -> tuple[bool, bool]:
    """(PSD test of [[bI, M^T], [M, bI]], ||M||_2 <= b) for an equivalence check."""
    M = np.asarray(M, dtype=float)
    return min_symmetric_eigenvalue(_norm_form(M, b)) >= 0.0, spectral_norm(M) <= b


@dataclass(frozen=True)
class LmiSystem:
    matrices: dict
    scalars: dict

    def psd_ok(self, tol: float = PSD_TOL) -> bool:
        return all(is_psd(S, tol) for S in self.matrices.values())

    def scalars_ok(self) -> bool:
        return all(v <= 0 for v in self.scalars.values())


def lmi_blocks(gains: GainVector, tp: TransformParams, b, sigma_bar: float, sigma_under: float,
               q: int, plant: MtdcPlant, eta_ratio: float = 1.0) -> LmiSystem:
    """Symmetric matrices and scalar constraints for auxiliaries b = (b1, b2, b3, b4, b5).

    Every matrix must be PSD and every scalar entry <= 0.
    """
    b1, b2, b3, b4, b5 = b
    T, Ti = tp.matrix, tp.inverse
    Aii, Aij, Bii, Bij = mtdc_jacobian_blocks(gains, plant)
    M = T @ Aii @ Ti
    mats = {
        "measure": -0.5 * (M + M.T) - b1 * np.eye(3),
        "coupling": _norm_form(eta_ratio * T @ Aij @ Ti, b3),
        "delayed_self": _norm_form(T @ Bii @ Ti, b4),
        "delayed_neighbor": _norm_form(eta_ratio * T @ Bij @ Ti, b5),
    }
    scalars = {
        "coupling_sum": plant.neighbors * b3 - b2,
        "delay_free_rate": -b1 + b2 + sigma_bar,
        "delayed_sum": q * (b4 + b5) - sigma_under,
    }
    return LmiSystem(mats, scalars)


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    b: tuple[float, float, float, float, float]
    sigma_bar: float
    sigma_under: float
    violations: tuple[str, ...]

    @property
    def margin(self) -> float:
        return self.sigma_bar - self.sigma_under


def _aux(gains: GainVector, tp: TransformParams, eta_ratio: float, plant: MtdcPlant):
    T, Ti = tp.matrix, tp.inverse
    Aii, Aij, Bii, Bij = mtdc_jacobian_blocks(gains, plant)
    b1 = -matrix_measure(T @ Aii @ Ti, 2)
    b3 = eta_ratio * spectral_norm(T @ Aij @ Ti)
    b4 = spectral_norm(T @ Bii @ Ti)
    b5 = eta_ratio * spectral_norm(T @ Bij @ Ti)
    return float(b1), float(plant.neighbors * b3), float(b3), float(b4), float(b5)


def feasibility(gains: GainVector, tp: TransformParams, eta=None, plant: MtdcPlant | None = None,
                q: int | None = None, check_lmi: bool = False) -> Feasibility:
    plant = MtdcPlant() if plant is None else plant
    q = plant.q if q is None else q
    eta = np.ones(plant.terminals) if eta is None else np.asarray(eta, dtype=float)
    ratio = _ring_ratio_max(eta, plant.neighbors)
    b = _aux(gains, tp, ratio, plant)
    b1, b2, b3, b4, b5 = b
    sigma_bar = float(b1 - b2)
    sigma_under = float(q * (b4 + b5))
    bad = []
    free, dly = gains.free, gains.delayed
    if np.any(free < 0) or np.any(dly < 0):
        bad.append("gains must be non-negative")
    for j in range(3):
        if not free[j] + dly[j] > 0:
            bad.append(f"k{j} + k{j}t must be positive")
    if not sigma_bar > 0:
        bad.append(f"sigma_bar {sigma_bar:.6g} <= 0")
    if not sigma_bar > sigma_under:
        bad.append(f"sigma_under {sigma_under:.6g} >= sigma_bar {sigma_bar:.6g}")
    if check_lmi:
        sys_ = lmi_blocks(gains, tp, b, sigma_bar, sigma_under, q, plant, ratio)
        if not sys_.psd_ok(1e-8 * max(1.0, abs(b1))):
            bad.append("LMI consistency check failed")
    return Feasibility(not bad, b, sigma_bar, sigma_under, tuple(bad))


def _sigma_bar(k, tp, ratio, plant) -> float:
    if np.any(k < 0):
        return -math.inf
    b1, b2, *_ = _aux(GainVector(*k), tp, ratio, plant)
    return b1 - b2


def _maximize_sigma_bar(tp, ratio, cfg: SearchConfig):
    """Coarse grid then compass search with step halving over [0, gain_max]^3."""
    plant = cfg.plant
    axis = np.linspace(0.0, cfg.gain_max, cfg.coarse_points)
    best_k, best_v = None, -math.inf
    for k in itertools.product(axis, axis, axis):
        k = np.array(k)
        v = _sigma_bar(k, tp, ratio, plant)
        if v > best_v:
            best_k, best_v = k, v
    step = axis[1] - axis[0]
    dirs = [s * e for e in np.eye(3) for s in (1.0, -1.0)]
    while step >= cfg.gain_tol:
        moved = False
        for d in dirs:
            cand = np.clip(best_k + step * d, 0.0, cfg.gain_max)
            v = _sigma_bar(cand, tp, ratio, plant)
            if v > best_v:
                best_k, best_v, moved = cand, v, True
                break
        if not moved:
            step *= 0.5
    return best_k, best_v


def _ratio_grid(levels) -> list[np.ndarray]:
    out = []
    for r in itertools.product(levels, levels, levels):
        r = np.array(r, dtype=float)
        if r.sum() <= 0:
            continue
        r = r / r.sum()
        if not any(np.allclose(r, o) for o in out):
            out.append(r)
    return out


@dataclass(frozen=True)
class NodeResult:
    index: int
    tp: TransformParams
    gains: GainVector | None
    feasible: bool
    cap_bound: bool
    cond_T: float
    note: str = ""

    @property
    def cost(self) -> float:
        return -self.gains.delayed_sum if self.feasible else math.inf


def _solve_node(index: int, tp: TransformParams, cfg: SearchConfig) -> NodeResult:
    plant, q, eta = cfg.plant, cfg.q_eff, cfg.eta_vec
    ratio = _ring_ratio_max(eta, plant.neighbors)
    k, sb = _maximize_sigma_bar(tp, ratio, cfg)
    if not sb > 0:
        return NodeResult(index, tp, None, False, False, tp.condition, "no contracting delay-free gains")
    best = None
    for rho in _ratio_grid(cfg.ratio_levels):
        def ok(s):
            g = GainVector(*k, *(s * rho))
            return feasibility(g, tp, eta, plant, q).feasible
        if not ok(0.0) and not ok(cfg.gain_tol * 1e-6):
            continue
        if ok(cfg.delayed_cap):
            s, capped = cfg.delayed_cap, True
        else:
            lo, hi = 0.0, cfg.delayed_cap
            for _ in range(cfg.bisection_steps):
                mid = 0.5 * (lo + hi)
                if ok(mid):
                    lo = mid
                else:
                    hi = mid
            s, capped = lo, False
        if s <= 0:
            continue
        if best is None or s > best[0]:
            best = (s, rho, capped)
    if best is None:
        return NodeResult(index, tp, None, False, False, tp.condition, "no positive delayed scale")
    s, rho, capped = best
    g = GainVector(*k, *(s * rho))
    f = feasibility(g, tp, eta, plant, q)
    g = GainVector(*g.as_tuple(), f.sigma_bar, f.sigma_under)
    return NodeResult(index, tp, g, f.feasible, capped, tp.condition)


@dataclass(frozen=True)
class SynthesisResult:
    success: bool
    gains: GainVector | None
    transform: TransformParams | None
    certificate: object | None
    nodes: tuple[NodeResult, ...]
    cap_bound: bool
    diagnostics: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "gains": None if self.gains is None else self.gains.to_dict(),
            "transform": None if self.transform is None else asdict(self.transform),
            "cap_bound": self.cap_bound,
            "feasible_nodes": sum(n.feasible for n in self.nodes),
            "nodes": len(self.nodes),
            "diagnostics": list(self.diagnostics),
        }


def synthesize(cfg: SearchConfig | None = None, cross_certify: bool = True) -> SynthesisResult:
    """Best delayed-gain sum over the (alpha, beta) grid.

    Ties are broken by the smaller condition number of T~, then grid order.
    """
    cfg = SearchConfig() if cfg is None else cfg
    nodes = []
    for idx, (a, b) in enumerate(itertools.product(cfg.alpha_grid, cfg.beta_grid)):
        nodes.append(_solve_node(idx, TransformParams(float(a), float(b)), cfg))
    ok = [n for n in nodes if n.feasible]
    if not ok:
        notes = tuple(f"alpha={n.tp.alpha} beta={n.tp.beta}: {n.note}" for n in nodes)
        return SynthesisResult(False, None, None, None, tuple(nodes), False, notes)
    best = min(ok, key=lambda n: (n.cost, n.cond_T, n.index))
    diag = []
    if best.cap_bound:
        diag.append(f"delayed gain cap {cfg.delayed_cap} binds")
    cert = None
    if cross_certify:
        from .certify import Transformation
        from .certify import certify as run_certify
        from .linalg import NormSpec
        from .mtdc import MtdcParams, build_mtdc
        p = MtdcParams(terminals=cfg.plant.terminals, capacitance=cfg.plant.capacitance,
                       resistance=cfg.plant.resistance, capacitance_mode=cfg.plant.capacitance_mode)
        net = build_mtdc(p, best.gains)
        T = Transformation.uniform(best.tp.matrix, net.N)
        cert = run_certify(net, T, NormSpec(2, tuple(cfg.eta_vec)))
        if not cert.feasible:
            diag.append("cross-certification failed: " + "; ".join(cert.violations))
    success = cert is None or cert.feasible
    return SynthesisResult(success, best.gains, best.tp, cert, tuple(nodes), best.cap_bound, tuple(diag))
