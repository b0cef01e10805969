"""Contraction certificate for the delayed closed loop.

For a block-diagonal coordinate change ``T = diag(T_i)`` and weights ``eta``
the per-agent rows are

    c2_i = mu_p(T_i A_ii T_i^-1) + sum_{j != i} (eta_j/eta_i) ||T_i A_ij T_j^-1||_p
    c3_i = sum_k sum_j (eta_j/eta_i) ||T_i (B_k)_ij T_j^-1||_p

evaluated at every sample point.  The tightest margins are
``sigma_bar = -max c2`` and ``sigma_under = max c3``; the certificate is
feasible when ``sigma_bar > sigma_under >= 0`` with ``sigma_bar > 0``.
Infeasible certificates are returned, not raised, so search loops can probe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, EnvelopeError, TransformError
from .halanay import HalanayParams, solve_rate
from .linalg import NormSpec, block_diag_composite_norm, induced_norm, matrix_measure, spectral_norm
from .netmodel import JacobianBlocks, MultiplexNetwork, assemble_jacobian_blocks

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class Transformation:
    """Block-diagonal coordinate change, one invertible block per agent."""

    blocks: tuple[np.ndarray, ...]
    inverses: tuple[np.ndarray, ...] = field(init=False, repr=False)
    conditions: tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self):
        blocks, invs, conds = [], [], []
        for b in self.blocks:
            b = np.atleast_2d(np.asarray(b, dtype=float))
            if b.shape[0] != b.shape[1]:
                raise TransformError(f"transform block must be square, got {b.shape}")
            try:
                inv = np.linalg.inv(b)
            except np.linalg.LinAlgError:
                raise TransformError("singular transform block") from None
            cond = spectral_norm(b) * spectral_norm(inv)
            if not math.isfinite(cond) or cond > MAX_CONDITION:
                raise TransformError(f"transform block condition number {cond:.3g} exceeds {MAX_CONDITION:g}")
            b.setflags(write=False)
            inv.setflags(write=False)
            blocks.append(b)
            invs.append(inv)
            conds.append(cond)
        if not blocks:
            raise TransformError("empty transformation")
        object.__setattr__(self, "blocks", tuple(blocks))
        object.__setattr__(self, "inverses", tuple(invs))
        object.__setattr__(self, "conditions", tuple(conds))

    @classmethod
    def identity(cls, agents: int, dim: int) -> "Transformation":
        return cls(tuple(np.eye(dim) for _ in range(agents)))

    @classmethod
    def uniform(cls, block, agents: int) -> "Transformation":
        return cls(tuple(np.asarray(block, dtype=float) for _ in range(agents)))

    @property
    def count(self) -> int:
        return len(self.blocks)

    @property
    def dim(self) -> int:
        return self.blocks[0].shape[0]

    def composite_norm(self, p) -> float:
        return block_diag_composite_norm(self.blocks, p)

    def inverse_composite_norm(self, p) -> float:
        return block_diag_composite_norm(self.inverses, p)

    def composite_condition(self, p) -> float:
        """||T||_cmpst * ||T^-1||_cmpst."""
        return self.composite_norm(p) * self.inverse_composite_norm(p)

    def permuted(self, perm: Sequence[int]) -> "Transformation":
        return Transformation(tuple(self.blocks[k] for k in perm))


def _check_conformal(blocks: JacobianBlocks, T: Transformation, spec: NormSpec) -> None:
    N, D = blocks.diag.shape[0], blocks.diag.shape[1]
    if T.count != N or T.dim != D:
        raise DimensionError(f"transform has {T.count} blocks of size {T.dim}, expected {N} of size {D}")
    if len(spec.eta) != N:
        raise DimensionError(f"{len(spec.eta)} weights for {N} agents")


def _c2_rows(blocks: JacobianBlocks, T: Transformation, spec: NormSpec) -> np.ndarray:
    _check_conformal(blocks, T, spec)
    p, eta = spec.local_p, spec.weights
    rows = np.array([matrix_measure(T.blocks[i] @ blocks.diag[i] @ T.inverses[i], p)
                     for i in range(blocks.diag.shape[0])])
    for (i, j), A in sorted(blocks.off.items()):
        rows[i] += eta[j] / eta[i] * induced_norm(T.blocks[i] @ A @ T.inverses[j], p)
    return rows


def _c3_rows(blocks: JacobianBlocks, T: Transformation, spec: NormSpec) -> np.ndarray:
    _check_conformal(blocks, T, spec)
    p, eta = spec.local_p, spec.weights
    rows = np.zeros(blocks.diag.shape[0])
    for slot in blocks.delayed:
        for (i, j), B in sorted(slot.items()):
            rows[i] += eta[j] / eta[i] * induced_norm(T.blocks[i] @ B @ T.inverses[j], p)
    return rows


@dataclass(frozen=True)
class ConditionRows:
    per_agent: np.ndarray
    value: float


def check_c2(samples: Sequence[JacobianBlocks], T: Transformation, spec: NormSpec) -> ConditionRows:
    """Worst delay-free row over agents and samples; feasible for sigma_bar iff value <= -sigma_bar."""
    rows = np.max(np.stack([_c2_rows(b, T, spec) for b in samples]), axis=0)
    return ConditionRows(rows, float(np.max(rows)))


def check_c3(samples: Sequence[JacobianBlocks], T: Transformation, spec: NormSpec) -> ConditionRows:
    """Worst delayed-coupling row sum over agents and samples."""
    rows = np.max(np.stack([_c3_rows(b, T, spec) for b in samples]), axis=0)
    return ConditionRows(rows, float(np.max(rows)))


@dataclass(frozen=True)
class Certificate:
    sigma_bar: float
    sigma_under: float
    lam: float
    feasible: bool
    c2_rows: np.ndarray
    c3_rows: np.ndarray
    norm_spec: NormSpec
    transform: Transformation
    cond_T: float
    tau_max: float
    output_lipschitz: float = 1.0
    violations: tuple[str, ...] = ()
    samples: int = 1

    @property
    def margin(self) -> float:
        return self.sigma_bar - self.sigma_under

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "sigma_bar": self.sigma_bar,
            "sigma_under": self.sigma_under,
            "lambda": self.lam if math.isfinite(self.lam) else None,
            "tau_max": self.tau_max,
            "cond_T": self.cond_T,
            "output_lipschitz": self.output_lipschitz,
            "violations": list(self.violations),
            "samples": self.samples,
            "norm": {"local_p": _p_str(self.norm_spec.local_p), "eta": list(self.norm_spec.eta)},
            "transform": {"blocks": [b.tolist() for b in _dedupe(self.transform.blocks)],
                          "per_agent": _is_per_agent(self.transform.blocks)},
            "rows": [{"agent": i, "c2": float(c2), "c3": float(c3)}
                     for i, (c2, c3) in enumerate(zip(self.c2_rows, self.c3_rows))],
        }


def _p_str(p: float):
    return "inf" if p == math.inf else int(p)


def _is_per_agent(blocks) -> bool:
    return any(not np.array_equal(b, blocks[0]) for b in blocks)


def _dedupe(blocks):
    return list(blocks) if _is_per_agent(blocks) else [blocks[0]]


def default_samples(net: MultiplexNetwork, t0: float = 0.0) -> list:
    """One sample at the desired solution (exact for constant-Jacobian models)."""
    return [(net.desired_state(t0), t0)]


def box_samples(net: MultiplexNetwork, lo: float, hi: float, count: int, seed: int = 0,
                times: Sequence[float] = (0.0,)) -> list:
    """Monte Carlo sample set over the state box [lo, hi]^(N n) at the given times.

    The certificate then holds on the box only (worst case over the samples).
    """
    rng = np.random.default_rng(seed)
    pts = []
    for t in times:
        for _ in range(count):
            pts.append((rng.uniform(lo, hi, size=(net.N, net.n)), float(t)))
    return pts


def certify(net: MultiplexNetwork, T: Transformation, spec: NormSpec, samples=None) -> Certificate:
    """Evaluate both contraction conditions and derive (sigma_bar, sigma_under, lam).

    ``samples`` is a sequence of ``(x, t)`` or ``(x, t, x_leader)`` tuples.
    """
    samples = default_samples(net) if samples is None else list(samples)
    block_sets = []
    for s in samples:
        x, t = s[0], s[1]
        xl = s[2] if len(s) > 2 else None
        block_sets.append(assemble_jacobian_blocks(net, x, t, xl))
    c2 = check_c2(block_sets, T, spec)
    c3 = check_c3(block_sets, T, spec)
    sigma_bar = -c2.value
    sigma_under = max(0.0, c3.value)
    violations = []
    if not sigma_bar > 0:
        for i, v in enumerate(c2.per_agent):
            if v >= 0:
                violations.append(f"agent {i}: delay-free row {v:.6g} >= 0")
    if not sigma_bar > sigma_under:
        for i, v in enumerate(c3.per_agent):
            if v >= sigma_bar:
                violations.append(f"agent {i}: delayed row {v:.6g} >= sigma_bar {sigma_bar:.6g}")
        if not violations:
            violations.append(f"sigma_under {sigma_under:.6g} >= sigma_bar {sigma_bar:.6g}")
    feasible = not violations
    lam = solve_rate(HalanayParams(sigma_bar, sigma_under, net.tau_max)) if feasible else float("nan")
    return Certificate(
        sigma_bar=sigma_bar, sigma_under=sigma_under, lam=lam, feasible=feasible,
        c2_rows=c2.per_agent, c3_rows=c3.per_agent, norm_spec=spec, transform=T,
        cond_T=T.composite_condition(spec.local_p), tau_max=net.tau_max,
        output_lipschitz=net.output_lipschitz, violations=tuple(violations), samples=len(samples))


def iss_envelope(cert: Certificate, state_sup: float, zeta_sup: float, w_sup: float,
                 t0: float = 0.0) -> Callable[[float], float]:
    """Output-error bound t -> L_g cond_T (e^{-lam (t - t0)} (state_sup + zeta_sup) + w_sup / margin).

    ``state_sup`` and ``zeta_sup`` are sups of ||x - x*||_cmpst and of
    sum_k ||zeta_k||_cmpst over the initial history window; ``w_sup`` is
    sup_t ||w(t)||_cmpst.
    """
    if not cert.feasible:
        raise EnvelopeError("envelope requested from an infeasible certificate")
    if min(state_sup, zeta_sup, w_sup) < 0:
        raise EnvelopeError("sup terms must be non-negative")
    gain = cert.output_lipschitz * cert.cond_T
    lam, margin = cert.lam, cert.margin
    initial = state_sup + zeta_sup
    offset = gain * w_sup / margin

    def bound(t):
        return gain * np.exp(-lam * (np.asarray(t, dtype=float) - t0)) * initial + offset

    return bound
