"""Independent reference computations used by the tests.

Nothing here calls the package's own kernels for the quantity being checked.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import polynomial as P

from contractnet.certify import Transformation, certify
from contractnet.linalg import NormSpec
from contractnet.netmodel import (AgentDynamics, Channel, DelaySchedule, DisturbanceModel,
                                  MultiplexNetwork, assemble_jacobian_blocks)


def charpoly_eigs(S: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric matrix from the characteristic polynomial roots."""
    coeffs = np.poly(S)
    return np.sort(np.real(np.roots(coeffs)))


def power_iteration_norm(A: np.ndarray, iters: int = 2000, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    G = A.T @ A
    v = rng.standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        lam = v @ G @ v
    return math.sqrt(max(lam, 0.0))


def _blocks(sizes):
    out, s = [], 0
    for n in sizes:
        out.append(slice(s, s + n))
        s += n
    return out


def composite_norm_sampled(A, sizes, p, eta, samples: int, rng) -> float:
    """Sampled sup of ||A x||_cmpst over extreme unit vectors (every block at its weight)."""
    sl = _blocks(sizes)
    dim = sum(sizes)
    X = np.empty((samples, dim))
    for s, e in zip(sl, eta):
        if p == 2:
            u = rng.standard_normal((samples, s.stop - s.start))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
        else:
            u = rng.choice([-1.0, 1.0], size=(samples, s.stop - s.start))
        X[:, s] = e * u
    Y = X @ A.T
    vals = np.stack([np.linalg.norm(Y[:, s], ord=p, axis=1) / e for s, e in zip(sl, eta)], axis=1)
    return float(vals.max())


def _dual_objective(Y, rows, sl, eta, eta_i):
    """sum_j eta_j ||M_ij^T y|| / eta_i for a batch of unit vectors y."""
    tot = np.zeros(Y.shape[0])
    for s, e in zip(sl, eta):
        tot += e * np.linalg.norm(Y @ rows[:, s], axis=1)
    return tot / eta_i


def composite_induced_norm(A, sizes, p, eta, rng, pool: int = 4096, starts: int = 8,
                           iters: int = 50) -> float:
    """||A||_cmpst for weighted-sup composites.

    p = inf: exact (a weighted l-inf norm on entries).  p = 2: the dual form
    max_i max_{|y|=1} sum_j eta_j ||A_ij^T y|| / eta_i, searched by dense
    sampling of the unit sphere followed by the alternating ascent
    x_j = eta_j A_ij^T y / ||A_ij^T y||, y = sum_j A_ij x_j / ||.|| from the
    best samples.  Any value it returns is attained, so it never exceeds
    the true norm.
    """
    sl = _blocks(sizes)
    if p == math.inf:
        w = np.concatenate([np.full(s.stop - s.start, e) for s, e in zip(sl, eta)])
        return float(np.max(np.abs(A) @ w / w))
    best = 0.0
    for i, si in enumerate(sl):
        rows = A[si]
        Y = rng.standard_normal((pool, si.stop - si.start))
        Y /= np.linalg.norm(Y, axis=1, keepdims=True)
        vals = _dual_objective(Y, rows, sl, eta, eta[i])
        Y = Y[np.argsort(vals)[-starts:]]
        val = _dual_objective(Y, rows, sl, eta, eta[i])
        for _ in range(iters):
            Z = np.zeros_like(Y)
            for s, e in zip(sl, eta):
                G = Y @ rows[:, s]
                ng = np.linalg.norm(G, axis=1, keepdims=True)
                Z += e * (G / np.where(ng > 0, ng, 1.0)) @ rows[:, s].T
            nz = np.linalg.norm(Z, axis=1)
            Y = Z / np.where(nz > 0, nz, 1.0)[:, None]
            new = _dual_objective(Y, rows, sl, eta, eta[i])
            done = np.all(new - val <= 1e-16 * np.maximum(1.0, new))
            val = np.maximum(val, new)
            if done:
                break
        best = max(best, float(val.max()))
    return best


def limit_quotient_measure(A, sizes, p, eta, rng, hs=(1e-6, 1e-7)) -> float:
    """(||I + hA||_cmpst - 1) / h, reported at the smallest h."""
    I = np.eye(A.shape[0])
    val = None
    for h in hs:
        val = (composite_induced_norm(I + h * A, sizes, p, eta, rng) - 1.0) / h
    return float(val)


def method_of_steps(a: float, tau: float, t_end: float, history: float = 1.0) -> float:
    """x'(t) = a x(t - tau), x = history on [-tau, 0], solved exactly piecewise."""
    pieces = [np.array([history])]
    k = 0
    x_start = history
    while k * tau < t_end:
        prev = pieces[-1]
        # x(t) on [k tau, (k+1) tau] in the local variable s = t - k tau
        # previous piece in its own local variable equals x(t - tau) here
        integ = P.polyint(a * prev)
        cur = integ.copy()
        cur[0] += x_start
        pieces.append(cur)
        x_start = P.polyval(tau, cur)
        k += 1
        if (k) * tau >= t_end:
            return float(P.polyval(t_end - (k - 1) * tau, cur))
    return float(x_start)


def lyapunov_transform(A: np.ndarray) -> np.ndarray:
    """T with T^T T = P, where P A + A^T P = -I (A Hurwitz)."""
    n = A.shape[0]
    K = np.kron(np.eye(n), A.T) + np.kron(A.T, np.eye(n))
    Pm = np.linalg.solve(K, -np.eye(n).reshape(-1)).reshape(n, n)
    Pm = 0.5 * (Pm + Pm.T)
    return np.linalg.cholesky(Pm).T


def _companion_gains(roots):
    """Scalar gains (c0, k1, .., km) making [[-c0, 1, ..], [-k1, 0, 1, ..], ..] have these roots."""
    coeffs = np.poly(roots)    # s^(m+1) + a1 s^m + ... + a_{m+1}
    return coeffs[1:]


def random_toy(seed: int, shrink_limit: int = 40):
    """Random feasible delayed network with N <= 5, m <= 2 and its certificate inputs.

    Returns (net, T, spec, cert).  Couplings are halved until certify passes.
    """
    rng = np.random.default_rng(seed)
    N = int(rng.integers(2, 6))
    n = int(rng.integers(1, 3))
    m = int(rng.integers(0, 3))
    a = rng.uniform(-0.5, 0.3, size=N)
    skews = []
    for _ in range(N):
        S = rng.normal(size=(n, n)) * 0.3
        skews.append(S - S.T)
    roots = -rng.uniform(0.6, 1.8, size=m + 1)
    coeffs = _companion_gains(roots)      # c0 = -(a - k0) etc.
    edges = [(i, j) for i in range(N) for j in range(N) if i != j and rng.random() < 0.6]
    if not edges:
        edges = [(0, 1), (1, 0)]
    free_g = rng.uniform(0.1, 0.5, size=m + 1)
    del_g = rng.uniform(0.05, 0.3, size=m + 1)
    tau_base = float(rng.uniform(0.05, 0.2))
    tau_amp = float(rng.uniform(0.0, tau_base))
    poly = rng.normal(size=(N, m, n))
    res_agents = rng.random(N) < 0.5
    res_amp = rng.uniform(0.1, 1.0, size=N) * res_agents
    decay = float(rng.uniform(0.1, 0.5))
    spec = NormSpec(2, tuple(rng.uniform(0.5, 2.0, size=N)))

    def w(t):
        return np.outer(res_amp, np.ones(n)) * math.exp(-decay * t) * math.sin(2 * t) / n

    dist = DisturbanceModel(poly, w, res_amp.copy())
    scale = 1.0
    for _ in range(shrink_limit):
        agents, chans = [], []
        for i in range(N):
            A = a[i] * np.eye(n) + skews[i]
            agents.append(AgentDynamics.linear(A))
            self_g = np.zeros((m + 1, n, n))
            self_g[0] = -(coeffs[0] + a[i]) * np.eye(n)
            for k in range(1, m + 1):
                self_g[k] = -coeffs[k] * np.eye(n)
            chans.append(Channel(i, i, False, self_g, np.zeros_like(self_g)))
        for i, j in edges:
            chans.append(Channel.diffusive(i, j, scale * free_g[:, None, None] * np.eye(n)))
            chans.append(Channel.diffusive(i, j, scale * del_g[:, None, None] * np.eye(n), delayed=True))
        delays = DelaySchedule.sinusoidal(edges, tau_base, tau_amp, frequency=1.3)
        net = MultiplexNetwork(tuple(agents), m, tuple(chans), delays, dist, name=f"toy-{seed}")
        # Lyapunov T from the closed-loop diagonal block (diffusive shifts included)
        jb = assemble_jacobian_blocks(net)
        T = Transformation(tuple(lyapunov_transform(jb.diag[i]) for i in range(N)))
        cert = certify(net, T, spec)
        if cert.feasible:
            return net, T, spec, cert
        scale *= 0.5
    raise RuntimeError(f"toy {seed} never became feasible")
