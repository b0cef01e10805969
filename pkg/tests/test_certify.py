import math

import numpy as np
import pytest

from contractnet.certify import Transformation, box_samples, certify, check_c2, check_c3, iss_envelope
from contractnet.errors import EnvelopeError, TransformError
from contractnet.halanay import HalanayParams
from contractnet.linalg import NormSpec
from contractnet.mtdc import MtdcParams, build_mtdc, certify_mtdc, reference_transform
from contractnet.netmodel import (AgentDynamics, Channel, DelaySchedule, DisturbanceModel,
                                  MultiplexNetwork, assemble_jacobian_blocks)
from contractnet.synthesis import REFERENCE_GAINS

from oracles import random_toy


def scalar_net(N=3, a=-1.0, chans=(), delays=None):
    agents = tuple(AgentDynamics.linear([[a]]) for _ in range(N))
    return MultiplexNetwork(agents, 0, tuple(chans), delays or DelaySchedule.none(),
                            DisturbanceModel.zero(N, 0, 1))


def numpy_rows(jb, T, eta):
    """C2/C3 rows from numpy's eigvalsh and 2-norm."""
    N = jb.diag.shape[0]
    Ti, Tinv = T.blocks, [np.linalg.inv(b) for b in T.blocks]
    c2 = np.array([np.linalg.eigvalsh(0.5 * (M + M.T)).max()
                   for M in (Ti[i] @ jb.diag[i] @ Tinv[i] for i in range(N))])
    for (i, j), A in jb.off.items():
        c2[i] += eta[j] / eta[i] * np.linalg.norm(Ti[i] @ A @ Tinv[j], 2)
    c3 = np.zeros(N)
    for slot in jb.delayed:
        for (i, j), B in slot.items():
            c3[i] += eta[j] / eta[i] * np.linalg.norm(Ti[i] @ B @ Tinv[j], 2)
    return c2, c3


def test_decoupled_contracting_scalars():
    net = scalar_net()
    cert = certify(net, Transformation.identity(3, 1), NormSpec.uniform(3))
    assert cert.sigma_bar == pytest.approx(1.0, abs=1e-14)
    assert cert.feasible and cert.sigma_under == 0.0
    assert cert.lam == pytest.approx(cert.sigma_bar)


def test_offdiagonal_additivity():
    T = Transformation.identity(3, 1)
    spec = NormSpec(2, (1.0, 2.0, 0.5))
    base = check_c2([assemble_jacobian_blocks(scalar_net())], T, spec)
    g = 0.3
    net = scalar_net(chans=[Channel(0, 2, False, np.zeros((1, 1, 1)), np.full((1, 1, 1), g))])
    more = check_c2([assemble_jacobian_blocks(net)], T, spec)
    assert more.per_agent[0] - base.per_agent[0] == pytest.approx(0.5 / 1.0 * g, abs=1e-15)
    np.testing.assert_array_equal(more.per_agent[1:], base.per_agent[1:])


def test_c3_single_delayed_gain():
    T = Transformation.identity(2, 1)
    spec = NormSpec.uniform(2)
    assert check_c3([assemble_jacobian_blocks(scalar_net(2))], T, spec).value == 0.0
    g = -0.37
    ch = Channel(0, 1, True, np.zeros((1, 1, 1)), np.full((1, 1, 1), g))
    net = scalar_net(2, chans=[ch], delays=DelaySchedule.constant([(0, 1)], 0.2))
    assert check_c3([assemble_jacobian_blocks(net)], T, spec).value == pytest.approx(abs(g))


def test_scalar_m0_equals_inf_measure():
    rng = np.random.default_rng(3)
    N = 4
    G = rng.uniform(0, 0.3, size=(N, N))
    chans = [Channel(i, j, False, np.zeros((1, 1, 1)), np.full((1, 1, 1), G[i, j]))
             for i in range(N) for j in range(N) if i != j]
    net = scalar_net(N, a=-1.5, chans=chans)
    J = -1.5 * np.eye(N) + G - np.diag(np.diag(G))
    mu_inf = max(J[i, i] + sum(abs(J[i, j]) for j in range(N) if j != i) for i in range(N))
    cert = certify(net, Transformation.identity(N, 1), NormSpec(math.inf, (1.0,) * N))
    assert cert.sigma_bar == pytest.approx(-mu_inf, abs=1e-14)


def test_mtdc_reference_gains_against_numpy():
    p = MtdcParams()
    net = build_mtdc(p, REFERENCE_GAINS)
    T = reference_transform(p)
    cert = certify(net, T, NormSpec.uniform(30))
    c2, c3 = numpy_rows(assemble_jacobian_blocks(net), T, np.ones(30))
    np.testing.assert_allclose(cert.c2_rows, c2, rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(cert.c3_rows, c3, rtol=1e-10, atol=1e-13)
    assert cert.feasible
    assert 0 < cert.sigma_under < cert.sigma_bar and cert.lam > 0
    # ring symmetry: every row identical
    assert np.ptp(cert.c2_rows) < 1e-12 and np.ptp(cert.c3_rows) < 1e-15
    assert HalanayParams(cert.sigma_bar, cert.sigma_under, cert.tau_max).residual(cert.lam) <= 1e-12


def test_scaled_gains_infeasible_with_rows():
    big = tuple(g * 1000 if k >= 3 else g for k, g in enumerate(REFERENCE_GAINS))
    cert = certify_mtdc(MtdcParams(terminals=6), big)
    assert not cert.feasible and math.isnan(cert.lam)
    assert any("agent" in v for v in cert.violations)
    with pytest.raises(EnvelopeError):
        iss_envelope(cert, 1.0, 1.0, 1.0)


def test_eta_scale_invariance():
    net, T, spec, cert = random_toy(5)
    scaled = certify(net, T, spec.scaled(7.3))
    assert scaled.sigma_bar == pytest.approx(cert.sigma_bar, rel=1e-12)
    assert scaled.sigma_under == pytest.approx(cert.sigma_under, rel=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_permutation_invariance(seed):
    net, T, spec, cert = random_toy(seed)
    N = net.N
    perm = np.random.default_rng(seed).permutation(N)
    inv = np.argsort(perm)
    jb = assemble_jacobian_blocks(net)

    class Relabeled:
        diag = jb.diag[perm]
        off = {(int(inv[i]), int(inv[j])): A for (i, j), A in jb.off.items()}
        delayed = [{(int(inv[i]), int(inv[j])): B for (i, j), B in s.items()} for s in jb.delayed]

    spec_p = NormSpec(spec.local_p, tuple(spec.eta[k] for k in perm))
    c2 = check_c2([Relabeled], T.permuted(perm), spec_p)
    c3 = check_c3([Relabeled], T.permuted(perm), spec_p)
    np.testing.assert_allclose(c2.per_agent, cert.c2_rows[perm], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(c3.per_agent, cert.c3_rows[perm], rtol=1e-12, atol=1e-14)


def test_envelope_values():
    net, T, spec, cert = random_toy(1)
    env = iss_envelope(cert, 2.0, 0.5, 0.3, t0=1.0)
    gain = cert.cond_T
    assert env(1.0) == pytest.approx(gain * 2.5 + gain * 0.3 / cert.margin)
    assert env(1e6) == pytest.approx(gain * 0.3 / cert.margin)
    decay = iss_envelope(cert, 1.0, 0.0, 0.0)
    assert decay(40.0 / cert.lam) == pytest.approx(gain * math.exp(-40.0))
    with pytest.raises(EnvelopeError):
        iss_envelope(cert, -1.0, 0.0, 0.0)


def test_transform_validation():
    with pytest.raises(TransformError):
        Transformation((np.zeros((2, 2)),))
    with pytest.raises(TransformError):
        Transformation((np.diag([1.0, 1e-13]),))
    with pytest.raises(TransformError):
        Transformation((np.ones((2, 3)),))
    T = Transformation((np.diag([2.0, 1.0]), np.diag([1.0, 4.0])))
    assert T.composite_condition(2) == pytest.approx(4.0 * 1.0)


def test_box_samples_take_the_worst_case():
    def f(x, t):
        return -x - x ** 3 * 0.1

    def jac(x, t):
        return np.diag(-1 - 0.3 * x ** 2)

    agents = tuple(AgentDynamics(1, f, jac) for _ in range(2))
    net = MultiplexNetwork(agents, 0, (), DelaySchedule.none(), DisturbanceModel.zero(2, 0, 1))
    T, spec = Transformation.identity(2, 1), NormSpec.uniform(2)
    cert = certify(net, T, spec, box_samples(net, -2, 2, 50, seed=0))
    assert cert.samples == 50
    assert 1.0 < cert.sigma_bar < 1.0 + 1e-2  # worst sample sits near x = 0
    assert certify(net, T, spec).sigma_bar == pytest.approx(1.0)


def test_certificate_dict_is_json_ready():
    import json
    cert = certify_mtdc(MtdcParams(terminals=4), REFERENCE_GAINS)
    d = json.loads(json.dumps(cert.to_dict()))
    assert d["feasible"] and len(d["rows"]) == 4 and d["norm"]["local_p"] == 2
    assert not d["transform"]["per_agent"] and len(d["transform"]["blocks"]) == 1
