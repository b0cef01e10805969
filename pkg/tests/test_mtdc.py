import math

import numpy as np
import pytest

from contractnet.errors import ConfigError
from contractnet.mtdc import (MtdcParams, build_mtdc, certify_mtdc, certify_with_eta_fallback, eta_grid,
                              reference_gains, ring_pairs, run_case_study, with_params)
from contractnet.netmodel import verify_c1
from contractnet.simulator import SimConfig, simulate
from contractnet.synthesis import REFERENCE_GAINS



@pytest.mark.parametrize("N,q", [(3, 6), (30, 60)])
def test_delay_count(N, q):
    net = build_mtdc(MtdcParams(terminals=N), REFERENCE_GAINS)
    assert net.q == q and len(ring_pairs(N)) == q
    assert net.tau_max == pytest.approx(0.2)


def test_residual_bounded_by_declared_sup():
    net = build_mtdc(MtdcParams(), REFERENCE_GAINS)
    ts = np.linspace(0, 40, 8001)
    w = np.array([net.disturbance.w(t)[0, 0] for t in ts])
    assert np.max(np.abs(w)) <= net.disturbance.residual_sup[0] == 1.0
    env = np.array([net.disturbance.residual_envelope(t)[0] for t in ts])
    assert np.all(np.abs(w) <= env + 1e-15)
    assert net.disturbance.residual_sup[1:].sum() == 0


def test_disturbance_off():
    p = MtdcParams(terminals=5, disturbance_on=False, horizon=1.0)
    net = build_mtdc(p, REFERENCE_GAINS)
    assert not net.disturbance.poly.any()
    tr = simulate(net, SimConfig(0.0, 1.0, 1e-3, x0=np.zeros((5, 1))))
    assert not tr.x.any() and not tr.r.any()


def test_ring_rows_symmetric_and_reference_gains_feasible():
    cert = certify_mtdc(MtdcParams(), reference_gains())
    assert cert.feasible
    assert np.ptp(cert.c2_rows) == 0 and np.ptp(cert.c3_rows) == 0
    cert2, eta, label = certify_with_eta_fallback(MtdcParams(), reference_gains())
    assert label == "uniform" and eta == (1.0,) * 30


def test_physical_capacitance_scaling_blocks_certificate():
    # with every closed-loop gain divided by c = 1e-3 the delayed rows grow
    # a thousandfold while the integrator superdiagonal stays at one
    p = MtdcParams(capacitance_mode="physical")
    cert, eta, label = certify_with_eta_fallback(p, reference_gains())
    assert not cert.feasible and label == "none"


def test_c1_holds():
    assert verify_c1(build_mtdc(MtdcParams(terminals=6), REFERENCE_GAINS), np.linspace(0, 40, 9)).passed


def test_eta_grid():
    g = eta_grid(4, agent=2)
    assert g[0] == (1.0,) * 4 and len(g) == 3
    assert g[1][2] == 0.5 and g[2][2] == 2.0


def test_param_validation():
    with pytest.raises(ConfigError):
        MtdcParams(terminals=2)
    with pytest.raises(ConfigError):
        MtdcParams(capacitance_mode="si")
    with pytest.raises(ConfigError):
        MtdcParams(delay_base=0.05, delay_amplitude=0.1)
    with pytest.raises(ConfigError):
        MtdcParams(terminals=4, disturbed_agent=4)
    assert with_params(MtdcParams(), terminals=5).terminals == 5


def test_short_case_study_with_supplied_gains():
    p = MtdcParams(terminals=6, horizon=3.0, tail=1.0)
    rep = run_case_study(p, gains=REFERENCE_GAINS)
    assert rep.source == "supplied" and rep.certificate.feasible
    assert rep.trace.x.shape == (3001, 6, 1)
    assert set(rep.checks) == {"tail_ratio", "ramp_compensation", "envelope_dominance", "zeta_band"}
    assert rep.checks["envelope_dominance"]["passed"]
    d = rep.to_dict()
    assert d["gains_source"] == "supplied" and "rows" not in d["certificate"]


def test_initial_voltages_seeded_standard_normal():
    p = MtdcParams(terminals=30)
    net = build_mtdc(p, REFERENCE_GAINS)
    tr = simulate(net, SimConfig(0.0, 0.01, 1e-3, seed=p.seed))
    v0 = tr.x[0, :, 0]
    np.testing.assert_array_equal(v0, np.random.default_rng(p.seed).standard_normal(30))


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="reference gains at unit capacitance leave a tail ratio "
                   "near 3e-3, above the 1e-3 target")
def test_reference_gains_full_run_regulates():
    rep = run_case_study(MtdcParams(), gains=REFERENCE_GAINS)
    assert rep.checks["tail_ratio"]["passed"] and rep.checks["ramp_compensation"]["passed"]
