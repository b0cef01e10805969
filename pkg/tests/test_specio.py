import json

import numpy as np
import pytest

from contractnet.errors import SpecParseError
from contractnet.netmodel import assemble_jacobian_blocks
from contractnet.specio import (load_json, load_network, load_norm, load_transform, network_from_dict,
                                search_from_dict, sim_from_dict, transform_from_dict)

from pathlib import Path

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_syntax_error_location(tmp_path):
    p = write(tmp_path, "bad.json", '{\n  "agents": 3,\n  "dim": ,\n}')
    with pytest.raises(SpecParseError, match=r"bad\.json:3:10"):
        load_json(p)


def test_semantic_error_location(tmp_path):
    p = write(tmp_path, "net.json", '{\n  "agents": 0\n}')
    with pytest.raises(SpecParseError, match=r"net\.json:2:3: network needs at least one agent"):
        load_network(p)


def test_missing_file(tmp_path):
    with pytest.raises(SpecParseError, match="cannot read"):
        load_json(tmp_path / "nope.json")


def test_ring_example_file():
    net = load_network(CONFIGS / "ring3_network.json")
    assert (net.N, net.n, net.m, net.q) == (3, 1, 1, 6)
    jb = assemble_jacobian_blocks(net)
    # self -2 and two free diffusive 0.05 shifts; delayed self terms sit in the delayed slots
    np.testing.assert_allclose(jb.diag[0], [[-0.2 - 2.0 - 0.1, 1.0], [-1.0, 0.0]])
    slot = jb.delayed[net.delays.index((0, 1))]
    np.testing.assert_allclose(slot[(0, 0)][:, 0], [-0.01, -0.005])
    np.testing.assert_allclose(slot[(0, 1)][:, 0], [0.01, 0.005])
    assert net.disturbance.poly[0, 0, 0] == 2.0 and net.disturbance.residual_sup[1] == 0.5
    T = load_transform(CONFIGS / "ring3_transform.json", 3, 2)
    assert T.count == 3


def test_mtdc_example_file():
    net = load_network(CONFIGS / "mtdc_network.json")
    assert net.N == 30 and net.q == 60
    T = load_transform(CONFIGS / "mtdc_transform.json", 30, 3)
    np.testing.assert_array_equal(T.blocks[0], [[1, -0.5, 0], [0, 1, -1], [0, 0, 1]])
    assert load_norm(CONFIGS / "uniform_norm.json", 30).eta == (1.0,) * 30


def test_edges_and_layers():
    d = {"agents": 2, "dim": 2, "order": 0, "topology": {"kind": "edges", "edges": [[0, 1]]},
         "layers": {"diffusive": [[[1.0, 0.0], [0.0, 2.0]]]}}
    jb = assemble_jacobian_blocks(network_from_dict(d))
    np.testing.assert_array_equal(jb.off[(0, 1)], np.diag([1.0, 2.0]))
    assert (1, 0) not in jb.off


@pytest.mark.parametrize("bad, key", [
    ({"agents": 2, "topology": {"kind": "edges", "edges": [[0, 0]]}}, "self-loop"),
    ({"agents": 2, "topology": {"kind": "star"}}, "unknown topology"),
    ({"agents": 2, "order": 1, "layers": {"self": [1.0]}}, "needs 2 layer gains"),
    ({"agents": 2, "topology": {"kind": "ring"}, "layers": {"delayed": [0.1]},
      "delays": {"kind": "sinusoidal", "base": 0.1, "amplitude": 0.2}}, "amplitude exceeds"),
    ({"agents": 2, "layers": {"leader": [1.0]}}, "without a leader"),
    ({"agents": 2, "desired": {"kind": "leader"}}, "not defined"),
    ({"agents": 2, "dynamics": {"kind": "duffing"}}, "unknown dynamics"),
    ({"dynamics": {"kind": "mtdc", "gains": [1, 1, 1, 0, 0, 0], "terminals": 2}}, "at least 3"),
])
def test_network_errors(bad, key):
    with pytest.raises(SpecParseError, match=key):
        network_from_dict(bad)


def test_leader_network():
    d = {"agents": 2, "leader": {"kind": "sine", "amplitude": [1.0]}, "layers": {"leader": [2.0]},
         "desired": {"kind": "leader"}}
    net = network_from_dict(d)
    np.testing.assert_allclose(net.desired_state(np.pi / 2), [[1.0], [1.0]])


def test_transform_errors():
    with pytest.raises(SpecParseError, match="singular"):
        transform_from_dict({"blocks": [[[1, 1], [1, 1]]]}, 2, 2)
    with pytest.raises(SpecParseError, match="need 3 blocks"):
        transform_from_dict({"blocks": [[[1.0]]], "per_agent": True}, 3, 1)
    with pytest.raises(SpecParseError, match="3x3"):
        transform_from_dict({"alpha": 1.0}, 2, 2)
    assert transform_from_dict({"kind": "identity"}, 2, 4).dim == 4


def test_sim_and_search():
    cfg = sim_from_dict(json.loads((CONFIGS / "ring3_sim.json").read_text()))
    assert cfg.horizon == 10.0 and cfg.seed == 1
    with pytest.raises(SpecParseError):
        sim_from_dict({"horizon": 1.0, "dt": -1})
    with pytest.raises(SpecParseError):
        sim_from_dict({})
    s = search_from_dict(json.loads((CONFIGS / "search_default.json").read_text()))
    assert s.plant.terminals == 30 and s.q_eff == 60 and len(s.alpha_grid) == 7
    with pytest.raises(SpecParseError):
        search_from_dict({"alpha_grid": []})
