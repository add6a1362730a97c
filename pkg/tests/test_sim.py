from dataclasses import replace

import numpy as np
import pytest

from oracles import edges_of, random_adjacency, weighted_fraction_oracle
from peerexposure import AttributedGraph, InputError
from peerexposure.baselines import fraction_exposure
from peerexposure.graph import mutual_connections
from peerexposure.netgen import NetGenConfig, generate
from peerexposure.sim import (
    MECHANISMS,
    SimConfig,
    assign_treatments,
    cosine_weight,
    flip_peers,
    gen_outcomes,
    read_sim_csv,
    simulate,
    true_exposure,
    write_sim_csv,
)

G = generate(NetGenConfig(n=200, ba_m=3, seed=5))


def attributed(a, rng, fx=5, z=None):
    e = edges_of(a)
    za = rng.uniform(0.1, 1, size=(len(e), 1)) if z is None else np.full((len(e), 1), z)
    return AttributedGraph(len(a), e, rng.normal(size=(len(a), fx)), za)


def test_treatments_deterministic_and_binary():
    cfg = SimConfig(seed=3)
    t = assign_treatments(G, cfg)
    assert set(np.unique(t).tolist()) <= {0, 1}
    np.testing.assert_array_equal(t, assign_treatments(G, cfg))


def test_zero_attributes_give_fair_coin():
    g = G.with_attributes(np.zeros_like(G.node_attrs), G.edge_attrs)
    rates = [assign_treatments(g, SimConfig(seed=s)).mean() for s in range(20)]
    assert abs(np.mean(rates) - 0.5) < 0.02


def test_no_spillover_ignores_neighbours():
    # with tau_c = 0 the probability only reads the node's own attributes,
    # so rewiring everyone else leaves a node with identical own attributes unchanged
    cfg = SimConfig(tau_c=0.0, seed=4)
    other = generate(NetGenConfig(n=200, ba_m=1, seed=99)).with_attributes(G.node_attrs, None)
    other = AttributedGraph(other.n, other.edges, G.node_attrs, np.ones((other.num_edges, 1)))
    np.testing.assert_array_equal(assign_treatments(G, cfg), assign_treatments(other, cfg))


def test_empty_confounder_subset_rejected():
    with pytest.raises(InputError):
        assign_treatments(G, SimConfig(conf_subset=()))
    with pytest.raises(InputError):
        assign_treatments(G, SimConfig(conf_subset=(0, 42)))


@pytest.mark.parametrize("mechanism", ["mutual", "attr_sim", "tie_strength"])
def test_weighted_mechanisms_extremes(mechanism):
    k4 = AttributedGraph(4, [(u, v) for u in range(4) for v in range(u + 1, 4)], np.ones((4, 2)), np.ones((6, 1)))
    np.testing.assert_allclose(true_exposure(k4, np.ones(4), mechanism), 1.0)
    np.testing.assert_allclose(true_exposure(k4, np.zeros(4), mechanism), 0.0)


def test_no_treated_peers_is_zero_for_every_mechanism():
    for mech in MECHANISMS:
        assert np.all(true_exposure(G, np.zeros(G.n, dtype=int), mech) == 0)


def test_mutual_on_path_is_zero():
    path = AttributedGraph(5, [(i, i + 1) for i in range(4)], np.ones((5, 1)), np.ones((4, 1)))
    np.testing.assert_array_equal(true_exposure(path, np.ones(5), "mutual"), 0.0)


def test_weighted_mechanisms_match_oracle():
    rng = np.random.default_rng(7)
    a = random_adjacency(rng, 12, 0.4)
    g = attributed(a, rng)
    t = rng.integers(0, 2, 12)
    mut = weighted_fraction_oracle(a, t, lambda i, j: np.sqrt(mutual_connections(g, i, j)))
    np.testing.assert_allclose(true_exposure(g, t, "mutual"), mut, atol=1e-12)
    x = g.node_attrs
    sim = weighted_fraction_oracle(a, t, lambda i, j: max(0.0, x[i] @ x[j] / np.linalg.norm(x[i]) / np.linalg.norm(x[j])))
    np.testing.assert_allclose(true_exposure(g, t, "attr_sim"), sim, atol=1e-12)
    tie = weighted_fraction_oracle(a, t, lambda i, j: g.edge_attr(i, j)[0])
    np.testing.assert_allclose(true_exposure(g, t, "tie_strength"), tie, atol=1e-12)


def test_uniform_tie_strength_equals_fraction():
    rng = np.random.default_rng(8)
    g = attributed(random_adjacency(rng, 15, 0.3), rng, z=0.4)
    t = rng.integers(0, 2, 15)
    np.testing.assert_allclose(true_exposure(g, t, "tie_strength"), fraction_exposure(g, t), atol=1e-12)


def test_exposure_ranges():
    t = assign_treatments(G, SimConfig(seed=1))
    for mech in MECHANISMS:
        rho = true_exposure(G, t, mech)
        assert rho.min() >= 0
        if mech == "components":
            assert np.all(rho == np.round(rho))
        else:
            assert rho.max() <= 1


def test_unknown_mechanism():
    with pytest.raises(InputError):
        true_exposure(G, np.zeros(G.n), "gossip")


def test_cosine_weight_clipped():
    assert cosine_weight(np.array([1.0, 0]), np.array([-1.0, 0])) == 0.0
    assert cosine_weight(np.array([1.0, 1]), np.array([2.0, 2])) == pytest.approx(1.0)
    assert cosine_weight(np.zeros(2), np.ones(2)) == 0.0


def test_flip_peers():
    assert flip_peers([1, 0, 1], 0).tolist() == [1, 1, 0]
    t = np.array([0, 1, 1, 0])
    np.testing.assert_array_equal(flip_peers(flip_peers(t, 2), 2), t)
    with pytest.raises(InputError):
        flip_peers(t, 4)


def test_zero_peer_coefficients_kill_effect():
    sim = simulate(G, SimConfig(delta_exp=0.0, delta_em=0.0, seed=2))
    assert np.all(sim.hpe_true == 0)
    np.testing.assert_array_equal(sim.y, sim.y_cf)


def test_treated_units_get_double_coefficient():
    cfg = SimConfig(mechanism="mutual", delta_exp=1.0, delta_em=1.0, seed=6)
    sim = simulate(G, cfg)
    moved = sim.rho_true != sim.rho_true_cf
    treated = (sim.t == 1) & moved
    ratio = sim.hpe_true[treated] / (sim.rho_true - sim.rho_true_cf)[treated]
    np.testing.assert_allclose(ratio, 2.0)
    control = (sim.t == 0) & moved
    np.testing.assert_allclose(sim.hpe_true[control] / (sim.rho_true - sim.rho_true_cf)[control], 1.0)


def test_isolated_node_has_no_peer_effect():
    g = AttributedGraph(3, [(0, 1)], np.ones((3, 5)), np.ones((1, 1)))
    sim = gen_outcomes(g, np.array([1, 0, 1]), SimConfig())
    assert sim.hpe_true[2] == 0
    assert sim.y[2] == sim.y_cf[2]


def test_counterfactual_uses_flipped_peers_per_node():
    cfg = SimConfig(mechanism="attr_sim", seed=3)
    sim = simulate(G, cfg)
    for i in [0, 7, 42]:
        alt = true_exposure(G, flip_peers(sim.t, i), cfg.mechanism)[i]
        assert alt == pytest.approx(sim.rho_true_cf[i])


def test_hpe_is_noise_independent():
    a = simulate(G, SimConfig(seed=4, noise_seed=1))
    b = simulate(G, SimConfig(seed=4, noise_seed=2))
    np.testing.assert_array_equal(a.hpe_true, b.hpe_true)
    assert not np.array_equal(a.y, b.y)
    np.testing.assert_allclose(a.y - a.y_cf, a.hpe_true, atol=1e-12)


def test_semi_synthetic_effect_modification():
    g = generate(NetGenConfig(n=200, ba_m=3, attr_dim=12, seed=5))
    cfg = SimConfig(em_subset=(8, 9, 10), seed=2)
    sim = simulate(g, cfg)
    np.testing.assert_allclose(sim.y - sim.y_cf, sim.hpe_true, atol=1e-12)
    plain = simulate(g, replace(cfg, em_subset=()))
    assert not np.allclose(sim.hpe_true, plain.hpe_true)
    np.testing.assert_array_equal(sim.hpe_true[sim.t == 0], plain.hpe_true[plain.t == 0])


def test_sim_csv_round_trip(tmp_path):
    sim = simulate(G, SimConfig(seed=1))
    path = tmp_path / "sim.csv"
    write_sim_csv(sim, path)
    assert path.read_text().splitlines()[0] == "node,t,y,y_cf,rho,rho_cf,hpe"
    back = read_sim_csv(path)
    for field in ("t", "y", "y_cf", "rho_true", "rho_true_cf", "hpe_true"):
        np.testing.assert_array_equal(getattr(back, field), getattr(sim, field))
