"""Model assembly tests: identity paths, composition against a scripted
oracle, adaptor degeneration, fast-shared mode, parameter counting,
checkpoint round-trips, end-to-end gradients."""

import numpy as np
import pytest

import heraldnet.autodiff as ad
from heraldnet import (ConfigError, HGNNModel, Hypergraph, ModelConfig, Tape,
                       Tensor, herald_forward, spectral_operators)
from heraldnet.adaptor import a_schedule

from conftest import FD_STEP, GRAD_TOL, central_difference_grad, relative_error


def _toy_graph(seed=0, n=6, d=4):
    rng = np.random.default_rng(seed)
    hg = Hypergraph(n, [(0, 1, 2), (2, 3), (3, 4, 5), (0, 5)])
    X = rng.normal(size=(n, d))
    return hg, X


class TestConfig:
    def test_default_herald_placement_is_latter_two(self):
        cfg = ModelConfig(in_dim=4, num_classes=2, num_layers=3)
        assert cfg.resolved_herald_layers() == (2, 3)
        cfg4 = ModelConfig(in_dim=4, num_classes=2, num_layers=4)
        assert cfg4.resolved_herald_layers() == (3, 4)

    def test_layer_dims_node_task(self):
        cfg = ModelConfig(in_dim=10, num_classes=3, hidden_dim=8, num_layers=3)
        specs = cfg.layer_specs()
        assert [(s.in_dim, s.out_dim) for s in specs] == [(10, 8), (8, 8), (8, 3)]
        assert [s.activation for s in specs] == ["relu", "relu", "identity"]

    def test_rejects_out_of_depth_herald_layer(self):
        with pytest.raises(ConfigError):
            ModelConfig(in_dim=4, num_classes=2, num_layers=2,
                        herald_layers=(3,))

    def test_rejects_unknown_mode(self):
        with pytest.raises(ConfigError):
            ModelConfig(in_dim=4, num_classes=2, herald_mode="sometimes")


class TestForwardNode:
    def test_full_identity_path(self):
        # 1 layer, W = I, identity activation, singleton hyperedges (N = I),
        # no bias: logits must equal the input features exactly.
        hg = Hypergraph(3, [(0,), (1,), (2,)])
        X = np.random.default_rng(0).normal(size=(3, 3))
        cfg = ModelConfig(in_dim=3, num_classes=3, num_layers=1,
                          hidden_dim=3, dropout=0.0, bias=False)
        model = HGNNModel(cfg, seed=0)
        model.layer_weights[0].data = np.eye(3)
        logits = model.forward_node(X, hg)
        np.testing.assert_array_equal(logits.data, X)

    def test_forced_a_zero_matches_herald_off(self):
        hg, X = _toy_graph()
        kwargs = dict(in_dim=4, num_classes=2, hidden_dim=5, num_layers=3,
                      dropout=0.0)
        on = HGNNModel(ModelConfig(herald_mode="on", use_a_schedule=False,
                                   fixed_a=0.0, **kwargs), seed=3)
        off = HGNNModel(ModelConfig(herald_mode="off", **kwargs), seed=3)
        out_on = on.forward_node(X, hg)
        out_off = off.forward_node(X, hg)
        np.testing.assert_array_equal(out_on.data, out_off.data)

    @pytest.mark.parametrize("mode", ["off", "on", "fast"])
    def test_matches_scripted_composition_oracle(self, mode):
        """Recompose the documented pipeline step by step outside the model
        class and demand identical logits."""
        hg, X = _toy_graph(seed=5)
        cfg = ModelConfig(in_dim=4, num_classes=2, hidden_dim=5, num_layers=3,
                          herald_mode=mode, dropout=0.0)
        model = HGNNModel(cfg, seed=7)
        logits = model.forward_node(X, hg)

        ops = spectral_operators(hg)
        current = ad.constant(X)
        shared = None
        for l in (1, 2, 3):
            if mode == "on" and l in (2, 3):
                hout = herald_forward(current, hg, ops.propagation,
                                      model.herald_params[l], a_schedule(l))
                n_hat = hout.n_hat
            elif mode == "fast" and l >= 2:
                if l == 2:
                    shared = herald_forward(current, hg, ops.propagation,
                                            model.herald_params[2],
                                            a_schedule(2)).n_hat
                n_hat = shared
            else:
                n_hat = ad.constant(ops.propagation)
            current = ad.matmul(ad.matmul(n_hat, current),
                                model.layer_weights[l - 1])
            current = ad.add_rowvec(current, model.layer_biases[l - 1])
            if l < 3:
                current = ad.relu(current)
        np.testing.assert_array_equal(logits.data, current.data)

    def test_feature_width_mismatch_raises(self):
        hg, X = _toy_graph()
        model = HGNNModel(ModelConfig(in_dim=9, num_classes=2), seed=0)
        with pytest.raises(Exception, match="width|in_dim"):
            model.forward_node(X, hg)


class TestForwardGraph:
    def test_permutation_invariance_of_graph_logits(self):
        hg, X = _toy_graph(seed=2)
        cfg = ModelConfig(in_dim=4, num_classes=3, hidden_dim=6, num_layers=2,
                          herald_mode="on", readout="sum", dropout=0.0)
        model = HGNNModel(cfg, seed=1)
        base = model.forward_graph(X, hg).data
        rng = np.random.default_rng(0)
        for _ in range(5):
            perm = rng.permutation(hg.num_nodes)
            P = np.zeros((hg.num_nodes,) * 2)
            P[perm, np.arange(hg.num_nodes)] = 1.0
            permuted = model.forward_graph(P @ X, hg.permuted(perm)).data
            np.testing.assert_allclose(permuted, base, atol=1e-10)

    def test_zero_features_zero_bias_give_zero_logits(self):
        hg, _ = _toy_graph()
        cfg = ModelConfig(in_dim=4, num_classes=2, hidden_dim=3, num_layers=2,
                          readout="sum", dropout=0.0, bias=False)
        model = HGNNModel(cfg, seed=0)
        logits = model.forward_graph(np.zeros((6, 4)), hg)
        np.testing.assert_array_equal(logits.data, np.zeros((1, 2)))

    def test_graph_forward_requires_sum_readout(self):
        hg, X = _toy_graph()
        model = HGNNModel(ModelConfig(in_dim=4, num_classes=2), seed=0)
        with pytest.raises(ConfigError):
            model.forward_graph(X, hg)


class TestFastShared:
    def test_single_params_instance_vs_two(self):
        kwargs = dict(in_dim=4, num_classes=2, hidden_dim=5, num_layers=3)
        fast = HGNNModel(ModelConfig(herald_mode="fast", **kwargs), seed=0)
        per_layer = HGNNModel(ModelConfig(herald_mode="on", **kwargs), seed=0)
        assert len(fast.herald_params) == 1
        assert len(per_layer.herald_params) == 2
        assert fast.parameter_count() < per_layer.parameter_count()

    def test_fast_a_zero_collapses_to_plain(self):
        hg, X = _toy_graph()
        kwargs = dict(in_dim=4, num_classes=2, hidden_dim=5, num_layers=3,
                      dropout=0.0)
        fast = HGNNModel(ModelConfig(herald_mode="fast", use_a_schedule=False,
                                     fixed_a=0.0, **kwargs), seed=4)
        off = HGNNModel(ModelConfig(herald_mode="off", **kwargs), seed=4)
        np.testing.assert_array_equal(fast.forward_node(X, hg).data,
                                      off.forward_node(X, hg).data)

    def test_fast_and_per_layer_differ_at_final_layer(self):
        hg, X = _toy_graph()
        kwargs = dict(in_dim=4, num_classes=2, hidden_dim=5, num_layers=3,
                      dropout=0.0)
        fast = HGNNModel(ModelConfig(herald_mode="fast", **kwargs), seed=4)
        on = HGNNModel(ModelConfig(herald_mode="on", **kwargs), seed=4)
        assert not np.allclose(fast.forward_node(X, hg).data,
                               on.forward_node(X, hg).data)


class TestParameterCount:
    def test_adaptor_contribution(self):
        # one adaptor at width h over input dim d adds 2 d h + h
        base = ModelConfig(in_dim=4, num_classes=2, hidden_dim=4,
                           num_layers=2, herald_width=3, bias=False)
        off = HGNNModel(base, seed=0)
        on_cfg = ModelConfig(in_dim=4, num_classes=2, hidden_dim=4,
                             num_layers=2, herald_width=3, bias=False,
                             herald_mode="on", herald_layers=(2,))
        on = HGNNModel(on_cfg, seed=0)
        assert on.parameter_count() - off.parameter_count() == 2 * 4 * 3 + 3

    def test_off_equals_plain_count(self):
        cfg = ModelConfig(in_dim=7, num_classes=3, hidden_dim=5, num_layers=3)
        model = HGNNModel(cfg, seed=0)
        expected = 7 * 5 + 5 * 5 + 5 * 3 + 5 + 5 + 3  # weights + biases
        assert model.parameter_count() == expected

    def test_count_independent_of_graph_size(self):
        cfg = ModelConfig(in_dim=4, num_classes=2, herald_mode="on")
        m = HGNNModel(cfg, seed=0)
        count = m.parameter_count()
        hg_small, X_small = _toy_graph(n=6, d=4)
        m.forward_node(X_small, hg_small)
        assert m.parameter_count() == count  # nothing grows with |V|


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        cfg = ModelConfig(in_dim=4, num_classes=3, hidden_dim=5, num_layers=3,
                          herald_mode="fast")
        model = HGNNModel(cfg, seed=9)
        path = tmp_path / "ckpt.json"
        model.save(path)
        restored = HGNNModel.load(path)
        for (name_a, t_a), (name_b, t_b) in zip(model.parameters(),
                                                restored.parameters()):
            assert name_a == name_b
            assert np.array_equal(t_a.data, t_b.data), name_a
        assert restored.config == model.config

    def test_restored_model_same_forward(self, tmp_path):
        hg, X = _toy_graph()
        cfg = ModelConfig(in_dim=4, num_classes=2, hidden_dim=5,
                          herald_mode="on", dropout=0.0)
        model = HGNNModel(cfg, seed=2)
        path = tmp_path / "ckpt.json"
        model.save(path)
        restored = HGNNModel.load(path)
        np.testing.assert_array_equal(model.forward_node(X, hg).data,
                                      restored.forward_node(X, hg).data)

    def test_load_rejects_non_checkpoint(self, tmp_path):
        bogus = tmp_path / "x.json"
        bogus.write_text("{}")
        with pytest.raises(ConfigError):
            HGNNModel.load(bogus)


@pytest.mark.parametrize("seed", range(10))
def test_end_to_end_gradients_on_toy(seed):
    """Finite-difference check for every trainable parameter of a 6-node,
    2-class adaptor-on model."""
    hg, X = _toy_graph(seed=seed)
    labels = np.array([0, 1, 0, 1, 0, 1])
    mask = np.ones(6, dtype=bool)
    cfg = ModelConfig(in_dim=4, num_classes=2, hidden_dim=3, num_layers=3,
                      herald_mode="on", dropout=0.0, sigma=2.0)
    model = HGNNModel(cfg, seed=seed)
    named = model.parameters()

    def forward(arrays):
        probe = HGNNModel(cfg, seed=seed)
        for (name, t), arr in zip(probe.parameters(), arrays):
            t.data = np.array(arr)
        logits, regs = probe.forward_node(X, hg, with_reg=True)
        total = float(ad.masked_cross_entropy(logits, labels, mask).data)
        for reg in regs:
            total += 0.1 * float(reg.data)
        return total

    arrays = [t.data.copy() for _, t in named]
    with Tape() as tape:
        logits, regs = model.forward_node(X, hg, with_reg=True)
        loss = ad.masked_cross_entropy(logits, labels, mask)
        for reg in regs:
            loss = ad.add(loss, ad.scale(reg, 0.1))
    model.zero_grad()
    tape.backward(loss)
    for i, (name, t) in enumerate(named):
        numeric = central_difference_grad(forward, arrays, i, h=FD_STEP)
        assert t.grad is not None, name
        assert relative_error(t.grad, numeric) <= GRAD_TOL, name
