import math

import numpy as np
import numpy.testing as npt
import pytest

from csiloc.data import PACKET_LEN
from csiloc.model import (SaeModel, assemble_latent, decode, encode, forward,
                          gradients, init_model, load_model,
                          reconstruction_loss, save_model)


def zero_params(model: SaeModel) -> None:
    for lp in model.encoder + model.decoder:
        lp.weights[...] = 0.0
        lp.biases[...] = 0.0


class TestInit:
    def test_decoder_chain_classroom(self):
        m = init_model((50, 30, 20, 5), 18, seed=0)
        assert m.decoder[0].weights.shape == (20, 5 + 18)
        assert m.decoder[-1].weights.shape == (90, 50)

    def test_decoder_chain_hall(self):
        m = init_model((50, 30, 10, 5), 18, seed=0)
        shapes = [lp.weights.shape for lp in m.decoder]
        assert shapes == [(10, 15 + 8), (30, 10), (50, 30), (90, 50)]

    def test_seed_determinism(self):
        a = init_model((50, 30, 20, 5), 5, seed=3)
        b = init_model((50, 30, 20, 5), 5, seed=3)
        for x, y in zip(a.param_list(), b.param_list()):
            npt.assert_array_equal(x, y)

    def test_non_decreasing_dims_rejected(self):
        with pytest.raises(ValueError):
            init_model((30, 30, 20, 5), 5, seed=0)


class TestEncodeDecode:
    def test_zero_params_give_half(self, tiny_model):
        zero_params(tiny_model)
        u4, trace = encode(tiny_model, np.zeros(PACKET_LEN))
        npt.assert_array_equal(u4, np.full(3, 0.5))
        for act in trace.activations:
            npt.assert_array_equal(act, np.full_like(act, 0.5))

    def test_sigmoid_ln3(self):
        # one effective neuron: W=[ln 3], input 1 -> sigmoid(ln 3) = 3/4
        m = init_model((6, 5, 4, 3), 2, seed=0)
        zero_params(m)
        m.encoder[0].weights[0, 0] = math.log(3.0)
        x = np.zeros(PACKET_LEN)
        x[0] = 1.0
        u4, trace = encode(m, x)
        assert abs(trace.activations[0][0] - 0.75) < 1e-12

    def test_encode_matches_straightline_recompute(self, tiny_model, rng):
        pkt = rng.uniform(0, 1, PACKET_LEN)
        u4, _ = encode(tiny_model, pkt)
        a = pkt
        for lp in tiny_model.encoder:  # independent recompute
            a = 1.0 / (1.0 + np.exp(-(lp.weights @ a + lp.biases)))
        npt.assert_allclose(u4, a, atol=1e-12)

    def test_decode_zero_params(self, tiny_model):
        zero_params(tiny_model)
        v0, _ = decode(tiny_model, np.zeros(3 + 2))
        npt.assert_array_equal(v0, np.full(PACKET_LEN, 0.5))

    def test_decode_output_length_fixed(self, rng):
        for n in (2, 7, 19):
            m = init_model((6, 5, 4, 3), n, seed=1)
            v0, _ = decode(m, rng.uniform(0, 1, 3 + n))
            assert v0.shape == (PACKET_LEN,)

    def test_decode_matches_straightline_recompute(self, tiny_model, rng):
        latent = rng.uniform(0, 1, 5)
        v0, _ = decode(tiny_model, latent)
        a = latent
        for lp in tiny_model.decoder:
            a = 1.0 / (1.0 + np.exp(-(lp.weights @ a + lp.biases)))
        npt.assert_allclose(v0, a, atol=1e-12)

    def test_dimension_mismatch(self, tiny_model):
        with pytest.raises(ValueError):
            encode(tiny_model, np.zeros(89))
        with pytest.raises(ValueError):
            decode(tiny_model, np.zeros(9))


class TestAssembleLatent:
    def test_onehot_first(self):
        npt.assert_array_equal(assemble_latent([0.2, 0.3], 0, 3),
                               [0.2, 0.3, 1, 0, 0])

    def test_onehot_last(self):
        npt.assert_array_equal(assemble_latent([0.2, 0.3], 2, 3),
                               [0.2, 0.3, 0, 0, 1])

    def test_length(self):
        assert assemble_latent(np.zeros(5), 1, 2).shape == (7,)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            assemble_latent([0.1], 3, 3)
        with pytest.raises(ValueError):
            assemble_latent([0.1], -1, 3)


class TestForward:
    def test_composition(self, tiny_model, rng):
        pkt = rng.uniform(0, 1, PACKET_LEN)
        v0, _ = forward(tiny_model, pkt, 1)
        u4, _ = encode(tiny_model, pkt)
        v0_manual, _ = decode(tiny_model,
                              assemble_latent(u4, 1, tiny_model.label_count))
        npt.assert_array_equal(v0, v0_manual)

    def test_outputs_in_open_unit_interval(self, tiny_model, rng):
        v0, trace = forward(tiny_model, rng.uniform(0, 1, PACKET_LEN), 0)
        for act in trace.activations:
            assert np.all(act > 0.0) and np.all(act < 1.0)

    def test_label_changes_output(self, tiny_model, rng):
        pkt = rng.uniform(0, 1, PACKET_LEN)
        assert np.any(tiny_model.decoder[0].weights[:, 3:] != 0.0)
        v0a, _ = forward(tiny_model, pkt, 0)
        v0b, _ = forward(tiny_model, pkt, 1)
        assert not np.allclose(v0a, v0b)


class TestLoss:
    def test_zero_at_equal(self, rng):
        v = rng.uniform(0, 1, PACKET_LEN)
        assert reconstruction_loss(v, v) == 0.0

    def test_unit_offset(self):
        v = np.zeros(PACKET_LEN)
        d = np.zeros(PACKET_LEN)
        v[0] = 1.0
        assert reconstruction_loss(v, d) == 1.0

    def test_elementwise_oracle(self, rng):
        v = rng.uniform(0, 1, PACKET_LEN)
        d = rng.uniform(0, 1, PACKET_LEN)
        expected = sum((a - b) ** 2 for a, b in zip(v, d))
        assert abs(reconstruction_loss(v, d) - expected) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            reconstruction_loss(np.zeros(89), np.zeros(90))


class TestGradients:
    def test_zero_at_minimum(self, tiny_model):
        # zero params reconstruct 0.5 everywhere; feeding d = 0.5 makes
        # the loss exactly zero, a quadratic minimum
        zero_params(tiny_model)
        grads = gradients(tiny_model, np.full(PACKET_LEN, 0.5), 0)
        for g in grads:
            npt.assert_array_equal(g, np.zeros_like(g))

    @pytest.mark.parametrize("n_labels,seed", [(2, 0), (3, 1), (2, 2)])
    def test_finite_differences(self, n_labels, seed):
        m = init_model((6, 5, 4, 3), n_labels, seed=seed)
        rng = np.random.default_rng(seed)
        pkt = rng.uniform(0, 1, PACKET_LEN)
        label = seed % n_labels
        grads = gradients(m, pkt, label)
        params = m.param_list()
        h = 1e-5
        for pi, p in enumerate(params):
            it = np.nditer(p, flags=["multi_index"])
            while not it.finished:
                ix = it.multi_index
                orig = p[ix]
                p[ix] = orig + h
                lp = reconstruction_loss(forward(m, pkt, label)[0], pkt)
                p[ix] = orig - h
                lm = reconstruction_loss(forward(m, pkt, label)[0], pkt)
                p[ix] = orig
                fd = (lp - lm) / (2 * h)
                g = grads[pi][ix]
                # absolute guard covers finite-difference noise near zero
                assert abs(fd - g) <= 1e-8 \
                    or abs(fd - g) / max(abs(fd), abs(g)) <= 1e-4
                it.iternext()

    def test_single_path_hand_derived_chain_rule(self):
        # collapse the network to one active neuron per layer and compare
        # against the hand-written chain-rule product
        m = init_model((6, 5, 4, 3), 2, seed=0)
        zero_params(m)
        w = [0.7, -0.9, 1.1, 0.8]       # encoder path, neuron 0 -> 0
        a = [0.5, -1.2, 0.6, 1.3]       # decoder path, neuron 0 -> 0
        for li in range(4):
            m.encoder[li].weights[0, 0] = w[li]
            m.decoder[li].weights[0, 0] = a[li]
        pkt = np.full(PACKET_LEN, 0.4)
        pkt[0] = 0.9

        def sig(z):
            return 1.0 / (1.0 + math.exp(-z))

        acts_e = []
        z = pkt[0]
        for wi in w:
            z = sig(wi * z)
            acts_e.append(z)
        acts_d = []
        for ai in a:
            z = sig(ai * z)
            acts_d.append(z)
        v0_0 = acts_d[-1]
        chain = 2.0 * (v0_0 - pkt[0])
        for ai, out in zip(reversed(a), reversed(acts_d)):
            chain *= out * (1.0 - out) * ai
        for wi, out in zip(reversed(w[1:]), reversed(acts_e[1:])):
            chain *= out * (1.0 - out) * wi
        expected = chain * acts_e[0] * (1.0 - acts_e[0]) * pkt[0]

        g = gradients(m, pkt, 0)
        assert abs(g[0][0, 0] - expected) < 1e-10


class TestPersistence:
    def test_save_load_round_trip(self, tiny_model, tmp_path, rng):
        tiny_model.sp_coordinates = [(0, 0.5, 1.5), (1, 2.0, 3.0)]
        path = tmp_path / "model.json"
        save_model(tiny_model, path)
        back = load_model(path)
        assert back.dims == tiny_model.dims
        assert back.label_count == tiny_model.label_count
        assert back.sp_coordinates == tiny_model.sp_coordinates
        pkt = rng.uniform(0, 1, PACKET_LEN)
        for j in range(tiny_model.label_count):
            v1, _ = forward(tiny_model, pkt, j)
            v2, _ = forward(back, pkt, j)
            npt.assert_allclose(v2, v1, rtol=0, atol=1e-15)

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "x.json"
        path.write_text('{"hello": 1}')
        with pytest.raises(ValueError):
            load_model(path)
