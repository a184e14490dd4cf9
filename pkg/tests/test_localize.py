import numpy as np
import numpy.testing as npt
import pytest

import importlib

from csiloc.localize import (estimate_position, label_reconstruction_errors,
                             localize, select_candidates)

# the package re-exports the localize() function under the same name, so
# fetch the module itself for monkeypatching
loc = importlib.import_module("csiloc.localize")
from csiloc.model import assemble_latent, decode, encode, init_model, \
    reconstruction_loss


@pytest.fixture
def located_model(tiny_model):
    tiny_model.sp_coordinates = [(0, 0.0, 0.0), (1, 2.0, 2.0)]
    return tiny_model


class TestLabelErrors:
    def test_single_packet_mean(self, located_model, rng):
        pkt = rng.uniform(0, 1, 90)
        errs = label_reconstruction_errors(located_model, pkt[None, :])
        for j in range(2):
            u4, _ = encode(located_model, pkt)
            v0, _ = decode(located_model, assemble_latent(u4, j, 2))
            npt.assert_allclose(errs[j], reconstruction_loss(v0, pkt),
                                atol=1e-12)

    def test_label_insensitive_model(self, located_model, rng):
        located_model.decoder[0].weights[:, 3:] = 0.0
        errs = label_reconstruction_errors(located_model,
                                           rng.uniform(0, 1, (4, 90)))
        npt.assert_allclose(errs, errs[0], atol=1e-12)

    def test_empty_packets_rejected(self, located_model):
        with pytest.raises(ValueError):
            label_reconstruction_errors(located_model, np.zeros((0, 90)))

    def test_encode_once_decode_per_label(self, located_model, rng,
                                          monkeypatch):
        calls = {"encode": 0, "decode": 0}
        orig_enc = loc.kernels.encode_batch
        orig_dec = loc.kernels.decode_batch

        def counting_enc(*a, **k):
            calls["encode"] += 1
            return orig_enc(*a, **k)

        def counting_dec(*a, **k):
            calls["decode"] += 1
            return orig_dec(*a, **k)

        monkeypatch.setattr(loc.kernels, "encode_batch", counting_enc)
        monkeypatch.setattr(loc.kernels, "decode_batch", counting_dec)
        p, n = 7, located_model.label_count
        label_reconstruction_errors(located_model, rng.uniform(0, 1, (p, 90)))
        assert calls["encode"] == 1          # bottleneck computed once
        assert calls["decode"] == n          # one batched decode per label


class TestSelectCandidates:
    def test_two_smallest(self):
        assert select_candidates([3.0, 1.0, 2.0], 2) == [(1, 1.0), (2, 2.0)]

    def test_all_sorted(self):
        assert select_candidates([3.0, 1.0, 2.0], 3) \
            == [(1, 1.0), (2, 2.0), (0, 3.0)]

    def test_tie_break_lower_label(self):
        assert select_candidates([1.0, 1.0, 5.0], 1) == [(0, 1.0)]

    def test_r_out_of_range(self):
        with pytest.raises(ValueError):
            select_candidates([1.0, 2.0], 3)
        with pytest.raises(ValueError):
            select_candidates([1.0, 2.0], 0)


class TestEstimatePosition:
    COORDS = [(0, 0.0, 0.0), (1, 2.0, 2.0), (2, 1.0, 5.0)]

    def test_single_candidate_exact(self):
        assert estimate_position([(2, 0.7)], self.COORDS) == (1.0, 5.0)

    def test_equal_errors_midpoint(self):
        est = estimate_position([(0, 0.4), (1, 0.4)], self.COORDS)
        npt.assert_allclose(est, (1.0, 1.0))

    def test_weighted_arithmetic(self):
        # errors .1/.2 -> weights 10/5 -> (2/3)*(0,0) + (1/3)*(1,1)... on
        # coords (0,0) and (2,2): ((10*0+5*2)/15, same) = (2/3, 2/3)
        est = estimate_position([(0, 0.1), (1, 0.2)], self.COORDS)
        npt.assert_allclose(est, (2.0 / 3.0, 2.0 / 3.0))

    def test_zero_error_floor_dominates(self):
        est = estimate_position([(0, 0.0), (1, 1.0)], self.COORDS)
        npt.assert_allclose(est, (0.0, 0.0), atol=1e-6)

    def test_scale_invariance(self, rng):
        errs = rng.uniform(0.1, 2.0, 3)
        cands = select_candidates(errs, 2)
        scaled = select_candidates(errs * 37.5, 2)
        assert [c[0] for c in cands] == [c[0] for c in scaled]
        e1 = estimate_position(cands, self.COORDS)
        e2 = estimate_position(scaled, self.COORDS)
        npt.assert_allclose(e1, e2, atol=1e-12)

    def test_bounding_box_property(self, rng):
        for _ in range(300):
            n = rng.integers(2, 6)
            coords = [(i, float(rng.uniform(-5, 5)), float(rng.uniform(-5, 5)))
                      for i in range(n)]
            cands = [(i, float(rng.uniform(1e-6, 3.0))) for i in range(n)]
            x, y = estimate_position(cands, coords)
            xs = [c[1] for c in coords]
            ys = [c[2] for c in coords]
            assert min(xs) - 1e-9 <= x <= max(xs) + 1e-9
            assert min(ys) - 1e-9 <= y <= max(ys) + 1e-9

    def test_monotone_toward_improving_candidate(self):
        import math
        before = estimate_position([(0, 1.0), (1, 1.0)], self.COORDS)
        after = estimate_position([(0, 0.5), (1, 1.0)], self.COORDS)
        target = (0.0, 0.0)
        assert math.dist(after, target) < math.dist(before, target)


class TestLocalize:
    def test_composition(self, located_model, rng):
        packets = rng.uniform(0, 1, (3, 90))
        res = localize(located_model, packets, r=2)
        errs = label_reconstruction_errors(located_model, packets)
        npt.assert_array_equal(res.per_label_errors, errs)
        assert res.candidates == select_candidates(errs, 2)
        npt.assert_allclose(
            res.estimate,
            estimate_position(res.candidates, located_model.sp_coordinates))
        assert res.packets_used == 3

    def test_estimate_in_candidate_hull(self, rng):
        model = init_model((8, 6, 4, 3), 5, seed=2)
        model.sp_coordinates = [(i, float(i), float(5 - i)) for i in range(5)]
        for r in (2, 3):
            res = localize(model, rng.uniform(0, 1, (4, 90)), r=r)
            xs = [x for _, x, _ in model.sp_coordinates]
            ys = [y for _, _, y in model.sp_coordinates]
            assert min(xs) <= res.estimate[0] <= max(xs)
            assert min(ys) <= res.estimate[1] <= max(ys)
