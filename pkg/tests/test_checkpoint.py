"""Checkpoint container round-trips and mismatch reporting."""

import numpy as np
import pytest

from sfagc.autodiff import Tensor
from sfagc.checkpoint import CHECKPOINT_MAGIC, load_checkpoint, load_into, save_checkpoint
from sfagc.errors import CheckpointError, InvalidArgument
from sfagc.graphs import PointSet
from sfagc.models import Network, micro_classification_spec


def params(rng):
    return [
        Tensor(rng.standard_normal((3, 4)), requires_grad=True, name="a.w"),
        Tensor(rng.standard_normal(4), requires_grad=True, name="a.bias"),
        Tensor(rng.standard_normal((2, 2)), requires_grad=True, name="b.w"),
    ]


class TestRoundTrip:
    def test_bit_identical(self, tmp_path):
        ps = params(np.random.default_rng(0))
        path = str(tmp_path / "c.ckpt")
        save_checkpoint(path, ps)
        stored = load_checkpoint(path)
        assert sorted(stored) == ["a.bias", "a.w", "b.w"]
        for p in ps:
            assert np.array_equal(stored[p.name], p.data)

    def test_magic_leads_file(self, tmp_path):
        path = str(tmp_path / "c.ckpt")
        save_checkpoint(path, params(np.random.default_rng(1)))
        assert open(path, "rb").read(7) == CHECKPOINT_MAGIC

    def test_load_into_restores(self, tmp_path):
        rng = np.random.default_rng(2)
        ps = params(rng)
        path = str(tmp_path / "c.ckpt")
        save_checkpoint(path, ps)
        qs = params(np.random.default_rng(3))
        load_into(qs, path)
        for p, q in zip(ps, qs):
            assert np.array_equal(p.data, q.data)

    def test_network_forward_reproduced(self, tmp_path):
        # save one model, load into a differently seeded clone
        xyz = np.random.default_rng(4).standard_normal((14, 3))
        pts = PointSet(coords=xyz, feats=xyz.copy())
        a = Network(micro_classification_spec(), np.random.default_rng(5))
        b = Network(micro_classification_spec(), np.random.default_rng(6))
        path = str(tmp_path / "net.ckpt")
        save_checkpoint(path, a.parameters())
        assert not np.array_equal(a.forward(pts).total.data, b.forward(pts).total.data)
        load_into(b.parameters(), path)
        assert np.array_equal(a.forward(pts).total.data, b.forward(pts).total.data)


class TestFailureModes:
    def test_bad_magic(self, tmp_path):
        p = tmp_path / "c.ckpt"
        p.write_bytes(b"XXXXXXX" + b"\x00" * 16)
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(str(p))

    def test_truncated(self, tmp_path):
        path = str(tmp_path / "c.ckpt")
        save_checkpoint(path, params(np.random.default_rng(0)))
        blob = open(path, "rb").read()
        open(path, "wb").write(blob[:-4])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(path)

    def test_unnamed_parameter(self, tmp_path):
        with pytest.raises(InvalidArgument, match="name"):
            save_checkpoint(str(tmp_path / "c.ckpt"), [Tensor(np.ones(3), requires_grad=True)])

    def test_duplicate_names(self, tmp_path):
        ps = [
            Tensor(np.ones(2), requires_grad=True, name="w"),
            Tensor(np.ones(3), requires_grad=True, name="w"),
        ]
        with pytest.raises(InvalidArgument, match="duplicate"):
            save_checkpoint(str(tmp_path / "c.ckpt"), ps)

    def test_width_mismatch_names_tensor(self, tmp_path):
        path = str(tmp_path / "c.ckpt")
        save_checkpoint(path, params(np.random.default_rng(0)))
        qs = params(np.random.default_rng(1))
        qs[0] = Tensor(np.zeros((3, 5)), requires_grad=True, name="a.w")
        with pytest.raises(CheckpointError, match="a.w"):
            load_into(qs, path)

    def test_parameter_set_mismatch(self, tmp_path):
        path = str(tmp_path / "c.ckpt")
        save_checkpoint(path, params(np.random.default_rng(0)))
        with pytest.raises(CheckpointError, match="mismatch"):
            load_into(params(np.random.default_rng(1))[:2], path)

    def test_values_are_copies(self, tmp_path):
        # loading must not alias the checkpoint buffer
        path = str(tmp_path / "c.ckpt")
        ps = params(np.random.default_rng(7))
        save_checkpoint(path, ps)
        qs = params(np.random.default_rng(8))
        load_into(qs, path)
        qs[0].data[0, 0] = 99.0
        assert ps[0].data[0, 0] != 99.0
        stored = load_checkpoint(path)
        stored["a.w"][0, 0] = 7.0  # writable, hence a copy
