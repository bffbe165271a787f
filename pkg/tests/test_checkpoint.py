"""Tests for the binary checkpoint format."""

import numpy as np
import pytest

from cisr.checkpoint import (MAGIC, CheckpointError, load_checkpoint,
                             load_model, save_checkpoint, serialize)
from cisr.config import toy_config
from cisr.model import Model


@pytest.fixture
def model():
    return Model(toy_config(seed=4))


class TestRoundTrip:
    def test_load_reproduces_tensors_and_order(self, model, tmp_path):
        path = str(tmp_path / "m.ckpt")
        save_checkpoint(model.params_arm, model.params_rem, model.cfg, path)
        arm, rem, cfg = load_checkpoint(path)
        assert list(arm) == model.params_arm.names()
        assert list(rem) == model.params_rem.names()
        for name, arr in arm.items():
            assert np.array_equal(arr, model.params_arm[name].data)

    def test_save_load_save_byte_identical(self, model, tmp_path):
        p1, p2 = str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")
        save_checkpoint(model.params_arm, model.params_rem, model.cfg, p1)
        arm, rem, cfg = load_checkpoint(p1)
        save_checkpoint(arm, rem, cfg, p2)
        with open(p1, "rb") as f1, open(p2, "rb") as f2:
            assert f1.read() == f2.read()

    def test_load_model_runs(self, model, tmp_path):
        path = str(tmp_path / "m.ckpt")
        save_checkpoint(model.params_arm, model.params_rem, model.cfg, path)
        m2 = load_model(path)
        assert m2.parameter_count() == model.parameter_count()
        for n, p in m2.params_rem.items():
            assert np.array_equal(p.data, model.params_rem[n].data)


class TestCorruption:
    def _bytes(self, model):
        return serialize(model.params_arm.state_arrays(),
                         model.params_rem.state_arrays(), model.cfg)

    def test_bad_magic(self, model, tmp_path):
        buf = self._bytes(model)
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTACKPT" + buf[8:])
        with pytest.raises(CheckpointError, match="magic|checksum"):
            load_checkpoint(str(path))

    def test_magic_diagnostic_with_valid_checksum(self, tmp_path):
        # a well-checksummed file that simply is not a checkpoint
        import hashlib
        body = b"XISRCKPT" + b"\x00" * 16
        path = tmp_path / "bad.ckpt"
        path.write_bytes(body + hashlib.sha256(body).digest()[:8])
        with pytest.raises(CheckpointError, match="bad magic"):
            load_checkpoint(str(path))

    def test_unsupported_version(self, model, tmp_path):
        import hashlib
        buf = self._bytes(model)
        body = bytearray(buf[:-8])
        body[8:12] = (99).to_bytes(4, "little")
        body = bytes(body)
        path = tmp_path / "v99.ckpt"
        path.write_bytes(body + hashlib.sha256(body).digest()[:8])
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(str(path))

    def test_truncation_detected(self, model, tmp_path):
        buf = self._bytes(model)
        for cut in (10, len(buf) // 2, len(buf) - 1):
            path = tmp_path / f"cut{cut}.ckpt"
            path.write_bytes(buf[:cut])
            with pytest.raises(CheckpointError):
                load_checkpoint(str(path))

    def test_bit_flip_detected(self, model, tmp_path):
        buf = bytearray(self._bytes(model))
        buf[len(buf) // 2] ^= 0x01
        path = tmp_path / "flip.ckpt"
        path.write_bytes(bytes(buf))
        with pytest.raises(CheckpointError, match="checksum"):
            load_checkpoint(str(path))

    def test_trailing_garbage_detected(self, model, tmp_path):
        buf = self._bytes(model)
        path = tmp_path / "tail.ckpt"
        path.write_bytes(buf + b"junk")
        with pytest.raises(CheckpointError, match="checksum"):
            load_checkpoint(str(path))


class TestConfigGate:
    def test_cross_config_load_rejected(self, tmp_path):
        m = Model(toy_config(scale=2))
        path = str(tmp_path / "s2.ckpt")
        save_checkpoint(m.params_arm, m.params_rem, m.cfg, path)
        with pytest.raises(CheckpointError, match="config mismatch"):
            load_checkpoint(path, expected_cfg=toy_config(scale=3))

    def test_matching_config_accepted(self, tmp_path):
        m = Model(toy_config(scale=2))
        path = str(tmp_path / "s2.ckpt")
        save_checkpoint(m.params_arm, m.params_rem, m.cfg, path)
        load_checkpoint(path, expected_cfg=toy_config(scale=2))


class TestLimits:
    def test_dimension_overflow_rejected_at_save(self):
        class Fake:
            shape = (2 ** 33,)
            ndim = 1
        with pytest.raises(CheckpointError, match="dimension overflow"):
            from cisr.checkpoint import _pack_table
            _pack_table({"w": Fake()})
