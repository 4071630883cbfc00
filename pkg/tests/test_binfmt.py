import struct

import numpy as np
import pytest

from indoorloc import binfmt


def test_round_trip_and_layout(tmp_path):
    a = np.arange(6.0).reshape(2, 3)
    b = np.array([[1, -2]], dtype=np.int32)
    binfmt.dump(tmp_path / "x.bin", "geomap", {"format_version": 1, "w": 3.5}, {"a": a, "b": b})
    meta, arrays = binfmt.load(tmp_path / "x.bin", "geomap")
    assert meta == {"format_version": 1, "w": 3.5, "kind": "geomap"}
    np.testing.assert_array_equal(arrays["a"], a)
    assert arrays["b"].dtype == np.dtype("<i8") and arrays["b"].tolist() == [[1, -2]]
    raw = (tmp_path / "x.bin").read_bytes()
    magic, ver, res, kind, hlen = struct.unpack_from("<4sHH8sI", raw)
    assert (magic, ver, res, kind) == (b"IDLC", 1, 0, b"geomap\0\0")
    assert len(raw) == 20 + hlen + 6 * 8 + 2 * 8
    assert np.frombuffer(raw[20 + hlen:20 + hlen + 48], "<f8").tolist() == a.ravel().tolist()


def test_rejects_wrong_kind_magic_and_truncation(tmp_path):
    p = tmp_path / "x.bin"
    binfmt.dump(p, "seqds", {}, {"a": np.ones(4)})
    with pytest.raises(binfmt.FormatError, match="expected"):
        binfmt.load(p, "model")
    raw = p.read_bytes()
    p.write_bytes(raw[:-8])
    with pytest.raises(binfmt.FormatError, match="truncated"):
        binfmt.load(p)
    p.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(binfmt.FormatError, match="magic"):
        binfmt.load(p)
    with pytest.raises(ValueError):
        binfmt.dump(p, "toolongkind", {}, {})
