import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pctrecon.gridio import (
    KIND_TAGS,
    MAGIC,
    read_grid,
    read_manifest,
    sha256_file,
    write_grid,
    write_manifest,
)


class TestGridFormat:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.standard_normal((13, 7))
        path = tmp_path / "x.grid"
        write_grid(path, arr, "beta")
        back, kind = read_grid(path)
        assert kind == "beta"
        assert np.array_equal(back, arr)

    def test_header_layout(self, tmp_path):
        arr = np.arange(6.0).reshape(2, 3)
        path = tmp_path / "x.grid"
        write_grid(path, arr, "intensity")
        raw = path.read_bytes()
        header = np.frombuffer(raw[:64], dtype="<i8")
        assert header[0] == MAGIC
        assert header[1] == 1
        assert (header[2], header[3]) == (2, 3)
        assert header[4] == KIND_TAGS["intensity"]
        assert tuple(header[5:]) == (0, 0, 0)
        payload = np.frombuffer(raw[64:], dtype="<f8")
        assert np.array_equal(payload.reshape(2, 3), arr)

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "bad.grid"
        path.write_bytes(b"\x00" * 128)
        with pytest.raises(ValueError, match="not a grid"):
            read_grid(path)

    def test_rejects_truncation(self, tmp_path):
        path = tmp_path / "x.grid"
        write_grid(path, np.ones((4, 4)), "image")
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ValueError, match="truncated"):
            read_grid(path)

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_grid(tmp_path / "x.grid", np.ones((2, 2)), "wavefront")

    @settings(max_examples=25, deadline=None)
    @given(
        rows=st.integers(1, 20),
        cols=st.integers(1, 20),
        kind=st.sampled_from(sorted(KIND_TAGS)),
        seed=st.integers(0, 2**31),
    )
    def test_roundtrip_property(self, tmp_path_factory, rows, cols, kind, seed):
        arr = np.random.default_rng(seed).standard_normal((rows, cols))
        path = tmp_path_factory.mktemp("grids") / "g.grid"
        write_grid(path, arr, kind)
        back, back_kind = read_grid(path)
        assert back_kind == kind
        assert np.array_equal(back, arr)


class TestManifest:
    def test_roundtrip(self, tmp_path):
        manifest = {"tool": "pctrecon", "config": {"geometry": {"n_pixels": "64"}},
                    "outputs": {"a.grid": "ff" * 32}}
        path = tmp_path / "manifest.json"
        write_manifest(path, manifest)
        assert read_manifest(path) == manifest

    def test_deterministic_bytes(self, tmp_path):
        manifest = {"b": 1, "a": {"y": 2, "x": 3}}
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        write_manifest(p1, manifest)
        write_manifest(p2, {"a": {"x": 3, "y": 2}, "b": 1})
        assert p1.read_bytes() == p2.read_bytes()

    def test_sha256_matches_hashlib(self, tmp_path):
        import hashlib

        path = tmp_path / "f.bin"
        path.write_bytes(b"pctrecon" * 1000)
        assert sha256_file(path) == hashlib.sha256(b"pctrecon" * 1000).hexdigest()
