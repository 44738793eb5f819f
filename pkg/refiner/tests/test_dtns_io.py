
import numpy as np
import pytest

from refiner.dtns_io import (DtnsFormatError, load_manifest, manifest_tensor,
                             read_tensor, write_tensor)


class TestTensorIO:
    def test_round_trip(self, tmp_path):
        arr = np.random.default_rng(0).standard_normal((4, 16, 16))
        path = tmp_path / "t.dtns"
        write_tensor(arr, path)
        assert np.array_equal(read_tensor(path), arr)

    def test_uint32(self, tmp_path):
        arr = np.arange(12, dtype=np.uint32).reshape(3, 4)
        path = tmp_path / "t.dtns"
        write_tensor(arr, path)
        back = read_tensor(path)
        assert back.dtype == np.dtype("<u4")
        assert np.array_equal(back, arr)

    def test_reads_benchmark_exports(self, small_exports):
        train_dir, _ = small_exports
        gt = read_tensor(train_dir / "ground_truth.dtns")
        assert gt.ndim == 3 and gt.shape[1] == gt.shape[2] == 64
        assert np.isfinite(gt).all()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.dtns"
        path.write_bytes(b"XXXX" + bytes(12))
        with pytest.raises(DtnsFormatError):
            read_tensor(path)

    def test_truncation(self, tmp_path):
        path = tmp_path / "t.dtns"
        write_tensor(np.zeros((4, 4)), path)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(DtnsFormatError):
            read_tensor(path)


class TestManifest:
    def test_load_and_lookup(self, small_exports):
        train_dir, test_dir = small_exports
        manifest = load_manifest(train_dir)
        assert manifest["split"] == "train"
        gt = manifest_tensor(train_dir, manifest, role="ground_truth")
        rec = manifest_tensor(train_dir, manifest, role="reconstruction",
                              algorithm="maptv")
        assert gt.shape == rec.shape

        test_manifest = load_manifest(test_dir)
        per_level = manifest_tensor(test_dir, test_manifest,
                                    role="reconstruction", algorithm="mle",
                                    n0=100.0)
        assert per_level.shape[0] == 4

    def test_checksum_corruption_detected(self, small_exports, tmp_path):
        import shutil
        train_dir, _ = small_exports
        copy = tmp_path / "copy"
        shutil.copytree(train_dir, copy)
        target = copy / "ground_truth.dtns"
        blob = bytearray(target.read_bytes())
        blob[40] ^= 0xFF
        target.write_bytes(bytes(blob))
        with pytest.raises(DtnsFormatError):
            load_manifest(copy)

    def test_missing_entry_rejected(self, small_exports):
        train_dir, _ = small_exports
        manifest = load_manifest(train_dir)
        with pytest.raises(DtnsFormatError):
            manifest_tensor(train_dir, manifest, role="reconstruction",
                            algorithm="nonexistent")

    def test_ambiguous_lookup_rejected(self, small_exports):
        _, test_dir = small_exports
        manifest = load_manifest(test_dir)
        # two photon levels for the same algorithm: n0 filter required
        with pytest.raises(DtnsFormatError):
            manifest_tensor(test_dir, manifest, role="reconstruction",
                            algorithm="mle")
