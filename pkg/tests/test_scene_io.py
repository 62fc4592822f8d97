from __future__ import annotations

import json
import shutil
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_config
from monodyn.errors import (
    BadMagicError,
    DegenerateFitError,
    DimensionMismatchError,
    HeaderMismatchError,
    MissingFileError,
    MissingFlowError,
    NonFiniteRasterError,
    RasterHeaderError,
    SceneValidationError,
    TimeOrderError,
    TruncatedPayloadError,
)
from monodyn.scene_io import (
    MAGIC,
    TrackSet,
    align_depth_scale_shift,
    decode_raster,
    encode_raster,
    load_scene,
    read_labels,
    read_mask,
    read_raster,
    read_rgb,
    save_scene,
    write_labels,
    write_mask,
    write_raster,
    write_rgb,
)
from monodyn.synthetic import gen_synthetic


@pytest.fixture(scope="module")
def bundle(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("bundle") / "scene"
    gen_synthetic(small_config(32, n_frames=5), root)
    return root


def _corrupt_copy(bundle: Path, tmp_path: Path) -> Path:
    dst = tmp_path / "scene"
    shutil.copytree(bundle, dst)
    return dst


class TestRasterContainer:
    def test_single_zero_pixel_layout(self):
        buf = encode_raster("depth", np.zeros((1, 1)))
        assert buf == MAGIC + b"depth 1 1 1\n" + b"\x00\x00\x00\x00"

    def test_random_round_trip_bitwise(self, tmp_path):
        arr = np.random.default_rng(0).normal(size=(17, 9, 2)).astype(np.float32)
        write_raster(tmp_path / "r.pgdv", "flow", arr)
        kind, back = read_raster(tmp_path / "r.pgdv")
        assert kind == "flow"
        assert back.tobytes() == arr.tobytes()

    @settings(max_examples=50, deadline=None)
    @given(h=st.integers(1, 12), w=st.integers(1, 12), c=st.sampled_from([1, 2, 3]), seed=st.integers(0, 2**31))
    def test_round_trip_property(self, h, w, c, seed):
        arr = np.random.default_rng(seed).normal(size=(h, w, c)).astype(np.float32)
        kind, back = decode_raster(encode_raster("feat", arr))
        assert back.tobytes() == arr.tobytes()

    def test_depth_may_hold_inf_but_flow_rejects_nan(self):
        encode_raster("depth", np.array([[np.inf]]))
        with pytest.raises(NonFiniteRasterError):
            encode_raster("flow", np.full((2, 2, 2), np.nan))

    def test_bad_magic(self):
        with pytest.raises(BadMagicError):
            decode_raster(b"PGDV2\ndepth 1 1 1\n\x00\x00\x00\x00")

    def test_truncated(self):
        buf = encode_raster("depth", np.ones((3, 3)))
        with pytest.raises(TruncatedPayloadError):
            decode_raster(buf[:-1])

    @pytest.mark.parametrize("header", [b"depth 1 1\n", b"wat 1 1 1\n", b"depth 1 1 4\n", b"depth -1 1 1\n"])
    def test_bad_header(self, header):
        with pytest.raises(RasterHeaderError):
            decode_raster(MAGIC + header + b"\x00" * 4)

    def test_trailing_bytes(self):
        with pytest.raises(RasterHeaderError):
            decode_raster(encode_raster("depth", np.ones((1, 1))) + b"\x00")

    def test_missing(self, tmp_path):
        with pytest.raises(MissingFileError):
            read_raster(tmp_path / "nope.pgdv")


class TestImages:
    def test_rgb_round_trip(self, tmp_path):
        rgb = np.random.default_rng(1).integers(0, 256, size=(5, 4, 3)) / 255.0
        write_rgb(tmp_path / "a.png", rgb)
        assert np.array_equal(read_rgb(tmp_path / "a.png"), rgb.astype(np.float32))

    def test_mask_round_trip(self, tmp_path):
        m = np.random.default_rng(2).random((6, 7)) > 0.5
        write_mask(tmp_path / "m.png", m)
        assert np.array_equal(read_mask(tmp_path / "m.png"), m)

    def test_labels_round_trip_16_bit(self, tmp_path):
        labels = np.array([[0, 1, 300], [65535, 7, 2]])
        write_labels(tmp_path / "l.png", labels)
        assert np.array_equal(read_labels(tmp_path / "l.png"), labels)


class TestTracks:
    def test_duplicate_sample_rejected(self):
        with pytest.raises(SceneValidationError):
            TrackSet.from_rows([(0, 1, 0.0, 0.0, 1), (0, 1, 1.0, 1.0, 1)])

    def test_rows_sorted_by_frame(self):
        ts = TrackSet.from_rows([(3, 2, 0.0, 0.0, 1), (3, 0, 1.0, 1.0, 0)])
        assert [s.frame_index for s in ts.trajectories[3]] == [0, 2]


class TestLoadScene:
    def test_synthetic_bundle(self, bundle):
        scene = load_scene(bundle)
        assert len(scene) == 5
        assert sorted(scene.flows) == sorted([(i, i + 1) for i in range(4)] + [(i + 1, i) for i in range(4)])
        assert scene.tracks is not None and scene.segments is not None

    def test_save_load_rasters_byte_identical(self, bundle, tmp_path):
        save_scene(load_scene(bundle), tmp_path / "copy")
        for sub in ("depth", "flow", "rgb", "mask", "segments"):
            for p in sorted((bundle / sub).iterdir()):
                assert (tmp_path / "copy" / sub / p.name).read_bytes() == p.read_bytes(), p

    def test_dimension_mismatch_names_frame(self, tmp_path):
        # 128x128 images with a 64x64 depth at frame 3
        src = tmp_path / "big"
        gen_synthetic(small_config(128, n_frames=4), src)
        write_raster(src / "depth" / "00003.pgdv", "depth", np.ones((64, 64)))
        with pytest.raises(DimensionMismatchError) as exc:
            load_scene(src)
        assert exc.value.frame == 3
        assert "frame 3" in str(exc.value)

    # corrupted-bundle corpus: every entry must map to its documented error class
    @staticmethod
    def _drop_rgb(root):
        (root / "rgb" / "00002.png").unlink()

    @staticmethod
    def _drop_cameras(root):
        (root / "cameras.json").unlink()

    @staticmethod
    def _flow_as_depth(root):
        write_raster(root / "flow" / "00001_00002.pgdv", "depth", np.ones((32, 32)))

    @staticmethod
    def _depth_as_feat(root):
        write_raster(root / "depth" / "00000.pgdv", "feat", np.ones((32, 32)))

    @staticmethod
    def _times_reversed(root):
        recs = json.loads((root / "cameras.json").read_text())
        recs[2]["time"], recs[3]["time"] = recs[3]["time"], recs[2]["time"]
        (root / "cameras.json").write_text(json.dumps(recs))

    @staticmethod
    def _truncated_depth(root):
        p = root / "depth" / "00001.pgdv"
        p.write_bytes(p.read_bytes()[:-8])

    @staticmethod
    def _bad_magic_flow(root):
        p = root / "flow" / "00000_00001.pgdv"
        p.write_bytes(b"XXXX" + p.read_bytes()[4:])

    @staticmethod
    def _drop_reverse_flow(root):
        (root / "flow" / "00003_00002.pgdv").unlink()

    @staticmethod
    def _negative_depth(root):
        write_raster(root / "depth" / "00004.pgdv", "depth", -np.ones((32, 32)))

    @staticmethod
    def _bad_mask_values(root):
        from PIL import Image

        Image.fromarray(np.full((32, 32), 7, dtype=np.uint8)).save(root / "mask" / "00001.png")

    @staticmethod
    def _track_frame_out_of_range(root):
        with open(root / "tracks.csv", "a") as fh:
            fh.write("999,9,1.0,1.0,1\n")

    @staticmethod
    def _malformed_cameras(root):
        (root / "cameras.json").write_text("[{\"time\": 0}]")

    @pytest.mark.parametrize("corrupt,error", [
        ("_drop_rgb", MissingFileError),
        ("_drop_cameras", MissingFileError),
        ("_flow_as_depth", HeaderMismatchError),
        ("_depth_as_feat", HeaderMismatchError),
        ("_times_reversed", TimeOrderError),
        ("_truncated_depth", TruncatedPayloadError),
        ("_bad_magic_flow", BadMagicError),
        ("_drop_reverse_flow", MissingFlowError),
        ("_negative_depth", SceneValidationError),
        ("_bad_mask_values", SceneValidationError),
        ("_track_frame_out_of_range", SceneValidationError),
        ("_malformed_cameras", SceneValidationError),
    ])
    def test_corrupted_corpus(self, bundle, tmp_path, corrupt, error):
        root = _corrupt_copy(bundle, tmp_path)
        getattr(self, corrupt)(root)
        with pytest.raises(error) as exc:
            load_scene(root)
        assert exc.value.path is not None or exc.value.frame is not None


def _normal_equations(p: np.ndarray, r: np.ndarray) -> tuple[float, float]:
    """Oracle: solve [[sum p^2, sum p], [sum p, n]] [s, b] = [sum p r, sum r]."""
    A = np.array([[np.sum(p * p), np.sum(p)], [np.sum(p), len(p)]])
    rhs = np.array([np.sum(p * r), np.sum(r)])
    s, b = np.linalg.solve(A, rhs)
    return float(s), float(b)


class TestAlignDepth:
    def test_identity(self):
        p = np.array([1.0, 2.0, 5.0])
        assert align_depth_scale_shift(p, p) == pytest.approx((1.0, 0.0), abs=1e-12)

    def test_exact_affine(self):
        p = np.random.default_rng(0).uniform(1, 10, 50)
        s, b = align_depth_scale_shift(p, 2 * p + 3)
        assert abs(s - 2) < 1e-9 and abs(b - 3) < 1e-9

    def test_matches_normal_equations(self):
        rng = np.random.default_rng(4)
        p = rng.uniform(1, 10, 200)
        r = 0.7 * p - 1.2 + rng.normal(scale=0.3, size=200)
        s, b = align_depth_scale_shift(p, r)
        s0, b0 = _normal_equations(p, r)
        assert abs(s - s0) < 1e-9 and abs(b - b0) < 1e-9

    def test_residual_optimal_against_perturbations(self):
        rng = np.random.default_rng(5)
        p = rng.uniform(1, 10, 100)
        r = 1.3 * p + 0.4 + rng.normal(scale=0.5, size=100)
        s, b = align_depth_scale_shift(p, r)
        best = np.sum((s * p + b - r) ** 2)
        ds = rng.normal(scale=0.05, size=10_000)
        db = rng.normal(scale=0.5, size=10_000)
        res = np.sum(((s + ds)[:, None] * p + (b + db)[:, None] - r) ** 2, axis=1)
        assert np.all(res >= best)

    @pytest.mark.parametrize("p,r", [([1.0], [2.0]), ([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])])
    def test_degenerate(self, p, r):
        with pytest.raises(DegenerateFitError):
            align_depth_scale_shift(p, r)
