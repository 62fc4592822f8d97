from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from monodyn.errors import DimensionMismatchError, InvalidArgumentError, MissingFlowError
from monodyn.geometry import interpolate_bilinear
from monodyn.masks import MaskConfig, MaskHistory, fuse_segments, propagate_masks, propagate_scene_masks, warp_history


def _zero_flows(n: int, h: int, w: int) -> list:
    return [None] + [np.zeros((h, w, 2)) for _ in range(n - 1)]


def history_fixture() -> tuple[list, tuple, tuple]:
    """Five frames with identity flow: four prior frames, then the frame under test.

    Pixel A is dynamic in 2 of the 4 prior frames, pixel B in 1 of 4; both are
    raw-positive in the last frame.
    """
    a, b = (1, 1), (2, 3)
    raw = [np.zeros((4, 5), dtype=bool) for _ in range(5)]
    for i in (0, 1):
        raw[i][a] = True
    raw[0][b] = True
    raw[4][a] = raw[4][b] = True
    return raw, a, b


class TestWarpHistory:
    def test_zero_flow_identity(self):
        acc = np.random.default_rng(0).random((6, 7)) * 3
        out = warp_history(MaskHistory(acc, 3), np.zeros((6, 7, 2)))
        assert np.array_equal(out, acc)

    def test_integer_shift(self):
        acc = np.arange(20.0).reshape(4, 5)
        flow = np.zeros((4, 5, 2))
        flow[..., 0] = 1.0
        out = warp_history(MaskHistory(acc, 20), flow)
        assert np.array_equal(out[:, :-1], acc[:, 1:])
        assert np.array_equal(out[:, -1], acc[:, -1])  # clamped

    def test_matches_per_pixel_oracle(self):
        rng = np.random.default_rng(1)
        acc = rng.random((9, 11)) * 4
        ys, xs = np.mgrid[0:9, 0:11]
        flow = np.stack([1.5 * np.sin(ys / 3.0), -0.7 * np.cos(xs / 4.0)], axis=-1)
        out = warp_history(MaskHistory(acc, 4), flow)
        for r in range(9):
            for c in range(11):
                expect = interpolate_bilinear(acc, np.array([c + flow[r, c, 0], r + flow[r, c, 1]]))
                assert out[r, c] == pytest.approx(expect, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            warp_history(MaskHistory(np.zeros((3, 3)), 1), np.zeros((3, 4, 2)))


class TestFuseSegments:
    def _hundred(self, hits: int) -> tuple[np.ndarray, np.ndarray]:
        labels = np.ones((10, 20), dtype=np.int64)
        labels[:, 10:] = 2  # label 1 covers exactly 100 pixels
        mask = np.zeros((10, 20), dtype=bool)
        mask.flat[np.flatnonzero(labels == 1)[:hits]] = True
        return mask, labels

    def test_ten_percent_excluded(self):
        mask, labels = self._hundred(10)
        assert not fuse_segments(mask, labels, 0.10).any()

    def test_eleven_percent_included(self):
        mask, labels = self._hundred(11)
        assert np.array_equal(fuse_segments(mask, labels, 0.10), labels == 1)

    def test_segment_inside_mask(self):
        labels = np.array([[1, 1, 2], [3, 3, 2]])
        mask = labels == 3
        assert np.array_equal(fuse_segments(mask, labels), mask)

    def test_empty_mask(self):
        assert not fuse_segments(np.zeros((3, 3), bool), np.arange(9).reshape(3, 3)).any()

    def test_label_zero_never_selected(self):
        labels = np.array([[0, 0], [1, 1]])
        assert fuse_segments(np.ones((2, 2), bool), labels).tolist() == [[False, False], [True, True]]

    @settings(max_examples=100, deadline=None)
    @given(labels=hnp.arrays(np.int64, (8, 9), elements=st.integers(1, 6)),
           mask=hnp.arrays(np.bool_, (8, 9)), overlap=st.floats(0, 1))
    def test_union_of_whole_segments(self, labels, mask, overlap):
        out = fuse_segments(mask, labels, overlap)
        for lab in np.unique(labels):
            inside = out[labels == lab]
            assert inside.all() or not inside.any()
            frac = mask[labels == lab].mean()
            assert inside.all() == (frac > overlap)


class TestPropagateMasks:
    def test_single_frame(self):
        m = np.random.default_rng(0).random((4, 4)) > 0.5
        assert np.array_equal(propagate_masks([m], [None])[0], m)

    def test_history_ratio_rule(self):
        raw, a, b = history_fixture()
        out = propagate_masks(raw, _zero_flows(5, 4, 5), cfg=MaskConfig(history_threshold=0.5))
        assert out[4][a]          # 2 / 4 = 0.5 >= 0.5
        assert not out[4][b]      # 1 / 4 = 0.25

    def test_and_semantics(self):
        m = np.zeros((3, 3), bool)
        m[1, 1] = True
        raw = [m, m, np.zeros_like(m)]
        out = propagate_masks(raw, _zero_flows(3, 3, 3))
        assert not out[2].any()

    def test_missing_flow(self):
        m = np.zeros((2, 2), bool)
        with pytest.raises(MissingFlowError) as exc:
            propagate_masks([m, m, m], [None, np.zeros((2, 2, 2)), None])
        assert exc.value.frame == 2

    def test_segment_count_checked(self):
        m = np.zeros((2, 2), bool)
        with pytest.raises(InvalidArgumentError):
            propagate_masks([m, m], _zero_flows(2, 2, 2), segments=[np.ones((2, 2), int)])

    @settings(max_examples=40, deadline=None)
    @given(m=hnp.arrays(np.bool_, (5, 6)), n=st.integers(1, 6))
    def test_constant_masks_identity_flow(self, m, n):
        out = propagate_masks([m] * n, _zero_flows(n, 5, 6))
        assert all(np.array_equal(o, m) for o in out)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31), n=st.integers(2, 6))
    def test_accumulator_bound(self, seed, n):
        rng = np.random.default_rng(seed)
        raw = [rng.random((6, 6)) > 0.4 for _ in range(n)]
        flows = [None] + [rng.normal(scale=2.0, size=(6, 6, 2)) for _ in range(n - 1)]
        hist = MaskHistory.start(raw[0])
        for i in range(1, n):
            warped = warp_history(hist, flows[i])
            assert np.all(warped >= 0) and np.all(warped <= hist.frame_count)
            hist = hist.update(warped, raw[i] & (hist.ratio(warped) >= 0.5))
            assert np.all(hist.accumulator <= i + 1)

    def test_segments_re_add_pixels(self):
        m = np.zeros((4, 4), bool)
        m[0, 0] = True
        labels = np.ones((4, 4), int)
        labels[2:, :] = 2
        labels[:2, :2] = 3      # 4-pixel segment, 25% overlap
        out = propagate_masks([m], [None], segments=[labels])
        assert np.array_equal(out[0], labels == 3)


def test_scene_masks_on_synthetic(small_scene):
    _, scene = small_scene
    refined = propagate_scene_masks(scene, use_segments=False)
    # integral exact flows carry every square pixel back onto the square
    for f, r in zip(scene.frames, refined):
        assert np.array_equal(r, f.dynamic_mask)
