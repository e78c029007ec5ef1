"""Localization metrics against exhaustive pixel-set oracles."""

import numpy as np
import pytest

from saliency3d import weakloc_eval as wl

import oracles


def _boxes_to_tuples(boxes):
    return sorted((b.x0, b.y0, b.x1, b.y1) for b in boxes)


class TestBox:
    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            wl.Box(3, 0, 3, 5)
        with pytest.raises(ValueError):
            wl.Box(0, 5, 3, 5)

    def test_area(self):
        assert wl.Box(0, 0, 10, 10).area == 100


class TestBoxesAtThreshold:
    def test_all_below_tau(self):
        frame = np.full((5, 5), 0.2, dtype=np.float32)
        assert wl.boxes_at_threshold(frame, 0.5) == []

    def test_zero_map_no_boxes(self):
        assert wl.boxes_at_threshold(np.zeros((5, 5), np.float32), 0.0) == []

    def test_single_blob_tight_box(self):
        frame = np.zeros((10, 10), dtype=np.float32)
        frame[2:5, 2:5] = 1.0
        boxes = wl.boxes_at_threshold(frame, 0.5)
        assert _boxes_to_tuples(boxes) == [(2, 2, 5, 5)]

    def test_two_separated_blobs(self):
        frame = np.zeros((10, 10), dtype=np.float32)
        frame[1:3, 1:3] = 1.0
        frame[6:9, 6:8] = 0.8
        boxes = wl.boxes_at_threshold(frame, 0.5)
        assert _boxes_to_tuples(boxes) == [(1, 1, 3, 3), (6, 6, 8, 9)]

    def test_tau_zero_single_full_box(self):
        frame = np.zeros((6, 8), dtype=np.float32)
        frame[2, 3] = 1.0
        boxes = wl.boxes_at_threshold(frame, 0.0)
        assert _boxes_to_tuples(boxes) == [(0, 0, 8, 6)]

    def test_diagonal_blob_is_one_component_at_8conn(self):
        frame = np.zeros((4, 4), dtype=np.float32)
        frame[0, 0] = frame[1, 1] = 1.0
        assert len(wl.boxes_at_threshold(frame, 0.5, connectivity=8)) == 1
        assert len(wl.boxes_at_threshold(frame, 0.5, connectivity=4)) == 2

    def test_matches_flood_fill_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            frame = (rng.uniform(0, 1, (9, 11)) ** 2).astype(np.float32)
            tau = float(rng.uniform(0, 1))
            got = _boxes_to_tuples(wl.boxes_at_threshold(frame, tau))
            want = sorted(oracles.boxes_sweep(frame, tau))
            assert got == want

    def test_monotone_tau_box_containment(self):
        # every tau2-box fits inside some tau1-box when tau1 <= tau2
        rng = np.random.default_rng(1)
        for _ in range(30):
            frame = rng.uniform(0, 1, (8, 8)).astype(np.float32)
            t1, t2 = sorted(rng.uniform(0, 1, 2))
            coarse = wl.boxes_at_threshold(frame, t1)
            fine = wl.boxes_at_threshold(frame, t2)
            for fb in fine:
                assert any(
                    cb.x0 <= fb.x0 and cb.y0 <= fb.y0
                    and fb.x1 <= cb.x1 and fb.y1 <= cb.y1
                    for cb in coarse
                )


class TestIou:
    def test_identical(self):
        b = wl.Box(1, 2, 5, 7)
        assert wl.iou(b, b) == 1.0

    def test_disjoint(self):
        assert wl.iou(wl.Box(0, 0, 2, 2), wl.Box(5, 5, 7, 7)) == 0.0

    def test_known_overlap(self):
        got = wl.iou(wl.Box(0, 0, 10, 10), wl.Box(5, 5, 15, 15))
        assert got == pytest.approx(25 / 175)

    def test_symmetry_and_pixel_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            def rand_box():
                x0, y0 = rng.integers(0, 12, 2)
                return wl.Box(int(x0), int(y0),
                              int(x0 + rng.integers(1, 8)),
                              int(y0 + rng.integers(1, 8)))
            a, b = rand_box(), rand_box()
            got = wl.iou(a, b)
            assert got == wl.iou(b, a)
            want = oracles.iou_pixel_count(a.as_list(), b.as_list())
            assert got == pytest.approx(want, abs=1e-12)
            if got == 1.0:
                assert a == b


class TestPointingHit:
    def test_peak_inside_box(self):
        frame = np.zeros((8, 8), dtype=np.float32)
        frame[4, 5] = 1.0
        assert wl.pointing_hit(frame, [wl.Box(4, 3, 7, 6)])

    def test_peak_outside_all_boxes(self):
        frame = np.zeros((8, 8), dtype=np.float32)
        frame[0, 7] = 1.0
        assert not wl.pointing_hit(frame, [wl.Box(0, 2, 4, 6)])

    def test_uniform_ties_break_row_major(self):
        frame = np.ones((4, 4), dtype=np.float32)
        assert wl.pointing_hit(frame, [wl.Box(0, 0, 1, 1)])
        assert not wl.pointing_hit(frame, [wl.Box(1, 1, 4, 4)])

    def test_empty_gt(self):
        with pytest.raises(ValueError):
            wl.pointing_hit(np.ones((2, 2), np.float32), [])

    def test_any_overlap_mode(self):
        frame = np.zeros((8, 8), dtype=np.float32)
        frame[2:4, 2:4] = 1.0
        # peak at (2,2) is outside GT, but the tau=0.5 box overlaps it
        gt = [wl.Box(3, 3, 6, 6)]
        assert not wl.pointing_hit(frame, gt, mode="peak")
        assert wl.pointing_hit(frame, gt, mode="any-overlap")


class TestAccuracies:
    def test_nine_of_ten(self):
        assert wl.accuracy(9, 1) == pytest.approx(0.9)

    def test_zero_total(self):
        with pytest.raises(ValueError):
            wl.accuracy(0, 0)

    def test_acc2_all_wrong_predictions(self):
        assert wl.acc2([True, True, True], [False, False, False]) == 0.0

    def test_acc2_all_hit_all_correct(self):
        assert wl.acc2([True] * 4, [True] * 4) == 1.0

    def test_acc2_never_exceeds_acc(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(1, 20))
            hits = rng.uniform(size=n) < 0.5
            correct = rng.uniform(size=n) < 0.5
            acc = wl.accuracy(int(hits.sum()), int(n - hits.sum()))
            assert wl.acc2(hits, correct) <= acc + 1e-12


class TestMaxBoxAcc:
    def test_perfect_localization(self):
        gt_box = wl.Box(2, 3, 6, 7)
        frames, gts = [], []
        for _ in range(4):
            f = np.zeros((10, 10), dtype=np.float32)
            f[3:7, 2:6] = 1.0
            frames.append(f)
            gts.append([gt_box])
        report = wl.max_box_acc(frames, gts)
        assert all(v == 1.0 for v in report.box_acc_per_theta.values())
        assert report.box_acc_mean == 1.0
        assert report.acc == 1.0

    def test_all_zero_saliency(self):
        frames = [np.zeros((6, 6), dtype=np.float32)] * 3
        gts = [[wl.Box(1, 1, 3, 3)]] * 3
        report = wl.max_box_acc(frames, gts)
        assert all(v == 0.0 for v in report.box_acc_per_theta.values())

    def test_partial_overlap_threshold_cut(self):
        # blob box (0,0,10,9) vs GT (0,4,10,11): inter 50, union 110 -> IoU 5/11
        frame = np.zeros((20, 20), dtype=np.float32)
        frame[0:9, 0:10] = 1.0
        gt = [wl.Box(0, 4, 10, 11)]
        got = wl.iou(wl.Box(0, 0, 10, 9), gt[0])
        assert 0.4 < got < 0.5
        report = wl.max_box_acc([frame], [gt])
        for theta in (0.05, 0.1, 0.2, 0.3, 0.4):
            assert report.box_acc_per_theta[theta] == 1.0
        assert report.box_acc_per_theta[0.5] == 0.0
        assert report.box_acc_mean == pytest.approx(5 / 6)

    def test_matches_exhaustive_oracle_best_iou(self):
        rng = np.random.default_rng(4)
        frames, gts, oracle_gts = [], [], []
        for _ in range(8):
            f = np.zeros((12, 12), dtype=np.float32)
            x0, y0 = rng.integers(0, 6, 2)
            w, h = rng.integers(2, 6, 2)
            f[y0:y0 + h, x0:x0 + w] = rng.uniform(0.3, 1.0)
            f += rng.uniform(0, 0.2, f.shape).astype(np.float32)
            frames.append(f)
            g = (int(rng.integers(0, 6)), int(rng.integers(0, 6)))
            box = (g[0], g[1], g[0] + int(rng.integers(2, 6)), g[1] + int(rng.integers(2, 6)))
            gts.append([wl.Box(*box)])
            oracle_gts.append([box])
        taus = tuple(round(0.05 * i, 2) for i in range(21))
        for mode in ("best-iou-per-frame", "all-contours"):
            cfg = wl.EvalConfig(taus=taus, mode=mode)
            report = wl.max_box_acc(frames, gts, cfg)
            want, grid = oracles.max_box_acc_sweep(
                frames, oracle_gts, taus, cfg.thetas, mode
            )
            for theta in cfg.thetas:
                assert report.box_acc_per_theta[theta] == want[theta]
            if mode == "best-iou-per-frame":
                np.testing.assert_allclose(
                    report.best_iou_per_frame, grid.max(axis=1), atol=1e-12
                )

    def test_per_theta_non_increasing(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            frames = [rng.uniform(0, 1, (10, 10)).astype(np.float32) for _ in range(5)]
            gts = [[wl.Box(2, 2, 7, 7)]] * 5
            for mode in ("best-iou-per-frame", "all-contours"):
                cfg = wl.EvalConfig(mode=mode)
                report = wl.max_box_acc(frames, gts, cfg)
                accs = [report.box_acc_per_theta[t] for t in cfg.thetas]
                assert all(a >= b - 1e-12 for a, b in zip(accs, accs[1:]))

    def test_scale_invariance(self):
        rng = np.random.default_rng(6)
        frames = [rng.uniform(0, 1, (8, 8)).astype(np.float32) for _ in range(4)]
        gts = [[wl.Box(1, 1, 5, 5)]] * 4
        base = wl.max_box_acc(frames, gts)
        scaled = wl.max_box_acc([37.5 * f for f in frames], gts)
        assert base.box_acc_per_theta == scaled.box_acc_per_theta
        assert base.best_iou_per_frame == scaled.best_iou_per_frame

    def test_acc2_uses_correctness(self):
        frame = np.zeros((6, 6), dtype=np.float32)
        frame[2, 2] = 1.0
        gts = [[wl.Box(1, 1, 4, 4)]] * 2
        report = wl.max_box_acc([frame, frame], gts, correct=[True, False])
        assert report.acc == 1.0
        assert report.acc2 == 0.5

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            wl.max_box_acc([np.zeros((4, 4))], [])

    def test_default_theta_sets(self):
        assert wl.EvalConfig(mode="best-iou-per-frame").thetas == wl.VIDEO_THETAS
        assert wl.EvalConfig(mode="all-contours").thetas == wl.IMAGE_THETAS

    def test_report_json_csv(self, tmp_path):
        frame = np.zeros((6, 6), dtype=np.float32)
        frame[2:4, 2:4] = 1.0
        report = wl.max_box_acc([frame], [[wl.Box(2, 2, 4, 4)]])
        report.write_json(tmp_path / "r.json")
        report.write_csv(tmp_path / "r.csv")
        import json
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["hits"] == 1
        assert doc["config"]["mode"] == "best-iou-per-frame"
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == "theta,box_acc"
        assert len(lines) == 1 + len(wl.VIDEO_THETAS)


class TestGtJsonl:
    def test_load(self, tmp_path):
        lines = [
            '{"clip_id": "a", "frame": 1, "class": 2, "boxes": [[0, 0, 3, 3]]}',
            '{"clip_id": "a", "frame": 0, "class": 2, "boxes": [[1, 1, 4, 4], [5, 5, 7, 7]]}',
            '{"clip_id": "b", "frame": 0, "class": 0, "boxes": [[2, 2, 6, 6]]}',
        ]
        path = tmp_path / "gt.jsonl"
        path.write_text("\n".join(lines) + "\n")
        gt = wl.load_gt_jsonl(path)
        assert set(gt) == {"a", "b"}
        assert gt["a"]["class"] == 2
        assert len(gt["a"]["frames"]) == 2
        assert gt["a"]["frames"][0] == [wl.Box(1, 1, 4, 4), wl.Box(5, 5, 7, 7)]
        assert gt["a"]["frames"][1] == [wl.Box(0, 0, 3, 3)]
