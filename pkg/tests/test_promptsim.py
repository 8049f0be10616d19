import numpy as np
import pytest

from oracles import random_blob_mask
from scribbleseg.grids import BinaryMask, NoRegionError, min_bounding_box
from scribbleseg.morphology import euclidean_distance_transform
from scribbleseg.promptsim import (
    BreakMaskParams,
    ClickParams,
    PromptConfig,
    ScribbleParams,
    make_break_mask,
    sample_corrections,
    sample_initial_prompts,
    sim_bbox,
    sim_centerline_scribble,
    sim_clicks,
    sim_contour_scribble,
    sim_line_scribble,
)
from scribbleseg.rng import SeededRng

SIMS = (sim_line_scribble, sim_centerline_scribble, sim_contour_scribble)


def test_break_mask_is_binary_and_balanced():
    rng = SeededRng(0)
    fractions = []
    for seed in range(20):
        mask = make_break_mask((64, 64), rng.derive(seed), BreakMaskParams())
        vals = np.unique(mask.data)
        assert set(vals.tolist()) <= {0.0, 1.0}
        fractions.append(mask.data.mean())
    assert 0.3 < float(np.mean(fractions)) < 0.7


def test_break_mask_deterministic():
    a = make_break_mask((32, 32), SeededRng(4), BreakMaskParams())
    b = make_break_mask((32, 32), SeededRng(4), BreakMaskParams())
    assert np.array_equal(a.data, b.data)


def test_line_scribble_single_pixel_region():
    grid = np.zeros((16, 16))
    grid[5, 7] = 1
    s = sim_line_scribble(BinaryMask(grid), SeededRng(1), ScribbleParams())
    assert s.support_size() == 1
    assert s.data[5, 7] > 0


def test_line_scribble_zero_warp_is_straight():
    region = BinaryMask(np.ones((32, 32)))
    params = ScribbleParams(field_max_disp=0.0, max_scribble_pixels=1000)
    s = sim_line_scribble(region, SeededRng(2), params)
    pts = np.argwhere(s.support())
    # collinearity: all points within ~1 px of the line through the extremes
    p0, p1 = pts[0].astype(float), pts[-1].astype(float)
    d = p1 - p0
    norm = np.hypot(*d)
    if norm > 0:
        rel = pts - p0
        dist = np.abs(d[0] * rel[:, 1] - d[1] * rel[:, 0]) / norm
        assert dist.max() <= 1.0


def test_scribbles_stay_inside_region():
    for seed in range(25):
        rng = np.random.default_rng(seed)
        mask = random_blob_mask(rng, 32)
        if mask.sum() == 0:
            continue
        region = BinaryMask(mask)
        for sim in SIMS:
            s = sim(region, SeededRng(seed), ScribbleParams(), "pos")
            assert s.support_size() > 0
            assert not (s.support() & ~region.as_bool()).any(), sim.__name__


def test_scribble_cap_enforced():
    region = BinaryMask(np.ones((64, 64)))
    params = ScribbleParams(max_scribble_pixels=10)
    for sim in SIMS:
        for seed in range(5):
            s = sim(region, SeededRng(seed), params)
            assert 0 < s.support_size() <= 10


def test_centerline_on_thin_line_is_subset_of_line():
    grid = np.zeros((16, 32))
    grid[8, 4:28] = 1
    params = ScribbleParams(field_max_disp=0.0, max_scribble_pixels=100)
    s = sim_centerline_scribble(BinaryMask(grid), SeededRng(3), params)
    assert (s.support() <= grid.astype(bool)).all()
    assert s.support_size() >= 1


def test_contour_on_disk_lies_strictly_inside(disk_mask):
    params = ScribbleParams(field_max_disp=0.0, max_scribble_pixels=500,
                            contour_threshold_range=(0.4, 0.6))
    s = sim_contour_scribble(disk_mask, SeededRng(5), params)
    support = s.support()
    assert support.any()
    assert not (support & ~disk_mask.as_bool()).any()
    # strictly inside: no support on the disk's own boundary ring
    edt = euclidean_distance_transform(disk_mask)
    assert (edt[support] > 1.0).all()


def test_contour_tiny_region_falls_back_to_line():
    grid = np.zeros((8, 8))
    grid[2:4, 2:4] = 1  # 4 px < 9 triggers fallback
    s = sim_contour_scribble(BinaryMask(grid), SeededRng(6), ScribbleParams())
    assert s.support_size() > 0
    assert not (s.support() & ~grid.astype(bool)).any()


def test_scribble_empty_region_raises():
    empty = BinaryMask(np.zeros((8, 8)))
    for sim in SIMS:
        with pytest.raises(NoRegionError):
            sim(empty, SeededRng(0), ScribbleParams())


def test_center_click_on_disk_hits_center(disk_mask):
    clicks = sim_clicks(disk_mask, "center", 1, SeededRng(0), ClickParams())
    assert len(clicks) == 1
    assert (clicks[0].row, clicks[0].col) == (10, 10)


def test_center_clicks_one_per_component():
    grid = np.zeros((16, 32))
    grid[2:7, 2:7] = 1      # 25 px
    grid[8:16, 20:28] = 1   # 64 px, larger
    clicks = sim_clicks(BinaryMask(grid), "center", 2, SeededRng(0), ClickParams())
    assert len(clicks) == 2
    # first click targets the larger component
    assert clicks[0].row >= 8 and clicks[0].col >= 20


def test_random_clicks_relaxation_returns_all_pixels():
    grid = np.zeros((8, 8))
    grid[1, 1] = grid[2, 5] = grid[6, 3] = 1
    clicks = sim_clicks(BinaryMask(grid), "random", 3, SeededRng(0), ClickParams())
    assert sorted((c.row, c.col) for c in clicks) == [(1, 1), (2, 5), (6, 3)]


def test_clicks_always_inside_region():
    for seed in range(25):
        rng = np.random.default_rng(seed + 100)
        mask = random_blob_mask(rng, 32)
        if mask.sum() == 0:
            continue
        region = BinaryMask(mask)
        for strategy in ("random", "center", "border"):
            n = int(rng.integers(1, 4))
            clicks = sim_clicks(region, strategy, n, SeededRng(seed), ClickParams())
            assert clicks, strategy
            for c in clicks:
                assert mask[c.row, c.col] == 1, strategy


def test_click_separation_respected_when_feasible():
    region = BinaryMask(np.ones((128, 128)))
    clicks = sim_clicks(region, "random", 3, SeededRng(1), ClickParams(min_separation=5))
    for i in range(len(clicks)):
        for j in range(i + 1, len(clicks)):
            d = np.hypot(clicks[i].row - clicks[j].row, clicks[i].col - clicks[j].col)
            assert d >= 5


def test_bbox_no_jitter_is_min_box():
    grid = np.zeros((64, 64))
    grid[10:21, 30:41] = 1
    box = sim_bbox(BinaryMask(grid), SeededRng(0), jitter_max=0)
    assert (box.row_min, box.col_min, box.row_max, box.col_max) == (10, 30, 20, 40)


def test_bbox_always_contains_region():
    for seed in range(20):
        rng = np.random.default_rng(seed + 50)
        mask = random_blob_mask(rng, 32)
        if mask.sum() == 0:
            continue
        region = BinaryMask(mask)
        box = sim_bbox(region, SeededRng(seed), jitter_max=20)
        assert box.contains_box(min_bounding_box(region))


def test_initial_prompts_boxes_only():
    yy, xx = np.mgrid[:32, :32]
    y = BinaryMask(((yy - 16) ** 2 + (xx - 16) ** 2) <= 36)
    config = PromptConfig(enabled=("boxes",))
    u = sample_initial_prompts(y, SeededRng(0), config)
    assert len(u.boxes) == 1
    assert not u.clicks and not u.pos_scribbles and not u.neg_scribbles


def test_initial_prompts_single_click_config():
    yy, xx = np.mgrid[:32, :32]
    y = BinaryMask(((yy - 16) ** 2 + (xx - 16) ** 2) <= 36)
    config = PromptConfig(enabled=("clicks",), n_min=1, n_max=1)
    for seed in range(10):
        u = sample_initial_prompts(y, SeededRng(seed), config)
        pos = [c for c in u.clicks if c.sign == "pos"]
        neg = [c for c in u.clicks if c.sign == "neg"]
        assert len(pos) == 1
        assert len(neg) in (0, 1)


def test_initial_prompts_containment_fuzz():
    config = PromptConfig()
    for seed in range(20):
        rng = np.random.default_rng(seed + 500)
        mask = random_blob_mask(rng, 32)
        if mask.sum() == 0 or mask.sum() == mask.size:
            continue
        y = BinaryMask(mask)
        u = sample_initial_prompts(y, SeededRng(seed), config)
        for s in u.pos_scribbles:
            assert not (s.support() & ~y.as_bool()).any()
        for s in u.neg_scribbles:
            assert not (s.support() & y.as_bool()).any()
        for c in u.clicks:
            expected = y.as_bool() if c.sign == "pos" else ~y.as_bool()
            assert expected[c.row, c.col]
        for b in u.boxes:
            assert b.contains_box(min_bounding_box(y))


def test_corrections_only_false_negative():
    fn = BinaryMask(np.pad(np.ones((4, 4)), 6))
    fp = BinaryMask(np.zeros_like(fn.data))
    delta = sample_corrections(fn, fp, SeededRng(0), PromptConfig())
    assert not delta.is_empty()
    assert not delta.neg_scribbles
    for c in delta.clicks:
        assert c.sign == "pos"
        assert fn.data[c.row, c.col] == 1
    for s in delta.pos_scribbles:
        assert not (s.support() & ~fn.as_bool()).any()


def test_corrections_both_empty_gives_empty_delta():
    empty = BinaryMask(np.zeros((8, 8)))
    delta = sample_corrections(empty, empty, SeededRng(0), PromptConfig())
    assert delta.is_empty()


def test_corrections_sign_matches_source_region_fuzz():
    config = PromptConfig()
    for seed in range(20):
        rng = np.random.default_rng(seed + 900)
        fn_arr = random_blob_mask(rng, 24, p_empty=0.2)
        fp_arr = random_blob_mask(rng, 24, p_empty=0.2)
        fp_arr = np.where(fn_arr > 0, 0.0, fp_arr).astype(np.float32)
        fn, fp = BinaryMask(fn_arr), BinaryMask(fp_arr)
        delta = sample_corrections(fn, fp, SeededRng(seed), config)
        for c in delta.clicks:
            region = fn if c.sign == "pos" else fp
            assert region.data[c.row, c.col] == 1
        for s in delta.pos_scribbles:
            assert not (s.support() & ~fn.as_bool()).any()
        for s in delta.neg_scribbles:
            assert not (s.support() & ~fp.as_bool()).any()
