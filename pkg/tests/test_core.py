import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arcscan.core import (SIZE, ArcSet, ArsImage, DeficiencyClass, PointMask, angles_to_arc, apply_mask,
                          arc_to_angles, columns_first, concat_position_to_pixel, extract_arcs, paired_arc,
                          sample_stack)


@pytest.fixture
def image(rng):
    return rng.normal(size=(SIZE, SIZE))


def test_arc_to_angles_examples():
    assert arc_to_angles(20) == (20.0, (0.0, 180.0))
    assert arc_to_angles(0) == (0.0, (0.0, 180.0))
    assert arc_to_angles(160) == (160.0, (0.0, -180.0))
    assert paired_arc(20) == 160 and paired_arc(160) == 20


@pytest.mark.parametrize("bad", [-1, 180, 2.5])
def test_arc_to_angles_rejects(bad):
    with pytest.raises(ValueError):
        arc_to_angles(bad)


def test_arc_angles_bijection():
    pairs = set()
    for c in range(SIZE):
        alpha, beta = arc_to_angles(c)
        half = 1 if beta[1] > 0 else -1
        assert angles_to_arc(alpha, half) == c
        pairs.add((alpha, half))
    assert len(pairs) == SIZE
    with pytest.raises(ValueError):
        angles_to_arc(20, -1)


def test_deficiency_levels():
    assert [c.level for c in DeficiencyClass] == [0.0, 0.1, 0.2, 0.4, 0.6]


def test_arcset_canonical():
    assert ArcSet([17, 5, 90]).indices == (5, 17, 90)
    with pytest.raises(ValueError):
        ArcSet([3, 3])
    with pytest.raises(ValueError):
        ArcSet([180])


def test_ars_image_validation():
    with pytest.raises(ValueError):
        ArsImage(np.zeros((10, 10)))
    bad = np.zeros((SIZE, SIZE))
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        ArsImage(bad)
    img = ArsImage(np.ones((SIZE, SIZE)), 3)
    assert img.label is DeficiencyClass.D40
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 2.0


def test_extract_single_column(image):
    np.testing.assert_array_equal(extract_arcs(image, ArcSet([42])), image[:, 42])


def test_extract_constant():
    out = extract_arcs(np.full((SIZE, SIZE), 3.0), ArcSet([1, 2, 3, 4]))
    assert out.shape == (720,) and np.all(out == 3.0)


def test_extract_matches_loop(image):
    expected = []
    for c in (5, 17):
        for r in range(SIZE):
            expected.append(image[r, c])
    np.testing.assert_array_equal(extract_arcs(image, ArcSet([17, 5])), expected)


def test_apply_mask_examples(image, rng):
    np.testing.assert_array_equal(apply_mask(image, PointMask.full()), image.ravel())
    one = np.zeros((SIZE, SIZE), bool)
    one[7, 99] = True
    np.testing.assert_array_equal(apply_mask(image, PointMask(one)), [image[7, 99]])
    m = rng.random((SIZE, SIZE)) < 0.01
    expected = [image[r, c] for r in range(SIZE) for c in range(SIZE) if m[r, c]]
    np.testing.assert_array_equal(apply_mask(image, PointMask(m)), expected)
    with pytest.raises(ValueError):
        apply_mask(image, PointMask(np.zeros((SIZE, SIZE), bool)))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, SIZE - 1), min_size=1, max_size=12, unique=True), st.randoms())
def test_arcs_and_mask_agree(cols, rnd):
    image = np.random.default_rng(len(cols)).normal(size=(SIZE, SIZE))
    shuffled = list(cols)
    rnd.shuffle(shuffled)
    arcs = ArcSet(shuffled)
    assert arcs == ArcSet(cols)
    by_arcs = extract_arcs(image, arcs)
    by_mask = apply_mask(image, PointMask.from_arcs(arcs))
    # same values, differing only in documented order
    np.testing.assert_array_equal(np.sort(by_arcs), np.sort(by_mask))
    stack = image[None]
    np.testing.assert_array_equal(sample_stack(stack, arcs)[0], by_arcs)
    np.testing.assert_array_equal(sample_stack(stack, PointMask.from_arcs(arcs))[0], by_arcs)


def test_sample_stack_transposed_and_full(rng):
    stack = rng.normal(size=(3, SIZE, SIZE))
    arcs = ArcSet([0, 90, 179])
    np.testing.assert_array_equal(sample_stack(columns_first(stack), arcs, transposed=True),
                                  sample_stack(stack, arcs))
    full = sample_stack(stack, None)
    assert full.shape == (3, SIZE * SIZE)
    np.testing.assert_array_equal(full, sample_stack(stack, ArcSet(range(SIZE))))
    with pytest.raises(TypeError):
        sample_stack(stack, [1, 2])


def test_mask_from_arc_points():
    arcs = ArcSet([10, 50])
    mask = PointMask.from_arcs(arcs, [0, 179, 180, 200])
    assert mask.count == 4
    assert mask.mask[0, 10] and mask.mask[179, 10] and mask.mask[0, 50] and mask.mask[20, 50]
    rows, cols = concat_position_to_pixel(arcs, [181])
    assert (rows[0], cols[0]) == (1, 50)
    with pytest.raises(ValueError):
        PointMask.from_arcs(arcs, [360])


def test_mask_flat_roundtrip(rng):
    idx = np.sort(rng.choice(SIZE * SIZE, 300, replace=False))
    m = PointMask.from_flat_indices(idx)
    np.testing.assert_array_equal(m.flat_indices(), idx)
    assert m == PointMask.from_flat_indices(idx[::-1])
    with pytest.raises(ValueError):
        PointMask.from_flat_indices([1, 1])
    with pytest.raises(ValueError):
        PointMask.from_flat_indices([SIZE * SIZE])
