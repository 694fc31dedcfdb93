import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from usreg.segmentation import RoiMask
from usreg.similarity import (FrameSimilarity, InsufficientOverlapError, ZeroVarianceError, ncc,
                              ncc_values)
from usreg.transform import RigidTransform
from usreg.volume import Volume3D, extract_slices, orthogonal_layout


def naive_ncc(a, b):
    """Textbook two-pass Pearson correlation with compensated sums."""
    a, b = list(map(float, a)), list(map(float, b))
    ma, mb = math.fsum(a) / len(a), math.fsum(b) / len(b)
    num = math.fsum((x - ma) * (y - mb) for x, y in zip(a, b))
    saa = math.fsum((x - ma) ** 2 for x in a)
    sbb = math.fsum((y - mb) ** 2 for y in b)
    return num / math.sqrt(saa * sbb)


def test_hand_case():
    assert ncc_values([1, 2, 4], [1, 2, 3]) == pytest.approx(3 / math.sqrt(42 / 9 * 2), abs=1e-12)
    assert ncc_values([1, 2, 4], [1, 2, 3]) == pytest.approx(0.9820, abs=1e-4)


def test_matches_naive_oracle_on_random_masked_pairs():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(150, 2000))
        a, b = rng.random(n), rng.random(n) * 0.3 + 0.2 * rng.random(n)
        mask = rng.random(n) > 0.3
        assert abs(ncc_values(a[mask], b[mask]) - naive_ncc(a[mask], b[mask])) <= 1e-12


finite = st.floats(0.0, 1.0, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=3, max_size=60),
       st.floats(0.1, 10.0), st.floats(-5.0, 5.0))
def test_bound_symmetry_and_affine_invariance(pairs, scale, offset):
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    try:
        r = ncc_values(a, b)
    except ZeroVarianceError:
        return
    assert -1.0 <= r <= 1.0
    if np.ptp(a) < 1e-3 or np.ptp(b) < 1e-3:
        return
    assert ncc_values(b, a) == pytest.approx(r, abs=1e-12)
    assert ncc_values(scale * a + offset, b) == pytest.approx(r, abs=1e-9)


def test_zero_variance():
    with pytest.raises(ZeroVarianceError):
        ncc_values([0.5] * 10, np.arange(10.0))


@pytest.fixture(scope="module")
def small_volume():
    rng = np.random.default_rng(9)
    from scipy.ndimage import gaussian_filter
    data = gaussian_filter(rng.random((41, 41, 41)), 2.0)
    data = (data - data.min()) / np.ptp(data)
    return Volume3D(data, (0.5, 0.5, 0.5))


def test_self_correlation_is_one(small_volume):
    T = RigidTransform((1.0, -0.5, 0.3), (2.0, -3.0, 4.0))
    frame = extract_slices(small_volume, T, orthogonal_layout(small_volume))
    res = ncc(frame, small_volume, RoiMask.full(small_volume.dims), T)
    assert res.value == pytest.approx(1.0, abs=1e-9)
    assert res.sample_count == frame.n_valid
    assert res.overlap_fraction == 1.0


def test_inverted_volume_gives_minus_one(small_volume):
    T = RigidTransform.identity()
    frame = extract_slices(small_volume, T, orthogonal_layout(small_volume))
    inverted = small_volume.with_data(1.0 - np.asarray(small_volume.data))
    assert ncc(frame, inverted, None, T).value == pytest.approx(-1.0, abs=1e-9)


def test_roi_gating_uses_nearest_voxel(small_volume):
    layout = orthogonal_layout(small_volume)
    frame = extract_slices(small_volume, RigidTransform.identity(), layout)
    bits = np.zeros(small_volume.dims, dtype=bool)
    bits[:, :, :20] = True
    res = ncc(frame, small_volume, RoiMask(bits), RigidTransform.identity())
    pts, _, ok = frame.flat()
    idx = np.rint(small_volume.world_to_index(pts[ok])).astype(int)
    assert res.sample_count == int(bits[idx[:, 0], idx[:, 1], idx[:, 2]].sum())


def test_compiled_resampling_matches_reference_sampler(small_volume):
    rng = np.random.default_rng(2)
    frame = extract_slices(small_volume, RigidTransform.identity(), orthogonal_layout(small_volume))
    sim = FrameSimilarity(frame, small_volume)
    for _ in range(5):
        T = RigidTransform(tuple(rng.uniform(-3, 3, 3)), tuple(rng.uniform(-10, 10, 3)))
        b, keep = sim.resample(T)
        ref, ok = small_volume.sample(T.apply(sim.points))
        assert (keep == ok).all()
        np.testing.assert_allclose(b[keep], ref[ok], atol=1e-12)


def test_insufficient_overlap(small_volume):
    frame = extract_slices(small_volume, RigidTransform.identity(), orthogonal_layout(small_volume))
    with pytest.raises(InsufficientOverlapError):
        ncc(frame, small_volume, None, RigidTransform.translate(100.0))
    bits = np.zeros(small_volume.dims, dtype=bool)
    bits[20, 20, 20] = True
    with pytest.raises(InsufficientOverlapError):
        ncc(frame, small_volume, RoiMask(bits), RigidTransform.identity())


def test_roi_dims_must_match(small_volume):
    frame = extract_slices(small_volume, RigidTransform.identity(), orthogonal_layout(small_volume))
    with pytest.raises(ValueError):
        FrameSimilarity(frame, small_volume, RoiMask.full((3, 3, 3)))
