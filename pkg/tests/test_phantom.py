import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from usreg.phantom import InvalidPhantomSpec, PhantomSpec, generate, speckle, surface_depth


def _flat(**kw):
    base = dict(dims=(20, 20, 41), tilt_deg=(0.0, 0.0), bump_mm=0.0, features=(), speckle_sigma=0.0)
    base.update(kw)
    return PhantomSpec(**base)


def test_noise_free_flat_surface_has_three_bands():
    spec = _flat()
    vol, band = generate(spec)
    data = np.asarray(vol.data)
    # mid-depth 5.6 mm at 0.28 mm spacing is index 20
    assert band[:, :, 20:23].all() and band.sum() == 20 * 20 * 3
    assert (data[:, :, :20] == 0.35).all()
    assert (data[:, :, 20:23] == 0.9).all()
    assert (data[:, :, 23:] == 0.05).all()


def test_same_seed_is_bit_identical_and_seed_matters():
    spec = PhantomSpec(dims=(30, 30, 30))
    a, _ = generate(spec)
    b, _ = generate(spec)
    c, _ = generate(PhantomSpec(dims=(30, 30, 30), seed=43))
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_default_phantom_contrast(default_phantom):
    vol, band = default_phantom
    data = np.asarray(vol.data)
    top = np.argmax(band, axis=2)[:, :, None]
    k = np.arange(data.shape[2])[None, None, :]
    above, below = data[k < top].mean(), data[k >= top + 3].mean()
    assert above / below >= 3.0
    assert data.min() >= 0.0 and data.max() <= 1.0


def test_speckle_has_unit_mean():
    rng = np.random.default_rng(0)
    for corr in (0.0, 1.5):
        s = speckle((60, 60, 60), 0.25, rng, corr)
        assert s.min() >= 0.0
        assert s.mean() == pytest.approx(1.0, abs=0.01)


def test_speckle_variance_matches_closed_form():
    # E[(1+sN)^4] = 1 + 6s^2 + 3s^4, so var = that / (1+s^2)^2 - 1
    s = 0.25
    x = speckle((80, 80, 80), s, np.random.default_rng(1))
    expected = (1 + 6 * s ** 2 + 3 * s ** 4) / (1 + s ** 2) ** 2 - 1
    assert x.var() == pytest.approx(expected, rel=0.02)


def test_surface_depth_tilt_and_bump():
    spec = _flat(tilt_deg=(10.0, 0.0))
    d0 = surface_depth(spec, 0.0, 0.0)
    assert d0 - surface_depth(spec, 1.0, 0.0) == pytest.approx(np.tan(np.deg2rad(10.0)))
    spec = _flat(bump_mm=2.0)
    assert surface_depth(spec, 0.0, 0.0) == pytest.approx(5.6 - 2.0)


@pytest.mark.parametrize("kw", [dict(tissue_mean=0.95), dict(shadow_mean=0.4),
                                dict(interface_value=1.2), dict(tilt_deg=(20.0, 0.0)),
                                dict(thickness_vox=0), dict(speckle_sigma=-1.0)])
def test_invalid_specs(kw):
    with pytest.raises(InvalidPhantomSpec):
        PhantomSpec(**kw)


def test_band_ordering_message():
    with pytest.raises(InvalidPhantomSpec, match="band ordering"):
        PhantomSpec(tissue_mean=0.1, shadow_mean=0.2)


def test_spec_dict_round_trip():
    spec = PhantomSpec(dims=(10, 11, 12), seed=5)
    assert PhantomSpec.from_dict(spec.to_dict()) == spec


@settings(max_examples=15, deadline=None)
@given(iface=st.floats(0.6, 1.0), tissue=st.floats(0.2, 0.5), shadow=st.floats(0.0, 0.15),
       seed=st.integers(0, 1000))
def test_band_means_are_ordered(iface, tissue, shadow, seed):
    spec = PhantomSpec(dims=(16, 16, 40), interface_value=iface, tissue_mean=tissue,
                       shadow_mean=shadow, seed=seed, features=(), bump_mm=0.0)
    vol, band = generate(spec)
    data = np.asarray(vol.data)
    top = np.argmax(band, axis=2)[:, :, None]
    k = np.arange(40)[None, None, :]
    assert data[band].mean() > data[k < top].mean() > data[k >= top + 3].mean()
