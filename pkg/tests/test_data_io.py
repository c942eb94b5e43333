import numpy as np
import pytest

from akplab.core_math import Prng, derive_seed
from akplab.data_io import (Dataset, SynthSpec, apportion, draw_wing_params, load_dataset_json, load_image_dir,
                            quantize8, read_netpbm, render_wing, save_dataset_json, save_image_dir, speckle_mask,
                            split, synth_generate, write_netpbm)
from akplab.errors import ImageFormatError, ParameterError, StratificationError


@pytest.fixture(scope="module")
def default_ds():
    return synth_generate(SynthSpec())


def test_default_counts(default_ds):
    assert len(default_ds) == 215
    assert default_ds.class_counts() == (139, 76)
    assert default_ds.images.shape == (215, 1, 32, 32)
    assert default_ds.images.min() >= 0 and default_ds.images.max() <= 1


def test_synth_deterministic(default_ds):
    again = synth_generate(SynthSpec())
    assert np.array_equal(again.images, default_ds.images) and np.array_equal(again.labels, default_ds.labels)
    other = synth_generate(SynthSpec(seed=1))
    assert not np.array_equal(other.images, default_ds.images)


def test_speckles_are_the_only_difference_without_noise():
    prng = Prng(derive_seed(4, 1))
    params = draw_wing_params(prng, 32, True)
    assert 3 <= len(params.speckles) <= 8
    with_s = render_wing(params, 32, 0.45, with_speckles=True)
    without = render_wing(params, 32, 0.45, with_speckles=False)
    inside = speckle_mask(params, 32) > 0
    assert np.array_equal(with_s[~inside], without[~inside])
    assert np.any(with_s[inside] != without[inside])


def test_noise_free_class_images_are_smooth():
    ds = synth_generate(SynthSpec(n_class0=3, n_class1=3, noise_std=0.0))
    again = synth_generate(SynthSpec(n_class0=3, n_class1=3, noise_std=0.0))
    assert np.array_equal(ds.images, again.images)


def test_label_flip_rate():
    ds = synth_generate(SynthSpec(n_class0=100, n_class1=100, side=8, label_flip_rate=0.5))
    assert 0 < np.sum(ds.labels != np.repeat([0, 1], 100)) < 200


@pytest.mark.parametrize("bad", [dict(n_class0=0), dict(side=4), dict(noise_std=-1), dict(label_flip_rate=2)])
def test_bad_spec(bad):
    with pytest.raises(ParameterError):
        SynthSpec(**bad)


def test_pgm_round_trip_lossless(tmp_path):
    img = Prng(1).uniform_array(32 * 32).reshape(1, 32, 32)
    write_netpbm(tmp_path / "a.pgm", img)
    back = read_netpbm(tmp_path / "a.pgm")
    assert np.array_equal(quantize8(back), quantize8(img))
    assert np.array_equal(back, quantize8(img) / 255.0)


def test_ppm_scaling(tmp_path):
    img = np.zeros((3, 2, 2))
    img[0, 0, 0] = 1.0
    write_netpbm(tmp_path / "c.ppm", img)
    back = read_netpbm(tmp_path / "c.ppm")
    assert back.shape == (3, 2, 2) and back[0, 0, 0] == 1.0 and back.sum() == 1.0


def test_hand_written_pgm_with_comment(tmp_path):
    (tmp_path / "h.pgm").write_bytes(b"P5\n# a comment\n2 1\n# another\n100\n" + bytes([0, 100]))
    assert read_netpbm(tmp_path / "h.pgm").tolist() == [[[0.0, 1.0]]]


def test_sixteen_bit_pgm(tmp_path):
    (tmp_path / "w.pgm").write_bytes(b"P5 1 1 1000\n" + (500).to_bytes(2, "big"))
    assert read_netpbm(tmp_path / "w.pgm")[0, 0, 0] == 0.5


@pytest.mark.parametrize("payload", [b"P2\n1 1\n255\n0", b"P5\n2 2\n255\n\x00", b"P5\n2", b"P5\nx 2\n255\n"])
def test_bad_netpbm(tmp_path, payload):
    (tmp_path / "b.pgm").write_bytes(payload)
    with pytest.raises(ImageFormatError):
        read_netpbm(tmp_path / "b.pgm")


def test_missing_file(tmp_path):
    with pytest.raises(ImageFormatError):
        read_netpbm(tmp_path / "nope.pgm")


def test_dataset_dir_round_trip(tmp_path):
    ds = synth_generate(SynthSpec(n_class0=4, n_class1=3, side=16))
    save_image_dir(ds, tmp_path)
    back = load_image_dir(tmp_path)
    assert back.class_counts() == (4, 3)
    assert np.array_equal(quantize8(back.images), quantize8(ds.images))


def test_one_image_per_class(tmp_path):
    for sub in ("tumor", "no_tumor"):
        (tmp_path / sub).mkdir()
        write_netpbm(tmp_path / sub / "x.pgm", np.full((32, 32), 0.5))
    ds = load_image_dir(tmp_path)
    assert len(ds) == 2 and sorted(ds.labels.tolist()) == [0, 1]


def test_empty_tumor_dir_warns(tmp_path):
    (tmp_path / "tumor").mkdir()
    (tmp_path / "no_tumor").mkdir()
    write_netpbm(tmp_path / "no_tumor" / "x.pgm", np.zeros((8, 8)))
    with pytest.warns(UserWarning):
        ds = load_image_dir(tmp_path)
    assert ds.labels.tolist() == [0]


def test_size_mismatch(tmp_path):
    (tmp_path / "tumor").mkdir()
    (tmp_path / "no_tumor").mkdir()
    write_netpbm(tmp_path / "no_tumor" / "x.pgm", np.zeros((8, 8)))
    write_netpbm(tmp_path / "tumor" / "y.pgm", np.zeros((9, 8)))
    with pytest.raises(ImageFormatError):
        load_image_dir(tmp_path)


def test_dataset_json_round_trip(tmp_path):
    ds = synth_generate(SynthSpec(n_class0=2, n_class1=2, side=8))
    save_dataset_json(ds, tmp_path / "d.json")
    back = load_dataset_json(tmp_path / "d.json")
    assert np.array_equal(back.images, ds.images) and np.array_equal(back.labels, ds.labels)


def test_apportion():
    assert apportion(139, (0.7, 0.15, 0.15)) == [97, 21, 21]
    assert apportion(76, (0.7, 0.15, 0.15)) == [53, 12, 11]
    assert apportion(10, (1, 0, 0)) == [10, 0, 0]


def test_split_counts(default_ds):
    tr, va, te = split(default_ds, (0.7, 0.15, 0.15), seed=11)
    for part, frac in ((tr, 0.7), (va, 0.15), (te, 0.15)):
        c0, c1 = part.class_counts()
        assert abs(c0 - 139 * frac) <= 1 and abs(c1 - 76 * frac) <= 1
    assert tr.class_counts() == (97, 53)
    ids = np.concatenate([tr.ids, va.ids, te.ids])
    assert sorted(ids.tolist()) == list(range(215))


def test_split_determinism(default_ds):
    a = split(default_ds, seed=3)
    b = split(default_ds, seed=3)
    c = split(default_ds, seed=4)
    assert all(np.array_equal(x.ids, y.ids) for x, y in zip(a, b))
    assert not np.array_equal(a[0].ids, c[0].ids)
    assert [p.class_counts() for p in a] == [p.class_counts() for p in c]


def test_split_whole_train(default_ds):
    tr, va, te = split(default_ds, (1, 0, 0), seed=0)
    assert len(tr) == 215 and len(va) == 0 and len(te) == 0


def test_split_errors():
    tiny = Dataset(np.zeros((4, 1, 2, 2)), [0, 0, 0, 1])
    with pytest.raises(StratificationError):
        split(tiny, seed=0)
    with pytest.raises(ParameterError):
        split(tiny, (0.5, 0.2, 0.2), seed=0)


def test_unstratified_split_partitions():
    ds = synth_generate(SynthSpec(n_class0=20, n_class1=10, side=8))
    parts = split(ds, seed=1, stratified=False)
    assert sum(len(p) for p in parts) == 30
