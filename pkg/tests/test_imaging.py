import numpy as np
import pytest

from spfreg.imaging import (
    ImageGray,
    NoiseSpec,
    PGMDepthError,
    PGMHeaderError,
    PGMTruncatedError,
    add_gaussian_noise,
    load_test_image,
    project_box,
    psnr,
    read_pgm,
    write_pgm,
)


def test_vectorize_is_column_major():
    img = ImageGray([[1, 3], [2, 4]])
    np.testing.assert_array_equal(img.vectorize(), [1, 2, 3, 4])
    back = ImageGray.from_vector(img.vectorize(), 2)
    np.testing.assert_array_equal(back.pixels, img.pixels)
    with pytest.raises(ValueError):
        ImageGray.from_vector(np.zeros(5), 2)


def test_image_is_immutable_and_square_checks():
    img = ImageGray(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1
    assert not img.is_square
    with pytest.raises(ValueError):
        img.n_side
    with pytest.raises(ValueError):
        ImageGray(np.zeros(4))


def test_noise_is_seeded_and_unclipped():
    img = ImageGray(np.full((32, 32), 250.0))
    a = add_gaussian_noise(img, NoiseSpec(20, seed=5))
    b = add_gaussian_noise(img, NoiseSpec(20, seed=5))
    c = add_gaussian_noise(img, NoiseSpec(20, seed=6))
    assert np.array_equal(a.pixels, b.pixels)
    assert not np.array_equal(a.pixels, c.pixels)
    assert a.pixels.max() > 255
    eps = (a.pixels - img.pixels) / 20
    assert abs(eps.mean()) < 0.1 and abs(eps.std() - 1) < 0.1


def test_zero_noise_is_identity():
    img = ImageGray(np.arange(16.0).reshape(4, 4))
    assert np.array_equal(add_gaussian_noise(img, NoiseSpec(0, 3)).pixels, img.pixels)
    with pytest.raises(ValueError):
        NoiseSpec(-1)


def test_psnr_values():
    a = ImageGray(np.zeros((4, 4)))
    assert psnr(a, a) == 99.0
    b = ImageGray(np.full((4, 4), 255.0))
    assert psnr(a, b) == pytest.approx(0.0)
    c = ImageGray(np.full((4, 4), 25.5))
    assert psnr(a, c) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        psnr(a, ImageGray(np.zeros((3, 3))))


def test_psnr_of_noise_matches_eta():
    img = ImageGray(np.full((256, 256), 128.0))
    noisy = add_gaussian_noise(img, NoiseSpec(20, 1))
    assert psnr(img, noisy) == pytest.approx(20 * np.log10(255 / 20), abs=0.05)


def test_project_box():
    np.testing.assert_array_equal(project_box([-3, 100, 300], 0, 255), [0, 100, 255])
    with pytest.raises(ValueError):
        project_box([1.0], 2, 1)


def test_pgm_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    px = rng.integers(0, 256, (7, 5)).astype(float)
    write_pgm(ImageGray(px), tmp_path / "a.pgm")
    assert np.array_equal(read_pgm(tmp_path / "a.pgm").pixels, px)


def test_pgm_write_clamps_and_rounds(tmp_path):
    write_pgm(ImageGray([[-4.0, 12.6], [300.0, 99.4]]), tmp_path / "c.pgm")
    np.testing.assert_array_equal(read_pgm(tmp_path / "c.pgm").pixels, [[0, 13], [255, 99]])


def test_pgm_header_with_comments(tmp_path):
    p = tmp_path / "h.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n# depth\n255\n\x01\x02")
    np.testing.assert_array_equal(read_pgm(p).pixels, [[1, 2]])


@pytest.mark.parametrize(
    "data,err,msg",
    [
        (b"P2\n2 1\n255\n12", PGMHeaderError, "malformed header"),
        (b"P5\n2 x\n255\n12", PGMHeaderError, "malformed header"),
        (b"P5\n2", PGMHeaderError, "malformed header"),
        (b"P5\n2 1\n65535\n1234", PGMDepthError, "unsupported depth"),
        (b"P5\n4 4\n255\n\x00\x01", PGMTruncatedError, "truncated payload"),
    ],
)
def test_pgm_errors(tmp_path, data, err, msg):
    p = tmp_path / "bad.pgm"
    p.write_bytes(data)
    with pytest.raises(err, match=msg):
        read_pgm(p)


def test_load_test_image(tmp_path, monkeypatch):
    write_pgm(ImageGray(np.eye(3) * 200), tmp_path / "tiny.pgm")
    monkeypatch.setenv("SPFREG_IMAGE_DIR", str(tmp_path))
    assert load_test_image("tiny").shape == (3, 3)
    with pytest.raises(FileNotFoundError, match="not found"):
        load_test_image("missing")


def test_load_png_through_pillow(tmp_path):
    from PIL import Image

    arr = (np.arange(16, dtype=np.uint8) * 10).reshape(4, 4)
    Image.fromarray(arr).save(tmp_path / "g.png")
    np.testing.assert_array_equal(load_test_image("g", tmp_path).pixels, arr)
