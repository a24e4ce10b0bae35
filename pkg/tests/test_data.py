import gzip
import struct

import numpy as np
import pytest

from liftnet.data import (BadMagicError, CountMismatchError, DataFormatError, TruncatedFileError,
                          batches, from_arrays, load_cifar10_gray, load_dataset, load_idx, one_hot)

from .conftest import data_dir


def write_idx(tmp_path, pixels, labels, rows=2, cols=2, img_magic=0x803, lab_magic=0x801,
              n_images=None, n_labels=None, gz=False):
    pixels = np.asarray(pixels, dtype=np.uint8).ravel()
    labels = np.asarray(labels, dtype=np.uint8)
    n_images = len(labels) if n_images is None else n_images
    n_labels = len(labels) if n_labels is None else n_labels
    ib = struct.pack(">IIII", img_magic, n_images, rows, cols) + pixels.tobytes()
    lb = struct.pack(">II", lab_magic, n_labels) + labels.tobytes()
    suffix = ".gz" if gz else ""
    ip, lp = tmp_path / f"img{suffix}", tmp_path / f"lab{suffix}"
    opener = gzip.open if gz else open
    with opener(ip, "wb") as f:
        f.write(ib)
    with opener(lp, "wb") as f:
        f.write(lb)
    return ip, lp


def test_idx_normalisation(tmp_path):
    ip, lp = write_idx(tmp_path, [0, 255, 0, 255, 51, 102, 153, 204], [3, 7])
    ds = load_idx(ip, lp)
    assert len(ds) == 2 and ds.input_dim == 4 and ds.num_classes == 10
    np.testing.assert_array_equal(ds.X[0], [0, 1, 0, 1])
    np.testing.assert_allclose(ds.X[1], [0.2, 0.4, 0.6, 0.8])
    assert ds[1].label == 7 and ds[1].y[7] == 1 and ds[1].y.sum() == 1


def test_idx_gzip(tmp_path):
    ip, lp = write_idx(tmp_path, [0, 255, 0, 255], [1], gz=True)
    assert load_idx(ip, lp).labels.tolist() == [1]


def test_idx_bad_magic(tmp_path):
    ip, lp = write_idx(tmp_path, [0] * 4, [0], img_magic=0x801)
    with pytest.raises(BadMagicError, match="magic"):
        load_idx(ip, lp)
    ip, lp = write_idx(tmp_path, [0] * 4, [0], lab_magic=0x803)
    with pytest.raises(BadMagicError):
        load_idx(ip, lp)


def test_idx_truncated(tmp_path):
    ip, lp = write_idx(tmp_path, [0] * 7, [0, 1])
    with pytest.raises(TruncatedFileError, match="pixel"):
        load_idx(ip, lp)
    ip.write_bytes(b"\x00\x00")
    with pytest.raises(TruncatedFileError, match="header"):
        load_idx(ip, lp)
    ip, lp = write_idx(tmp_path, [0] * 8, [0], n_labels=2)
    with pytest.raises(TruncatedFileError, match="labels"):
        load_idx(ip, lp)


def test_idx_count_mismatch(tmp_path):
    ip, lp = write_idx(tmp_path, [0] * 8, [0, 1, 2], n_images=2)
    with pytest.raises(CountMismatchError):
        load_idx(ip, lp)


def test_idx_label_range(tmp_path):
    ip, lp = write_idx(tmp_path, [0] * 4, [12])
    with pytest.raises(DataFormatError, match="out of range"):
        load_idx(ip, lp)


def test_error_classes_distinct():
    kinds = {BadMagicError, TruncatedFileError, CountMismatchError}
    assert len(kinds) == 3 and all(issubclass(k, DataFormatError) for k in kinds)


def cifar_record(label, r, g, b):
    return bytes([label]) + bytes([r] * 1024) + bytes([g] * 1024) + bytes([b] * 1024)


def test_cifar_gray_equal_channels(tmp_path):
    p = tmp_path / "b.bin"
    p.write_bytes(cifar_record(4, 77, 77, 77) + cifar_record(9, 255, 255, 255))
    ds = load_cifar10_gray(p)
    assert len(ds) == 2 and ds.input_dim == 1024
    np.testing.assert_allclose(ds.X[0], 77 / 255)
    np.testing.assert_allclose(ds.X[1], 1.0)
    assert ds.labels.tolist() == [4, 9]


def test_cifar_luma_and_mean(tmp_path):
    p = tmp_path / "b.bin"
    p.write_bytes(cifar_record(0, 255, 0, 0))
    np.testing.assert_allclose(load_cifar10_gray(p).X[0], 0.299)
    np.testing.assert_allclose(load_cifar10_gray(p, weights="mean").X[0], 1 / 3)


def test_cifar_row_major_layout(tmp_path):
    red = np.zeros(1024, np.uint8)
    red[5] = 255
    rec = bytes([1]) + red.tobytes() + red.tobytes() + red.tobytes()
    p = tmp_path / "b.bin"
    p.write_bytes(rec)
    x = load_cifar10_gray(p).X[0]
    assert x[5] == pytest.approx(1.0) and np.count_nonzero(x) == 1


def test_cifar_truncated(tmp_path):
    p = tmp_path / "b.bin"
    p.write_bytes(cifar_record(0, 1, 2, 3)[:-1])
    with pytest.raises(TruncatedFileError, match="3073"):
        load_cifar10_gray(p)


def test_load_dataset_layout(tmp_path):
    for split, (img, lab) in {"train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
                              "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")}.items():
        ip, lp = write_idx(tmp_path, [9] * 4, [2])
        ip.rename(tmp_path / img)
        lp.rename(tmp_path / lab)
    ds = load_dataset("fashion", tmp_path, "test")
    assert ds.name == "fashion-test" and len(ds) == 1
    with pytest.raises(FileNotFoundError):
        load_dataset("cifar10gray", tmp_path, "train")
    with pytest.raises(ValueError):
        load_dataset("svhn", tmp_path)


def test_one_hot_and_from_arrays():
    Y = one_hot([0, 3, 9])
    assert Y.shape == (3, 10) and (Y.sum(1) == 1).all() and Y[1, 3] == 1
    ds = from_arrays(np.ones((3, 2)) * 0.5, [0, 1, 1], num_classes=2)
    assert ds.num_classes == 2 and len(ds.subset(2)) == 2 and len(ds.subset(None)) == 3


@pytest.mark.parametrize("n,sizes", [(100, [50, 50]), (101, [50, 50, 1]), (7, [7])])
def test_batches_partition(n, sizes):
    bs = batches(n, 50, seed=3, epoch=0)
    assert [len(b) for b in bs] == sizes
    assert sorted(np.concatenate(bs).tolist()) == list(range(n))


def test_batches_deterministic():
    a = batches(200, 50, seed=1, epoch=4)
    b = batches(200, 50, seed=1, epoch=4)
    c = batches(200, 50, seed=1, epoch=5)
    assert all((x == y).all() for x, y in zip(a, b))
    assert not all((x == y).all() for x, y in zip(a, c))
    with pytest.raises(ValueError):
        batches(10, 0, 0, 0)


@pytest.mark.skipif(data_dir() is None, reason="LIFTNET_DATA_DIR not set")
def test_official_mnist_headers():
    tr = load_dataset("mnist", data_dir(), "train")
    te = load_dataset("mnist", data_dir(), "test")
    assert (len(tr), tr.input_dim, tr.num_classes) == (60000, 784, 10)
    assert len(te) == 10000
    assert tr.X.min() >= 0 and tr.X.max() <= 1
    assert (tr.Y.sum(1) == 1).all()
    again = load_dataset("mnist", data_dir(), "test")
    np.testing.assert_array_equal(te.X, again.X)
