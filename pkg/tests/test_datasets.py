# -*- encoding: utf-8 -*-

import numpy as np
import pytest
from PIL import Image
from pytest import approx

from gflbs.datasets import (
    DatasetError,
    EmptySequenceError,
    GeometryMismatchError,
    ManifestError,
    UnreadableFrameError,
    detect_layout,
    flat,
    frame_sequence,
    generic,
    ground_truth,
    li,
    load_ground_truth,
    load_masks,
    load_sequence,
    read_levels,
    read_manifest,
    read_trace,
    split_training,
    to_levels,
    to_observation,
    wallflower,
    write_results,
    write_snapshot,
    write_trace,
)
from gflbs.problems import observation
from gflbs.results import decomposition, trace_record
from gflbs.solvers import solver_state


def save(path, levels):
    Image.fromarray(np.asarray(levels)).save(path)


def test_load_zero_frames(tmp_path):
    for k in range(4):
        save(tmp_path / "{:02d}.pgm".format(k), np.zeros((4, 4), dtype=np.uint8))
    seq = load_sequence(tmp_path)
    assert len(seq) == 4 and seq.names == ["00", "01", "02", "03"]
    d = to_observation(seq)
    assert d.shape == (16, 4)
    assert not d.matrix.any()


def test_load_levels(tmp_path):
    save(tmp_path / "white.png", np.full((2, 3), 255, dtype=np.uint8))
    rgb = np.zeros((2, 3, 3), dtype=np.uint8)
    rgb[..., 0] = 255
    save(tmp_path / "red.png", rgb)
    seq = load_sequence(tmp_path)
    assert seq.names == ["red", "white"]
    assert seq.width == 3 and seq.height == 2
    assert seq.frames[0] == approx(np.full((2, 3), 0.299))
    assert seq.frames[1] == approx(np.ones((2, 3)))


def test_read_sixteen_bit(tmp_path):
    save(tmp_path / "deep.png", np.full((2, 2), 65535, dtype=np.uint16))
    assert read_levels(tmp_path / "deep.png") == approx(np.full((2, 2), 255.0))


def test_load_downscaled(tmp_path):
    a = np.arange(16, dtype=np.uint8).reshape(4, 4) * 10
    save(tmp_path / "a.png", a)
    seq = load_sequence(tmp_path, downscale=2)
    expected = np.array([[25.0, 45.0], [105.0, 125.0]]) / 255.0
    assert seq.frames[0] == approx(expected)
    with pytest.raises(ValueError):
        load_sequence(tmp_path, downscale=0)


def test_load_threaded(tmp_path):
    rng = np.random.default_rng(0)
    for k in range(6):
        save(tmp_path / "{}.png".format(k), rng.integers(0, 256, (5, 4), np.uint8))
    serial, threaded = load_sequence(tmp_path), load_sequence(tmp_path, workers=3)
    assert threaded.names == serial.names
    for a, b in zip(serial.frames, threaded.frames):
        assert np.array_equal(a, b)


def test_load_errors(tmp_path):
    with pytest.raises(EmptySequenceError):
        load_sequence(tmp_path / "missing")
    with pytest.raises(EmptySequenceError):
        load_sequence(tmp_path)

    (tmp_path / "notes.txt").write_text("not a frame")
    with pytest.raises(EmptySequenceError):
        load_sequence(tmp_path)

    (tmp_path / "broken.png").write_bytes(b"not an image")
    with pytest.raises(UnreadableFrameError):
        load_sequence(tmp_path)
    (tmp_path / "broken.png").unlink()

    save(tmp_path / "a.png", np.zeros((4, 4), dtype=np.uint8))
    save(tmp_path / "b.png", np.zeros((4, 5), dtype=np.uint8))
    with pytest.raises(GeometryMismatchError, match="b.png"):
        load_sequence(tmp_path)

    # All dataset errors are I/O errors.
    assert issubclass(GeometryMismatchError, DatasetError)
    assert issubclass(DatasetError, OSError)


def test_row_major_observation():
    seq = frame_sequence([np.array([[0.1, 0.2], [0.3, 0.4]])], ["a"])
    d = to_observation(seq)
    assert d.matrix[:, 0] == approx([0.1, 0.2, 0.3, 0.4])
    assert d.frame(0) == approx(seq.frames[0])
    assert d.names == ["a"]


def test_frame_sequence_errors():
    with pytest.raises(ValueError):
        frame_sequence([])
    with pytest.raises(ValueError):
        frame_sequence([np.zeros((2, 2)), np.zeros((2, 3))])
    with pytest.raises(ValueError):
        frame_sequence([np.zeros((2, 2))], ["a", "b"])
    seq = frame_sequence([np.zeros((2, 2)), np.ones((2, 2))])
    assert seq.names == ["0", "1"]
    assert seq.subset([1]).names == ["1"]


def test_ground_truth_levels():
    truth = ground_truth.from_levels({"x": [[0, 50, 100], [170, 200, 255]]})
    assert "x" in truth and len(truth) == 1
    assert truth.mask("x").tolist() == [[False, False, False], [False, True, True]]
    assert truth.ignore("x").tolist() == [[False, False, True], [True, False, False]]


def test_to_levels():
    assert to_levels([0.0, 0.5, 1.0, -0.2, 1.7]).tolist() == [0, 128, 255, 0, 255]


def test_write_results(tmp_path):
    geometry = observation(np.zeros((6, 2)), 3, 2, ["a", "b"])
    foreground = np.zeros((6, 2))
    foreground[4, 1] = -0.3
    trace = [trace_record(k + 1, 1.0, 1.0, 0.1, 1.0, 1, 0) for k in range(3)]
    result = decomposition(np.full((6, 2), 0.5), foreground, np.zeros((6, 2)), trace)
    write_results(result, geometry, tmp_path)

    level = read_levels(tmp_path / "background" / "a.png")
    assert level.shape == (2, 3)
    assert np.all(level == 128)
    masks = load_masks(tmp_path / "masks")
    assert sorted(masks) == ["a", "b"]
    assert not masks["a"].any()
    assert masks["b"].tolist() == [[False, False, False], [False, True, False]]
    assert len(read_trace(tmp_path / "trace.json")) == 3


def test_write_results_mask_floor(tmp_path):
    geometry = observation(np.zeros((2, 1)), 2, 1)
    result = decomposition(
        np.zeros((2, 1)), np.array([[0.05], [0.5]]), np.zeros((2, 1))
    )
    write_results(result, geometry, tmp_path, mask_eps=0.1)
    assert load_masks(tmp_path / "masks")["0"].tolist() == [[False, True]]
    with pytest.raises(ValueError):
        write_results(result, observation(np.zeros((4, 1)), 2, 2), tmp_path)


def test_trace_file(tmp_path):
    records = [trace_record(1, 2.5, 3.0, 0.25, 1.5, 2, 7)]
    write_trace(records, tmp_path / "trace.json")
    assert (tmp_path / "trace.json").read_text().endswith("\n")
    assert read_trace(tmp_path / "trace.json") == records
    (tmp_path / "bad.json").write_text('[{"iteration": 1}]')
    with pytest.raises(DatasetError):
        read_trace(tmp_path / "bad.json")


def test_load_masks_empty(tmp_path):
    with pytest.raises(EmptySequenceError):
        load_masks(tmp_path)


def test_generic_layout(tmp_path):
    (tmp_path / "frames").mkdir()
    (tmp_path / "gt").mkdir()
    for name in ("f0", "f1"):
        save(tmp_path / "frames" / (name + ".png"), np.zeros((2, 2), np.uint8))
    save(tmp_path / "gt" / "f1.png", np.array([[0, 255], [120, 0]], np.uint8))
    assert isinstance(detect_layout(tmp_path), generic)
    assert len(generic().load_sequence(tmp_path)) == 2
    truth = load_ground_truth(tmp_path)
    assert truth.names == ["f1"]
    assert truth.mask("f1").tolist() == [[False, True], [False, False]]
    assert truth.ignore("f1").tolist() == [[False, False], [True, False]]


def test_wallflower_layout(tmp_path):
    for k in range(3):
        save(tmp_path / "b{:05d}.bmp".format(k), np.zeros((2, 2), np.uint8))
    save(tmp_path / "hand_segmented_00002.bmp", np.full((2, 2), 255, np.uint8))
    found = detect_layout(tmp_path)
    assert isinstance(found, wallflower)
    seq = found.load_sequence(tmp_path)
    assert seq.names == ["b00000", "b00001", "b00002"]
    truth = load_ground_truth(tmp_path)
    assert truth.names == ["b00002"]
    assert truth.mask("b00002").all()


def test_li_layout(tmp_path):
    save(tmp_path / "img1.png", np.zeros((2, 2), np.uint8))
    save(tmp_path / "img2.png", np.zeros((2, 2), np.uint8))
    save(tmp_path / "gt_new_img2.png", np.full((2, 2), 255, np.uint8))
    found = detect_layout(tmp_path)
    assert isinstance(found, li)
    assert found.load_sequence(tmp_path).names == ["img1", "img2"]
    assert load_ground_truth(tmp_path, found).names == ["img2"]


def test_flat_layout(tmp_path):
    save(tmp_path / "x.png", np.zeros((2, 2), np.uint8))
    assert isinstance(detect_layout(tmp_path), flat)
    assert isinstance(detect_layout(tmp_path / "missing"), flat)
    assert load_ground_truth(tmp_path, flat()).names == ["x"]


def test_manifest(tmp_path):
    path = tmp_path / "training.txt"
    path.write_text("# background only\nf0.png\n\n  f2.png \n")
    assert read_manifest(path) == ["f0.png", "f2.png"]

    names = ["f0", "f1", "f2", "f3"]
    seq = frame_sequence([np.full((1, 1), k) for k in range(4)], names)
    training, mixed = split_training(seq, read_manifest(path))
    assert training.names == ["f0", "f2"]
    assert mixed.names == ["f1", "f3"]

    with pytest.raises(ManifestError, match="f9"):
        split_training(seq, ["f9"])
    with pytest.raises(ManifestError):
        split_training(seq, seq.names)
    with pytest.raises(ManifestError):
        read_manifest(tmp_path / "missing.txt")
    (tmp_path / "empty.txt").write_text("# nothing\n")
    with pytest.raises(ManifestError):
        read_manifest(tmp_path / "empty.txt")


def test_write_results_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    (tmp_path / "in").mkdir()
    for k in range(3):
        levels = rng.integers(0, 256, (5, 7), np.uint8)
        save(tmp_path / "in" / "{}.png".format(k), levels)
    seq = load_sequence(tmp_path / "in")
    d = to_observation(seq)
    result = decomposition(d.matrix, np.zeros(d.shape), np.zeros(d.shape))
    write_results(result, d, tmp_path / "out")

    again = load_sequence(tmp_path / "out" / "background")
    assert again.names == seq.names
    for a, b in zip(seq.frames, again.frames):
        assert np.abs(a - b).max() <= 1 / 255
    assert not any(m.any() for m in load_masks(tmp_path / "out" / "masks").values())


def test_write_snapshot(tmp_path):
    geometry = observation(np.zeros((6, 2)), 3, 2)
    state = solver_state.zeros((6, 2), 1.0)
    state.iteration = 7
    state.background[:, 1] = 1.0
    state.foreground[2, 1] = -0.5
    write_snapshot(state, geometry, 1, tmp_path)
    background = read_levels(tmp_path / "iterations" / "0007_background.png")
    assert np.all(background == 255)
    foreground = read_levels(tmp_path / "iterations" / "0007_foreground.png")
    assert foreground.tolist() == [[0, 0, 128], [0, 0, 0]]
    with pytest.raises(ValueError):
        write_snapshot(state, geometry, 2, tmp_path)
