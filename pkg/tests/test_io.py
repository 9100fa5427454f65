import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ising_gof.io import (
    GridFormatError,
    detect_format,
    parse_csv_grid,
    parse_text_grid,
    read_grid,
    write_grid,
)

grids = arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(0, 1))


def test_detect_format():
    assert detect_format("a/b.csv") == "csv"
    assert detect_format("mask.PGM") == "pgm"
    assert detect_format("grid.txt") == "text"
    assert detect_format("grid") == "text"


def test_text_grid_with_comments_and_spaces():
    text = "# figure\n0 1 0\n\n1 1 0  # row two\n"
    assert parse_text_grid(text).tolist() == [[0, 1, 0], [1, 1, 0]]


@pytest.mark.parametrize("text, line, msg", [
    ("010\n012\n", 2, "unexpected character"),
    ("010\n01\n", 2, "expected 3"),
    ("# nothing\n\n", None, "no grid rows"),
    ("01\n\n\n0a\n", 4, "unexpected"),
])
def test_text_grid_errors(text, line, msg):
    with pytest.raises(GridFormatError, match=msg) as info:
        parse_text_grid(text)
    assert info.value.line == line


def test_csv_grid_errors():
    assert parse_csv_grid("0,1\n1,1\n").tolist() == [[0, 1], [1, 1]]
    with pytest.raises(GridFormatError) as info:
        parse_csv_grid("0,1\n1,2\n")
    assert info.value.line == 2
    with pytest.raises(GridFormatError, match="expected 2"):
        parse_csv_grid("0,1\n1\n")
    with pytest.raises(GridFormatError):
        parse_csv_grid("")


@settings(max_examples=25, deadline=None)
@given(grids, st.sampled_from(["grid.txt", "grid.csv", "grid.pgm", "ascii.pgm"]))
def test_round_trip(tmp_path_factory, grid, name):
    path = tmp_path_factory.mktemp("io") / name
    write_grid(path, grid, ascii_pgm=name.startswith("ascii"))
    back = read_grid(path)
    assert back.dtype == np.uint8
    assert back.tobytes() == grid.tobytes() and back.shape == grid.shape


def test_pgm_threshold(tmp_path):
    path = tmp_path / "grey.pgm"
    path.write_text("P2\n3 1\n255\n10 128 200\n")
    assert read_grid(path).tolist() == [[0, 1, 1]]
    assert read_grid(path, threshold=150).tolist() == [[0, 0, 1]]
    assert read_grid(path, threshold=11).tolist() == [[0, 1, 1]]


def test_pgm_rejects_other_images(tmp_path):
    bad = tmp_path / "not.pgm"
    bad.write_text("hello")
    with pytest.raises(GridFormatError):
        read_grid(bad)
    colour = tmp_path / "rgb.ppm"
    colour.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(GridFormatError, match="greyscale"):
        read_grid(colour, "pgm")


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        read_grid(tmp_path / "x.txt", "json")
    with pytest.raises(ValueError):
        write_grid(tmp_path / "x.txt", np.zeros((2, 2)), "json")
