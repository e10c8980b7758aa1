import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from atomtomo import io
from atomtomo.forward import DetectorGeometry, Sinogram, project_config
from atomtomo.grid_recon import GridImage, GridSpec

unit = st.floats(0, 1, allow_nan=False)
points = arrays(np.float64, st.tuples(st.integers(0, 12), st.just(2)), elements=unit)
SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])


@SETTINGS
@given(points)
def test_atom_round_trip(tmp_path, x):
    path = tmp_path / "atoms.txt"
    io.write_atoms(path, x)
    np.testing.assert_array_equal(io.read_atoms(path), x.reshape(-1, 2))


def test_atom_file_layout(tmp_path):
    path = tmp_path / "a.txt"
    io.write_atoms(path, [(0.1, 0.2)])
    lines = path.read_text().splitlines()
    assert lines[0] == "# n: 1"
    assert lines[1] == "0.10000000000000001 0.20000000000000001"


def test_atom_file_without_header(tmp_path):
    path = tmp_path / "a.txt"
    path.write_text("0.5 0.25\n\n# comment\n0.75 0.125\n")
    np.testing.assert_array_equal(io.read_atoms(path), [[0.5, 0.25], [0.75, 0.125]])


@pytest.mark.parametrize("text,line", [
    ("0.1 0.2\n0.3 zebra\n", 2),
    ("# n: 1\n0.1 0.2 0.3\n", 2),
    ("0.1 nan\n", 1),
    ("# n: x\n", 1),
])
def test_atom_parse_errors_name_the_line(tmp_path, text, line):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(io.FormatError, match=rf"bad\.txt:{line}:"):
        io.read_atoms(path)


def test_atom_count_header_checked(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# n: 3\n0.1 0.2\n")
    with pytest.raises(io.FormatError, match="declares 3"):
        io.read_atoms(path)


@SETTINGS
@given(st.lists(st.tuples(unit, unit), max_size=5),
       st.sampled_from([(0.0, 90.0), (0.0, 45.0, 90.0), (12.5,)]))
def test_sinogram_round_trip(tmp_path, pts, angles):
    g = DetectorGeometry(angles)
    y = project_config(np.array(pts).reshape(-1, 2), g)
    path = tmp_path / "s.txt"
    io.write_sinogram(path, y)
    back = io.read_sinogram(path)
    assert back.geometry == g
    np.testing.assert_array_equal(back.values, y.values)


def test_sinogram_header_fields(tmp_path):
    path = tmp_path / "s.txt"
    io.write_sinogram(path, Sinogram(np.zeros((2, 142)), DetectorGeometry((0.0, 90.0))))
    head = path.read_text().splitlines()[0]
    assert head.startswith("# angles_deg: 0,90 ; d: 0.01 ; sigma: 0.01 ; bins: 142 ; offset: ")


@pytest.mark.parametrize("mutate,match", [
    (lambda ls: ["0 1 2"] + ls[1:], r":1: missing"),
    (lambda ls: [ls[0].replace("bins", "bims")] + ls[1:], r":1: header fields"),
    (lambda ls: ls[:2] + [ls[2] + " 7"], r":3: expected 142 bins"),
    (lambda ls: ls[:2], r"expected 2 rows"),
    (lambda ls: [ls[0], ls[1].replace("0", "x", 1), ls[2]], r":2: cannot parse"),
])
def test_sinogram_parse_errors(tmp_path, mutate, match):
    path = tmp_path / "s.txt"
    io.write_sinogram(path, project_config([(0.4, 0.6)], DetectorGeometry((0.0, 90.0))))
    path.write_text("\n".join(mutate(path.read_text().splitlines())) + "\n")
    with pytest.raises(io.FormatError, match=match):
        io.read_sinogram(path)


@SETTINGS
@given(st.integers(1, 6).flatmap(lambda n: arrays(np.float64, n * n, elements=st.floats(0, 1e3))))
def test_grid_image_round_trip(tmp_path, w):
    n = int(round(np.sqrt(w.size)))
    image = GridImage(w, GridSpec(n))
    path = tmp_path / "g.txt"
    io.write_grid_image(path, image)
    back = io.read_grid_image(path)
    assert back.grid == image.grid
    np.testing.assert_array_equal(back.weights, image.weights)


def test_grid_image_errors(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("# grid: 2\n1 2\n3\n")
    with pytest.raises(io.FormatError, match=r"g\.txt:3:"):
        io.read_grid_image(path)
    path.write_text("# grid: two\n")
    with pytest.raises(io.FormatError, match=r":1: bad grid size"):
        io.read_grid_image(path)


def test_read_result_dispatches(tmp_path):
    a, g = tmp_path / "a.txt", tmp_path / "g.txt"
    io.write_atoms(a, [(0.5, 0.5)])
    io.write_grid_image(g, GridImage(np.ones(4), GridSpec(2)))
    assert isinstance(io.read_result(g), GridImage)
    np.testing.assert_array_equal(io.read_result(a), [[0.5, 0.5]])


def test_sa_log_layout():
    text = io.sa_log_text([(1, 1.0, 2.5, True, False), (2, 1.02, 2.25, False, True)])
    assert text.splitlines() == [
        "iter,beta,discrepancy,accepted_add,accepted_move",
        "1,1,2.5,1,0",
        "2,1.02,2.25,0,1",
    ]
