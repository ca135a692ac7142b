import numpy as np
import pytest

from cyclesync import io
from cyclesync.directions import DirectionMeasurements
from cyclesync.graph import build_view_graph
from cyclesync.synthetic import SyntheticScenario, sample_rotation_scenario, sample_scenario


@pytest.fixture
def scenario():
    return sample_scenario(SyntheticScenario(n=15, p=0.5, q=0.2, sigma=0.1, seed=3))


def test_graph_round_trip(tmp_path, scenario):
    graph = scenario[0]
    io.write_graph(tmp_path / "g.txt", graph)
    back = io.read_graph(tmp_path / "g.txt")
    assert back.n == graph.n and np.array_equal(back.edges, graph.edges)


def test_directions_round_trip_exact(tmp_path, scenario):
    graph, _, dirs = scenario
    io.write_directions(tmp_path / "d.txt", graph, dirs)
    back = io.read_directions(tmp_path / "d.txt", graph)
    assert np.allclose(back.vectors, dirs.vectors, atol=1e-15)


def test_reversed_lines_are_reoriented(tmp_path):
    graph = build_view_graph(3, [(0, 1), (1, 2), (0, 2)])
    (tmp_path / "d.txt").write_text("# comment\n1 0 0 0 2\n\n1 2 1 0 0\n0 2 0 1 0\n")
    dirs = io.read_directions(tmp_path / "d.txt", graph)
    assert np.allclose(dirs.vectors[graph.edge_id(0, 1)], [0, 0, -1])
    rots = sample_rotation_scenario(6, 1.0, 0.0, 0.0, 0)
    g, _, R = rots
    lines = [f"{j} {i} " + " ".join(repr(float(x)) for x in M.T.ravel()) for (i, j), M in zip(g.edges, R.matrices)]
    (tmp_path / "r.txt").write_text("\n".join(lines) + "\n")
    assert np.allclose(io.read_rotations(tmp_path / "r.txt", g).matrices, R.matrices)


@pytest.mark.parametrize("text, message", [
    ("0 1 1 0\n", ":1: expected 'i j' and 3"),
    ("0 1 1 0 x\n", ":1: expected numbers"),
    ("0 1 1 0 0\n0 1 1 0 0\n", ":2: duplicate"),
    ("0 1 1 0 0\n0 5 1 0 0\n", ":2: edge (0, 5)"),
    ("0 1 1 0 0\n", "no measurement for edge (0, 2)"),
    ("0 1 0 0 0\n0 2 1 0 0\n", "zero direction"),
    ("0 1 nan 0 0\n", ":1: non-finite"),
])
def test_malformed_directions(tmp_path, text, message):
    graph = build_view_graph(3, [(0, 1), (0, 2)])
    path = tmp_path / "d.txt"
    path.write_text(text)
    with pytest.raises(io.FormatError) as err:
        io.read_directions(path, graph)
    assert message in str(err.value)


@pytest.mark.parametrize("text, message", [
    ("", "empty"),
    ("3\n", ":1: header"),
    ("3 2\n0 1\n", "declares 2 edges, found 1"),
    ("3 1\n0 1 2\n", ":2: expected 'i j'"),
    ("3 1\n0 0\n", "self"),
])
def test_malformed_graph(tmp_path, text, message):
    path = tmp_path / "g.txt"
    path.write_text(text)
    with pytest.raises(io.FormatError, match=message):
        io.read_graph(path)


def test_node_tables(tmp_path):
    x = np.random.default_rng(0).standard_normal((4, 3))
    io.write_locations(tmp_path / "l.txt", x)
    assert np.array_equal(io.read_locations(tmp_path / "l.txt", 4), x)
    with pytest.raises(io.FormatError, match="missing node 4"):
        io.read_locations(tmp_path / "l.txt", 5)
    with pytest.raises(io.FormatError, match="out of range"):
        io.read_locations(tmp_path / "l.txt", 3)


def test_scenario_directory(tmp_path, scenario):
    graph, gt, dirs = scenario
    out = io.write_scenario(tmp_path / "scn", graph, gt, {"n": graph.n}, dirs=dirs)
    manifest = io.read_manifest(out)
    assert manifest["files"]["directions"] == io.DIRECTIONS_FILE
    assert np.array_equal(io.read_labels(out / io.LABELS_FILE, graph), gt.corrupted)
    assert np.array_equal(io.read_locations(out / io.LOCATIONS_FILE, graph.n), gt.locations)


def test_estimate_round_trip(tmp_path, scenario):
    graph, gt, _ = scenario
    io.write_estimate(tmp_path / "e.json", "locations", graph, locations=gt.locations,
                      edges={"w": np.ones(graph.m)}, log=[{"t": 0}], config={"loss": "welsch"})
    doc = io.read_estimate(tmp_path / "e.json")
    assert np.array_equal(doc["locations"], gt.locations)
    assert doc["edges"]["w"] == [1.0] * graph.m
    with pytest.raises(ValueError):
        io.write_estimate(tmp_path / "x.json", "poses", graph)
    (tmp_path / "bad.json").write_text('{"format": "cyclesync-estimate", "version": 9}')
    with pytest.raises(io.FormatError, match="version"):
        io.read_estimate(tmp_path / "bad.json")
