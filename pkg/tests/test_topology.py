import pytest

from errors import TopologyError
from topology import (build_topology, connected_components, format_topology, load_topology, neighbors,
                      parse_topology, ring_topology, save_topology)


def test_dash_edge_list_builds_path():
    topo = parse_topology("A-B\nB-C\n")
    assert topo.names == ("A", "B", "C")
    assert neighbors(topo, topo.index_of("B")) == {0, 2}
    assert neighbors(topo, 0) == {1}


def test_comma_format_with_comments_and_blank_lines():
    topo = parse_topology("# network\n\nA,B\n  B , C \n# end\n")
    assert topo.station_count == 3
    assert topo.links == ((0, 1), (1, 2))


def test_self_loop_rejected_with_line_number():
    with pytest.raises(TopologyError) as err:
        parse_topology("A,B\nA,A\n")
    assert err.value.line == 2
    assert "line 2" in str(err.value)


def test_malformed_line_rejected():
    with pytest.raises(TopologyError, match="line 1"):
        parse_topology("A,B,C\n")


def test_empty_file_rejected():
    with pytest.raises(TopologyError):
        parse_topology("# nothing here\n")


def test_ring_has_two_neighbors_everywhere():
    topo = parse_topology("\n".join(f"S{i},S{(i + 1) % 5}" for i in range(5)))
    assert all(len(neighbors(topo, i)) == 2 for i in range(5))


def test_ring_of_four():
    topo = ring_topology(4)
    assert all(len(neighbors(topo, i)) == 2 for i in range(4))


def test_adjacency_is_symmetric_and_deduplicated():
    topo = parse_topology("A,B\nB,A\nB,C\n")
    assert topo.links == ((0, 1), (1, 2))
    for i in range(topo.station_count):
        for j in neighbors(topo, i):
            assert i in neighbors(topo, j)
            assert i != j


def test_neighbors_out_of_range():
    with pytest.raises(TopologyError):
        neighbors(ring_topology(3), 3)


def test_build_topology_validation():
    with pytest.raises(TopologyError, match="duplicate"):
        build_topology(["A", "A"], [])
    with pytest.raises(TopologyError, match="out of range"):
        build_topology(["A", "B"], [(0, 2)])
    with pytest.raises(TopologyError, match="self-loop"):
        build_topology(["A", "B"], [(1, 1)])


def test_disconnected_network_is_allowed(caplog):
    topo = build_topology(["A", "B", "C", "D"], [(0, 1), (2, 3)])
    assert connected_components(topo) == [[0, 1], [2, 3]]
    assert "disconnected" in caplog.text


def test_save_and_reload_is_identical(tmp_path):
    topo = parse_topology("A,B\nB,C\nC,A\nC,D\n")
    path = save_topology(topo, tmp_path / "net.txt")
    again = load_topology(path)
    assert again == topo
    assert format_topology(again) == format_topology(topo)


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_topology(tmp_path / "absent.txt")


def test_incident_links():
    topo = parse_topology("A,B\nB,C\nC,A\n")
    assert topo.incident_links(0) == [0, 2]


def test_shipped_corridor_is_connected():
    from conftest import CORRIDOR

    topo = load_topology(CORRIDOR)
    assert topo.station_count == 10
    assert len(connected_components(topo)) == 1


def test_components_partition_stations_and_respect_links(rng):
    from conftest import random_topology

    for _ in range(50):
        topo = random_topology(rng, int(rng.integers(1, 9)))
        components = connected_components(topo)
        assert sorted(i for c in components for i in c) == list(range(topo.station_count))
        label = {i: k for k, c in enumerate(components) for i in c}
        assert all(label[a] == label[b] for a, b in topo.links)
        assert [c[0] for c in components] == sorted(c[0] for c in components)
