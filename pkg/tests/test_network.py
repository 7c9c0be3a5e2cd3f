import pytest

from tripweaver.domain import Link, ScenarioError, Zone
from tripweaver.network import (
    RouteError,
    build_network,
    enumerate_routes,
    free_flow_time,
    is_valid_route,
    shortest_free_flow,
)

# link id -> (from, to, free-flow minutes, capacity vph) of the bundled scenario
TABLE = {
    1: (1, 2, 20, 80), 2: (1, 4, 20, 80), 3: (2, 3, 40, 80), 4: (4, 3, 40, 80),
    5: (2, 1, 20, 80), 6: (4, 1, 20, 80), 7: (3, 2, 40, 80), 8: (3, 4, 40, 80),
}


def brute_force_routes(network, origin, dest, max_links):
    """All link sequences up to max_links that are contiguous and visit no zone twice."""
    out = []
    frontier = [[lid] for lid in network.links]
    for _ in range(max_links):
        nxt = []
        for route in frontier:
            zones = [network.links[route[0]].origin_zone] + [network.links[l].dest_zone for l in route]
            if len(set(zones)) != len(zones):
                continue
            if zones[0] == origin and zones[-1] == dest:
                out.append(route)
            nxt += [route + [l] for l in network.links if network.links[l].origin_zone == zones[-1]]
        frontier = nxt
    return sorted((r for r in out if network.links[r[0]].origin_zone == origin),
                  key=lambda r: (sum(network.links[l].free_flow_minutes for l in r), r))


def test_table_reproduced(network):
    got = {lid: (lk.origin_zone, lk.dest_zone, lk.free_flow_minutes, lk.capacity) for lid, lk in network.links.items()}
    assert got == TABLE


def test_adjacency(network):
    assert list(network.adjacency[1]) == [1, 2]
    assert list(network.adjacency[3]) == [7, 8]
    assert sorted(lid for links in network.adjacency.values() for lid in links) == sorted(network.links)
    assert all(len(network.adjacency[z]) >= 1 for z in network.zones)


def test_routes_home_to_work(network):
    assert enumerate_routes(network, 1, 3, 4) == [[1, 3], [2, 4]]
    assert free_flow_time(network, [1, 3]) == free_flow_time(network, [2, 4]) == 60


def test_routes_home_to_school(network):
    assert enumerate_routes(network, 1, 2, 1) == [[1]]
    assert enumerate_routes(network, 1, 2, 3) == [[1], [2, 4, 7]]


@pytest.mark.parametrize("o,d", [(o, d) for o in range(1, 5) for d in range(1, 5) if o != d])
@pytest.mark.parametrize("max_links", [1, 2, 3, 4])
def test_routes_match_brute_force(network, o, d, max_links):
    assert enumerate_routes(network, o, d, max_links) == brute_force_routes(network, o, d, max_links)


def test_same_zone_route(network):
    assert enumerate_routes(network, 2, 2) == [[]]


def test_free_flow_time(network):
    assert free_flow_time(network, []) == 0
    assert free_flow_time(network, [2, 4, 7]) == 100


def test_discontiguous_route_message(network):
    with pytest.raises(RouteError, match="link 1 ends at zone 2, link 4 starts at zone 4"):
        free_flow_time(network, [1, 4])


def test_route_validity(network):
    assert is_valid_route(network, [1, 3], 1, 3)
    assert not is_valid_route(network, [1, 3], 1, 2)
    assert not is_valid_route(network, [1, 4], 1, 3)
    assert shortest_free_flow(network, 3, 1) == 60


def test_empty_network_is_valid():
    net = build_network([Zone(1, "residential"), Zone(2, "school")], [])
    assert net.links == {}
    assert enumerate_routes(net, 1, 2) == []


def test_dangling_zone():
    with pytest.raises(ScenarioError, match="unknown zone 9"):
        build_network([Zone(1, "residential")], [Link(1, 1, 9, 10, 80)])


def test_duplicate_link():
    zones = [Zone(1, "residential"), Zone(2, "school")]
    with pytest.raises(ScenarioError, match="duplicate"):
        build_network(zones, [Link(1, 1, 2, 10, 80), Link(1, 2, 1, 10, 80)])
