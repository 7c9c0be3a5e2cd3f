"""Network construction and route enumeration over capacitated links."""

from __future__ import annotations

from collections.abc import Iterable, Sequence

from .domain import ZONE_KINDS, Link, Network, ScenarioError, Zone


class RouteError(ValueError):
    """A route whose links do not chain head-to-tail."""


def build_network(zones: Iterable[Zone], links: Iterable[Link]) -> Network:
    zone_map: dict[int, Zone] = {}
    for i, z in enumerate(zones):
        if z.id in zone_map:
            raise ScenarioError(f"duplicate zone id {z.id}", f"zones[{i}].id")
        if z.id <= 0:
            raise ScenarioError(f"zone id must be positive, got {z.id}", f"zones[{i}].id")
        if z.kind not in ZONE_KINDS:
            raise ScenarioError(f"unknown zone kind {z.kind!r}", f"zones[{i}].kind")
        zone_map[z.id] = z

    link_map: dict[int, Link] = {}
    adjacency: dict[int, list[int]] = {zid: [] for zid in zone_map}
    for i, lk in enumerate(links):
        where = f"links[{i}]"
        if lk.id in link_map:
            raise ScenarioError(f"duplicate link id {lk.id}", f"{where}.id")
        if lk.id <= 0:
            raise ScenarioError(f"link id must be positive, got {lk.id}", f"{where}.id")
        for key, zid in (("from", lk.origin_zone), ("to", lk.dest_zone)):
            if zid not in zone_map:
                raise ScenarioError(f"link {lk.id} references unknown zone {zid}", f"{where}.{key}")
        if lk.origin_zone == lk.dest_zone:
            raise ScenarioError(f"link {lk.id} has origin equal to destination", f"{where}.to")
        if not lk.free_flow_minutes > 0:
            raise ScenarioError(f"link {lk.id} free-flow time must be positive", f"{where}.free_flow_minutes")
        if not lk.capacity > 0:
            raise ScenarioError(f"link {lk.id} capacity must be positive", f"{where}.capacity_vph")
        link_map[lk.id] = lk
        adjacency[lk.origin_zone].append(lk.id)

    return Network(
        zones=zone_map,
        links=link_map,
        adjacency={zid: tuple(sorted(ids)) for zid, ids in adjacency.items()},
    )


def free_flow_time(network: Network, route: Sequence[int]) -> float:
    """Sum of link free-flow minutes; raises RouteError if the links don't chain."""
    total = 0.0
    prev: Link | None = None
    for lid in route:
        if lid not in network.links:
            raise RouteError(f"unknown link {lid}")
        link = network.links[lid]
        if prev is not None and prev.dest_zone != link.origin_zone:
            raise RouteError(
                f"route {list(route)} discontiguous: link {prev.id} ends at zone {prev.dest_zone}, "
                f"link {link.id} starts at zone {link.origin_zone}"
            )
        total += link.free_flow_minutes
        prev = link
    return total


def route_endpoints(network: Network, route: Sequence[int]) -> tuple[int, int]:
    free_flow_time(network, route)
    return network.links[route[0]].origin_zone, network.links[route[-1]].dest_zone


def is_valid_route(network: Network, route: Sequence[int], origin: int, dest: int) -> bool:
    if not route:
        return origin == dest
    try:
        return route_endpoints(network, route) == (origin, dest)
    except RouteError:
        return False


def enumerate_routes(network: Network, origin: int, dest: int, max_links: int = 4) -> list[list[int]]:
    """All simple directed paths origin->dest with at most ``max_links`` links.

    Sorted by free-flow time, then lexicographically by link ids.
    """
    if origin == dest:
        return [[]]
    found: list[list[int]] = []

    def walk(zone: int, visited: set[int], path: list[int]) -> None:
        if len(path) >= max_links:
            return
        for lid in network.adjacency.get(zone, ()):
            nxt = network.links[lid].dest_zone
            if nxt in visited:
                continue
            path.append(lid)
            if nxt == dest:
                found.append(list(path))
            else:
                visited.add(nxt)
                walk(nxt, visited, path)
                visited.discard(nxt)
            path.pop()

    walk(origin, {origin}, [])
    found.sort(key=lambda r: (free_flow_time(network, r), r))
    return found


def shortest_free_flow(network: Network, origin: int, dest: int, max_links: int = 4) -> float | None:
    routes = enumerate_routes(network, origin, dest, max_links)
    return free_flow_time(network, routes[0]) if routes else None
