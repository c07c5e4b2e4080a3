"""
Plaquette adjacency graph used to group flagged plaquettes into defect cores.

Connectivity lives in a networkx Graph; winding and core weights are computed
in vortex.py and only stored here as node attributes.
"""
from typing import Iterator

import networkx as nx


def _plaquette_node_id(i: int, j: int) -> tuple[int, int]:
    """Node ID of the plaquette whose lower-left corner is node (i, j)."""
    return (int(i), int(j))


# 8-connectivity offsets
_NEIGHBOR_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


class PlaquetteGraph:
    """
    Undirected graph over flagged plaquettes.

    Node attributes:
    - 'winding': integer winding number of the plaquette
    - 'weight': non-negative core weight used for centroids
    - 'center': (x, y) of the plaquette center
    - 'touches_boundary': whether a corner is a boundary node
    """

    def __init__(self):
        self._graph = nx.Graph()

    # --- Node management ---

    def add_plaquette(
        self,
        i: int,
        j: int,
        winding: int,
        weight: float,
        center: tuple[float, float],
        touches_boundary: bool = False,
    ) -> tuple[int, int]:
        """Add a flagged plaquette. Returns node ID."""
        node_id = _plaquette_node_id(i, j)
        self._graph.add_node(
            node_id,
            winding=int(winding),
            weight=float(weight),
            center=(float(center[0]), float(center[1])),
            touches_boundary=bool(touches_boundary),
        )
        return node_id

    def connect_neighbors(self) -> int:
        """Link every pair of 8-adjacent plaquettes. Returns the number of edges."""
        for i, j in list(self._graph.nodes):
            for di, dj in _NEIGHBOR_OFFSETS:
                other = _plaquette_node_id(i + di, j + dj)
                if other in self._graph:
                    self._graph.add_edge((i, j), other)
        return self._graph.number_of_edges()

    # --- Queries ---

    def __len__(self) -> int:
        return self._graph.number_of_nodes()

    def __contains__(self, node_id: tuple[int, int]) -> bool:
        return node_id in self._graph

    def attributes(self, node_id: tuple[int, int]) -> dict:
        return dict(self._graph.nodes[node_id])

    def clusters(self) -> Iterator[list[tuple[int, int]]]:
        """Connected components, each sorted, in order of their smallest plaquette."""
        components = [sorted(c) for c in nx.connected_components(self._graph)]
        yield from sorted(components)

    def cluster_charge(self, cluster: list[tuple[int, int]]) -> int:
        """Sum of plaquette windings over a cluster."""
        return sum(self._graph.nodes[n]["winding"] for n in cluster)

    def cluster_diameter(self, cluster: list[tuple[int, int]]) -> int:
        """Extent of the cluster in cells (Chebyshev distance across it, plus one)."""
        ii = [n[0] for n in cluster]
        jj = [n[1] for n in cluster]
        return max(max(ii) - min(ii), max(jj) - min(jj)) + 1

    def touches_boundary(self, cluster: list[tuple[int, int]]) -> bool:
        return any(self._graph.nodes[n]["touches_boundary"] for n in cluster)
