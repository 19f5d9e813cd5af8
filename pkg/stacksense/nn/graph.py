import heapq
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Tuple

from stacksense.exceptions import CycleDetected


@dataclass(frozen=True)
class NetGraph:
    """
    Directed graph of processing units.

    Attributes:
        node_count: nodes are numbered ``0 .. node_count - 1``
        edges: ordered pairs ``(i, j)``, information flows from ``i`` to ``j``
    """

    node_count: int
    edges: FrozenSet[Tuple[int, int]]

    def __post_init__(self) -> None:
        if self.node_count < 0:
            raise ValueError("node_count can't be negative")
        for i, j in self.edges:
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise ValueError(f"edge ({i}, {j}) outside 0..{self.node_count - 1}")

    def successors(self) -> Dict[int, List[int]]:
        out: Dict[int, List[int]] = {n: [] for n in range(self.node_count)}
        for i, j in sorted(self.edges):
            out[i].append(j)
        return out


def _find_cycle(graph: NetGraph, candidates: List[int]) -> List[int]:
    remaining = set(candidates)
    # every remaining node has a predecessor among the remaining ones, so walking
    # predecessors backwards from any of them must revisit a node
    preds: Dict[int, int] = {}
    for i, j in sorted(graph.edges):
        if i in remaining and j in remaining and j not in preds:
            preds[j] = i
    node = min(remaining)
    seen: Dict[int, int] = {}
    path: List[int] = []
    while node not in seen:
        seen[node] = len(path)
        path.append(node)
        node = preds[node]
    cycle = path[seen[node]:]
    cycle.reverse()
    return cycle + [cycle[0]]


def validate_feedforward(graph: NetGraph) -> List[int]:
    """
    Numbers the nodes so that every edge goes from a lower to a higher number.

    Returns:
        the nodes in their new order: ``ordering[k]`` is the node numbered ``k``.
        Among the nodes available at each step the lowest one is taken first, so
        an already sorted graph keeps its numbering.

    Raises:
        CycleDetected: the graph has a directed cycle, reported as a witness
    """
    indegree = [0] * graph.node_count
    succ = graph.successors()
    for _, j in graph.edges:
        indegree[j] += 1
    ready = [n for n in range(graph.node_count) if indegree[n] == 0]
    heapq.heapify(ready)
    ordering: List[int] = []
    while ready:
        node = heapq.heappop(ready)
        ordering.append(node)
        for nxt in succ[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(ready, nxt)
    if len(ordering) != graph.node_count:
        left = [n for n in range(graph.node_count) if indegree[n] > 0]
        raise CycleDetected(_find_cycle(graph, left))
    return ordering
