"""Edge-branching constraints shared by pricing, construction and the tree.

Edges are undirected pairs of node indices with the depot as node 0 (the
depot's outbound and return uses are collapsed onto the same edge, so a
single-shelter route uses its depot edge twice). Forbidding a depot edge
bans the shelter from the first and last positions; forcing one requires
the shelter, if visited, to be first or last. Forcing a shelter-shelter
edge requires the two shelters to be covisited consecutively.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def edge(i: int, j: int) -> tuple[int, int]:
    if i == j:
        raise ValueError("self-loop edge")
    return (i, j) if i < j else (j, i)


def route_edges(nodes):
    """Undirected edges used by a depot-anchored route, with multiplicity."""
    yield edge(0, nodes[0])
    for a, b in zip(nodes, nodes[1:]):
        yield edge(a, b)
    yield edge(0, nodes[-1])


@dataclass(frozen=True)
class BranchingConstraints:
    forbidden: frozenset = frozenset()
    forced: frozenset = frozenset()

    def __post_init__(self):
        overlap = self.forbidden & self.forced
        if overlap:
            raise ValueError(f"edges both forbidden and forced: {sorted(overlap)}")

    @property
    def empty(self) -> bool:
        return not self.forbidden and not self.forced

    def forbid(self, e) -> "BranchingConstraints":
        return BranchingConstraints(self.forbidden | {e}, self.forced)

    def force(self, e) -> "BranchingConstraints":
        return BranchingConstraints(self.forbidden, self.forced | {e})

    def is_forbidden(self, i: int, j: int) -> bool:
        return edge(i, j) in self.forbidden

    def forced_partners(self, n: int) -> dict[int, list[int]]:
        partners: dict[int, list[int]] = {v: [] for v in range(1, n + 1)}
        for i, j in self.forced:
            if i == 0:
                continue
            partners[i].append(j)
            partners[j].append(i)
        return partners

    def forced_depot(self) -> set[int]:
        return {j for i, j in self.forced if i == 0}

    def infeasibility_reason(self, n: int) -> str | None:
        """Structural impossibility of the forced/forbidden sets, if any."""
        partners = self.forced_partners(n)
        depot_side = self.forced_depot()
        for v, ps in partners.items():
            if len(ps) > 2:
                return f"shelter {v} has {len(ps)} forced neighbors"
            if len(ps) == 2 and v in depot_side:
                return f"shelter {v} forced interior and forced onto the depot edge"
        # A cycle among forced shelter-shelter edges cannot contain the depot.
        color: dict[int, int] = {}
        for start in partners:
            if start in color or not partners[start]:
                continue
            stack = [(start, 0)]
            color[start] = 1
            while stack:
                v, parent = stack.pop()
                for w in partners[v]:
                    if w == parent:
                        continue
                    if w in color:
                        return "forced edges form a cycle avoiding the depot"
                    color[w] = 1
                    stack.append((w, v))
        for v in range(1, n + 1):
            allowed = [u for u in range(n + 1) if u != v and not self.is_forbidden(v, u)]
            if not allowed:
                return f"shelter {v} has no usable incident edges"
            if allowed == [0] and partners[v]:
                return f"shelter {v} can only be a singleton but has forced neighbors"
            if 0 not in allowed and len(allowed) < 2:
                return f"shelter {v} cannot be interior with a single usable edge"
        return None

    def route_complies(self, nodes) -> bool:
        """Whether one route satisfies every forbidden/forced requirement."""
        nodes = tuple(nodes)
        present = set(nodes)
        for e in route_edges(nodes):
            if e in self.forbidden:
                return False
        if not self.forced:
            return True
        pos = {v: k for k, v in enumerate(nodes)}
        for i, j in self.forced:
            if i == 0:
                if j in present and not (nodes[0] == j or nodes[-1] == j):
                    return False
                continue
            in_i, in_j = i in present, j in present
            if in_i != in_j:
                return False
            if in_i and abs(pos[i] - pos[j]) != 1:
                return False
        return True


def aggregate_edge_values(columns, weights, n: int) -> dict[tuple[int, int], float]:
    """Aggregated undirected edge usage of a fractional column combination."""
    values: dict[tuple[int, int], float] = {}
    for col, w in zip(columns, weights):
        if w <= 1e-12:
            continue
        for e in route_edges(col.nodes):
            values[e] = values.get(e, 0.0) + w
    return values


def forbidden_matrix(constraints: BranchingConstraints, n: int) -> np.ndarray:
    mat = np.zeros((n + 1, n + 1), dtype=np.uint8)
    for i, j in constraints.forbidden:
        mat[i, j] = 1
        mat[j, i] = 1
    return mat
