"""Maximal cliques by Bron-Kerbosch with pivoting."""
from __future__ import annotations

from typing import Hashable, Mapping, Sequence


def bron_kerbosch(adj: Mapping[Hashable, set]) -> list[frozenset]:
    """All maximal cliques of an undirected graph given as vertex -> neighbour set."""
    out: list[frozenset] = []
    stack = [(frozenset(), set(adj), set())]
    while stack:
        r, p, x = stack.pop()
        if not p:
            if not x:
                out.append(r)
            continue
        pivot = max(p | x, key=lambda u: len(adj[u] & p))
        for v in sorted(p - adj[pivot], key=repr):
            stack.append((r | {v}, p & adj[v], x & adj[v]))
            p = p - {v}
            x = x | {v}
    return out


def enumerate_overlap_cliques(intervals: Sequence[tuple[int, int]]) -> list[tuple[int, ...]]:
    """Maximal cliques of the overlap graph of closed intervals, as sorted index tuples."""
    n = len(intervals)
    order = sorted(range(n), key=lambda k: intervals[k])
    adj: dict[int, set] = {k: set() for k in range(n)}
    for pos, a in enumerate(order):
        a_hi = intervals[a][1]
        for b in order[pos + 1:]:
            if intervals[b][0] > a_hi:
                break
            adj[a].add(b)
            adj[b].add(a)
    return sorted(tuple(sorted(c)) for c in bron_kerbosch(adj))
