"""Exact square linear assignment.

``solve`` returns the permutation minimizing the summed cost. Backends:

* ``"scipy"``: :func:`scipy.optimize.linear_sum_assignment`, a shortest
  augmenting path solver;
* ``"network-simplex"``: the network simplex of POT (``ot.emd``), much faster
  on the near-degenerate costs met when concentrated samples meet uniform
  grids;
* ``"sap"``: :func:`shortest_augmenting_path`, a plain numpy implementation
  kept as an independent exact route.

``"auto"`` picks the network simplex for ``n >= 64`` when POT is installed.
"""

from __future__ import annotations

import itertools
import math
import os
import sys
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

BRUTE_FORCE_MAX_N = 9
NETWORK_SIMPLEX_MIN_N = 64
_POT_BACKENDS = ("TENSORFLOW", "PYTORCH", "JAX", "CUPY")


@dataclass(frozen=True)
class Assignment:
    """Optimal permutation: sample ``i`` is matched to grid index ``perm[i]``."""

    perm: np.ndarray
    total_cost: float


def _validate(cost) -> np.ndarray:
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {cost.shape}")
    if cost.shape[0] == 0:
        raise ValueError("cost matrix is empty")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix has non-finite entries")
    return cost


def _assignment(cost: np.ndarray, perm: np.ndarray) -> Assignment:
    perm = np.asarray(perm, dtype=np.intp)
    total = math.fsum(cost[np.arange(cost.shape[0]), perm])
    return Assignment(perm=perm, total_cost=total)


def _load_pot():
    if "ot" not in sys.modules:
        # POT probes every array backend on import; only numpy is needed here
        for name in _POT_BACKENDS:
            os.environ.setdefault(f"POT_BACKEND_DISABLE_{name}", "1")
    try:
        import ot
    except ImportError:
        return None
    return ot


def network_simplex(cost: np.ndarray) -> np.ndarray | None:
    """Permutation from POT's exact network simplex, or None if unavailable.

    The optimal plan is a vertex of the Birkhoff polytope, so it is read off
    as a permutation; None is also returned if the plan is not one.
    """
    ot = _load_pot()
    if ot is None:
        return None
    n = cost.shape[0]
    w = np.full(n, 1.0 / n)
    plan = ot.emd(w, w, np.ascontiguousarray(cost), numItermax=max(10**7, 50 * n * n))
    perm = np.argmax(plan, axis=1)
    if np.unique(perm).size != n or not np.allclose(plan[np.arange(n), perm], 1.0 / n):
        return None
    return perm.astype(np.intp)


def solve(cost, method: str = "auto") -> Assignment:
    """Minimum-cost perfect matching of rows to columns.

    Parameters
    ----------
    cost : array_like, shape (n, n)
        Finite costs.
    method : {"auto", "scipy", "network-simplex", "sap"}
        See the module docstring.
    """
    cost = _validate(cost)
    if method == "auto":
        method = "network-simplex" if cost.shape[0] >= NETWORK_SIMPLEX_MIN_N else "scipy"
    if method == "network-simplex":
        perm = network_simplex(cost)
        if perm is not None:
            return _assignment(cost, perm)
        method = "scipy"
    if method == "scipy":
        rows, cols = linear_sum_assignment(cost)
        perm = np.empty(cost.shape[0], dtype=np.intp)
        perm[rows] = cols
    elif method == "sap":
        perm = shortest_augmenting_path(cost)
    else:
        raise ValueError(f"unknown assignment method {method!r}")
    return _assignment(cost, perm)


def shortest_augmenting_path(cost: np.ndarray) -> np.ndarray:
    """Jonker-Volgenant style solver with Dijkstra searches on reduced costs.

    Rows are inserted one at a time; each insertion grows a shortest-path tree
    over the columns until a free column is reached, then augments along it
    and updates the dual potentials. Ties in the column scan go to a free
    column first, then to the lowest index. O(n^3) with O(n) vector work per
    inner step.
    """
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    u = np.zeros(n)
    v = np.zeros(n)
    col4row = np.full(n, -1, dtype=np.intp)
    row4col = np.full(n, -1, dtype=np.intp)

    for cur_row in range(n):
        shortest = np.full(n, np.inf)
        path = np.full(n, -1, dtype=np.intp)
        in_tree_col = np.zeros(n, dtype=bool)
        visited_rows = [cur_row]
        min_val = 0.0
        i = cur_row
        sink = -1
        while sink < 0:
            open_cols = ~in_tree_col
            reduced = min_val + cost[i] - u[i] - v
            better = open_cols & (reduced < shortest)
            shortest[better] = reduced[better]
            path[better] = i

            candidates = np.flatnonzero(open_cols)
            vals = shortest[candidates]
            best = vals.min()
            ties = candidates[vals == best]
            free = ties[row4col[ties] < 0]
            j = int(free[0]) if free.size else int(ties[0])

            min_val = best
            in_tree_col[j] = True
            if row4col[j] < 0:
                sink = j
            else:
                i = int(row4col[j])
                visited_rows.append(i)

        u[cur_row] += min_val
        for r in visited_rows[1:]:
            u[r] += min_val - shortest[col4row[r]]
        v[in_tree_col] -= min_val - shortest[in_tree_col]

        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break
    return col4row


@lru_cache(maxsize=None)
def _permutations(n: int) -> np.ndarray:
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    perms.setflags(write=False)
    return perms


def brute_force(cost) -> Assignment:
    """Exhaustive search over all permutations (test oracle, n <= 9).

    The first permutation in lexicographic order attaining the minimum wins.
    """
    cost = _validate(cost)
    n = cost.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    rows = np.arange(n)
    perms = _permutations(n)
    totals = cost[rows, perms].sum(axis=1)
    best = perms[int(np.argmin(totals))]
    return _assignment(cost, best)
