"""Piecewise-linear nodal meshes from grid samples.

d=2: marching squares, ambiguous saddle cells resolved by the asymptotic
decider on the bilinear interpolant.  d=3: marching tetrahedra on the Kuhn
(Freudenthal) subdivision of each cube, which is ambiguity-free and always
yields a closed 2-manifold away from the grid boundary.

Grid values exactly equal to zero count as positive.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


@dataclass
class NodalMesh:
    vertices: np.ndarray  # (V, d) positions
    simplices: np.ndarray  # (S, d) vertex ids: segments (d=2) or triangles (d=3)
    on_boundary: np.ndarray  # (S,) simplex comes from a cell on the grid boundary
    cells: np.ndarray  # (S,) linear index (over cells) of the originating grid cell
    labels: np.ndarray  # (V,) connected component id per vertex
    n_components: int

    @property
    def dimension(self):
        return self.vertices.shape[1]


# ---------------------------------------------------------------------------
# 2D


# cell edges: 0 bottom (a-b), 1 right (b-c), 2 top (e-c), 3 left (a-e)
# corners: a=(i,j) b=(i+1,j) c=(i+1,j+1) e=(i,j+1); code = a + 2b + 4c + 8e
_SQUARE_TABLE = {
    1: [(0, 3)], 14: [(0, 3)],
    2: [(0, 1)], 13: [(0, 1)],
    4: [(1, 2)], 11: [(1, 2)],
    8: [(2, 3)], 7: [(2, 3)],
    3: [(3, 1)], 12: [(3, 1)],
    6: [(0, 2)], 9: [(0, 2)],
}


def _square_mesh(values, origin, spacing):
    n0, n1 = values.shape
    pos = values >= 0
    fa, fb = values[:-1, :-1], values[1:, :-1]
    fc, fe = values[1:, 1:], values[:-1, 1:]
    code = (
        pos[:-1, :-1].astype(np.int8)
        + 2 * pos[1:, :-1]
        + 4 * pos[1:, 1:]
        + 8 * pos[:-1, 1:]
    ).ravel()
    ii, jj = np.meshgrid(np.arange(n0 - 1), np.arange(n1 - 1), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    node = ii * n1 + jj
    # edge keys: 2 * node + axis
    ekeys = np.stack(
        [2 * node, 2 * (node + n1) + 1, 2 * (node + 1), 2 * node + 1], axis=1
    )
    border = (ii == 0) | (jj == 0) | (ii == n0 - 2) | (jj == n1 - 2)

    segs, bnd, cells = [], [], []
    for c, pairs in _SQUARE_TABLE.items():
        sel = np.flatnonzero(code == c)
        for e1, e2 in pairs:
            segs.append(np.stack([ekeys[sel, e1], ekeys[sel, e2]], axis=1))
            bnd.append(border[sel])
            cells.append(sel)
    amb = np.flatnonzero((code == 5) | (code == 10))
    if amb.size:
        a, b = fa.ravel()[amb], fb.ravel()[amb]
        c, e = fc.ravel()[amb], fe.ravel()[amb]
        saddle = (a * c - b * e) / (a + c - b - e)
        # True when the saddle joins corners a and c (same sign as a)
        join_ac = (saddle >= 0) == (code[amb] == 5)
        cut_be = [(0, 1), (2, 3)]
        cut_ac = [(0, 3), (1, 2)]
        for mask, pairs in ((join_ac, cut_be), (~join_ac, cut_ac)):
            sel = amb[mask]
            for e1, e2 in pairs:
                segs.append(np.stack([ekeys[sel, e1], ekeys[sel, e2]], axis=1))
                bnd.append(border[sel])
                cells.append(sel)
    keys = np.concatenate(segs) if segs else np.empty((0, 2), dtype=np.int64)
    on_boundary = np.concatenate(bnd) if bnd else np.empty(0, dtype=bool)
    cell_ids = np.concatenate(cells) if cells else np.empty(0, dtype=np.int64)

    uniq, inv = np.unique(keys.ravel(), return_inverse=True)
    simplices = inv.reshape(-1, 2)
    p = uniq // 2
    axis = uniq % 2
    q = p + np.where(axis == 0, n1, 1)
    verts = _interpolate(values.ravel(), p, q, (n0, n1), origin, spacing)
    return verts, simplices, on_boundary, cell_ids


# ---------------------------------------------------------------------------
# 3D

_OFFSETS = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (1, 0, 1), (0, 1, 1), (1, 1, 1)]
_OFFSET_CODE = {o: k for k, o in enumerate(_OFFSETS)}


def _kuhn_tets():
    """Six tetrahedra per cube, one per axis permutation, as 0/1 corner paths."""
    tets = []
    for perm in itertools.permutations(range(3)):
        path = [np.zeros(3, dtype=int)]
        for ax in perm:
            nxt = path[-1].copy()
            nxt[ax] = 1
            path.append(nxt)
        tets.append([tuple(v) for v in path])
    return tets


def _tet_table():
    """Sign pattern (bit s set when corner s positive) -> triangles given as
    triples of local edges (s, t) with s < t."""
    table = {}
    for code in range(1, 15):
        plus = [s for s in range(4) if code >> s & 1]
        minus = [s for s in range(4) if not code >> s & 1]
        edge = lambda s, t: (min(s, t), max(s, t))  # noqa: E731
        if len(plus) in (1, 3):
            lone = plus[0] if len(plus) == 1 else minus[0]
            others = [s for s in range(4) if s != lone]
            table[code] = [tuple(edge(lone, o) for o in others)]
        else:
            i, j = plus
            k, l = minus
            quad = [edge(i, k), edge(i, l), edge(j, l), edge(j, k)]
            table[code] = [(quad[0], quad[1], quad[2]), (quad[0], quad[2], quad[3])]
    return table


_TETS = _kuhn_tets()
_TET_TABLE = _tet_table()


def _tet_mesh(values, origin, spacing):
    n0, n1, n2 = values.shape
    pos = values >= 0
    ii, jj, kk = np.meshgrid(
        np.arange(n0 - 1), np.arange(n1 - 1), np.arange(n2 - 1), indexing="ij"
    )
    ii, jj, kk = ii.ravel(), jj.ravel(), kk.ravel()
    base = (ii * n1 + jj) * n2 + kk
    border = (
        (ii == 0) | (jj == 0) | (kk == 0)
        | (ii == n0 - 2) | (jj == n1 - 2) | (kk == n2 - 2)
    )
    stride = np.array([n1 * n2, n2, 1])
    flatpos = pos.ravel()

    tris, bnd, cells = [], [], []
    for tet in _TETS:
        corner_off = [int(np.dot(v, stride)) for v in tet]
        code = np.zeros(base.size, dtype=np.int8)
        for s, off in enumerate(corner_off):
            code |= (flatpos[base + off].astype(np.int8) << s)
        mixed = np.flatnonzero((code != 0) & (code != 15))
        if mixed.size == 0:
            continue
        cm = code[mixed]
        bm = base[mixed]
        ekey = {}
        for s in range(4):
            for t in range(s + 1, 4):
                diff = tuple(np.subtract(tet[t], tet[s]))
                ekey[(s, t)] = (bm + corner_off[s]) * 7 + _OFFSET_CODE[diff]
        for c, triangles in _TET_TABLE.items():
            sel = np.flatnonzero(cm == c)
            if sel.size == 0:
                continue
            for tri in triangles:
                tris.append(np.stack([ekey[e][sel] for e in tri], axis=1))
                bnd.append(border[mixed[sel]])
                cells.append(mixed[sel])
    keys = np.concatenate(tris) if tris else np.empty((0, 3), dtype=np.int64)
    on_boundary = np.concatenate(bnd) if bnd else np.empty(0, dtype=bool)
    cell_ids = np.concatenate(cells) if cells else np.empty(0, dtype=np.int64)

    uniq, inv = np.unique(keys.ravel(), return_inverse=True)
    simplices = inv.reshape(-1, 3)
    p = uniq // 7
    off = np.array([int(np.dot(o, stride)) for o in _OFFSETS])
    q = p + off[uniq % 7]
    verts = _interpolate(values.ravel(), p, q, (n0, n1, n2), origin, spacing)
    return verts, simplices, on_boundary, cell_ids


# ---------------------------------------------------------------------------


def _interpolate(flat, p, q, dims, origin, spacing):
    fp, fq = flat[p], flat[q]
    t = fp / (fp - fq)
    xp = np.stack(np.unravel_index(p, dims), axis=1).astype(float)
    xq = np.stack(np.unravel_index(q, dims), axis=1).astype(float)
    return np.asarray(origin) + spacing * (xp + t[:, None] * (xq - xp))


def nodal_mesh(values, origin, spacing):
    """Triangulate the zero set of grid samples and label its components."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        verts, simp, bnd, cells = _square_mesh(values, origin, spacing)
    elif values.ndim == 3:
        verts, simp, bnd, cells = _tet_mesh(values, origin, spacing)
    else:
        raise ValueError("unsupported dimension")
    nv = len(verts)
    if nv == 0:
        return NodalMesh(verts.reshape(0, values.ndim), simp, bnd, cells, np.empty(0, dtype=int), 0)
    rows = simp.ravel()
    cols = np.roll(simp, 1, axis=1).ravel()
    graph = coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(nv, nv))
    ncomp, labels = connected_components(graph, directed=False)
    return NodalMesh(verts, simp, bnd, cells, labels, ncomp)


def unique_edges(triangles):
    """Undirected edges of a triangle list with their face counts."""
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e.sort(axis=1)
    nv = int(e.max()) + 1
    keys, counts = np.unique(e[:, 0].astype(np.int64) * nv + e[:, 1], return_counts=True)
    return np.stack([keys // nv, keys % nv], axis=1), counts


def euler_characteristic(triangles):
    """V - E + F of a welded triangle mesh (vertex ids shared between faces)."""
    triangles = np.asarray(triangles)
    if triangles.size == 0:
        return 0
    v = np.unique(triangles).size
    edges, _ = unique_edges(triangles)
    return int(v - len(edges) + len(triangles))


def is_closed_manifold(triangles):
    """Every edge bounds exactly two faces."""
    if len(triangles) == 0:
        return True
    _, counts = unique_edges(np.asarray(triangles))
    return bool(np.all(counts == 2))
