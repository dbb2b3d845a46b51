"""Exact 3D Euclidean distance transform with banded sweeps.

The transform runs in three separable passes over a dense occupancy grid:

1. per z-line nearest site (banded sweep along z plus across-band
   propagation),
2. within each x-slice, a dominance-pruned stack of candidate sites per
   (x, z) column followed by a monotone query walk along y,
3. the same stack/query pair along x, turning per-slice 2D answers into the
   full 3D nearest site for every voxel.

All dominance and distance comparisons use 64-bit integer squared distances,
so the output is bit-identical regardless of band counts or thread count.
Floating point only appears when converting to meters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

NO_SITE = -1

# Axis extents are capped so that squared-distance products stay inside
# int64 during dominance tests.
_MAX_EXTENT = 1 << 20


@dataclass(frozen=True)
class BandConfig:
    """Band counts for the three passes.

    A band count that does not divide the swept extent is fine: bands get
    width extent // count (at least 1) and the last band absorbs the
    remainder.  Counts larger than the extent degrade to one band per cell.
    """

    m1: int = 1
    m2: int = 1
    m3: int = 2

    def __post_init__(self) -> None:
        if min(self.m1, self.m2, self.m3) < 1:
            raise ValueError("band counts must be positive")


def default_band_config(workers: int | None = None) -> BandConfig:
    w = max(1, int(workers) if workers else numba.get_num_threads())
    return BandConfig(m1=w, m2=w, m3=2 * w)


@dataclass
class ProximateStack:
    """Surviving candidate sites for one column, in sweep order.

    Entries are (sweep_coord, site) with strictly increasing sweep
    coordinates; no entry is dominated by its neighbors, so each owns a
    non-empty 1D Voronoi interval on the column.
    """

    entries: list

    def sites(self) -> list:
        return [site for _, site in self.entries]


def _dominated(y_a: int, w_a: int, y_b: int, w_b: int, y_c: int, w_c: int) -> bool:
    lhs = (w_b + y_b * y_b - w_a - y_a * y_a) * (y_c - y_b)
    rhs = (w_c + y_c * y_c - w_b - y_b * y_b) * (y_b - y_a)
    return lhs >= rhs


def proximate_sites_1d(sites, column: int) -> ProximateStack:
    """Prune an ordered (sweep_coord, site) list down to the stack of sites
    whose Voronoi interval on the given column is non-empty.

    Each site is an (x, y) integer pair; its perpendicular squared weight
    against the column is (x - column)^2.  Exact integer arithmetic
    throughout, matching the compiled kernels.
    """
    coords: list[int] = []
    weights: list[int] = []
    payload: list = []
    last = None
    for coord, site in sites:
        coord = int(coord)
        if last is not None and coord <= last:
            raise ValueError("sites must be strictly increasing in sweep coordinate")
        last = coord
        w = (int(site[0]) - int(column)) ** 2
        while len(coords) >= 2 and _dominated(
                coords[-2], weights[-2], coords[-1], weights[-1], coord, w):
            coords.pop(); weights.pop(); payload.pop()
        coords.append(coord)
        weights.append(w)
        payload.append(site)
    return ProximateStack(entries=list(zip(coords, payload)))


class DistanceField:
    """Per-voxel nearest occupied voxel, stored as flat int32 indices."""

    def __init__(self, site: np.ndarray, voxel_size: float):
        if site.ndim != 3:
            raise ValueError("site array must be 3D")
        self.site = site
        self.dims = site.shape
        self.voxel_size = float(voxel_size)

    def site_index(self, index) -> tuple[int, int, int] | None:
        """Nearest-site voxel index for one voxel, or None when the grid was
        empty."""
        i, j, k = index
        lin = int(self.site[i, j, k])
        if lin == NO_SITE:
            return None
        _, ny, nz = self.dims
        return lin // (ny * nz), (lin // nz) % ny, lin % nz

    def sq_distance_grid(self) -> np.ndarray:
        """Squared voxel distances as int64; -1 where there is no site."""
        _, ny, nz = self.dims
        flat = self.site.reshape(-1).astype(np.int64)
        out = np.full(flat.shape, -1, dtype=np.int64)
        ok = flat != NO_SITE
        if ok.any():
            vox = np.arange(flat.shape[0], dtype=np.int64)[ok]
            site = flat[ok]
            vi, vj, vk = vox // (ny * nz), (vox // nz) % ny, vox % nz
            si, sj, sk = site // (ny * nz), (site // nz) % ny, site % nz
            out[ok] = (vi - si) ** 2 + (vj - sj) ** 2 + (vk - sk) ** 2
        return out.reshape(self.dims)

    def dump_squared(self, stream) -> None:
        """Write squared voxel distances slice by slice for golden files."""
        sq = self.sq_distance_grid()
        nx, ny, nz = self.dims
        for k in range(nz):
            stream.write(f"slice k={k}\n")
            for j in range(ny):
                stream.write(" ".join(str(int(v)) for v in sq[:, j, k]))
                stream.write("\n")


def query_nearest_site(field: DistanceField, voxel_index):
    """Nearest site and its metric center-to-center distance, or None.

    Raises IndexError for out-of-bounds queries rather than clamping.
    """
    i, j, k = (int(v) for v in voxel_index)
    nx, ny, nz = field.dims
    if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
        raise IndexError(f"voxel {voxel_index} outside grid {field.dims}")
    site = field.site_index((i, j, k))
    if site is None:
        return None
    d2 = (i - site[0]) ** 2 + (j - site[1]) ** 2 + (k - site[2]) ** 2
    return site, field.voxel_size * float(np.sqrt(d2))


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def _sweep_lines(occ, m1, s1z):
    """Nearest occupied z per z-line: banded two-way sweep, then band merge."""
    nx, ny, nz = occ.shape
    nb = min(m1, nz)
    width = nz // nb
    for i in prange(nx):
        left = np.empty(nz, np.int32)
        right = np.empty(nz, np.int32)
        band_last = np.empty(nb, np.int32)
        band_first = np.empty(nb, np.int32)
        carry_l = np.empty(nb, np.int32)
        carry_r = np.empty(nb, np.int32)
        for j in range(ny):
            for b in range(nb):
                lo = b * width
                hi = nz if b == nb - 1 else (b + 1) * width
                last = -1
                for k in range(lo, hi):
                    if occ[i, j, k]:
                        last = k
                    left[k] = last
                band_last[b] = last
                first = -1
                for k in range(hi - 1, lo - 1, -1):
                    if occ[i, j, k]:
                        first = k
                    right[k] = first
                band_first[b] = first
            c = -1
            for b in range(nb):
                carry_l[b] = c
                if band_last[b] >= 0:
                    c = band_last[b]
            c = -1
            for b in range(nb - 1, -1, -1):
                carry_r[b] = c
                if band_first[b] >= 0:
                    c = band_first[b]
            for b in range(nb):
                lo = b * width
                hi = nz if b == nb - 1 else (b + 1) * width
                for k in range(lo, hi):
                    l = left[k]
                    if l < 0:
                        l = carry_l[b]
                    r = right[k]
                    if r < 0:
                        r = carry_r[b]
                    if l < 0:
                        s1z[i, j, k] = r
                    elif r < 0:
                        s1z[i, j, k] = l
                    elif k - l <= r - k:
                        s1z[i, j, k] = l
                    else:
                        s1z[i, j, k] = r


@njit(cache=True, parallel=True)
def _slice_transform(s1z, m2, m3, s2y, s2z):
    """2D nearest site within each x-slice, per (x, z) column along y.

    Candidates for column (i, ., k) are rows y whose z-line holds a site;
    their weight is the squared z offset of that line's nearest site at k.
    Band-local stacks are built first, then merged with the same dominance
    rule, then a monotone pointer walk answers every y in query bands.
    """
    nx, ny, nz = s1z.shape
    nb2 = min(m2, ny)
    w2 = ny // nb2
    nb3 = min(m3, ny)
    w3 = ny // nb3
    for i in prange(nx):
        seg_y = np.empty(ny, np.int32)
        seg_z = np.empty(ny, np.int32)
        seg_w = np.empty(ny, np.int64)
        seg_end = np.empty(nb2 + 1, np.int32)
        st_y = np.empty(ny, np.int32)
        st_z = np.empty(ny, np.int32)
        st_w = np.empty(ny, np.int64)
        for k in range(nz):
            # band-local dominance-pruned stacks, stored back to back
            n = 0
            seg_end[0] = 0
            for b in range(nb2):
                lo = b * w2
                hi = ny if b == nb2 - 1 else (b + 1) * w2
                base = n
                for y in range(lo, hi):
                    z = s1z[i, y, k]
                    if z < 0:
                        continue
                    dz = np.int64(k - z)
                    w = dz * dz
                    while n - base >= 2:
                        ya = np.int64(seg_y[n - 2]); wa = seg_w[n - 2]
                        yb = np.int64(seg_y[n - 1]); wb = seg_w[n - 1]
                        yc = np.int64(y)
                        if ((wb + yb * yb - wa - ya * ya) * (yc - yb)
                                >= (w + yc * yc - wb - yb * yb) * (yb - ya)):
                            n -= 1
                        else:
                            break
                    seg_y[n] = y
                    seg_z[n] = z
                    seg_w[n] = w
                    n += 1
                seg_end[b + 1] = n
            # merge bands into one stack
            t = 0
            for b in range(nb2):
                for s in range(seg_end[b], seg_end[b + 1]):
                    yc = np.int64(seg_y[s])
                    wc = seg_w[s]
                    while t >= 2:
                        ya = np.int64(st_y[t - 2]); wa = st_w[t - 2]
                        yb = np.int64(st_y[t - 1]); wb = st_w[t - 1]
                        if ((wb + yb * yb - wa - ya * ya) * (yc - yb)
                                >= (wc + yc * yc - wb - yb * yb) * (yb - ya)):
                            t -= 1
                        else:
                            break
                    st_y[t] = seg_y[s]
                    st_z[t] = seg_z[s]
                    st_w[t] = wc
                    t += 1
            if t == 0:
                for y in range(ny):
                    s2y[i, y, k] = -1
                    s2z[i, y, k] = -1
                continue
            # query walk: the winning stack index is monotone in y
            for b in range(nb3):
                lo = b * w3
                hi = ny if b == nb3 - 1 else (b + 1) * w3
                p = 0
                for y in range(lo, hi):
                    dy = np.int64(y - st_y[p])
                    best = dy * dy + st_w[p]
                    while p + 1 < t:
                        dy = np.int64(y - st_y[p + 1])
                        nxt = dy * dy + st_w[p + 1]
                        if nxt < best:
                            best = nxt
                            p += 1
                        else:
                            break
                    s2y[i, y, k] = st_y[p]
                    s2z[i, y, k] = st_z[p]


@njit(cache=True, parallel=True)
def _column_transform(s2y, s2z, m2, m3, site):
    """3D extension: stack and query along x for every (y, z) column.

    Per-slice 2D answers act as candidates; weights fold both in-slice
    offsets.  Slice data is staged into per-y contiguous buffers because the
    natural x stride is a whole slice.
    """
    nx, ny, nz = s2y.shape
    nb2 = min(m2, nx)
    w2 = nx // nb2
    nb3 = min(m3, nx)
    w3 = nx // nb3
    for j in prange(ny):
        buf_y = np.empty((nx, nz), np.int32)
        buf_z = np.empty((nx, nz), np.int32)
        buf_s = np.empty((nx, nz), np.int32)
        seg_x = np.empty(nx, np.int32)
        seg_sy = np.empty(nx, np.int32)
        seg_sz = np.empty(nx, np.int32)
        seg_w = np.empty(nx, np.int64)
        seg_end = np.empty(nb2 + 1, np.int32)
        st_x = np.empty(nx, np.int32)
        st_sy = np.empty(nx, np.int32)
        st_sz = np.empty(nx, np.int32)
        st_w = np.empty(nx, np.int64)
        for x in range(nx):
            for k in range(nz):
                buf_y[x, k] = s2y[x, j, k]
                buf_z[x, k] = s2z[x, j, k]
        for k in range(nz):
            n = 0
            seg_end[0] = 0
            for b in range(nb2):
                lo = b * w2
                hi = nx if b == nb2 - 1 else (b + 1) * w2
                base = n
                for x in range(lo, hi):
                    sy = buf_y[x, k]
                    if sy < 0:
                        continue
                    sz = buf_z[x, k]
                    dy = np.int64(j - sy)
                    dz = np.int64(k - sz)
                    w = dy * dy + dz * dz
                    while n - base >= 2:
                        xa = np.int64(seg_x[n - 2]); wa = seg_w[n - 2]
                        xb = np.int64(seg_x[n - 1]); wb = seg_w[n - 1]
                        xc = np.int64(x)
                        if ((wb + xb * xb - wa - xa * xa) * (xc - xb)
                                >= (w + xc * xc - wb - xb * xb) * (xb - xa)):
                            n -= 1
                        else:
                            break
                    seg_x[n] = x
                    seg_sy[n] = sy
                    seg_sz[n] = sz
                    seg_w[n] = w
                    n += 1
                seg_end[b + 1] = n
            t = 0
            for b in range(nb2):
                for s in range(seg_end[b], seg_end[b + 1]):
                    xc = np.int64(seg_x[s])
                    wc = seg_w[s]
                    while t >= 2:
                        xa = np.int64(st_x[t - 2]); wa = st_w[t - 2]
                        xb = np.int64(st_x[t - 1]); wb = st_w[t - 1]
                        if ((wb + xb * xb - wa - xa * xa) * (xc - xb)
                                >= (wc + xc * xc - wb - xb * xb) * (xb - xa)):
                            t -= 1
                        else:
                            break
                    st_x[t] = seg_x[s]
                    st_sy[t] = seg_sy[s]
                    st_sz[t] = seg_sz[s]
                    st_w[t] = wc
                    t += 1
            if t == 0:
                for x in range(nx):
                    buf_s[x, k] = -1
                continue
            for b in range(nb3):
                lo = b * w3
                hi = nx if b == nb3 - 1 else (b + 1) * w3
                p = 0
                for x in range(lo, hi):
                    dx = np.int64(x - st_x[p])
                    best = dx * dx + st_w[p]
                    while p + 1 < t:
                        dx = np.int64(x - st_x[p + 1])
                        nxt = dx * dx + st_w[p + 1]
                        if nxt < best:
                            best = nxt
                            p += 1
                        else:
                            break
                    buf_s[x, k] = (st_x[p] * ny + st_sy[p]) * nz + st_sz[p]
        for x in range(nx):
            for k in range(nz):
                site[x, j, k] = buf_s[x, k]


class _thread_count:
    """Temporarily pin numba's thread count, clamped to the pool size."""

    def __init__(self, workers: int | None):
        self.workers = workers
        self.prev = None

    def __enter__(self):
        if self.workers is not None:
            if self.workers < 1:
                raise ValueError("workers must be positive")
            self.prev = numba.get_num_threads()
            numba.set_num_threads(min(self.workers, numba.config.NUMBA_NUM_THREADS))
        return self

    def __exit__(self, *exc):
        if self.prev is not None:
            numba.set_num_threads(self.prev)
        return False


def line_nearest_sites(occupancy: np.ndarray, m1: int = 1,
                       workers: int | None = None) -> np.ndarray:
    """First pass only: per voxel, the nearest occupied z within its own
    z-line (as a z coordinate, -1 for an empty line).  Exposed for tests."""
    occ = _as_occ(occupancy)
    s1z = np.empty(occ.shape, np.int32)
    with _thread_count(workers):
        _sweep_lines(occ, m1, s1z)
    return s1z


def _as_occ(occupancy: np.ndarray) -> np.ndarray:
    occ = np.ascontiguousarray(occupancy)
    if occ.ndim != 3:
        raise ValueError("occupancy must be a 3D array")
    if max(occ.shape) > _MAX_EXTENT:
        raise ValueError("grid extent too large for integer-exact transform")
    if occ.dtype != np.uint8:
        occ = occ.astype(np.uint8)
    return occ


def pba_edt(occupancy: np.ndarray, band_cfg: BandConfig | None = None,
            voxel_size: float = 1.0, workers: int | None = None) -> DistanceField:
    """Exact EDT of a boolean occupancy grid.

    The result is bit-identical for every band configuration and worker
    count.  An empty grid yields an all-NO_SITE field.
    """
    occ = _as_occ(occupancy)
    if band_cfg is None:
        band_cfg = default_band_config(workers)
    site = np.empty(occ.shape, np.int32)
    with _thread_count(workers):
        s1z = np.empty(occ.shape, np.int32)
        _sweep_lines(occ, band_cfg.m1, s1z)
        s2y = np.empty(occ.shape, np.int32)
        s2z = np.empty(occ.shape, np.int32)
        _slice_transform(s1z, band_cfg.m2, band_cfg.m3, s2y, s2z)
        _column_transform(s2y, s2z, band_cfg.m2, band_cfg.m3, site)
    return DistanceField(site, voxel_size)


def brute_force_edt(occupancy: np.ndarray, voxel_size: float = 1.0) -> DistanceField:
    """Exhaustive oracle: per voxel, the minimum over all occupied voxels,
    ties broken lexicographically.  Intended for grids up to about 48^3."""
    occ = _as_occ(occupancy)
    nx, ny, nz = occ.shape
    n = nx * ny * nz
    sites = np.argwhere(occ != 0).astype(np.int64)  # lexicographic order
    if sites.shape[0] == 0:
        return DistanceField(np.full(occ.shape, NO_SITE, np.int32), voxel_size)
    site_lin = ((sites[:, 0] * ny + sites[:, 1]) * nz + sites[:, 2]).astype(np.int32)
    vox = np.indices(occ.shape, dtype=np.int64).reshape(3, -1).T
    out = np.empty(n, np.int32)
    # chunk so the (chunk, sites, 3) broadcast stays around 64 MB
    chunk = max(1, int(64e6) // (sites.shape[0] * 24))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        d = vox[lo:hi, None, :] - sites[None, :, :]
        d2 = (d * d).sum(axis=2)
        # np.argmin takes the first minimum, i.e. the lexicographically
        # smallest site, because `sites` is in lexicographic order
        out[lo:hi] = site_lin[np.argmin(d2, axis=1)]
    return DistanceField(out.reshape(occ.shape), voxel_size)
