# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport floor, sqrt, INFINITY

cnp.import_array()

UPPER_OFFSETS = [(0, 0), (0, 1), (0, 2)] + [(dy, dx) for dy in (1, 2) for dx in range(-2, 3)]


cdef inline Py_ssize_t _imax(Py_ssize_t a, Py_ssize_t b) nogil:
    return a if a > b else b


cdef inline Py_ssize_t _imin(Py_ssize_t a, Py_ssize_t b) nogil:
    return a if a < b else b


def slic_assign(double[:, :, ::1] lab, double[:, ::1] centers, double step,
                double spatial_weight, int[:, ::1] labels, double[:, ::1] dist):
    cdef Py_ssize_t h = lab.shape[0], w = lab.shape[1]
    cdef Py_ssize_t k, y, x, y0, y1, x0, x1
    cdef double cl, ca, cb, cy, cx, dl, da, db, dy, dx, d
    with nogil:
        for y in range(h):
            for x in range(w):
                dist[y, x] = INFINITY
        for k in range(centers.shape[0]):
            cl = centers[k, 0]
            ca = centers[k, 1]
            cb = centers[k, 2]
            cy = centers[k, 3]
            cx = centers[k, 4]
            y0 = _imax(0, <Py_ssize_t>floor(cy - step))
            y1 = _imin(h - 1, <Py_ssize_t>floor(cy + step))
            x0 = _imax(0, <Py_ssize_t>floor(cx - step))
            x1 = _imin(w - 1, <Py_ssize_t>floor(cx + step))
            for y in range(y0, y1 + 1):
                dy = <double>y - cy
                for x in range(x0, x1 + 1):
                    dl = lab[y, x, 0] - cl
                    da = lab[y, x, 1] - ca
                    db = lab[y, x, 2] - cb
                    dx = <double>x - cx
                    d = dl * dl + da * da + db * db + (dy * dy + dx * dx) * spatial_weight
                    if d < dist[y, x]:
                        dist[y, x] = d
                        labels[y, x] = <int>k


def slic_accumulate(double[:, :, ::1] lab, int[:, ::1] labels, Py_ssize_t n_labels):
    cdef Py_ssize_t h = labels.shape[0], w = labels.shape[1]
    sums_arr = np.zeros((n_labels, 5))
    counts_arr = np.zeros(n_labels, dtype=np.int64)
    cdef double[:, ::1] sums = sums_arr
    cdef long long[::1] counts = counts_arr
    cdef Py_ssize_t y, x
    cdef int k
    with nogil:
        for y in range(h):
            for x in range(w):
                k = labels[y, x]
                if k < 0:
                    continue
                sums[k, 0] += lab[y, x, 0]
                sums[k, 1] += lab[y, x, 1]
                sums[k, 2] += lab[y, x, 2]
                sums[k, 3] += <double>y
                sums[k, 4] += <double>x
                counts[k] += 1
    return sums_arr, counts_arr


def morph_disk(binary, int radius, bint erode, int n_threads=1):
    """Row-run disk morphology via per-row prefix counts; rows run in parallel."""
    src = np.ascontiguousarray(binary, dtype=np.uint8)
    cdef unsigned char[:, ::1] b = src
    cdef Py_ssize_t h = b.shape[0], w = b.shape[1]
    pre_arr = np.zeros((h, w + 1), dtype=np.int32)
    out_arr = np.zeros((h, w), dtype=np.uint8)
    half_arr = np.zeros(2 * radius + 1, dtype=np.intp)
    cdef int[:, ::1] pre = pre_arr
    cdef unsigned char[:, ::1] out = out_arr
    cdef Py_ssize_t[::1] half = half_arr
    cdef Py_ssize_t y, x, dy, yy, lo, hi, hw, r2 = radius * radius
    cdef int hit
    for dy in range(-radius, radius + 1):
        hw = 0
        while (hw + 1) * (hw + 1) <= r2 - dy * dy:
            hw += 1
        half[dy + radius] = hw
    if n_threads < 1:
        n_threads = 1
    with nogil:
        for y in prange(h, num_threads=n_threads, schedule="static"):
            for x in range(w):
                pre[y, x + 1] = pre[y, x] + (b[y, x] != 0)
        for y in prange(h, num_threads=n_threads, schedule="static"):
            for x in range(w):
                hit = 1 if erode else 0
                for dy in range(-radius, radius + 1):
                    yy = y + dy
                    hw = half[dy + radius]
                    if erode:
                        if yy < 0 or yy >= h or x - hw < 0 or x + hw >= w:
                            hit = 0
                            break
                        if pre[yy, x + hw + 1] - pre[yy, x - hw] != 2 * hw + 1:
                            hit = 0
                            break
                    else:
                        if yy < 0 or yy >= h:
                            continue
                        lo = _imax(0, x - hw)
                        hi = _imin(w - 1, x + hw)
                        if pre[yy, hi + 1] - pre[yy, lo] > 0:
                            hit = 1
                            break
                out[y, x] = hit
    return out_arr


cdef void _window_block(double[:, :, ::1] img, Py_ssize_t y, Py_ssize_t x, double eps,
                        double* m) noexcept nogil:
    """Fill m (9x9, row-major) with (I - F)^T (I - F) for the window centred at (y+1, x+1)."""
    cdef double X[9][4]
    cdef double G[4][4]
    cdef double R[4][4]
    cdef double Y[4][9]
    cdef double E[9][9]
    cdef Py_ssize_t i, j, k, c
    cdef double s
    for i in range(9):
        for c in range(3):
            X[i][c] = img[y + i // 3, x + i % 3, c]
        X[i][3] = 1.0
    for i in range(4):
        for j in range(4):
            s = 0.0
            for k in range(9):
                s = s + X[k][i] * X[k][j]
            G[i][j] = s
    for i in range(3):
        G[i][i] = G[i][i] + eps
    # Cholesky G = R R^T (lower R)
    for i in range(4):
        for j in range(i + 1):
            s = G[i][j]
            for k in range(j):
                s = s - R[i][k] * R[j][k]
            if i == j:
                R[i][i] = sqrt(s)
            else:
                R[i][j] = s / R[j][j]
    # Y = G^{-1} X^T, column by column
    for c in range(9):
        for i in range(4):
            s = X[c][i]
            for k in range(i):
                s = s - R[i][k] * Y[k][c]
            Y[i][c] = s / R[i][i]
        for i in range(3, -1, -1):
            s = Y[i][c]
            for k in range(i + 1, 4):
                s = s - R[k][i] * Y[k][c]
            Y[i][c] = s / R[i][i]
    # E = I - X Y
    for i in range(9):
        for j in range(9):
            s = 0.0
            for k in range(4):
                s = s + X[i][k] * Y[k][j]
            E[i][j] = (1.0 if i == j else 0.0) - s
    for i in range(9):
        for j in range(i, 9):
            s = 0.0
            for k in range(9):
                s = s + E[k][i] * E[k][j]
            m[i * 9 + j] = s
            m[j * 9 + i] = s


def window_laplacians(img, double eps):
    cdef double[:, :, ::1] im = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t h = im.shape[0], w = im.shape[1], y, x
    out_arr = np.zeros((h - 2, w - 2, 9, 9))
    cdef double[:, :, :, ::1] out = out_arr
    with nogil:
        for y in range(h - 2):
            for x in range(w - 2):
                _window_block(im, y, x, eps, &out[y, x, 0, 0])
    return out_arr


def laplacian_bands(img, active, double eps, int chunk_rows=64):
    cdef double[:, :, ::1] im = np.ascontiguousarray(img, dtype=np.float64)
    cdef unsigned char[:, ::1] act = np.ascontiguousarray(active, dtype=np.uint8)
    cdef Py_ssize_t h = im.shape[0], w = im.shape[1]
    bands_arr = np.zeros((len(UPPER_OFFSETS), h, w))
    cdef double[:, :, ::1] bands = bands_arr
    cdef double m[81]
    cdef Py_ssize_t y, x, a, b, ra, ca, rb, cb, ddy, ddx, o
    offset_index = np.full((5, 5), -1, dtype=np.intp)
    for i, (oy, ox) in enumerate(UPPER_OFFSETS):
        offset_index[oy + 2, ox + 2] = i
    cdef Py_ssize_t[:, ::1] oidx = offset_index
    with nogil:
        for y in range(h - 2):
            for x in range(w - 2):
                if not act[y, x]:
                    continue
                _window_block(im, y, x, eps, m)
                for a in range(9):
                    ra = a // 3
                    ca = a % 3
                    for b in range(9):
                        rb = b // 3
                        cb = b % 3
                        ddy = rb - ra
                        ddx = cb - ca
                        o = oidx[ddy + 2, ddx + 2]
                        if o < 0:
                            continue
                        bands[o, y + ra, x + ca] += m[a * 9 + b]
    return bands_arr
