"""Pure-Python fallback for the compiled tour kernels (same algorithms, same results)."""

import numpy as np

EPS = 1e-12


def nearest_neighbor(dist):
    d = dist.tolist()
    n = len(d)
    tour = [0] * n
    seen = [False] * n
    seen[0] = True
    cur = 0
    for pos in range(1, n):
        best_j = -1
        best = 0.0
        row = d[cur]
        for j in range(1, n):
            if seen[j]:
                continue
            if best_j < 0 or row[j] < best:
                best = row[j]
                best_j = j
        tour[pos] = best_j
        seen[best_j] = True
        cur = best_j
    return np.asarray(tour, dtype=np.int64)


def two_opt(dist, tour):
    L = len(tour)
    if L < 4:
        return 0
    d = dist.tolist()
    t = tour.tolist()
    moves = 0
    improved = True
    while improved:
        improved = False
        for i in range(L - 2):
            a = t[i]
            b = t[i + 1]
            da = d[a]
            for j in range(i + 2, L):
                c = t[j]
                e = t[(j + 1) % L]
                if e == a:
                    continue
                delta = da[c] + d[b][e] - da[b] - d[c][e]
                if delta < -EPS:
                    t[i + 1:j + 1] = t[i + 1:j + 1][::-1]
                    b = t[i + 1]
                    improved = True
                    moves += 1
    tour[:] = t
    return moves


def tour_length(dist, tour):
    L = len(tour)
    if L < 2:
        return 0.0
    d = dist.tolist()
    t = tour.tolist()
    total = 0.0
    for i in range(L - 1):
        total += d[t[i]][t[i + 1]]
    total += d[t[L - 1]][t[0]]
    return total
