"""Per-image quality selection under a total file-size budget.

Pick exactly one option per image minimizing total distortion subject to the
sum of option sizes staying within the limit: a multiple-choice knapsack.
`solve` is exact — depth-first branch and bound with per-image convex-hull
LP bounds — and `brute_force` is the independent enumeration oracle.  Ties
are broken toward the lexicographically smallest choice vector.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError, InfeasibleError


@dataclass
class AllocationInstance:
    """Distortion matrix f, size matrix b (both N x M) and the size limit."""

    f: np.ndarray
    b: np.ndarray
    limit: float

    def __post_init__(self):
        self.f = np.asarray(self.f, np.float64)
        self.b = np.asarray(self.b, np.float64)
        if self.f.ndim != 2 or self.f.shape != self.b.shape:
            raise ValueError(
                f"f and b must be equal-shape N x M matrices, got {self.f.shape} "
                f"and {self.b.shape}"
            )
        if self.f.shape[0] < 1 or self.f.shape[1] < 1:
            raise ValueError("need at least one image and one option")
        if (self.f < 0).any() or (self.b < 0).any():
            raise ValueError("distortions and sizes must be nonnegative")

    @property
    def n_images(self):
        return self.f.shape[0]

    @property
    def n_options(self):
        return self.f.shape[1]

    def min_total_size(self):
        # fsum: exactly rounded, so the value is independent of summation order
        return math.fsum(self.b.min(axis=1))


@dataclass
class Allocation:
    """One option index per image (the one-hot selections, as indices)."""

    choice: list

    def __post_init__(self):
        self.choice = [int(c) for c in self.choice]


def objective(inst, alloc):
    """Total distortion of the allocation."""
    return float(sum(inst.f[i, c] for i, c in enumerate(alloc.choice)))


def total_size(inst, alloc):
    return math.fsum(inst.b[i, c] for i, c in enumerate(alloc.choice))


def feasible(inst, alloc):
    return total_size(inst, alloc) <= inst.limit


def brute_force(inst, cap=10 ** 6):
    """Exhaustive reference optimum with the same lexicographic tie-break."""
    n, m = inst.f.shape
    if m ** n > cap:
        raise CapExceededError(f"{m}^{n} assignments exceed the cap of {cap}")
    best = None
    best_obj = np.inf
    for choice in itertools.product(range(m), repeat=n):
        size = math.fsum(inst.b[i, c] for i, c in enumerate(choice))
        if size > inst.limit:
            continue
        obj = sum(inst.f[i, c] for i, c in enumerate(choice))
        if obj < best_obj:
            best_obj = obj
            best = choice
    if best is None:
        raise InfeasibleError(inst.min_total_size(), inst.limit)
    return Allocation(list(best))


def dominance_prune(inst):
    """Remove options dominated within their image.

    Option j is dominated when some sibling has size <= and distortion <=
    with at least one strict (exact duplicates keep the lowest index).
    Returns (reduced instance, index maps from reduced to original columns).
    Reduced rows may have differing lengths, so short rows are padded with
    their own last (worst-size) kept option; the index maps are authoritative.
    """
    keep_maps = []
    for i in range(inst.n_images):
        kept = []
        for j in range(inst.n_options):
            dominated = False
            for j2 in range(inst.n_options):
                if j2 == j:
                    continue
                fj, bj = inst.f[i, j], inst.b[i, j]
                f2, b2 = inst.f[i, j2], inst.b[i, j2]
                if f2 <= fj and b2 <= bj and (f2 < fj or b2 < bj or j2 < j):
                    dominated = True
                    break
            if not dominated:
                kept.append(j)
        keep_maps.append(kept)
    width = max(len(k) for k in keep_maps)
    f = np.empty((inst.n_images, width))
    b = np.empty((inst.n_images, width))
    for i, kept in enumerate(keep_maps):
        padded = kept + [kept[-1]] * (width - len(kept))
        f[i] = inst.f[i, padded]
        b[i] = inst.b[i, padded]
    return AllocationInstance(f, b, inst.limit), keep_maps


def _lex_safe_options(inst, i):
    """Kept option indices for image i, removing only options that can never
    appear in the lexicographically smallest optimal solution."""
    kept = []
    for j in range(inst.n_options):
        removable = False
        for j2 in range(inst.n_options):
            if j2 == j:
                continue
            fj, bj = inst.f[i, j], inst.b[i, j]
            f2, b2 = inst.f[i, j2], inst.b[i, j2]
            if b2 <= bj and (f2 < fj or (f2 <= fj and j2 < j)):
                removable = True
                break
        if not removable:
            kept.append(j)
    return kept


def _hull_increments(sizes, dists):
    """Lower-convex-hull upgrade steps for one image's (size, distortion) set.

    Options come sorted by size ascending with strictly decreasing distortion
    (lex-safe pruning guarantees both).  Returns (base_size, base_dist,
    [(delta_size, delta_dist_gain, ratio), ...]) with ratios non-increasing.
    """
    hull = [0]
    for idx in range(1, len(sizes)):
        while len(hull) >= 2:
            a, mid = hull[-2], hull[-1]
            lhs = (dists[a] - dists[mid]) * (sizes[idx] - sizes[mid])
            rhs = (dists[mid] - dists[idx]) * (sizes[mid] - sizes[a])
            if lhs <= rhs:
                hull.pop()
            else:
                break
        hull.append(idx)
    incs = []
    for a, c in zip(hull, hull[1:]):
        db = sizes[c] - sizes[a]
        df = dists[a] - dists[c]
        incs.append((db, df, df / db))
    return sizes[hull[0]], dists[hull[0]], incs


def _lp_bound(base_dist, budget, increments):
    """LP-relaxation lower bound on remaining distortion given spare budget.

    `increments` is globally ratio-sorted; greedily apply whole steps, then a
    fraction of the next one.
    """
    bound = base_dist
    for db, df, _ in increments:
        if db <= budget:
            budget -= db
            bound -= df
        else:
            bound -= df * (budget / db)
            break
    return bound


def solve(inst):
    """Exact minimum-distortion allocation within the size limit.

    Depth-first branch and bound over images in index order with options in
    index order, pruned by per-suffix LP bounds; the first optimum found is
    the lexicographically smallest.
    """
    n = inst.n_images
    options = [_lex_safe_options(inst, i) for i in range(n)]
    per_image = []
    for i, kept in enumerate(options):
        by_size = sorted(kept, key=lambda j: inst.b[i, j])
        sizes = [inst.b[i, j] for j in by_size]
        dists = [inst.f[i, j] for j in by_size]
        per_image.append(_hull_increments(sizes, dists))

    min_size_suffix = np.zeros(n + 1)
    base_dist_suffix = np.zeros(n + 1)
    for i in range(n - 1, -1, -1):
        min_size_suffix[i] = min_size_suffix[i + 1] + per_image[i][0]
        base_dist_suffix[i] = base_dist_suffix[i + 1] + per_image[i][1]
    if inst.min_total_size() > inst.limit:
        raise InfeasibleError(inst.min_total_size(), inst.limit)

    # running sums accumulate rounding error, so size prunes get a hair of
    # slack and every leaf is re-checked with an exactly rounded sum
    eps = 1e-9 * max(1.0, abs(inst.limit))

    # all upgrade steps tagged by image, globally sorted by ratio
    all_incs = sorted(
        ((inc, i) for i in range(n) for inc in per_image[i][2]),
        key=lambda item: -item[0][2],
    )

    best_obj = np.inf
    best_choice = None
    choice = [0] * n

    def suffix_bound(i, budget):
        bound = base_dist_suffix[i]
        spare = budget - min_size_suffix[i]
        for (db, df, _), img in all_incs:
            if img < i:
                continue
            if db <= spare:
                spare -= db
                bound -= df
            else:
                bound -= df * max(spare, 0.0) / db
                break
        return bound

    def dfs(i, used_size, used_dist):
        nonlocal best_obj, best_choice
        if i == n:
            exact_size = math.fsum(inst.b[k, choice[k]] for k in range(n))
            if exact_size <= inst.limit and used_dist < best_obj:
                best_obj = used_dist
                best_choice = choice.copy()
            return
        remaining_budget = inst.limit - used_size
        if min_size_suffix[i] > remaining_budget + eps:
            return
        obj_eps = 1e-9 * max(1.0, abs(best_obj)) if np.isfinite(best_obj) else 0.0
        if used_dist + suffix_bound(i, remaining_budget) >= best_obj + obj_eps:
            return
        for j in options[i]:
            size = used_size + inst.b[i, j]
            if inst.b[i, j] + min_size_suffix[i + 1] > remaining_budget + eps:
                continue
            choice[i] = j
            dfs(i + 1, size, used_dist + inst.f[i, j])
        choice[i] = 0

    dfs(0, 0.0, 0.0)
    if best_choice is None:
        raise InfeasibleError(inst.min_total_size(), inst.limit)
    return Allocation(best_choice)


def parse_instance(text):
    """Instance interchange format: header "N M limit", then N lines of M
    size:distortion pairs."""
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines:
        raise ValueError("empty instance file")
    header = lines[0].split()
    if len(header) != 3:
        raise ValueError("instance header must be: N M limit")
    n, m = int(header[0]), int(header[1])
    limit = float(header[2])
    if len(lines) != n + 1:
        raise ValueError(f"expected {n} option lines, got {len(lines) - 1}")
    b = np.empty((n, m))
    f = np.empty((n, m))
    for i, line in enumerate(lines[1:]):
        pairs = line.split()
        if len(pairs) != m:
            raise ValueError(f"image {i}: expected {m} size:distortion pairs")
        for j, pair in enumerate(pairs):
            size_s, _, dist_s = pair.partition(":")
            b[i, j] = float(size_s)
            f[i, j] = float(dist_s)
    return AllocationInstance(f, b, limit)


def format_instance(inst):
    lines = [f"{inst.n_images} {inst.n_options} {inst.limit:g}"]
    for i in range(inst.n_images):
        lines.append(
            " ".join(
                f"{inst.b[i, j]:g}:{inst.f[i, j]:g}" for j in range(inst.n_options)
            )
        )
    return "\n".join(lines) + "\n"
