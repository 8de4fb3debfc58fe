"""Vectorized box/metric kernels for the regression simulator.

Mirrors the scalar geometry, metric, and loss paths over (N, 5) parameter
arrays so that thousands of regression cases advance in lockstep. The
clipping stage order and every formula match the scalar implementation;
tests pin agreement between the two routes.

Internal module: the public simulator API lives in `simulate`.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import AREA_EPS
from .weighting import ARITHMETIC, DEGENERATE_DISTANCE, GEOMETRIC

# Local corner pattern, CCW from (+l/2, +w/2); scaled by (l, w) per box.
_LOCAL = 0.5 * np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])


def wrap_angle(theta: np.ndarray) -> np.ndarray:
    in_range = (theta >= -math.pi) & (theta < math.pi)
    return np.where(in_range, theta, np.mod(theta + math.pi, 2.0 * math.pi) - math.pi)


def corners(boxes: np.ndarray) -> np.ndarray:
    """Corner coordinates of (N, 5) boxes as (N, 4, 2), CCW."""
    local = _LOCAL[None, :, :] * boxes[:, None, 2:4]
    c = np.cos(boxes[:, 4])[:, None]
    s = np.sin(boxes[:, 4])[:, None]
    x = boxes[:, None, 0] + local[..., 0] * c - local[..., 1] * s
    y = boxes[:, None, 1] + local[..., 0] * s + local[..., 1] * c
    return np.stack([x, y], axis=-1)


def _prev_along_ring(arr: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """arr[i - 1] with wraparound at each row's vertex count."""
    out = np.empty_like(arr)
    out[:, 1:] = arr[:, :-1]
    out[:, 0] = arr[np.arange(arr.shape[0]), counts - 1]
    return out


def clip_quads_xy(
    sx: np.ndarray, sy: np.ndarray, clip_const: tuple
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sutherland-Hodgman intersection of CCW quads against fixed clip quads.

    sx, sy: (N, 4) subject corner coordinates. clip_const comes from
    precompute_clip. Returns padded (x, y) buffers and per-row counts.
    Rows with fewer than 3 vertices are degenerate (empty) regions.
    """
    n = sx.shape[0]
    rows = np.arange(n)
    counts = np.full(n, 4, dtype=np.int64)
    x, y = sx, sy

    for ex, ey, b in clip_const:
        k = x.shape[1]
        # Signed side of each vertex relative to the clip edge.
        cross = ex * y - ey * x - b
        valid = np.arange(k)[None, :] < counts[:, None]
        inside = (cross >= 0.0) & valid

        counts_safe = np.maximum(counts, 1)
        s_x = _prev_along_ring(x, counts_safe)
        s_y = _prev_along_ring(y, counts_safe)
        s_in = _prev_along_ring(inside, counts_safe)
        s_cross = _prev_along_ring(cross, counts_safe)

        dx = x - s_x
        dy = y - s_y
        denom = ex * dy - ey * dx
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -s_cross / denom
            ix = s_x + t * dx
            iy = s_y + t * dy
        crossing = (inside != s_in) & valid & (denom != 0.0)

        # Candidate stream per vertex: [crossing point, vertex itself].
        # A convex ring grows by at most one vertex per half-plane; one
        # slack slot absorbs numerically collinear degeneracies.
        width = k + 2
        cand_x = np.empty((n, 2 * k))
        cand_y = np.empty((n, 2 * k))
        cand_x[:, 0::2] = ix
        cand_x[:, 1::2] = x
        cand_y[:, 0::2] = iy
        cand_y[:, 1::2] = y
        cvalid = np.empty((n, 2 * k), dtype=bool)
        cvalid[:, 0::2] = crossing
        cvalid[:, 1::2] = inside

        pos = np.cumsum(cvalid, axis=1)
        counts = pos[:, -1].copy()
        pos -= 1
        x = np.zeros((n, width))
        y = np.zeros((n, width))
        flat = np.nonzero(cvalid)
        slots = (flat[0], pos[flat])
        x[slots] = cand_x[flat]
        y[slots] = cand_y[flat]

    return x, y, counts


def precompute_clip(clip: np.ndarray) -> tuple:
    """Per-stage edge constants for a fixed (N, 4, 2) clip polygon array.

    Stage order matches the scalar clipper: edges (3->0), (0->1), (1->2),
    (2->3). cross(v) = ex * vy - ey * vx - b is the signed side of v.
    """
    stages = []
    for j in range(4):
        c1 = clip[:, (j - 1) % 4]
        c2 = clip[:, j]
        ex = (c2[:, 0] - c1[:, 0])[:, None]
        ey = (c2[:, 1] - c1[:, 1])[:, None]
        b = ex * c1[:, 1][:, None] - ey * c1[:, 0][:, None]
        stages.append((ex, ey, b))
    return tuple(stages)


def ring_area(x: np.ndarray, y: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Masked shoelace area for padded vertex buffers."""
    k = x.shape[1]
    valid = np.arange(k)[None, :] < counts[:, None]
    counts_safe = np.maximum(counts, 1)
    sx = _prev_along_ring(x, counts_safe)
    sy = _prev_along_ring(y, counts_safe)
    terms = sx * y - x * sy
    return np.maximum(0.5 * np.where(valid, terms, 0.0).sum(axis=1), 0.0)


def quad_area(quads: np.ndarray) -> np.ndarray:
    """Shoelace area of (N, 4, 2) corner quads."""
    x, y = quads[..., 0], quads[..., 1]
    nx, ny = np.roll(x, -1, axis=1), np.roll(y, -1, axis=1)
    return np.maximum(0.5 * (x * ny - nx * y).sum(axis=1), 0.0)


def mean_weight(
    x: np.ndarray,
    y: np.ndarray,
    counts: np.ndarray,
    rho_c: np.ndarray,
    alpha: float,
    method: str = GEOMETRIC,
) -> np.ndarray:
    """Vertex-mean weight of padded polygons; nan where a vertex is degenerate."""
    k = x.shape[1]
    valid = np.arange(k)[None, :] < counts[:, None]
    rho = np.hypot(x, y)
    degenerate = (valid & (rho < DEGENERATE_DISTANCE)).any(axis=1)
    safe = np.maximum(rho, DEGENERATE_DISTANCE)
    counts_safe = np.maximum(counts, 1)
    if method == GEOMETRIC:
        mean_log = np.where(valid, np.log(safe), 0.0).sum(axis=1) / counts_safe
        out = np.exp(alpha * (np.log(rho_c) - mean_log))
    elif method == ARITHMETIC:
        out = np.where(valid, (rho_c[:, None] / safe) ** alpha, 0.0).sum(axis=1) / counts_safe
    else:
        raise ValueError(f"unsupported batch method {method!r}")
    return np.where(degenerate, np.nan, out)


class BatchEvaluator:
    """Loss, gradient, and metric evaluation against a fixed target array."""

    def __init__(self, targets: np.ndarray):
        self.targets = np.asarray(targets, dtype=np.float64)
        self.g_corners = corners(self.targets)
        self.area_g = quad_area(self.g_corners)
        self.rho_c = np.hypot(self.targets[:, 0], self.targets[:, 1])
        self.clip_const = precompute_clip(self.g_corners)
        self._mean_weight_g: dict[tuple[float, str], np.ndarray] = {}

    def _wa_g(self, alpha: float, method: str) -> np.ndarray:
        key = (alpha, method)
        if key not in self._mean_weight_g:
            gx = self.g_corners[..., 0]
            gy = self.g_corners[..., 1]
            four = np.full(len(self.targets), 4)
            self._mean_weight_g[key] = mean_weight(gx, gy, four, self.rho_c, alpha, method)
        return self._mean_weight_g[key] * self.area_g

    def scores(self, boxes: np.ndarray, alpha: float, method: str = GEOMETRIC,
               p_corners: np.ndarray | None = None):
        """(iou, ec_iou) arrays for prediction boxes against the targets."""
        if p_corners is None:
            p_corners = corners(boxes)
        x, y, counts = clip_quads_xy(p_corners[..., 0], p_corners[..., 1], self.clip_const)
        inter = ring_area(x, y, counts)
        inter = np.where(inter > AREA_EPS, inter, 0.0)
        area_p = quad_area(p_corners)
        iou = np.clip(inter / (self.area_g + area_p - inter), 0.0, 1.0)
        wa_inter = np.where(
            inter > 0.0, mean_weight(x, y, counts, self.rho_c, alpha, method) * inter, 0.0
        )
        with np.errstate(invalid="ignore"):
            ec = np.clip(wa_inter / (self._wa_g(alpha, method) + (area_p - inter)), 0.0, 1.0)
        ec = np.where(self.rho_c < DEGENERATE_DISTANCE, np.nan, ec)
        return iou, ec

    def loss(self, kind, boxes: np.ndarray, alpha: float, method: str = GEOMETRIC) -> np.ndarray:
        """Loss values, nan where the prediction box is invalid."""
        return self.loss_and_scores(kind, boxes, alpha, method)[0]

    def loss_and_scores(self, kind, boxes: np.ndarray, alpha: float, method: str = GEOMETRIC):
        """(loss, iou, ec_iou) in one pass; loss is nan for invalid boxes."""
        ok = (
            np.isfinite(boxes).all(axis=1)
            & (boxes[:, 2] > 0.0)
            & (boxes[:, 3] > 0.0)
        )
        p_corners = corners(boxes)
        iou, ec = self.scores(boxes, alpha, method, p_corners=p_corners)
        score = ec if kind.ego_centric else iou
        loss = 1.0 - score
        if kind.family in ("diou", "eiou"):
            both = np.concatenate([p_corners, self.g_corners], axis=1)
            lo = both.min(axis=1)
            hi = both.max(axis=1)
            c_l = hi[:, 0] - lo[:, 0]
            c_w = hi[:, 1] - lo[:, 1]
            dist_sq = ((boxes[:, :2] - self.targets[:, :2]) ** 2).sum(axis=1)
            loss = loss + dist_sq / (c_l**2 + c_w**2)
            if kind.family == "eiou":
                loss = loss + (boxes[:, 2] - self.targets[:, 2]) ** 2 / c_l**2
                loss = loss + (boxes[:, 3] - self.targets[:, 3]) ** 2 / c_w**2
        return np.where(ok, loss, np.nan), iou, ec

    def gradient(
        self, kind, boxes: np.ndarray, alpha: float, method: str = GEOMETRIC, h: float = 1e-4
    ) -> tuple[np.ndarray, np.ndarray]:
        """Central-difference gradients (N, 5) and a per-row finite mask."""
        grads = np.empty((boxes.shape[0], 5))
        for i in range(5):
            hi = boxes.copy()
            hi[:, i] += h
            lo = boxes.copy()
            lo[:, i] -= h
            grads[:, i] = (
                self.loss(kind, hi, alpha, method) - self.loss(kind, lo, alpha, method)
            ) / (2.0 * h)
        return grads, np.isfinite(grads).all(axis=1)
