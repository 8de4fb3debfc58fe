"""Box-regression losses built on IoU / EC-IoU plus distance regularizers.

Six kinds: {IoU, DIoU, EIoU} x {plain, ego-centric}. The loss is
1 - M + R, where M is the (ego-centric) IoU and R the family's
regularizer. Gradients are central finite differences over the five box
parameters; the clipping-based metrics are piecewise smooth, so numeric
differentiation is the honest choice at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import OrientedBoxBEV, enclosing_aabb
from .metrics import ec_iou_bev, iou_bev
from .weighting import WeightConfig

FAMILIES = ("iou", "diou", "eiou")


class NonFiniteGradientError(RuntimeError):
    """A finite-difference probe failed or produced a non-finite value."""


@dataclass(frozen=True)
class LossKind:
    """One of the six loss functions: a family plus the ego-centric switch."""

    family: str
    ego_centric: bool = False

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown loss family {self.family!r}")

    @property
    def name(self) -> str:
        return ("ec-" if self.ego_centric else "") + self.family

    @classmethod
    def from_name(cls, name: str) -> "LossKind":
        key = name.strip().lower()
        ego = key.startswith("ec-")
        family = key[3:] if ego else key
        if family not in FAMILIES:
            raise ValueError(f"unknown loss kind {name!r}")
        return cls(family=family, ego_centric=ego)


ALL_KINDS = tuple(
    LossKind(family=f, ego_centric=e) for e in (False, True) for f in FAMILIES
)


@dataclass(frozen=True)
class GradientVector:
    """Partial derivatives of a loss over (x, y, l, w, theta)."""

    d_x: float
    d_y: float
    d_l: float
    d_w: float
    d_theta: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.d_x, self.d_y, self.d_l, self.d_w, self.d_theta)


def regularizer(kind: LossKind, p: OrientedBoxBEV, g: OrientedBoxBEV) -> float:
    """Center-distance / dimension penalty for the DIoU and EIoU families."""
    if kind.family == "iou":
        return 0.0
    min_x, min_y, max_x, max_y = enclosing_aabb(p, g)
    c_l = max_x - min_x
    c_w = max_y - min_y
    r = ((p.x - g.x) ** 2 + (p.y - g.y) ** 2) / (c_l**2 + c_w**2)
    if kind.family == "eiou":
        r += (p.l - g.l) ** 2 / c_l**2 + (p.w - g.w) ** 2 / c_w**2
    return r


def loss_value(
    kind: LossKind, p: OrientedBoxBEV, g: OrientedBoxBEV, cfg: WeightConfig
) -> float:
    """1 - M + R with M the matched metric and R the family regularizer."""
    score = ec_iou_bev(p, g, cfg) if kind.ego_centric else iou_bev(p, g)
    return 1.0 - score.value + regularizer(kind, p, g)


def loss_gradient(
    kind: LossKind,
    p: OrientedBoxBEV,
    g: OrientedBoxBEV,
    cfg: WeightConfig,
    h: float = 1e-4,
) -> GradientVector:
    """Central-difference gradient of the loss over p's five parameters."""
    if h <= 0.0:
        raise ValueError("step h must be positive")
    params = [p.x, p.y, p.l, p.w, p.theta]
    grads = []
    for i in range(5):
        probes = []
        for delta in (h, -h):
            shifted = list(params)
            shifted[i] += delta
            try:
                probes.append(loss_value(kind, OrientedBoxBEV(*shifted), g, cfg))
            except ValueError as exc:
                raise NonFiniteGradientError(
                    f"probe at parameter {i} offset {delta:+g} failed: {exc}"
                ) from exc
        grads.append((probes[0] - probes[1]) / (2.0 * h))
    vec = GradientVector(*grads)
    if not all(math.isfinite(v) for v in vec.as_tuple()):
        raise NonFiniteGradientError(f"non-finite gradient {vec}")
    return vec
