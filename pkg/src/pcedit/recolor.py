"""Color-space editing inside oriented boxes.

Every operation scopes itself to the points of one spatial box (or, for
substitution, a joined box list), computes its statistics over the
pre-edit colors exactly once, and touches nothing outside the box.  The
color model: statistics and mapping run in float64, results round
half-to-even and clamp back to uint8 storage.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .boxfile import JoinedBox
from .cloud import (ColorSphere, OrientedBox, PointCloud, RgbAabb,
                    mean_color, quantize_colors, rgb_color_aabb)
from .errors import (EmptySelection, NoEnabledBoxes, PipelineStepError)

PROJECT_TO_SURFACE = "project_to_surface"
NEAREST_INLIER = "nearest_inlier_spatial"

#: max displacement quantization can add on top of the sphere radius (√3/2)
ROUNDING_SLACK = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class SphereParams:
    """How to fit and apply a color sphere.

    radius_mode "percentile" derives the radius from the distance
    distribution itself (nearest-rank, default q=90); "absolute" uses
    ``radius`` directly.  Outliers are either projected radially onto the
    sphere surface or take the color of the spatially nearest inlier.
    """

    radius_mode: str = "percentile"
    percentile: float = 90.0
    radius: float = 0.0
    outlier_mode: str = PROJECT_TO_SURFACE

    def __post_init__(self):
        if self.radius_mode not in ("percentile", "absolute"):
            raise ValueError(f"unknown radius_mode {self.radius_mode!r}")
        if self.radius_mode == "percentile" and \
                not 0.0 < self.percentile <= 100.0:
            raise ValueError(
                f"percentile must be in (0, 100], got {self.percentile}")
        if self.radius_mode == "absolute" and self.radius < 0:
            raise ValueError(f"radius must be >= 0, got {self.radius}")
        if self.outlier_mode not in (PROJECT_TO_SURFACE, NEAREST_INLIER):
            raise ValueError(f"unknown outlier_mode {self.outlier_mode!r}")


@dataclass(frozen=True)
class RemapParams:
    """Target RGB box for the affine remap; must sit inside [0,255]^3."""

    target: RgbAabb

    def __post_init__(self):
        lo, hi = self.target.min, self.target.max
        if min(lo) < 0 or max(hi) > 255:
            raise ValueError(f"target box [{lo}, {hi}] exceeds [0, 255]^3")


def fit_color_sphere(colors, params: SphereParams) -> ColorSphere:
    """Mean-color center; radius from the nearest-rank percentile of
    distances (or taken verbatim in absolute mode)."""
    center = mean_color(colors)
    if params.radius_mode == "absolute":
        return ColorSphere(center=tuple(center), radius=params.radius)
    dists = np.sort(ColorSphere(center=tuple(center), radius=0.0)
                    .distances(colors))
    rank = math.ceil(params.percentile / 100.0 * dists.size)
    return ColorSphere(center=tuple(center), radius=float(dists[rank - 1]))


def _in_box_or_raise(cloud: PointCloud, box: OrientedBox) -> np.ndarray:
    mask = box.contains(cloud.positions)
    if not mask.any():
        raise EmptySelection(f"box {box.label!r} contains no points")
    return mask


def _nearest_inlier_rows(positions: np.ndarray, inlier_rows: np.ndarray,
                         outlier_rows: np.ndarray) -> np.ndarray:
    """Index (into ``inlier_rows``) of each outlier's nearest inlier.

    Distance ties resolve to the lowest point index.  Queries saturate:
    if every returned neighbor of a query ties at the minimum distance we
    re-query with a larger k until the tie set is fully visible.
    """
    tree = cKDTree(positions[inlier_rows])
    queries = positions[outlier_rows]
    n_in = inlier_rows.size
    chosen = np.full(outlier_rows.size, -1, dtype=np.int64)
    pending = np.arange(outlier_rows.size)
    k = min(4, n_in)
    while pending.size:
        dist, idx = tree.query(queries[pending], k=k)
        if k == 1:
            dist = dist[:, None]
            idx = idx[:, None]
        tied = dist <= dist[:, :1]      # exact ties with the closest
        saturated = tied.all(axis=1) & (k < n_in)
        ready = ~saturated
        if ready.any():
            candidates = np.where(tied[ready], idx[ready], np.iinfo(np.int64).max)
            chosen[pending[ready]] = candidates.min(axis=1)
        pending = pending[saturated]
        k = min(k * 4, n_in)
    return chosen


def _apply_sphere(cloud: PointCloud, box: OrientedBox, params: SphereParams,
                  delete: bool):
    mask = _in_box_or_raise(cloud, box)
    rows = np.flatnonzero(mask)
    colors_in = cloud.colors[rows].astype(np.float64)
    sphere = fit_color_sphere(colors_in, params)
    dists = sphere.distances(colors_in)
    outlier = dists > sphere.radius

    if delete:
        keep = np.ones(cloud.count, dtype=bool)
        keep[rows[outlier]] = False
        return cloud.take(keep), sphere, rows.size, 0, int(outlier.sum())

    out_rows = rows[outlier]
    if out_rows.size:
        new_colors = cloud.colors.copy()
        if params.outlier_mode == PROJECT_TO_SURFACE:
            center = np.asarray(sphere.center)
            if sphere.radius == 0.0:
                projected = np.broadcast_to(center, (out_rows.size, 3))
            else:
                delta = colors_in[outlier] - center
                scale = sphere.radius / dists[outlier]
                projected = center + delta * scale[:, None]
            new_colors[out_rows] = quantize_colors(projected)
        else:
            inlier_rel = np.flatnonzero(~outlier)
            if inlier_rel.size == 0:
                new_colors[out_rows] = quantize_colors(
                    np.broadcast_to(sphere.center, (out_rows.size, 3)))
            else:
                nearest = _nearest_inlier_rows(cloud.positions,
                                               rows[inlier_rel],
                                               out_rows)
                new_colors[out_rows] = cloud.colors[rows[inlier_rel][nearest]]
        result = cloud.with_colors(new_colors)
    else:
        result = cloud
    return result, sphere, rows.size, int(outlier.sum()), 0


def recolor_spherical(cloud: PointCloud, box: OrientedBox,
                      params: SphereParams | None = None) -> PointCloud:
    """Recolor in-box color outliers; inliers and out-of-box points as-is."""
    result, *_ = _apply_sphere(cloud, box, params or SphereParams(),
                               delete=False)
    return result


def delete_spherical_outliers(cloud: PointCloud, box: OrientedBox,
                              params: SphereParams | None = None
                              ) -> PointCloud:
    """Drop in-box points whose color lies strictly outside the sphere."""
    result, *_ = _apply_sphere(cloud, box, params or SphereParams(),
                               delete=True)
    return result


def _apply_remap(cloud: PointCloud, box: OrientedBox, params: RemapParams,
                 delete: bool):
    mask = _in_box_or_raise(cloud, box)
    rows = np.flatnonzero(mask)
    colors_in = cloud.colors[rows].astype(np.float64)
    source = rgb_color_aabb(colors_in)

    if delete:
        inside = params.target.contains(colors_in)
        keep = np.ones(cloud.count, dtype=bool)
        keep[rows[~inside]] = False
        return cloud.take(keep), source, rows.size, 0, int((~inside).sum())

    s_cent = np.asarray(source.centroid)
    s_ext = np.asarray(source.extent)
    t_cent = np.asarray(params.target.centroid)
    t_ext = np.asarray(params.target.extent)
    gain = np.divide(t_ext, s_ext, out=np.zeros(3), where=s_ext > 0)
    mapped = t_cent + (colors_in - s_cent) * gain
    new_colors = cloud.colors.copy()
    new_colors[rows] = quantize_colors(mapped)
    return (cloud.with_colors(new_colors), source, rows.size,
            rows.size, 0)


def recolor_rgb_box_remap(cloud: PointCloud, box: OrientedBox,
                          params: RemapParams) -> PointCloud:
    """Affinely map in-box colors from their fitted RGB box to the target."""
    result, *_ = _apply_remap(cloud, box, params, delete=False)
    return result


def delete_rgb_box_outliers(cloud: PointCloud, box: OrientedBox,
                            params: RemapParams) -> PointCloud:
    """Drop in-box points whose color falls outside the target RGB box."""
    result, *_ = _apply_remap(cloud, box, params, delete=True)
    return result


def _apply_substitute(cloud: PointCloud, joined: Sequence[JoinedBox]):
    active = [j for j in joined if j.enabled and j.color is not None]
    if not active:
        raise NoEnabledBoxes(
            "substitution needs at least one enabled box with a palette "
            "color")
    assigned = np.zeros(cloud.count, dtype=bool)
    new_colors = cloud.colors.copy()
    for j in active:
        mask = j.box.contains(cloud.positions) & ~assigned
        new_colors[mask] = np.asarray(j.color, dtype=np.uint8)
        assigned |= mask
    survivors = cloud.with_colors(new_colors).take(assigned)
    return survivors, cloud.count, int(assigned.sum()), \
        int(cloud.count - assigned.sum())


def recolor_substitute(cloud: PointCloud,
                       joined: Sequence[JoinedBox]) -> PointCloud:
    """Flat semantic coloring: each point keeps the color of the first
    enabled colored box containing it; everything else is removed."""
    result, *_ = _apply_substitute(cloud, joined)
    return result


# --- pipeline ---------------------------------------------------------------

@dataclass(frozen=True)
class SphericalRecolorStep:
    box: OrientedBox
    params: SphereParams = field(default_factory=SphereParams)
    op = "recolor_spherical"


@dataclass(frozen=True)
class SphericalDeleteStep:
    box: OrientedBox
    params: SphereParams = field(default_factory=SphereParams)
    op = "delete_spherical_outliers"


@dataclass(frozen=True)
class RgbRemapStep:
    box: OrientedBox
    params: RemapParams
    op = "recolor_rgb_box_remap"


@dataclass(frozen=True)
class RgbDeleteStep:
    box: OrientedBox
    params: RemapParams
    op = "delete_rgb_box_outliers"


@dataclass(frozen=True)
class SubstituteStep:
    joined: tuple[JoinedBox, ...]
    op = "recolor_substitute"

    def __post_init__(self):
        object.__setattr__(self, "joined", tuple(self.joined))


@dataclass
class StepReport:
    """Per-step accounting plus the statistics fitted for the step."""

    op: str
    box_label: str | None
    points_examined: int
    points_recolored: int
    points_deleted: int
    sphere_center: tuple[float, float, float] | None = None
    sphere_radius: float | None = None
    source_min: tuple[float, float, float] | None = None
    source_max: tuple[float, float, float] | None = None


@dataclass
class EditReport:
    input_count: int
    output_count: int
    steps: list[StepReport] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "input_count": self.input_count,
            "output_count": self.output_count,
            "steps": [s.__dict__ for s in self.steps],
        }, indent=2, sort_keys=True)

    def to_table(self) -> str:
        header = f"{'step':>4}  {'op':<26} {'box':<16} " \
                 f"{'examined':>9} {'recolored':>9} {'deleted':>9}"
        lines = [header, "-" * len(header)]
        for i, s in enumerate(self.steps):
            lines.append(
                f"{i:>4}  {s.op:<26} {(s.box_label or '-'):<16} "
                f"{s.points_examined:>9} {s.points_recolored:>9} "
                f"{s.points_deleted:>9}")
        lines.append(f"points: {self.input_count} in, "
                     f"{self.output_count} out")
        return "\n".join(lines)


def _run_step(cloud: PointCloud, step):
    if isinstance(step, (SphericalRecolorStep, SphericalDeleteStep)):
        delete = isinstance(step, SphericalDeleteStep)
        result, sphere, examined, recolored, deleted = _apply_sphere(
            cloud, step.box, step.params, delete=delete)
        report = StepReport(op=step.op, box_label=step.box.label,
                            points_examined=examined,
                            points_recolored=recolored,
                            points_deleted=deleted,
                            sphere_center=sphere.center,
                            sphere_radius=sphere.radius)
    elif isinstance(step, (RgbRemapStep, RgbDeleteStep)):
        delete = isinstance(step, RgbDeleteStep)
        result, source, examined, recolored, deleted = _apply_remap(
            cloud, step.box, step.params, delete=delete)
        report = StepReport(op=step.op, box_label=step.box.label,
                            points_examined=examined,
                            points_recolored=recolored,
                            points_deleted=deleted,
                            source_min=source.min, source_max=source.max)
    elif isinstance(step, SubstituteStep):
        result, examined, recolored, deleted = _apply_substitute(
            cloud, step.joined)
        report = StepReport(op=step.op, box_label=None,
                            points_examined=examined,
                            points_recolored=recolored,
                            points_deleted=deleted)
    else:
        raise TypeError(f"unknown pipeline step {step!r}")
    return result, report


def apply_pipeline(cloud: PointCloud, steps: Sequence
                   ) -> tuple[PointCloud, EditReport]:
    """Run edit steps in order, each consuming the previous output.

    The first failing step aborts the pipeline with a PipelineStepError
    carrying the step index and the underlying error.
    """
    report = EditReport(input_count=cloud.count, output_count=cloud.count)
    current = cloud
    for i, step in enumerate(steps):
        try:
            current, step_report = _run_step(current, step)
        except PipelineStepError:
            raise
        except Exception as exc:
            raise PipelineStepError(i, getattr(step, "op", str(step)),
                                    exc) from exc
        report.steps.append(step_report)
    report.output_count = current.count
    return current, report
