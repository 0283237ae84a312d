"""SVG scene renderer with a fixed color code.

lanes: black polylines; other agents: blue dots; focal history: cyan dots;
predicted trajectories: yellow dots; ground truth: red polyline; prediction
endpoints: magenta; ground-truth endpoint: green.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import quoteattr

import numpy as np

from .scenario import Scenario

COLORS = {
    "lane": "black",
    "agent": "blue",
    "history": "cyan",
    "prediction": "yellow",
    "ground-truth": "red",
    "pred-endpoint": "magenta",
    "gt-endpoint": "green",
}
MARGIN_M = 10.0


@dataclass(frozen=True)
class Viewport:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    scale: float  # pixels per meter

    @property
    def width(self) -> float:
        return (self.x_max - self.x_min) * self.scale

    @property
    def height(self) -> float:
        return (self.y_max - self.y_min) * self.scale

    def to_svg(self, pts) -> np.ndarray:
        """World meters to SVG pixels (y axis flipped)."""
        pts = np.asarray(pts, dtype=np.float64)
        return np.stack([(pts[..., 0] - self.x_min) * self.scale, (self.y_max - pts[..., 1]) * self.scale], axis=-1)


def fit_viewport(point_sets, scale: float = 8.0, margin: float = MARGIN_M) -> Viewport:
    pts = np.concatenate([np.asarray(p, dtype=np.float64).reshape(-1, 2) for p in point_sets if len(p)])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return Viewport(lo[0] - margin, lo[1] - margin, hi[0] + margin, hi[1] + margin, scale)


def _pts_attr(px: np.ndarray) -> str:
    return " ".join(f"{x:.3f},{y:.3f}" for x, y in px)


def _circle(cls: str, p, r: float) -> str:
    return f'<circle class="{cls}" cx="{p[0]:.3f}" cy="{p[1]:.3f}" r="{r:.2f}" fill="{COLORS[cls]}"/>'


def render_svg(s: Scenario, trajectories=None, scale: float = 8.0, dot_radius: float = 2.0) -> str:
    """SVG document for ``s``; ``trajectories`` are world-frame ``(K, T, 2)`` or None."""
    H = s.H
    focal = s.focal
    hist = focal.states[:H, :2][focal.valid()[:H]].astype(np.float64)
    others = [tr.states[:H, :2][tr.valid()[:H]].astype(np.float64) for tr in s.tracks if tr.agent_id != focal.agent_id]
    lanes = [np.asarray(l.points, dtype=np.float64) for l in s.map.lanes]
    gt = None
    preds = None
    if trajectories is not None:
        preds = np.asarray(trajectories, dtype=np.float64)
        fut, valid = s.focal_future()
        gt = fut[valid]
    sets = lanes + others + [hist]
    if preds is not None:
        sets += [preds.reshape(-1, 2), gt]
    vp = fit_viewport(sets, scale)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{vp.width:.3f}" height="{vp.height:.3f}" '
        f'viewBox="0 0 {vp.width:.3f} {vp.height:.3f}" data-x-min="{float(vp.x_min)!r}" data-y-max="{float(vp.y_max)!r}" '
        f'data-scale="{float(vp.scale)!r}">',
        f'<title>{s.scenario_id}</title>',
        f'<rect class="background" x="0" y="0" width="{vp.width:.3f}" height="{vp.height:.3f}" fill="white"/>',
        '<g id="lanes">',
    ]
    for lane, pts in zip(s.map.lanes, lanes):
        out.append(f'<polyline class="lane" data-id={quoteattr(lane.lane_id)} points="{_pts_attr(vp.to_svg(pts))}" '
                   f'fill="none" stroke="{COLORS["lane"]}" stroke-width="1"/>')
    out.append('</g>')
    out.append('<g id="agents">')
    for pts in others:
        out.extend(_circle("agent", p, dot_radius) for p in vp.to_svg(pts))
    out.append('</g>')
    out.append('<g id="history">')
    out.extend(_circle("history", p, dot_radius) for p in vp.to_svg(hist))
    out.append('</g>')
    if preds is not None:
        for k, traj in enumerate(preds):
            out.append(f'<g class="prediction-series" data-mode="{k}">')
            out.extend(_circle("prediction", p, dot_radius * 0.75) for p in vp.to_svg(traj))
            out.append('</g>')
        if len(gt):
            out.append(f'<polyline class="ground-truth" points="{_pts_attr(vp.to_svg(gt))}" fill="none" '
                       f'stroke="{COLORS["ground-truth"]}" stroke-width="1.5"/>')
        out.append('<g id="endpoints">')
        out.extend(_circle("pred-endpoint", p, dot_radius * 1.5) for p in vp.to_svg(preds[:, -1]))
        if len(gt):
            out.append(_circle("gt-endpoint", vp.to_svg(gt[-1]), dot_radius * 1.5))
        out.append('</g>')
    out.append('</svg>')
    return "\n".join(out) + "\n"
