"""Tiny deterministic SVG plotting: line charts and contour-style overlays.

No plotting dependency; output bytes are a pure function of the input data,
so figures can be golden-tested.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


@dataclass
class SvgCanvas:
    """Fixed-size canvas mapping data coordinates to pixels."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    width: int = 640
    height: int = 480
    margin: int = 54
    title: str = ""
    x_label: str = ""
    y_label: str = ""
    elements: list[str] = field(default_factory=list)

    def _px(self, x: float, y: float) -> tuple[float, float]:
        x0, x1 = self.x_range
        y0, y1 = self.y_range
        w = self.width - 2 * self.margin
        h = self.height - 2 * self.margin
        px = self.margin + (x - x0) / (x1 - x0) * w
        py = self.height - self.margin - (y - y0) / (y1 - y0) * h
        return px, py

    def polyline(self, xs, ys, color: str = "#1f77b4", width: float = 1.5,
                 dashed: bool = False) -> None:
        pts = " ".join(f"{_fmt(px)},{_fmt(py)}"
                       for px, py in (self._px(x, y) for x, y in zip(xs, ys)))
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        self.elements.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{_fmt(width)}"{dash}/>')

    def circle_outline(self, cx: float, cy: float, r_data: float,
                       color: str = "#444444", width: float = 1.5) -> None:
        """Circle given in data units (assumes equal x/y scaling matters to
        the caller; rendered as a sampled polyline so anisotropic axes still
        show the true locus)."""
        t = np.linspace(0.0, 2.0 * np.pi, 181)
        self.polyline(cx + r_data * np.cos(t), cy + r_data * np.sin(t),
                      color=color, width=width)

    def marker(self, x: float, y: float, color: str = "#000000",
               label: str = "") -> None:
        px, py = self._px(x, y)
        self.elements.append(
            f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="4" fill="{color}"/>')
        if label:
            self.elements.append(
                f'<text x="{_fmt(px + 7)}" y="{_fmt(py - 7)}" '
                f'font-size="12" fill="{color}">{label}</text>')

    def legend(self, entries: list[tuple[str, str]]) -> None:
        x = self.width - self.margin - 150
        y = self.margin + 8
        for i, (label, color) in enumerate(entries):
            yy = y + 16 * i
            self.elements.append(
                f'<line x1="{x}" y1="{yy}" x2="{x + 22}" y2="{yy}" '
                f'stroke="{color}" stroke-width="2"/>')
            self.elements.append(
                f'<text x="{x + 28}" y="{yy + 4}" font-size="12" '
                f'fill="#222222">{label}</text>')

    def _axes(self) -> list[str]:
        out = []
        m, w, h = self.margin, self.width, self.height
        out.append(f'<rect x="{m}" y="{m}" width="{w - 2 * m}" '
                   f'height="{h - 2 * m}" fill="none" stroke="#222222"/>')
        x0, x1 = self.x_range
        y0, y1 = self.y_range
        for i in range(5):
            fx = x0 + (x1 - x0) * i / 4
            fy = y0 + (y1 - y0) * i / 4
            px, _ = self._px(fx, y0)
            _, py = self._px(x0, fy)
            out.append(f'<line x1="{_fmt(px)}" y1="{h - m}" x2="{_fmt(px)}" '
                       f'y2="{h - m + 5}" stroke="#222222"/>')
            out.append(f'<text x="{_fmt(px)}" y="{h - m + 18}" font-size="11" '
                       f'text-anchor="middle" fill="#222222">{_fmt(fx)}</text>')
            out.append(f'<line x1="{m - 5}" y1="{_fmt(py)}" x2="{m}" '
                       f'y2="{_fmt(py)}" stroke="#222222"/>')
            out.append(f'<text x="{m - 8}" y="{_fmt(py + 4)}" font-size="11" '
                       f'text-anchor="end" fill="#222222">{_fmt(fy)}</text>')
        if self.title:
            out.append(f'<text x="{w // 2}" y="{m - 14}" font-size="14" '
                       f'text-anchor="middle" fill="#000000">{self.title}</text>')
        if self.x_label:
            out.append(f'<text x="{w // 2}" y="{h - 10}" font-size="12" '
                       f'text-anchor="middle" fill="#000000">{self.x_label}</text>')
        if self.y_label:
            out.append(f'<text x="16" y="{h // 2}" font-size="12" '
                       f'text-anchor="middle" fill="#000000" '
                       f'transform="rotate(-90 16 {h // 2})">{self.y_label}</text>')
        return out

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">')
        body = [f'<rect width="{self.width}" height="{self.height}" fill="#ffffff"/>']
        body.extend(self._axes())
        body.extend(self.elements)
        return "\n".join([head, *body, "</svg>"]) + "\n"


def line_chart(series: list[tuple[str, Array]], title: str, x_label: str,
               y_label: str, x0: int = 1) -> str:
    """Indexed line chart; each series is (label, values)."""
    all_vals = np.concatenate([np.asarray(v, dtype=float) for _n, v in series])
    lo, hi = float(np.min(all_vals)), float(np.max(all_vals))
    pad = 0.05 * max(hi - lo, 1e-9)
    n = max(len(v) for _n, v in series)
    canvas = SvgCanvas(x_range=(x0, x0 + n - 1), y_range=(lo - pad, hi + pad),
                       title=title, x_label=x_label, y_label=y_label)
    legend = []
    for k, (label, vals) in enumerate(series):
        color = _PALETTE[k % len(_PALETTE)]
        xs = np.arange(x0, x0 + len(vals))
        canvas.polyline(xs, np.asarray(vals, dtype=float), color=color)
        legend.append((label, color))
    canvas.legend(legend)
    return canvas.render()


def fan_contour_chart(theta_true: Array, theta_perceived: Array, c: Array,
                      optimum_true: Array, optimum_perceived: Array,
                      title: str = "perceived vs true objective") -> str:
    """Level sets of both objectives, the operating envelope, both optima.

    Level sets of theta1*m + theta2*m^2 + theta3*p are parabolas in the
    (m, p) plane, sampled directly.
    """
    cm, cp, cr = c
    canvas = SvgCanvas(x_range=(cm - cr - 0.5, cm + cr + 0.5),
                       y_range=(cp - cr - 0.5, cp + cr + 0.5),
                       title=title, x_label="mass flow", y_label="static pressure")
    ms = np.linspace(cm - cr - 0.5, cm + cr + 0.5, 121)

    def add_levels(theta: Array, anchor: Array, color: str, dashed: bool) -> None:
        base = theta[0] * anchor[0] + theta[1] * anchor[0] ** 2 + theta[2] * anchor[1]
        for level in (base - 3.0, base, base + 3.0):
            ps = (level - theta[0] * ms - theta[1] * ms ** 2) / theta[2]
            keep = (ps >= canvas.y_range[0]) & (ps <= canvas.y_range[1])
            if np.any(keep):
                canvas.polyline(ms[keep], ps[keep], color=color, width=1.0,
                                dashed=dashed)

    add_levels(np.asarray(theta_true, float), np.asarray(optimum_true, float),
               "#1f77b4", dashed=False)
    add_levels(np.asarray(theta_perceived, float), np.asarray(optimum_perceived, float),
               "#d62728", dashed=True)
    canvas.circle_outline(cm, cp, cr)
    canvas.marker(optimum_true[0], optimum_true[1], "#1f77b4", "true optimum")
    canvas.marker(optimum_perceived[0], optimum_perceived[1], "#d62728",
                  "perceived optimum")
    canvas.legend([("true objective", "#1f77b4"),
                   ("perceived objective", "#d62728")])
    return canvas.render()
