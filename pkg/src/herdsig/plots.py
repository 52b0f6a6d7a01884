"""Minimal static SVG charts (no rendering dependency, diff-friendly)."""
from __future__ import annotations

from xml.sax.saxutils import escape

WIDTH = 480
HEIGHT = 360
MARGIN = 48


def _num(v: float) -> str:
    return f"{v:.2f}"


def _frame(body: list, title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>',
                      f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-family="sans-serif" '
                      f'font-size="14">{escape(title)}</text>', *body, "</svg>"]) + "\n"


def line_chart(xs, ys, title: str = "", xlabel: str = "", ylabel: str = "",
               diagonal: bool = False) -> str:
    """Polyline over the unit square, as used for ROC curves."""
    w = WIDTH - 2 * MARGIN
    h = HEIGHT - 2 * MARGIN

    def px(x, y):
        return MARGIN + x * w, HEIGHT - MARGIN - y * h

    body = [f'<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{h}" fill="none" stroke="black"/>']
    if diagonal:
        (x0, y0), (x1, y1) = px(0, 0), px(1, 1)
        body.append(f'<line x1="{_num(x0)}" y1="{_num(y0)}" x2="{_num(x1)}" y2="{_num(y1)}" '
                    'stroke="gray" stroke-dasharray="4 4"/>')
    pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in (px(x, y) for x, y in zip(xs, ys)))
    body.append(f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>')
    body.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    body.append(f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-family="sans-serif" '
                f'font-size="12" transform="rotate(-90 14 {HEIGHT / 2})">{escape(ylabel)}</text>')
    return _frame(body, title)


def bar_chart(labels, values, title: str = "") -> str:
    """Horizontal bars, longest first as given."""
    labels = list(labels)
    values = [float(v) for v in values]
    top = max(values) if values and max(values) > 0 else 1.0
    n = max(len(values), 1)
    row = (HEIGHT - 2 * MARGIN) / n
    left = MARGIN + 80
    span = WIDTH - left - MARGIN
    body = []
    for i, (lab, v) in enumerate(zip(labels, values)):
        y = MARGIN + i * row
        body.append(f'<text x="{left - 6}" y="{_num(y + row * 0.65)}" text-anchor="end" '
                    f'font-family="sans-serif" font-size="11">{escape(str(lab))}</text>')
        body.append(f'<rect x="{left}" y="{_num(y + row * 0.15)}" width="{_num(span * v / top)}" '
                    f'height="{_num(row * 0.7)}" fill="steelblue"/>')
        body.append(f'<text x="{_num(left + span * v / top + 4)}" y="{_num(y + row * 0.65)}" '
                    f'font-family="sans-serif" font-size="10">{v:.4g}</text>')
    return _frame(body, title)
