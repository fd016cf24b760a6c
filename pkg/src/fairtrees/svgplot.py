"""Minimal deterministic SVG scatter/line plots.

The experiment exports must be byte-identical across runs, so figures are
emitted by this tiny writer (fixed coordinate formatting, no timestamps, no
library-version metadata) instead of a full plotting stack.  Each scatter
point becomes one ``<circle>`` element.
"""

WIDTH = 720
HEIGHT = 500
MARGIN = 70


def _fmt(x):
    return f"{x:.2f}"


class SvgPlot:
    def __init__(self, title="", xlabel="", ylabel=""):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self._layers = []  # (kind, xs, ys, ys2, style)

    def add_points(self, xs, ys, color="#e8701a", radius=3.0, opacity=1.0):
        self._layers.append(("points", list(xs), list(ys), None,
                             {"color": color, "r": radius, "opacity": opacity}))

    def add_line(self, xs, ys, color="#444444", width=1.5):
        self._layers.append(("line", list(xs), list(ys), None,
                             {"color": color, "w": width}))

    def add_band(self, xs, y_low, y_high, color="#cccccc", opacity=0.5):
        self._layers.append(("band", list(xs), list(y_low), list(y_high),
                             {"color": color, "opacity": opacity}))

    def _bounds(self):
        xs = [x for layer in self._layers for x in layer[1]]
        ys = [y for layer in self._layers for y in layer[2]]
        ys += [y for layer in self._layers if layer[3] for y in layer[3]]
        if not xs:
            return 0.0, 1.0, 0.0, 1.0
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if x0 == x1:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y0 == y1:
            y0, y1 = y0 - 0.5, y1 + 0.5
        pad_x = 0.04 * (x1 - x0)
        pad_y = 0.04 * (y1 - y0)
        return x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y

    def render(self) -> str:
        x0, x1, y0, y1 = self._bounds()
        inner_w = WIDTH - 2 * MARGIN
        inner_h = HEIGHT - 2 * MARGIN

        def px(x):
            return MARGIN + (x - x0) / (x1 - x0) * inner_w

        def py(y):
            return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * inner_h

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        ]
        # axes box and ticks
        out.append(f'<rect x="{MARGIN}" y="{MARGIN}" width="{inner_w}" height="{inner_h}" '
                   f'fill="none" stroke="#222222" stroke-width="1"/>')
        for i in range(5):
            fx = x0 + (x1 - x0) * i / 4
            fy = y0 + (y1 - y0) * i / 4
            tx = px(fx)
            ty = py(fy)
            out.append(f'<line x1="{_fmt(tx)}" y1="{HEIGHT - MARGIN}" x2="{_fmt(tx)}" '
                       f'y2="{HEIGHT - MARGIN + 5}" stroke="#222222"/>')
            out.append(f'<text x="{_fmt(tx)}" y="{HEIGHT - MARGIN + 18}" font-size="11" '
                       f'text-anchor="middle" font-family="sans-serif">{fx:.3f}</text>')
            out.append(f'<line x1="{MARGIN - 5}" y1="{_fmt(ty)}" x2="{MARGIN}" '
                       f'y2="{_fmt(ty)}" stroke="#222222"/>')
            out.append(f'<text x="{MARGIN - 8}" y="{_fmt(ty + 4)}" font-size="11" '
                       f'text-anchor="end" font-family="sans-serif">{fy:.3f}</text>')
        if self.title:
            out.append(f'<text x="{WIDTH // 2}" y="{MARGIN - 20}" font-size="14" '
                       f'text-anchor="middle" font-family="sans-serif">{self.title}</text>')
        if self.xlabel:
            out.append(f'<text x="{WIDTH // 2}" y="{HEIGHT - 15}" font-size="12" '
                       f'text-anchor="middle" font-family="sans-serif">{self.xlabel}</text>')
        if self.ylabel:
            out.append(f'<text x="18" y="{HEIGHT // 2}" font-size="12" text-anchor="middle" '
                       f'font-family="sans-serif" transform="rotate(-90 18 {HEIGHT // 2})">'
                       f'{self.ylabel}</text>')

        for kind, xs, ys, ys2, style in self._layers:
            if kind == "band" and xs:
                upper = [f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys2)]
                lower = [f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(reversed(xs), reversed(ys))]
                out.append(f'<polygon points="{" ".join(upper + lower)}" '
                           f'fill="{style["color"]}" fill-opacity="{style["opacity"]}" stroke="none"/>')
            elif kind == "line" and xs:
                pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
                out.append(f'<polyline points="{pts}" fill="none" stroke="{style["color"]}" '
                           f'stroke-width="{style["w"]}"/>')
            elif kind == "points":
                for x, y in zip(xs, ys):
                    out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="{style["r"]}" '
                               f'fill="{style["color"]}" fill-opacity="{style["opacity"]}"/>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def write(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.render())
