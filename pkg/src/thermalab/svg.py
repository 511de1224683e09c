"""A four-panel SVG summary page, written by hand so the bytes are reproducible."""

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["render_report"]

PANEL_W, PANEL_H = 460, 320
MARGIN = dict(left=62, right=16, top=34, bottom=44)
PALETTE = {"data": "#1f4e79", "a1": "#c0392b", "a_half": "#27ae60", "eq": "#555555",
           "band": "#9dc3e6", "grid": "#dddddd", "nan": "#f0f0f0"}


def _num(x):
    return "%.6g" % x


def _tick(x):
    return "%.4g" % x


class _Panel:
    def __init__(self, col, row, title, xlabel, ylabel, xlim, ylim):
        self.x0 = col * PANEL_W
        self.y0 = row * PANEL_H
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.xlim = _pad(xlim)
        self.ylim = _pad(ylim)
        self.parts = []

    @property
    def plot_box(self):
        left = self.x0 + MARGIN["left"]
        top = self.y0 + MARGIN["top"]
        return left, top, PANEL_W - MARGIN["left"] - MARGIN["right"], \
            PANEL_H - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x, y):
        left, top, w, h = self.plot_box
        fx = (np.asarray(x, dtype=float) - self.xlim[0]) / (self.xlim[1] - self.xlim[0])
        fy = (np.asarray(y, dtype=float) - self.ylim[0]) / (self.ylim[1] - self.ylim[0])
        return left + fx * w, top + (1.0 - fy) * h

    def polyline(self, x, y, color, width=1.5, dash=None):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if ok.sum() < 2:
            return
        px, py = self.px(x[ok], y[ok])
        pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in zip(px, py))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}"'
                          f'{extra} points="{pts}"/>')

    def band(self, x, lo, hi, color):
        px, plo = self.px(x, lo)
        _, phi = self.px(x, hi)
        pts = [f"{_num(a)},{_num(b)}" for a, b in zip(px, phi)]
        pts += [f"{_num(a)},{_num(b)}" for a, b in zip(px[::-1], plo[::-1])]
        self.parts.append(f'<polygon fill="{color}" fill-opacity="0.6" stroke="none" '
                          f'points="{" ".join(pts)}"/>')

    def rect(self, x0, y0, x1, y1, fill, stroke="none"):
        ax, ay = self.px(x0, y1)
        bx, by = self.px(x1, y0)
        self.parts.append(f'<rect x="{_num(ax)}" y="{_num(ay)}" width="{_num(bx - ax)}" '
                          f'height="{_num(by - ay)}" fill="{fill}" stroke="{stroke}"/>')

    def points(self, x, y, color, r=3.5):
        for a, b in zip(*self.px(x, y)):
            self.parts.append(f'<circle cx="{_num(a)}" cy="{_num(b)}" r="{r}" fill="{color}"/>')

    def text(self, x, y, s, size=11, anchor="start", color="#222222"):
        self.parts.append(f'<text x="{_num(x)}" y="{_num(y)}" font-size="{size}" '
                          f'text-anchor="{anchor}" fill="{color}">{escape(s)}</text>')

    def legend(self, entries):
        left, top, w, _ = self.plot_box
        for i, (label, color) in enumerate(entries):
            y = top + 12 + 14 * i
            self.parts.append(f'<line x1="{_num(left + w - 118)}" y1="{_num(y - 4)}" '
                              f'x2="{_num(left + w - 100)}" y2="{_num(y - 4)}" stroke="{color}" '
                              f'stroke-width="2"/>')
            self.text(left + w - 96, y, label, size=10)

    def render(self, panel_id):
        left, top, w, h = self.plot_box
        head = [f'<g id="{panel_id}">',
                f'<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="white" '
                f'stroke="#333333"/>']
        axes = []
        for frac in (0.0, 0.5, 1.0):
            xv = self.xlim[0] + frac * (self.xlim[1] - self.xlim[0])
            yv = self.ylim[0] + frac * (self.ylim[1] - self.ylim[0])
            anchor = {0.0: "start", 0.5: "middle", 1.0: "end"}[frac]
            axes.append(f'<text x="{_num(left + frac * w)}" y="{_num(top + h + 14)}" '
                        f'font-size="10" text-anchor="{anchor}">{_tick(xv)}</text>')
            axes.append(f'<text x="{_num(left - 4)}" y="{_num(top + (1 - frac) * h + 3)}" '
                        f'font-size="10" text-anchor="end">{_tick(yv)}</text>')
        tail = []
        self.text(self.x0 + PANEL_W / 2, self.y0 + 20, self.title, size=13, anchor="middle")
        self.text(left + w / 2, top + h + 32, self.xlabel, anchor="middle")
        tail.append(f'<text x="{_num(self.x0 + 14)}" y="{_num(top + h / 2)}" font-size="11" '
                    f'text-anchor="middle" transform="rotate(-90 {_num(self.x0 + 14)} '
                    f'{_num(top + h / 2)})">{escape(self.ylabel)}</text>')
        return "\n".join(head + self.parts + axes + tail + ["</g>"])


def _pad(lim):
    lo, hi = float(lim[0]), float(lim[1])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return 0.0, 1.0
    if hi <= lo:
        span = abs(lo) if lo else 1.0
        return lo - 0.5 * span, hi + 0.5 * span
    return lo, hi


def _finite_range(*arrays):
    vals = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    pad = 0.05 * (hi - lo) if hi > lo else 0.0
    return lo - pad, hi + pad


def _spacing_panel(spacing):
    s = spacing["s"]
    emp = spacing["density_empirical"]
    half = 0.5 * (s[1] - s[0]) if s.size > 1 else 0.05
    p = _Panel(0, 0, "Nearest-neighbour spacings", "s", "P(s)",
               (0.0, float(s[-1] + half)), (0.0, _finite_range(emp, spacing["density_wigner"])[1]))
    for x, y in zip(s, emp):
        p.rect(x - half, 0.0, x + half, y, PALETTE["band"], stroke="#6a9ccc")
    p.polyline(s, spacing["density_wigner"], PALETTE["a1"], width=2)
    p.legend([("empirical", PALETTE["band"]), ("Wigner surmise", PALETTE["a1"])])
    return p


def _evolve_panel(evolve, fit):
    t = evolve["t"]
    mean, se = evolve["mean_trace"], evolve["stderr_trace"]
    p = _Panel(1, 0, "Tr(A rho(t)) and relaxation curves", "t", "Tr(A rho(t))",
               (float(t[0]), float(t[-1])),
               _finite_range(mean - se, mean + se, evolve["bgs_prediction_a1"],
                             evolve["bgs_prediction_a_half"]))
    p.band(t, mean - 2 * se, mean + 2 * se, PALETTE["band"])
    p.polyline(t, evolve["equilibrium"], PALETTE["eq"], width=1, dash="4 3")
    p.polyline(t, evolve["bgs_prediction_a_half"],
               PALETTE["a_half"], width=1.5)
    p.polyline(t, evolve["bgs_prediction_a1"], PALETTE["a1"], width=1.5)
    p.polyline(t, mean, PALETTE["data"], width=1.5)
    p.legend([("ensemble mean", PALETTE["data"]), ("a = 1", PALETTE["a1"]),
              ("a = 1/2", PALETTE["a_half"]), ("equilibrium", PALETTE["eq"])])
    if fit.get("fitted_a") is not None:
        left, top, _, h = p.plot_box
        p.text(left + 6, top + h - 8,
               f"fitted a = {_num(fit['fitted_a'])} +- {_num(fit['stderr_a'])}", size=10)
    return p


def _color(frac):
    # dark blue -> yellow
    lo, hi = np.array([33, 46, 102]), np.array([250, 220, 70])
    c = lo + frac * (hi - lo)
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def _heatmap_panel(f2csv):
    e, w, f2 = f2csv["E_bin"], f2csv["omega_bin"], f2csv["f2"]
    ue, uw = np.unique(e), np.unique(w)
    de = (ue[1] - ue[0]) if ue.size > 1 else 1.0
    dw = (uw[1] - uw[0]) if uw.size > 1 else 1.0
    p = _Panel(0, 1, "Off-diagonal variance f2(E, omega)", "omega", "E",
               (float(uw[0] - dw / 2), float(uw[-1] + dw / 2)),
               (float(ue[0] - de / 2), float(ue[-1] + de / 2)))
    positive = f2[np.isfinite(f2) & (f2 > 0)]
    lo, hi = (np.log10(positive.min()), np.log10(positive.max())) if positive.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    for ei, wi, v in zip(e, w, f2):
        if np.isfinite(v) and v > 0:
            fill = _color((math.log10(v) - lo) / span)
        else:
            fill = PALETTE["nan"]
        p.rect(wi - dw / 2, ei - de / 2, wi + dw / 2, ei + de / 2, fill)
    left, top, w_, _ = p.plot_box
    p.text(left + w_ - 4, top - 4, f"log10 f2 in [{_num(lo)}, {_num(hi)}]", size=9, anchor="end")
    return p


def _scaling_panel(eth_report):
    sc = eth_report.get("scaling")
    if sc and sc.get("n") and sc.get("variance"):
        ln = np.log(np.asarray(sc["n"], dtype=float))
        lv = np.log(np.asarray(sc["variance"], dtype=float))
        p = _Panel(1, 1, "Off-diagonal variance against N", "ln N", "ln variance",
                   _finite_range(ln), _finite_range(lv))
        slope = sc["slope"]
        fit_line = lv.mean() + slope * (ln - ln.mean())
        p.polyline(ln, fit_line, PALETTE["a1"], width=1.5)
        p.points(ln, lv, PALETTE["data"])
        left, top, _, h = p.plot_box
        p.text(left + 6, top + h - 8, f"slope = {_num(slope)}", size=10)
        return p
    p = _Panel(1, 1, "Off-diagonal variance against N", "ln N", "ln variance", (0, 1), (0, 1))
    left, top, w, h = p.plot_box
    p.text(left + w / 2, top + h / 2, "no N sweep in eth_report.json", anchor="middle")
    return p


def render_report(spacing, evolve, fit, f2csv, eth_report):
    """SVG text for the four panels; equal inputs give identical bytes."""
    panels = [_spacing_panel(spacing), _evolve_panel(evolve, fit), _heatmap_panel(f2csv),
              _scaling_panel(eth_report)]
    ids = ["spacing-histogram", "relaxation", "f2-heatmap", "scaling"]
    width, height = 2 * PANEL_W, 2 * PANEL_H
    body = "\n".join(pnl.render(pid) for pnl, pid in zip(panels, ids))
    return (f'<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif">\n'
            f'<rect width="{width}" height="{height}" fill="#fafafa"/>\n{body}\n</svg>\n')
