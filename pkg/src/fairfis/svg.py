"""Two-panel horizontal bar chart (FIS | FairFIS) as plain SVG markup."""

from __future__ import annotations

from xml.sax.saxutils import escape

POSITIVE = "#4c72b0"
NEGATIVE = "#c44e52"
FIS_COLOR = "#55a868"


def _panel(out, title, values, x0, width, top, row_h, signed):
    mid = x0 + width / 2 if signed else x0
    scale = (width / 2 if signed else width) / max(max((abs(v) for v in values), default=0.0), 1e-12)
    out.append(f'<text x="{x0 + width / 2:.1f}" y="{top - 10}" text-anchor="middle" font-weight="bold">{escape(title)}</text>')
    out.append(f'<line x1="{mid:.1f}" y1="{top}" x2="{mid:.1f}" y2="{top + row_h * len(values)}" stroke="#333"/>')
    for i, v in enumerate(values):
        y = top + i * row_h + 2
        length = abs(v) * scale
        x = mid - length if v < 0 else mid
        if signed:
            color = NEGATIVE if v < 0 else POSITIVE
        else:
            color = FIS_COLOR
        cls = "neg" if v < 0 else "pos"
        out.append(
            f'<rect class="{cls}" x="{x:.1f}" y="{y:.1f}" width="{length:.1f}" height="{row_h - 4:.1f}" fill="{color}">'
            f"<title>{v:.12f}</title></rect>"
        )


def importance_chart(names, fis, fairfis, title: str = "") -> str:
    """SVG with aligned FIS and FairFIS panels; negative FairFIS bars are red."""
    row_h, label_w, panel_w, gap = 22, 140, 260, 40
    top = 50 if title else 35
    height = top + row_h * len(names) + 20
    width = label_w + 2 * panel_w + gap + 20
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">'
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for i, name in enumerate(names):
        y = top + i * row_h + row_h / 2 + 4
        out.append(f'<text x="{label_w - 8}" y="{y:.1f}" text-anchor="end">{escape(str(name))}</text>')
    _panel(out, "FIS", list(fis), label_w, panel_w, top, row_h, signed=False)
    _panel(out, "FairFIS", list(fairfis), label_w + panel_w + gap, panel_w, top, row_h, signed=True)
    out.append("</svg>")
    return "\n".join(out) + "\n"
