"""Plain-text and SVG views of an :class:`EvalReport`."""
from xml.sax.saxutils import escape

import numpy as np


def _bar(value, width=30):
    filled = int(round(value * width))
    return "#" * filled + "." * (width - filled)


def render_text(report):
    """Per-class clean accuracy and attack-success bars, then both confusion matrices."""
    c = len(report.per_class_accuracy)
    lines = [f"target {report.target}  delta_ts {report.delta_ts:g}  "
             f"clean accuracy {report.overall_accuracy:.4f}",
             f"asr mean {report.asr_mean:.4f}  top-{report.topk} {report.asr_topk:.4f}",
             "", "class  clean accuracy                          attacked -> target"]
    for l in range(c):
        acc = report.per_class_accuracy[l]
        asr = report.asr_per_source.get(l)
        right = "(excluded)" if asr is None else f"{_bar(asr, 20)} {asr:6.1%}"
        lines.append(f"{l:>5}  {_bar(acc)} {acc:6.1%}  {right}")
    for title, matrix in (("clean confusion", report.confusion),
                          ("attacked confusion", report.attacked_confusion)):
        if matrix is None:
            continue
        width = max(5, len(str(int(matrix.max()))) + 1)
        lines += ["", f"{title} (rows true, columns predicted)",
                  " " * 5 + "".join(f"{p:>{width}}" for p in range(c))]
        for l in range(c):
            lines.append(f"{l:>5}" + "".join(f"{int(v):>{width}}" for v in matrix[l]))
    return "\n".join(lines) + "\n"


def _heat_colour(x):
    # white -> dark blue
    x = float(np.clip(x, 0, 1))
    r = int(round(255 - 222 * x))
    g = int(round(255 - 180 * x))
    b = int(round(255 - 75 * x))
    return f"#{r:02x}{g:02x}{b:02x}"


def render_svg(report):
    """Two bar panels (clean accuracy, attack success per source) and a row-normalised heatmap."""
    c = len(report.per_class_accuracy)
    bar_w, bar_h, gap = 28, 160, 6
    panel_w = c * (bar_w + gap) + 40
    cell = max(18, min(40, 360 // c))
    heat_x = 2 * panel_w + 40
    width = heat_x + c * cell + 60
    height = max(bar_h + 90, c * cell + 90)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>']

    def bars(x0, title, values, colour):
        out.append(f'<text x="{x0}" y="16" font-size="13">{escape(title)}</text>')
        base = 30 + bar_h
        out.append(f'<line x1="{x0}" y1="{base}" x2="{x0 + c * (bar_w + gap)}" y2="{base}" stroke="black"/>')
        for l in range(c):
            x = x0 + l * (bar_w + gap)
            v = values[l]
            if v is not None:
                h = v * bar_h
                out.append(f'<rect x="{x}" y="{base - h:.1f}" width="{bar_w}" height="{h:.1f}" fill="{colour}">'
                           f'<title>class {l}: {v:.3f}</title></rect>')
                out.append(f'<text x="{x + bar_w / 2}" y="{base - h - 3:.1f}" text-anchor="middle">'
                           f'{100 * v:.0f}</text>')
            out.append(f'<text x="{x + bar_w / 2}" y="{base + 14}" text-anchor="middle">{l}</text>')

    bars(10, "clean accuracy per class (%)", list(report.per_class_accuracy), "#4a7ab5")
    asr = [report.asr_per_source.get(l) for l in range(c)]
    bars(10 + panel_w, f"classified as {report.target} with signal, delta_ts={report.delta_ts:g} (%)",
         asr, "#c0504d")

    matrix = report.attacked_confusion if report.attacked_confusion is not None else report.confusion
    rows = matrix.sum(axis=1, keepdims=True)
    norm = np.divide(matrix, rows, out=np.zeros(matrix.shape), where=rows > 0)
    out.append(f'<text x="{heat_x}" y="16" font-size="13">attacked confusion (row-normalised)</text>')
    for i in range(c):
        out.append(f'<text x="{heat_x - 6}" y="{30 + i * cell + cell / 2 + 4:.1f}" text-anchor="end">{i}</text>')
        out.append(f'<text x="{heat_x + i * cell + cell / 2:.1f}" y="{30 + c * cell + 14}" '
                   f'text-anchor="middle">{i}</text>')
        for j in range(c):
            v = norm[i, j]
            out.append(f'<rect x="{heat_x + j * cell}" y="{30 + i * cell}" width="{cell}" height="{cell}" '
                       f'fill="{_heat_colour(v)}" stroke="#ddd"><title>{i} -> {j}: {int(matrix[i, j])}'
                       f'</title></rect>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
