"""Optimization history serialization: CSV and a dependency-free SVG graph."""

from __future__ import annotations

CSV_HEADER = (
    "iteration,volume_m3,compliance_J,max_vm_Pa,aggregate,step_size,"
    "violation,min_quality,accepted"
)

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 60, 20, 20, 50  # plot margins


def history_csv(history) -> bytes:
    lines = [CSV_HEADER]
    for r in history:
        lines.append(
            f"{r.iteration},{r.volume:.17g},{r.compliance:.17g},{r.max_vm:.17g},"
            f"{r.aggregate:.17g},{r.step_size:.17g},{r.constraint_violation:.17g},"
            f"{r.min_quality:.17g},{'true' if r.accepted else 'false'}"
        )
    return ("\n".join(lines) + "\n").encode()


def _polyline(xs, ys, color):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>'


def history_svg(history) -> bytes:
    """Volume and max von Mises per iteration, each normalized to its
    initial value."""
    body = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" '
        'stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
        f'<text x="{_W // 2}" y="{_H - 12}" text-anchor="middle" '
        'font-size="14">iteration</text>',
        f'<text x="16" y="{_H // 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 16 {_H // 2})">normalized value</text>',
        f'<text x="{_W - _MR - 170}" y="{_MT + 14}" font-size="12" '
        'fill="#1f77b4">volume / initial</text>',
        f'<text x="{_W - _MR - 170}" y="{_MT + 30}" font-size="12" '
        'fill="#d62728">max von Mises / initial</text>',
    ]
    if history:
        vol0 = history[0].volume or 1.0
        vm0 = history[0].max_vm or 1.0
        series = [
            ([r.volume / vol0 for r in history], "#1f77b4"),
            ([r.max_vm / vm0 for r in history], "#d62728"),
        ]
        ymin = min(min(ys) for ys, _ in series)
        ymax = max(max(ys) for ys, _ in series)
        span = (ymax - ymin) or 1.0
        ymin -= 0.05 * span
        ymax += 0.05 * span
        n = len(history)
        xspan = max(n - 1, 1)

        def px(i):
            return _ML + (_W - _ML - _MR) * (i / xspan)

        def py(v):
            return _H - _MB - (_H - _MT - _MB) * ((v - ymin) / (ymax - ymin))

        for ys, color in series:
            body.append(_polyline([px(i) for i in range(n)], [py(v) for v in ys],
                                  color))
    body.append("</svg>")
    return ("\n".join(body) + "\n").encode()


def write_history(history):
    """(CSV bytes, SVG bytes) for a list of HistoryRecord."""
    return history_csv(history), history_svg(history)
