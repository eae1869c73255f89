"""Table rendering (aligned text, CSV) and a bound-versus-reference figure."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Any, Sequence


def _fmt(v: Any) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        if v != 0 and (abs(v) < 1e-3 or abs(v) >= 1e6):
            return f"{v:.4e}"
        return f"{v:.6f}"
    return str(v)


def format_table(rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> str:
    cells = [[_fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    head = "  ".join(c.ljust(w) for c, w in zip(columns, widths))
    rule = "  ".join("-" * w for w in widths)
    body = ["  ".join(x.rjust(w) if _numeric(x) else x.ljust(w) for x, w in zip(row, widths)) for row in cells]
    return "\n".join([head, rule, *body])


def _numeric(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return s in ("inf", "-inf", "nan")


def to_csv(rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: ("" if r.get(c) is None else r.get(c)) for c in columns})
    return buf.getvalue()


def write_csv(rows: Sequence[dict[str, Any]], columns: Sequence[str], path: str | Path) -> Path:
    path = Path(path)
    path.write_text(to_csv(rows, columns))
    return path


def plot_bounds(rows: Sequence[dict[str, Any]], path: str | Path, *, title: str = "",
                x_key: str = "instance", y_key: str = "bound", ref_key: str = "expected") -> Path:
    """Computed bounds against expected values, one marker per row."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = [str(r.get(x_key)) for r in rows]
    xs = range(len(rows))

    def finite(v):
        return v if isinstance(v, (int, float)) and math.isfinite(v) else float("nan")

    ys = [finite(r.get(y_key)) for r in rows]
    refs = [finite(r.get(ref_key)) for r in rows]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.8 * len(rows) + 2), 3.5))
    ax.plot(xs, refs, "s", mfc="none", color="0.4", label="expected")
    ax.plot(xs, ys, "o", color="C0", label="computed")
    for x, r in zip(xs, rows):
        if r.get("flag"):
            ax.annotate("!", (x, finite(r.get(y_key))), color="C3", ha="center", va="bottom")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel(y_key)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
