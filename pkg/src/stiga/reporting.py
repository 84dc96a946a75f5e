"""Study tables: CSV serialization, plot-data files, and rendered figures.

The CSV schema is shared by all studies: data rows carry errors and solver
counters with the order columns empty; convergence tables append one order
row per consecutive mesh pair, with everything except the observed orders
empty.  Floats are written with ``repr`` so parsing a file reproduces the
in-memory table exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .postproc import ErrorRecord

__all__ = [
    "CSV_COLUMNS",
    "OrderRow",
    "StudyTable",
    "write_table",
    "read_table",
    "write_plot_data",
    "render_convergence_figures",
    "render_robustness_figure",
]

CSV_COLUMNS = ("problem", "q", "inv_h", "N_dof", "e_L2L2", "e_L2H1",
               "order_L2L2", "order_L2H1", "picard", "gmres_max", "seconds")


@dataclass
class OrderRow:
    """Observed orders between two consecutive refinements (labelled by the
    finer mesh)."""

    problem: str
    degree: int
    inv_h: int
    order_l2l2: float | None
    order_l2h1: float | None


@dataclass
class StudyTable:
    records: list = field(default_factory=list)
    orders: list = field(default_factory=list)

    def __eq__(self, other):
        return (isinstance(other, StudyTable)
                and self.records == other.records
                and self.orders == other.orders)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str, kind):
    if text == "":
        return None
    return kind(text)


def write_table(table: StudyTable, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in table.records:
            writer.writerow([
                r.problem, r.degree, r.inv_h, _fmt(r.n_dof),
                _fmt(r.error_l2l2), _fmt(r.error_l2h1), "", "",
                _fmt(r.picard), _fmt(r.gmres_max), _fmt(r.seconds),
            ])
        for o in table.orders:
            writer.writerow([
                o.problem, o.degree, o.inv_h, "", "", "",
                _fmt(o.order_l2l2), _fmt(o.order_l2h1), "", "", "",
            ])


def read_table(path) -> StudyTable:
    table = StudyTable()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header in {path}")
        for row in reader:
            (problem, q, inv_h, n_dof, e_l2l2, e_l2h1,
             o_l2l2, o_l2h1, picard, gmres, seconds) = row
            if o_l2l2 != "" or o_l2h1 != "":
                table.orders.append(OrderRow(
                    problem=problem, degree=int(q), inv_h=int(inv_h),
                    order_l2l2=_parse(o_l2l2, float),
                    order_l2h1=_parse(o_l2h1, float)))
            else:
                table.records.append(ErrorRecord(
                    problem=problem, degree=int(q), inv_h=int(inv_h),
                    n_dof=_parse(n_dof, int),
                    error_l2l2=_parse(e_l2l2, float),
                    error_l2h1=_parse(e_l2h1, float),
                    picard=_parse(picard, int),
                    gmres_max=_parse(gmres, int),
                    seconds=_parse(seconds, float)))
    return table


def _stem(path) -> Path:
    path = Path(path)
    return path.with_suffix("") if path.suffix else path


def write_plot_data(table: StudyTable, path) -> list:
    """Two-column ``h error`` files, one per norm per degree."""
    stem = _stem(path)
    written = []
    degrees = sorted({r.degree for r in table.records})
    for norm, attr in (("l2l2", "error_l2l2"), ("l2h1", "error_l2h1")):
        for q in degrees:
            rows = [r for r in table.records
                    if r.degree == q and getattr(r, attr) is not None]
            if not rows:
                continue
            out = stem.parent / f"{stem.name}.{norm}.q{q}.dat"
            with open(out, "w") as fh:
                for r in sorted(rows, key=lambda r: r.inv_h):
                    fh.write(f"{repr(r.h)} {repr(getattr(r, attr))}\n")
            written.append(out)
    return written


def render_convergence_figures(table: StudyTable, path) -> list:
    """Log-log error plots (one file per norm) next to the CSV."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    stem = _stem(path)
    degrees = sorted({r.degree for r in table.records})
    written = []
    specs = (("l2l2", "error_l2l2", "L2(0,T;L2) error", 1),
             ("l2h1", "error_l2h1", "L2(0,T;H1_0) error", 0))
    for norm, attr, label, extra in specs:
        fig, ax = plt.subplots(figsize=(5.0, 4.0))
        for q in degrees:
            rows = sorted((r for r in table.records
                           if r.degree == q and getattr(r, attr) is not None),
                          key=lambda r: r.inv_h)
            if not rows:
                continue
            hs = [r.h for r in rows]
            es = [getattr(r, attr) for r in rows]
            ax.loglog(hs, es, "o-", label=f"q={q}")
            # reference slope anchored at the finest point
            slope = q + extra
            ref = [es[-1] * (h / hs[-1]) ** slope for h in hs]
            ax.loglog(hs, ref, "k--", linewidth=0.8, alpha=0.5)
        ax.set_xlabel("h")
        ax.set_ylabel(label)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        out = stem.parent / f"{stem.name}.{norm}.png"
        fig.savefig(out, dpi=150)
        plt.close(fig)
        written.append(out)
    return written


def render_robustness_figure(table: StudyTable, path):
    """Iteration counts against mesh resolution, one line per degree."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    stem = _stem(path)
    degrees = sorted({r.degree for r in table.records})
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for q in degrees:
        rows = sorted((r for r in table.records
                       if r.degree == q and r.gmres_max is not None),
                      key=lambda r: r.inv_h)
        if not rows:
            continue
        ax.plot([r.inv_h for r in rows], [r.gmres_max for r in rows],
                "o-", label=f"q={q}")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("1/h")
    ax.set_ylabel("max GMRES iterations per solve")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out = stem.parent / f"{stem.name}.gmres.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
