"""Figures and gnuplot scripts for convergence tables."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .approx import ConvergenceTable  # noqa: E402

XLABELS = {
    "dilation-study": "dilation r",
    "degree-study": "degree",
    "jordan-study": "parameter",
}


def _x(table: ConvergenceTable, kind: str):
    x = table.column("param")
    if kind == "dilation-study" or table.metadata.get("sweep") == "rho":
        # 1 - r on a log axis spreads r = 0.9, 0.99, 0.999 evenly
        return 1.0 - x, "1 - r", True
    return x, XLABELS.get(kind, "parameter"), False


def plot_table(table: ConvergenceTable, path, kind: str = "degree-study"):
    """Error and norm columns against the sweep parameter; written to ``path``."""
    x, xlabel, logx = _x(table, kind)
    err = table.column("error_p")
    norm = table.column("norm_p")
    p = table.metadata.get("p", 2)
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    pos = err > 0
    ax.plot(x[pos], err[pos], "o-", color="tab:blue", label=r"$\|f-q\|^p$")
    ax.set_yscale("log")
    if logx:
        ax.set_xscale("log")
        ax.invert_xaxis()
    ax.set_xlabel(xlabel)
    ax.set_ylabel(f"error (p = {p:g})")
    ax.grid(True, which="both", alpha=0.3)
    ax2 = ax.twinx()
    ax2.plot(x, norm, "s--", color="tab:gray", ms=3, label=r"$\|q\|^p$")
    ax2.set_ylabel("norm_p", color="tab:gray")
    title = ", ".join(str(table.metadata[k]) for k in ("function", "weight") if k in table.metadata)
    ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def gnuplot_script(csv_path, png_path, kind: str = "degree-study") -> str:
    """Plain gnuplot script that redraws the error column from the CSV."""
    csv_path, png_path = Path(csv_path).name, Path(png_path).name
    lines = [
        "set datafile separator ','",
        "set terminal pngcairo size 800,560",
        f"set output '{png_path}'",
        "set logscale y",
        "set key autotitle columnhead",
    ]
    if kind == "dilation-study":
        lines += ["set logscale x", "set xrange [*:*] reverse", "set xlabel '1 - r'"]
        lines.append(f"plot '{csv_path}' using (1-$1):2 with linespoints")
    else:
        lines.append(f"set xlabel '{XLABELS.get(kind, 'parameter')}'")
        lines.append(f"plot '{csv_path}' using 1:2 with linespoints")
    return "\n".join(lines) + "\n"


def write_companions(table: ConvergenceTable, csv_path, kind: str, gnuplot: bool = False) -> list[Path]:
    csv_path = Path(csv_path)
    png = csv_path.with_suffix(".png")
    out = [plot_table(table, png, kind)]
    if gnuplot:
        gp = csv_path.with_suffix(".gp")
        gp.write_text(gnuplot_script(csv_path, png.with_suffix(".gnuplot.png"), kind))
        out.append(gp)
    return out

