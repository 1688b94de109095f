"""Byte-stable CSV output and the generated plotting script."""

import csv
import math
from pathlib import Path


def format_value(v):
    """Render a cell: integers as-is, reals with 12 decimals, ``inf``/``nan`` spelled out."""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    out = f"{v:.12f}"
    if out.startswith("-") and float(out) == 0.0:
        out = out[1:]
    return out


def write_csv(path, header, rows):
    """Write ``rows`` under ``header`` with LF line endings and formatted cells."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])
    return path


PLOT_TEMPLATE = '''"""Plot the repetition scan next to the closed-form decay bound.

Generated by games-lab; run with ``python {script}`` (needs matplotlib).
"""
import csv
import math

import matplotlib.pyplot as plt

EPSILON = {epsilon!r}
NA, NB = {na}, {nb}


def theorem_bound(eps, k):
    return (1 - eps / 2) ** (eps ** 2 * k / (12000 * (math.log2(NA) + math.log2(NB))))


with open({csv_name!r}) as fh:
    rows = list(csv.DictReader(fh))
size = [{c0} + int(r["step"]) for r in rows]
q = [float(r["q"]) for r in rows]
omega = [float(r["omega_j"]) for r in rows]

fig, ax = plt.subplots()
ax.plot(size, q, "o-", label="empirical Pr[win all of C]")
ax.plot(size, omega, "s--", label="omega_j (next coordinate)")
ax.plot(size, [theorem_bound(EPSILON, k) for k in size], "k:", label="theorem bound")
ax.set_xlabel("|C|")
ax.set_ylabel("probability")
ax.set_ylim(0, 1.05)
ax.legend()
fig.savefig({png_name!r}, dpi=150)
'''


def write_plot_script(path, csv_name, epsilon, na, nb, initial_size=0):
    path = Path(path)
    text = PLOT_TEMPLATE.format(
        script=path.name,
        epsilon=float(epsilon),
        na=na,
        nb=nb,
        csv_name=str(csv_name),
        c0=int(initial_size),
        png_name=path.with_suffix(".png").name,
    )
    path.write_text(text)
    return path
