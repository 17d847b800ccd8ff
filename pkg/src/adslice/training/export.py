"""Plot-data tables for training curves and ROC curves."""
from pathlib import Path

CURVE_COLUMNS = ("epoch", "train_loss", "val_loss", "train_acc", "val_acc")


def _g(x):
    return format(float(x), ".17g")


def export_curves(report, out_dir):
    """Write ``curves.tsv`` and ``roc.tsv`` under ``out_dir``; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    c = report.curves
    rows = ["\t".join(CURVE_COLUMNS)]
    for e in range(len(c.get("train_loss", []))):
        rows.append("\t".join([str(e + 1)] + [_g(c[k][e]) for k in CURVE_COLUMNS[1:]]))
    curves = out_dir / "curves.tsv"
    curves.write_text("\n".join(rows) + "\n")

    rows = ["class\tfpr\ttpr"]
    for name, curve in zip(report.class_names, report.roc):
        if curve is None:
            continue
        rows += [f"{name}\t{_g(x)}\t{_g(y)}" for x, y in zip(curve["fpr"], curve["tpr"])]
    roc = out_dir / "roc.tsv"
    roc.write_text("\n".join(rows) + "\n")
    return curves, roc


def read_table(path):
    """Parse a TSV written by export_curves into ``(header, rows)``; numbers become floats."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split("\t")
    rows = []
    for line in lines[1:]:
        cells = line.split("\t")
        rows.append([cells[0] if header[0] == "class" else int(cells[0])] + [float(v) for v in cells[1:]])
    return header, rows
