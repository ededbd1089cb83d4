"""Deterministic CSV/JSON/SVG writers with provenance headers."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


def config_hash(payload: Mapping) -> str:
    """Short SHA-256 of a JSON-serialisable configuration."""
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "nan" if not np.isfinite(x) else f"{float(x):.12g}"
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence], *,
              meta: Mapping[str, object]) -> Path:
    """CSV with ``# key=value`` comment lines ahead of the header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def _float(x: str) -> float:
    try:
        return float(x)
    except ValueError:
        return float("nan")


def read_csv(path: str | Path) -> tuple[dict[str, str], list[str], np.ndarray]:
    """Inverse of :func:`write_csv`; non-numeric cells read as NaN."""
    meta, lines = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = v
        else:
            lines.append(line)
    header = lines[0].split(",")
    if len(lines) == 1:
        return meta, header, np.zeros((0, len(header)))
    return meta, header, np.array([[_float(x) for x in ln.split(",")] for ln in lines[1:]])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path: str | Path, payload, *, meta: Mapping[str, object]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"_meta": dict(meta), "data": _jsonable(payload)}
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    return path


_STYLE = {0: ("tab:red", "-"), 1: ("tab:blue", "--"), 2: ("tab:green", "-."), 3: ("black", ":")}


def plot_curves(path: str | Path, energies: np.ndarray, panels: Sequence[tuple[str, np.ndarray]],
                markers: Sequence[tuple[float, int]] = (), *, title: str = "",
                meta: Mapping[str, object] | None = None) -> Path:
    """Stacked panels sharing the energy axis; stationary energies drawn as
    vertical lines styled by index."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "esqpt"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, axes = plt.subplots(len(panels), 1, figsize=(9, 2.6 * len(panels)), sharex=True,
                             squeeze=False)
    seen = set()
    for ax, (label, y) in zip(axes[:, 0], panels):
        ax.plot(energies, y, lw=0.8, color="0.15")
        ax.set_ylabel(label)
        for e, r in markers:
            color, ls = _STYLE.get(r % 4, ("gray", "-"))
            lab = f"r={r}" if r not in seen else None
            seen.add(r)
            ax.axvline(e, color=color, ls=ls, lw=0.6, label=lab)
    axes[-1, 0].set_xlabel("E")
    if markers:
        axes[0, 0].legend(loc="upper left", fontsize=7, ncol=4)
    if title:
        axes[0, 0].set_title(title + (f"  [{meta.get('config')}]" if meta else ""), fontsize=9)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
