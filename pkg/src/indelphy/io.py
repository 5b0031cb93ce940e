"""Text formats: sequences, ancestry sidecars, distance matrices, config files."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .estimator import DistanceMatrix
from .model import BINARY, DNA, SubstitutionModel


class FormatError(ValueError):
    pass


def write_sequences(path, seqs: dict, model: SubstitutionModel) -> None:
    """``>name`` line followed by the state string, one record per taxon."""
    with open(path, "w") as fh:
        for name, s in seqs.items():
            states = getattr(s, "states", s)
            fh.write(f">{name}\n{model.decode(states)}\n")


def read_sequences(path) -> tuple[dict[str, str], str]:
    """Return ``({name: text}, alphabet)``; the alphabet is 01 or ACGT."""
    out: dict[str, list[str]] = {}
    name = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                name = line[1:].strip()
                if not name or name in out:
                    raise FormatError(f"line {lineno}: empty or duplicate taxon name")
                out[name] = []
            elif name is None:
                raise FormatError(f"line {lineno}: sequence data before first header")
            else:
                out[name].append(line)
    seqs = {k: "".join(v) for k, v in out.items()}
    symbols = set("".join(seqs.values()))
    if symbols <= set(BINARY):
        alphabet = BINARY
    elif symbols <= set(DNA):
        alphabet = DNA
    else:
        raise FormatError(f"unsupported symbols {sorted(symbols - set(DNA))}")
    return seqs, alphabet


def write_ancestry(path, labels: dict[str, np.ndarray]) -> None:
    with open(path, "w") as fh:
        fh.write("taxon\tposition\tlabel\n")
        for name, lab in labels.items():
            for i, x in enumerate(lab, 1):
                fh.write(f"{name}\t{i}\t{int(x)}\n")


def read_ancestry(path) -> dict[str, np.ndarray]:
    rows: dict[str, list[int]] = {}
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header != ["taxon", "position", "label"]:
            raise FormatError("ancestry file needs a taxon/position/label header")
        for lineno, line in enumerate(fh, 2):
            name, pos, lab = line.rstrip("\n").split("\t")
            lst = rows.setdefault(name, [])
            if int(pos) != len(lst) + 1:
                raise FormatError(f"line {lineno}: positions must be consecutive from 1")
            lst.append(int(lab))
    return {k: np.array(v, dtype=np.int64) for k, v in rows.items()}


def _fmt_float(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(x))


def format_matrix(D: DistanceMatrix) -> str:
    """``#`` metadata lines, a tab-separated header of names, then the strict
    lower triangle (row ``i`` lists its distances to taxa ``0..i-1``)."""
    lines = [f"# {k}: {v}" for k, v in D.meta.items()]
    lines.append("\t".join(D.names))
    for i, nm in enumerate(D.names):
        lines.append("\t".join([nm] + [_fmt_float(D.values[i, j]) for j in range(i)]))
    return "\n".join(lines) + "\n"


def write_matrix(path, D: DistanceMatrix) -> None:
    Path(path).write_text(format_matrix(D))


def _meta_value(s: str):
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def parse_matrix(text: str) -> DistanceMatrix:
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(":")
            meta[key.strip()] = _meta_value(val.strip())
        elif line.strip():
            body.append(line.split("\t"))
    if not body:
        raise FormatError("empty matrix file")
    names = body[0]
    n = len(names)
    if len(body) != n + 1:
        raise FormatError(f"expected {n} matrix rows, found {len(body) - 1}")
    V = np.zeros((n, n))
    for i, row in enumerate(body[1:]):
        if row[0] != names[i] or len(row) != i + 1:
            raise FormatError(f"row {i + 1} malformed (name {row[0]!r}, {len(row) - 1} entries)")
        for j, tok in enumerate(row[1:]):
            V[i, j] = V[j, i] = math.inf if tok == "inf" else float(tok)
    return DistanceMatrix(names, V, meta)


def read_matrix(path) -> DistanceMatrix:
    return parse_matrix(Path(path).read_text())


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep or not key.strip():
                raise FormatError(f"{path}:{lineno}: expected 'key = value'")
            out[key.strip().replace("-", "_")] = val.strip()
    return out
