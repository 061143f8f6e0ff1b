"""File formats: CSV / lower-triangular distance matrices and Newick trees."""
from __future__ import annotations

import warnings
from pathlib import Path

from .core import (
    DistanceMatrix,
    FittedTree,
    UltraNode,
    UltrametricTree,
    WeightedTree,
)

SYMMETRY_TOL = 1e-9
NEWICK_FORBIDDEN = set("():;,'\" \t\n")


class DataError(ValueError):
    """Malformed input data; the message carries row / column context."""


# ---------------------------------------------------------------------------
# Distance matrices
# ---------------------------------------------------------------------------

def parse_matrix(path: str | Path, fmt: str = "auto") -> DistanceMatrix:
    """Read a distance matrix from CSV (square) or PHYLIP (lower-triangular)."""
    text = Path(path).read_text()
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines:
        raise DataError(f"{path}: empty file")
    if fmt == "auto":
        first = lines[0].replace(",", " ").split()
        fmt = "phylip" if len(first) == 1 and first[0].isdigit() else "csv"
    if fmt == "csv":
        return _parse_csv(lines, str(path))
    if fmt == "phylip":
        return _parse_phylip(lines, str(path))
    raise DataError(f"unknown matrix format {fmt!r}")


def _check_labels(labels: list[str], where: str) -> None:
    if len(set(labels)) != len(labels):
        dup = sorted({x for x in labels if labels.count(x) > 1})
        raise DataError(f"{where}: duplicate labels {dup}")
    for lab in labels:
        if not lab:
            raise DataError(f"{where}: empty label")


def _build(labels: list[str], cell, where: str) -> DistanceMatrix:
    values = {}
    n = len(labels)
    for a in range(n):
        for b in range(a + 1, n):
            vab, vba = cell(a, b), cell(b, a)
            if abs(vab - vba) > SYMMETRY_TOL:
                warnings.warn(
                    f"{where}: asymmetry at ({labels[a]},{labels[b]}): "
                    f"{vab} vs {vba}; averaging")
            v = (vab + vba) / 2.0
            if not v > 0:
                raise DataError(
                    f"{where}: nonpositive distance {v} at row {labels[a]!r}"
                    f" column {labels[b]!r}")
            values[(labels[a], labels[b])] = v
    return DistanceMatrix.from_pairs(labels, values)


def _parse_csv(lines: list[str], where: str) -> DistanceMatrix:
    header = [c.strip() for c in lines[0].split(",")]
    labels = [c for c in header[1:] if c]
    if not labels:
        raise DataError(f"{where}: header row has no labels")
    _check_labels(labels, where)
    n = len(labels)
    if len(lines) - 1 != n:
        raise DataError(f"{where}: expected {n} data rows, found {len(lines) - 1}")
    grid: list[list[float]] = []
    for rownum, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != n + 1:
            raise DataError(f"{where}: line {rownum} has {len(cells) - 1} cells, expected {n}")
        if cells[0] != labels[rownum - 2]:
            raise DataError(
                f"{where}: line {rownum} row label {cells[0]!r} does not match"
                f" header order ({labels[rownum - 2]!r})")
        try:
            row = [float(c) for c in cells[1:]]
        except ValueError as exc:
            raise DataError(f"{where}: line {rownum}: {exc}") from exc
        grid.append(row)
    for k in range(n):
        if abs(grid[k][k]) > SYMMETRY_TOL:
            raise DataError(f"{where}: diagonal for {labels[k]!r} is {grid[k][k]}, expected 0")
    return _build(labels, lambda a, b: grid[a][b], where)


def _parse_phylip(lines: list[str], where: str) -> DistanceMatrix:
    try:
        n = int(lines[0].split()[0])
    except ValueError as exc:
        raise DataError(f"{where}: bad count line {lines[0]!r}") from exc
    if len(lines) - 1 != n:
        raise DataError(f"{where}: expected {n} rows, found {len(lines) - 1}")
    labels: list[str] = []
    rows: list[list[float]] = []
    for rownum, line in enumerate(lines[1:], start=2):
        cells = line.split()
        if len(cells) != rownum - 1:  # label + (row index - 1) distances
            raise DataError(
                f"{where}: line {rownum} has {len(cells) - 1} distances,"
                f" expected {rownum - 2}")
        labels.append(cells[0])
        try:
            rows.append([float(c) for c in cells[1:]])
        except ValueError as exc:
            raise DataError(f"{where}: line {rownum}: {exc}") from exc
    _check_labels(labels, where)

    def cell(a: int, b: int) -> float:
        return rows[b][a] if a < b else rows[a][b]

    return _build(labels, cell, where)


def write_matrix_csv(d: DistanceMatrix, path: str | Path) -> None:
    lines = ["," + ",".join(d.labels)]
    for i in d.labels:
        cells = [i]
        for j in d.labels:
            cells.append("0" if i == j else repr(d.value(i, j)))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Newick
# ---------------------------------------------------------------------------

def _check_newick_label(label: str) -> None:
    if not label or set(label) & NEWICK_FORBIDDEN:
        raise DataError(f"label {label!r} cannot be written as Newick")


def newick_string(tree: UltrametricTree | WeightedTree | FittedTree) -> str:
    if isinstance(tree, FittedTree):
        tree = tree.tree
    if isinstance(tree, UltrametricTree):
        return _ultra_newick(tree)
    if isinstance(tree, WeightedTree):
        return _weighted_newick(tree)
    raise TypeError(f"cannot serialize {type(tree)!r}")


def write_newick(tree, path: str | Path) -> None:
    Path(path).write_text(newick_string(tree) + "\n")


def _ultra_newick(tree: UltrametricTree) -> str:
    for lab in tree.labels:
        _check_newick_label(lab)

    def render(node: UltraNode, parent_height: float) -> str:
        if node.is_leaf:
            return f"{node.label}:{parent_height!r}"
        inner = ",".join(render(c, node.height) for c in node.children)
        return f"({inner}):{(parent_height - node.height)!r}"

    root = tree.root
    if root.is_leaf:
        return f"({root.label}:0.0);"
    inner = ",".join(render(c, root.height) for c in root.children)
    return f"({inner});"


def _weighted_newick(tree: WeightedTree) -> str:
    for lab in tree.labels:
        _check_newick_label(lab)
    adj = tree.adjacency()
    root = tree.root if tree.root in adj else sorted(adj)[0]
    label_set = set(tree.labels)
    pos = {lab: k for k, lab in enumerate(tree.labels)}

    def min_leaf(node: str, parent: str | None) -> int:
        vals = [pos[node]] if node in label_set else []
        for nxt, _ in adj[node]:
            if nxt != parent:
                vals.append(min_leaf(nxt, node))
        return min(vals) if vals else len(pos)

    def render(node: str, parent: str | None) -> str:
        kids = sorted((nxt for nxt, _ in adj[node] if nxt != parent),
                      key=lambda nd: min_leaf(nd, node))
        name = node if node in label_set else ""
        if not kids:
            return name
        inner = ",".join(
            f"{render(k, node)}:{_edge_weight(adj, node, k)!r}" for k in kids)
        return f"({inner}){name}"

    body = render(root, None)
    if not body.startswith("("):
        body = f"({body}:0.0)"
    return body + ";"


def _edge_weight(adj, a: str, b: str) -> float:
    for nxt, w in adj[a]:
        if nxt == b:
            return w
    raise KeyError((a, b))


def parse_newick(text: str) -> WeightedTree:
    """Parse a Newick string into a weighted tree; named nodes become labels."""
    text = text.strip()
    if not text.endswith(";"):
        raise DataError("Newick text must end with ';'")
    body = text[:-1]
    edges: list[tuple[str, str, float]] = []
    labels: list[str] = []
    counter = [0]

    def fresh() -> str:
        counter[0] += 1
        return f"@{counter[0]}"

    def parse(s: str, k: int) -> tuple[str, float | None, int]:
        children = []
        if k < len(s) and s[k] == "(":
            k += 1
            while True:
                child, length, k = parse(s, k)
                children.append((child, length))
                if k >= len(s):
                    raise DataError("unbalanced parentheses in Newick text")
                if s[k] == ",":
                    k += 1
                    continue
                if s[k] == ")":
                    k += 1
                    break
                raise DataError(f"unexpected {s[k]!r} at position {k}")
        name_start = k
        while k < len(s) and s[k] not in ":():,;":
            k += 1
        name = s[name_start:k]
        length = None
        if k < len(s) and s[k] == ":":
            k += 1
            num_start = k
            while k < len(s) and s[k] not in "(),;":
                k += 1
            raw = s[num_start:k]
            try:
                length = float(raw)
            except ValueError as exc:
                raise DataError(f"bad branch length {raw!r}") from exc
        if name:
            labels.append(name)
            node = name
        else:
            node = fresh()
        for child, child_len in children:
            edges.append((node, child, 0.0 if child_len is None else child_len))
        return node, length, k

    root, _, k = parse(body, 0)
    if k != len(body):
        raise DataError(f"trailing characters in Newick text: {body[k:]!r}")
    _check_labels(labels, "newick")
    if not edges:
        return WeightedTree(labels=tuple(labels), edges=(), root=root)
    return WeightedTree(labels=tuple(labels), edges=tuple(edges), root=root)
