"""Shipped hand-skeleton topologies and the edge-list file loader.

Edges are undirected physical bone connections, 0-based, without
self-loops. Users can override any of these with a text file of one
``i j`` pair per line via the ``jgr.topology`` config key.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ValidationError


def _chain(root, first, length):
    """Edges of a finger chain root -> first -> first+1 -> ..."""
    edges = [(root, first)]
    for j in range(first, first + length - 1):
        edges.append((j, j + 1))
    return edges


# 14 joints: palm center (0), two wrist points (1, 2), a three-bone thumb
# (3-5), and four two-bone fingers (6-13). Used by both the synthetic hand
# and the NYU-style annotation layout, which share the joint count.
_FOURTEEN = (
    [(0, 1), (0, 2)]
    + _chain(0, 3, 3)
    + _chain(0, 6, 2)
    + _chain(0, 8, 2)
    + _chain(0, 10, 2)
    + _chain(0, 12, 2)
)

# 16 joints: palm root plus five three-joint finger chains.
_SIXTEEN = (
    _chain(0, 1, 3)
    + _chain(0, 4, 3)
    + _chain(0, 7, 3)
    + _chain(0, 10, 3)
    + _chain(0, 13, 3)
)

# 21 joints: wrist plus five four-joint finger chains.
_TWENTYONE = (
    _chain(0, 1, 4)
    + _chain(0, 5, 4)
    + _chain(0, 9, 4)
    + _chain(0, 13, 4)
    + _chain(0, 17, 4)
)

TOPOLOGIES = {
    "synth14": (14, tuple(_FOURTEEN)),
    "nyu14": (14, tuple(_FOURTEEN)),
    "icvl16": (16, tuple(_SIXTEEN)),
    "msra21": (21, tuple(_TWENTYONE)),
    # minimal test skeleton: root, two children, one two-bone chain
    "tiny4": (4, ((0, 1), (0, 2), (2, 3))),
}


def load_edge_list(path):
    """Parse an edge-list file: one ``i j`` integer pair per line."""
    edges = []
    n = 0
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValidationError(f"{path}:{lineno}: expected 'i j', got {raw!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: non-integer joint index") from exc
        edges.append((i, j))
        n = max(n, i + 1, j + 1)
    return n, tuple(edges)


def resolve(name_or_path):
    """Return (n_joints, edges) for a shipped topology name or an edge-list file."""
    if name_or_path in TOPOLOGIES:
        return TOPOLOGIES[name_or_path]
    p = Path(name_or_path)
    if p.exists():
        return load_edge_list(p)
    raise ValidationError(
        f"unknown topology {name_or_path!r}; shipped names: {sorted(TOPOLOGIES)}"
    )
