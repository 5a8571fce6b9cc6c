"""Rectangular qubit layouts, hop distances and layout extension."""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field

import numpy as np

VERTICAL = "vertical"
HORIZONTAL = "horizontal"


@dataclass(frozen=True)
class QubitLayout:
    """A rows x cols grid with 4-neighbour coupling.

    The physical index of cell ``(r, c)`` is ``r * cols + c``.
    """

    rows: int
    cols: int

    def __post_init__(self):
        if not isinstance(self.rows, (int, np.integer)) or not isinstance(self.cols, (int, np.integer)):
            raise TypeError("layout dimensions must be integers")
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"invalid layout {self.rows}x{self.cols}: dimensions must be >= 1")

    @property
    def num_qubits(self) -> int:
        return self.rows * self.cols

    def index(self, r: int, c: int) -> int:
        return r * self.cols + c

    def cell(self, q: int) -> tuple[int, int]:
        return divmod(q, self.cols)

    def contains(self, q) -> bool:
        return isinstance(q, (int, np.integer)) and 0 <= q < self.num_qubits

    def neighbors(self, q: int) -> list[int]:
        r, c = self.cell(q)
        out = []
        if r > 0:
            out.append(q - self.cols)
        if c > 0:
            out.append(q - 1)
        if c < self.cols - 1:
            out.append(q + 1)
        if r < self.rows - 1:
            out.append(q + self.cols)
        return out

    def adjacent(self, a: int, b: int) -> bool:
        ra, ca = self.cell(a)
        rb, cb = self.cell(b)
        return abs(ra - rb) + abs(ca - cb) == 1

    def edges(self) -> list[tuple[int, int]]:
        """All coupled pairs ``(a, b)`` with ``a < b``."""
        return sorted((a, b) for a in range(self.num_qubits) for b in self.neighbors(a) if a < b)

    def __str__(self):
        return f"{self.rows}x{self.cols}"


def build_layout(rows: int, cols: int) -> QubitLayout:
    return QubitLayout(rows, cols)


_LAYOUT_RE = re.compile(r"^\s*(\d+)\s*[xX×]\s*(\d+)\s*$")


def parse_layout(text: str) -> QubitLayout:
    """Parse ``ROWSxCOLS`` such as ``5x7``."""
    m = _LAYOUT_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse layout {text!r}; expected ROWSxCOLS, e.g. 5x7")
    return QubitLayout(int(m.group(1)), int(m.group(2)))


def distance_matrix(layout: QubitLayout) -> np.ndarray:
    """All-pairs hop counts, computed by breadth-first search from every qubit."""
    n = layout.num_qubits
    dist = np.full((n, n), -1, dtype=np.int64)
    for src in range(n):
        row = dist[src]
        row[src] = 0
        queue = deque([src])
        while queue:
            q = queue.popleft()
            for nb in layout.neighbors(q):
                if row[nb] < 0:
                    row[nb] = row[q] + 1
                    queue.append(nb)
    return dist


@dataclass(frozen=True)
class ExtensionPlan:
    """How two copies of a base block sit inside an extended layout.

    ``relabel[k][old]`` is the index in the extended grid of cell ``old`` of
    block ``k`` (block 0 keeps the top-left corner, block 1 is the shifted copy).
    """

    direction: str
    base: tuple[int, int]
    result: tuple[int, int]
    relabel: tuple[dict, dict] = field(repr=False)

    def block_cells(self, k: int) -> set[int]:
        return set(self.relabel[k].values())


def extend_layout(layout: QubitLayout, direction: str) -> tuple[QubitLayout, ExtensionPlan]:
    m, n = layout.rows, layout.cols
    if direction == VERTICAL:
        ext = QubitLayout(2 * m, n)
        shift = (m, 0)
    elif direction == HORIZONTAL:
        ext = QubitLayout(m, 2 * n)
        shift = (0, n)
    else:
        raise ValueError(f"unknown extension direction {direction!r}")
    block0, block1 = {}, {}
    for q in range(layout.num_qubits):
        r, c = layout.cell(q)
        block0[q] = ext.index(r, c)
        block1[q] = ext.index(r + shift[0], c + shift[1])
    plan = ExtensionPlan(direction, (m, n), (ext.rows, ext.cols), (block0, block1))
    return ext, plan


def tile_layout(layout: QubitLayout, block_rows: int, block_cols: int) -> tuple[QubitLayout, list[dict]]:
    """Tile ``block_rows x block_cols`` copies of ``layout``.

    Returns the tiled layout and one relabel map per block in row-major block
    order (block 0 top-left, block 1 to its right, ...).
    """
    m, n = layout.rows, layout.cols
    big = QubitLayout(m * block_rows, n * block_cols)
    maps = []
    for br in range(block_rows):
        for bc in range(block_cols):
            maps.append({q: big.index(layout.cell(q)[0] + br * m, layout.cell(q)[1] + bc * n)
                         for q in range(layout.num_qubits)})
    return big, maps
