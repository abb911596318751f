"""Checks that a unitary respects the graph it acts on.

Three notions are checked: zero amplitude between non-adjacent vertices
(``z``), a partition into one-vertex or one-edge unitary blocks (``c``), and
being ``exp(iH)`` for a Hermitian ``H`` with spectrum in ``[-pi, pi]`` that
only couples a vertex to itself or to a neighbour (``h``).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .graph import Graph
from .simcore import (BasisState, LocalStep, LocalityViolation, NonUnitaryBlock, OverlappingBlocks,
                      DimensionMismatch, SimulationError, validate_step)

ENTRY_TOL = 1e-12
DENSE_CAP = 1 << 12


class EigendecompositionFailure(ArithmeticError):
    pass


class Verdict(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    INCONCLUSIVE = "inconclusive"

    def __bool__(self) -> bool:
        return self is Verdict.TRUE


@dataclass
class DenseUnitary:
    matrix: np.ndarray
    vertices: np.ndarray  # vertex of each basis index
    keys: list[BasisState] | None = None

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=complex)
        self.vertices = np.asarray(self.vertices, dtype=np.int64)
        dim = len(self.vertices)
        if self.matrix.shape != (dim, dim):
            raise DimensionMismatch(f"matrix shape {self.matrix.shape} does not match {dim} annotated states")
        if dim > DENSE_CAP:
            raise DimensionMismatch(f"dimension {dim} exceeds the dense cap {DENSE_CAP}")

    @property
    def dim(self) -> int:
        return len(self.vertices)

    def unitarity_error(self) -> float:
        u = self.matrix
        return float(np.abs(u.conj().T @ u - np.eye(self.dim)).max()) if self.dim else 0.0


def _forbidden_mask(vertices: np.ndarray, g: Graph) -> np.ndarray:
    a = np.repeat(vertices, len(vertices))
    b = np.tile(vertices, len(vertices))
    ok = (a == b)
    off = ~ok
    if off.any():
        ok[off] = g.adjacent_pairs(a[off], b[off])
    return ~ok.reshape(len(vertices), len(vertices))


def check_z_local(u: DenseUnitary, g: Graph, tol: float = ENTRY_TOL) -> tuple[bool, list[tuple[int, int]]]:
    """Entries linking non-adjacent distinct vertices must vanish; violations are ``(row, col)`` pairs."""
    bad = _forbidden_mask(u.vertices, g) & (np.abs(u.matrix) > tol)
    rows, cols = np.nonzero(bad)
    return not len(rows), list(zip(rows.tolist(), cols.tolist()))


@dataclass
class CLocalReport:
    ok: bool
    cause: str = ""
    blocks: int = 0
    detail: dict = field(default_factory=dict)


def check_c_local(step: LocalStep, g: Graph | None = None) -> CLocalReport:
    try:
        validate_step(step, g)
    except LocalityViolation as exc:
        return CLocalReport(False, "LocalityViolation", step.block_count, {"message": str(exc)})
    except NonUnitaryBlock as exc:
        return CLocalReport(False, "NonUnitaryBlock", step.block_count, {"message": str(exc)})
    except OverlappingBlocks as exc:
        return CLocalReport(False, "OverlappingBlocks", step.block_count, {"message": str(exc)})
    except DimensionMismatch as exc:
        return CLocalReport(False, "DimensionMismatch", step.block_count, {"message": str(exc)})
    return CLocalReport(True, "", step.block_count)


def check_c_local_dense(u: DenseUnitary, g: Graph, tol: float = ENTRY_TOL) -> CLocalReport:
    """Split a dense unitary into the components of its coupling pattern; each must sit on one vertex or one edge."""
    pattern = (np.abs(u.matrix) > tol) | (np.abs(u.matrix.T) > tol)
    count, label = connected_components(pattern, directed=False)
    for b in range(count):
        ix = np.flatnonzero(label == b)
        verts = np.unique(u.vertices[ix])
        if len(verts) > 2 or (len(verts) == 2 and not g.adjacent_pairs(verts[:1], verts[1:])[0]):
            return CLocalReport(False, "LocalityViolation", count, {"vertices": verts.tolist()})
        blk = u.matrix[np.ix_(ix, ix)]
        if np.abs(blk.conj().T @ blk - np.eye(len(ix))).max() > 1e-9:
            return CLocalReport(False, "NonUnitaryBlock", count, {"states": ix.tolist()})
    return CLocalReport(True, "", count)


def check_h_local(u: DenseUnitary, g: Graph, tol: float = 1e-9) -> tuple[Verdict, dict]:
    """Principal-branch test: ``H = -i log u`` must be Hermitian, bounded by pi and graph-supported."""
    if u.dim == 0:
        return Verdict.TRUE, {}
    T, Z = scipy.linalg.schur(u.matrix, output="complex")
    off = np.abs(np.triu(T, 1)).max() if u.dim > 1 else 0.0
    if off > 1e-8:
        raise EigendecompositionFailure(f"input is not normal (Schur off-diagonal {off:.2e})")
    phases = np.angle(np.diag(T))
    info = {"max_phase": float(np.abs(phases).max())}
    if np.any(np.pi - np.abs(phases) <= tol):
        return Verdict.INCONCLUSIVE, info
    if np.any(np.abs(np.abs(np.diag(T)) - 1) > 1e-8):
        return Verdict.FALSE, {**info, "reason": "not unitary"}
    H = (Z * phases) @ Z.conj().T
    herm = float(np.abs(H - H.conj().T).max())
    forbidden = float(np.abs(H[_forbidden_mask(u.vertices, g)]).max(initial=0.0))
    info.update(hermitian_error=herm, forbidden_max=forbidden)
    ok = herm <= tol and info["max_phase"] <= np.pi + tol and forbidden <= tol
    return (Verdict.TRUE if ok else Verdict.FALSE), info


def step_to_dense(step: LocalStep, keys: Sequence[BasisState]) -> np.ndarray:
    pos = {BasisState(*k): i for i, k in enumerate(keys)}
    m = np.eye(len(keys), dtype=complex)
    for bkeys, mat in step.blocks():
        try:
            ix = [pos[k] for k in bkeys]
        except KeyError as exc:
            raise DimensionMismatch(f"step acts on {exc.args[0]} outside the supplied basis") from None
        m[np.ix_(ix, ix)] = mat
    return m


def compose_to_dense(steps: Sequence[LocalStep], keys: Sequence[BasisState]) -> DenseUnitary:
    """Ordered product (first step applied first) restricted to ``keys``."""
    if len(keys) > DENSE_CAP:
        raise DimensionMismatch(f"dimension {len(keys)} exceeds the dense cap {DENSE_CAP}")
    keys = [BasisState(*k) for k in keys]
    total = np.eye(len(keys), dtype=complex)
    for st in steps:
        total = step_to_dense(st, keys) @ total
    return DenseUnitary(total, np.array([k.vertex for k in keys], dtype=np.int64), keys)


def read_matrix(path: str | Path) -> np.ndarray:
    """Text format: first line the dimension, then ``row col re im`` lines (0-indexed, unlisted entries zero)."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    dim = int(lines[0].split()[0])
    m = np.zeros((dim, dim), dtype=complex)
    for ln in lines[1:]:
        r, c, re, im = ln.split()
        m[int(r), int(c)] = complex(float(re), float(im))
    return m


def write_matrix(m: np.ndarray, path: str | Path, tol: float = 0.0) -> None:
    rows = [f"{m.shape[0]}"]
    for r, c in zip(*np.nonzero(np.abs(m) > tol)):
        rows.append(f"{r} {c} {m[r, c].real:.17g} {m[r, c].imag:.17g}")
    Path(path).write_text("\n".join(rows) + "\n")


def vertex_annotation(dim: int, g: Graph) -> np.ndarray:
    """Default annotation for a bare matrix: ``dim / n`` consecutive states per vertex."""
    if dim % g.n:
        raise DimensionMismatch(f"dimension {dim} is not a multiple of the {g.n} vertices")
    return np.repeat(np.arange(1, g.n + 1), dim // g.n)


def random_edge_hamiltonian(g: Graph, edge: tuple[int, int], rng: np.random.Generator,
                            norm: float = np.pi / 2) -> tuple[np.ndarray, np.ndarray]:
    """Random Hermitian generator on one edge (one state per vertex), scaled to operator norm ``norm``."""
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    h2 = (a + a.conj().T) / 2
    h2 *= norm * rng.uniform(0.05, 1.0) / max(np.abs(np.linalg.eigvalsh(h2)).max(), 1e-12)
    H = np.zeros((g.n, g.n), dtype=complex)
    ix = [edge[0] - 1, edge[1] - 1]
    H[np.ix_(ix, ix)] = h2
    return H, scipy.linalg.expm(1j * H)


__all__ = [
    "DenseUnitary", "Verdict", "EigendecompositionFailure", "check_z_local", "check_c_local",
    "check_h_local", "check_c_local_dense", "compose_to_dense", "step_to_dense", "read_matrix", "write_matrix",
    "vertex_annotation", "random_edge_hamiltonian", "CLocalReport", "SimulationError",
]
