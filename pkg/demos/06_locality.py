"""The simulator only accepts steps that respect the graph.

A step may mix amplitude inside one vertex or across one edge.  Building a
step that couples two distant vertices fails at construction; a dense
unitary can be audited three ways: zero pattern, block structure, or a
Hermitian generator supported on vertices and edges.
"""
import numpy as np

from spatialsearch.graph import make_grid
from spatialsearch.locality import (DenseUnitary, check_c_local_dense, check_h_local, check_z_local,
                                    random_edge_hamiltonian, vertex_annotation)
from spatialsearch.simcore import SWAP, Basis, LocalityViolation, LocalStep

path = make_grid(1, 4)
b = Basis(path)
try:
    LocalStep.from_blocks(b, [([(1, 0, 0), (3, 0, 0)], SWAP)], "jump")
except LocalityViolation as exc:
    print(f"rejected: {exc}")

g = make_grid(2, 3)
ann = vertex_annotation(g.n, g)
_, U = random_edge_hamiltonian(g, (1, 2), np.random.default_rng(6))
far = np.eye(g.n, dtype=complex)
far[[0, 8]] = far[[8, 0]]
for name, m in (("exp(iH) on edge 1-2", U), ("swap of corners 1 and 9", far)):
    u = DenseUnitary(m, ann)
    z_ok, _ = check_z_local(u, g)
    c_rep = check_c_local_dense(u, g)
    h_verdict, _ = check_h_local(u, g)
    print(f"{name}: Z-local {z_ok}, C-local {c_rep.ok}, H-local {h_verdict.value}")
