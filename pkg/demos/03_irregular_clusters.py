"""Searching a graph that is only roughly three-dimensional.

Random pegs carve the graph into clusters, clusters into super-clusters, and
so on.  The search walks from each peg to its children's pegs, so it only
works when every cluster is tight; the audit checks that against the ball
growth constant kappa of the graph.  Deleting a few edges keeps the graph
d-dimensional, and the search carries on unchanged.
"""
import numpy as np

from spatialsearch.clustersearch import audit_goodness, build_cluster_tree, run_irregular_search
from spatialsearch.graph import dimension_constant, make_grid

g = make_grid(3, 8)
h = g.without_edges([(1, 2), (100, 164), (378, 379), (476, 484), (388, 389)])
for name, graph in (("L_3(512)", g), ("L_3(512) minus 5 edges", h)):
    kappa = dimension_constant(graph, 3)
    tree = build_cluster_tree(graph, 50, 0.75, seed=3)
    audit = audit_goodness(tree, kappa, graph.n)
    print(f"\n{name}: kappa = {kappa:.5f}, cluster sizes {[round(s, 1) for s in tree.sizes]}, K = {tree.K[1:]}")
    for r, (rad, thr) in enumerate(zip(audit.radii[1:], audit.thresholds[1:]), start=1):
        print(f"  level {r}: {len(rad)} clusters, largest radius {rad.max():.0f}, threshold {thr:.2f}")
    x = np.zeros(graph.n, dtype=np.int8)
    x[200] = 1
    out = run_irregular_search(graph, x, seed=3, kappa=kappa)
    print(f"  per run {out.per_run_probability:.4f}, overall {out.success_probability:.4f} "
          f"with {out.extra['steps_per_run']} steps per run")
