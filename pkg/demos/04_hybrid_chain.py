"""Why searching a starfish needs time proportional to its legs.

The algorithm is traced on the all-zero input to see how much amplitude
visits each leg after each query.  Marking the tip of the least-visited leg
and switching the input over gradually, one stride of queries at a time,
bounds how far the final state can move.  Every link of the inequality chain
is printed next to the quantities it compares.
"""
from spatialsearch.hybridlab import starfish_experiment

lab = starfish_experiment(legs=6, leg_len=2)
t, r = lab.trace, lab.report
print(f"queries T = {t.T}, stride {t.stride}, hybrids w = {t.w}, least visited leg {t.regions.names[t.j_star]}")
print(f"{'q':>3} {'Gamma':>10} {'D(q-1,q)':>10} {'4 Gamma':>10}")
for row in t.rows()[:8]:
    print(f"{row['q']:>3} {row['Gamma']:>10.6f} {row['D']:>10.6f} {row['bound']:>10.6f}")
print("...")
print(f"sqrt D(0,w)        = {r.sqrt_D0w:.6f}")
print(f"sum sqrt D         = {r.sum_sqrt_D:.6f}")
print(f"2 sum sqrt Gamma   = {r.two_sum_sqrt_gamma:.6f}")
print(f"2 sqrt(w sum Gamma) = {r.cauchy_schwarz:.6f}")
print(f"chain holds: {r.holds}; distance frozen after the last differing query: {t.monotone}")
print(f"success on all-zero {lab.success_x0:.4f}, on the marked input {lab.success_y:.4f}")
