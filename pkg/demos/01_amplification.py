"""How amplitude amplification lifts a weak search.

A synthetic algorithm finds the witness with probability eps.  Running it
2m+1 times with reflections in between rotates the state by a fixed angle,
so the success probability follows sin^2((2m+1) asin sqrt(eps)).
"""
from spatialsearch.amplify import (ampl_lower_bound, optimal_rounds, predicted_success, run_amplification,
                                   synthetic_spec)
from spatialsearch.simcore import answer_probability

eps = 1 / 25
print(f"starting probability eps = {eps}")
print(f"{'m':>3} {'calls':>5} {'simulated':>10} {'closed form':>12} {'polynomial bound':>17}")
_, m_max = ampl_lower_bound(eps, 0)
for m in range(6):
    res = run_amplification(synthetic_spec(eps, m))
    bound = ampl_lower_bound(eps, m)[0] if m <= m_max else float("nan")
    print(f"{m:>3} {res.calls:>5} {answer_probability(res.state):>10.6f} {predicted_success(eps, m):>12.6f} "
          f"{bound:>17.6f}")
print(f"\nthe bound is only claimed up to m = {m_max}; past that the rotation overshoots")
print(f"optimal_rounds(eps) = {optimal_rounds(eps)}")
