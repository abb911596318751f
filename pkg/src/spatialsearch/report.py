"""Result records shared by the search entry points and the experiment runner."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Optional


@dataclass
class CostReport:
    steps: int = 0
    queries: int = 0
    qubits_communicated: int = 0
    success_probability: float = 0.0
    wall_time: float = 0.0
    seed: int | None = None
    params: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class SearchOutcome:
    """``answer`` is the sampled measurement; ``success_probability`` is exact.

    On a marked input the success probability is the probability of reading 1;
    on an unmarked input it is the probability of (correctly) reading 0.
    """

    found_vertex: Optional[int]
    answer: int
    success_probability: float
    cost: CostReport
    per_run_probability: float = 0.0
    answer_one_probability: float = 0.0
    runs: int = 1
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        p = self.success_probability
        if not -1e-9 <= p <= 1 + 1e-9:
            raise ValueError(f"success probability {p} outside [0, 1]")
        self.success_probability = min(max(p, 0.0), 1.0)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["cost"] = self.cost.to_dict()
        return out
