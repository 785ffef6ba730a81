import math
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.params import SystemParams


class NetworkSnapshot(BaseModel):
    """One realization of the BS, transmitter and receiver fields in a disc window.

    `tx_points[0]` is the typical transmitter at the origin; `receivers[i]` belongs to `tx_points[i]`.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bs_points: np.ndarray
    tx_points: np.ndarray
    receivers: List[np.ndarray]
    window_radius: float = Field(gt=0)

    @property
    def typical_receivers(self) -> np.ndarray:
        return self.receivers[0]


class CellInstance(BaseModel):
    model_config = ConfigDict(frozen=True)

    distances: Tuple[float, ...]
    budget: int = Field(ge=0)
    eta: float = Field(ge=0, le=1)
    params: SystemParams

    @field_validator("distances", mode="before")
    @classmethod
    def _sort(cls, distances):
        return tuple(sorted(float(r) for r in distances))

    @field_validator("distances")
    @classmethod
    def _positive(cls, distances):
        if any(r <= 0 for r in distances):
            raise ValueError("transmitter-to-BS distances must be positive")
        return distances

    @classmethod
    def from_params(cls, distances, params: SystemParams) -> "CellInstance":
        return cls(distances=distances, budget=params.budget, eta=params.eta, params=params)

    @property
    def size(self) -> int:
        return len(self.distances)


class AssistSolution(BaseModel):
    tau_star: int = Field(ge=1)
    assist: Tuple[int, ...]
    achieved_reliability: float
    feasible: bool

    @property
    def assisted(self) -> int:
        return sum(self.assist)

    def is_prefix(self) -> bool:
        return all(a >= b for a, b in zip(self.assist, self.assist[1:]))


class FeasibilityCheck(BaseModel):
    feasible: bool
    achieved: float


class PolicyHistogram(BaseModel):
    """Per-distance-bin assistance counts; the last bin is open-ended.

    Counts and sums merge associatively; frequencies are formed only on read.
    """
    bin_width: float = Field(gt=0)
    edges: Tuple[float, ...]
    counts: List[int]
    assisted: List[int]

    @model_validator(mode="after")
    def _shape(self):
        if len(self.edges) != len(self.counts) or len(self.counts) != len(self.assisted):
            raise ValueError("one lower edge, count and assisted total per bin")
        if any(c < 0 for c in self.counts) or any(a < 0 for a in self.assisted):
            raise ValueError("histogram counts must be nonnegative")
        return self

    @classmethod
    def empty(cls, bin_width: float, max_distance: float) -> "PolicyHistogram":
        finite = int(math.ceil(max_distance / bin_width))
        edges = tuple(i * bin_width for i in range(finite + 1))
        return cls(bin_width=bin_width, edges=edges, counts=[0] * len(edges), assisted=[0] * len(edges))

    def bin_of(self, distance: float) -> int:
        return min(int(distance // self.bin_width), len(self.edges) - 1)

    def upper_edge(self, index: int) -> float:
        return self.edges[index + 1] if index + 1 < len(self.edges) else math.inf

    def record(self, distances, assist) -> "PolicyHistogram":
        counts = list(self.counts)
        assisted = list(self.assisted)
        for r, g in zip(distances, assist):
            i = self.bin_of(r)
            counts[i] += 1
            assisted[i] += int(g)
        return self.model_copy(update={"counts": counts, "assisted": assisted})

    def merge(self, other: "PolicyHistogram") -> "PolicyHistogram":
        if other.edges != self.edges:
            raise ValueError("cannot merge histograms with different bins")
        return self.model_copy(update={
            "counts": [a + b for a, b in zip(self.counts, other.counts)],
            "assisted": [a + b for a, b in zip(self.assisted, other.assisted)],
        })

    @property
    def frequencies(self) -> List[Optional[float]]:
        return [a / c if c else None for a, c in zip(self.assisted, self.counts)]

    def policy_values(self) -> List[float]:
        """Frequencies with empty bins read as no assistance."""
        return [f if f is not None else 0.0 for f in self.frequencies]


class PolicyAggregate(BaseModel):
    histogram: PolicyHistogram
    tau_bar: float
    relaxed_tau: Optional[int] = None
    realizations: int
    cells: int
    empty_cells: int
    infeasible_cells: int


class RelaxedEvaluation(BaseModel):
    resource_usage: float
    reliability: float
    usage_limit: float
    reliability_target: float

    @property
    def feasible(self) -> bool:
        return self.resource_usage <= self.usage_limit and self.reliability >= self.reliability_target
