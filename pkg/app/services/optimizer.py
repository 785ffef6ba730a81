"""Per-cell network assistance: which transmitters a BS helps, and how many repetitions remain.

The greedy rests on two monotonicities: achieved reliability grows with τ_m, and moving
assistance to a nearer transmitter never hurts because q(r) decreases in r.
"""
import itertools
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from app.core.config import settings
from app.core.errors import InfeasibleError
from app.models.network import (
    AssistSolution,
    CellInstance,
    FeasibilityCheck,
    PolicyAggregate,
    PolicyHistogram,
    RelaxedEvaluation,
)
from app.models.params import SystemParams
from app.services.analytic import mean_covered, q_factor
from app.services.integrals import integrate

logger = logging.getLogger(__name__)

DEFAULT_BIN_WIDTH = 25.0
DEFAULT_MAX_DISTANCE = 1000.0
DEFAULT_EXTENT = 5000.0

Policy = Union[PolicyHistogram, Tuple[Sequence[float], Sequence[float]]]


class AssistOptimizer:
    """Solver bound to one SystemParams; caches N̄(τ) since every cell reuses it."""

    def __init__(self, params: SystemParams, tau_cap: Optional[int] = None):
        self.params = params
        self.tau_cap = tau_cap or settings.TAU_CAP
        self.n_max = params.n_max
        self._covered: Dict[int, float] = {}
        self._covered_lock = threading.Lock()
        self._bin_mass: Dict[Tuple[float, ...], Tuple[np.ndarray, np.ndarray]] = {}

    def covered(self, tau: int) -> float:
        """N̄(τ), memoized; worker threads share one cache."""
        with self._covered_lock:
            if tau not in self._covered:
                self._covered[tau] = mean_covered(self.params.replace(tau_m=tau))
                logger.debug(f"N(tau={tau}) = {self._covered[tau]:.6g} of {self.n_max:.6g}")
            return self._covered[tau]

    def h_value(self, r: float, tau: int, g: float) -> float:
        """Expected covered receivers of a transmitter at distance r from its BS."""
        if not 0.0 <= g <= 1.0:
            raise ValueError(f"assistance g must lie in [0, 1], got {g}")
        base = self.covered(tau)
        if g == 0:
            return base
        return base + g * q_factor(r, self.params) * (self.n_max - base)

    def check_feasible(self, instance: CellInstance, tau: int, assist: Sequence[int]) -> FeasibilityCheck:
        if len(assist) != instance.size:
            raise ValueError(f"assist has {len(assist)} entries for {instance.size} transmitters")
        if instance.size == 0:
            return FeasibilityCheck(feasible=True, achieved=1.0)
        total = math.fsum(self.h_value(r, tau, g) for r, g in zip(instance.distances, assist))
        achieved = total / (instance.size * self.n_max)
        within_budget = sum(assist) <= instance.budget
        return FeasibilityCheck(feasible=within_budget and achieved >= instance.eta, achieved=achieved)

    @staticmethod
    def _prefix(instance: CellInstance, k: int) -> Tuple[int, ...]:
        return tuple(1 if i < k else 0 for i in range(instance.size))

    def _max_prefix(self, instance: CellInstance) -> int:
        return min(instance.size, instance.budget)

    def _doubling(self):
        tau = 1
        while tau < self.tau_cap:
            yield tau
            tau *= 2
        yield self.tau_cap

    def find_tau_max(self, instance: CellInstance) -> int:
        """A τ at which the cell is feasible, found by doubling; unassisted first, then full budget."""
        if instance.size == 0:
            return 1
        unassisted = self._prefix(instance, 0)
        for tau in self._doubling():
            if self.check_feasible(instance, tau, unassisted).feasible:
                return tau
        full = self._prefix(instance, self._max_prefix(instance))
        best = 0.0
        for tau in self._doubling():
            check = self.check_feasible(instance, tau, full)
            best = max(best, check.achieved)
            if check.feasible:
                return tau
        raise InfeasibleError(
            f"cell of {instance.size} transmitters cannot reach eta={instance.eta:g} "
            f"within tau_m <= {self.tau_cap} (best {best:.6f})",
            best_reliability=best,
            tau_cap=self.tau_cap,
        )

    def solve_cell(self, instance: CellInstance) -> AssistSolution:
        """Minimal τ_m, then the shortest nearest-first prefix of assisted transmitters."""
        if instance.size == 0:
            return AssistSolution(tau_star=1, assist=(), achieved_reliability=1.0, feasible=True)
        full = self._prefix(instance, self._max_prefix(instance))
        low, high = 1, self.find_tau_max(instance)
        while low < high:
            middle = (low + high) // 2
            if self.check_feasible(instance, middle, full).feasible:
                high = middle
            else:
                low = middle + 1
        tau_star = low
        for k in range(self._max_prefix(instance) + 1):
            assist = self._prefix(instance, k)
            check = self.check_feasible(instance, tau_star, assist)
            if check.feasible:
                return AssistSolution(
                    tau_star=tau_star, assist=assist, achieved_reliability=check.achieved, feasible=True
                )
        # unreachable: the full prefix is feasible at tau_star
        raise AssertionError("binary search returned an infeasible tau")

    def solve_exhaustive(self, instance: CellInstance, tau_limit: int) -> Optional[AssistSolution]:
        """Brute force over τ ≤ tau_limit and all 2^M assist vectors; the reference for `solve_cell`."""
        if instance.size == 0:
            return AssistSolution(tau_star=1, assist=(), achieved_reliability=1.0, feasible=True)
        for tau in range(1, tau_limit + 1):
            best = None
            for assist in itertools.product((0, 1), repeat=instance.size):
                if sum(assist) > instance.budget:
                    continue
                check = self.check_feasible(instance, tau, assist)
                if check.feasible and (best is None or sum(assist) < sum(best[0])):
                    best = (assist, check.achieved)
            if best is not None:
                return AssistSolution(tau_star=tau, assist=best[0], achieved_reliability=best[1], feasible=True)
        return None

    # ------------------------------------------------------------------
    # spatially averaged policy
    # ------------------------------------------------------------------

    @staticmethod
    def _steps(policy: Policy) -> Tuple[Tuple[float, ...], np.ndarray]:
        if isinstance(policy, PolicyHistogram):
            return tuple(policy.edges), np.asarray(policy.policy_values(), dtype=float)
        edges, values = policy
        edges, values = tuple(float(e) for e in edges), np.asarray(values, dtype=float)
        if len(edges) != len(values) or not edges or edges[0] != 0.0:
            raise ValueError("a policy needs one value per lower bin edge, starting at 0")
        if np.any(np.diff(edges) <= 0) or np.any((values < 0) | (values > 1)):
            raise ValueError("policy edges must increase and values lie in [0, 1]")
        return edges, values

    def _masses(self, edges: Tuple[float, ...]) -> Tuple[np.ndarray, np.ndarray]:
        """Per-bin Rayleigh mass of D and per-bin ∫ q(r)·f_D(r) dr."""
        if edges not in self._bin_mass:
            density = self.params.lambda_b
            uppers = list(edges[1:]) + [math.inf]
            survival = lambda r: math.exp(-density * math.pi * r ** 2)
            mass = np.array([survival(lo) - survival(hi) for lo, hi in zip(edges, uppers)])

            def weighted(r: float) -> float:
                return q_factor(r, self.params) * 2.0 * math.pi * density * r * survival(r)

            assisted = np.array([integrate(weighted, lo, hi, label="relaxed bin") for lo, hi in zip(edges, uppers)])
            self._bin_mass[edges] = (mass, assisted)
        return self._bin_mass[edges]

    def evaluate_relaxed(self, policy: Policy, tau: int) -> RelaxedEvaluation:
        """E_D[g₀(D)] and E_D[h(D; τ, g₀(D))]/N̄_max for a piecewise-constant policy."""
        edges, values = self._steps(policy)
        mass, assisted = self._masses(edges)
        base = self.covered(tau)
        reliability = (base + float(values @ assisted) * (self.n_max - base)) / self.n_max
        return RelaxedEvaluation(
            resource_usage=float(values @ mass),
            reliability=reliability,
            usage_limit=self.params.budget * self.params.lambda_b / self.params.lambda_m,
            reliability_target=self.params.eta,
        )

    def relaxed_tau(self, policy: Policy) -> Optional[int]:
        """Smallest τ whose spatially averaged reliability under `policy` reaches η."""

        def meets(tau: int) -> bool:
            return self.evaluate_relaxed(policy, tau).reliability >= self.params.eta

        high = next((tau for tau in self._doubling() if meets(tau)), None)
        if high is None:
            logger.warning(f"relaxed policy misses eta={self.params.eta:g} even at tau={self.tau_cap}")
            return None
        low = high // 2 + 1 if high > 1 else 1
        while low < high:
            middle = (low + high) // 2
            if meets(middle):
                high = middle
            else:
                low = middle + 1
        return low

    def sample_cells(self, extent: float, rng: np.random.Generator) -> List[CellInstance]:
        """BS and transmitter PPPs in B(0, extent); each transmitter joins its nearest BS's cell."""
        params = self.params

        def scatter(density: float) -> np.ndarray:
            count = rng.poisson(density * math.pi * extent ** 2)
            radii = extent * np.sqrt(rng.uniform(size=count))
            angles = rng.uniform(0.0, 2.0 * math.pi, size=count)
            return np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])

        bs = scatter(params.lambda_b)
        tx = scatter(params.lambda_m)
        if len(bs) == 0:
            return []
        cells: List[List[float]] = [[] for _ in range(len(bs))]
        if len(tx):
            distances, owners = cKDTree(bs).query(tx)
            for r, z in zip(distances, owners):
                cells[int(z)].append(max(float(r), 1e-9))
        return [CellInstance.from_params(distances, params) for distances in cells]

    def aggregate_policy(
        self,
        realizations: int,
        bin_width: float = DEFAULT_BIN_WIDTH,
        extent: float = DEFAULT_EXTENT,
        max_distance: float = DEFAULT_MAX_DISTANCE,
        seed: Optional[int] = None,
        threads: int = 1,
    ) -> PolicyAggregate:
        """ḡ₀(r) and τ̄_m over sampled networks; realization i draws from SeedSequence([seed, i])."""
        seed = settings.SEED if seed is None else seed
        if realizations < 1:
            raise ValueError("need at least one network realization")

        def realize(index: int):
            rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
            histogram = PolicyHistogram.empty(bin_width, max_distance)
            taus, empty, infeasible = [], 0, 0
            for cell in self.sample_cells(extent, rng):
                if cell.size == 0:
                    empty += 1
                    continue
                try:
                    solution = self.solve_cell(cell)
                except InfeasibleError as e:
                    infeasible += 1
                    logger.warning(f"realization {index}: {e}")
                    continue
                histogram = histogram.record(cell.distances, solution.assist)
                taus.append(solution.tau_star)
            return histogram, taus, empty, infeasible

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(realize, range(realizations)))
        else:
            parts = [realize(i) for i in range(realizations)]

        histogram = PolicyHistogram.empty(bin_width, max_distance)
        taus: List[int] = []
        empty = infeasible = 0
        for part_histogram, part_taus, part_empty, part_infeasible in parts:
            histogram = histogram.merge(part_histogram)
            taus.extend(part_taus)
            empty += part_empty
            infeasible += part_infeasible
        vacant = sum(1 for c in histogram.counts if c == 0)
        if vacant:
            logger.warning(f"{vacant} of {len(histogram.counts)} distance bins received no transmitters")
        tau_bar = float(np.mean(taus)) if taus else float("nan")
        relaxed = self.relaxed_tau(histogram) if taus else None
        logger.info(
            f"aggregated {len(taus)} cells over {realizations} realizations: "
            f"tau_bar={tau_bar:.3f}, relaxed tau={relaxed}, empty={empty}, infeasible={infeasible}"
        )
        return PolicyAggregate(
            histogram=histogram,
            tau_bar=tau_bar,
            relaxed_tau=relaxed,
            realizations=realizations,
            cells=len(taus),
            empty_cells=empty,
            infeasible_cells=infeasible,
        )


@lru_cache(maxsize=64)
def optimizer_for(params: SystemParams) -> AssistOptimizer:
    return AssistOptimizer(params)


def h_value(r: float, tau: int, g: float, params: SystemParams) -> float:
    return optimizer_for(params).h_value(r, tau, g)


def check_feasible(instance: CellInstance, tau: int, assist: Sequence[int]) -> FeasibilityCheck:
    return optimizer_for(instance.params).check_feasible(instance, tau, assist)


def find_tau_max(instance: CellInstance) -> int:
    return optimizer_for(instance.params).find_tau_max(instance)


def solve_cell(instance: CellInstance) -> AssistSolution:
    return optimizer_for(instance.params).solve_cell(instance)


def evaluate_relaxed(policy: Policy, tau: int, params: SystemParams) -> RelaxedEvaluation:
    return optimizer_for(params).evaluate_relaxed(policy, tau)


def relaxed_tau(policy: Policy, params: SystemParams) -> Optional[int]:
    return optimizer_for(params).relaxed_tau(policy)
