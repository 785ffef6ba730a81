"""Palm Monte Carlo over the BS, transmitter and receiver point processes.

Trials are cut into fixed batches; batch b draws from SeedSequence([seed, b]) so the
estimates do not depend on how many threads run the batches.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from app.models.network import NetworkSnapshot
from app.models.params import SimConfig, SystemParams
from app.models.results import CoverageEstimate, JointCoverageEstimate
from app.services.analytic import threshold_distance
from app.services.channel import received_gain

logger = logging.getLogger(__name__)


def probe_positions(y1_dist: float, y2_dist: float, separation: float) -> np.ndarray:
    """Two receivers at the given link lengths and mutual separation; y₂ on the +x axis, y₁ above it."""
    if y1_dist <= 0 or y2_dist <= 0:
        raise ValueError("probe distances must be positive")
    slack = 1e-9 * max(y1_dist, y2_dist)
    if separation + slack < abs(y1_dist - y2_dist) or separation > y1_dist + y2_dist + slack:
        raise ValueError(f"no triangle has sides {y1_dist:g}, {y2_dist:g} and separation {separation:g}")
    cos_angle = (y1_dist ** 2 + y2_dist ** 2 - separation ** 2) / (2.0 * y1_dist * y2_dist)
    angle = math.acos(min(1.0, max(-1.0, cos_angle)))
    return np.array([[y1_dist * math.cos(angle), y1_dist * math.sin(angle)], [y2_dist, 0.0]])


class MonteCarloSimulator:
    def __init__(self, params: SystemParams, config: Optional[SimConfig] = None):
        self.params = params
        self.config = config or SimConfig()
        self.window = self.config.resolve_window(params)
        self.model = params.path_loss_model()

    # ------------------------------------------------------------------
    # batching
    # ------------------------------------------------------------------

    def _batch_sizes(self) -> List[int]:
        size = self.config.batch_size
        full, rest = divmod(self.config.trials, size)
        return [size] * full + ([rest] if rest else [])

    def _stream(self, batch: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.config.rng_seed, batch]))

    def _run(self, kernel: Callable[[np.random.Generator, int], np.ndarray], label: str) -> np.ndarray:
        sizes = self._batch_sizes()
        started = time.perf_counter()

        def work(batch: int) -> np.ndarray:
            return kernel(self._stream(batch), sizes[batch])

        if self.config.threads > 1 and len(sizes) > 1:
            with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
                parts = list(pool.map(work, range(len(sizes))))
        else:
            parts = [work(b) for b in range(len(sizes))]
        logger.debug(
            f"{label}: {self.config.trials} trials in {len(sizes)} batches "
            f"({time.perf_counter() - started:.2f}s, window {self.window:.0f} m)"
        )
        return np.concatenate(parts, axis=0)

    # ------------------------------------------------------------------
    # sampling primitives
    # ------------------------------------------------------------------

    @staticmethod
    def _scatter(
        rng: np.random.Generator, density: float, radius: float, size: int, inner: float = 0.0
    ) -> Tuple[np.ndarray, np.ndarray]:
        """`size` independent PPPs in B(0, radius), flattened with an owner index per point.

        A point drawn inside B(0, inner) is resampled, so the count keeps its Poisson law over
        the whole disk and the positions are uniform over the annulus.
        """
        counts = rng.poisson(density * math.pi * radius ** 2, size=size)
        total = int(counts.sum())
        if inner > 0:
            radii = np.sqrt(inner ** 2 + (radius ** 2 - inner ** 2) * rng.uniform(size=total))
        else:
            radii = radius * np.sqrt(rng.uniform(size=total))
        angles = rng.uniform(0.0, 2.0 * math.pi, size=total)
        points = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
        return points, np.repeat(np.arange(size), counts)

    def _distance(self, points: np.ndarray, target: np.ndarray) -> np.ndarray:
        return np.maximum(np.hypot(points[..., 0] - target[0], points[..., 1] - target[1]), self.config.min_link_distance)

    def _inner(self) -> float:
        return min(self.config.min_link_distance, self.params.cluster_radius)

    def _mobile(self) -> bool:
        return self.config.mobility == "high-mobility"

    def _slot_successes(self, rng: np.random.Generator, size: int, probes: np.ndarray, slots: int) -> np.ndarray:
        """(size, probes, slots) SINR ≥ T indicators for the typical transmitter's links."""
        params = self.params
        snr_inv = params.snr_inv()
        signal_distance = np.maximum(np.hypot(probes[:, 0], probes[:, 1]), self.config.min_link_distance)
        signal_loss = self.model.intercept * signal_distance ** self.model.alpha
        out = np.empty((size, len(probes), slots), dtype=bool)
        points, owner = self._scatter(rng, params.lambda_m, self.window, size)
        for slot in range(slots):
            if slot > 0 and self._mobile():
                points, owner = self._scatter(rng, params.lambda_m, self.window, size)
            for j, probe in enumerate(probes):
                signal = rng.exponential(size=size) / signal_loss[j]
                gains = received_gain(rng.exponential(size=len(points)), self._distance(points, probe), self.model)
                interference = np.bincount(owner, weights=gains, minlength=size)
                out[:, j, slot] = signal >= params.detection_threshold * (snr_inv + interference)
        return out

    def _downlink(self, rng: np.random.Generator, size: int, probe: np.ndarray) -> np.ndarray:
        """Nearest-BS downlink success at `probe`; every other BS in the window interferes."""
        params = self.params
        success = np.zeros(size, dtype=bool)
        bs, owner = self._scatter(rng, params.lambda_b, self.window, size)
        if len(bs) == 0:
            return success
        gains = received_gain(rng.exponential(size=len(bs)), self._distance(bs, probe), self.model)
        to_origin = np.hypot(bs[:, 0], bs[:, 1])
        order = np.lexsort((to_origin, owner))
        trials, first = np.unique(owner[order], return_index=True)
        serving = gains[order[first]]
        interference = np.maximum(np.bincount(owner, weights=gains, minlength=size)[trials] - serving, 0.0)
        success[trials] = serving >= params.detection_threshold * (params.snr_c_inv() + interference)
        return success

    # ------------------------------------------------------------------
    # operations
    # ------------------------------------------------------------------

    def sample_snapshot(self, rng: Optional[np.random.Generator] = None) -> NetworkSnapshot:
        """One window realization with the typical transmitter added at the origin."""
        rng = rng or self._stream(0)
        params = self.params
        others, _ = self._scatter(rng, params.lambda_m, self.window, 1)
        tx = np.vstack([np.zeros((1, 2)), others])
        bs = np.empty((0, 2))
        if self.config.assist != "none":
            bs, _ = self._scatter(rng, params.lambda_b, self.window, 1)
        receivers = []
        for index, x in enumerate(tx):
            local, _ = self._scatter(rng, params.lambda_r, params.cluster_radius, 1, self._inner())
            cluster = local + x
            if index > 0:
                cluster = cluster[np.hypot(cluster[:, 0], cluster[:, 1]) <= self.window]
            receivers.append(cluster)
        return NetworkSnapshot(bs_points=bs, tx_points=tx, receivers=receivers, window_radius=self.window)

    def estimate_coverage(self, y_dist: float) -> CoverageEstimate:
        """P(some slot among τ_m reaches a receiver at distance y_dist)."""
        probe = self._probe(y_dist)
        slots = self.params.tau_m
        hits = self._run(lambda rng, size: self._slot_successes(rng, size, probe, slots)[:, 0, :].any(axis=1), "coverage")
        return CoverageEstimate.from_bernoulli(hits)

    def estimate_all_slots(self, y_dist: float, n: int) -> CoverageEstimate:
        """P(all of n slots succeed), the simulated p_n."""
        if n < 1:
            raise ValueError(f"n must be at least 1, got {n}")
        probe = self._probe(y_dist)
        hits = self._run(lambda rng, size: self._slot_successes(rng, size, probe, n)[:, 0, :].all(axis=1), "all slots")
        return CoverageEstimate.from_bernoulli(hits)

    def estimate_joint_coverage(self, y1_dist: float, y2_dist: float, separation: float, n: int) -> JointCoverageEstimate:
        probes = probe_positions(y1_dist, y2_dist, separation)

        def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
            return self._slot_successes(rng, size, probes, n).all(axis=2)

        events = self._run(kernel, "joint coverage")
        first, second = events[:, 0], events[:, 1]
        return JointCoverageEstimate(
            joint=CoverageEstimate.from_bernoulli(first & second),
            marginal1=CoverageEstimate.from_bernoulli(first),
            marginal2=CoverageEstimate.from_bernoulli(second),
            conditional=CoverageEstimate.from_ratio(first, second),
        )

    def assisted_outcomes(self, y_dist: float) -> Tuple[np.ndarray, np.ndarray]:
        """Per-trial (D2D success, D2D-or-downlink success) at a probe receiver.

        D2D draws come before the BS draws in every batch, so the first array matches
        `estimate_coverage` under the same seed.
        """
        probe = self._probe(y_dist)
        slots = self.params.tau_m

        def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
            d2d = self._slot_successes(rng, size, probe, slots)[:, 0, :].any(axis=1)
            downlink = self._downlink(rng, size, probe[0])
            return np.column_stack([d2d, d2d | downlink])

        outcomes = self._run(kernel, "assisted coverage")
        return outcomes[:, 0], outcomes[:, 1]

    def estimate_assisted_coverage(self, y_dist: float) -> CoverageEstimate:
        _, assisted = self.assisted_outcomes(y_dist)
        return CoverageEstimate.from_bernoulli(assisted)

    def _covered_in_cluster(self, rng: np.random.Generator) -> float:
        params = self.params
        threshold = params.detection_threshold
        receivers, _ = self._scatter(rng, params.lambda_r, params.cluster_radius, 1, self._inner())
        interferers, _ = self._scatter(rng, params.lambda_m, self.window, 1)
        count = len(receivers)
        signal_distance = np.hypot(receivers[:, 0], receivers[:, 1])
        covered = np.zeros(count, dtype=bool)
        for slot in range(params.tau_m):
            if slot > 0 and self._mobile():
                interferers, _ = self._scatter(rng, params.lambda_m, self.window, 1)
            signal = received_gain(rng.exponential(size=count), signal_distance, self.model)
            spread = np.maximum(cdist(receivers, interferers), self.config.min_link_distance)
            interference = received_gain(rng.exponential(size=spread.shape), spread, self.model).sum(axis=1)
            covered |= signal >= threshold * (params.snr_inv() + interference)
        if self.config.assist != "none":
            bs, _ = self._scatter(rng, params.lambda_b, self.window, 1)
            if len(bs):
                serving = int(np.argmin(np.hypot(bs[:, 0], bs[:, 1])))
                spread = np.maximum(cdist(receivers, bs), self.config.min_link_distance)
                gains = received_gain(rng.exponential(size=spread.shape), spread, self.model)
                wanted = gains[:, serving]
                interference = gains.sum(axis=1) - wanted
                covered |= wanted >= threshold * (params.snr_c_inv() + interference)
        return float(covered.sum())

    def estimate_mean_covered(self) -> CoverageEstimate:
        """Mean number of covered receivers in the typical cluster (BS-assisted if the config says so)."""

        def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
            return np.array([self._covered_in_cluster(rng) for _ in range(size)])

        return CoverageEstimate.from_samples(self._run(kernel, "mean covered"))

    def estimate_null_fraction(self) -> CoverageEstimate:
        """Fraction of clusters with no receiver inside min(R, R_th) of the transmitter."""
        params = self.params
        reach = min(params.cluster_radius, threshold_distance(params))

        def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
            receivers, owner = self._scatter(rng, params.lambda_r, params.cluster_radius, size)
            inside = np.hypot(receivers[:, 0], receivers[:, 1]) <= reach
            return np.bincount(owner, weights=inside, minlength=size) == 0

        return CoverageEstimate.from_bernoulli(self._run(kernel, "null clusters"))

    def _probe(self, y_dist: float) -> np.ndarray:
        if y_dist < self.config.min_link_distance:
            raise ValueError(f"y_dist must be at least min_link_distance {self.config.min_link_distance:g} m, got {y_dist}")
        return np.array([[float(y_dist), 0.0]])
