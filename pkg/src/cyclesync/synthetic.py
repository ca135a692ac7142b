"""Seeded synthetic scenarios: Gaussian cameras, Erdos-Renyi graphs, corruption models.

Randomness comes from counter-based Philox generators. Each ingredient
draws from its own sub-stream of the scenario seed,

    0 locations   1 graph   2 noise   3 corruption flags   4 alternate locations

so changing ``q`` or ``sigma`` leaves the graph and the true poses fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .directions import DirectionMeasurements
from .graph import ViewGraph, build_view_graph, erdos_renyi_edges
from .rotation import RotationMeasurements, random_rotations, rotation_from_axis_angle

STREAM_LOCATIONS = 0
STREAM_GRAPH = 1
STREAM_NOISE = 2
STREAM_FLAGS = 3
STREAM_ALTERNATE = 4


def substream(seed: int, stream: int) -> np.random.Generator:
    """Independent Philox generator for ``(seed, stream)``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SyntheticScenario:
    n: int = 100
    p: float = 0.5
    q: float = 0.0
    sigma: float = 0.0
    model: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("need at least 3 cameras")
        if not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")
        if not 0 <= self.q <= 1:
            raise ValueError("q must lie in [0, 1]")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.model not in ("uniform", "adversarial"):
            raise ValueError(f"unknown corruption model {self.model!r}")
        if self.model == "adversarial" and self.q >= 0.5:
            raise ValueError("adversarial model requires q < 0.5")


@dataclass(frozen=True)
class GroundTruth:
    locations: np.ndarray
    rotations: np.ndarray
    corrupted: np.ndarray
    directions: np.ndarray | None = None
    alternate_locations: np.ndarray | None = None
    connected: bool = True


def _normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _sample_graph(n: int, p: float, seed: int) -> ViewGraph:
    return build_view_graph(n, erdos_renyi_edges(n, p, substream(seed, STREAM_GRAPH)))


def sample_scenario(scn: SyntheticScenario) -> tuple[ViewGraph, GroundTruth, DirectionMeasurements]:
    """Draw a location scenario.

    Clean edges observe ``normalize(t*_i - t*_j + sigma eps_ij)``. Corrupted
    edges observe ``normalize(eps_ij)`` under the uniform model, or
    ``normalize(t^c_i - t^c_j + sigma eps_ij)`` for a second Gaussian point
    set ``t^c`` under the adversarial model.
    """
    locs = substream(scn.seed, STREAM_LOCATIONS).standard_normal((scn.n, 3))
    graph = _sample_graph(scn.n, scn.p, scn.seed)
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    eps = substream(scn.seed, STREAM_NOISE).standard_normal((graph.m, 3))
    corrupted = substream(scn.seed, STREAM_FLAGS).random(graph.m) < scn.q
    alt = substream(scn.seed, STREAM_ALTERNATE).standard_normal((scn.n, 3))

    truth = _normalize(locs[i] - locs[j])
    clean = _normalize(locs[i] - locs[j] + scn.sigma * eps) if scn.sigma > 0 else truth.copy()
    if scn.model == "uniform":
        bad = _normalize(eps)
    else:
        bad = _normalize(alt[i] - alt[j] + scn.sigma * eps)
    vectors = np.where(corrupted[:, None], bad, clean)

    gt = GroundTruth(
        locations=locs,
        rotations=np.broadcast_to(np.eye(3), (scn.n, 3, 3)).copy(),
        corrupted=corrupted,
        directions=truth,
        alternate_locations=alt if scn.model == "adversarial" else None,
        connected=graph.is_connected(),
    )
    dirs = DirectionMeasurements(vectors, truth=truth, corrupted=corrupted)
    return graph, gt, dirs


def sample_rotation_scenario(
    n: int, p: float, q: float, sigma_rot: float, seed: int
) -> tuple[ViewGraph, GroundTruth, RotationMeasurements]:
    """Uniform-corruption rotation scenario.

    Clean edges observe ``R*_i R*_j^T`` left-multiplied by a rotation of
    angle ``|N(0, sigma_rot)|`` about a uniform axis; corrupted edges
    observe an independent Haar-uniform rotation.
    """
    if not 0 < p <= 1 or not 0 <= q <= 1 or sigma_rot < 0:
        raise ValueError("invalid rotation scenario parameters")
    rots = random_rotations(n, substream(seed, STREAM_LOCATIONS))
    graph = _sample_graph(n, p, seed)
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    noise_rng = substream(seed, STREAM_NOISE)
    axes = _normalize(noise_rng.standard_normal((graph.m, 3)))
    angles = np.abs(noise_rng.standard_normal(graph.m)) * sigma_rot
    corrupted = substream(seed, STREAM_FLAGS).random(graph.m) < q
    bad = random_rotations(graph.m, substream(seed, STREAM_ALTERNATE))

    clean = rots[i] @ np.transpose(rots[j], (0, 2, 1))
    if sigma_rot > 0:
        clean = rotation_from_axis_angle(axes * angles[:, None]) @ clean
    meas = np.where(corrupted[:, None, None], bad, clean)
    gt = GroundTruth(
        locations=np.zeros((n, 3)),
        rotations=rots,
        corrupted=corrupted,
        connected=graph.is_connected(),
    )
    return graph, gt, RotationMeasurements(meas, corrupted=corrupted)
