"""Grid-adaptive command sampling.

Commands (forward speed, yaw rate) are drawn from a weighted grid over
[-15, 15] x [-2, 2] m/s x rad/s at 0.1 resolution (301 x 41 cells).
Training starts from a small easy box around zero; whenever a held
command is tracked well enough (segment-mean tracking rewards above 80%
of their ceiling), the 5 x 5 cell neighborhood of that command gains
weight, so the reachable command set expands outward from demonstrated
competence.  Weights live in [0, 1] and only ever grow.
"""

from dataclasses import dataclass, field

import numpy as np

SPEED_BOUNDS = (-15.0, 15.0)
YAW_BOUNDS = (-2.0, 2.0)
RESOLUTION = 0.1
N_SPEED = 301
N_YAW = 41
INIT_SPEED = 0.5
INIT_YAW = 0.3
NEIGHBORHOOD_CELLS = 2   # +-0.2 at 0.1 resolution
WEIGHT_STEP = 0.1
THRESHOLD_FRACTION = 0.8


def speed_of_index(i):
    return SPEED_BOUNDS[0] + RESOLUTION * i


def yaw_of_index(j):
    return YAW_BOUNDS[0] + RESOLUTION * j


def index_of_command(speed, yaw):
    """Nearest cell, clipped to the grid."""
    i = int(round((speed - SPEED_BOUNDS[0]) / RESOLUTION))
    j = int(round((yaw - YAW_BOUNDS[0]) / RESOLUTION))
    return min(max(i, 0), N_SPEED - 1), min(max(j, 0), N_YAW - 1)


@dataclass
class CommandGrid:
    weights: np.ndarray = field(default_factory=lambda: _initial_weights())
    updates: int = 0
    tracking_max: float = 8.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (N_SPEED, N_YAW):
            raise ValueError(f"grid must be {N_SPEED}x{N_YAW}, got {self.weights.shape}")
        if np.any(self.weights < 0.0) or np.any(self.weights > 1.0):
            raise ValueError("cell weights must lie in [0, 1]")
        if not np.any(self.weights > 0.0):
            raise ValueError("grid needs at least one positive weight")

    @property
    def threshold(self):
        return THRESHOLD_FRACTION * self.tracking_max

    def sample(self, rng):
        """Draw a cell by weight, then jitter uniformly inside it."""
        flat = self.weights.ravel()
        cell = rng.choice(flat.size, p=flat / flat.sum())
        i, j = divmod(cell, N_YAW)
        half = RESOLUTION / 2.0
        speed = speed_of_index(i) + rng.uniform(-half, half)
        yaw = yaw_of_index(j) + rng.uniform(-half, half)
        return np.array([speed, yaw])

    def update(self, command, mean_forward_reward, mean_yaw_reward):
        """Gated neighborhood expansion; returns True when it fired."""
        if mean_forward_reward < self.threshold or mean_yaw_reward < self.threshold:
            return False
        i, j = index_of_command(command[0], command[1])
        lo_i = max(i - NEIGHBORHOOD_CELLS, 0)
        hi_i = min(i + NEIGHBORHOOD_CELLS, N_SPEED - 1)
        lo_j = max(j - NEIGHBORHOOD_CELLS, 0)
        hi_j = min(j + NEIGHBORHOOD_CELLS, N_YAW - 1)
        block = self.weights[lo_i:hi_i + 1, lo_j:hi_j + 1]
        np.minimum(block + WEIGHT_STEP, 1.0, out=block)
        self.updates += 1
        return True

    def support_fraction(self):
        """Share of cells with any weight (expansion progress metric)."""
        return float(np.count_nonzero(self.weights)) / self.weights.size

    def covered_area(self):
        """Command-space area (m/s x rad/s) carrying nonzero weight."""
        return float(np.count_nonzero(self.weights)) * RESOLUTION * RESOLUTION

    def to_csv(self, path):
        """One row per cell: forward command, yaw command, weight."""
        with open(path, "w") as fh:
            fh.write("forward_command,yaw_command,weight\n")
            for i in range(N_SPEED):
                for j in range(N_YAW):
                    fh.write(f"{speed_of_index(i):.1f},{yaw_of_index(j):.1f},"
                             f"{self.weights[i, j]:.6g}\n")

    def pack(self):
        """Flat float64 image for checkpointing."""
        return np.concatenate([[float(self.updates), self.tracking_max],
                               self.weights.ravel()])

    @classmethod
    def unpack(cls, data):
        data = np.asarray(data, dtype=np.float64)
        expected = 2 + N_SPEED * N_YAW
        if data.size != expected:
            raise ValueError(f"expected {expected} values, got {data.size}")
        grid = cls(weights=data[2:].reshape(N_SPEED, N_YAW).copy(),
                   updates=int(data[0]))
        grid.tracking_max = float(data[1])
        return grid


def _initial_weights():
    weights = np.zeros((N_SPEED, N_YAW))
    for i in range(N_SPEED):
        if abs(speed_of_index(i)) <= INIT_SPEED + 1e-9:
            for j in range(N_YAW):
                if abs(yaw_of_index(j)) <= INIT_YAW + 1e-9:
                    weights[i, j] = 1.0
    return weights
