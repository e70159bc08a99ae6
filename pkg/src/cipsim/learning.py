"""Offline construction, lookup and persistence of the quantized
reachable-set classifier.

The classifier table assigns one equilibrium index to every cell of a uniform
grid over the 4-D measurement box: the index reached by simulating the
reconstructed cell center under standing PD plus a single angular impulse on
agent 1 at t = 0.  Cells are independent, so learning is data-parallel and
the result is identical for any evaluation order.

Table files use the "CIPTBL1" binary layout: an 8-byte magic string, an
8-byte little-endian header length, a canonical-JSON header, then one
unsigned byte per cell label in row-major order (last dimension fastest).
"""

from __future__ import annotations

import io
import itertools
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from . import _kernels
from .control import MeasurementMap, measure
from .errors import DigestMismatchError, TableFormatError, TruncatedTableError
from .params import (
    CipParams,
    ImpulseParams,
    SimulationSettings,
    canonical_json,
    parameter_digest,
)

__all__ = [
    "GridSpec",
    "ClassifierTable",
    "learn_table",
    "quantized_classify",
    "save_table",
    "load_table",
    "reachable_slice",
    "ReachableSetClassifier",
    "PAPER_MEASUREMENT_BOX",
]

MAGIC = b"CIPTBL1\n"
FORMAT_VERSION = 1

# Measurement box circumscribing all disturbance trajectories up to the
# maximal impulse strength 0.06 N m s: (th1, w1, th2, w2).
PAPER_MEASUREMENT_BOX = (
    (-0.13, 0.43),
    (-3.28, 10.58),
    (-0.35, 0.31),
    (-3.80, 5.15),
)


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell grid over a measurement box.

    Cell indices are 1-based tuples in the public API; linearization is
    row-major with the last dimension fastest.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    resolution: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.lower) == len(self.upper) == len(self.resolution)):
            raise ValueError("lower, upper and resolution must have equal length")
        if len(self.lower) not in (4, 6):
            raise ValueError("grid dimension must be 4 or 6")
        for a, b in zip(self.lower, self.upper):
            if not a < b:
                raise ValueError(f"need lower < upper, got [{a}, {b}]")
        for m in self.resolution:
            if m < 1:
                raise ValueError("resolutions must be >= 1")
        object.__setattr__(self, "lower", tuple(float(a) for a in self.lower))
        object.__setattr__(self, "upper", tuple(float(b) for b in self.upper))
        object.__setattr__(self, "resolution", tuple(int(m) for m in self.resolution))

    @classmethod
    def uniform(cls, bounds: Sequence[Sequence[float]], m: int) -> "GridSpec":
        lo, hi = zip(*bounds)
        return cls(lo, hi, (m,) * len(lo))

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def n_cells(self) -> int:
        n = 1
        for m in self.resolution:
            n *= m
        return n

    @property
    def lower_array(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def upper_array(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def resolution_array(self) -> np.ndarray:
        return np.array(self.resolution, dtype=np.int64)

    def indices(self) -> Iterator[tuple[int, ...]]:
        """All 1-based cell indices in linearization order."""
        return itertools.product(*(range(1, m + 1) for m in self.resolution))

    def _check_index(self, i: Sequence[int]) -> None:
        if len(i) != self.dimension:
            raise IndexError(f"index must have {self.dimension} components")
        for ij, m in zip(i, self.resolution):
            if not 1 <= ij <= m:
                raise IndexError(f"index component {ij} outside 1..{m}")

    def cell_center(self, i: Sequence[int]) -> np.ndarray:
        """Center point of the cell with 1-based index i."""
        self._check_index(i)
        return np.array(
            [
                a + (ij - 0.5) * (b - a) / m
                for ij, a, b, m in zip(i, self.lower, self.upper, self.resolution)
            ]
        )

    def cell_of(self, y) -> Optional[tuple[int, ...]]:
        """1-based cell index containing y, or None when outside the box.

        Interior faces belong to the higher-index cell; the upper boundary
        belongs to the last cell.
        """
        y = np.asarray(y, dtype=np.float64)
        out = []
        for v, a, b, m in zip(y, self.lower, self.upper, self.resolution):
            if v < a or v > b:
                return None
            i = int(np.floor((v - a) * m / (b - a)))
            if i >= m:
                i = m - 1
            out.append(i + 1)
        return tuple(out)

    def linear_index(self, i: Sequence[int]) -> int:
        """Row-major linear offset (0-based) of a 1-based cell index."""
        self._check_index(i)
        lin = 0
        for ij, m in zip(i, self.resolution):
            lin = lin * m + (ij - 1)
        return lin


@dataclass
class ClassifierTable:
    """Dense cell-to-equilibrium-index map with provenance."""

    grid: GridSpec
    labels: np.ndarray  # uint8, shape == grid.resolution
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.labels.shape != tuple(self.grid.resolution):
            raise ValueError("label array shape must match the grid resolution")
        if self.labels.max(initial=0) > 9:
            raise ValueError("labels must be in 0..9")

    @property
    def labels_flat(self) -> np.ndarray:
        return self.labels.reshape(-1)

    def label(self, i: Sequence[int]) -> int:
        return int(self.labels_flat[self.grid.linear_index(i)])


def _header_dict(
    grid: GridSpec,
    digest: str,
    impulse: ImpulseParams,
    simulation: SimulationSettings,
    infeasible_cells: int,
) -> dict:
    return {
        "version": FORMAT_VERSION,
        "dimension": grid.dimension,
        "bounds": [[a, b] for a, b in zip(grid.lower, grid.upper)],
        "resolution": list(grid.resolution),
        "digest": digest,
        "impulse": {
            "strength": impulse.strength,
            "delta_tau": impulse.delta_tau,
            "tau_g": impulse.tau_g,
        },
        "simulation": {
            "dt": simulation.dt,
            "t_end": simulation.t_end,
            "omega_tol": simulation.omega_tol,
            "v_tol": simulation.v_tol,
            "t_dwell": simulation.t_dwell,
        },
        "infeasible_cells": infeasible_cells,
    }


def learn_table(
    grid: GridSpec,
    params: CipParams,
    impulse: ImpulseParams,
    simulation: SimulationSettings,
    jobs: int = 1,
) -> ClassifierTable:
    """Label every grid cell by one single-impulse convergence simulation.

    ``jobs`` sets the number of worker threads; the labels are assembled in
    cell order, so the result is byte-identical at any concurrency level.
    """
    if grid.dimension != 4:
        raise ValueError("offline learning is implemented for the 4-D measurement")
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    par = params.to_array()
    lo = grid.lower_array
    hi = grid.upper_array
    m = grid.resolution_array
    n = grid.n_cells

    def chunk(rng: tuple[int, int]):
        return _kernels.learn_range(
            rng[0], rng[1], lo, hi, m, par,
            simulation.dt, simulation.n_steps, simulation.dwell_steps,
            simulation.omega_tol, simulation.v_tol,
            impulse.strength, impulse.delta_tau,
            _kernels._NO_TABLE, _kernels._NO_BOUND, _kernels._NO_RES,
            _kernels._NO_SEL, _kernels._NO_TRAJ,
        )

    n_chunks = min(max(jobs * 4, 1), n) if jobs > 1 else 1
    edges = np.linspace(0, n, n_chunks + 1, dtype=int)
    ranges = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if a < b]
    if jobs == 1:
        parts = [chunk(r) for r in ranges]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(chunk, ranges))

    labels = np.concatenate([p[0] for p in parts]).reshape(grid.resolution)
    infeasible = int(sum(p[1] for p in parts))
    digest = parameter_digest(params, impulse, simulation)
    table = ClassifierTable(
        grid=grid,
        labels=labels,
        provenance=_header_dict(grid, digest, impulse, simulation, infeasible),
    )
    return table


def quantized_classify(s, table: ClassifierTable, m: Optional[MeasurementMap] = None) -> int:
    """Equilibrium index of the cell containing the measured state; 0 outside."""
    if m is None:
        m = MeasurementMap(mode="four-dim")
    if table.grid.dimension != m.dimension:
        raise ValueError("table and measurement dimensions disagree")
    i = table.grid.cell_of(measure(s, m))
    if i is None:
        return 0
    return table.label(i)


def save_table(table: ClassifierTable, sink) -> None:
    """Write a table in the CIPTBL1 binary layout to a path or binary file."""
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        with open(sink, "wb") as fh:
            save_table(table, fh)
        return
    header = canonical_json(table.provenance).encode("utf-8")
    sink.write(MAGIC)
    sink.write(struct.pack("<Q", len(header)))
    sink.write(header)
    sink.write(table.labels_flat.tobytes())


def load_table(
    source,
    params: Optional[CipParams] = None,
    impulse: Optional[ImpulseParams] = None,
    simulation: Optional[SimulationSettings] = None,
) -> ClassifierTable:
    """Read a CIPTBL1 table; optionally verify provenance against parameters.

    When all three parameter sets are supplied, their digest must equal the
    digest stored in the file, otherwise DigestMismatchError is raised.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            return load_table(fh, params, impulse, simulation)
    magic = source.read(len(MAGIC))
    if magic != MAGIC:
        raise TableFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    raw_len = source.read(8)
    if len(raw_len) != 8:
        raise TruncatedTableError("file ends inside the header length field")
    (header_len,) = struct.unpack("<Q", raw_len)
    raw_header = source.read(header_len)
    if len(raw_header) != header_len:
        raise TruncatedTableError("file ends inside the header")
    try:
        header = json.loads(raw_header.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TableFormatError(f"header is not valid JSON: {exc}") from exc
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise TableFormatError(f"unknown format version {version!r}")
    grid = GridSpec(
        tuple(b[0] for b in header["bounds"]),
        tuple(b[1] for b in header["bounds"]),
        tuple(header["resolution"]),
    )
    payload = source.read(grid.n_cells)
    if len(payload) != grid.n_cells:
        raise TruncatedTableError(
            f"payload has {len(payload)} bytes, expected {grid.n_cells}"
        )
    labels = np.frombuffer(payload, dtype=np.uint8).reshape(grid.resolution).copy()
    if params is not None and impulse is not None and simulation is not None:
        expected = parameter_digest(params, impulse, simulation)
        if expected != header["digest"]:
            raise DigestMismatchError(expected, header["digest"])
    return ClassifierTable(grid=grid, labels=labels, provenance=header)


def reachable_slice(
    table: ClassifierTable,
    dims: tuple[int, int],
    fixed: dict[int, float],
):
    """2-D label grid over a coordinate plane through the measurement box.

    ``dims`` are the two free dimensions (0-based); ``fixed`` maps each other
    dimension to a coordinate value inside the box.  Returns
    (labels_2d, centers_dim0, centers_dim1): labels_2d[i, j] is the label of
    the cell whose free coordinates contain (centers_dim0[i], centers_dim1[j]).
    """
    grid = table.grid
    d0, d1 = dims
    if d0 == d1 or not (0 <= d0 < grid.dimension and 0 <= d1 < grid.dimension):
        raise ValueError("dims must be two distinct dimensions of the grid")
    others = [d for d in range(grid.dimension) if d not in (d0, d1)]
    if set(fixed) != set(others):
        raise ValueError(f"fixed values required exactly for dimensions {others}")
    base = [0] * grid.dimension
    for d, v in fixed.items():
        a, b, m = grid.lower[d], grid.upper[d], grid.resolution[d]
        if v < a or v > b:
            raise ValueError(f"fixed value {v} outside [{a}, {b}] in dimension {d}")
        i = int(np.floor((v - a) * m / (b - a)))
        base[d] = min(i, m - 1) + 1

    m0, m1 = grid.resolution[d0], grid.resolution[d1]
    out = np.empty((m0, m1), dtype=np.uint8)
    idx = list(base)
    for i in range(m0):
        for j in range(m1):
            idx[d0] = i + 1
            idx[d1] = j + 1
            out[i, j] = table.label(idx)
    centers0 = np.array(
        [grid.lower[d0] + (i + 0.5) * (grid.upper[d0] - grid.lower[d0]) / m0 for i in range(m0)]
    )
    centers1 = np.array(
        [grid.lower[d1] + (j + 0.5) * (grid.upper[d1] - grid.lower[d1]) / m1 for j in range(m1)]
    )
    return out, centers0, centers1


class ReachableSetClassifier(BaseEstimator):
    """Estimator-style front end for the offline-learned classifier.

    ``fit`` runs the offline learning simulations (no training data is
    consumed: the simulator itself is the supervisor); ``predict`` maps rows
    of 4-D measurements to equilibrium indices, 0 for out-of-range points.
    """

    def __init__(
        self,
        bounds=PAPER_MEASUREMENT_BOX,
        resolution: int = 10,
        params: Optional[CipParams] = None,
        impulse: Optional[ImpulseParams] = None,
        simulation: Optional[SimulationSettings] = None,
        jobs: int = 1,
    ):
        self.bounds = bounds
        self.resolution = resolution
        self.params = params
        self.impulse = impulse
        self.simulation = simulation
        self.jobs = jobs

    def fit(self, X=None, y=None) -> "ReachableSetClassifier":
        grid = GridSpec.uniform(self.bounds, self.resolution)
        self.table_ = learn_table(
            grid,
            self.params or CipParams(),
            self.impulse or ImpulseParams(),
            self.simulation or SimulationSettings(),
            jobs=self.jobs,
        )
        return self

    def predict(self, X) -> np.ndarray:
        from sklearn.exceptions import NotFittedError

        if not hasattr(self, "table_"):
            raise NotFittedError("call fit() before predict()")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.table_.grid.dimension:
            raise ValueError(f"expected {self.table_.grid.dimension} columns")
        out = np.zeros(X.shape[0], dtype=np.int64)
        for k, row in enumerate(X):
            i = self.table_.grid.cell_of(row)
            out[k] = self.table_.label(i) if i is not None else 0
        return out
