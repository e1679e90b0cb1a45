"""Dataset ingestion, standardization, ZCA whitening, and synthetic data.

Every transform returns a new Dataset whose `preprocessing` list records
what ran (append-only provenance), so a pipeline can be audited after the
fact: in particular, whether a test split was scaled with statistics
fitted on the train split.
"""

from __future__ import annotations

import dataclasses
import itertools
import struct
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError, NumericalError, ShapeError
from .sampling import RngStream

IDX_UBYTE_CODE = 0x08
STD_FLOOR = 1e-8


@dataclasses.dataclass(frozen=True)
class Dataset:
    """An (N, m) sample matrix plus provenance of applied preprocessing."""

    samples: np.ndarray
    preprocessing: tuple[str, ...] = ()
    split_tag: str = "unsplit"

    def __post_init__(self):
        arr = np.ascontiguousarray(self.samples, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError(f"samples must be 2-D (N, m), got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise DomainError("dataset must contain at least one sample")
        if not np.isfinite(arr).all():
            raise DomainError("dataset contains non-finite entries")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "preprocessing", tuple(self.preprocessing))
        if self.split_tag not in ("train", "test", "unsplit"):
            raise DomainError(f"unknown split tag {self.split_tag!r}")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def num_features(self) -> int:
        return self.samples.shape[1]

    def with_samples(self, samples: np.ndarray, step: str) -> "Dataset":
        """New dataset with transformed samples and `step` appended to provenance."""
        return Dataset(samples, self.preprocessing + (step,), self.split_tag)


@dataclasses.dataclass(frozen=True)
class WhiteningTransform:
    """Fitted ZCA whitening: x -> zca_matrix @ (x - mean)."""

    mean: np.ndarray
    zca_matrix: np.ndarray
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "zca_matrix", np.asarray(self.zca_matrix, dtype=np.float64))
        if self.epsilon <= 0:
            raise DomainError("whitening epsilon must be positive")
        if not np.allclose(self.zca_matrix, self.zca_matrix.T, atol=1e-8):
            raise DomainError("zca matrix must be symmetric")


def load_idx(path, split_tag: str = "unsplit") -> Dataset:
    """Parse an IDX image file (big-endian, unsigned-byte, rank 3).

    Images are flattened row-major to m = rows * cols and scaled to [0, 1]
    by dividing by 255.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise FormatError(f"{path}: truncated header, {len(raw)} bytes (offset 0)")
    if raw[0] != 0 or raw[1] != 0:
        raise FormatError(f"{path}: bad magic bytes {raw[0]:#04x} {raw[1]:#04x} (offset 0)")
    if raw[2] != IDX_UBYTE_CODE:
        raise FormatError(f"{path}: unsupported element type {raw[2]:#04x} (offset 2)")
    rank = raw[3]
    if rank != 3:
        raise FormatError(f"{path}: expected rank 3 image data, got rank {rank} (offset 3)")
    header_len = 4 + 4 * rank
    if len(raw) < header_len:
        raise FormatError(f"{path}: truncated dimension header (offset {len(raw)})")
    count, rows, cols = struct.unpack(">III", raw[4:header_len])
    expected = header_len + count * rows * cols
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload length mismatch, expected {expected} bytes total, got {len(raw)}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=header_len)
    samples = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    return Dataset(samples, (f"idx[{rows}x{cols}]", "scale[1/255]"), split_tag)


def save_idx(path, images: np.ndarray) -> None:
    """Write a rank-3 uint8 array (N, rows, cols) as an IDX image file."""
    images = np.asarray(images)
    if images.ndim != 3:
        raise ShapeError(f"expected (N, rows, cols) array, got shape {images.shape}")
    if images.dtype != np.uint8:
        raise DomainError(f"IDX image payload must be uint8, got {images.dtype}")
    n, rows, cols = images.shape
    header = struct.pack(">BBBBIII", 0, 0, IDX_UBYTE_CODE, 3, n, rows, cols)
    Path(path).write_bytes(header + images.tobytes())


def load_csv(path, delimiter: str = ",", skip_header: bool = False,
             split_tag: str = "unsplit") -> Dataset:
    """Load a rectangular numeric table, one sample per row."""
    rows = []
    width = None
    with open(path, "r") as fh:
        lines = fh.read().splitlines()
    if skip_header and lines:
        lines = lines[1:]
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        cells = line.split(delimiter)
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise FormatError(f"{path}: ragged row {i} ({len(cells)} cells, expected {width})")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise FormatError(f"{path}: non-numeric cell at row {i}") from None
    if not rows:
        raise DomainError(f"{path}: no data rows")
    return Dataset(np.asarray(rows), (f"csv[{Path(path).name}]",), split_tag)


def standardize(data: Dataset, global_stats: bool = False
                ) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Scale to zero mean and unit variance, returning the fitted statistics.

    Per-dimension by default (matches the model's per-unit variances);
    `global_stats` pools every entry into one mean/std pair.  Population
    (1/N) variance; constant dimensions hit the 1e-8 std floor and come
    out as zeros.  Transform a test split with `standardize_apply` and the
    statistics returned here.
    """
    if len(data) < 2:
        raise DomainError("standardization needs at least two samples")
    x = data.samples
    if global_stats:
        mean = np.full(x.shape[1], x.mean())
        std = np.full(x.shape[1], max(x.std(), STD_FLOOR))
        scope = "global"
    else:
        mean = x.mean(axis=0)
        std = np.maximum(x.std(axis=0), STD_FLOOR)
        scope = "per-dim"
    out = data.with_samples((x - mean) / std, f"standardize[{scope},fit={data.split_tag}]")
    return out, mean, std


def standardize_apply(data: Dataset, mean: np.ndarray, std: np.ndarray,
                      stats_from: str = "train") -> Dataset:
    """Apply previously fitted standardization statistics to another split."""
    return data.with_samples((data.samples - mean) / std, f"standardize[stats={stats_from}]")


def zca_fit(data: Dataset, epsilon: float = 1e-2) -> WhiteningTransform:
    """Fit zero-phase whitening: E (Lambda + eps I)^(-1/2) E^T from the data covariance."""
    if len(data) < 2:
        raise DomainError("whitening needs at least two samples")
    if epsilon <= 0:
        raise DomainError("whitening epsilon must be positive")
    x = data.samples
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / len(data)
    if not np.isfinite(cov).all():
        raise NumericalError("non-finite covariance matrix")
    eigval, eigvec = np.linalg.eigh(cov)
    # eigh can return tiny negative eigenvalues for rank-deficient data
    scale = 1.0 / np.sqrt(np.maximum(eigval, 0.0) + epsilon)
    zca = (eigvec * scale) @ eigvec.T
    return WhiteningTransform(mean=mean, zca_matrix=zca, epsilon=epsilon)


def zca_apply(transform: WhiteningTransform, data: Dataset) -> Dataset:
    """Whiten: x -> zca_matrix @ (x - mean), rowwise."""
    x = (data.samples - transform.mean) @ transform.zca_matrix.T
    return data.with_samples(x, f"zca[eps={transform.epsilon:g}]")


def zca_inverse(transform: WhiteningTransform, data: Dataset) -> Dataset:
    """Undo zca_apply: x -> E (Lambda + eps I)^(1/2) E^T x + mean."""
    inv = np.linalg.inv(transform.zca_matrix)
    x = data.samples @ inv.T + transform.mean
    return data.with_samples(x, "zca-inverse")


def shuffle_epoch(data: Dataset, rng: RngStream) -> np.ndarray:
    """Uniformly random permutation of row indices, deterministic per stream."""
    return rng.permutation(len(data))


def synth_mixture(num_components: int, dims: int, num_samples: int, spread: float,
                  rng: RngStream) -> Dataset:
    """Equal-weight Gaussian mixture on a deterministic grid, then standardized.

    Component means sit on the first `num_components` points of an integer
    lattice (smallest lattice that fits), centered and scaled by `spread`;
    each component has unit variance.
    """
    if num_components < 1 or dims < 1 or num_samples < 1:
        raise DomainError("all synth_mixture counts must be >= 1")
    side = 1
    while side**dims < num_components:
        side += 1
    grid = np.array(list(itertools.islice(itertools.product(range(side), repeat=dims),
                                          num_components)), dtype=np.float64)
    means = (grid - (side - 1) / 2.0) * spread
    comp = rng.generator.integers(0, num_components, size=num_samples)
    x = means[comp] + rng.standard_normal((num_samples, dims))
    raw = Dataset(x, (f"synth_mixture[c={num_components},spread={spread:g}]",), "unsplit")
    if num_samples < 2:
        return raw
    out, _, _ = standardize(raw)
    return out
