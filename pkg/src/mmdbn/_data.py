from __future__ import annotations

import dataclasses
import numbers
import warnings
from collections.abc import Iterable, Mapping, Sized

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._util import as_binary_array, as_tuple_of_int, ceil_divide

__all__ = [
    "CsvItem",
    "CsvSchema",
    "MultiModalDataset",
    "MultiModalRecord",
    "bars_and_stripes",
    "binarize_csv",
    "binarize_image",
    "csv_item_spans",
    "image_row_spans",
    "kfold_split",
    "synth_multimodal",
    "unflatten_image",
]


@dataclasses.dataclass(frozen=True)
class CsvItem:
    """A single tabular item and the cut-off values used to bin it."""

    name: str
    """str : Item (column) name."""

    cutoffs: tuple[float, ...]
    """tuple of float : Strictly increasing cut-off values."""

    def __init__(self, name: str, cutoffs: Iterable[float]):
        cutoffs = tuple(float(c) for c in cutoffs)
        if len(cutoffs) == 0:
            raise ValueError(f"item '{name}' must have at least one cut-off value")
        if not np.all(np.isfinite(cutoffs)):
            raise ValueError(f"cut-off values of item '{name}' must be finite")
        if np.any(np.diff(cutoffs) <= 0.0):
            raise ValueError(
                f"cut-off values of item '{name}' must be strictly increasing"
            )

        # Workaround for `frozen=True`.
        object.__setattr__(self, "name", str(name))
        object.__setattr__(self, "cutoffs", cutoffs)

    @property
    def bins(self) -> int:
        """int : Number of bins (one more than the number of cut-offs)."""
        return len(self.cutoffs) + 1


@dataclasses.dataclass(frozen=True)
class CsvSchema:
    """Binarization scheme for the tabular part of a record."""

    items: tuple[CsvItem, ...]
    """tuple of CsvItem : Items, in record order."""

    def __init__(self, items: Iterable[CsvItem]):
        items = tuple(items)
        names = [item.name for item in items]
        if len(set(names)) != len(names):
            raise ValueError("CSV item names must be unique")

        # Workaround for `frozen=True`.
        object.__setattr__(self, "items", items)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def names(self) -> list[str]:
        """list of str : Item names, in record order."""
        return [item.name for item in self.items]

    @property
    def bin_counts(self) -> list[int]:
        """list of int : Number of bins of each item."""
        return [item.bins for item in self.items]

    @property
    def n_bits(self) -> int:
        """int : Length of a binarized record (M)."""
        return sum(self.bin_counts)

    @classmethod
    def from_dict(cls, mapping: Mapping[str, Iterable[float]]) -> CsvSchema:
        """Create a schema from a mapping of item name to cut-off values."""
        return cls(CsvItem(name, cutoffs) for name, cutoffs in mapping.items())

    def to_dict(self) -> dict[str, list[float]]:
        """Convert the schema to a mapping of item name to cut-off values."""
        return {item.name: list(item.cutoffs) for item in self.items}


@dataclasses.dataclass(frozen=True, eq=False)
class MultiModalRecord:
    """One binarized sample."""

    image_bits: NDArray[np.uint8]
    """numpy.ndarray : Flattened binary image."""

    csv_bits: NDArray[np.uint8]
    """numpy.ndarray : Binarized tabular items."""

    label: int
    """int : Class identifier."""

    @property
    def visible(self) -> NDArray[np.uint8]:
        """numpy.ndarray : Image bits followed by CSV bits."""
        return np.concatenate([self.image_bits, self.csv_bits])


def binarize_image(pixels: ArrayLike, threshold: float = 0.5) -> NDArray[np.uint8]:
    """
    Threshold an image and flatten it in row-major order.

    Parameters
    ----------
    pixels : array_like
        Pixel intensities in [0, 1]. A 2-D (grayscale) or 3-D (rows x columns x
        channels) array. Channels of a color image are interleaved per pixel.
    threshold : float, optional
        A pixel maps to 1 if its value is strictly greater than `threshold`. Must be
        in (0, 1). Defaults to 0.5.

    Returns
    -------
    bits : numpy.ndarray
        The binary image, flattened.
    """
    if not (0.0 < threshold < 1.0):
        raise ValueError("binarization threshold must be > 0 and < 1")
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim not in (2, 3):
        raise ValueError("image must be a 2-D or 3-D array")
    if not np.all((pixels >= 0.0) & (pixels <= 1.0)):
        raise ValueError("pixel values must be between 0 and 1")
    return (pixels > threshold).astype(np.uint8).reshape(-1)


def unflatten_image(bits: ArrayLike, shape: int | Iterable[int]) -> NDArray:
    """
    Restore the shape of a row-major flattened image.

    Parameters
    ----------
    bits : array_like
        Flattened image.
    shape : int or iterable of int
        Image shape.

    Returns
    -------
    image : numpy.ndarray
        The image, with shape `shape`.
    """
    shape = as_tuple_of_int(shape)
    bits = np.asarray(bits)
    if bits.size != np.prod(shape):
        raise ValueError(
            f"size mismatch: cannot reshape {bits.size} elements to shape {shape}"
        )
    return bits.reshape(shape)


def binarize_csv(record: ArrayLike, schema: CsvSchema) -> NDArray[np.uint8]:
    """
    One-hot encode tabular items by binning them at their cut-off values.

    An item with cut-offs ``c_1 < ... < c_n`` is assigned to one of the bins
    ``(-inf, c_1], (c_1, c_2], ..., (c_n, inf)``.

    Parameters
    ----------
    record : array_like
        Item values, in schema order. A vector of length L, or a 2-D array with one
        record per row.
    schema : CsvSchema
        The binarization scheme.

    Returns
    -------
    bits : numpy.ndarray
        The one-hot encoding, with length M along the last axis.
    """
    values = np.asarray(record, dtype=np.float64)
    if (values.ndim not in (1, 2)) or (values.shape[-1] != len(schema)):
        raise ValueError(
            f"length mismatch: expected {len(schema)} CSV items, got shape"
            f" {values.shape}"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError("CSV values must be finite")

    parts = [np.zeros(values.shape[:-1] + (0,), dtype=np.uint8)]
    for idx, item in enumerate(schema.items):
        bin_idx = np.searchsorted(item.cutoffs, values[..., idx], side="left")
        parts.append(np.eye(item.bins, dtype=np.uint8)[bin_idx])
    return np.concatenate(parts, axis=-1)


def image_row_spans(
    image_shape: Iterable[int],
    block_length: int | None = None,
    offset: int = 0,
) -> list[range]:
    """
    Divide each row of a flattened image into fixed-length blocks.

    Parameters
    ----------
    image_shape : iterable of int
        Image shape, ``(rows, columns)`` or ``(rows, columns, channels)``.
    block_length : int or None, optional
        Number of visible units per block. If None, each row forms a single block.
        Defaults to None.
    offset : int, optional
        Visible position of the first pixel. Defaults to 0.

    Returns
    -------
    spans : list of range
        Visible positions of each block, row by row.
    """
    image_shape = as_tuple_of_int(image_shape)
    if len(image_shape) not in (2, 3):
        raise ValueError("image shape must have 2 or 3 dimensions")

    nrows = image_shape[0]
    rowlen = int(np.prod(image_shape[1:]))
    if block_length is None:
        block_length = rowlen
    if block_length < 1:
        raise ValueError("block length must be >= 1")
    if rowlen % block_length != 0:
        warnings.warn(
            f"image row length ({rowlen}) is not a multiple of the block length"
            f" ({block_length}); the last block of each row will be shorter",
            RuntimeWarning,
        )

    nblocks = int(ceil_divide(rowlen, block_length))
    spans = []
    for r in range(nrows):
        start = offset + r * rowlen
        for k in range(nblocks):
            lo = start + k * block_length
            hi = min(lo + block_length, start + rowlen)
            spans.append(range(lo, hi))
    return spans


def csv_item_spans(schema: CsvSchema, offset: int = 0) -> list[range]:
    """
    Get the visible positions of each binarized CSV item.

    Parameters
    ----------
    schema : CsvSchema
        The binarization scheme.
    offset : int, optional
        Visible position of the first CSV bit. Defaults to 0.

    Returns
    -------
    spans : list of range
        Visible positions of each item, in schema order.
    """
    spans = []
    start = offset
    for count in schema.bin_counts:
        spans.append(range(start, start + count))
        start += count
    return spans


@dataclasses.dataclass(frozen=True, eq=False)
class MultiModalDataset:
    """A collection of binarized image and tabular records with class labels."""

    images: NDArray[np.uint8]
    """numpy.ndarray : Flattened binary images, one per row."""

    csv: NDArray[np.uint8]
    """numpy.ndarray : Binarized tabular items, one record per row."""

    labels: NDArray[np.int64]
    """numpy.ndarray : Class identifiers."""

    image_shape: tuple[int, ...]
    """tuple of int : Shape of each image before flattening."""

    schema: CsvSchema | None
    """CsvSchema or None : Tabular binarization scheme, or None for image-only data."""

    def __init__(
        self,
        images: ArrayLike,
        csv: ArrayLike | None,
        labels: ArrayLike,
        image_shape: Iterable[int],
        schema: CsvSchema | None = None,
    ):
        """
        Construct a new `MultiModalDataset` object.

        Parameters
        ----------
        images : array_like
            Binary images, either flattened (one per row) or with shape
            ``(n, *image_shape)``.
        csv : array_like or None
            Binarized tabular records, one per row. None if there is no tabular data.
        labels : array_like
            Non-negative integer class identifiers, one per record.
        image_shape : iterable of int
            Shape of each image.
        schema : CsvSchema or None, optional
            Tabular binarization scheme. Required if `csv` has any columns. Defaults
            to None.
        """
        image_shape = as_tuple_of_int(image_shape)
        images = as_binary_array(images, name="images")
        labels = np.asarray(labels, dtype=np.int64)
        n = len(labels)

        if labels.ndim != 1:
            raise ValueError("labels must be a 1-D array")
        if np.any(labels < 0):
            raise ValueError("labels must be >= 0")
        images = images.reshape(len(images), -1) if images.ndim > 1 else images
        if images.shape != (n, int(np.prod(image_shape))):
            raise ValueError(
                f"shape mismatch: expected {n} images of shape {image_shape}, got"
                f" array of shape {images.shape}"
            )

        if csv is None:
            csv = np.zeros((n, 0), dtype=np.uint8)
        csv = as_binary_array(csv, name="csv").reshape(n, -1)
        nbits = 0 if schema is None else schema.n_bits
        if csv.shape[1] != nbits:
            raise ValueError(
                f"shape mismatch: CSV records have {csv.shape[1]} bits, schema"
                f" describes {nbits}"
            )

        # Workaround for `frozen=True`.
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "csv", csv)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "image_shape", image_shape)
        object.__setattr__(self, "schema", schema)

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, index: int) -> MultiModalRecord:
        return MultiModalRecord(
            image_bits=self.images[index],
            csv_bits=self.csv[index],
            label=int(self.labels[index]),
        )

    @property
    def n_visible(self) -> int:
        """int : Length of a visible vector."""
        return self.images.shape[1] + self.csv.shape[1]

    @property
    def n_classes(self) -> int:
        """int : Number of classes (one more than the largest label)."""
        return int(self.labels.max()) + 1 if len(self) > 0 else 0

    def visible(self) -> NDArray[np.uint8]:
        """Visible vectors (image bits followed by CSV bits), one per row."""
        return np.concatenate([self.images, self.csv], axis=1)

    def block_spans(
        self,
        block_length: int | None = None,
    ) -> tuple[list[range], list[range]]:
        """
        Get the visible positions of each image block and each CSV block.

        Parameters
        ----------
        block_length : int or None, optional
            Number of units per image block. If None, each image row forms a single
            block. Defaults to None.

        Returns
        -------
        image_spans, csv_spans : list of range
            Visible positions of each block.
        """
        image_spans = image_row_spans(self.image_shape, block_length)
        csv_spans = []
        if self.schema is not None:
            csv_spans = csv_item_spans(self.schema, offset=self.images.shape[1])
        return image_spans, csv_spans

    def blocks_per_row(self, block_length: int | None = None) -> int:
        """Number of image blocks in each image row."""
        rowlen = int(np.prod(self.image_shape[1:]))
        if block_length is None:
            return 1
        return int(ceil_divide(rowlen, block_length))

    def subset(self, index: ArrayLike) -> MultiModalDataset:
        """Select a subset of the records."""
        index = np.asarray(index, dtype=np.intp)
        return MultiModalDataset(
            images=self.images[index],
            csv=self.csv[index],
            labels=self.labels[index],
            image_shape=self.image_shape,
            schema=self.schema,
        )


def kfold_split(
    dataset: int | Sized,
    k: int = 10,
    seed: int | None = None,
) -> list[tuple[NDArray[np.intp], NDArray[np.intp]]]:
    """
    Partition record indices into folds for cross-validation.

    Parameters
    ----------
    dataset : int or sized
        The dataset, or the number of records.
    k : int, optional
        Number of folds. Must be >= 2 and no greater than the number of records.
        Defaults to 10.
    seed : int or None, optional
        Seed of the random shuffle. Defaults to None.

    Returns
    -------
    folds : list of tuple of numpy.ndarray
        ``(train, test)`` index arrays of each fold. The test sets are disjoint, cover
        every record and differ in size by at most one.
    """
    n = int(dataset) if isinstance(dataset, numbers.Integral) else len(dataset)
    if k < 2:
        raise ValueError("number of folds must be >= 2")
    if n < k:
        raise ValueError(f"dataset has {n} records, fewer than the {k} folds requested")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    folds = []
    for test in np.array_split(perm, k):
        test = np.sort(test)
        train = np.setdiff1d(np.arange(n), test)
        folds.append((train, test))
    return folds


def _stripe_image(size: int, lines: NDArray, vertical: bool) -> NDArray[np.uint8]:
    image = np.zeros((size, size), dtype=np.uint8)
    if vertical:
        image[:, lines] = 1
    else:
        image[lines, :] = 1
    return image


def bars_and_stripes(size: int = 4) -> NDArray[np.uint8]:
    """
    Enumerate every bars-and-stripes pattern.

    Each pattern has a subset of its rows (stripes) or a subset of its columns (bars)
    switched on. The blank and the full patterns are listed once.

    Parameters
    ----------
    size : int, optional
        Image side length. Must be >= 2. Defaults to 4.

    Returns
    -------
    patterns : numpy.ndarray
        Binary images, with shape ``(2 * 2**size - 2, size, size)``.
    """
    if size < 2:
        raise ValueError("pattern size must be >= 2")

    masks = [np.flatnonzero(m) for m in _all_masks(size)]
    stripes = [_stripe_image(size, m, vertical=False) for m in masks]
    bars = [
        _stripe_image(size, m, vertical=True) for m in masks if 0 < len(m) < size
    ]
    return np.stack(stripes + bars)


def _all_masks(size: int) -> NDArray[np.uint8]:
    codes = np.arange(2**size)
    return ((codes[:, None] >> np.arange(size)[None, :]) & 1).astype(np.uint8)


def synth_multimodal(
    n: int,
    noise: float = 0.05,
    seed: int | None = None,
    *,
    size: int = 8,
    reverse_pairing: bool = False,
) -> MultiModalDataset:
    """
    Generate a synthetic image + tabular classification dataset.

    Each image is a ``size x size`` bars-and-stripes pattern with between 1 and
    ``size - 1`` lines switched on. The label is its orientation: 0 for horizontal
    stripes, 1 for vertical bars. There is one tabular item per image row. Item
    ``r`` is the diagonal pixel ``(r, r)`` of its paired row, flipped with
    probability `noise`, binarized into two bins at cut-off 0.5.

    Parameters
    ----------
    n : int
        Number of records. Must be >= 1.
    noise : float, optional
        Probability of flipping each tabular value. Must be in [0, 0.5). Defaults to
        0.05.
    seed : int or None, optional
        Random seed. Defaults to None.
    size : int, optional
        Image side length. Must be >= 2. Defaults to 8.
    reverse_pairing : bool, optional
        If True, item ``r`` is paired with row ``size - 1 - r`` instead of row ``r``,
        which places correlated blocks far apart in the initial arrangement. Defaults
        to False.

    Returns
    -------
    dataset : MultiModalDataset
        The generated records.
    """
    if n < 1:
        raise ValueError("number of records must be >= 1")
    if not (0.0 <= noise < 0.5):
        raise ValueError("noise must be >= 0 and < 0.5")
    if size < 2:
        raise ValueError("image size must be >= 2")

    rng = np.random.default_rng(seed)

    labels = rng.integers(0, 2, size=n)
    images = np.empty((n, size, size), dtype=np.uint8)
    for idx in range(n):
        nlines = rng.integers(1, size)
        lines = rng.choice(size, size=nlines, replace=False)
        images[idx] = _stripe_image(size, lines, vertical=bool(labels[idx]))

    paired_rows = np.arange(size)
    if reverse_pairing:
        paired_rows = paired_rows[::-1]
    values = images[:, paired_rows, paired_rows].astype(np.float64)
    flips = rng.random(values.shape) < noise
    values = np.where(flips, 1.0 - values, values)

    schema = CsvSchema.from_dict({f"row{r}": [0.5] for r in paired_rows})
    return MultiModalDataset(
        images=images.reshape(n, -1),
        csv=binarize_csv(values, schema),
        labels=labels,
        image_shape=(size, size),
        schema=schema,
    )
