from __future__ import annotations

import json
import os
import warnings
from collections.abc import Iterable
from pathlib import Path
from typing import Any

import h5py
import numpy as np
import pandas as pd
import rasterio
from numpy.typing import NDArray
from rasterio.errors import NotGeoreferencedWarning

from ._arrangement import Block, BlockLayout, LookupTable
from ._data import CsvSchema, MultiModalDataset, binarize_csv, binarize_image
from ._dbn import DbnLayer, DbnModel, LayerStats, SoftmaxHead
from ._rbm import RbmParams
from ._util import as_tuple_of_int

__all__ = [
    "MODEL_FORMAT",
    "load_cifar_binary",
    "load_dataset",
    "load_model",
    "read_dataset",
    "read_png",
    "read_tabular_csv",
    "save_dataset",
    "save_model",
]


MODEL_FORMAT = "mmdbn-model/1"

# Bytes of pixel data per CIFAR record (32 x 32 pixels x 3 channels).
CIFAR_IMAGE_BYTES = 3072
CIFAR_IMAGE_SHAPE = (32, 32, 3)


def _layer_to_dict(layer: DbnLayer) -> dict[str, Any]:
    params = layer.params
    return {
        "n_visible": params.n_visible,
        "n_hidden": params.n_hidden,
        "visible_bias": params.visible_bias.tolist(),
        "hidden_bias": params.hidden_bias.tolist(),
        "weights": params.weights.tolist(),
        "forward": layer.table.forward.tolist(),
        "layout": [
            {"kind": b.kind.value, "block_id": b.block_id, "span": list(b.span)}
            for b in layer.layout
        ],
        "stats": layer.stats.to_dict(include_time=False),
    }


def _layer_from_dict(d: dict[str, Any]) -> DbnLayer:
    params = RbmParams(d["visible_bias"], d["hidden_bias"], d["weights"])
    if params.shape != (d["n_visible"], d["n_hidden"]):
        raise ValueError("model file is inconsistent: layer shape does not match")
    layout = BlockLayout(
        Block(b["kind"], b["block_id"], b["span"]) for b in d["layout"]
    )
    table = LookupTable(d["forward"])
    stats = LayerStats(seconds=0.0, **d["stats"])
    return DbnLayer(params=params, table=table, layout=layout, stats=stats)


def save_model(model: DbnModel, path: str | os.PathLike) -> None:
    """
    Write a trained model to a JSON file.

    The file records, for each layer, the parameters (weights row-major), the
    forward lookup table as an integer array, the final block layout and the
    training statistics, followed by the head weights and class labels. Wall-clock
    times are omitted, so training runs with identical configuration and seed produce
    identical files.

    Parameters
    ----------
    model : DbnModel
        The model.
    path : str or path-like
        Output file path.
    """
    doc = {
        "format": MODEL_FORMAT,
        "classes": list(model.classes),
        "layers": [_layer_to_dict(layer) for layer in model.layers],
        "head": {
            "weights": model.head.weights.tolist(),
            "bias": model.head.bias.tolist(),
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path: str | os.PathLike) -> DbnModel:
    """
    Read a model written by `save_model`.

    Parameters
    ----------
    path : str or path-like
        Model file path.

    Returns
    -------
    model : DbnModel
        The model.
    """
    doc = json.loads(Path(path).read_text())
    fmt = doc.get("format")
    if fmt != MODEL_FORMAT:
        raise ValueError(f"unsupported model format '{fmt}', expected '{MODEL_FORMAT}'")

    layers = [_layer_from_dict(d) for d in doc["layers"]]
    head = SoftmaxHead(
        weights=np.asarray(doc["head"]["weights"], dtype=np.float64),
        bias=np.asarray(doc["head"]["bias"], dtype=np.float64),
    )
    return DbnModel(layers, head, doc["classes"])


def save_dataset(dataset: MultiModalDataset, path: str | os.PathLike) -> None:
    """
    Write a binarized dataset to an HDF5 file.

    Parameters
    ----------
    dataset : MultiModalDataset
        The dataset.
    path : str or path-like
        Output file path. An existing file is overwritten.
    """
    with h5py.File(path, "w") as f:
        f.create_dataset("images", data=dataset.images, compression="gzip")
        # Image-only datasets have zero CSV columns, which cannot be chunked.
        f.create_dataset("csv", data=dataset.csv)
        f.create_dataset("labels", data=dataset.labels)
        f.attrs["image_shape"] = np.asarray(dataset.image_shape, dtype=np.int64)
        schema = {} if dataset.schema is None else dataset.schema.to_dict()
        f.attrs["schema"] = json.dumps(schema)


def load_dataset(path: str | os.PathLike) -> MultiModalDataset:
    """
    Read a dataset written by `save_dataset`.

    Parameters
    ----------
    path : str or path-like
        HDF5 file path.

    Returns
    -------
    dataset : MultiModalDataset
        The dataset.
    """
    with h5py.File(path, "r") as f:
        images = f["images"][()]
        csv = f["csv"][()]
        labels = f["labels"][()]
        image_shape = as_tuple_of_int(f.attrs["image_shape"])
        schema_dict = json.loads(f.attrs["schema"])

    schema = CsvSchema.from_dict(schema_dict) if schema_dict else None
    return MultiModalDataset(images, csv, labels, image_shape, schema)


def _scale_pixels(data: NDArray) -> NDArray[np.float64]:
    """Map integer pixel values to [0, 1] using the full range of their data type."""
    if np.issubdtype(data.dtype, np.integer):
        return data.astype(np.float64) / np.iinfo(data.dtype).max
    return data.astype(np.float64)


def read_png(
    path: str | os.PathLike,
    threshold: float = 0.5,
) -> tuple[NDArray[np.uint8], tuple[int, ...]]:
    """
    Read and binarize an image file.

    Parameters
    ----------
    path : str or path-like
        Image file path (any format readable by GDAL, typically PNG).
    threshold : float, optional
        Binarization threshold on intensities scaled to [0, 1]. Defaults to 0.5.

    Returns
    -------
    bits : numpy.ndarray
        Flattened binary image. Channels of a color image are interleaved per pixel.
    shape : tuple of int
        Image shape, ``(rows, columns)`` or ``(rows, columns, channels)``.
    """
    # Plain image files carry no geospatial metadata.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=NotGeoreferencedWarning)
        with rasterio.open(path) as dataset:
            data = dataset.read()

    # Rasterio returns bands first.
    pixels = _scale_pixels(np.moveaxis(data, 0, -1))
    if pixels.shape[-1] == 1:
        pixels = pixels[..., 0]

    return binarize_image(pixels, threshold), pixels.shape


def read_tabular_csv(
    path: str | os.PathLike,
    schema: CsvSchema,
    label_column: str | None = "label",
) -> tuple[NDArray[np.uint8], NDArray[np.int64] | None]:
    """
    Read and binarize tabular records from a CSV file with a header row.

    Parameters
    ----------
    path : str or path-like
        CSV file path.
    schema : CsvSchema
        Binarization scheme. Its item names select the columns.
    label_column : str or None, optional
        Name of the class label column, or None if there is none. Defaults to
        "label".

    Returns
    -------
    bits : numpy.ndarray
        Binarized records, one per row.
    labels : numpy.ndarray or None
        Class labels, or None if `label_column` is None.
    """
    df = pd.read_csv(path)
    return _binarize_frame(df, schema, label_column)


def _binarize_frame(
    df: pd.DataFrame,
    schema: CsvSchema,
    label_column: str | None,
) -> tuple[NDArray[np.uint8], NDArray[np.int64] | None]:
    missing = [name for name in schema.names if name not in df.columns]
    if missing:
        raise KeyError(f"CSV file is missing item columns: {missing}")
    bits = binarize_csv(df[schema.names].to_numpy(dtype=np.float64), schema)

    labels = None
    if label_column is not None:
        if label_column not in df.columns:
            raise KeyError(f"CSV file is missing the label column '{label_column}'")
        labels = df[label_column].to_numpy(dtype=np.int64)
    return bits, labels


def load_cifar_binary(
    paths: str | os.PathLike | Iterable[str | os.PathLike],
    *,
    label_bytes: int = 1,
    threshold: float = 0.5,
) -> MultiModalDataset:
    """
    Read CIFAR batches in the binary distribution format.

    Each record is `label_bytes` label bytes followed by 3072 pixel bytes: the red,
    green and blue 32 x 32 planes in turn. CIFAR-10 records have one label byte.
    CIFAR-100 records have two (coarse then fine), and the fine label is used.

    Parameters
    ----------
    paths : str or path-like or iterable of str or path-like
        One or more batch files.
    label_bytes : int, optional
        Number of label bytes per record (1 or 2). Defaults to 1.
    threshold : float, optional
        Binarization threshold, applied per channel to intensities scaled to [0, 1].
        Defaults to 0.5.

    Returns
    -------
    dataset : MultiModalDataset
        Image-only dataset of 32 x 32 x 3 binary images.
    """
    if label_bytes not in (1, 2):
        raise ValueError("number of label bytes must be 1 or 2")
    if not (0.0 < threshold < 1.0):
        raise ValueError("binarization threshold must be > 0 and < 1")
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]

    reclen = label_bytes + CIFAR_IMAGE_BYTES
    images = []
    labels = []
    for path in paths:
        raw = np.fromfile(path, dtype=np.uint8)
        if (raw.size == 0) or (raw.size % reclen != 0):
            raise ValueError(
                f"{path}: file size is not a multiple of the {reclen}-byte record"
                " length"
            )
        records = raw.reshape(-1, reclen)
        labels.append(records[:, label_bytes - 1].astype(np.int64))

        # Planes are stored channel-first. Interleave channels per pixel.
        planes = records[:, label_bytes:].reshape(-1, 3, 32, 32)
        pixels = np.moveaxis(planes, 1, -1) / 255.0
        images.append((pixels > threshold).astype(np.uint8).reshape(len(records), -1))

    if not images:
        raise ValueError("no CIFAR batch files given")

    return MultiModalDataset(
        images=np.concatenate(images),
        csv=None,
        labels=np.concatenate(labels),
        image_shape=CIFAR_IMAGE_SHAPE,
    )


def _read_manifest(
    path: Path,
    schema: CsvSchema | None,
    image_shape: tuple[int, ...] | None,
    threshold: float,
) -> MultiModalDataset:
    df = pd.read_csv(path)
    if len(df) == 0:
        raise ValueError(f"{path}: dataset is empty")

    if "image" in df.columns:
        bits = []
        shape = None
        for name in df["image"]:
            img_path = Path(name)
            if not img_path.is_absolute():
                img_path = path.parent / img_path
            b, s = read_png(img_path, threshold)
            if (shape is not None) and (s != shape):
                raise ValueError(f"{img_path}: image shape {s} differs from {shape}")
            bits.append(b)
            shape = s
        images = np.stack(bits)
    else:
        pxcols = [c for c in df.columns if str(c).startswith("px")]
        if not pxcols:
            raise KeyError(f"{path}: expected an 'image' column or 'px*' pixel columns")
        pixels = df[pxcols].to_numpy(dtype=np.float64)

        # Pixel values may be given as 8-bit intensities.
        if pixels.max() > 1.0:
            pixels = pixels / 255.0
        if image_shape is None:
            side = int(round(np.sqrt(len(pxcols))))
            image_shape = (side, side)
        shape = as_tuple_of_int(image_shape)
        images = np.stack([binarize_image(p.reshape(shape), threshold) for p in pixels])

    csv = None
    if schema is not None:
        csv, labels = _binarize_frame(df, schema, "label")
    else:
        if "label" not in df.columns:
            raise KeyError(f"{path}: missing the label column 'label'")
        labels = df["label"].to_numpy(dtype=np.int64)

    return MultiModalDataset(images, csv, labels, shape, schema)


def read_dataset(
    path: str | os.PathLike,
    *,
    schema: CsvSchema | None = None,
    image_shape: Iterable[int] | None = None,
    threshold: float = 0.5,
    label_bytes: int = 1,
) -> MultiModalDataset:
    """
    Load a dataset from disk, detecting its format.

    Supported inputs are an HDF5 file written by `save_dataset` (``.h5``/``.hdf5``),
    a manifest CSV file (``.csv``) and a directory of CIFAR binary batches
    (``*.bin``).

    A manifest CSV has a header row and a ``label`` column. Images are given either
    as an ``image`` column of image file paths (relative to the manifest) or as
    ``px*`` pixel columns in row-major order. Tabular items are the columns named by
    `schema`.

    Parameters
    ----------
    path : str or path-like
        Dataset path.
    schema : CsvSchema or None, optional
        Binarization scheme of the tabular items of a manifest CSV. Defaults to None.
    image_shape : iterable of int or None, optional
        Shape of images given as pixel columns. If None, images are assumed square.
        Defaults to None.
    threshold : float, optional
        Image binarization threshold. Defaults to 0.5.
    label_bytes : int, optional
        Number of label bytes of CIFAR records. Defaults to 1.

    Returns
    -------
    dataset : MultiModalDataset
        The dataset.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")

    if path.is_dir():
        batches = sorted(path.glob("*.bin"))
        if not batches:
            raise FileNotFoundError(f"no CIFAR batch files (*.bin) found in {path}")
        return load_cifar_binary(batches, label_bytes=label_bytes, threshold=threshold)

    suffix = path.suffix.lower()
    if suffix in {".h5", ".hdf5"}:
        return load_dataset(path)
    if suffix == ".csv":
        shape = None if image_shape is None else as_tuple_of_int(image_shape)
        return _read_manifest(path, schema, shape, threshold)

    raise ValueError(f"unrecognized dataset format: {path}")
