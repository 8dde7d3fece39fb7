from __future__ import annotations

import dataclasses
import json
import os
from collections.abc import Mapping
from pathlib import Path
from typing import Any

from ._adaptive import GrowthConfig
from ._arrangement import SortingConfig
from ._data import CsvSchema
from ._dbn import MODES, TrainConfig
from ._util import as_tuple_of_int

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
]


class ConfigError(ValueError):
    """Raised if a run configuration is malformed."""


_RUN_KEYS = {
    "train",
    "schema",
    "mode",
    "modes",
    "image_shape",
    "threshold",
    "label_bytes",
    "folds",
    "seed",
    "scheduler",
}


@dataclasses.dataclass
class RunConfig:
    """Settings of a training, evaluation or benchmark run."""

    train: TrainConfig
    """TrainConfig : Training hyperparameters."""

    schema: CsvSchema | None
    """CsvSchema or None : Binarization scheme of the tabular items, if any."""

    mode: str
    """str : Model variant used by the train command."""

    modes: tuple[str, ...]
    """tuple of str : Model variants compared by the bench command."""

    image_shape: tuple[int, ...] | None
    """tuple of int or None : Shape of images given as pixel columns."""

    threshold: float
    """float : Image binarization threshold."""

    label_bytes: int
    """int : Number of label bytes of CIFAR records."""

    folds: int
    """int : Number of cross-validation folds."""

    seed: int
    """int : Random seed."""

    scheduler: str
    """str : Dask scheduler used to run cross-validation folds."""

    def __init__(
        self,
        train: TrainConfig | None = None,
        schema: CsvSchema | None = None,
        mode: str = "multimodal",
        modes: tuple[str, ...] = ("traditional", "adaptive", "multimodal"),
        image_shape: tuple[int, ...] | None = None,
        threshold: float = 0.5,
        label_bytes: int = 1,
        folds: int = 10,
        seed: int = 0,
        scheduler: str = "synchronous",
    ):
        """
        Construct a new `RunConfig` object.

        Parameters
        ----------
        train : TrainConfig or None, optional
            Training hyperparameters. If None, the defaults are used. Defaults to
            None.
        schema : CsvSchema or None, optional
            Binarization scheme of the tabular items. Defaults to None.
        mode : {'traditional', 'adaptive', 'multimodal'}, optional
            Model variant used by the train command. Defaults to 'multimodal'.
        modes : tuple of str, optional
            Model variants compared by the bench command. Defaults to all three.
        image_shape : tuple of int or None, optional
            Shape of images given as pixel columns. Defaults to None.
        threshold : float, optional
            Image binarization threshold. Must be in (0, 1). Defaults to 0.5.
        label_bytes : int, optional
            Number of label bytes of CIFAR records (1 or 2). Defaults to 1.
        folds : int, optional
            Number of cross-validation folds. Must be >= 2. Defaults to 10.
        seed : int, optional
            Random seed. Defaults to 0.
        scheduler : str, optional
            Dask scheduler ('synchronous', 'threads' or 'processes'). Defaults to
            'synchronous'.
        """
        if mode not in MODES:
            raise ConfigError(f"unexpected mode '{mode}'")
        modes = tuple(modes)
        for m in modes:
            if m not in MODES:
                raise ConfigError(f"unexpected mode '{m}'")
        if not (0.0 < threshold < 1.0):
            raise ConfigError("binarization threshold must be > 0 and < 1")
        if label_bytes not in (1, 2):
            raise ConfigError("number of label bytes must be 1 or 2")
        if folds < 2:
            raise ConfigError("number of folds must be >= 2")
        if scheduler not in {"synchronous", "threads", "processes"}:
            raise ConfigError(f"unexpected dask scheduler '{scheduler}'")

        self.train = TrainConfig() if train is None else train
        self.schema = schema
        self.mode = mode
        self.modes = modes
        self.image_shape = None if image_shape is None else as_tuple_of_int(image_shape)
        self.threshold = float(threshold)
        self.label_bytes = int(label_bytes)
        self.folds = int(folds)
        self.seed = int(seed)
        self.scheduler = scheduler

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> RunConfig:
        """
        Create a run configuration from a parsed JSON document.

        Parameters
        ----------
        doc : mapping
            The document. The optional ``train`` member holds `TrainConfig` keyword
            arguments, with nested ``growth`` and ``sorting`` members holding
            `GrowthConfig` and `SortingConfig` keyword arguments. The optional
            ``schema`` member maps each tabular item name to its cut-off values.

        Returns
        -------
        cfg : RunConfig
            The configuration.

        Raises
        ------
        ConfigError
            If the document has unknown keys or invalid values.
        """
        if not isinstance(doc, Mapping):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(doc) - _RUN_KEYS
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")

        try:
            kwargs = dict(doc)
            kwargs["train"] = _train_config(doc.get("train", {}))
            if "schema" in doc:
                kwargs["schema"] = CsvSchema.from_dict(doc["schema"])
            if "modes" in doc:
                kwargs["modes"] = tuple(doc["modes"])
            return cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError, AttributeError) as err:
            raise ConfigError(f"invalid configuration: {err}") from err


def _train_config(doc: Mapping[str, Any]) -> TrainConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("'train' must be a JSON object")
    kwargs = dict(doc)
    if "growth" in kwargs:
        kwargs["growth"] = GrowthConfig(**kwargs["growth"])
    if "sorting" in kwargs:
        kwargs["sorting"] = SortingConfig(**kwargs["sorting"])
    return TrainConfig(**kwargs)


def load_config(path: str | os.PathLike) -> RunConfig:
    """
    Load a run configuration from a JSON file.

    Parameters
    ----------
    path : str or path-like
        Configuration file path.

    Returns
    -------
    cfg : RunConfig
        The configuration.

    Raises
    ------
    FileNotFoundError
        If the file does not exist.
    ConfigError
        If the file is not valid JSON or describes an invalid configuration.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON: {err}") from err
    return RunConfig.from_dict(doc)
