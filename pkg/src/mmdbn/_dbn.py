from __future__ import annotations

import copy
import dataclasses
import logging
import time
from collections import deque
from collections.abc import Sequence
from typing import Any, Literal

import numpy as np
import scipy.special
from numpy.typing import ArrayLike, NDArray

from ._adaptive import (
    GrowthConfig,
    WdTracker,
    apply_annihilation,
    apply_generation,
    neuron_annihilation_check,
    neuron_generation_check,
    update_wd,
)
from ._arrangement import (
    BlockLayout,
    LookupTable,
    SortingConfig,
    apply_lookup,
    initial_arrangement,
    multimodal_sort,
    pseudo_block_layout,
    rebuild_table,
)
from ._data import MultiModalDataset
from ._rbm import (
    RbmParams,
    TrainingError,
    cd_gradient,
    hidden_probabilities,
    reconstruction_error,
    sgd_update,
)
from ._util import as_binary_array, ceil_divide, iter_minibatches

__all__ = [
    "DbnLayer",
    "DbnModel",
    "LayerStats",
    "SoftmaxHead",
    "TrainConfig",
    "apply_mode",
    "fit_softmax_head",
    "infer",
    "layer_generation_check",
    "predict_proba",
    "propagate",
    "train_dbn",
    "train_layer",
]

logger = logging.getLogger(__name__)


MODES = ("traditional", "adaptive", "multimodal")


@dataclasses.dataclass
class TrainConfig:
    """Hyperparameters of greedy layer-wise adaptive DBN training."""

    lr: float
    """float : SGD learning rate of each RBM."""

    batch_size: int
    """int : Number of rows per minibatch."""

    initial_hidden: int
    """int : Initial number of hidden neurons of each RBM."""

    max_layers: int
    """int : Maximum number of RBM layers."""

    epoch_cap: int
    """int : Maximum number of epochs per layer."""

    growth: GrowthConfig
    """GrowthConfig : Neuron generation and annihilation settings."""

    sorting: SortingConfig
    """SortingConfig : Multi-modal sorting settings."""

    cd_steps: int
    """int : Number of Gibbs steps of contrastive divergence."""

    cd_mode: Literal["sampled", "mean_field"]
    """str : Negative phase mode of contrastive divergence."""

    init_std: float
    """float : Standard deviation of the initial weights."""

    tolerance: float
    """float : Minimum relative improvement of the reconstruction error."""

    patience: int
    """int : Number of epochs over which `tolerance` is measured."""

    target_error: float | None
    """float or None : Reconstruction error at which a layer stops training early."""

    err_floor: float
    """float : Residual error above which another layer may be generated."""

    wd_floor: float
    """float : Total WD above which another layer may be generated."""

    layer_growth: bool
    """bool : Whether the number of layers is chosen adaptively."""

    head_lr: float
    """float : Learning rate of the softmax head."""

    head_epochs: int
    """int : Number of training epochs of the softmax head."""

    shuffle: bool
    """bool : Whether rows are visited in random order each epoch."""

    block_length: int | None
    """int or None : Visible units per image block, or None for whole image rows."""

    def __init__(
        self,
        lr: float = 0.01,
        batch_size: int = 100,
        initial_hidden: int = 300,
        max_layers: int = 6,
        epoch_cap: int = 500,
        growth: GrowthConfig | None = None,
        sorting: SortingConfig | None = None,
        *,
        cd_steps: int = 1,
        cd_mode: Literal["sampled", "mean_field"] = "sampled",
        init_std: float = 0.01,
        tolerance: float = 1e-4,
        patience: int = 10,
        target_error: float | None = None,
        err_floor: float = 0.05,
        wd_floor: float = 0.01,
        layer_growth: bool = True,
        head_lr: float = 0.1,
        head_epochs: int = 200,
        shuffle: bool = True,
        block_length: int | None = None,
    ):
        """
        Construct a new `TrainConfig` object.

        Parameters
        ----------
        lr : float, optional
            SGD learning rate. Must be > 0. Defaults to 0.01.
        batch_size : int, optional
            Minibatch size. Must be >= 1. Defaults to 100.
        initial_hidden : int, optional
            Initial number of hidden neurons. Must be >= 1. Defaults to 300.
        max_layers : int, optional
            Maximum number of layers. Must be >= 1. Defaults to 6.
        epoch_cap : int, optional
            Maximum number of epochs per layer. Must be >= 1. Defaults to 500.
        growth : GrowthConfig or None, optional
            Neuron generation and annihilation settings. If None, the defaults are
            used. Defaults to None.
        sorting : SortingConfig or None, optional
            Multi-modal sorting settings. If None, the defaults are used. Defaults to
            None.
        cd_steps : int, optional
            Number of Gibbs steps. Must be >= 1. Defaults to 1.
        cd_mode : {'sampled', 'mean_field'}, optional
            Negative phase mode. Defaults to 'sampled'.
        init_std : float, optional
            Standard deviation of the initial weights. Must be >= 0. Defaults to 0.01.
        tolerance : float, optional
            Training stops once the relative improvement of the reconstruction error
            over `patience` epochs falls below this value. Must be >= 0. Defaults to
            1e-4.
        patience : int, optional
            Window, in epochs, of the improvement test. Must be >= 1. Defaults to 10.
        target_error : float or None, optional
            If not None, training stops once the reconstruction error is at most this
            value. Defaults to None.
        err_floor : float, optional
            Layer generation error floor. Must be >= 0. Defaults to 0.05.
        wd_floor : float, optional
            Layer generation WD floor. Must be >= 0. Defaults to 0.01.
        layer_growth : bool, optional
            If True, another layer is added only while `layer_generation_check`
            passes. If False, exactly `max_layers` layers are trained. Defaults to
            True.
        head_lr : float, optional
            Softmax head learning rate. Must be > 0. Defaults to 0.1.
        head_epochs : int, optional
            Softmax head training epochs. Must be >= 1. Defaults to 200.
        shuffle : bool, optional
            Whether rows are visited in random order each epoch. Defaults to True.
        block_length : int or None, optional
            Visible units per image block in the first layer, and per pseudo-block in
            the layers above it. If None, whole image rows are used. Defaults to None.
        """
        growth = GrowthConfig() if growth is None else growth
        sorting = SortingConfig() if sorting is None else sorting

        if lr <= 0.0:
            raise ValueError("learning rate must be > 0")
        if batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if initial_hidden < 1:
            raise ValueError("initial number of hidden neurons must be >= 1")
        if max_layers < 1:
            raise ValueError("max number of layers must be >= 1")
        if epoch_cap < 1:
            raise ValueError("epoch cap must be >= 1")
        if growth.max_hidden < initial_hidden:
            raise ValueError(
                "max number of hidden neurons must be >= initial number of hidden"
                " neurons"
            )
        if cd_steps < 1:
            raise ValueError("number of Gibbs steps must be >= 1")
        if cd_mode not in {"sampled", "mean_field"}:
            raise ValueError(f"unexpected contrastive divergence mode '{cd_mode}'")
        if init_std < 0.0:
            raise ValueError("weight standard deviation must be >= 0")
        if tolerance < 0.0:
            raise ValueError("tolerance must be >= 0")
        if patience < 1:
            raise ValueError("patience must be >= 1")
        if (target_error is not None) and (target_error < 0.0):
            raise ValueError("target reconstruction error must be >= 0")
        if (err_floor < 0.0) or (wd_floor < 0.0):
            raise ValueError("layer generation floors must be >= 0")
        if head_lr <= 0.0:
            raise ValueError("head learning rate must be > 0")
        if head_epochs < 1:
            raise ValueError("number of head epochs must be >= 1")
        if (block_length is not None) and (block_length < 1):
            raise ValueError("block length must be >= 1")

        self.lr = float(lr)
        self.batch_size = int(batch_size)
        self.initial_hidden = int(initial_hidden)
        self.max_layers = int(max_layers)
        self.epoch_cap = int(epoch_cap)
        self.growth = growth
        self.sorting = sorting
        self.cd_steps = int(cd_steps)
        self.cd_mode = cd_mode
        self.init_std = float(init_std)
        self.tolerance = float(tolerance)
        self.patience = int(patience)
        self.target_error = None if target_error is None else float(target_error)
        self.err_floor = float(err_floor)
        self.wd_floor = float(wd_floor)
        self.layer_growth = bool(layer_growth)
        self.head_lr = float(head_lr)
        self.head_epochs = int(head_epochs)
        self.shuffle = bool(shuffle)
        self.block_length = None if block_length is None else int(block_length)


def apply_mode(
    cfg: TrainConfig,
    mode: Literal["traditional", "adaptive", "multimodal"],
) -> TrainConfig:
    """
    Configure training for one of the three model variants.

    Parameters
    ----------
    cfg : TrainConfig
        Base configuration. Not modified.
    mode : {'traditional', 'adaptive', 'multimodal'}
        'traditional' trains a fixed stack of fixed-size RBMs. 'adaptive' enables
        neuron and layer generation. 'multimodal' additionally enables block sorting.

    Returns
    -------
    cfg : TrainConfig
        A copy of the configuration with the structural learning flags set.
    """
    if mode not in MODES:
        raise ValueError(f"unexpected mode '{mode}'")
    out = copy.deepcopy(cfg)
    out.growth.enabled = mode != "traditional"
    out.layer_growth = mode != "traditional"
    out.sorting.enabled = mode == "multimodal"
    return out


@dataclasses.dataclass
class LayerStats:
    """Training record of one RBM layer."""

    iterations: int
    """int : Number of training epochs."""

    moves: int
    """int : Total number of block relocations."""

    seconds: float
    """float : Wall-clock training time, in seconds."""

    final_error: float
    """float : Reconstruction error after the last epoch."""

    error_history: list[float]
    """list of float : Reconstruction error after each epoch."""

    n_hidden: int
    """int : Final number of hidden neurons."""

    generated: int = 0
    """int : Number of neuron generation events."""

    annihilated: int = 0
    """int : Number of neurons removed."""

    total_wd: float = 0.0
    """float : Total WD at the end of training."""

    def to_dict(self, *, include_time: bool = True) -> dict[str, Any]:
        """Convert to a JSON-compatible dict, optionally without the wall time."""
        out = dataclasses.asdict(self)
        if not include_time:
            del out["seconds"]
        return out


@dataclasses.dataclass(frozen=True, eq=False)
class DbnLayer:
    """A trained RBM together with the arrangement of its visible units."""

    params: RbmParams
    """RbmParams : RBM parameters, with visible units in arranged order."""

    table: LookupTable
    """LookupTable : Maps the layer's raw input to its arranged visible units."""

    layout: BlockLayout
    """BlockLayout : Final block arrangement."""

    stats: LayerStats
    """LayerStats : Training record."""

    def __post_init__(self):
        if len(self.table) != self.params.n_visible:
            raise ValueError(
                f"length mismatch: lookup table has length {len(self.table)}, layer"
                f" has {self.params.n_visible} visible units"
            )

    @property
    def n_visible(self) -> int:
        """int : Number of visible units."""
        return self.params.n_visible

    @property
    def n_hidden(self) -> int:
        """int : Number of hidden neurons."""
        return self.params.n_hidden

    def hidden_probabilities(self, raw: ArrayLike) -> NDArray[np.float64]:
        """Map raw inputs through the lookup table and compute hidden probabilities."""
        return hidden_probabilities(apply_lookup(self.table, raw), self.params)

    def transform(self, raw: ArrayLike) -> NDArray[np.uint8]:
        """Binary hidden features: probabilities thresholded strictly above 0.5."""
        return (self.hidden_probabilities(raw) > 0.5).astype(np.uint8)


@dataclasses.dataclass(frozen=True, eq=False)
class SoftmaxHead:
    """Linear softmax classifier over top-layer features."""

    weights: NDArray[np.float64]
    """numpy.ndarray : Weights, with shape ``(J, C)``."""

    bias: NDArray[np.float64]
    """numpy.ndarray : Biases, with length C."""

    def __post_init__(self):
        if (self.weights.ndim != 2) or (self.bias.shape != (self.weights.shape[1],)):
            raise ValueError("shape mismatch: head weights must be (J, C), bias (C,)")

    @property
    def n_features(self) -> int:
        """int : Number of input features (J)."""
        return self.weights.shape[0]

    @property
    def n_classes(self) -> int:
        """int : Number of classes (C)."""
        return self.weights.shape[1]

    def probabilities(self, features: ArrayLike) -> NDArray[np.float64]:
        """Class probabilities of each row of features."""
        x = np.asarray(features, dtype=np.float64)
        if x.shape[-1] != self.n_features:
            raise ValueError(
                f"length mismatch: expected {self.n_features} features, got shape"
                f" {x.shape}"
            )
        return scipy.special.softmax(x @ self.weights + self.bias, axis=-1)


def fit_softmax_head(
    features: ArrayLike,
    labels: ArrayLike,
    n_classes: int,
    lr: float = 0.1,
    epochs: int = 200,
    batch_size: int = 100,
    rng: np.random.Generator | int | None = None,
) -> SoftmaxHead:
    """
    Fit a softmax regression classifier by minibatch SGD on the cross-entropy.

    Parameters
    ----------
    features : array_like
        Input features, one row per sample.
    labels : array_like
        Integer class labels in ``0, ..., n_classes - 1``.
    n_classes : int
        Number of classes. Must be >= 1.
    lr : float, optional
        Learning rate. Must be > 0. Defaults to 0.1.
    epochs : int, optional
        Number of passes over the data. Must be >= 1. Defaults to 200.
    batch_size : int, optional
        Minibatch size. Must be >= 1. Defaults to 100.
    rng : numpy.random.Generator or int or None, optional
        Random generator used to shuffle rows, or a seed used to create one. Defaults
        to None.

    Returns
    -------
    head : SoftmaxHead
        The fitted classifier.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if (x.ndim != 2) or (len(x) == 0):
        raise ValueError("features must be a non-empty 2-D array")
    if y.shape != (len(x),):
        raise ValueError("shape mismatch: expected one label per feature row")
    if n_classes < 1:
        raise ValueError("number of classes must be >= 1")
    if np.any((y < 0) | (y >= n_classes)):
        raise ValueError(f"labels must be >= 0 and < {n_classes}")
    if lr <= 0.0:
        raise ValueError("learning rate must be > 0")
    if epochs < 1:
        raise ValueError("number of epochs must be >= 1")

    rng = np.random.default_rng(rng)
    onehot = np.eye(n_classes)[y]
    weights = np.zeros((x.shape[1], n_classes))
    bias = np.zeros(n_classes)

    for epoch in range(1, epochs + 1):
        for idx in iter_minibatches(len(x), batch_size, rng):
            p = scipy.special.softmax(x[idx] @ weights + bias, axis=1)
            resid = p - onehot[idx]
            weights -= lr * (x[idx].T @ resid) / len(idx)
            bias -= lr * np.mean(resid, axis=0)
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise TrainingError("softmax head weights are not finite", epoch=epoch)

    return SoftmaxHead(weights=weights, bias=bias)


def _converged(history: Sequence[float], cfg: TrainConfig) -> bool:
    last = history[-1]
    if (cfg.target_error is not None) and (last <= cfg.target_error):
        return True
    if len(history) <= cfg.patience:
        return False
    prev = history[-1 - cfg.patience]
    if prev <= 0.0:
        return True
    return (prev - last) / prev < cfg.tolerance


def train_layer(
    data: ArrayLike,
    cfg: TrainConfig,
    rng: np.random.Generator | int | None = None,
    *,
    layout: BlockLayout | None = None,
    table: LookupTable | None = None,
    initial_params: RbmParams | None = None,
    layer_index: int = 1,
) -> DbnLayer:
    """
    Train one adaptive RBM layer.

    Each epoch runs minibatch CD updates over the arranged data, records the epoch's
    parameter movement, performs at most one structural edit (neuron generation is
    checked before annihilation), and then runs one pass of the multi-modal sorting
    procedure.

    Parameters
    ----------
    data : array_like
        Binary training rows in original input order.
    cfg : TrainConfig
        Training configuration.
    rng : numpy.random.Generator or int or None, optional
        Random generator, or a seed used to create one. Defaults to None.
    layout : BlockLayout or None, optional
        Initial block arrangement of the visible units. If None, all units form a
        single image block. Defaults to None.
    table : LookupTable or None, optional
        Lookup table of `layout`. If None, it is rebuilt from `layout`. Defaults to
        None.
    initial_params : RbmParams or None, optional
        Initial parameters, with visible units in arranged order. If None, small
        random weights are drawn from `rng`. Defaults to None.
    layer_index : int, optional
        1-based layer number, used in log messages and errors. Defaults to 1.

    Returns
    -------
    layer : DbnLayer
        The trained layer.

    Raises
    ------
    TrainingError
        If training produced non-finite values.
    """
    data = as_binary_array(data, name="training data")
    if (data.ndim != 2) or (len(data) == 0):
        raise ValueError("training data must be a non-empty 2-D array")
    n, n_visible = data.shape

    rng = np.random.default_rng(rng)

    if layout is None:
        layout, table = pseudo_block_layout(n_visible, n_visible)
    elif table is None:
        table = rebuild_table(layout)
    if layout.n_positions != n_visible:
        raise ValueError(
            f"shape mismatch: layout covers {layout.n_positions} positions, data has"
            f" {n_visible} columns"
        )

    if initial_params is None:
        params = RbmParams.initialize(
            n_visible, cfg.initial_hidden, rng, std=cfg.init_std
        )
    else:
        params = initial_params
    if params.n_visible != n_visible:
        raise ValueError(
            "shape mismatch: initial parameters must have one visible unit per column"
        )

    growth = cfg.growth
    tracker = WdTracker.empty(
        n_visible, params.n_hidden, growth.window, scale=1.0 / cfg.lr
    )

    arranged = apply_lookup(table, data).astype(np.float64)
    history: list[float] = []
    moves = 0
    generated = 0
    annihilated = 0
    since_edit = 0
    activity: deque[NDArray[np.float64]] = deque(maxlen=growth.window)

    start = time.perf_counter()
    for epoch in range(1, cfg.epoch_cap + 1):
        old = params
        order_rng = rng if cfg.shuffle else None
        try:
            for idx in iter_minibatches(n, cfg.batch_size, order_rng):
                grad = cd_gradient(
                    arranged[idx], params, cfg.cd_steps, cfg.cd_mode, rng
                )
                params = sgd_update(params, grad, cfg.lr)
            tracker = update_wd(tracker, old, params)
        except TrainingError as err:
            raise TrainingError(str(err), epoch=epoch, layer=layer_index) from err

        err = reconstruction_error(arranged, params)
        if not np.isfinite(err):
            raise TrainingError(
                "reconstruction error is not finite", epoch=epoch, layer=layer_index
            )
        history.append(err)
        since_edit += 1
        if growth.enabled:
            activity.append(np.mean(hidden_probabilities(arranged, params), axis=0))

        # Structural edits wait until a full window of epochs has been recorded since
        # the last edit.
        if growth.enabled and tracker.is_full and (since_edit >= growth.window):
            parent = neuron_generation_check(tracker, growth)
            if parent is not None:
                params, tracker = apply_generation(
                    params,
                    tracker,
                    parent,
                    rng,
                    max_hidden=growth.max_hidden,
                    noise_std=growth.noise_std,
                )
                generated += 1
                since_edit = 0
                activity.clear()
                logger.info(
                    f"layer {layer_index}, epoch {epoch}: split neuron {parent}"
                    f" (J={params.n_hidden})"
                )
            else:
                # Mean activation over the epochs recorded since the last edit.
                means = np.mean(activity, axis=0)
                victims = neuron_annihilation_check(means, tracker, growth)
                if victims:
                    params, tracker = apply_annihilation(params, tracker, victims)
                    annihilated += len(victims)
                    since_edit = 0
                    activity.clear()
                    logger.info(
                        f"layer {layer_index}, epoch {epoch}: removed neurons"
                        f" {sorted(victims)} (J={params.n_hidden})"
                    )

        epoch_moves = 0
        if cfg.sorting.enabled and tracker.is_full:
            ph = hidden_probabilities(arranged, params)
            h_state = np.any(ph > 0.5, axis=0).astype(np.uint8)
            result = multimodal_sort(
                params, layout, table, h_state, tracker, growth, cfg.sorting
            )
            epoch_moves = result.moves
            if epoch_moves > 0:
                params, tracker = result.params, result.tracker
                layout, table = result.layout, result.table
                arranged = apply_lookup(table, data).astype(np.float64)
                moves += epoch_moves

        logger.debug(
            f"layer {layer_index}, epoch {epoch}: error={err:.6f},"
            f" wd={tracker.total_wd:.3g}, moves={epoch_moves}"
        )

        if _converged(history, cfg):
            break
    seconds = time.perf_counter() - start

    stats = LayerStats(
        iterations=len(history),
        moves=moves,
        seconds=seconds,
        final_error=history[-1],
        error_history=history,
        n_hidden=params.n_hidden,
        generated=generated,
        annihilated=annihilated,
        total_wd=tracker.total_wd,
    )
    logger.info(
        f"layer {layer_index} done: {stats.iterations} epochs, J={stats.n_hidden},"
        f" moves={stats.moves}, error={stats.final_error:.6f},"
        f" {stats.seconds:.2f} s"
    )
    return DbnLayer(params=params, table=table, layout=layout, stats=stats)


def layer_generation_check(
    stats: LayerStats,
    layer_count: int,
    cfg: TrainConfig,
) -> bool:
    """
    Decide whether another layer should be stacked on top.

    Parameters
    ----------
    stats : LayerStats
        Training record of the current top layer.
    layer_count : int
        Number of layers trained so far.
    cfg : TrainConfig
        Provides `err_floor`, `wd_floor` and `max_layers`.

    Returns
    -------
    grow : bool
        True if the residual reconstruction error exceeds `cfg.err_floor`, the total
        WD exceeds `cfg.wd_floor`, and fewer than `cfg.max_layers` layers exist.
    """
    return (
        (stats.final_error > cfg.err_floor)
        and (stats.total_wd > cfg.wd_floor)
        and (layer_count < cfg.max_layers)
    )


@dataclasses.dataclass(frozen=True, eq=False)
class DbnModel:
    """A trained deep belief network with a softmax classification head."""

    layers: tuple[DbnLayer, ...]
    """tuple of DbnLayer : RBM layers, bottom first."""

    head: SoftmaxHead
    """SoftmaxHead : Classifier over the top layer's features."""

    classes: tuple[int, ...]
    """tuple of int : Class labels, indexed by head output."""

    def __init__(
        self,
        layers: Sequence[DbnLayer],
        head: SoftmaxHead,
        classes: Sequence[int] | None = None,
    ):
        layers = tuple(layers)
        if len(layers) == 0:
            raise ValueError("model must have at least one layer")
        for lower, upper in zip(layers[:-1], layers[1:]):
            if upper.n_visible != lower.n_hidden:
                raise ValueError(
                    "shape mismatch: each layer's visible units must match the hidden"
                    " neurons of the layer below"
                )
        if head.n_features != layers[-1].n_hidden:
            raise ValueError(
                "shape mismatch: head features must match the top layer's neurons"
            )
        if classes is None:
            classes = range(head.n_classes)
        classes = tuple(int(c) for c in classes)
        if len(classes) != head.n_classes:
            raise ValueError(
                "length mismatch: expected one class label per head output"
            )

        # Workaround for `frozen=True`.
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "classes", classes)

    @property
    def n_visible(self) -> int:
        """int : Length of a raw input vector."""
        return self.layers[0].n_visible

    @property
    def n_classes(self) -> int:
        """int : Number of classes."""
        return self.head.n_classes

    def transform(self, data: ArrayLike, depth: int | None = None) -> NDArray[np.uint8]:
        """
        Compute binary features after the first `depth` layers.

        Parameters
        ----------
        data : array_like
            Raw binary inputs. A vector of length I, or one input per row.
        depth : int or None, optional
            Number of layers to apply. If None, all layers are applied. Defaults to
            None.

        Returns
        -------
        features : numpy.ndarray
            Binary features.
        """
        depth = len(self.layers) if depth is None else depth
        if not (0 <= depth <= len(self.layers)):
            raise ValueError(f"depth must be between 0 and {len(self.layers)}")
        return propagate(self.layers[:depth], data)


def propagate(layers: Sequence[DbnLayer], data: ArrayLike) -> NDArray[np.uint8]:
    """
    Pass raw inputs upward through a sequence of layers.

    At each layer the input is rearranged by the layer's lookup table and mapped to
    binary features by thresholding the hidden probabilities at 0.5.

    Parameters
    ----------
    layers : sequence of DbnLayer
        Layers, bottom first.
    data : array_like
        Raw binary inputs. A vector, or one input per row.

    Returns
    -------
    features : numpy.ndarray
        Binary outputs of the top layer.
    """
    x = as_binary_array(data, name="input")
    if (len(layers) > 0) and (x.shape[-1] != layers[0].n_visible):
        raise ValueError(
            f"length mismatch: expected inputs of length {layers[0].n_visible}, got"
            f" shape {x.shape}"
        )
    for layer in layers:
        x = layer.transform(x)
    return x


def predict_proba(model: DbnModel, data: ArrayLike) -> NDArray[np.float64]:
    """Class probabilities of raw binary inputs (a vector or one input per row)."""
    return model.head.probabilities(model.transform(data))


def infer(model: DbnModel, raw: ArrayLike) -> tuple[int, NDArray[np.float64]]:
    """
    Classify a single raw input.

    Parameters
    ----------
    model : DbnModel
        Trained model.
    raw : array_like
        Binary input vector in original position order.

    Returns
    -------
    label : int
        Predicted class label. Exact ties resolve to the lowest class index.
    probs : numpy.ndarray
        Class probabilities.
    """
    raw = np.asarray(raw)
    if raw.shape != (model.n_visible,):
        raise ValueError(
            f"length mismatch: expected a vector of length {model.n_visible}, got"
            f" shape {raw.shape}"
        )
    probs = predict_proba(model, raw)
    return model.classes[int(np.argmax(probs))], probs


def _first_layer_arrangement(
    dataset: MultiModalDataset,
    block_length: int | None,
) -> tuple[BlockLayout, LookupTable]:
    image_spans, csv_spans = dataset.block_spans(block_length)
    return initial_arrangement(
        image_spans, csv_spans, row_blocks=dataset.blocks_per_row(block_length)
    )


def train_dbn(
    dataset: MultiModalDataset | ArrayLike,
    labels: ArrayLike | None,
    cfg: TrainConfig,
    rng: np.random.Generator | int | None = None,
    *,
    n_classes: int | None = None,
) -> DbnModel:
    """
    Train an adaptive deep belief network and its classification head.

    Layers are trained greedily. Each layer's binary features become the training
    data of the next. Layers are added while `layer_generation_check` passes (or
    until `cfg.max_layers` is reached if adaptive layer generation is disabled).
    Finally a softmax head is fitted on the top layer's features.

    Parameters
    ----------
    dataset : MultiModalDataset or array_like
        Training data. A `MultiModalDataset` provides the image and CSV block
        structure of the first layer. A plain binary array is treated as a single
        image-like block per `cfg.block_length` units.
    labels : array_like or None
        Class labels. May be None if `dataset` is a `MultiModalDataset`.
    cfg : TrainConfig
        Training configuration.
    rng : numpy.random.Generator or int or None, optional
        Random generator, or a seed used to create one. Defaults to None.
    n_classes : int or None, optional
        Number of classes. If None, one more than the largest label. Defaults to None.

    Returns
    -------
    model : DbnModel
        The trained model.
    """
    rng = np.random.default_rng(rng)

    if isinstance(dataset, MultiModalDataset):
        data = dataset.visible()
        labels = dataset.labels if labels is None else labels
        layout, table = _first_layer_arrangement(dataset, cfg.block_length)
        pseudo_length = cfg.block_length or int(np.prod(dataset.image_shape[1:]))
    else:
        data = as_binary_array(dataset, name="training data")
        pseudo_length = cfg.block_length or data.shape[1]
        layout, table = pseudo_block_layout(data.shape[1], pseudo_length)

    if labels is None:
        raise ValueError("labels are required")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (len(data),):
        raise ValueError("shape mismatch: expected one label per training row")
    if n_classes is None:
        n_classes = int(labels.max()) + 1

    layers: list[DbnLayer] = []
    x = data
    while True:
        layer = train_layer(
            x, cfg, rng, layout=layout, table=table, layer_index=len(layers) + 1
        )
        layers.append(layer)

        if cfg.layer_growth:
            grow = layer_generation_check(layer.stats, len(layers), cfg)
            logger.info(f"layer generation after layer {len(layers)}: {grow}")
        else:
            grow = len(layers) < cfg.max_layers
        if not grow:
            break

        x = layer.transform(x)
        n_units = layer.n_hidden
        length = min(pseudo_length, n_units)
        nblocks = int(ceil_divide(n_units, length))
        layout, table = pseudo_block_layout(
            n_units, length, min(cfg.sorting.csv_tail, nblocks - 1)
        )

    features = layers[-1].transform(x)
    head = fit_softmax_head(
        features,
        labels,
        n_classes,
        lr=cfg.head_lr,
        epochs=cfg.head_epochs,
        batch_size=cfg.batch_size,
        rng=rng,
    )
    return DbnModel(layers, head, range(n_classes))
