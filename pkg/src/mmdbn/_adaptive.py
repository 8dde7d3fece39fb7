from __future__ import annotations

import dataclasses
from collections.abc import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._rbm import RbmParams, TrainingError

__all__ = [
    "GrowthConfig",
    "WdTracker",
    "apply_annihilation",
    "apply_generation",
    "neuron_annihilation_check",
    "neuron_generation_check",
    "update_wd",
]


@dataclasses.dataclass
class GrowthConfig:
    """
    Thresholds controlling neuron generation and annihilation.

    The same walking-distance (WD) statistics also gate the multi-modal sorting
    procedure through `wd_stable`.
    """

    theta_gen: float
    """float : A neuron whose WD exceeds this value is split in two."""

    theta_ann: float
    """float : Mean activation below which a stable neuron is removed."""

    wd_stable: float
    """float : WD below which a neuron is considered stable."""

    window: int
    """int : Number of recent epochs retained for WD statistics."""

    max_hidden: int
    """int : Upper limit on the number of hidden neurons."""

    noise_std: float
    """float : Standard deviation of the noise added to a generated neuron's weights."""

    enabled: bool
    """bool : Whether structural edits are performed during training."""

    def __init__(
        self,
        theta_gen: float = 0.05,
        theta_ann: float = 0.01,
        wd_stable: float = 0.01,
        window: int = 10,
        max_hidden: int = 500,
        noise_std: float = 0.01,
        *,
        enabled: bool = True,
    ):
        """
        Construct a new `GrowthConfig` object.

        Parameters
        ----------
        theta_gen : float, optional
            Neuron generation threshold. Must be > 0. Defaults to 0.05.
        theta_ann : float, optional
            Neuron annihilation activation threshold. Must be in (0, 1). Defaults to
            0.01.
        wd_stable : float, optional
            WD stability threshold. Must be > 0. Defaults to 0.01.
        window : int, optional
            Number of epochs retained for WD statistics. Must be >= 1. Defaults to 10.
        max_hidden : int, optional
            Maximum number of hidden neurons. Must be >= 1. Defaults to 500.
        noise_std : float, optional
            Standard deviation of the Gaussian noise added to a generated neuron's
            weights. Must be >= 0. Defaults to 0.01.
        enabled : bool, optional
            Whether neuron generation and annihilation are performed. Defaults to
            True.
        """
        if theta_gen <= 0.0:
            raise ValueError("generation threshold must be > 0")
        if not (0.0 < theta_ann < 1.0):
            raise ValueError("annihilation threshold must be between 0 and 1")
        if wd_stable <= 0.0:
            raise ValueError("WD stability threshold must be > 0")
        if window < 1:
            raise ValueError("WD window must be >= 1")
        if max_hidden < 1:
            raise ValueError("max number of hidden neurons must be >= 1")
        if noise_std < 0.0:
            raise ValueError("noise standard deviation must be >= 0")

        self.theta_gen = float(theta_gen)
        self.theta_ann = float(theta_ann)
        self.wd_stable = float(wd_stable)
        self.window = int(window)
        self.max_hidden = int(max_hidden)
        self.noise_std = float(noise_std)
        self.enabled = bool(enabled)


@dataclasses.dataclass(frozen=True, eq=False)
class WdTracker:
    """
    Rolling walking-distance (WD) statistics of an RBM's parameters.

    The tracker keeps the per-epoch parameter deltas of the most recent `window`
    epochs. The WD of a single parameter is the (population) variance of its deltas
    over the window. Per-neuron WD is the mean WD of the parameters incident to a
    hidden neuron (its column of `W` and its bias `c_j`).

    Deltas are multiplied by `scale` as they are recorded. Passing the reciprocal of
    the learning rate expresses WD in units of the gradient, independent of the step
    size.
    """

    window: int
    """int : Maximum number of epochs retained."""

    scale: float
    """float : Factor applied to each recorded delta."""

    delta_b: NDArray[np.float64]
    """numpy.ndarray : Visible bias deltas, with shape ``(n, I)``."""

    delta_c: NDArray[np.float64]
    """numpy.ndarray : Hidden bias deltas, with shape ``(n, J)``."""

    delta_w: NDArray[np.float64]
    """numpy.ndarray : Weight deltas, with shape ``(n, I, J)``."""

    @classmethod
    def empty(
        cls,
        n_visible: int,
        n_hidden: int,
        window: int = 10,
        *,
        scale: float = 1.0,
    ) -> WdTracker:
        """
        Create a tracker with no recorded history.

        Parameters
        ----------
        n_visible, n_hidden : int
            Number of visible and hidden units of the tracked RBM.
        window : int, optional
            Number of epochs retained. Must be >= 1. Defaults to 10.
        scale : float, optional
            Factor applied to each recorded delta. Must be > 0. Defaults to 1.

        Returns
        -------
        tracker : WdTracker
            The new tracker.
        """
        if window < 1:
            raise ValueError("WD window must be >= 1")
        if scale <= 0.0:
            raise ValueError("WD scale factor must be > 0")
        return cls(
            window=int(window),
            scale=float(scale),
            delta_b=np.zeros((0, n_visible)),
            delta_c=np.zeros((0, n_hidden)),
            delta_w=np.zeros((0, n_visible, n_hidden)),
        )

    @property
    def n_visible(self) -> int:
        """int : Number of tracked visible units."""
        return self.delta_b.shape[1]

    @property
    def n_hidden(self) -> int:
        """int : Number of tracked hidden neurons."""
        return self.delta_c.shape[1]

    @property
    def n_epochs(self) -> int:
        """int : Number of epochs currently held in the history."""
        return self.delta_b.shape[0]

    @property
    def is_full(self) -> bool:
        """bool : True if the history holds `window` epochs."""
        return self.n_epochs >= self.window

    @property
    def neuron_wd(self) -> NDArray[np.float64]:
        """numpy.ndarray : Per-hidden-neuron WD, with length J."""
        if self.n_epochs == 0:
            return np.zeros(self.n_hidden)
        var_w = np.var(self.delta_w, axis=0)
        var_c = np.var(self.delta_c, axis=0)
        return (np.sum(var_w, axis=0) + var_c) / (self.n_visible + 1)

    @property
    def parameter_wd(self) -> dict[str, float]:
        """dict : Mean WD of each parameter group, keyed by "b", "c" and "W"."""
        if self.n_epochs == 0:
            return {"b": 0.0, "c": 0.0, "W": 0.0}
        return {
            "b": float(np.mean(np.var(self.delta_b, axis=0))),
            "c": float(np.mean(np.var(self.delta_c, axis=0))),
            "W": float(np.mean(np.var(self.delta_w, axis=0))),
        }

    @property
    def total_wd(self) -> float:
        """float : Mean WD over every parameter of the RBM."""
        if self.n_epochs == 0:
            return 0.0
        total = (
            np.sum(np.var(self.delta_b, axis=0))
            + np.sum(np.var(self.delta_c, axis=0))
            + np.sum(np.var(self.delta_w, axis=0))
        )
        count = self.n_visible + self.n_hidden + self.n_visible * self.n_hidden
        return float(total / count)

    def reindex_visible(self, order: ArrayLike) -> WdTracker:
        """
        Reorder the visible-side history.

        Parameters
        ----------
        order : array_like
            Index array of length I. Row ``i`` of the result holds row ``order[i]``
            of the input.

        Returns
        -------
        tracker : WdTracker
            The reordered tracker.
        """
        order = np.asarray(order, dtype=np.intp)
        if order.shape != (self.n_visible,):
            raise ValueError("shape mismatch: visible order must have length I")
        return dataclasses.replace(
            self,
            delta_b=self.delta_b[:, order],
            delta_w=self.delta_w[:, order, :],
        )


def update_wd(tracker: WdTracker, old: RbmParams, new: RbmParams) -> WdTracker:
    """
    Record one epoch of parameter movement.

    Parameters
    ----------
    tracker : WdTracker
        The current statistics.
    old, new : RbmParams
        Parameters at the start and end of the epoch. Must have the same shape as
        each other and as the tracker.

    Returns
    -------
    tracker : WdTracker
        Updated statistics. The oldest epoch is evicted if the history is full.

    Raises
    ------
    TrainingError
        If the shapes are inconsistent or the deltas are not finite.
    """
    if old.shape != new.shape:
        raise TrainingError(
            f"shape mismatch: old parameters have shape {old.shape}, new parameters"
            f" have shape {new.shape}"
        )
    if old.shape != (tracker.n_visible, tracker.n_hidden):
        raise TrainingError(
            f"shape mismatch: parameters have shape {old.shape}, tracker has shape"
            f" {(tracker.n_visible, tracker.n_hidden)}"
        )

    s = tracker.scale
    db = s * (new.visible_bias - old.visible_bias)
    dc = s * (new.hidden_bias - old.hidden_bias)
    dw = s * (new.weights - old.weights)
    if not (np.all(np.isfinite(db)) and np.all(np.isfinite(dc))):
        raise TrainingError("parameter deltas contain non-finite values")
    if not np.all(np.isfinite(dw)):
        raise TrainingError("parameter deltas contain non-finite values")

    # Keep at most `window` epochs, dropping the oldest.
    start = max(0, tracker.n_epochs + 1 - tracker.window)
    return dataclasses.replace(
        tracker,
        delta_b=np.concatenate([tracker.delta_b, db[None]])[start:],
        delta_c=np.concatenate([tracker.delta_c, dc[None]])[start:],
        delta_w=np.concatenate([tracker.delta_w, dw[None]])[start:],
    )


def neuron_generation_check(tracker: WdTracker, cfg: GrowthConfig) -> int | None:
    """
    Find a hidden neuron that should be split.

    Parameters
    ----------
    tracker : WdTracker
        Current WD statistics.
    cfg : GrowthConfig
        Structural learning thresholds.

    Returns
    -------
    parent : int or None
        The index of the neuron with the highest WD, if that WD exceeds
        `cfg.theta_gen`, the hidden layer is below its size limit and the WD window
        is full. Otherwise None.
    """
    if not tracker.is_full:
        return None
    if tracker.n_hidden >= cfg.max_hidden:
        return None

    wd = tracker.neuron_wd
    j = int(np.argmax(wd))
    if wd[j] > cfg.theta_gen:
        return j
    return None


def apply_generation(
    params: RbmParams,
    tracker: WdTracker,
    parent: int,
    rng: np.random.Generator | int | None = None,
    *,
    max_hidden: int | None = None,
    noise_std: float = 0.01,
) -> tuple[RbmParams, WdTracker]:
    """
    Split a hidden neuron in two.

    The parent's weights are halved. The new neuron is inserted immediately after the
    parent, with the parent's halved weights plus Gaussian noise and the parent's
    bias.

    Parameters
    ----------
    params : RbmParams
        Current parameters.
    tracker : WdTracker
        Current WD statistics.
    parent : int
        Index of the neuron to split.
    rng : numpy.random.Generator or int or None, optional
        Random generator, or a seed used to create one. Defaults to None.
    max_hidden : int or None, optional
        If not None, the maximum allowed number of hidden neurons. Defaults to None.
    noise_std : float, optional
        Standard deviation of the weight noise. Zero disables noise. Defaults to
        0.01.

    Returns
    -------
    params : RbmParams
        Parameters with ``J + 1`` hidden neurons.
    tracker : WdTracker
        Statistics with zero history for the new neuron.
    """
    n_hidden = params.n_hidden
    if not (0 <= parent < n_hidden):
        raise IndexError(f"neuron index {parent} out of range for {n_hidden} neurons")
    if (max_hidden is not None) and (n_hidden >= max_hidden):
        raise ValueError(f"hidden layer already has the maximum {max_hidden} neurons")
    if noise_std < 0.0:
        raise ValueError("noise standard deviation must be >= 0")

    half = 0.5 * params.weights[:, parent]
    child = half.copy()
    if noise_std > 0.0:
        rng = np.random.default_rng(rng)
        child += rng.normal(scale=noise_std, size=half.shape)

    weights = params.weights.copy()
    weights[:, parent] = half
    weights = np.insert(weights, parent + 1, child, axis=1)
    hidden_bias = np.insert(
        params.hidden_bias, parent + 1, params.hidden_bias[parent]
    )
    new_params = RbmParams(params.visible_bias, hidden_bias, weights)

    new_tracker = dataclasses.replace(
        tracker,
        delta_c=np.insert(tracker.delta_c, parent + 1, 0.0, axis=1),
        delta_w=np.insert(tracker.delta_w, parent + 1, 0.0, axis=2),
    )
    return new_params, new_tracker


def neuron_annihilation_check(
    hidden_means: ArrayLike,
    tracker: WdTracker,
    cfg: GrowthConfig,
) -> set[int]:
    """
    Find dead, stable hidden neurons.

    Parameters
    ----------
    hidden_means : array_like
        Mean activation probability of each hidden neuron. Values must be in
        [0, 1].
    tracker : WdTracker
        Current WD statistics.
    cfg : GrowthConfig
        Structural learning thresholds.

    Returns
    -------
    victims : set of int
        Indices whose mean activation is below `cfg.theta_ann` and whose WD is below
        `cfg.wd_stable`. If every neuron qualifies, the one with the highest mean
        activation (lowest index on ties) is spared, so the hidden layer is never
        emptied.
    """
    means = np.asarray(hidden_means, dtype=np.float64)
    if means.shape != (tracker.n_hidden,):
        raise ValueError(
            f"shape mismatch: expected {tracker.n_hidden} mean activations, got"
            f" shape {means.shape}"
        )
    if not np.all((means >= 0.0) & (means <= 1.0)):
        raise ValueError("mean activations must be between 0 and 1")

    if len(means) <= 1:
        return set()

    dead = (means < cfg.theta_ann) & (tracker.neuron_wd < cfg.wd_stable)
    victims = {int(j) for j in np.flatnonzero(dead)}
    if len(victims) == len(means):
        victims.discard(int(np.argmax(means)))
    return victims


def apply_annihilation(
    params: RbmParams,
    tracker: WdTracker,
    victims: Iterable[int],
) -> tuple[RbmParams, WdTracker]:
    """
    Remove hidden neurons.

    Parameters
    ----------
    params : RbmParams
        Current parameters.
    tracker : WdTracker
        Current WD statistics.
    victims : iterable of int
        Indices of the neurons to remove. Must not include every neuron.

    Returns
    -------
    params : RbmParams
        Parameters without the removed neurons. Surviving neurons keep their
        relative order.
    tracker : WdTracker
        Statistics without the removed neurons.
    """
    victims = set(victims)
    if not victims:
        return params, tracker

    n_hidden = params.n_hidden
    if any((j < 0) or (j >= n_hidden) for j in victims):
        raise IndexError(f"neuron index out of range for {n_hidden} neurons")
    if len(victims) >= n_hidden:
        raise ValueError("cannot remove every hidden neuron")

    keep = np.array([j for j in range(n_hidden) if j not in victims], dtype=np.intp)
    new_params = RbmParams(
        params.visible_bias,
        params.hidden_bias[keep],
        params.weights[:, keep],
    )
    new_tracker = dataclasses.replace(
        tracker,
        delta_c=tracker.delta_c[:, keep],
        delta_w=tracker.delta_w[:, :, keep],
    )
    return new_params, new_tracker
