from __future__ import annotations

import dataclasses
from typing import Literal

import numpy as np
import scipy.special
from numpy.typing import ArrayLike, NDArray

from ._util import all_binary_states, as_binary_array

__all__ = [
    "Gradient",
    "RbmParams",
    "StateSpaceTooLargeError",
    "TrainingError",
    "cd_gradient",
    "energy",
    "exact_gradient",
    "exact_partition",
    "free_energy",
    "hidden_probabilities",
    "joint_probability",
    "log_likelihood",
    "log_partition",
    "reconstruction_error",
    "sample_bernoulli",
    "sgd_update",
    "visible_probabilities",
]


# The largest total number of units (I + J) for which the partition function is
# computed by exhaustive enumeration.
MAX_ENUMERATED_UNITS = 24


class StateSpaceTooLargeError(ValueError):
    """Raised if an exact computation would enumerate too many RBM states."""


class TrainingError(RuntimeError):
    """
    Raised if training produced non-finite values.

    Attributes
    ----------
    epoch : int or None
        The (1-based) epoch at which the fault was detected, if known.
    layer : int or None
        The (1-based) DBN layer being trained, if known.
    """

    def __init__(
        self,
        message: str,
        *,
        epoch: int | None = None,
        layer: int | None = None,
    ):
        super().__init__(message)
        self.epoch = epoch
        self.layer = layer

    def __str__(self) -> str:
        where = []
        if self.layer is not None:
            where.append(f"layer {self.layer}")
        if self.epoch is not None:
            where.append(f"epoch {self.epoch}")
        msg = super().__str__()
        return f"{', '.join(where)}: {msg}" if where else msg


def _readonly(arr: NDArray) -> NDArray:
    arr.setflags(write=False)
    return arr


@dataclasses.dataclass(frozen=True, eq=False)
class RbmParams:
    """
    Learnable parameters of a binary-binary restricted Boltzmann machine.

    The arrays are read-only, so a `RbmParams` object may be shared freely between
    concurrent readers. Every update produces a new object.
    """

    visible_bias: NDArray[np.float64]
    """numpy.ndarray : Visible unit biases `b`, with shape ``(I,)``."""

    hidden_bias: NDArray[np.float64]
    """numpy.ndarray : Hidden unit biases `c`, with shape ``(J,)``."""

    weights: NDArray[np.float64]
    """numpy.ndarray : Connection weights `W`, with shape ``(I, J)``."""

    def __init__(
        self,
        visible_bias: ArrayLike,
        hidden_bias: ArrayLike,
        weights: ArrayLike,
    ):
        """
        Construct a new `RbmParams` object.

        Parameters
        ----------
        visible_bias : array_like
            Visible unit biases. A 1-D array of length I >= 1.
        hidden_bias : array_like
            Hidden unit biases. A 1-D array of length J >= 1.
        weights : array_like
            Connection weights. A 2-D array with shape ``(I, J)``.
        """
        b = np.array(visible_bias, dtype=np.float64)
        c = np.array(hidden_bias, dtype=np.float64)
        w = np.array(weights, dtype=np.float64)

        if (b.ndim != 1) or (c.ndim != 1) or (w.ndim != 2):
            raise ValueError("biases must be 1-D arrays and weights a 2-D array")
        if (len(b) < 1) or (len(c) < 1):
            raise ValueError("number of visible and hidden units must be >= 1")
        if w.shape != (len(b), len(c)):
            raise ValueError(
                f"shape mismatch: weights have shape {w.shape}, expected"
                f" {(len(b), len(c))}"
            )

        # Workaround for `frozen=True`.
        object.__setattr__(self, "visible_bias", _readonly(b))
        object.__setattr__(self, "hidden_bias", _readonly(c))
        object.__setattr__(self, "weights", _readonly(w))

    @property
    def n_visible(self) -> int:
        """int : Number of visible units (I)."""
        return len(self.visible_bias)

    @property
    def n_hidden(self) -> int:
        """int : Number of hidden units (J)."""
        return len(self.hidden_bias)

    @property
    def shape(self) -> tuple[int, int]:
        """tuple of int : ``(I, J)``."""
        return self.weights.shape

    def is_finite(self) -> bool:
        """Check that every parameter is finite."""
        return bool(
            np.all(np.isfinite(self.visible_bias))
            and np.all(np.isfinite(self.hidden_bias))
            and np.all(np.isfinite(self.weights))
        )

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int) -> RbmParams:
        """Create parameters with every entry equal to zero."""
        return cls(
            np.zeros(n_visible),
            np.zeros(n_hidden),
            np.zeros((n_visible, n_hidden)),
        )

    @classmethod
    def initialize(
        cls,
        n_visible: int,
        n_hidden: int,
        rng: np.random.Generator | int | None = None,
        *,
        std: float = 0.01,
    ) -> RbmParams:
        """
        Create parameters with small random weights and zero biases.

        Parameters
        ----------
        n_visible, n_hidden : int
            Number of visible and hidden units.
        rng : numpy.random.Generator or int or None, optional
            Random generator, or a seed used to create one. Defaults to None.
        std : float, optional
            Standard deviation of the zero-mean Gaussian weights. Defaults to 0.01.

        Returns
        -------
        params : RbmParams
            The initial parameters.
        """
        if std < 0.0:
            raise ValueError("weight standard deviation must be >= 0")
        rng = np.random.default_rng(rng)
        return cls(
            np.zeros(n_visible),
            np.zeros(n_hidden),
            rng.normal(scale=std, size=(n_visible, n_hidden)),
        )


@dataclasses.dataclass(frozen=True, eq=False)
class Gradient:
    """A parameter update direction, shape-congruent with `RbmParams`."""

    visible_bias: NDArray[np.float64]
    hidden_bias: NDArray[np.float64]
    weights: NDArray[np.float64]

    @classmethod
    def zeros_like(cls, params: RbmParams) -> Gradient:
        """Create an all-zero gradient with the same shape as `params`."""
        return cls(
            np.zeros_like(params.visible_bias),
            np.zeros_like(params.hidden_bias),
            np.zeros_like(params.weights),
        )

    def __add__(self, other: Gradient) -> Gradient:
        if self.weights.shape != other.weights.shape:
            raise ValueError("shape mismatch: gradients must have the same shape")
        return Gradient(
            self.visible_bias + other.visible_bias,
            self.hidden_bias + other.hidden_bias,
            self.weights + other.weights,
        )

    def __mul__(self, scale: float) -> Gradient:
        return Gradient(
            scale * self.visible_bias,
            scale * self.hidden_bias,
            scale * self.weights,
        )

    __rmul__ = __mul__

    def norm(self) -> float:
        """Euclidean norm of all gradient entries."""
        return float(
            np.sqrt(
                np.sum(self.visible_bias**2)
                + np.sum(self.hidden_bias**2)
                + np.sum(self.weights**2)
            )
        )

    def is_finite(self) -> bool:
        """Check that every entry is finite."""
        return bool(
            np.all(np.isfinite(self.visible_bias))
            and np.all(np.isfinite(self.hidden_bias))
            and np.all(np.isfinite(self.weights))
        )


def _as_units(x: ArrayLike, n: int, name: str) -> NDArray[np.float64]:
    """Convert unit states (a vector or a batch of rows) to floats, checking length."""
    arr = np.asarray(x, dtype=np.float64)
    if (arr.ndim not in (1, 2)) or (arr.shape[-1] != n):
        raise ValueError(
            f"shape mismatch: {name} must have length {n}, got shape {arr.shape}"
        )
    return arr


def _as_batch(batch: ArrayLike, n: int) -> NDArray[np.float64]:
    arr = _as_units(batch, n, "batch rows")
    arr = np.atleast_2d(arr)
    if len(arr) == 0:
        raise ValueError("batch must contain at least one row")
    return arr


def _check_enumerable(params: RbmParams) -> None:
    nunits = params.n_visible + params.n_hidden
    if nunits > MAX_ENUMERATED_UNITS:
        raise StateSpaceTooLargeError(
            f"exact enumeration requires I + J <= {MAX_ENUMERATED_UNITS}, got {nunits}"
        )


def _softplus(x: NDArray) -> NDArray:
    return np.logaddexp(0.0, x)


def energy(v: ArrayLike, h: ArrayLike, params: RbmParams) -> float | NDArray:
    r"""
    Evaluate the RBM energy function.

    .. math::

        E(v, h) = -\sum_i b_i v_i - \sum_j c_j h_j - \sum_i \sum_j v_i W_{ij} h_j

    Parameters
    ----------
    v : array_like
        Visible states. A binary vector of length I, or a batch of such rows.
    h : array_like
        Hidden states. A binary vector of length J, or a batch of such rows.
    params : RbmParams
        RBM parameters.

    Returns
    -------
    e : float or numpy.ndarray
        The energy of each configuration.
    """
    v = _as_units(as_binary_array(v, name="v"), params.n_visible, "v")
    h = _as_units(as_binary_array(h, name="h"), params.n_hidden, "h")
    e = (
        -(v @ params.visible_bias)
        - (h @ params.hidden_bias)
        - np.einsum("...i,ij,...j->...", v, params.weights, h)
    )
    return float(e) if np.ndim(e) == 0 else e


def free_energy(v: ArrayLike, params: RbmParams) -> float | NDArray:
    """
    Evaluate the free energy of visible states, with the hidden layer summed out.

    Parameters
    ----------
    v : array_like
        Visible states. A vector of length I, or a batch of such rows.
    params : RbmParams
        RBM parameters.

    Returns
    -------
    f : float or numpy.ndarray
        Free energy of each visible configuration.
    """
    v = _as_units(v, params.n_visible, "v")
    f = -(v @ params.visible_bias) - np.sum(
        _softplus(params.hidden_bias + v @ params.weights), axis=-1
    )
    return float(f) if np.ndim(f) == 0 else f


def log_partition(params: RbmParams) -> float:
    """
    Compute the log of the partition function by exhaustive enumeration.

    The smaller of the two layers is enumerated explicitly and the other is summed
    out analytically, which yields the same value as enumerating all
    ``2**(I + J)`` joint states.

    Parameters
    ----------
    params : RbmParams
        RBM parameters. Must satisfy ``I + J <= 24``.

    Returns
    -------
    logz : float
        The natural log of the partition function.

    Raises
    ------
    StateSpaceTooLargeError
        If the model is too large to enumerate.
    """
    _check_enumerable(params)

    b, c, w = params.visible_bias, params.hidden_bias, params.weights
    if params.n_hidden <= params.n_visible:
        hs = all_binary_states(params.n_hidden).astype(np.float64)
        terms = hs @ c + np.sum(_softplus(b + hs @ w.T), axis=1)
    else:
        vs = all_binary_states(params.n_visible).astype(np.float64)
        terms = vs @ b + np.sum(_softplus(c + vs @ w), axis=1)

    return float(scipy.special.logsumexp(terms))


def exact_partition(params: RbmParams) -> float:
    """
    Compute the partition function ``Z = sum_v sum_h exp(-E(v, h))``.

    Parameters
    ----------
    params : RbmParams
        RBM parameters. Must satisfy ``I + J <= 24``.

    Returns
    -------
    z : float
        The partition function.

    Raises
    ------
    StateSpaceTooLargeError
        If the model is too large to enumerate.
    """
    return float(np.exp(log_partition(params)))


def joint_probability(v: ArrayLike, h: ArrayLike, params: RbmParams) -> float | NDArray:
    """
    Evaluate the joint probability ``p(v, h) = exp(-E(v, h)) / Z``.

    Parameters
    ----------
    v : array_like
        Visible states. A binary vector of length I, or a batch of such rows.
    h : array_like
        Hidden states. A binary vector of length J, or a batch of such rows.
    params : RbmParams
        RBM parameters. Must satisfy ``I + J <= 24``.

    Returns
    -------
    p : float or numpy.ndarray
        The probability of each joint configuration.

    Raises
    ------
    StateSpaceTooLargeError
        If the model is too large to enumerate.
    """
    logz = log_partition(params)
    p = np.exp(-np.asarray(energy(v, h, params)) - logz)
    return float(p) if np.ndim(p) == 0 else p


def hidden_probabilities(v: ArrayLike, params: RbmParams) -> NDArray[np.float64]:
    """
    Compute ``p(h_j = 1 | v) = sigmoid(c_j + sum_i v_i W_ij)``.

    Parameters
    ----------
    v : array_like
        Visible states (or mean-field values). A vector of length I, or a batch of
        such rows.
    params : RbmParams
        RBM parameters.

    Returns
    -------
    p : numpy.ndarray
        Hidden activation probabilities, with length J along the last axis.
    """
    v = _as_units(v, params.n_visible, "v")
    return scipy.special.expit(params.hidden_bias + v @ params.weights)


def visible_probabilities(h: ArrayLike, params: RbmParams) -> NDArray[np.float64]:
    """
    Compute ``p(v_i = 1 | h) = sigmoid(b_i + sum_j W_ij h_j)``.

    Parameters
    ----------
    h : array_like
        Hidden states (or mean-field values). A vector of length J, or a batch of
        such rows.
    params : RbmParams
        RBM parameters.

    Returns
    -------
    p : numpy.ndarray
        Visible activation probabilities, with length I along the last axis.
    """
    h = _as_units(h, params.n_hidden, "h")
    return scipy.special.expit(params.visible_bias + h @ params.weights.T)


def sample_bernoulli(
    probs: ArrayLike,
    rng: np.random.Generator | int | None = None,
) -> NDArray[np.uint8]:
    """
    Draw independent binary samples.

    Each output element is 1 if and only if a uniform draw on [0, 1) is less than
    the corresponding probability.

    Parameters
    ----------
    probs : array_like
        Success probabilities. Every element must be in [0, 1].
    rng : numpy.random.Generator or int or None, optional
        Random generator, or a seed used to create one. Defaults to None.

    Returns
    -------
    bits : numpy.ndarray
        Binary samples with the same shape as `probs`.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if not np.all((probs >= 0.0) & (probs <= 1.0)):
        raise ValueError("probabilities must be between 0 and 1")
    rng = np.random.default_rng(rng)
    return (rng.random(probs.shape) < probs).astype(np.uint8)


def cd_gradient(
    batch: ArrayLike,
    params: RbmParams,
    k: int = 1,
    mode: Literal["sampled", "mean_field"] = "sampled",
    rng: np.random.Generator | int | None = None,
) -> Gradient:
    """
    Estimate the log-likelihood gradient by k-step contrastive divergence.

    The positive phase uses hidden probabilities given the data. The negative phase
    runs `k` steps of block Gibbs sampling starting from the data. In "mean_field"
    mode no sampling takes place: every Gibbs step propagates probabilities, so the
    result is deterministic.

    Parameters
    ----------
    batch : array_like
        Training rows. A 2-D array with I columns (a single vector is also accepted).
    params : RbmParams
        Current RBM parameters.
    k : int, optional
        Number of Gibbs steps. Must be >= 1. Defaults to 1.
    mode : {'sampled', 'mean_field'}, optional
        Negative phase mode. Defaults to 'sampled'.
    rng : numpy.random.Generator or int or None, optional
        Random generator, or a seed used to create one. Ignored in "mean_field"
        mode. Defaults to None.

    Returns
    -------
    grad : Gradient
        The batch-averaged difference between data and reconstruction statistics.
    """
    if k < 1:
        raise ValueError("number of Gibbs steps must be >= 1")
    if mode not in {"sampled", "mean_field"}:
        raise ValueError(f"unexpected contrastive divergence mode '{mode}'")

    v0 = _as_batch(batch, params.n_visible)
    sampled = mode == "sampled"
    if sampled:
        rng = np.random.default_rng(rng)

    ph0 = hidden_probabilities(v0, params)
    h = sample_bernoulli(ph0, rng) if sampled else ph0

    for step in range(k):
        pv = visible_probabilities(h, params)
        vk = sample_bernoulli(pv, rng) if sampled else pv
        phk = hidden_probabilities(vk, params)
        if step < k - 1:
            h = sample_bernoulli(phk, rng) if sampled else phk

    n = len(v0)
    return Gradient(
        visible_bias=np.mean(v0 - vk, axis=0),
        hidden_bias=np.mean(ph0 - phk, axis=0),
        weights=(v0.T @ ph0 - vk.T @ phk) / n,
    )


def sgd_update(params: RbmParams, grad: Gradient, lr: float) -> RbmParams:
    """
    Apply one stochastic gradient ascent step, ``theta + lr * grad``.

    Parameters
    ----------
    params : RbmParams
        Current parameters.
    grad : Gradient
        Update direction. Must have the same shape as `params`.
    lr : float
        Learning rate. Must be > 0.

    Returns
    -------
    new_params : RbmParams
        The updated parameters.

    Raises
    ------
    TrainingError
        If the gradient or the updated parameters contain non-finite values.
    """
    if lr <= 0.0:
        raise ValueError("learning rate must be > 0")
    if (grad.weights.shape != params.shape) or (
        grad.visible_bias.shape != params.visible_bias.shape
        or grad.hidden_bias.shape != params.hidden_bias.shape
    ):
        raise ValueError("shape mismatch: gradient and parameters must be congruent")
    if not grad.is_finite():
        raise TrainingError("gradient contains non-finite values")

    new_params = RbmParams(
        params.visible_bias + lr * grad.visible_bias,
        params.hidden_bias + lr * grad.hidden_bias,
        params.weights + lr * grad.weights,
    )
    if not new_params.is_finite():
        raise TrainingError("parameter update produced non-finite values")
    return new_params


def reconstruction_error(batch: ArrayLike, params: RbmParams) -> float:
    """
    Mean squared error of one mean-field reconstruction of the batch.

    Parameters
    ----------
    batch : array_like
        Rows to reconstruct. A 2-D array with I columns.
    params : RbmParams
        RBM parameters.

    Returns
    -------
    err : float
        The mean (over rows and units) squared difference between the input and
        ``p(v | p(h | v))``.
    """
    v0 = _as_batch(batch, params.n_visible)
    recon = visible_probabilities(hidden_probabilities(v0, params), params)
    return float(np.mean((v0 - recon) ** 2))


def log_likelihood(data: ArrayLike, params: RbmParams) -> float:
    """
    Exact mean log-likelihood of the data under the model's visible marginal.

    Parameters
    ----------
    data : array_like
        Visible rows. A 2-D binary array with I columns.
    params : RbmParams
        RBM parameters. Must satisfy ``I + J <= 24``.

    Returns
    -------
    ll : float
        Mean of ``log p(v)`` over the rows.
    """
    v = _as_batch(as_binary_array(data, name="data"), params.n_visible)
    return float(np.mean(-np.asarray(free_energy(v, params))) - log_partition(params))


def exact_gradient(data: ArrayLike, params: RbmParams) -> Gradient:
    """
    Exact gradient of the mean log-likelihood with respect to the parameters.

    The model expectation is computed by enumerating every visible configuration,
    with the hidden layer summed out analytically.

    Parameters
    ----------
    data : array_like
        Visible rows. A 2-D binary array with I columns.
    params : RbmParams
        RBM parameters. Must satisfy ``I + J <= 24``.

    Returns
    -------
    grad : Gradient
        The gradient of `log_likelihood` at `params`.
    """
    v = _as_batch(as_binary_array(data, name="data"), params.n_visible)
    logz = log_partition(params)

    ph = hidden_probabilities(v, params)
    pos = Gradient(
        visible_bias=np.mean(v, axis=0),
        hidden_bias=np.mean(ph, axis=0),
        weights=v.T @ ph / len(v),
    )

    vs = all_binary_states(params.n_visible).astype(np.float64)
    p = np.exp(-np.asarray(free_energy(vs, params)) - logz)
    phs = hidden_probabilities(vs, params)
    neg = Gradient(
        visible_bias=p @ vs,
        hidden_bias=p @ phs,
        weights=(vs * p[:, None]).T @ phs,
    )

    return pos + (-1.0) * neg
