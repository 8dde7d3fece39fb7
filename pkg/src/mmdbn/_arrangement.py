from __future__ import annotations

import dataclasses
import enum
import logging
from collections.abc import Iterable, Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._adaptive import GrowthConfig, WdTracker
from ._rbm import RbmParams, visible_probabilities
from ._util import as_binary_array, as_tuple_of_int, ceil_divide

__all__ = [
    "Block",
    "BlockKind",
    "BlockLayout",
    "LookupTable",
    "SortResult",
    "SortingConfig",
    "apply_lookup",
    "candidate_blocks",
    "downward_projection",
    "initial_arrangement",
    "multimodal_sort",
    "neighborhood",
    "permute_visible",
    "pseudo_block_layout",
    "rebuild_table",
    "sort_step",
    "stable_fired_hidden",
]

logger = logging.getLogger(__name__)


class BlockKind(enum.Enum):
    """The modality a block of visible units originates from."""

    IMAGE = "image"
    CSV = "csv"


@dataclasses.dataclass(frozen=True)
class Block:
    """A fixed-length segment of the visible sequence."""

    kind: BlockKind
    """BlockKind : Source modality."""

    block_id: int
    """int : Identifier, unique within a layout."""

    span: tuple[int, ...]
    """tuple of int : Original input positions covered, in their original order."""

    def __init__(self, kind: BlockKind | str, block_id: int, span: Iterable[int]):
        span = as_tuple_of_int(span)
        if len(span) == 0:
            raise ValueError("block span must not be empty")
        if len(set(span)) != len(span):
            raise ValueError("block span must not repeat positions")
        if any(p < 0 for p in span):
            raise ValueError("block positions must be >= 0")

        # Workaround for `frozen=True`.
        object.__setattr__(self, "kind", BlockKind(kind))
        object.__setattr__(self, "block_id", int(block_id))
        object.__setattr__(self, "span", span)

    def __len__(self) -> int:
        return len(self.span)


@dataclasses.dataclass(frozen=True)
class BlockLayout:
    """
    An ordered sequence of blocks defining the arrangement of the visible layer.

    The visible unit at arranged position ``k`` receives the input at the ``k``-th
    position of the concatenation of block spans in layout order.
    """

    blocks: tuple[Block, ...]
    """tuple of Block : Blocks in arranged order."""

    def __init__(self, blocks: Iterable[Block]):
        blocks = tuple(blocks)
        ids = [block.block_id for block in blocks]
        if len(set(ids)) != len(ids):
            raise ValueError("block identifiers must be unique")

        positions = [p for block in blocks for p in block.span]
        if len(set(positions)) != len(positions):
            raise ValueError("block spans must not overlap")

        # Workaround for `frozen=True`.
        object.__setattr__(self, "blocks", blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self) -> Iterator[Block]:
        return iter(self.blocks)

    def __getitem__(self, index: int) -> Block:
        return self.blocks[index]

    @property
    def n_positions(self) -> int:
        """int : Total number of input positions covered."""
        return sum(len(block) for block in self.blocks)

    @property
    def image_count(self) -> int:
        """int : Number of image blocks (K)."""
        return sum(block.kind == BlockKind.IMAGE for block in self.blocks)

    @property
    def csv_count(self) -> int:
        """int : Number of CSV blocks (L)."""
        return sum(block.kind == BlockKind.CSV for block in self.blocks)

    def block_ids(self) -> list[int]:
        """Block identifiers in layout order."""
        return [block.block_id for block in self.blocks]

    def position_of(self, block: Block | int) -> int:
        """Return the layout slot occupied by a block (or block identifier)."""
        block_id = block.block_id if isinstance(block, Block) else int(block)
        for slot, b in enumerate(self.blocks):
            if b.block_id == block_id:
                return slot
        raise ValueError(f"block {block_id} is not part of the layout")

    def order(self) -> NDArray[np.intp]:
        """Original input positions, concatenated in layout order."""
        if not self.blocks:
            return np.zeros(0, dtype=np.intp)
        return np.concatenate([np.asarray(b.span, dtype=np.intp) for b in self.blocks])


@dataclasses.dataclass(frozen=True, eq=False)
class LookupTable:
    """
    Bijective map between original input positions and arranged positions.

    ``forward[i]`` is the arranged position of original position ``i``, and
    ``inverse[k]`` is the original position placed at arranged position ``k``.
    """

    forward: NDArray[np.intp]
    """numpy.ndarray : Original position -> arranged position."""

    inverse: NDArray[np.intp]
    """numpy.ndarray : Arranged position -> original position."""

    def __init__(self, forward: ArrayLike):
        """
        Construct a new `LookupTable` object.

        Parameters
        ----------
        forward : array_like
            A permutation of ``0, ..., I - 1`` mapping each original position to its
            arranged position.
        """
        fwd = np.array(forward, dtype=np.intp)
        n = len(fwd)
        if (fwd.ndim != 1) or not np.array_equal(np.sort(fwd), np.arange(n)):
            raise ValueError("lookup table must be a permutation of 0, ..., I - 1")

        inv = np.empty_like(fwd)
        inv[fwd] = np.arange(n)

        fwd.setflags(write=False)
        inv.setflags(write=False)

        # Workaround for `frozen=True`.
        object.__setattr__(self, "forward", fwd)
        object.__setattr__(self, "inverse", inv)

    def __len__(self) -> int:
        return len(self.forward)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LookupTable):
            return NotImplemented
        return np.array_equal(self.forward, other.forward)

    @classmethod
    def identity(cls, n: int) -> LookupTable:
        """Create the table that leaves every position in place."""
        return cls(np.arange(n))

    @classmethod
    def from_order(cls, order: ArrayLike) -> LookupTable:
        """
        Create a table from the original positions listed in arranged order.

        Parameters
        ----------
        order : array_like
            ``order[k]`` is the original position placed at arranged position ``k``.
        """
        order = np.asarray(order, dtype=np.intp)
        forward = np.empty_like(order)
        forward[order] = np.arange(len(order))
        return cls(forward)

    def inverted(self) -> LookupTable:
        """Return the table of the inverse mapping."""
        return LookupTable(self.inverse)

    def is_identity(self) -> bool:
        """Check whether the table leaves every position in place."""
        return bool(np.array_equal(self.forward, np.arange(len(self))))


@dataclasses.dataclass
class SortingConfig:
    """Parameters of the multi-modal block sorting procedure."""

    enabled: bool
    """bool : Whether blocks are sorted during training."""

    rho: float
    """float : Minimum fraction of fired positions for a candidate block."""

    radius: int
    """int : Neighborhood radius, in layout slots."""

    permute_weights: bool
    """bool : Whether visible-side parameters travel with their blocks."""

    csv_tail: int
    """int : Number of trailing pseudo-blocks tagged CSV in layers above the first."""

    def __init__(
        self,
        enabled: bool = True,
        rho: float = 1.0,
        radius: int = 1,
        *,
        permute_weights: bool = True,
        csv_tail: int = 0,
    ):
        """
        Construct a new `SortingConfig` object.

        Parameters
        ----------
        enabled : bool, optional
            Whether blocks are sorted during training. Defaults to True.
        rho : float, optional
            Candidate block threshold. Must be in (0, 1]. Defaults to 1, meaning every
            position in the block must fire.
        radius : int, optional
            Neighborhood radius. Must be >= 1. Defaults to 1 (adjacent slots only).
        permute_weights : bool, optional
            If True, the visible biases, the rows of the weight matrix and their WD
            history are re-indexed whenever the arrangement changes, so every visible
            unit keeps modeling the same input. Defaults to True.
        csv_tail : int, optional
            Number of trailing pseudo-blocks tagged CSV in layers above the first.
            Must be >= 0. Defaults to 0.
        """
        if not (0.0 < rho <= 1.0):
            raise ValueError("candidate threshold rho must be > 0 and <= 1")
        if radius < 1:
            raise ValueError("neighborhood radius must be >= 1")
        if csv_tail < 0:
            raise ValueError("number of CSV tail blocks must be >= 0")

        self.enabled = bool(enabled)
        self.rho = float(rho)
        self.radius = int(radius)
        self.permute_weights = bool(permute_weights)
        self.csv_tail = int(csv_tail)


def rebuild_table(layout: BlockLayout) -> LookupTable:
    """
    Derive the lookup table of a layout.

    Parameters
    ----------
    layout : BlockLayout
        A layout covering every position ``0, ..., I - 1``.

    Returns
    -------
    table : LookupTable
        Table mapping each original position to its rank in the concatenation of
        block spans in layout order.

    Raises
    ------
    RuntimeError
        If the layout does not cover every position exactly once.
    """
    order = layout.order()
    if not np.array_equal(np.sort(order), np.arange(len(order))):
        raise RuntimeError("block layout does not cover every input position")
    return LookupTable.from_order(order)


def initial_arrangement(
    image_rows: Sequence[Iterable[int]],
    csv_blocks: Sequence[Iterable[int]],
    *,
    row_blocks: int = 1,
) -> tuple[BlockLayout, LookupTable]:
    """
    Build the initial interleaved arrangement of image and CSV blocks.

    Image rows and CSV blocks are taken alternately, one image row then one CSV
    block, until either list is exhausted. The remainder of the other list follows in
    its original order.

    Image blocks are numbered ``0, ..., K - 1`` and CSV blocks ``K, ..., K + L - 1``,
    both in input order.

    Parameters
    ----------
    image_rows : sequence of iterable of int
        Original input positions of each image block.
    csv_blocks : sequence of iterable of int
        Original input positions of each CSV block.
    row_blocks : int, optional
        Number of consecutive image blocks that make up one image row, for images
        whose rows are divided into several fixed-length blocks. Defaults to 1.

    Returns
    -------
    layout : BlockLayout
        The interleaved layout.
    table : LookupTable
        The corresponding lookup table.
    """
    if row_blocks < 1:
        raise ValueError("number of blocks per image row must be >= 1")

    images = [Block(BlockKind.IMAGE, k, span) for k, span in enumerate(image_rows)]
    offset = len(images)
    csvs = [Block(BlockKind.CSV, offset + l, span) for l, span in enumerate(csv_blocks)]

    rows = [images[i : i + row_blocks] for i in range(0, len(images), row_blocks)]
    blocks: list[Block] = []
    for i in range(max(len(rows), len(csvs))):
        if i < len(rows):
            blocks.extend(rows[i])
        if i < len(csvs):
            blocks.append(csvs[i])

    layout = BlockLayout(blocks)
    order = layout.order()
    if not np.array_equal(np.sort(order), np.arange(len(order))):
        raise ValueError("block spans must cover positions 0, ..., I - 1")

    return layout, rebuild_table(layout)


def pseudo_block_layout(
    n_units: int,
    block_length: int,
    csv_tail: int = 0,
) -> tuple[BlockLayout, LookupTable]:
    """
    Partition the units of a hidden layer into uniform blocks.

    Used for the visible layer of every RBM above the first. Consecutive units are
    grouped into blocks of `block_length` units (the last block may be shorter).

    Parameters
    ----------
    n_units : int
        Number of units. Must be >= 1.
    block_length : int
        Units per block. Must be >= 1.
    csv_tail : int, optional
        Number of trailing blocks tagged CSV. All other blocks are tagged image. Must
        be less than the number of blocks. Defaults to 0.

    Returns
    -------
    layout : BlockLayout
        The block layout, in unit order.
    table : LookupTable
        The identity table.
    """
    if n_units < 1:
        raise ValueError("number of units must be >= 1")
    if block_length < 1:
        raise ValueError("block length must be >= 1")

    nblocks = int(ceil_divide(n_units, block_length))
    if not (0 <= csv_tail < nblocks):
        raise ValueError(
            f"number of CSV tail blocks must be >= 0 and < {nblocks}, got {csv_tail}"
        )

    blocks = []
    for k in range(nblocks):
        span = range(k * block_length, min((k + 1) * block_length, n_units))
        kind = BlockKind.CSV if k >= nblocks - csv_tail else BlockKind.IMAGE
        blocks.append(Block(kind, k, span))

    layout = BlockLayout(blocks)
    return layout, rebuild_table(layout)


def stable_fired_hidden(
    h_state: ArrayLike,
    tracker: WdTracker,
    cfg: GrowthConfig,
) -> set[int]:
    """
    Find the hidden neurons that fire and have stable parameters.

    Parameters
    ----------
    h_state : array_like
        Binary hidden state, with length J.
    tracker : WdTracker
        Current WD statistics.
    cfg : GrowthConfig
        Provides the WD stability threshold `wd_stable`.

    Returns
    -------
    stable : set of int
        Indices ``j`` with ``h_state[j] == 1`` and WD below `cfg.wd_stable`.
    """
    h = as_binary_array(h_state, name="hidden state")
    if h.shape != (tracker.n_hidden,):
        raise ValueError(
            f"shape mismatch: hidden state must have length {tracker.n_hidden}, got"
            f" shape {h.shape}"
        )
    mask = (h == 1) & (tracker.neuron_wd < cfg.wd_stable)
    return {int(j) for j in np.flatnonzero(mask)}


def downward_projection(j: int, params: RbmParams) -> NDArray[np.uint8]:
    """
    Compute the visible firing pattern driven by a single hidden neuron.

    Parameters
    ----------
    j : int
        Hidden neuron index.
    params : RbmParams
        RBM parameters.

    Returns
    -------
    pattern : numpy.ndarray
        Binary visible pattern, with length I. A visible unit fires if its activation
        probability, given only hidden neuron `j` on, is strictly greater than 0.5.
    """
    if not (0 <= j < params.n_hidden):
        raise IndexError(f"neuron index {j} out of range for {params.n_hidden} neurons")
    h = np.zeros(params.n_hidden)
    h[j] = 1.0
    return (visible_probabilities(h, params) > 0.5).astype(np.uint8)


def candidate_blocks(
    pattern: ArrayLike,
    layout: BlockLayout,
    rho: float = 1.0,
) -> tuple[list[Block], list[Block]]:
    """
    Select the image and CSV blocks covered by a firing pattern.

    Parameters
    ----------
    pattern : array_like
        Binary firing pattern indexed by original input position, with length I.
    layout : BlockLayout
        Current layout.
    rho : float, optional
        A block is a candidate if the fraction of its positions that fired is at
        least `rho`. Must be in (0, 1]. Defaults to 1.

    Returns
    -------
    image_candidates, csv_candidates : list of Block
        Candidate blocks of each kind, in ascending block identifier order.
    """
    if not (0.0 < rho <= 1.0):
        raise ValueError("candidate threshold rho must be > 0 and <= 1")
    fired = as_binary_array(pattern, name="firing pattern")
    if fired.shape != (layout.n_positions,):
        raise ValueError(
            f"shape mismatch: firing pattern must have length {layout.n_positions},"
            f" got shape {fired.shape}"
        )

    image_cands = []
    csv_cands = []
    for block in sorted(layout, key=lambda b: b.block_id):
        frac = np.mean(fired[list(block.span)])
        if frac >= rho:
            if block.kind == BlockKind.IMAGE:
                image_cands.append(block)
            else:
                csv_cands.append(block)

    return image_cands, csv_cands


def neighborhood(block: Block, layout: BlockLayout, radius: int = 1) -> set[int]:
    """
    Get the layout slots near a block.

    Parameters
    ----------
    block : Block
        A block in `layout`.
    layout : BlockLayout
        Current layout.
    radius : int, optional
        Maximum distance, in slots. Must be >= 1. Defaults to 1.

    Returns
    -------
    slots : set of int
        Slots within `radius` of the block's slot, excluding the block's own slot.
    """
    if radius < 1:
        raise ValueError("neighborhood radius must be >= 1")
    p = layout.position_of(block)
    lo = max(0, p - radius)
    hi = min(len(layout) - 1, p + radius)
    return set(range(lo, hi + 1)) - {p}


def _relocate_after(blocks: list[Block], mover: Block, anchor: Block) -> None:
    blocks.remove(mover)
    slot = blocks.index(anchor)
    blocks.insert(slot + 1, mover)


def sort_step(
    layout: BlockLayout,
    table: LookupTable,
    candidates: tuple[Sequence[Block], Sequence[Block]],
    *,
    radius: int = 1,
) -> tuple[BlockLayout, LookupTable, int]:
    """
    Move candidate blocks next to their anchors.

    Each candidate image block (the anchor) is visited in ascending block identifier
    order. The lowest-numbered remaining candidate CSV block that does not already
    lie in the anchor's neighborhood is removed from its slot and inserted
    immediately after the anchor. A relocated block is excluded from further
    pairing. Candidate CSV blocks already in the neighborhood are skipped and stay
    available to later anchors.

    If the layout has no CSV blocks, image blocks are paired with other candidate
    image blocks in the same way. A block that anchored or moved is not reused
    within the step.

    Repeating the step on the same candidates moves nothing only if there is a single
    anchor and a single candidate CSV block.

    Parameters
    ----------
    layout : BlockLayout
        Current layout.
    table : LookupTable
        Current lookup table, consistent with `layout`.
    candidates : tuple of sequence of Block
        Image and CSV candidate blocks, as returned by `candidate_blocks`.
    radius : int, optional
        Neighborhood radius. Defaults to 1.

    Returns
    -------
    layout : BlockLayout
        Updated layout.
    table : LookupTable
        Lookup table rebuilt from the updated layout.
    moves : int
        Number of relocated blocks.
    """
    if len(table) != layout.n_positions:
        raise ValueError(
            f"length mismatch: lookup table has length {len(table)}, layout covers"
            f" {layout.n_positions} positions"
        )

    image_cands, csv_cands = candidates
    anchors = sorted(image_cands, key=lambda b: b.block_id)
    image_only = layout.csv_count == 0
    movers = anchors if image_only else sorted(csv_cands, key=lambda b: b.block_id)

    blocks = list(layout.blocks)
    used: set[int] = set()
    moves = 0

    for anchor in anchors:
        if anchor.block_id in used:
            continue
        remaining = [
            b
            for b in movers
            if (b.block_id not in used) and (b.block_id != anchor.block_id)
        ]
        if not remaining:
            continue

        if image_only:
            used.add(anchor.block_id)

        current = BlockLayout(blocks)
        near = neighborhood(anchor, current, radius)
        far = [b for b in remaining if current.position_of(b) not in near]
        if not far:
            continue

        mover = far[0]
        _relocate_after(blocks, mover, anchor)
        used.add(mover.block_id)
        moves += 1

    new_layout = BlockLayout(blocks)
    return new_layout, rebuild_table(new_layout), moves


def apply_lookup(table: LookupTable, raw: ArrayLike) -> NDArray:
    """
    Rearrange input vectors according to a lookup table.

    Parameters
    ----------
    table : LookupTable
        The lookup table.
    raw : array_like
        Input in original position order. A vector of length I, or a batch of such
        rows.

    Returns
    -------
    arranged : numpy.ndarray
        The input with ``arranged[..., table.forward[i]] = raw[..., i]``.
    """
    raw = np.asanyarray(raw)
    if (raw.ndim not in (1, 2)) or (raw.shape[-1] != len(table)):
        raise ValueError(
            f"length mismatch: input must have length {len(table)}, got shape"
            f" {raw.shape}"
        )
    return raw[..., table.inverse]


def _visible_order(old_table: LookupTable, new_table: LookupTable) -> NDArray[np.intp]:
    # Row `k` of the re-indexed parameters is the row that modeled the original
    # position now placed at arranged position `k`.
    return old_table.forward[new_table.inverse]


def permute_visible(
    params: RbmParams,
    old_table: LookupTable,
    new_table: LookupTable,
) -> RbmParams:
    """
    Re-index the visible-side parameters after an arrangement change.

    Parameters
    ----------
    params : RbmParams
        Parameters whose visible units follow `old_table`.
    old_table, new_table : LookupTable
        The arrangement before and after the change.

    Returns
    -------
    params : RbmParams
        Parameters whose visible units follow `new_table`. Every original input
        position keeps its visible bias and weights.
    """
    if not (len(old_table) == len(new_table) == params.n_visible):
        raise ValueError("length mismatch: lookup tables must have length I")
    order = _visible_order(old_table, new_table)
    return RbmParams(
        params.visible_bias[order], params.hidden_bias, params.weights[order]
    )


@dataclasses.dataclass(frozen=True, eq=False)
class SortResult:
    """Outcome of one pass of the multi-modal sorting procedure."""

    params: RbmParams
    """RbmParams : Parameters, re-indexed if visible parameters travel with blocks."""

    tracker: WdTracker
    """WdTracker : WD statistics, re-indexed in the same way."""

    layout: BlockLayout
    """BlockLayout : The updated layout."""

    table: LookupTable
    """LookupTable : The updated lookup table."""

    moves: int
    """int : Total number of block relocations."""


def multimodal_sort(
    params: RbmParams,
    layout: BlockLayout,
    table: LookupTable,
    h_state: ArrayLike,
    tracker: WdTracker,
    growth: GrowthConfig,
    sorting: SortingConfig,
) -> SortResult:
    """
    Run one pass of the multi-modal sorting procedure.

    For every stable, fired hidden neuron (in ascending index order), the visible
    pattern it drives is computed, candidate blocks are selected from that pattern,
    and candidate blocks are moved next to each other.

    Parameters
    ----------
    params : RbmParams
        Current RBM parameters, with visible units in the order given by `table`.
    layout : BlockLayout
        Current layout.
    table : LookupTable
        Current lookup table.
    h_state : array_like
        Binary hidden state, with length J.
    tracker : WdTracker
        Current WD statistics.
    growth : GrowthConfig
        Provides the WD stability threshold.
    sorting : SortingConfig
        Sorting parameters.

    Returns
    -------
    result : SortResult
        The updated parameters, statistics, layout and table, and the number of
        relocated blocks.
    """
    stable = sorted(stable_fired_hidden(h_state, tracker, growth))

    total = 0
    for j in stable:
        # The projected pattern is indexed by visible unit. Map it back to original
        # input positions before matching it against block spans.
        pattern = apply_lookup(table.inverted(), downward_projection(j, params))
        cands = candidate_blocks(pattern, layout, sorting.rho)
        new_layout, new_table, moves = sort_step(
            layout, table, cands, radius=sorting.radius
        )
        if moves == 0:
            continue

        if sorting.permute_weights:
            order = _visible_order(table, new_table)
            params = permute_visible(params, table, new_table)
            tracker = tracker.reindex_visible(order)

        layout, table = new_layout, new_table
        total += moves
        logger.debug(f"hidden neuron {j}: moved {moves} block(s)")

    return SortResult(
        params=params, tracker=tracker, layout=layout, table=table, moves=total
    )
