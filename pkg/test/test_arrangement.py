from __future__ import annotations

import numpy as np
import pytest

import mmdbn
from mmdbn import Block, BlockKind, BlockLayout

from .simulate import simulate_binary_data, simulate_rbm, simulate_wd_tracker


def image(block_id: int, span) -> Block:
    return Block(BlockKind.IMAGE, block_id, span)


def csv(block_id: int, span) -> Block:
    return Block(BlockKind.CSV, block_id, span)


def r1_r2_c1() -> BlockLayout:
    """Two image rows followed by a CSV block."""
    return BlockLayout([image(0, [0, 1]), image(1, [2, 3]), csv(2, [4, 5])])


def far_pair_rbm() -> mmdbn.RbmParams:
    """An RBM whose first hidden neuron drives input positions 0, 1, 4 and 5."""
    weights = np.full((6, 2), -5.0)
    weights[[0, 1, 4, 5], 0] = 5.0
    return mmdbn.RbmParams(np.zeros(6), np.zeros(2), weights)


class TestBlock:
    def test_len(self):
        block = image(0, range(3, 7))
        assert len(block) == 4
        assert block.span == (3, 4, 5, 6)
        assert block.kind == BlockKind.IMAGE

    def test_kind_from_str(self):
        assert Block("csv", 1, [0]).kind == BlockKind.CSV

    def test_bad_span(self):
        with pytest.raises(ValueError, match="block span must not be empty"):
            image(0, [])
        with pytest.raises(ValueError, match="block span must not repeat positions"):
            image(0, [1, 1])
        with pytest.raises(ValueError, match="block positions must be >= 0"):
            image(0, [-1])


class TestBlockLayout:
    def test_counts(self):
        layout = r1_r2_c1()
        assert len(layout) == 3
        assert layout.n_positions == 6
        assert layout.image_count == 2
        assert layout.csv_count == 1
        assert layout.block_ids() == [0, 1, 2]
        assert layout.position_of(2) == 2
        assert layout.position_of(layout[1]) == 1

    def test_overlap(self):
        with pytest.raises(ValueError, match="block spans must not overlap"):
            BlockLayout([image(0, [0, 1]), csv(1, [1, 2])])

    def test_duplicate_ids(self):
        with pytest.raises(ValueError, match="block identifiers must be unique"):
            BlockLayout([image(0, [0, 1]), csv(0, [2, 3])])

    def test_missing_block(self):
        with pytest.raises(ValueError, match="not part of the layout"):
            r1_r2_c1().position_of(9)


class TestLookupTable:
    def test_identity(self):
        table = mmdbn.LookupTable.identity(5)
        assert table.is_identity()
        np.testing.assert_array_equal(table.inverse, np.arange(5))

    def test_from_order(self):
        table = mmdbn.LookupTable.from_order([2, 0, 1])
        np.testing.assert_array_equal(table.inverse, [2, 0, 1])
        np.testing.assert_array_equal(table.forward, [1, 2, 0])

    def test_not_a_permutation(self):
        with pytest.raises(ValueError, match="must be a permutation"):
            mmdbn.LookupTable([0, 0, 1])
        with pytest.raises(ValueError, match="must be a permutation"):
            mmdbn.LookupTable([1, 2, 3])

    def test_inverted(self):
        table = mmdbn.LookupTable([3, 0, 2, 1])
        inv = table.inverted()
        np.testing.assert_array_equal(inv.forward, table.inverse)
        assert inv.inverted() == table

    def test_round_trip(self):
        rng = np.random.default_rng(1234)
        table = mmdbn.LookupTable(rng.permutation(37))
        for _ in range(1000):
            x = rng.integers(0, 2, size=37)
            y = mmdbn.apply_lookup(table, x)
            np.testing.assert_array_equal(mmdbn.apply_lookup(table.inverted(), y), x)


class TestInitialArrangement:
    def test_interleave(self):
        layout, table = mmdbn.initial_arrangement([[0, 1], [2, 3]], [[4], [5]])
        assert layout.block_ids() == [0, 2, 1, 3]
        assert [b.kind for b in layout] == [
            BlockKind.IMAGE,
            BlockKind.CSV,
            BlockKind.IMAGE,
            BlockKind.CSV,
        ]
        np.testing.assert_array_equal(layout.order(), [0, 1, 4, 2, 3, 5])
        np.testing.assert_array_equal(table.forward, [0, 1, 3, 4, 2, 5])

    def test_image_only(self):
        rows = [range(4 * k, 4 * k + 4) for k in range(4)]
        layout, table = mmdbn.initial_arrangement(rows, [])
        assert layout.block_ids() == [0, 1, 2, 3]
        assert layout.csv_count == 0
        assert table.is_identity()

    def test_already_alternating(self):
        _, table = mmdbn.initial_arrangement([range(4)], [[4, 5]])
        assert table.is_identity()

    def test_more_csv_blocks(self):
        layout, _ = mmdbn.initial_arrangement([[0]], [[1], [2], [3]])
        assert layout.block_ids() == [0, 1, 2, 3]

    def test_row_blocks(self):
        # Two blocks per image row: both blocks of a row precede its CSV block.
        rows = [[0, 1], [2, 3], [4, 5], [6, 7]]
        layout, _ = mmdbn.initial_arrangement(rows, [[8], [9]], row_blocks=2)
        assert layout.block_ids() == [0, 1, 4, 2, 3, 5]

    def test_overlapping_spans(self):
        with pytest.raises(ValueError, match="overlap"):
            mmdbn.initial_arrangement([[0, 1]], [[1, 2]])

    def test_gap(self):
        with pytest.raises(ValueError):
            mmdbn.initial_arrangement([[0, 1]], [[3]])


class TestRebuildTable:
    def test_initial(self):
        layout, table = mmdbn.initial_arrangement([[0, 1], [2, 3]], [[4], [5]])
        assert mmdbn.rebuild_table(layout) == table

    def test_single_block(self):
        layout = BlockLayout([image(0, range(6))])
        assert mmdbn.rebuild_table(layout).is_identity()

    def test_coverage(self):
        layout = BlockLayout([image(0, [0, 1]), csv(1, [3])])
        with pytest.raises(RuntimeError):
            mmdbn.rebuild_table(layout)


class TestPseudoBlockLayout:
    def test_uniform(self):
        layout, table = mmdbn.pseudo_block_layout(10, 4, csv_tail=1)
        assert [b.span for b in layout] == [(0, 1, 2, 3), (4, 5, 6, 7), (8, 9)]
        assert [b.kind for b in layout] == [
            BlockKind.IMAGE,
            BlockKind.IMAGE,
            BlockKind.CSV,
        ]
        assert table.is_identity()

    def test_bad_tail(self):
        with pytest.raises(ValueError, match="number of CSV tail blocks"):
            mmdbn.pseudo_block_layout(10, 4, csv_tail=3)


class TestStableFiredHidden:
    def test_unstable(self):
        tracker = simulate_wd_tracker(3, [100.0, 100.0, 100.0])
        cfg = mmdbn.GrowthConfig(wd_stable=0.5)
        assert mmdbn.stable_fired_hidden([1, 1, 1], tracker, cfg) == set()

    def test_all_stable(self):
        tracker = simulate_wd_tracker(3, [0.0, 0.0, 0.0])
        cfg = mmdbn.GrowthConfig(wd_stable=0.5)
        assert mmdbn.stable_fired_hidden([1, 1, 1], tracker, cfg) == {0, 1, 2}

    def test_direct_rule(self):
        tracker = simulate_wd_tracker(3, [0.0, 0.0, 1.0])
        np.testing.assert_allclose(tracker.neuron_wd, [0.0, 0.0, 1.0])
        cfg = mmdbn.GrowthConfig(wd_stable=0.5)
        assert mmdbn.stable_fired_hidden([1, 0, 1], tracker, cfg) == {0}

    def test_shape_mismatch(self):
        tracker = simulate_wd_tracker(3, [0.0, 0.0])
        with pytest.raises(ValueError, match="shape mismatch"):
            mmdbn.stable_fired_hidden([1, 0, 1], tracker, mmdbn.GrowthConfig())


class TestDownwardProjection:
    def test_ties_do_not_fire(self):
        params = mmdbn.RbmParams.zeros(4, 2)
        np.testing.assert_array_equal(mmdbn.downward_projection(1, params), 0)

    def test_saturation(self):
        weights = np.zeros((4, 2))
        weights[[0, 1], 1] = 5.0
        params = mmdbn.RbmParams(np.zeros(4), np.zeros(2), weights)
        np.testing.assert_array_equal(
            mmdbn.downward_projection(1, params), [1, 1, 0, 0]
        )

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            mmdbn.downward_projection(2, mmdbn.RbmParams.zeros(4, 2))


class TestCandidateBlocks:
    def test_all_ones(self):
        layout = r1_r2_c1()
        image_cands, csv_cands = mmdbn.candidate_blocks(np.ones(6), layout)
        assert [b.block_id for b in image_cands] == [0, 1]
        assert [b.block_id for b in csv_cands] == [2]

    def test_all_zeros(self):
        assert mmdbn.candidate_blocks(np.zeros(6), r1_r2_c1()) == ([], [])

    def test_threshold(self):
        layout = BlockLayout([image(0, [0, 1]), csv(1, [2, 3])])
        pattern = [0, 1, 0, 0]
        assert mmdbn.candidate_blocks(pattern, layout, rho=1.0) == ([], [])
        image_cands, _ = mmdbn.candidate_blocks(pattern, layout, rho=0.5)
        assert [b.block_id for b in image_cands] == [0]

    def test_sorted_by_id(self):
        layout = BlockLayout([csv(3, [0]), image(1, [1]), image(0, [2]), csv(2, [3])])
        image_cands, csv_cands = mmdbn.candidate_blocks(np.ones(4), layout)
        assert [b.block_id for b in image_cands] == [0, 1]
        assert [b.block_id for b in csv_cands] == [2, 3]

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            mmdbn.candidate_blocks(np.ones(5), r1_r2_c1())


class TestNeighborhood:
    @pytest.fixture
    def layout(self):
        return BlockLayout([image(k, [k]) for k in range(7)])

    def test_boundary(self, layout):
        assert mmdbn.neighborhood(layout[0], layout) == {1}
        assert mmdbn.neighborhood(layout[6], layout) == {5}

    def test_middle(self, layout):
        assert mmdbn.neighborhood(layout[3], layout) == {2, 4}

    def test_radius(self, layout):
        assert mmdbn.neighborhood(layout[3], layout, radius=2) == {1, 2, 4, 5}


class TestSortStep:
    def test_already_adjacent(self):
        layout, table = mmdbn.initial_arrangement([[0, 1], [2, 3]], [[4, 5]])
        cands = ([layout[0]], [layout[1]])
        new_layout, new_table, moves = mmdbn.sort_step(layout, table, cands)
        assert moves == 0
        assert new_layout.block_ids() == layout.block_ids()
        assert new_table == table

    def test_move(self):
        layout = r1_r2_c1()
        table = mmdbn.rebuild_table(layout)
        cands = ([layout[0]], [layout[2]])
        new_layout, new_table, moves = mmdbn.sort_step(layout, table, cands)
        assert moves == 1
        assert new_layout.block_ids() == [0, 2, 1]
        np.testing.assert_array_equal(new_table.inverse, [0, 1, 4, 5, 2, 3])

    def test_exclusion(self):
        layout = BlockLayout(
            [image(0, [0]), image(1, [1]), image(2, [2]), csv(3, [3])]
        )
        table = mmdbn.rebuild_table(layout)
        cands = ([layout[0], layout[2]], [layout[3]])
        new_layout, _, moves = mmdbn.sort_step(layout, table, cands)
        # Only the first image block receives the CSV block.
        assert moves == 1
        assert new_layout.block_ids() == [0, 3, 1, 2]

    def test_lowest_id_mover(self):
        layout = BlockLayout(
            [image(0, [0]), image(1, [1]), csv(3, [2]), image(2, [3]), csv(4, [4])]
        )
        table = mmdbn.rebuild_table(layout)
        cands = ([layout[0]], [layout[4], layout[2]])
        new_layout, _, moves = mmdbn.sort_step(layout, table, cands)
        assert moves == 1
        assert new_layout.block_ids() == [0, 3, 1, 2, 4]

    def test_image_only(self):
        layout = BlockLayout([image(k, [k]) for k in range(3)])
        table = mmdbn.rebuild_table(layout)
        cands = ([layout[0], layout[2]], [])
        new_layout, _, moves = mmdbn.sort_step(layout, table, cands)
        assert moves == 1
        assert new_layout.block_ids() == [0, 2, 1]

    def test_adjacent_block_skipped(self):
        layout = BlockLayout(
            [image(0, [0]), csv(3, [1]), image(1, [2]), image(2, [3]), csv(4, [4])]
        )
        table = mmdbn.rebuild_table(layout)
        cands = ([layout[0], layout[3]], [layout[1], layout[4]])
        new_layout, new_table, moves = mmdbn.sort_step(layout, table, cands)
        # Block 3 already neighbors block 0, so block 4 moves there instead, and
        # block 3 is still available to block 2.
        assert moves == 2
        assert new_layout.block_ids() == [0, 4, 1, 2, 3]
        assert new_table == mmdbn.rebuild_table(new_layout)

    def test_two_cycle(self):
        layout = BlockLayout(
            [image(0, [0]), csv(3, [1]), image(1, [2]), image(2, [3]), csv(4, [4])]
        )
        table = mmdbn.rebuild_table(layout)
        cands = ([layout[0], layout[3]], [layout[1], layout[4]])
        once, once_table, _ = mmdbn.sort_step(layout, table, cands)
        twice, twice_table, moves = mmdbn.sort_step(once, once_table, cands)
        assert moves == 2
        assert twice.block_ids() == layout.block_ids()
        assert twice_table == table

    def test_no_candidates(self):
        layout = r1_r2_c1()
        table = mmdbn.rebuild_table(layout)
        _, _, moves = mmdbn.sort_step(layout, table, ([], []))
        assert moves == 0

    def test_length_mismatch(self):
        layout = r1_r2_c1()
        with pytest.raises(ValueError, match="length mismatch"):
            mmdbn.sort_step(layout, mmdbn.LookupTable.identity(5), ([], []))


def random_layout(rng: np.random.Generator, n_image: int, n_csv: int) -> BlockLayout:
    """Blocks of 1 to 3 consecutive positions, in shuffled layout order."""
    sizes = rng.integers(1, 4, size=n_image + n_csv)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    blocks = [
        Block(
            BlockKind.IMAGE if k < n_image else BlockKind.CSV,
            k,
            range(bounds[k], bounds[k + 1]),
        )
        for k in range(n_image + n_csv)
    ]
    return BlockLayout([blocks[k] for k in rng.permutation(len(blocks))])


def random_candidates(
    rng: np.random.Generator, layout: BlockLayout
) -> tuple[list[Block], list[Block]]:
    picked = [block for block in layout if rng.random() < 0.5]
    image_cands = [b for b in picked if b.kind == BlockKind.IMAGE]
    csv_cands = [b for b in picked if b.kind == BlockKind.CSV]
    return image_cands, csv_cands


def check_blocks_intact(layout: BlockLayout, table: mmdbn.LookupTable) -> None:
    n = layout.n_positions
    np.testing.assert_array_equal(np.sort(table.forward), np.arange(n))
    assert table == mmdbn.rebuild_table(layout)
    for block in layout:
        start = table.forward[block.span[0]]
        arranged = table.inverse[start : start + len(block)]
        np.testing.assert_array_equal(arranged, block.span)


class TestSortStepProperties:
    @pytest.mark.parametrize("seed", range(20))
    def test_random_sequences(self, seed):
        rng = np.random.default_rng(seed)
        n_image, n_csv = rng.integers(1, 7, size=2)
        layout = random_layout(rng, int(n_image), int(n_csv))
        table = mmdbn.rebuild_table(layout)
        radius = int(rng.integers(1, 3))

        for _ in range(10):
            image_cands, csv_cands = random_candidates(rng, layout)
            new_layout, new_table, moves = mmdbn.sort_step(
                layout, table, (image_cands, csv_cands), radius=radius
            )
            check_blocks_intact(new_layout, new_table)
            assert sorted(new_layout.block_ids()) == sorted(layout.block_ids())
            assert 0 <= moves <= min(len(image_cands), len(csv_cands))

            # Only candidate CSV blocks change slot relative to the others.
            movers = {b.block_id for b in csv_cands}
            before = [k for k in layout.block_ids() if k not in movers]
            after = [k for k in new_layout.block_ids() if k not in movers]
            assert after == before

            # Every relocated block sits right after a candidate image block.
            anchors = {b.block_id for b in image_cands}
            ids = new_layout.block_ids()
            paired = sum(
                (ids[k] in movers) and (ids[k - 1] in anchors)
                for k in range(1, len(ids))
            )
            assert paired >= moves

            layout, table = new_layout, new_table

    @pytest.mark.parametrize("seed", range(10))
    def test_random_image_only(self, seed):
        rng = np.random.default_rng(seed)
        layout = random_layout(rng, int(rng.integers(2, 9)), 0)
        table = mmdbn.rebuild_table(layout)
        for _ in range(10):
            image_cands, _ = random_candidates(rng, layout)
            new_layout, new_table, moves = mmdbn.sort_step(
                layout, table, (image_cands, [])
            )
            check_blocks_intact(new_layout, new_table)
            assert moves <= len(image_cands) // 2
            layout, table = new_layout, new_table

    @pytest.mark.parametrize("seed", range(10))
    def test_single_pair_fixpoint(self, seed):
        rng = np.random.default_rng(seed)
        layout = random_layout(rng, 4, 3)
        table = mmdbn.rebuild_table(layout)
        anchor = [b for b in layout if b.kind == BlockKind.IMAGE][rng.integers(4)]
        mover = [b for b in layout if b.kind == BlockKind.CSV][rng.integers(3)]
        cands = ([anchor], [mover])

        once, once_table, _ = mmdbn.sort_step(layout, table, cands)
        assert once.position_of(mover) in mmdbn.neighborhood(anchor, once)
        twice, twice_table, moves = mmdbn.sort_step(once, once_table, cands)
        assert moves == 0
        assert twice.block_ids() == once.block_ids()
        assert twice_table == once_table


class TestApplyLookup:
    def test_identity(self):
        x = simulate_binary_data(3, 8, seed=1234)
        np.testing.assert_array_equal(
            mmdbn.apply_lookup(mmdbn.LookupTable.identity(8), x), x
        )

    def test_swap(self):
        table = mmdbn.LookupTable([1, 0, 2, 3])
        np.testing.assert_array_equal(
            mmdbn.apply_lookup(table, [1, 0, 0, 0]), [0, 1, 0, 0]
        )

    def test_follows_layout(self):
        layout, table = mmdbn.initial_arrangement([[0, 1], [2, 3]], [[4], [5]])
        raw = np.array([10, 11, 12, 13, 14, 15])
        np.testing.assert_array_equal(
            mmdbn.apply_lookup(table, raw), raw[layout.order()]
        )

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            mmdbn.apply_lookup(mmdbn.LookupTable.identity(3), [0, 1])


class TestPermuteVisible:
    def test_equivariance(self):
        rng = np.random.default_rng(1234)
        params = simulate_rbm(8, 3, seed=1234)
        old = mmdbn.LookupTable(rng.permutation(8))
        new = mmdbn.LookupTable(rng.permutation(8))
        permuted = mmdbn.permute_visible(params, old, new)

        raw = simulate_binary_data(10, 8, seed=1234)
        before = mmdbn.hidden_probabilities(mmdbn.apply_lookup(old, raw), params)
        after = mmdbn.hidden_probabilities(mmdbn.apply_lookup(new, raw), permuted)
        np.testing.assert_allclose(after, before, rtol=0.0, atol=1e-12)

        # Visible reconstructions travel with their inputs.
        h = simulate_binary_data(4, 3, seed=1)
        pv_old = mmdbn.visible_probabilities(h, params)
        pv_new = mmdbn.visible_probabilities(h, permuted)
        np.testing.assert_allclose(
            mmdbn.apply_lookup(old.inverted(), pv_old),
            mmdbn.apply_lookup(new.inverted(), pv_new),
            atol=1e-12,
        )

    def test_same_table(self):
        params = simulate_rbm(5, 2, seed=1234)
        table = mmdbn.LookupTable([4, 2, 0, 1, 3])
        permuted = mmdbn.permute_visible(params, table, table)
        np.testing.assert_array_equal(permuted.weights, params.weights)

    def test_length_mismatch(self):
        params = mmdbn.RbmParams.zeros(5, 2)
        table = mmdbn.LookupTable.identity(4)
        with pytest.raises(ValueError):
            mmdbn.permute_visible(params, table, table)


class TestMultimodalSort:
    def test_moves_correlated_block(self):
        params = far_pair_rbm()
        layout = r1_r2_c1()
        table = mmdbn.rebuild_table(layout)
        tracker = simulate_wd_tracker(6, [0.0, 0.0])
        growth = mmdbn.GrowthConfig(wd_stable=0.01)
        sorting = mmdbn.SortingConfig()

        result = mmdbn.multimodal_sort(
            params, layout, table, [1, 0], tracker, growth, sorting
        )
        assert result.moves == 1
        assert result.layout.block_ids() == [0, 2, 1]
        np.testing.assert_array_equal(result.table.inverse, [0, 1, 4, 5, 2, 3])
        np.testing.assert_array_equal(
            result.params.weights[:, 0], [5.0, 5.0, 5.0, 5.0, -5.0, -5.0]
        )

        # The network computes the same function of the raw input.
        raw = simulate_binary_data(16, 6, seed=1234)
        np.testing.assert_allclose(
            mmdbn.hidden_probabilities(
                mmdbn.apply_lookup(result.table, raw), result.params
            ),
            mmdbn.hidden_probabilities(mmdbn.apply_lookup(table, raw), params),
            atol=1e-12,
        )

        # A second pass finds nothing left to move.
        again = mmdbn.multimodal_sort(
            result.params,
            result.layout,
            result.table,
            [1, 0],
            result.tracker,
            growth,
            sorting,
        )
        assert again.moves == 0
        assert again.table == result.table

    def test_unstable_neuron(self):
        layout = r1_r2_c1()
        table = mmdbn.rebuild_table(layout)
        tracker = simulate_wd_tracker(6, [1.0, 0.0])
        result = mmdbn.multimodal_sort(
            far_pair_rbm(),
            layout,
            table,
            [1, 0],
            tracker,
            mmdbn.GrowthConfig(wd_stable=0.01),
            mmdbn.SortingConfig(),
        )
        assert result.moves == 0
        assert result.layout.block_ids() == [0, 1, 2]

    def test_fixed_weights(self):
        params = far_pair_rbm()
        layout = r1_r2_c1()
        table = mmdbn.rebuild_table(layout)
        result = mmdbn.multimodal_sort(
            params,
            layout,
            table,
            [1, 0],
            simulate_wd_tracker(6, [0.0, 0.0]),
            mmdbn.GrowthConfig(wd_stable=0.01),
            mmdbn.SortingConfig(permute_weights=False),
        )
        assert result.moves == 1
        assert result.params is params


class TestSortingConfig:
    @pytest.mark.parametrize(
        "kwargs,errmsg",
        [
            ({"rho": 0.0}, "candidate threshold rho"),
            ({"rho": 1.5}, "candidate threshold rho"),
            ({"radius": 0}, "neighborhood radius must be >= 1"),
            ({"csv_tail": -1}, "number of CSV tail blocks must be >= 0"),
        ],
    )
    def test_bad_values(self, kwargs, errmsg):
        with pytest.raises(ValueError, match=errmsg):
            mmdbn.SortingConfig(**kwargs)
