from __future__ import annotations

import random

import pytest

from solid.backend import MockBackend
from solid.generator import generate_dialog, generate_dialog_single_pass
from solid.preference import (
    ASSISTANT_CUE,
    OutOfRange,
    QualityTier,
    SeedMismatch,
    build_pairs,
    build_preference_pair,
    inference_prefix,
    quality_tier,
    render_dialog,
)
from solid.seeder import build_seeds

from helpers import make_dialog, make_seed

TIER_TABLE = {
    **{n: QualityTier.Excellent for n in (1, 2, 3)},
    4: QualityTier.Good,
    **{n: QualityTier.Average for n in range(5, 11)},
    **{n: QualityTier.Poor for n in range(11, 16)},
    **{n: QualityTier.VeryPoor for n in range(16, 21)},
}


class TestQualityTier:
    @pytest.mark.parametrize("n,tier", sorted(TIER_TABLE.items()))
    def test_table(self, n, tier):
        assert quality_tier(n) is tier

    @pytest.mark.parametrize("n", [0, 21, -3])
    def test_out_of_range(self, n):
        with pytest.raises(OutOfRange):
            quality_tier(n)

    def test_partition_of_1_to_20(self):
        seen = [quality_tier(n) for n in range(1, 21)]
        assert set(seen) == set(QualityTier)

    def test_monotone_non_increasing_quality(self):
        rank = {
            QualityTier.Excellent: 0, QualityTier.Good: 1, QualityTier.Average: 2,
            QualityTier.Poor: 3, QualityTier.VeryPoor: 4,
        }
        ranks = [rank[quality_tier(n)] for n in range(1, 21)]
        assert ranks == sorted(ranks)

    def test_prefix_strings(self):
        assert QualityTier.Excellent.prefix == "Excellent quality dialog:"
        assert QualityTier.VeryPoor.prefix == "Very poor quality dialog:"
        assert len({t.prefix for t in QualityTier}) == 5


class TestInferencePrefix:
    def test_fixed_prefix(self):
        assert inference_prefix() == "Excellent quality dialog:"

    def test_independent_of_target_length(self):
        assert inference_prefix() == inference_prefix()

    def test_matches_shortest_tier(self):
        assert inference_prefix() == quality_tier(1).prefix == quality_tier(3).prefix


class TestRenderDialog:
    def test_prefix_then_blocks(self):
        d = make_dialog("d", [["OQ"], ["CQ"], ["FD"]])
        text = render_dialog(d, QualityTier.Excellent)
        assert text.startswith("Excellent quality dialog:\n\nUtterance 1:\n")
        assert "Text: " in text and "Intent: original question" in text

    def test_no_tier_no_prefix(self):
        d = make_dialog("d", [["OQ"]])
        assert render_dialog(d).startswith("Utterance 1:")

    def test_block_layout(self):
        d = make_dialog("d", [["OQ"], ["IR", "PA"]], texts=["Ask me.", "Answer given."])
        assert render_dialog(d) == (
            "Utterance 1:\nText: Ask me.\nIntent: original question\n\n"
            "Utterance 2:\nText: Answer given.\nIntent: information request, potential answer"
        )

    def test_injective_over_mock_dialogs(self, fixture_corpus):
        backend = MockBackend()
        seeds = list(build_seeds(backend, fixture_corpus, 100, random.Random(11)))
        dialogs = [generate_dialog(backend, s) for s in seeds]
        rendered = {render_dialog(d) for d in dialogs}
        assert len(rendered) == len(dialogs)


class TestBuildPreferencePair:
    def _pair(self, n_turns=3, use_lmq=True):
        seq = "; ".join(["OQ"] + ["PA"] * (n_turns - 1))
        seed = make_seed(seed_id="sX", sequence=seq)
        chosen = make_dialog("c", [["OQ"]] + [["PA"]] * (n_turns - 1), seed_id="sX")
        rejected = make_dialog("r", [["OQ"]] + [["PA"]] * (n_turns - 1), seed_id="sX")
        return build_preference_pair(seed, chosen, rejected, use_lmq=use_lmq)

    def test_shared_tier_from_chosen_length(self):
        pair = self._pair(3)
        assert pair.prompt.endswith("Excellent quality dialog:")

    def test_prompt_contains_seed_and_cue(self):
        pair = self._pair()
        assert "Entity: Abel Hale" in pair.prompt
        assert ASSISTANT_CUE in pair.prompt
        assert "Intent sequence: OQ; PA; PA" in pair.prompt

    def test_no_lmq_drops_exactly_one_line(self):
        with_lmq = self._pair(use_lmq=True).prompt.splitlines()
        without = self._pair(use_lmq=False).prompt.splitlines()
        assert with_lmq[:-1] == without
        assert with_lmq[-1] == "Excellent quality dialog:"

    def test_seed_mismatch(self):
        seed = make_seed(seed_id="sX")
        chosen = make_dialog("c", [["OQ"], ["PA"], ["PF"]], seed_id="sX")
        rejected = make_dialog("r", [["OQ"], ["PA"], ["PF"]], seed_id="OTHER")
        with pytest.raises(SeedMismatch):
            build_preference_pair(seed, chosen, rejected)

    def test_meta_records_lengths_and_mismatch(self):
        seed = make_seed(seed_id="sX", sequence="OQ; PA; PF")
        chosen = make_dialog("c", [["OQ"], ["PA"], ["PF"]], seed_id="sX")
        rejected = make_dialog("r", [["OQ"], ["PA"]], seed_id="sX")
        pair = build_preference_pair(seed, chosen, rejected)
        assert pair.meta["chosen_len"] == 3
        assert pair.meta["rejected_len"] == 2
        assert pair.meta["length_mismatch"] is True

    def test_longer_dialogs_get_lower_tiers(self):
        pair = self._pair(12)
        assert pair.prompt.endswith("Poor quality dialog:")


class TestEndToEndPairs:
    def test_mock_pipeline_pairs_share_prompts(self, fixture_corpus):
        backend = MockBackend()
        seeds = list(build_seeds(backend, fixture_corpus, 10, random.Random(21)))
        chosen = [generate_dialog(backend, s) for s in seeds]
        rejected = [generate_dialog_single_pass(backend, s) for s in seeds]
        pairs, skipped = build_pairs(seeds, chosen, rejected)
        assert skipped == 0
        assert len(pairs) == 10
        for pair in pairs:
            assert pair.prompt  # shared by construction; chosen/rejected differ
            assert pair.chosen != pair.rejected or pair.meta["rejected_len"] == pair.meta["chosen_len"]

    def test_missing_rejected_skipped_and_counted(self):
        seeds = [make_seed(seed_id="a", sequence="OQ; PA"), make_seed(seed_id="b", sequence="OQ; PA")]
        chosen = [make_dialog("ca", [["OQ"], ["PA"]], seed_id="a"),
                  make_dialog("cb", [["OQ"], ["PA"]], seed_id="b")]
        rejected = [make_dialog("ra", [["OQ"], ["PA"]], seed_id="a")]
        pairs, skipped = build_pairs(seeds, chosen, rejected)
        assert len(pairs) == 1
        assert skipped == 1
