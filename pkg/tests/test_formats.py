import json

import pytest

from dvckit.cotasks import CtDatasetConfig, build_ct_dataset
from dvckit.formats import (
    conversation_from_dict,
    conversation_to_dict,
    dump_json,
    dump_jsonl,
    load_jsonl,
    margin_curves_to_csv,
    pair_likelihoods_from_dict,
    round_floats,
    sampled_responses_from_dict,
)
from dvckit.toylab import MarginCurve, synthetic_corpus


class TestRoundFloats:
    def test_nested_rounding(self):
        value = {"a": [0.1234567891, {"b": (1.0000004,)}], "c": "text", "d": 3}
        assert round_floats(value) == {"a": [0.123457, {"b": [1.0]}], "c": "text", "d": 3}

    def test_bools_preserved(self):
        assert round_floats({"flag": True}) == {"flag": True}

    def test_dump_json_is_stable(self):
        payload = {"x": 1 / 3, "y": [2 / 3]}
        assert dump_json(payload) == dump_json(payload)
        assert json.loads(dump_json(payload))["x"] == 0.333333


class TestConversationWire:
    def test_round_trip(self):
        corpus = synthetic_corpus(3, 8)
        result = build_ct_dataset(corpus, CtDatasetConfig(seed=2))
        for conv in result.conversations:
            row = conversation_to_dict(conv)
            assert conversation_from_dict(row) == conv
            assert row["turns"][0]["from"] == "human"
            assert row["turns"][1]["from"] == "gpt"

    def test_jsonl_round_trip(self):
        corpus = synthetic_corpus(2, 4)
        convs = build_ct_dataset(corpus, CtDatasetConfig(seed=1)).conversations
        text = dump_jsonl(conversation_to_dict(c) for c in convs)
        assert [conversation_from_dict(r) for r in load_jsonl(text)] == list(convs)


class TestRecordParsing:
    def test_sampled_responses_cap(self):
        row = {"video_id": "v", "path": "t_then_c", "k": 2, "prompt": "p",
               "gt": "From 00 to 99.", "responses": ["a", "b", "c", "d"]}
        assert len(sampled_responses_from_dict(row, 3).responses) == 3
        assert len(sampled_responses_from_dict(row).responses) == 4

    def test_sampled_responses_need_two(self):
        row = {"video_id": "v", "path": "t_then_c", "k": 2, "prompt": "p",
               "gt": "From 00 to 99.", "responses": ["a"]}
        with pytest.raises(ValueError):
            sampled_responses_from_dict(row)

    def test_pair_likelihoods_fields(self):
        row = {"logp_theta_w": -1, "logp_theta_l": -2, "logp_ref_w": -3,
               "logp_ref_l": -4, "m_w": 70, "m_l": 30}
        pl = pair_likelihoods_from_dict(row)
        assert pl.logp_ref_l == -4.0
        assert pl.gap == 40.0


class TestMarginCsv:
    def test_layout(self):
        curves = [MarginCurve("dpo", (0.0, 0.25)), MarginCurve("mdpo", (0.0, 0.5))]
        lines = margin_curves_to_csv(curves).splitlines()
        assert lines[0] == "epoch,mode,mean_margin"
        assert lines[1] == "0,dpo,0.000000"
        assert lines[2] == "1,dpo,0.250000"
        assert lines[4] == "1,mdpo,0.500000"
