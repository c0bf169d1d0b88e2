import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssrkit import (CommandList, EditCommand, InvalidOutput,
                    parse_candidate_object, parse_commands, render_commands)
from ssrkit.commands import MAX_INPUT_BYTES
from ssrkit.errors import MalformedTag, NoCommands
from ssrkit.scene import SceneObject


class TestParseCommands:
    def test_basic(self):
        text = json.dumps({"reasoning": "swap the chair",
                           "commands": ["<remove>old chair</remove>",
                                        "<add>new armchair</add>"]})
        out = parse_commands(text)
        assert out.commands == (EditCommand("remove", "old chair"),
                                EditCommand("add", "new armchair"))
        assert out.reasoning == "swap the chair"
        assert not out.order_warning

    def test_prose_wrapped(self):
        text = ('Sure! Here is my plan:\n'
                '{"commands": ["<add>floor lamp</add>"]}\nHope that helps.')
        out = parse_commands(text)
        assert out.commands[0] == EditCommand("add", "floor lamp")

    def test_case_and_whitespace_tolerant(self):
        text = json.dumps({"commands": ["  < ADD >  a rug  </ add > "]})
        out = parse_commands(text)
        assert out.commands[0] == EditCommand("add", "a rug")

    def test_order_warning(self):
        text = json.dumps({"commands": ["<add>lamp</add>",
                                        "<remove>table</remove>"]})
        assert parse_commands(text).order_warning

    def test_no_commands(self):
        with pytest.raises(NoCommands):
            parse_commands("no structure at all")
        with pytest.raises(NoCommands):
            parse_commands('{"commands": []}')
        with pytest.raises(NoCommands):
            parse_commands('{"other": 1}')

    def test_malformed_tag_reports_index(self):
        text = json.dumps({"commands": ["<add>ok</add>", "<move>bad</move>"]})
        with pytest.raises(MalformedTag) as err:
            parse_commands(text)
        assert err.value.index == 1

    def test_mismatched_closing_tag(self):
        text = json.dumps({"commands": ["<add>thing</remove>"]})
        with pytest.raises(MalformedTag):
            parse_commands(text)

    def test_oversized_input(self):
        blob = "x" * (MAX_INPUT_BYTES + 1)
        with pytest.raises(NoCommands):
            parse_commands(blob)

    def test_render_round_trip(self):
        cl = CommandList((EditCommand("remove", "the bed"),
                          EditCommand("add", "a sofa")), reasoning="redo")
        assert parse_commands(render_commands(cl)) == cl


VALID_CANDIDATE = json.dumps({
    "desc": "a chair", "size": [0.5, 0.9, 0.5],
    "pos": [0.0, 0.0, 0.0], "rot": [1.0, 0.0, 0.0, 0.0],
})


class TestParseCandidate:
    def test_valid(self):
        obj = parse_candidate_object(VALID_CANDIDATE)
        assert isinstance(obj, SceneObject)
        assert obj.desc == "a chair"

    def test_not_json(self):
        out = parse_candidate_object("hello")
        assert isinstance(out, InvalidOutput) and out.reason == "malformed"

    def test_json_but_not_object(self):
        out = parse_candidate_object("[1, 2, 3]")
        assert isinstance(out, InvalidOutput) and out.reason == "not_an_object"

    def test_missing_key(self):
        out = parse_candidate_object('{"desc": "chair"}')
        assert isinstance(out, InvalidOutput) and out.reason == "missing_key"

    def test_bad_type(self):
        out = parse_candidate_object(
            '{"desc": "c", "size": "big", "pos": [0,0,0], "rot": [1,0,0,0]}')
        assert isinstance(out, InvalidOutput) and out.reason == "bad_type"

    def test_invariant_violation(self):
        out = parse_candidate_object(
            '{"desc": "c", "size": [0,1,1], "pos": [0,0,0], "rot": [1,0,0,0]}')
        assert isinstance(out, InvalidOutput)

    def test_oversized(self):
        out = parse_candidate_object('{"desc": "' + "x" * MAX_INPUT_BYTES + '"}')
        assert isinstance(out, InvalidOutput) and out.reason == "too_large"

    def test_non_string(self):
        assert isinstance(parse_candidate_object(None), InvalidOutput)
        assert isinstance(parse_candidate_object(42), InvalidOutput)

    @given(st.text(max_size=2000))
    @settings(max_examples=300, deadline=None)
    def test_total_on_arbitrary_text(self, text):
        out = parse_candidate_object(text)
        assert isinstance(out, (SceneObject, InvalidOutput))

    @given(st.binary(max_size=2000))
    @settings(max_examples=200, deadline=None)
    def test_total_on_arbitrary_bytes(self, blob):
        out = parse_candidate_object(blob.decode("utf-8", errors="replace"))
        assert isinstance(out, (SceneObject, InvalidOutput))

    @given(st.recursive(
        st.none() | st.booleans() | st.floats(allow_nan=False) | st.text(max_size=20),
        lambda children: st.lists(children, max_size=4)
        | st.dictionaries(st.text(max_size=8), children, max_size=4),
        max_leaves=20))
    @settings(max_examples=200, deadline=None)
    def test_total_on_arbitrary_json(self, value):
        out = parse_candidate_object(json.dumps(value))
        assert isinstance(out, (SceneObject, InvalidOutput))
