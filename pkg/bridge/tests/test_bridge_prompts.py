import pytest

from liftbridge import PromptFields, TemplateError, compress_prompt

from bridge_helpers import FIELDS


def test_full_text_joins_nonempty_components():
    assert FIELDS.full_text() == (
        "Answer briefly.\n\nQ: What is 1+1? A: 2.\n\n"
        "Context: pi is about 3.14159.\n\nQ: What is 2+2?"
    )
    sparse = PromptFields(query="Q?")
    assert sparse.full_text() == "Q?"


def test_ablated_text_drops_only_context():
    assert FIELDS.ablated_text() == (
        "Answer briefly.\n\nQ: What is 1+1? A: 2.\n\nQ: What is 2+2?"
    )


def test_compress_drops_examples_and_context():
    out = compress_prompt(FIELDS, "Solve this math problem: {query}")
    assert out == "Solve this math problem: Q: What is 2+2?"
    assert "1+1" not in out
    assert "pi" not in out


def test_compress_is_idempotent_without_extras():
    bare = PromptFields(instruction="Answer briefly.", query="Q: What is 2+2?")
    template = "Solve this math problem: {query}"
    assert compress_prompt(bare, template) == compress_prompt(FIELDS, template)


def test_compress_default_template_keeps_instruction():
    assert compress_prompt(FIELDS) == "Answer briefly.\n\nQ: What is 2+2?"


def test_compress_empty_instruction_gives_query_only():
    fields = PromptFields(query="Q: What is 2+2?")
    assert compress_prompt(fields) == "Q: What is 2+2?"


def test_compress_requires_query_placeholder():
    with pytest.raises(TemplateError):
        compress_prompt(FIELDS, "Solve it: {q}")


def test_compress_requires_a_query():
    with pytest.raises(TemplateError):
        compress_prompt(PromptFields(instruction="hi"), "{query}")


def test_compress_rejects_unknown_placeholder():
    with pytest.raises(TemplateError):
        compress_prompt(FIELDS, "{context} then {query}")
