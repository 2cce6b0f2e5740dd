"""Prompt assembly and compression.

A prompt is held as four components so skeletons can drop parts of it
deterministically: compression keeps instruction and query, ablation
keeps everything except the context block.
"""

from dataclasses import dataclass


class TemplateError(ValueError):
    """Skeleton template cannot be applied to the prompt fields."""


@dataclass(frozen=True)
class PromptFields:
    instruction: str = ""
    examples: tuple[str, ...] = ()
    context: str = ""
    query: str = ""

    def full_text(self) -> str:
        """Complete prompt; empty components are skipped, not padded."""
        parts = [self.instruction, *self.examples, self.context, self.query]
        return "\n\n".join(p for p in parts if p)

    def ablated_text(self) -> str:
        """The same prompt with the context block removed."""
        parts = [self.instruction, *self.examples, self.query]
        return "\n\n".join(p for p in parts if p)


DEFAULT_TEMPLATE = "{instruction}\n\n{query}"


def compress_prompt(fields: PromptFields, template: str = DEFAULT_TEMPLATE) -> str:
    """Skeleton prompt from a template over instruction and query only.

    Examples and context never reach the output; an empty instruction
    degrades to a query-only prompt.
    """
    if "{query}" not in template:
        raise TemplateError("template must contain the {query} placeholder")
    if not fields.query:
        raise TemplateError("prompt has no query to compress around")
    try:
        text = template.format(instruction=fields.instruction, query=fields.query)
    except (KeyError, IndexError) as exc:
        raise TemplateError(f"template placeholder not supported: {exc}") from exc
    return text.strip()
