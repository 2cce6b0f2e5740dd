"""Model bridge: turns a causal language model plus a weakened skeleton
into the stopping engine's per-token JSONL stream format."""

from .extract import (
    BridgeConfig,
    ConfigError,
    ExtractionManifest,
    SKELETON_KINDS,
    extract_stream,
    skeleton_descriptor,
    verify_manifest,
    write_manifest,
)
from .model import BridgeError, ByteTokenizer, load_model
from .prompts import DEFAULT_TEMPLATE, PromptFields, TemplateError, compress_prompt

__all__ = [
    "BridgeConfig",
    "BridgeError",
    "ByteTokenizer",
    "ConfigError",
    "DEFAULT_TEMPLATE",
    "ExtractionManifest",
    "PromptFields",
    "SKELETON_KINDS",
    "TemplateError",
    "compress_prompt",
    "extract_stream",
    "load_model",
    "skeleton_descriptor",
    "verify_manifest",
    "write_manifest",
]
