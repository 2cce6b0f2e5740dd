"""Causal models behind the bridge, plus a byte-level codec.

The built-in identifiers construct small randomly initialized models
with a fixed seed, so extraction runs fully offline and reproducibly.
Any other identifier is handed to transformers, which needs the
weights to be available locally or via a configured hub.
"""

import torch


class BridgeError(RuntimeError):
    """Model loading or generation failed."""


BOS_ID = 256
EOS_ID = 257
VOCAB_SIZE = 258


class ByteTokenizer:
    """UTF-8 bytes as token ids, with BOS/EOS above the byte range."""

    vocab_size = VOCAB_SIZE
    bos_id = BOS_ID
    eos_id = EOS_ID

    def encode(self, text: str) -> list[int]:
        return [BOS_ID] + list(text.encode("utf-8"))

    def token_text(self, token_id: int) -> str:
        # specials render as empty text; they carry no surface form
        return chr(token_id) if 0 <= token_id < 256 else ""


BUILTIN_MODELS = {
    "tiny-random": dict(seed=0, n_embd=32, n_layer=2, n_head=2),
    "tiny-random-small": dict(seed=1, n_embd=16, n_layer=1, n_head=1),
}


def _tiny_model(seed: int, n_embd: int, n_layer: int, n_head: int):
    from transformers import GPT2Config, GPT2LMHeadModel

    torch.manual_seed(seed)
    config = GPT2Config(
        vocab_size=VOCAB_SIZE,
        n_positions=512,
        n_embd=n_embd,
        n_layer=n_layer,
        n_head=n_head,
        bos_token_id=BOS_ID,
        eos_token_id=EOS_ID,
    )
    return GPT2LMHeadModel(config).eval()


class _HubTokenizer:
    """Adapter giving hub tokenizers the byte-codec interface."""

    def __init__(self, tok):
        self._tok = tok
        self.vocab_size = len(tok)
        self.bos_id = tok.bos_token_id
        self.eos_id = tok.eos_token_id

    def encode(self, text: str) -> list[int]:
        ids = self._tok.encode(text)
        if self.bos_id is not None and (not ids or ids[0] != self.bos_id):
            ids = [self.bos_id] + ids
        return ids

    def token_text(self, token_id: int) -> str:
        return self._tok.decode([token_id])


def load_model(identifier: str):
    """Return (model, tokenizer) for a built-in or external identifier."""
    if identifier in BUILTIN_MODELS:
        return _tiny_model(**BUILTIN_MODELS[identifier]), ByteTokenizer()
    try:
        from transformers import AutoModelForCausalLM, AutoTokenizer

        model = AutoModelForCausalLM.from_pretrained(identifier).eval()
        tokenizer = _HubTokenizer(AutoTokenizer.from_pretrained(identifier))
    except Exception as exc:
        raise BridgeError(f"cannot load model {identifier!r}: {exc}") from exc
    return model, tokenizer


@torch.no_grad()
def next_token_logits(model, ids: list[int]) -> torch.Tensor:
    """Logits for the next token after the given prefix, in float64."""
    out = model(torch.tensor([ids], dtype=torch.long))
    return out.logits[0, -1].double()
