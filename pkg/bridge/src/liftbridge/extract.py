"""Stream extraction.

Walks a causal model over its own greedy (or seeded sampled) output
and scores every emitted token twice: under the full prompt and under
a weakened skeleton. The result is written in the stopping engine's
JSONL stream schema, with a manifest whose digests tie the artifact to
its inputs.

The skeleton side is teacher-forced: it is always evaluated on the
token the full model actually emitted, at the same position, so the
two probabilities condition on the identical history.
"""

import dataclasses
import hashlib
import json
import math
import os
import shlex
import subprocess
import time
from dataclasses import dataclass

import torch

from .model import BridgeError, load_model, next_token_logits
from .prompts import DEFAULT_TEMPLATE, PromptFields, TemplateError, compress_prompt

SKELETON_KINDS = (
    "temperature",
    "flatten",
    "compressed-prompt",
    "context-ablation",
    "submodel",
)


class ConfigError(ValueError):
    """Bridge configuration is invalid."""


@dataclass(frozen=True)
class BridgeConfig:
    """One extraction recipe; the skeleton field picks exactly one kind
    and only that kind's parameter is consulted."""

    model: str = "tiny-random"
    skeleton: str = "flatten"
    tau: float = 1.0
    gamma: float = 0.0
    template: str = DEFAULT_TEMPLATE
    submodel: str = "tiny-random-small"
    max_tokens: int = 50
    boundary_chars: str = ".!?;"
    verifier_cmd: str | None = None
    sample: bool = False
    seed: int = 0

    def validate(self) -> None:
        if self.skeleton not in SKELETON_KINDS:
            raise ConfigError(f"unknown skeleton kind {self.skeleton!r}")
        if self.skeleton == "temperature":
            # tau below 1 would sharpen the model instead of weakening it
            if not (math.isfinite(self.tau) and self.tau >= 1.0):
                raise ConfigError(f"tau must be finite and >= 1, got {self.tau}")
        if self.skeleton == "flatten" and not (0.0 <= self.gamma <= 1.0):
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.skeleton == "compressed-prompt" and "{query}" not in self.template:
            raise ConfigError("compressed-prompt template must contain {query}")
        if self.skeleton == "submodel" and not self.submodel:
            raise ConfigError("submodel skeleton needs a model identifier")
        if self.max_tokens < 1:
            raise ConfigError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if not self.boundary_chars:
            raise ConfigError("boundary_chars must not be empty")


def skeleton_descriptor(config: BridgeConfig) -> dict:
    """The skeleton's identity as recorded in the manifest."""
    kind = config.skeleton
    if kind == "temperature":
        return {"kind": kind, "tau": config.tau}
    if kind == "flatten":
        return {"kind": kind, "gamma": config.gamma}
    if kind == "compressed-prompt":
        return {"kind": kind, "template": config.template}
    if kind == "submodel":
        return {"kind": kind, "identifier": config.submodel}
    return {"kind": kind}


@dataclass(frozen=True)
class ExtractionManifest:
    model: str
    skeleton: dict
    prompt_sha256: str
    skeleton_prompt_sha256: str | None
    stream_file: str
    stream_sha256: str
    token_count: int
    vocab_size: int
    seed: int
    decoding: str
    wall_time_s: float


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _run_verifier(cmd: str, records: list[dict]) -> float:
    """External verifier protocol: stream prefix on stdin, score on stdout."""
    payload = "".join(_dump_line(r) + "\n" for r in records)
    try:
        proc = subprocess.run(
            shlex.split(cmd),
            input=payload.encode("utf-8"),
            capture_output=True,
            timeout=60,
        )
    except (OSError, subprocess.SubprocessError) as exc:
        raise BridgeError(f"verifier command failed: {exc}") from exc
    if proc.returncode != 0:
        raise BridgeError(f"verifier exited {proc.returncode}: {proc.stderr.decode()!r}")
    try:
        score = float(proc.stdout.decode("utf-8").strip().splitlines()[0])
    except (ValueError, IndexError) as exc:
        raise BridgeError(f"verifier output is not a score: {proc.stdout!r}") from exc
    if not (0.0 <= score <= 1.0):
        raise BridgeError(f"verifier score {score} outside [0, 1]")
    return score


def _skeleton_prompt(config: BridgeConfig, fields: PromptFields) -> str | None:
    """The weakened prompt text, or None when the skeleton reuses the
    full context (temperature and flatten transform the same logits)."""
    if config.skeleton == "compressed-prompt":
        return compress_prompt(fields, config.template)
    if config.skeleton == "context-ablation":
        if not fields.context:
            raise BridgeError("context-ablation needs a context block in the prompt")
        return fields.ablated_text()
    if config.skeleton == "submodel":
        return fields.full_text()
    return None


def extract_stream(
    config: BridgeConfig,
    fields: PromptFields,
    out_path: str,
    dist_path: str | None = None,
) -> ExtractionManifest:
    """Generate up to max_tokens and write the scored stream.

    Emits one JSONL record per token with the full-model probability,
    the skeleton probability of the same token, the full-model entropy,
    a punctuation boundary flag, and (at boundaries, when configured)
    an external verifier score. Optionally also writes the paired
    full/skeleton distribution rows used by the diagnostics command.
    """
    config.validate()
    full_prompt = fields.full_text()
    if not full_prompt:
        raise BridgeError("prompt is empty")
    skel_prompt = _skeleton_prompt(config, fields)

    model, tok = load_model(config.model)
    if config.skeleton == "submodel":
        s_model, s_tok = load_model(config.submodel)
        if s_tok.vocab_size != tok.vocab_size:
            raise BridgeError(
                "submodel vocab size "
                f"{s_tok.vocab_size} != full model {tok.vocab_size}"
            )
    elif skel_prompt is not None:
        s_model, s_tok = model, tok
    else:
        s_model = s_tok = None

    full_ids = tok.encode(full_prompt)
    skel_ids = s_tok.encode(skel_prompt) if skel_prompt is not None else None
    gen = torch.Generator().manual_seed(config.seed)
    inv_v = 1.0 / tok.vocab_size
    want_dist = dist_path is not None

    records: list[dict] = []
    dist_rows: list[dict] = []
    t0 = time.monotonic()
    for t in range(1, config.max_tokens + 1):
        logits = next_token_logits(model, full_ids)
        probs = torch.softmax(logits, dim=-1)
        if config.sample:
            token = int(torch.multinomial(probs, 1, generator=gen))
        else:
            token = int(torch.argmax(probs))
        p = float(probs[token])
        entropy = float(-(probs * torch.log(probs.clamp_min(1e-300))).sum())

        s_probs = None
        if config.skeleton == "temperature":
            s_probs = torch.softmax(logits / config.tau, dim=-1)
            s = float(s_probs[token])
        elif config.skeleton == "flatten":
            s = (1.0 - config.gamma) * p + config.gamma * inv_v
            if want_dist:
                s_probs = (1.0 - config.gamma) * probs + config.gamma * inv_v
        else:
            s_logits = next_token_logits(s_model, skel_ids)
            s_probs = torch.softmax(s_logits, dim=-1)
            s = float(s_probs[token])

        text = tok.token_text(token)
        boundary = bool(text) and text[-1] in config.boundary_chars
        rec = {"t": t, "p": p, "s": s, "H": entropy, "token": text}
        if boundary:
            rec["boundary"] = True
            if config.verifier_cmd:
                rec["verifier"] = _run_verifier(config.verifier_cmd, records + [rec])
        records.append(rec)
        if want_dist:
            dist_rows.append(
                {
                    "t": t,
                    "P": probs.tolist(),
                    "S": s_probs.tolist(),
                    "y": token,
                    "H": entropy,
                }
            )

        full_ids.append(token)
        if skel_ids is not None:
            skel_ids.append(token)
        if token == tok.eos_id:
            break
    wall = time.monotonic() - t0

    with open(out_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(_dump_line(rec) + "\n")
    if want_dist:
        with open(dist_path, "w", encoding="utf-8") as fh:
            for row in dist_rows:
                fh.write(_dump_line(row) + "\n")

    return ExtractionManifest(
        model=config.model,
        skeleton=skeleton_descriptor(config),
        prompt_sha256=sha256_text(full_prompt),
        skeleton_prompt_sha256=(
            sha256_text(skel_prompt) if skel_prompt is not None else None
        ),
        stream_file=os.path.basename(out_path),
        stream_sha256=sha256_file(out_path),
        token_count=len(records),
        vocab_size=tok.vocab_size,
        seed=config.seed,
        decoding="sampled" if config.sample else "greedy",
        wall_time_s=wall,
    )


def write_manifest(manifest: ExtractionManifest, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(dataclasses.asdict(manifest), sort_keys=True, indent=2))
        fh.write("\n")


def verify_manifest(manifest_path: str) -> list[str]:
    """Recompute what the manifest claims about its stream file.

    Returns a list of mismatch descriptions; empty means the artifact
    checks out. The stream file is resolved relative to the manifest.
    """
    with open(manifest_path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    problems = []
    stream_path = os.path.join(os.path.dirname(manifest_path), data["stream_file"])
    if not os.path.exists(stream_path):
        return [f"stream file {data['stream_file']} missing"]
    actual_digest = sha256_file(stream_path)
    if actual_digest != data["stream_sha256"]:
        problems.append(
            f"stream digest mismatch: manifest {data['stream_sha256']}, "
            f"file {actual_digest}"
        )
    with open(stream_path, "r", encoding="utf-8") as fh:
        n_lines = sum(1 for line in fh if line.strip())
    if n_lines != data["token_count"]:
        problems.append(
            f"token count mismatch: manifest {data['token_count']}, file {n_lines}"
        )
    return problems
