import json
import sys

import pytest

from liftbridge import (
    BridgeConfig,
    BridgeError,
    ConfigError,
    PromptFields,
    extract_stream,
    skeleton_descriptor,
    verify_manifest,
    write_manifest,
)
from liftbridge.extract import sha256_file, sha256_text

from bridge_helpers import ALL_BOUNDARY, FIELDS, run_liftbridge, run_liftstop


def rows_of(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh]


def extract(tmp_path, config, name="stream.jsonl", dist=False, fields=FIELDS):
    out = tmp_path / name
    dist_path = str(tmp_path / ("dist_" + name)) if dist else None
    manifest = extract_stream(config, fields, str(out), dist_path=dist_path)
    return out, dist_path, manifest


# ---------------------------------------------------------------------------
# skeleton identities


def test_temperature_one_is_identity(tmp_path):
    out, _, _ = extract(tmp_path, BridgeConfig(skeleton="temperature", tau=1.0, max_tokens=15))
    assert all(r["p"] == r["s"] for r in rows_of(out))


def test_flatten_zero_is_identity(tmp_path):
    out, _, _ = extract(tmp_path, BridgeConfig(skeleton="flatten", gamma=0.0, max_tokens=15))
    assert all(r["p"] == r["s"] for r in rows_of(out))


def test_flatten_one_is_uniform(tmp_path):
    out, _, manifest = extract(
        tmp_path, BridgeConfig(skeleton="flatten", gamma=1.0, max_tokens=15)
    )
    assert all(r["s"] == 1.0 / manifest.vocab_size for r in rows_of(out))


def test_raised_temperature_flattens_the_pick(tmp_path):
    # greedy picks the mode, and softening can only shrink the mode's mass
    out, _, _ = extract(tmp_path, BridgeConfig(skeleton="temperature", tau=4.0, max_tokens=15))
    assert all(r["s"] < r["p"] for r in rows_of(out))


@pytest.mark.parametrize("kind", ["compressed-prompt", "context-ablation", "submodel"])
def test_context_skeletons_differ_and_roundtrip(tmp_path, kind):
    out, _, manifest = extract(tmp_path, BridgeConfig(skeleton=kind, max_tokens=12))
    rows = rows_of(out)
    assert any(r["p"] != r["s"] for r in rows)
    assert manifest.skeleton_prompt_sha256 is not None
    code, stdout, _ = run_liftstop(["run", "--input", str(out)])
    assert code == 0
    assert "certificate" in json.loads(stdout.splitlines()[-1])


def test_ablation_requires_context(tmp_path):
    with pytest.raises(BridgeError, match="context block"):
        extract_stream(
            BridgeConfig(skeleton="context-ablation"),
            PromptFields(query="Q?"),
            str(tmp_path / "x.jsonl"),
        )


# ---------------------------------------------------------------------------
# record channels


def test_stream_channels(tmp_path):
    out, _, _ = extract(tmp_path, BridgeConfig(skeleton="flatten", gamma=0.2, max_tokens=30))
    rows = rows_of(out)
    assert [r["t"] for r in rows] == list(range(1, 31))
    assert all(0.0 < r["p"] <= 1.0 for r in rows)
    assert all(0.0 <= r["s"] <= 1.0 for r in rows)
    assert all(r["H"] >= 0.0 for r in rows)
    for r in rows:
        if r.get("boundary"):
            assert r["token"][-1] in ".!?;"


def test_verifier_scores_attach_at_boundaries(tmp_path):
    cmd = f"{sys.executable} -c 'print(0.9)'"
    out, _, _ = extract(
        tmp_path,
        BridgeConfig(
            skeleton="flatten",
            gamma=0.2,
            max_tokens=6,
            boundary_chars=ALL_BOUNDARY,
            verifier_cmd=cmd,
        ),
    )
    assert [r.get("verifier") for r in rows_of(out)] == [0.9] * 6


def test_bad_verifier_output_raises(tmp_path):
    cmd = f"{sys.executable} -c 'print(\"not a score\")'"
    with pytest.raises(BridgeError, match="not a score"):
        extract(
            tmp_path,
            BridgeConfig(
                skeleton="flatten",
                max_tokens=2,
                boundary_chars=ALL_BOUNDARY,
                verifier_cmd=cmd,
            ),
        )


def test_out_of_range_verifier_score_raises(tmp_path):
    cmd = f"{sys.executable} -c 'print(1.5)'"
    with pytest.raises(BridgeError, match="outside"):
        extract(
            tmp_path,
            BridgeConfig(
                skeleton="flatten",
                max_tokens=2,
                boundary_chars=ALL_BOUNDARY,
                verifier_cmd=cmd,
            ),
        )


# ---------------------------------------------------------------------------
# determinism


def test_greedy_extraction_is_deterministic(tmp_path):
    cfg = BridgeConfig(skeleton="flatten", gamma=0.2, max_tokens=20)
    a, _, ma = extract(tmp_path, cfg, name="a.jsonl")
    b, _, mb = extract(tmp_path, cfg, name="b.jsonl")
    assert a.read_bytes() == b.read_bytes()
    assert ma.stream_sha256 == mb.stream_sha256


def test_sampling_is_seeded(tmp_path):
    cfg = BridgeConfig(skeleton="flatten", gamma=0.2, sample=True, seed=5, max_tokens=10)
    a, _, _ = extract(tmp_path, cfg, name="a.jsonl")
    b, _, _ = extract(tmp_path, cfg, name="b.jsonl")
    c, _, _ = extract(
        tmp_path,
        BridgeConfig(skeleton="flatten", gamma=0.2, sample=True, seed=6, max_tokens=10),
        name="c.jsonl",
    )
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


# ---------------------------------------------------------------------------
# config validation


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(skeleton="prune"),
        dict(skeleton="temperature", tau=0.5),
        dict(skeleton="temperature", tau=float("nan")),
        dict(skeleton="flatten", gamma=-0.1),
        dict(skeleton="flatten", gamma=1.1),
        dict(skeleton="compressed-prompt", template="no placeholder"),
        dict(skeleton="submodel", submodel=""),
        dict(max_tokens=0),
        dict(boundary_chars=""),
    ],
)
def test_config_validation_errors(kwargs):
    with pytest.raises(ConfigError):
        BridgeConfig(**kwargs).validate()


def test_skeleton_descriptor_carries_the_active_parameter():
    assert skeleton_descriptor(BridgeConfig(skeleton="flatten", gamma=0.3)) == {
        "kind": "flatten",
        "gamma": 0.3,
    }
    assert skeleton_descriptor(BridgeConfig(skeleton="context-ablation")) == {
        "kind": "context-ablation"
    }


def test_empty_prompt_rejected(tmp_path):
    with pytest.raises(BridgeError, match="empty"):
        extract_stream(BridgeConfig(), PromptFields(), str(tmp_path / "x.jsonl"))


def test_unknown_model_identifier(tmp_path):
    with pytest.raises(BridgeError, match="cannot load"):
        extract_stream(
            BridgeConfig(model="no/such-model"), FIELDS, str(tmp_path / "x.jsonl")
        )


# ---------------------------------------------------------------------------
# manifests


def test_manifest_digests_recompute(tmp_path):
    out, _, manifest = extract(tmp_path, BridgeConfig(skeleton="flatten", gamma=0.2))
    assert manifest.prompt_sha256 == sha256_text(FIELDS.full_text())
    assert manifest.stream_sha256 == sha256_file(str(out))
    assert manifest.token_count == 50

    path = tmp_path / "m.json"
    write_manifest(manifest, str(path))
    assert verify_manifest(str(path)) == []

    with open(out, "a") as fh:
        fh.write('{"t":51,"p":0.5,"s":0.5}\n')
    problems = verify_manifest(str(path))
    assert len(problems) == 2


# ---------------------------------------------------------------------------
# CLI


def test_cli_extract_and_verify(tmp_path):
    out = tmp_path / "s.jsonl"
    code, stdout, stderr = run_liftbridge(
        [
            "extract",
            "--skeleton", "flatten",
            "--gamma", "0.2",
            "--query", "Q: What is 2+2?",
            "--max-tokens", "10",
            "--out", str(out),
        ]
    )
    assert code == 0, stderr
    manifest = json.loads(stdout)
    assert manifest["token_count"] == 10
    assert (tmp_path / "s.jsonl.manifest.json").exists()

    code, stdout, _ = run_liftbridge(
        ["verify", "--manifest", str(tmp_path / "s.jsonl.manifest.json")]
    )
    assert code == 0
    assert json.loads(stdout)["ok"] is True

    out.write_text("tampered\n")
    code, stdout, _ = run_liftbridge(
        ["verify", "--manifest", str(tmp_path / "s.jsonl.manifest.json")]
    )
    assert code == 3
    assert json.loads(stdout)["ok"] is False


def test_cli_exit_codes(tmp_path):
    code, _, err = run_liftbridge(["extract", "--out", "x.jsonl"])
    assert code == 1
    assert json.loads(err)["error"]["code"] == 1

    code, _, err = run_liftbridge(
        ["extract", "--query", "q", "--skeleton", "flatten", "--gamma", "2.0",
         "--out", str(tmp_path / "x.jsonl")]
    )
    assert code == 2

    code, _, err = run_liftbridge(
        ["verify", "--manifest", str(tmp_path / "missing.json")]
    )
    assert code == 3
