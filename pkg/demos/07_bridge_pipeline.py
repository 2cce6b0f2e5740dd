"""End-to-end: extract a stream from a live model, then decide on it.

The bridge package (bridge/) scores each generated token under the
full model and a weakened skeleton of it, writing the JSONL stream the
stopping engine consumes. The two packages only meet at that file
format and the command line, which is exactly how this demo wires
them: two subprocesses and a temp directory.

Requires both packages installed (see README). Uses the built-in
random-weight model, so the text is gibberish; the probabilities are
still a real model's probabilities, which is all the pipeline needs.

Run: python demos/07_bridge_pipeline.py  (about 30 seconds)
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path


def run_cli(module, args):
    proc = subprocess.run(
        [sys.executable, "-m", module, *args],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        print(proc.stderr, file=sys.stderr)
        raise SystemExit(f"{module} exited with {proc.returncode}")
    return proc.stdout


def main():
    try:
        import liftbridge  # noqa: F401
    except ImportError:
        raise SystemExit("bridge package not installed; run: pip install -e bridge --no-build-isolation")

    with tempfile.TemporaryDirectory() as tmp:
        stream = Path(tmp) / "stream.jsonl"
        dists = Path(tmp) / "dists.jsonl"

        print("1. extracting 50 tokens, skeleton = flatten(gamma=0.2) ...")
        manifest = json.loads(run_cli("liftbridge.cli", [
            "extract",
            "--model", "tiny-random",
            "--skeleton", "flatten", "--gamma", "0.2",
            "--query", "Q: What is the capital of France?",
            "--instruction", "Answer briefly.",
            "--max-tokens", "50",
            "--out", str(stream),
            "--emit-dist", str(dists),
        ]))
        print(f"   tokens {manifest['token_count']}, "
              f"stream sha256 {manifest['stream_sha256'][:12]}...")

        print("2. verifying the manifest ...")
        verdict = json.loads(run_cli("liftbridge.cli", [
            "verify", "--manifest", str(stream) + ".manifest.json",
        ]))
        print(f"   ok={verdict['ok']}")

        print("3. diagnosing the skeleton on the paired distributions ...")
        diag = json.loads(run_cli("liftstop.cli", ["diagnose", "--input", str(dists)]))
        print(f"   accepted={diag['accepted']} reasons={diag['rejection_reasons']}")

        print("4. running the stopping engine on the stream ...")
        cert = json.loads(run_cli("liftstop.cli", ["run", "--input", str(stream)]))["certificate"]
        print(f"   outcome={cert['outcome']} steps={cert['steps_processed']} "
              f"total_lift={cert['total_lift']:.3f}")

    print()
    print("A mild flatten of a well-calibrated model rarely produces enough")
    print("lift to stop, and this tiny random model is as calibrated as its")
    print("own softmax: expect a timeout here. Swap in a real model and a")
    print("harsher skeleton and the same two commands do the real job.")


if __name__ == "__main__":
    main()
