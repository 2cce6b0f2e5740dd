import subprocess
import sys

from liftbridge import PromptFields

FIELDS = PromptFields(
    instruction="Answer briefly.",
    examples=("Q: What is 1+1? A: 2.",),
    context="Context: pi is about 3.14159.",
    query="Q: What is 2+2?",
)

# every byte counts as a boundary, so gate/verifier paths always engage
ALL_BOUNDARY = "".join(chr(i) for i in range(1, 256))


def run_liftstop(args):
    """Invoke the stopping engine CLI; the bridge only talks to it
    through the stream format and this entry point."""
    proc = subprocess.run(
        [sys.executable, "-m", "liftstop.cli", *args],
        capture_output=True,
        text=True,
    )
    return proc.returncode, proc.stdout, proc.stderr


def run_liftbridge(args):
    proc = subprocess.run(
        [sys.executable, "-m", "liftbridge.cli", *args],
        capture_output=True,
        text=True,
    )
    return proc.returncode, proc.stdout, proc.stderr
