import contextlib
import io

from liftstop.lift import TokenRecord


def records_from_pairs(pairs, **common):
    """Build a stream from (full_prob, skeleton_prob) pairs."""
    return [
        TokenRecord(index=i + 1, full_prob=p, skeleton_prob=s, **common)
        for i, (p, s) in enumerate(pairs)
    ]


def run_cli(argv):
    """Invoke the CLI in-process, capturing stdout/stderr.

    Returns (exit_code, stdout_text, stderr_text).
    """
    from liftstop.cli import main

    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()
