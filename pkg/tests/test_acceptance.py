"""Acceptance criteria 1-11; one PASS/FAIL line per criterion in the summary."""

import subprocess
import sys
from pathlib import Path

import pytest

import acceptance_core as core
from freewalk.provenance import canonical_json

_details: dict = {}


@pytest.mark.parametrize("k", range(1, 11))
def test_criterion(k, record_criterion):
    ok, detail = core.CRITERIA[k]()
    _details[k] = {"ok": ok, "detail": core.strip_timing(detail)}
    record_criterion(k, ok, canonical_json(detail))
    assert ok, detail


def test_criterion_11_determinism(record_criterion):
    script = Path(__file__).with_name("acceptance_core.py")
    runs = [
        subprocess.run([sys.executable, str(script), "--digest"], capture_output=True, text=True, check=True).stdout
        for _ in range(2)
    ]
    same_fresh = runs[0] == runs[1]
    here = canonical_json({str(k): v for k, v in sorted(_details.items())}) + "\n" if len(_details) == 10 else None
    same_here = here is None or here == runs[0]
    detail = {
        "fresh_runs_identical": same_fresh,
        "matches_in_process": same_here if here is not None else "skipped",
        "seed": core.SEED,
        "threads": core.THREADS,
        "digest_bytes": len(runs[0]),
    }
    record_criterion(11, same_fresh and same_here, canonical_json(detail))
    assert same_fresh and same_here


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
