import json
import os
import re
import shutil
import sys
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

FIXTURES = Path(os.environ.get("CWESCAN_FIXTURES", HERE.parent.parent / "tests" / "fixtures"))
INSTRUCTION = (
    "Analyze the following Python code snippet and determine whether it contains one of the "
    "MITRE Top 25 CWE weaknesses. Respond with 'Vulnerable - CWE-<id>' or 'Secure'."
)
TOY_CWES = ["CWE-79", "CWE-78", "CWE-89", "CWE-22", "CWE-502"]


def toy_rows():
    """First generated pair of five CWEs, expanded to 10 instances."""
    rows = []
    for cwe in TOY_CWES:
        text = (FIXTURES / "generation" / cwe / "1.txt").read_text(encoding="utf-8")
        pair = json.loads(re.search(r"\{.*\}", text, re.S).group(0))["pairs"][0]
        rows.append({"instruction": INSTRUCTION, "input": pair["vulnerable"], "output": "Vulnerable - " + cwe, "cwe": cwe})
        rows.append({"instruction": INSTRUCTION, "input": pair["fixed"], "output": "Secure", "cwe": cwe})
    return rows


def write_jsonl(path, rows):
    Path(path).write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")


@pytest.fixture
def toy_file(tmp_path):
    path = tmp_path / "toy-train.jsonl"
    write_jsonl(path, toy_rows())
    return path


@pytest.fixture
def cli():
    path = os.environ.get("CWESCAN_CLI") or shutil.which("cwescan")
    if not path:
        pytest.skip("cwescan binary not available (set CWESCAN_CLI)")
    return path
