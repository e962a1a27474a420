"""Strict reader for the instance JSONL schema."""

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

LABEL = re.compile(r"^(Secure|Vulnerable - CWE-[1-9][0-9]*)$")
CWE = re.compile(r"^CWE-[1-9][0-9]*$")
REQUIRED = ("instruction", "input", "output")
OPTIONAL = ("cwe",)


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Instance:
    instruction: str
    input: str
    output: str
    cwe: Optional[str] = None


@dataclass(frozen=True)
class Dataset:
    instances: List[Instance]
    digest: str  # sha256 of the file bytes
    instruction: str


def _parse_line(text: str) -> Instance:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise DataError(f"not JSON ({e.msg})") from None
    if not isinstance(obj, dict):
        raise DataError("not a JSON object")
    unknown = sorted(set(obj) - set(REQUIRED) - set(OPTIONAL))
    if unknown:
        raise DataError("unknown field(s) " + ", ".join(unknown))
    for key in REQUIRED:
        if not isinstance(obj.get(key), str):
            raise DataError(f"field '{key}' missing or not a string")
    if not obj["instruction"].strip():
        raise DataError("instruction is empty")
    if not obj["input"].strip():
        raise DataError("input is empty")
    if not LABEL.match(obj["output"]):
        raise DataError(f"output {obj['output']!r} is not a strict label")
    cwe = obj.get("cwe")
    if cwe is not None and (not isinstance(cwe, str) or not CWE.match(cwe)):
        raise DataError("cwe must look like CWE-<n>")
    if cwe is not None and obj["output"] != "Secure" and obj["output"] != "Vulnerable - " + cwe:
        raise DataError("cwe field disagrees with the output label")
    return Instance(obj["instruction"], obj["input"], obj["output"], cwe)


def load_instances(path) -> Dataset:
    """Every row must parse and all rows must share one instruction. Errors name line numbers."""
    path = Path(path)
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise DataError(f"{path}: not valid UTF-8 at byte {e.start}") from None
    instances, problems = [], []
    for number, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            instances.append(_parse_line(line))
        except DataError as e:
            problems.append(f"line {number}: {e}")
    if problems:
        shown = "; ".join(problems[:10]) + (f"; ... {len(problems) - 10} more" if len(problems) > 10 else "")
        raise DataError(f"{path}: {len(problems)} unparseable row(s): {shown}")
    if not instances:
        raise DataError(f"{path}: no instances")
    instructions = {i.instruction for i in instances}
    if len(instructions) > 1:
        first = instances[0].instruction
        line = next(n for n, i in enumerate(instances, start=1) if i.instruction != first)
        raise DataError(
            f"{path}: {len(instructions)} distinct instructions (first difference at instance {line}); "
            "training data must use one instruction"
        )
    return Dataset(instances, hashlib.sha256(raw).hexdigest(), instances[0].instruction)
