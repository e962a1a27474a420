"""Prompt layout shared with the C++ side. Training and serving both go
through assemble_prompt so the bytes match what the evaluator sends."""

import json
from pathlib import Path

INSTRUCTION_PREFIX = "### Instruction:\n"
INPUT_PREFIX = "\n\n### Input:\n"
OUTPUT_PREFIX = "\n\n### Output:\n"
LAYOUT = "<instruction_prefix><instruction><input_prefix><input><output_prefix>"


def layout_document():
    return {
        "schema_version": 1,
        "instruction_prefix": INSTRUCTION_PREFIX,
        "input_prefix": INPUT_PREFIX,
        "output_prefix": OUTPUT_PREFIX,
        "layout": LAYOUT,
    }


def assemble_prompt(instruction: str, code: str) -> str:
    if not code.strip():
        raise ValueError("code input is empty")
    return INSTRUCTION_PREFIX + instruction + INPUT_PREFIX + code + OUTPUT_PREFIX


def check_layout_file(path: Path) -> None:
    """Refuses a dataset whose prompt_layout.json disagrees with this module."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    ours = layout_document()
    for key in ("instruction_prefix", "input_prefix", "output_prefix", "layout"):
        if doc.get(key) != ours[key]:
            raise ValueError(f"{path}: prompt layout field '{key}' differs from the trainer's")
