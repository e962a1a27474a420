import json

import pytest
from conftest import INSTRUCTION, toy_rows, write_jsonl

from cwescan_trainer.data import DataError, load_instances


def test_toy_rows_load(toy_file):
    ds = load_instances(toy_file)
    assert len(ds.instances) == 10
    assert ds.instruction == INSTRUCTION
    assert len(ds.digest) == 64


def test_mixed_instructions_rejected(tmp_path):
    rows = toy_rows()
    rows[3]["instruction"] = INSTRUCTION + " Be brief."
    write_jsonl(tmp_path / "t.jsonl", rows)
    with pytest.raises(DataError, match="2 distinct instructions.*instance 4"):
        load_instances(tmp_path / "t.jsonl")


def test_empty_file_rejected(tmp_path):
    (tmp_path / "t.jsonl").write_text("\n\n")
    with pytest.raises(DataError, match="no instances"):
        load_instances(tmp_path / "t.jsonl")


def test_unparseable_rows_name_their_lines(tmp_path):
    good = json.dumps(toy_rows()[0])
    bad_label = json.dumps({**toy_rows()[0], "output": "vulnerable"})
    lines = [good, "{oops", good, bad_label, json.dumps({**toy_rows()[0], "extra": 1})]
    (tmp_path / "t.jsonl").write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError) as err:
        load_instances(tmp_path / "t.jsonl")
    msg = str(err.value)
    assert "3 unparseable" in msg
    assert "line 2: not JSON" in msg
    assert "line 4: output 'vulnerable'" in msg
    assert "line 5: unknown field(s) extra" in msg


def test_cwe_field_must_agree(tmp_path):
    row = {**toy_rows()[0], "cwe": "CWE-89"}
    write_jsonl(tmp_path / "t.jsonl", [row])
    with pytest.raises(DataError, match="disagrees"):
        load_instances(tmp_path / "t.jsonl")


def test_invalid_utf8(tmp_path):
    (tmp_path / "t.jsonl").write_bytes(b'{"instruction": "\xff"}\n')
    with pytest.raises(DataError, match="UTF-8"):
        load_instances(tmp_path / "t.jsonl")
