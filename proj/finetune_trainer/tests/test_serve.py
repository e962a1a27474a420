import http.client
import json

import pytest
from conftest import toy_rows, write_jsonl

from cwescan_trainer.model import ArtifactError
from cwescan_trainer.serve import CompletionServer, load_artifact
from cwescan_trainer.train import TrainConfig, train


@pytest.fixture(scope="module")
def artifact(tmp_path_factory):
    root = tmp_path_factory.mktemp("serve")
    write_jsonl(root / "t.jsonl", toy_rows()[:2])
    cfg = TrainConfig.from_dict(
        {
            "base_model": "tiny-byte-transformer",
            "train_file": str(root / "t.jsonl"),
            "learning_rate": 0.001,
            "batch_size": 2,
            "epochs": 1,
            "output_dir": str(root / "art"),
            "seed": 1,
            "model_options": {"dim": 32, "layers": 1, "heads": 2, "context": 2048},
        }
    )
    train(cfg, log=lambda m: None)
    return root / "art"


@pytest.fixture(scope="module")
def server(artifact):
    srv = CompletionServer(artifact).start()
    yield srv
    srv.stop()


def post(server, body, raw=False):
    conn = http.client.HTTPConnection("127.0.0.1", server.port, timeout=30)
    conn.request("POST", "/complete", body if raw else json.dumps(body), {"Content-Type": "application/json"})
    res = conn.getresponse()
    data = res.read().decode("utf-8")
    conn.close()
    return res, data


def test_artifact_contents(artifact):
    for name in ("model.json", "weights.pt", "prompt_template.json", "run_manifest.json"):
        assert (artifact / name).is_file()
    manifest = json.loads((artifact / "run_manifest.json").read_text())
    assert manifest["config"]["model_options"] == {"dim": 32, "layers": 1, "heads": 2, "context": 2048}
    assert manifest["instances"] == 2
    assert len(manifest["loss_history"]) == 1


def test_streaming_reply_is_ndjson(server):
    res, data = post(server, {"prompt": "### Instruction:\nx\n\n### Input:\ny\n\n### Output:\n", "max_new_tokens": 5})
    assert res.status == 200
    assert res.getheader("Content-Type") == "application/x-ndjson"
    lines = [json.loads(l) for l in data.splitlines() if l]
    assert lines[-1] == {"done": True}
    assert all("token" in l for l in lines[:-1])
    assert len(lines) - 1 <= 5


def test_non_streaming_reply(server):
    res, data = post(server, {"prompt": "abc", "max_new_tokens": 3, "stream": False})
    assert res.status == 200
    assert isinstance(json.loads(data)["text"], str)


@pytest.mark.parametrize(
    "body",
    [b"{not json", b"[1,2]", json.dumps({"max_new_tokens": 3}).encode(), json.dumps({"prompt": "a", "max_new_tokens": 0}).encode()],
)
def test_malformed_requests(server, body):
    res, data = post(server, body, raw=True)
    assert res.status == 400
    assert json.loads(data)["error"]["code"] == "protocol_error"


def test_unsupported_sampling_is_ignored_with_warning(server):
    res, _ = post(server, {"prompt": "a", "max_new_tokens": 2, "sampling": {"temperature": 0.0, "top_p": 0.9}})
    assert res.status == 200
    assert res.getheader("X-Cwescan-Warning") == "ignored sampling field(s): top_p"
    res, _ = post(server, {"prompt": "a", "max_new_tokens": 2, "sampling": {"temperature": 0.0}})
    assert res.getheader("X-Cwescan-Warning") is None


def test_bad_artifacts_fail_at_startup(tmp_path, artifact):
    with pytest.raises(ArtifactError, match="not found"):
        load_artifact(tmp_path / "missing")
    (tmp_path / "empty").mkdir()
    with pytest.raises(ArtifactError, match="prompt_template.json"):
        load_artifact(tmp_path / "empty")
    corrupt = tmp_path / "corrupt"
    corrupt.mkdir()
    for name in ("model.json", "prompt_template.json"):
        (corrupt / name).write_bytes((artifact / name).read_bytes())
    (corrupt / "weights.pt").write_bytes(b"garbage")
    with pytest.raises(ArtifactError, match="cannot load"):
        load_artifact(corrupt)
