"""Model wrappers behind one small interface: encode, forward, save/load, and
incremental greedy decoding.

"tiny-byte-transformer" is a byte-level causal transformer stand-in used for smoke tests.
"hf:<name-or-path>" loads a Hugging Face causal LM (e.g. a 350M code model);
that path needs the optional `transformers` dependency.
"""

import json
from pathlib import Path
from typing import Iterator, List

import torch
from torch import nn

TINY = "tiny-byte-transformer"
TINY_DEFAULTS = {"dim": 128, "layers": 2, "heads": 4, "context": 2048}


class ArtifactError(RuntimeError):
    pass


class _ByteTransformer(nn.Module):
    def __init__(self, dim: int, layers: int, heads: int, context: int):
        super().__init__()
        self.context = context
        self.embed = nn.Embedding(257, dim)
        self.pos = nn.Embedding(context, dim)
        block = nn.TransformerEncoderLayer(dim, heads, 4 * dim, dropout=0.0, batch_first=True, norm_first=True)
        self.blocks = nn.TransformerEncoder(block, layers, enable_nested_tensor=False)
        self.norm = nn.LayerNorm(dim)
        self.head = nn.Linear(dim, 257)

    def forward(self, ids, pad_mask=None):
        n = ids.size(1)
        if n > self.context:
            raise ValueError(f"sequence of {n} bytes exceeds the model context of {self.context}")
        causal = torch.triu(torch.full((n, n), float("-inf")), diagonal=1)
        x = self.embed(ids) + self.pos(torch.arange(n))
        x = self.blocks(x, mask=causal, src_key_padding_mask=pad_mask)
        return self.head(self.norm(x))


class TinyByteModel:
    kind = TINY
    eos_id = 256

    def __init__(self, options: dict):
        self.options = {**TINY_DEFAULTS, **options}
        o = self.options
        self.net = _ByteTransformer(o["dim"], o["layers"], o["heads"], o["context"])

    def encode(self, text: str) -> List[int]:
        return list(text.encode("utf-8"))

    def decode(self, ids: List[int]) -> str:
        return bytes(i for i in ids if i < 256).decode("utf-8", errors="replace")

    def parameters(self):
        return self.net.parameters()

    def train_mode(self, on: bool):
        self.net.train(on)

    def logits(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        # Padding sits to the right of every real token, so the causal mask already hides it.
        del mask
        return self.net(ids)

    @torch.no_grad()
    def generate_ids(self, prompt: str, max_new_tokens: int) -> Iterator[int]:
        ids = self.encode(prompt)
        for _ in range(max_new_tokens):
            if len(ids) >= self.net.context:
                return
            nxt = int(self.net(torch.tensor([ids], dtype=torch.long))[0, -1].argmax())
            if nxt == self.eos_id:
                return
            yield nxt
            ids.append(nxt)

    def save(self, out: Path):
        torch.save(self.net.state_dict(), out / "weights.pt")
        return {"kind": self.kind, "options": self.options}

    @classmethod
    def load(cls, out: Path, spec: dict):
        model = cls(spec.get("options", {}))
        model.net.load_state_dict(torch.load(out / "weights.pt", map_location="cpu", weights_only=True))
        model.net.eval()
        return model


class HfModel:
    kind = "hf"

    def __init__(self, name: str):
        try:
            from transformers import AutoModelForCausalLM, AutoTokenizer
        except ImportError as e:  # pragma: no cover - optional dependency
            raise ArtifactError("hf: models need the 'transformers' package") from e
        self.name = name
        self.tokenizer = AutoTokenizer.from_pretrained(name)
        self.net = AutoModelForCausalLM.from_pretrained(name)
        self.eos_id = self.tokenizer.eos_token_id
        self.options = {"name": name}

    def encode(self, text: str) -> List[int]:
        return self.tokenizer(text, add_special_tokens=False)["input_ids"]

    def decode(self, ids: List[int]) -> str:
        return self.tokenizer.decode(ids, skip_special_tokens=True)

    def parameters(self):
        return self.net.parameters()

    def train_mode(self, on: bool):
        self.net.train(on)

    def logits(self, ids, mask):
        return self.net(input_ids=ids, attention_mask=mask).logits

    @torch.no_grad()
    def generate_ids(self, prompt: str, max_new_tokens: int) -> Iterator[int]:
        ids = torch.tensor([self.encode(prompt)], dtype=torch.long)
        past = None
        step = ids
        for _ in range(max_new_tokens):
            out = self.net(input_ids=step, past_key_values=past, use_cache=True)
            past = out.past_key_values
            nxt = int(out.logits[0, -1].argmax())
            if nxt == self.eos_id:
                return
            yield nxt
            step = torch.tensor([[nxt]], dtype=torch.long)

    def save(self, out: Path):
        self.net.save_pretrained(out / "hf")
        self.tokenizer.save_pretrained(out / "hf")
        return {"kind": self.kind, "options": self.options}

    @classmethod
    def load(cls, out: Path, spec: dict):
        model = cls(str(out / "hf"))
        model.net.eval()
        return model


def create(base_model: str, options: dict):
    if base_model == TINY:
        return TinyByteModel(options)
    if base_model.startswith("hf:"):
        return HfModel(base_model[3:])
    raise ValueError(f"unknown base model '{base_model}' (expected {TINY} or hf:<name>)")


def load(artifact: Path):
    artifact = Path(artifact)
    spec_path = artifact / "model.json"
    if not spec_path.is_file():
        raise ArtifactError(f"{artifact}: model.json missing; not a trainer artifact")
    try:
        spec = json.loads(spec_path.read_text(encoding="utf-8"))
        if spec.get("kind") == TINY:
            return TinyByteModel.load(artifact, spec)
        if spec.get("kind") == "hf":
            return HfModel.load(artifact, spec)
    except ArtifactError:
        raise
    except Exception as e:
        raise ArtifactError(f"{artifact}: cannot load model ({e})") from e
    raise ArtifactError(f"{artifact}: unknown model kind {spec.get('kind')!r}")


def stream_text(model, prompt: str, max_new_tokens: int) -> Iterator[str]:
    """Yields decoded text pieces; holds back bytes that do not yet form a full character."""
    ids: List[int] = []
    emitted = ""
    for token in model.generate_ids(prompt, max_new_tokens):
        ids.append(token)
        text = model.decode(ids)
        if text.endswith("�"):
            continue
        if len(text) > len(emitted):
            yield text[len(emitted):]
            emitted = text
    tail = model.decode(ids)
    if len(tail) > len(emitted):
        yield tail[len(emitted):]
