"""Fine-tuning loop. Loss covers only the output label plus end-of-sequence;
the prompt is context."""

import hashlib
import json
import random
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch

from . import model as models
from .data import load_instances
from .prompt import assemble_prompt, check_layout_file, layout_document

REQUIRED_KEYS = ("base_model", "train_file", "learning_rate", "batch_size", "epochs", "output_dir", "seed")


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    base_model: str
    train_file: str
    learning_rate: float
    batch_size: int
    epochs: int
    output_dir: str
    seed: int
    model_options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        missing = [k for k in REQUIRED_KEYS if k not in doc]
        if missing:
            raise ConfigError("missing required setting(s): " + ", ".join(missing))
        unknown = sorted(set(doc) - set(REQUIRED_KEYS) - {"model_options"})
        if unknown:
            raise ConfigError("unknown setting(s): " + ", ".join(unknown))
        cfg = cls(**doc)
        if not (isinstance(cfg.learning_rate, (int, float)) and cfg.learning_rate > 0):
            raise ConfigError("learning_rate must be > 0")
        for name in ("batch_size", "epochs"):
            value = getattr(cfg, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1")
        if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool):
            raise ConfigError("seed must be an integer")
        return cfg

    @classmethod
    def load(cls, path) -> "TrainConfig":
        path = Path(path)
        doc = json.loads(path.read_text(encoding="utf-8"))
        cfg = cls.from_dict(doc)
        # relative paths are relative to the config file
        for name in ("train_file", "output_dir"):
            value = Path(getattr(cfg, name))
            if not value.is_absolute():
                setattr(cfg, name, str((path.parent / value).resolve()))
        return cfg


def _seed_everything(seed: int):
    random.seed(seed)
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)


def _batches(examples, batch_size, rng):
    order = list(range(len(examples)))
    rng.shuffle(order)
    for start in range(0, len(order), batch_size):
        yield [examples[i] for i in order[start:start + batch_size]]


def _collate(batch, pad_id):
    width = max(len(ids) for ids, _ in batch)
    ids = torch.full((len(batch), width), pad_id, dtype=torch.long)
    labels = torch.full((len(batch), width), -100, dtype=torch.long)
    mask = torch.zeros((len(batch), width), dtype=torch.long)
    for row, (seq, prompt_len) in enumerate(batch):
        ids[row, : len(seq)] = torch.tensor(seq)
        mask[row, : len(seq)] = 1
        labels[row, prompt_len : len(seq)] = torch.tensor(seq[prompt_len:])
    return ids, mask, labels


def train(cfg: TrainConfig, log=print) -> dict:
    dataset = load_instances(cfg.train_file)
    layout = Path(cfg.train_file).parent / "prompt_layout.json"
    if layout.is_file():
        check_layout_file(layout)

    _seed_everything(cfg.seed)
    model = models.create(cfg.base_model, cfg.model_options)
    examples = []
    for inst in dataset.instances:
        prompt_ids = model.encode(assemble_prompt(inst.instruction, inst.input))
        target_ids = model.encode(inst.output) + [model.eos_id]
        examples.append((prompt_ids + target_ids, len(prompt_ids)))

    optimizer = torch.optim.AdamW(model.parameters(), lr=cfg.learning_rate, weight_decay=0.0)
    loss_fn = torch.nn.CrossEntropyLoss(ignore_index=-100)
    rng = random.Random(cfg.seed)
    history = []
    started = time.time()
    model.train_mode(True)
    for epoch in range(1, cfg.epochs + 1):
        total, count = 0.0, 0
        for batch in _batches(examples, cfg.batch_size, rng):
            ids, mask, labels = _collate(batch, model.eos_id)
            logits = model.logits(ids, mask)
            # position t predicts token t+1
            loss = loss_fn(logits[:, :-1].reshape(-1, logits.size(-1)), labels[:, 1:].reshape(-1))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += loss.item() * len(batch)
            count += len(batch)
        history.append(total / count)
        log(f"epoch {epoch}/{cfg.epochs} loss {history[-1]:.6f}")
    model.train_mode(False)

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = model.save(out)
    (out / "model.json").write_text(json.dumps(spec, indent=2) + "\n", encoding="utf-8")
    template = {**layout_document(), "instruction": dataset.instruction}
    (out / "prompt_template.json").write_text(json.dumps(template, indent=2) + "\n", encoding="utf-8")

    resolved = asdict(cfg)
    resolved["model_options"] = spec["options"]
    manifest = {
        "schema_version": 1,
        "kind": "train_run",
        "config": resolved,
        "data_digest": dataset.digest,
        "instances": len(dataset.instances),
        "instruction_digest": hashlib.sha256(dataset.instruction.encode("utf-8")).hexdigest(),
        "final_loss": history[-1],
        "loss_history": history,
        "seconds": round(time.time() - started, 3),
        "torch_version": torch.__version__,
        "torch_threads": torch.get_num_threads(),
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest
