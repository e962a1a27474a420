"""Fine-tunes a causal code model on cwescan instance JSONL and serves it
over the native streaming completion protocol."""

from .data import DataError, load_instances
from .prompt import assemble_prompt

__all__ = ["DataError", "assemble_prompt", "load_instances"]
