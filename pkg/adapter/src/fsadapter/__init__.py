"""Session recorder: exports per-step hidden states, logits, and mask
bitmaps from a masked-LM checkpoint into the FSDUMP interchange format."""

from .dumpformat import DumpWriter
from .model import ToyMaskedLM, load_checkpoint, make_toy_checkpoint
from .recorder import AdapterConfig, encode_prompt, record_session

__version__ = "0.1.0"
