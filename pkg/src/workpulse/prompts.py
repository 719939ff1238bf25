"""Prompt catalog: versioned text assets loaded at startup, checksums logged."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType

logger = logging.getLogger(__name__)

DEFAULT_PROMPT_DIR = Path(__file__).parent / "assets"

ASSET_FILES = {
    "egocentric_caption": "egocentric_caption.txt",
    "screen_caption": "screen_caption.txt",
    "insight_extraction": "insight_extraction.txt",
    "insight_fewshots": "insight_fewshots.txt",
    "intervention": "intervention.txt",
    "intervention_fewshots": "intervention_fewshots.txt",
    "chat_tone": "chat_tone.txt",
    "action_extraction": "action_extraction.txt",
    "transcription": "transcription.txt",
}

PRE_FRAME_PLACEHOLDER = "{pre_frame_act}"


@dataclass(frozen=True)
class PromptCatalog:
    texts: MappingProxyType
    checksums: MappingProxyType

    def __getitem__(self, name: str) -> str:
        return self.texts[name]


def load_catalog(prompt_dir: str | Path | None = None) -> PromptCatalog:
    """Load every prompt asset from ``prompt_dir`` (package default otherwise)."""
    base = Path(prompt_dir) if prompt_dir else DEFAULT_PROMPT_DIR
    texts, sums = {}, {}
    for name, fname in ASSET_FILES.items():
        text = (base / fname).read_text(encoding="utf-8")
        texts[name] = text
        sums[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()
        logger.info("prompt asset %s sha256=%s", fname, sums[name])
    return PromptCatalog(texts=MappingProxyType(texts), checksums=MappingProxyType(sums))


def fill_previous_activity(template: str, prev_activity: str | None) -> str:
    """Substitute the previous-activity placeholder; absent maps to "none"."""
    return template.replace(PRE_FRAME_PLACEHOLDER, prev_activity if prev_activity else "none")
