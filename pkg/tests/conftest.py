from __future__ import annotations

import sys
from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"

sys.path.insert(0, str(Path(__file__).parent))


def corpus_files() -> list[Path]:
    return sorted((FIXTURES / "solutions").glob("*.txt"))
