import hashlib
import logging
import math
from typing import Iterable, List, Optional

from rich.console import Console
from rich.logging import RichHandler


def setup_logging(log_file: Optional[str] = None, level: int = logging.INFO):
    """Sets up logging configuration."""
    handlers: List[logging.Handler] = [RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)]
    if log_file:
        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(name)s - %(message)s'))
        handlers.append(file_handler)

    logging.basicConfig(
        level=level,
        format='%(message)s',
        handlers=handlers,
        force=True,
    )


def fmt17(value: float) -> str:
    """Decimal text that round-trips a double exactly."""
    return f"{float(value):.17g}"


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance between two tokens."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


def close_tokens(token: str, candidates: Iterable[str], max_distance: int = 2) -> List[str]:
    """Candidates within ``max_distance`` edits, nearest first then alphabetical."""
    scored = [(edit_distance(token, c), c) for c in candidates]
    return [c for dist, c in sorted(scored) if dist <= max_distance]


def relative_change(current: float, previous: float) -> float:
    if not math.isfinite(previous) or previous == 0:
        return math.inf
    return abs(current - previous) / abs(previous)
