"""Optional run of an installed ProVerif binary on emitted text."""

from __future__ import annotations

import re
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

_RESULT = re.compile(r"^RESULT (?P<query>.*) (?P<verdict>is true|is false|cannot be proved)\.?\s*$")


@dataclass
class ExternalResult:
    binary: str
    returncode: int
    results: list[tuple[str, str]] = field(default_factory=list)  # (query text, true/false/unknown)
    output: str = ""

    def to_json(self) -> dict:
        return {
            "binary": self.binary,
            "returncode": self.returncode,
            "results": [{"query": q, "result": r} for q, r in self.results],
        }


def parse_results(output: str) -> list[tuple[str, str]]:
    out = []
    for line in output.splitlines():
        m = _RESULT.match(line.strip())
        if m:
            v = {"is true": "true", "is false": "false"}.get(m.group("verdict"), "unknown")
            out.append((m.group("query"), v))
    return out


def run_proverif(binary: str | Path, pv_text: str, timeout: float = 600) -> ExternalResult:
    """Raises ``FileNotFoundError`` when the binary is missing."""
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "model.pv"
        path.write_text(pv_text, encoding="utf-8")
        proc = subprocess.run(
            [str(binary), str(path)], capture_output=True, text=True, timeout=timeout, check=False
        )
    text = proc.stdout + proc.stderr
    return ExternalResult(str(binary), proc.returncode, parse_results(text), text)
