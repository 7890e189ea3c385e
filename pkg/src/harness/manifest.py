import hashlib
import json
from pathlib import Path
from typing import Any


def sha256_of_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as f:
        while True:
            block = f.read(1024 * 1024)
            if not block:
                break
            h.update(block)
    return h.hexdigest()


class OutputManifest:
    """
    Record of every file a command writes, with its size and SHA-256, saved
    as ``manifest.json`` in the output directory.

    Usage:
        manifest = OutputManifest(out_dir, command="run", seed=7)
        manifest.add(out_dir / "series.csv")
        manifest.write()
    """

    FILENAME = "manifest.json"

    def __init__(self, out_dir: Path, command: str, **metadata: Any):
        self.out_dir = Path(out_dir)
        self.command = command
        self.metadata = metadata
        self.entries: dict[str, dict[str, Any]] = {}

    def add(self, path: Path) -> None:
        path = Path(path)
        self.entries[path.name] = {
            "sha256": sha256_of_file(path),
            "bytes": path.stat().st_size,
        }

    def write(self) -> Path:
        payload = {
            "command": self.command,
            **self.metadata,
            "files": dict(sorted(self.entries.items())),
        }
        target = self.out_dir / self.FILENAME
        target.write_text(json.dumps(payload, indent=2, default=str), encoding="utf-8")
        return target


def verify_manifest(out_dir: Path) -> list[str]:
    """Names of files whose current hash no longer matches the manifest."""
    out_dir = Path(out_dir)
    data = json.loads((out_dir / OutputManifest.FILENAME).read_text(encoding="utf-8"))
    stale = []
    for name, entry in data["files"].items():
        path = out_dir / name
        if not path.exists() or sha256_of_file(path) != entry["sha256"]:
            stale.append(name)
    return stale
