"""Run-directory layout, the run manifest, and atomic artifact I/O.

A run directory is created by the first stage and carries a manifest with
a digest computed once, at creation, over the corpus digest and the
creation-stage config. Every artifact written afterwards references that
digest (CSV/SVG/markdown as a leading comment, JSONL as a ``manifest``
field on each record), so any artifact can be traced to its run. Stage
parameters recorded later never move the digest; re-running a stage with
different parameters than the manifest recorded is a config conflict.

All writes go through a temp file and an atomic rename.
"""
from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable

from .errors import StageError

STAGES = ["neutralize", "generate", "analyze", "attribute", "debias", "report"]

MANIFEST_FILE = "manifest"
NEUTRAL_FILE = "neutral.jsonl"
PROMPTS_FILE = "prompts.jsonl"
GENERATIONS_FILE = "generations.jsonl"
ANALYSIS_DIR = "analysis"
ATTRIBUTION_FILE = "attribution.jsonl"
DEBIAS_FILE = "debias.jsonl"
DEBIAS_SUMMARY_FILE = "debias_summary.csv"
REPORT_DIR = "report"

# The artifact each stage must leave behind for its successor.
STAGE_ARTIFACTS = {
    "neutralize": NEUTRAL_FILE,
    "generate": GENERATIONS_FILE,
    "analyze": f"{ANALYSIS_DIR}/regard_diff.csv",
    "attribute": ATTRIBUTION_FILE,
    "debias": DEBIAS_FILE,
}

EXIT_MISSING_PREDECESSOR = 2
EXIT_CONFIG_CONFLICT = 3


def fmt_float(x: float) -> str:
    """Exactly six decimals; negative zero normalized."""
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path: Path, records: Iterable[dict], digest: str) -> None:
    lines = []
    for rec in records:
        tagged = dict(rec)
        tagged["manifest"] = digest
        lines.append(json.dumps(tagged, ensure_ascii=False, sort_keys=True))
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_jsonl(path: Path) -> list[dict]:
    records = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(json.loads(line))
    return records


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable[str]], digest: str) -> None:
    lines = [f"# manifest: {digest}", ",".join(header)]
    lines.extend(",".join(str(cell) for cell in row) for row in rows)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    lines = [l for l in path.read_text(encoding="utf-8").splitlines()
             if l and not l.startswith("#")]
    header = lines[0].split(",")
    return header, [l.split(",") for l in lines[1:]]


class RunManifest:
    def __init__(self, run_dir: str | Path, data: dict):
        self.run_dir = Path(run_dir)
        self.data = data

    # -- creation / loading -------------------------------------------------

    @classmethod
    def create(cls, run_dir: str | Path, corpus_digest: str,
               stage_config: dict) -> "RunManifest":
        digest = hashlib.sha256(_canonical(
            {"corpus_digest": corpus_digest, "neutralize": stage_config}
        ).encode("utf-8")).hexdigest()
        data = {
            "digest": digest,
            "created_at": _now(),
            "corpus_digest": corpus_digest,
            "config": {"neutralize": stage_config},
            "backends": {},
            "stages": {},
        }
        manifest = cls(run_dir, data)
        manifest.save()
        return manifest

    @classmethod
    def load(cls, run_dir: str | Path, stage: str) -> "RunManifest":
        path = Path(run_dir) / MANIFEST_FILE
        if not path.is_file():
            raise StageError(
                f"stage '{stage}' requires a run directory initialized by "
                f"'neutralize' (no manifest in {run_dir})",
                EXIT_MISSING_PREDECESSOR)
        return cls(run_dir, json.loads(path.read_text(encoding="utf-8")))

    def save(self) -> None:
        atomic_write_text(self.run_dir / MANIFEST_FILE,
                          json.dumps(self.data, indent=2, sort_keys=True) + "\n")

    # -- accessors -----------------------------------------------------------

    @property
    def digest(self) -> str:
        return self.data["digest"]

    def path(self, name: str) -> Path:
        return self.run_dir / name

    def stage_config(self, stage: str) -> dict | None:
        return self.data["config"].get(stage)

    # -- stage gating ---------------------------------------------------------

    def require_predecessor(self, stage: str) -> None:
        idx = STAGES.index(stage)
        if idx == 0:
            return
        predecessor = STAGES[idx - 1]
        if predecessor not in self.data["stages"]:
            raise StageError(
                f"stage '{stage}' requires completed stage '{predecessor}'",
                EXIT_MISSING_PREDECESSOR)
        artifact = STAGE_ARTIFACTS[predecessor]
        if not (self.run_dir / artifact).is_file():
            raise StageError(
                f"stage '{stage}' requires {artifact} from stage "
                f"'{predecessor}', which is missing",
                EXIT_MISSING_PREDECESSOR)

    def check_config(self, stage: str, config: dict) -> None:
        recorded = self.data["config"].get(stage)
        if recorded is not None and recorded != config:
            changed = sorted(
                k for k in set(recorded) | set(config)
                if recorded.get(k) != config.get(k))
            raise StageError(
                f"stage '{stage}' config conflicts with the run manifest "
                f"(changed: {', '.join(changed)})",
                EXIT_CONFIG_CONFLICT)

    def record_stage(self, stage: str, config: dict,
                     backends: dict | None = None) -> None:
        self.check_config(stage, config)
        self.data["config"][stage] = config
        if backends:
            self.data["backends"].update(backends)
        self.data["stages"][stage] = {"completed_at": _now()}
        self.save()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
