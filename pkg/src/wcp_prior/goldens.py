"""Golden density tables: one CSV + JSON sidecar per catalog family, plus digests.json."""

from __future__ import annotations

import hashlib
import logging
from pathlib import Path

from pydantic import BaseModel, ConfigDict

from . import io
from .catalog import CATALOG, DensityTable, density_table, get_entry
from .errors import ConfigurationError, NondeterminismError

logger = logging.getLogger(__name__)

DIGESTS = "digests.json"
COMMAND = "python scripts/regenerate_goldens.py"


class GoldenRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: str
    config_hash: str
    table_digest: str
    command: str = COMMAND


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def config_hash(family: str) -> str:
    entry = get_entry(family)
    return _sha256(io.dumps({"family": family, "hyperparameters": entry.resolve(entry.golden)}))


def _build(family: str) -> tuple[DensityTable, str]:
    table = density_table(family, get_entry(family).golden)
    return table, io.table_text(table.header, table.rows.tolist())


def build_record(family: str) -> tuple[GoldenRecord, DensityTable, str]:
    """Build a family's golden table twice; differing builds are a hard failure."""
    table, text = _build(family)
    _, again = _build(family)
    digest = _sha256(text)
    if _sha256(again) != digest:
        raise NondeterminismError(f"golden table for '{family}' differs between two consecutive builds")
    return GoldenRecord(family=family, config_hash=config_hash(family), table_digest=digest), table, text


def regenerate_goldens(directory: str | Path, families: list[str] | None = None) -> dict[str, GoldenRecord]:
    """Rebuild golden tables under ``directory`` and rewrite the digest list."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = sorted(CATALOG) if families is None else sorted(families)
    path = directory / DIGESTS
    records = {
        name: GoldenRecord.model_validate(raw) for name, raw in (io.read_json(path) if path.exists() else {}).items()
    }
    for name in names:
        record, table, text = build_record(name)
        csv_path = directory / f"{name}.csv"
        csv_path.write_text(text)
        io.write_sidecar(csv_path, table.provenance, stamp=False)
        records[name] = record
        logger.info("golden %s: %d rows, digest %s", name, len(table.rows), record.table_digest[:12])
    io.write_json(path, {name: record.model_dump() for name, record in sorted(records.items())})
    return records


def check_goldens(directory: str | Path) -> list[str]:
    """Problems found when comparing committed goldens with fresh builds (empty when clean)."""
    directory = Path(directory)
    path = directory / DIGESTS
    if not path.exists():
        raise ConfigurationError(f"no {DIGESTS} under {directory}")
    stored = {name: GoldenRecord.model_validate(raw) for name, raw in io.read_json(path).items()}
    problems = []
    for name in sorted(set(CATALOG) - set(stored)):
        problems.append(f"{name}: catalog family has no golden table")
    for name in sorted(set(stored) - set(CATALOG)):
        problems.append(f"{name}: golden table for a family not in the catalog")
    for name in sorted(set(stored) & set(CATALOG)):
        record = stored[name]
        if record.config_hash != config_hash(name):
            problems.append(f"{name}: pinned hyperparameters changed without a digest update")
            continue
        fresh, _, text = build_record(name)
        if fresh.table_digest != record.table_digest:
            problems.append(f"{name}: table digest {fresh.table_digest[:12]} != stored {record.table_digest[:12]}")
        csv_path = directory / f"{name}.csv"
        if not csv_path.exists() or csv_path.read_text() != text:
            problems.append(f"{name}: {csv_path.name} does not match a fresh build")
    return problems
