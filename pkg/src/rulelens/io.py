"""Dataset and rule-file I/O.

Datasets arrive as a CSV with a header row plus a sidecar schema file, one
line per feature: ``<name>\\t<c|n>[\\t<comma-separated categories>]``. The
CSV must contain every schema feature plus exactly one extra column, the
binary label. Continuous ranges are observed from the data.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .dataset import FeatureSchema, LabeledDataset, categorical, continuous
from .rules import Rule
from .ruletext import parse_rule


def load_schema_lines(path) -> list[tuple[str, str, tuple[str, ...]]]:
    """Parse the sidecar schema file into (name, kind, categories) triples."""
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2 or parts[1] not in ("c", "n"):
            raise ValueError(f"{path}:{lineno}: expected '<name>\\t<c|n>[\\t<values>]'")
        name, kind = parts[0], parts[1]
        values = tuple(parts[2].split(",")) if kind == "c" and len(parts) > 2 else ()
        if kind == "c" and not values:
            raise ValueError(f"{path}:{lineno}: categorical feature {name!r} needs values")
        out.append((name, kind, values))
    if not out:
        raise ValueError(f"{path}: schema file declares no features")
    return out


def load_dataset(csv_path, schema_path, target_name=None) -> LabeledDataset:
    """Read a labeled dataset; the label column is the one CSV column the
    schema file does not declare."""
    declared = load_schema_lines(schema_path)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{csv_path}: empty file") from None
        raw_rows = [row for row in reader if row]
    names = {name for name, _, _ in declared}
    extra = [c for c in header if c not in names]
    missing = [name for name in names if name not in header]
    if missing:
        raise ValueError(f"{csv_path}: columns missing for features {missing}")
    if len(extra) != 1:
        raise ValueError(
            f"{csv_path}: expected exactly one label column beyond the schema, got {extra}"
        )
    label_col = header.index(extra[0])
    col_of = {name: header.index(name) for name in names}

    feats = []
    for name, kind, values in declared:
        col = [row[col_of[name]] for row in raw_rows]
        if kind == "c":
            seen = set(col) - set(values)
            if seen:
                raise ValueError(f"{csv_path}: unknown categories {sorted(seen)} in {name!r}")
            feats.append(categorical(name, values))
        else:
            numbers = [float(v) for v in col]
            lo = min(numbers) if numbers else 0.0
            hi = max(numbers) if numbers else 0.0
            feats.append(continuous(name, lo, hi))
    schema = FeatureSchema(tuple(feats), target_name=target_name or extra[0])

    rows = []
    labels = []
    for row in raw_rows:
        values = []
        for j, f in enumerate(schema.features):
            raw = row[col_of[f.name]]
            values.append(raw if f.is_categorical else float(raw))
        rows.append(tuple(values))
        lab = row[label_col].strip()
        if lab not in ("0", "1"):
            raise ValueError(f"{csv_path}: label {lab!r} is not binary (0/1)")
        labels.append(int(lab))
    return LabeledDataset(schema, rows, labels)


def load_rules_file(path, schema) -> list[Rule]:
    """Rules, one per line; ``#`` comment lines and blanks are skipped."""
    rules = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rules.append(parse_rule(line, schema))
    return rules


def write_text(path, content: str) -> None:
    """UTF-8, LF newlines: all engine outputs are byte-deterministic."""
    Path(path).write_bytes(content.encode())
