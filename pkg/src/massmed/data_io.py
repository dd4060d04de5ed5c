"""CSV ingestion with listwise deletion."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import EmptyDataError, InvalidArgumentError, SchemaError, ValidationError
from .mediation import Dataset, OutcomeKind

__all__ = ["ColumnMapping", "load_csv", "write_csv"]

_MAX_LISTED_ROWS = 20


@dataclass(frozen=True)
class ColumnMapping:
    """Which CSV columns play which role. Mediator and covariate order is kept."""

    outcome: str
    exposure: str
    mediators: tuple[str, ...]
    covariates: tuple[str, ...] = ()
    outcome_kind: OutcomeKind = "continuous"

    def __post_init__(self):
        object.__setattr__(self, "mediators", tuple(self.mediators))
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if not self.mediators:
            raise InvalidArgumentError("mapping needs at least one mediator column")
        if self.outcome_kind not in ("continuous", "binary"):
            raise InvalidArgumentError(f"unknown outcome kind {self.outcome_kind!r}")
        cols = self.columns()
        dupes = sorted({c for c in cols if cols.count(c) > 1})
        if dupes:
            raise InvalidArgumentError(f"column names used more than once in mapping: {dupes}")

    def columns(self) -> list[str]:
        return [self.exposure, self.outcome, *self.mediators, *self.covariates]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mediators"] = list(self.mediators)
        out["covariates"] = list(self.covariates)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnMapping":
        try:
            return cls(
                outcome=d["outcome"],
                exposure=d["exposure"],
                mediators=tuple(d["mediators"]),
                covariates=tuple(d.get("covariates", ())),
                outcome_kind=d.get("outcome_kind", "continuous"),
            )
        except KeyError as exc:
            raise InvalidArgumentError(f"mapping is missing key {exc}") from None

    @classmethod
    def from_json(cls, path) -> "ColumnMapping":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _read_header(path: Path) -> list[str]:
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise SchemaError(f"{path}: no header row")
    return header


def load_csv(path, mapping: ColumnMapping) -> Dataset:
    """Read the mapped columns of a headed, comma-delimited UTF-8 file.

    Rows with an empty or non-numeric mapped cell are dropped; the count is
    stored in ``meta["dropped_rows"]``. For a binary outcome every non-empty
    outcome cell must be exactly ``0`` or ``1``.
    """
    path = Path(path)
    if not path.is_file():
        raise InvalidArgumentError(f"{path}: no such file")
    header = _read_header(path)
    missing = [c for c in mapping.columns() if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")

    raw = pd.read_csv(path, dtype=str, keep_default_na=False, usecols=mapping.columns(),
                      encoding="utf-8")[mapping.columns()]
    raw = raw.apply(lambda s: s.str.strip())
    n_raw = len(raw)

    if mapping.outcome_kind == "binary":
        y = raw[mapping.outcome]
        bad = (y != "") & ~y.isin(["0", "1"])
        if bad.any():
            # 1-based data-row numbers, header excluded
            rows = (np.flatnonzero(bad.to_numpy()) + 1).tolist()
            shown = ", ".join(map(str, rows[:_MAX_LISTED_ROWS]))
            more = f" and {len(rows) - _MAX_LISTED_ROWS} more" if len(rows) > _MAX_LISTED_ROWS else ""
            raise ValidationError(
                f"{path}: binary outcome {mapping.outcome!r} must be 0 or 1; offending rows {shown}{more}"
            )

    # to_numeric only flags bad cells; its fast parser is not correctly rounded
    ok = raw.apply(pd.to_numeric, errors="coerce").notna().to_numpy()
    num = np.where(ok, raw.to_numpy(dtype=str), "nan").astype(float)
    keep = np.isfinite(num).all(axis=1)
    dropped = int(n_raw - keep.sum())
    if not keep.any():
        raise EmptyDataError(f"{path}: no usable rows ({n_raw} read, {dropped} dropped)")
    num = num[keep]

    d, q = len(mapping.mediators), len(mapping.covariates)
    meta = {
        "source": str(path),
        "rows_read": n_raw,
        "dropped_rows": dropped,
        "exposure": mapping.exposure,
        "outcome": mapping.outcome,
        "mediators": list(mapping.mediators),
        "covariates": list(mapping.covariates),
    }
    return Dataset(
        x=np.ascontiguousarray(num[:, 0]),
        y=np.ascontiguousarray(num[:, 1]),
        m=np.ascontiguousarray(num[:, 2:2 + d]),
        z=np.ascontiguousarray(num[:, 2 + d:2 + d + q]),
        kind=mapping.outcome_kind,
        meta=meta,
    )


def write_csv(data: Dataset, path) -> ColumnMapping:
    """Write ``data`` with its own column names and return the matching mapping."""
    meta = data.meta
    mapping = ColumnMapping(
        outcome=meta.get("outcome", "y"),
        exposure=meta.get("exposure", "x"),
        mediators=tuple(data.mediator_names()),
        covariates=tuple(meta.get("covariates") or [f"z{j + 1}" for j in range(data.q)]),
        outcome_kind=data.kind,
    )
    cols = {mapping.exposure: data.x, mapping.outcome: data.y}
    cols.update({name: data.m[:, k] for k, name in enumerate(mapping.mediators)})
    cols.update({name: data.z[:, j] for j, name in enumerate(mapping.covariates)})
    frame = pd.DataFrame(cols)
    if data.kind == "binary":
        frame[mapping.outcome] = frame[mapping.outcome].astype(int)
    frame.to_csv(path, index=False, float_format="%.17g")
    return mapping
