"""Paired (t=0, t=1) observations per test sample."""

from dataclasses import dataclass
import csv
from pathlib import Path

import numpy as np

from ..errors import IngestionError, PairingError

MEDIATORS = ("S_A", "gamma_A", "L_A", "I_AB")
CSV_COLUMNS = ("sample_id", "t", "S_A", "gamma_A", "L_A", "I_AB", "p", "Y_dir", "y_true")
REQUIRED = ("sample_id", "t", "S_A", "gamma_A", "L_A", "I_AB", "Y_dir", "y_true")


@dataclass
class PairedObservations:
    """Column-oriented store of ``(M0, Y0, M1, Y1)`` for N samples, ordered by sample id."""

    sample_id: np.ndarray
    M0: np.ndarray
    Y0: np.ndarray
    M1: np.ndarray
    Y1: np.ndarray
    y_true: np.ndarray = None
    p0: np.ndarray = None
    p1: np.ndarray = None

    def __post_init__(self):
        self.sample_id = np.asarray(self.sample_id, dtype=int)
        n = len(self.sample_id)
        self.M0 = np.asarray(self.M0, dtype=float).reshape(n, 4)
        self.M1 = np.asarray(self.M1, dtype=float).reshape(n, 4)
        self.Y0 = np.asarray(self.Y0, dtype=float).reshape(n)
        self.Y1 = np.asarray(self.Y1, dtype=float).reshape(n)
        if self.y_true is None:
            self.y_true = np.zeros(n, dtype=int)
        self.y_true = np.asarray(self.y_true, dtype=int).reshape(n)
        for name in ("p0", "p1"):
            v = getattr(self, name)
            setattr(self, name, np.full(n, np.nan) if v is None else np.asarray(v, dtype=float).reshape(n))
        if len(np.unique(self.sample_id)) != n:
            raise PairingError("duplicate sample ids")

    def __len__(self):
        return len(self.sample_id)

    @property
    def delta_y(self) -> np.ndarray:
        return self.Y1 - self.Y0

    @property
    def delta_m(self) -> np.ndarray:
        return self.M1 - self.M0

    def subset(self, idx) -> "PairedObservations":
        idx = np.asarray(idx, dtype=int)
        return PairedObservations(self.sample_id[idx], self.M0[idx], self.Y0[idx], self.M1[idx], self.Y1[idx],
                                  self.y_true[idx], self.p0[idx], self.p1[idx])

    def resample(self, idx) -> "PairedObservations":
        """Rows ``idx`` drawn with replacement; repeated samples get fresh sequential ids."""
        idx = np.asarray(idx, dtype=int)
        return PairedObservations(np.arange(len(idx)), self.M0[idx], self.Y0[idx], self.M1[idx], self.Y1[idx],
                                  self.y_true[idx], self.p0[idx], self.p1[idx])

    def stacked(self):
        """Pooled 2N-row view: ``(t, M, Y, cluster)`` with all t=0 rows first."""
        n = len(self)
        t = np.concatenate([np.zeros(n), np.ones(n)])
        M = np.vstack([self.M0, self.M1])
        Y = np.concatenate([self.Y0, self.Y1])
        cluster = np.concatenate([np.arange(n), np.arange(n)])
        return t, M, Y, cluster

    @classmethod
    def from_arms(cls, arm0, arm1) -> "PairedObservations":
        """Join two :class:`~qmediate.learner.evaluate.ArmEvaluation` objects on sample id."""
        ids0, ids1 = set(map(int, arm0.sample_id)), set(map(int, arm1.sample_id))
        _check_pairs(ids0, ids1)
        o0 = np.argsort(arm0.sample_id)
        o1 = np.argsort(arm1.sample_id)
        if not np.array_equal(arm0.y_true[o0], arm1.y_true[o1]):
            raise PairingError("arms disagree on true labels for some samples")
        return cls(arm0.sample_id[o0], arm0.mediators[o0], arm0.y_dir[o0], arm1.mediators[o1], arm1.y_dir[o1],
                   arm0.y_true[o0], arm0.p[o0], arm1.p[o1])

    @classmethod
    def from_csv(cls, path) -> "PairedObservations":
        path = Path(path)
        try:
            with path.open(newline="") as fh:
                reader = csv.DictReader(fh)
                missing = [c for c in REQUIRED if c not in (reader.fieldnames or [])]
                if missing:
                    raise IngestionError(f"{path} is missing columns {missing}")
                arms = {0: {}, 1: {}}
                for r, row in enumerate(reader, start=1):
                    try:
                        sid, t = int(row["sample_id"]), int(row["t"])
                        rec = ([float(row[m]) for m in MEDIATORS], float(row["Y_dir"]), int(float(row["y_true"])),
                               float(row["p"]) if row.get("p") not in (None, "") else float("nan"))
                    except (TypeError, ValueError) as exc:
                        raise IngestionError(f"{path} row {r}: {exc}") from None
                    if t not in arms:
                        raise IngestionError(f"{path} row {r}: t must be 0 or 1, got {t}")
                    if not all(np.isfinite(rec[0])) or not np.isfinite(rec[1]):
                        raise IngestionError(f"{path} row {r}: non-finite mediator or outcome")
                    if sid in arms[t]:
                        raise PairingError(f"sample {sid} appears twice in arm t={t}")
                    arms[t][sid] = rec
        except OSError as exc:
            raise IngestionError(f"cannot read {path}: {exc}") from exc
        _check_pairs(set(arms[0]), set(arms[1]))
        ids = sorted(arms[0])
        a0 = [arms[0][i] for i in ids]
        a1 = [arms[1][i] for i in ids]
        return cls(ids, [r[0] for r in a0], [r[1] for r in a0], [r[0] for r in a1], [r[1] for r in a1],
                   [r[2] for r in a0], [r[3] for r in a0], [r[3] for r in a1])

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for t, M, Y, p in ((0, self.M0, self.Y0, self.p0), (1, self.M1, self.Y1, self.p1)):
                for i in range(len(self)):
                    w.writerow([int(self.sample_id[i]), t, *(repr(float(v)) for v in M[i]),
                                repr(float(p[i])), repr(float(Y[i])), int(self.y_true[i])])


def _check_pairs(ids0, ids1):
    only0 = sorted(ids0 - ids1)
    only1 = sorted(ids1 - ids0)
    if only0 or only1:
        parts = []
        if only0:
            parts.append(f"missing arm t=1 for samples {only0}")
        if only1:
            parts.append(f"missing arm t=0 for samples {only1}")
        raise PairingError("unpaired samples: " + "; ".join(parts))
    if not ids0:
        raise PairingError("no paired samples")
