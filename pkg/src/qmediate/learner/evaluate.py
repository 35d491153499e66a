"""Per-sample outcomes and mediators of a trained arm on the test split."""

from dataclasses import dataclass
import csv
from pathlib import Path

import numpy as np

from ..errors import IngestionError, ShapeError
from ..qinfo import Bipartition, compute_mediators
from ..simulator import batch_states, z0_values

COLUMNS = ("sample_id", "t", "S_A", "gamma_A", "L_A", "I_AB", "p", "Y_dir", "y_true")
MEDIATORS = ("S_A", "gamma_A", "L_A", "I_AB")


def directional(p, y):
    """Probability mass the model puts on the true class."""
    p = np.asarray(p, dtype=float)
    return np.where(np.asarray(y) == 1, p, 1.0 - p)


@dataclass
class ArmEvaluation:
    t: int
    sample_id: np.ndarray
    p: np.ndarray
    y_dir: np.ndarray
    mediators: np.ndarray  # (samples, 4) in MEDIATORS order
    y_true: np.ndarray
    s_ab: np.ndarray = None

    def __len__(self):
        return len(self.sample_id)

    @property
    def max_s_ab(self) -> float:
        return float(np.max(self.s_ab)) if self.s_ab is not None and len(self.s_ab) else 0.0

    def rows(self):
        for i in range(len(self)):
            yield (int(self.sample_id[i]), int(self.t), *map(float, self.mediators[i]),
                   float(self.p[i]), float(self.y_dir[i]), int(self.y_true[i]))

    def to_csv(self, path, header: bool = True, mode: str = "w"):
        with Path(path).open(mode, newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if header:
                w.writerow(COLUMNS)
            for row in self.rows():
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])

    @classmethod
    def from_rows(cls, t, rows) -> "ArmEvaluation":
        rows = sorted(rows, key=lambda r: r[0])
        a = np.array([r[2:] for r in rows], dtype=float).reshape(-1, 7)
        return cls(
            t=int(t),
            sample_id=np.array([r[0] for r in rows], dtype=int),
            mediators=a[:, 0:4],
            p=a[:, 4],
            y_dir=a[:, 5],
            y_true=a[:, 6].astype(int),
        )


def read_evaluation_csv(path):
    """Rows of an evaluation/paired CSV grouped by arm: ``{t: ArmEvaluation}``."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in ("sample_id", "t", *MEDIATORS, "Y_dir", "y_true") if c not in (reader.fieldnames or [])]
            if missing:
                raise IngestionError(f"{path} is missing columns {missing}")
            by_arm = {}
            for r, row in enumerate(reader, start=1):
                try:
                    t = int(row["t"])
                    rec = (
                        int(row["sample_id"]), t,
                        *(float(row[m]) for m in MEDIATORS),
                        float(row["p"]) if row.get("p") not in (None, "") else float("nan"),
                        float(row["Y_dir"]),
                        int(float(row["y_true"])),
                    )
                except (TypeError, ValueError) as exc:
                    raise IngestionError(f"{path} row {r}: {exc}") from None
                if t not in (0, 1):
                    raise IngestionError(f"{path} row {r}: t must be 0 or 1, got {t}")
                by_arm.setdefault(t, []).append(rec)
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    return {t: ArmEvaluation.from_rows(t, rows) for t, rows in by_arm.items()}


def evaluate_arm(model, X, y, part: Bipartition | None = None, sample_ids=None, t: int | None = None) -> ArmEvaluation:
    """Run ``model`` on every test row and collect p, Y_dir and the four mediators."""
    spec = model.spec
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[1] != spec.n_qubits or len(X) != len(y):
        raise ShapeError(f"test data {X.shape} / {y.shape} do not fit a {spec.n_qubits}-qubit model")
    part = part or Bipartition.default(spec.n_qubits)
    states = batch_states(spec, model.theta_star, X)[0]
    p = np.clip((1.0 - z0_values(states)) / 2.0, 0.0, 1.0)
    meds = [compute_mediators(s, part) for s in states]
    return ArmEvaluation(
        t=model.arm if t is None else int(t),
        sample_id=np.arange(len(y)) if sample_ids is None else np.asarray(sample_ids, dtype=int),
        p=p,
        y_dir=directional(p, y),
        mediators=np.array([m.as_array() for m in meds]).reshape(-1, 4),
        y_true=y,
        s_ab=np.array([m.S_AB for m in meds]),
    )
