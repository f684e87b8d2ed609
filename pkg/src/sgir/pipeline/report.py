import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List

from sgir.errors import NonFiniteGradient


@dataclass
class LossReport:
    """Per-step named losses and gradient norms of one stage."""
    stage: str
    rows: List[Dict[str, float]] = field(default_factory=list)

    def record(self, epoch, step, losses, grad_norm):
        row = {"epoch": epoch, "step": step}
        for name, value in losses.items():
            row[name] = float(value)
        row["grad_norm"] = float(grad_norm)
        bad = [k for k, v in row.items() if not math.isfinite(v)]
        if bad:
            raise NonFiniteGradient(f"{self.stage}: non-finite {', '.join(bad)} at step {step}")
        self.rows.append(row)
        return row

    @property
    def steps(self):
        return len(self.rows)

    def names(self):
        seen = []
        for row in self.rows:
            for key in row:
                if key not in ("epoch", "step") and key not in seen:
                    seen.append(key)
        return seen

    def running_mean(self, name, window=None):
        values = [row[name] for row in self.rows if name in row]
        if window:
            values = values[-window:]
        return sum(values) / len(values) if values else math.nan

    def epoch_means(self, name="total"):
        sums = {}
        for row in self.rows:
            if name in row:
                total, count = sums.get(row["epoch"], (0.0, 0))
                sums[row["epoch"]] = (total + row[name], count + 1)
        return [sums[e][0] / sums[e][1] for e in sorted(sums)]

    def last(self, name="total"):
        for row in reversed(self.rows):
            if name in row:
                return row[name]
        return math.nan

    def to_csv(self, path):
        columns = ["epoch", "step", *self.names()]
        with open(path, "w", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=columns)
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row)
