import csv
import hashlib
import io
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from pydantic import BaseModel

from app.core.config import settings, VERSION
from app.models.results import ResultRow

logger = logging.getLogger(__name__)

HEADER = ["sweep_param", "sweep_value", "metric", "analytic", "simulated", "stderr", "trials"]


def params_hash(model: BaseModel) -> str:
    """Short sha256 of a model's canonical JSON, for tying a CSV to the parameters behind it."""
    return hashlib.sha256(model.model_dump_json().encode("utf-8")).hexdigest()[:16]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _float(text: str) -> Optional[float]:
    return float(text) if text != "" else None


class ResultsStore:
    """CSV result files under one output directory, one header row each, duplicate rows skipped."""

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = Path(output_dir or settings.OUTPUT_DIR)
        self.existing_keys: Set[Tuple[str, float, str]] = set()

    @staticmethod
    def _key(row: ResultRow) -> Tuple[str, float, str]:
        return row.sweep_param, row.sweep_value, row.metric

    def is_duplicate(self, row: ResultRow) -> bool:
        return self._key(row) in self.existing_keys

    def render(self, rows: Iterable[ResultRow], metadata: Dict[str, object]) -> str:
        self.existing_keys = set()
        buffer = io.StringIO()
        metadata = {"version": VERSION, **metadata}
        for key, value in metadata.items():
            buffer.write(f"# {key}: {value}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(HEADER)
        written = skipped = 0
        for row in rows:
            if self.is_duplicate(row):
                skipped += 1
                logger.warning(f"Skipping duplicate row: {row.metric} at {row.sweep_param}={row.sweep_value}")
                continue
            writer.writerow([_cell(getattr(row, column)) for column in HEADER])
            self.existing_keys.add(self._key(row))
            written += 1
        logger.debug(f"Rendered {written} rows ({skipped} duplicates skipped)")
        return buffer.getvalue()

    def write_csv(self, name: str, rows: Iterable[ResultRow], metadata: Dict[str, object]) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        path = self.output_dir / (name if name.endswith(".csv") else f"{name}.csv")
        text = self.render(rows, metadata)
        path.write_text(text, encoding="utf-8")
        logger.info(f"Wrote {len(self.existing_keys)} rows to {path}")
        return path

    @staticmethod
    def parse(text: str) -> Tuple[Dict[str, str], List[ResultRow]]:
        metadata: Dict[str, str] = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(":")
                metadata[key.strip()] = value.strip()
            elif line:
                body.append(line)
        reader = csv.DictReader(body)
        if reader.fieldnames != HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        rows = []
        for record in reader:
            rows.append(ResultRow(
                sweep_param=record["sweep_param"],
                sweep_value=float(record["sweep_value"]),
                metric=record["metric"],
                analytic=_float(record["analytic"]),
                simulated=_float(record["simulated"]),
                stderr=_float(record["stderr"]),
                trials=int(record["trials"]) if record["trials"] else None,
            ))
        return metadata, rows

    def read_csv(self, path) -> Tuple[Dict[str, str], List[ResultRow]]:
        return self.parse(Path(path).read_text(encoding="utf-8"))

    def list_results(self) -> List[str]:
        if not self.output_dir.exists():
            return []
        return sorted(p.name for p in self.output_dir.glob("*.csv"))

    def write_plot_script(
        self,
        csv_path: Path,
        metrics: Sequence[str],
        title: str,
        xlabel: str,
        ylabel: str,
        x_column: str = "sweep_value",
        y_column: str = "analytic",
        logscale_x: bool = False,
    ) -> Path:
        """A gnuplot command file drawing one series per metric from the CSV; never executed here."""
        columns = {name: i + 1 for i, name in enumerate(HEADER)}
        x, y = columns[x_column], columns[y_column]
        lines = [
            f"# generated by multicast-d2d {VERSION}",
            "set datafile separator ','",
            "set datafile commentschars '#'",
            "set key outside right",
            f"set title '{title}'",
            f"set xlabel '{xlabel}'",
            f"set ylabel '{ylabel}'",
            "set grid",
            "set terminal pngcairo size 900,600",
            f"set output '{csv_path.with_suffix('.png').name}'",
        ]
        if logscale_x:
            lines.append("set logscale x")
        series = []
        for metric in metrics:
            series.append(
                f"'{csv_path.name}' every ::1 using (strcol(3) eq '{metric}' ? ${x} : 1/0):{y} "
                f"with linespoints title '{metric}'"
            )
            if y_column == "analytic":
                series.append(
                    f"'{csv_path.name}' every ::1 using (strcol(3) eq '{metric}' ? ${x} : 1/0):{columns['simulated']} "
                    f"with points pt 6 title '{metric} (sim)'"
                )
        lines.append("plot " + ", \\\n     ".join(series))
        path = csv_path.with_suffix(".gp")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

