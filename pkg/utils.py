import logging
import math
import os
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional

import yaml
from dotenv import load_dotenv
from reportlab.lib.pagesizes import A4
from reportlab.pdfgen import canvas

from chemdist.core.config import config_dir
from chemdist.core.errors import ConfigError
from chemdist.core.experiments import ExperimentResult

load_dotenv()

logger = logging.getLogger(__name__)


def _load_yaml(name: str, root: str) -> Dict[str, Any]:
    path = os.path.join(config_dir(), name)
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f) or {}
    except FileNotFoundError:
        logger.warning("Config file not found: %s", path)
        return {root: {}}
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {path}: {e}", key=root)
    data.setdefault(root, {})
    return data


def load_model_presets() -> Dict[str, Any]:
    """Load named model presets from YAML."""
    return _load_yaml("models.yaml", "models")


def load_experiment_presets() -> Dict[str, Any]:
    """Load canned experiment configurations from YAML."""
    return _load_yaml("experiments.yaml", "experiments")


def model_preset(name: str) -> Dict[str, Any]:
    presets = load_model_presets()["models"]
    if name not in presets:
        raise ConfigError(f"unknown model preset {name!r}; known: {sorted(presets)}", key="model_preset")
    return dict(presets[name])


def experiment_preset(name: str) -> Dict[str, Any]:
    presets = load_experiment_presets()["experiments"]
    if name not in presets:
        raise ConfigError(f"unknown experiment preset {name!r}; known: {sorted(presets)}", key="preset")
    data = dict(presets[name])
    data.setdefault("name", name)
    return data


def format_cell(value: Any) -> str:
    """Short human-readable rendering of a CSV cell for reports."""
    if value is None or value == "":
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.4g}"
    return str(value)


def table_lines(rows: Iterable[Dict[str, Any]], columns: List[str]) -> List[str]:
    """Fixed-width text rows of a table, header first."""
    rendered = [[format_cell(row.get(c)) for c in columns] for row in rows]
    widths = [max([len(c)] + [len(r[i]) for r in rendered]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rendered]
    return lines


def generate_report(result: ExperimentResult, pdf_path: Optional[str] = None) -> str:
    """
    Generate a PDF summary of an experiment: configuration, summary table and fits.

    Args:
        result: Finished experiment
        pdf_path: Output path (defaults to <output>/report.pdf)

    Returns:
        Path of the written PDF
    """
    pdf_path = pdf_path or os.path.join(result.directory, "report.pdf")
    config = result.config
    c_pdf = canvas.Canvas(pdf_path, pagesize=A4)
    width, height = A4

    y = height - 50
    c_pdf.setFont("Helvetica-Bold", 16)
    c_pdf.drawString(50, y, f"Experiment: {config.resolved_name}")
    y -= 30

    c_pdf.setFont("Helvetica", 11)
    for line in [
        f"Kind: {config.kind}",
        f"Model: {config.model.label()}",
        f"Replicates: {config.replicates}   Seed: {config.seed}",
        f"Generated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}",
    ]:
        c_pdf.drawString(50, y, line)
        y -= 18
    y -= 12

    def section(title: str, lines: List[str], y: float) -> float:
        c_pdf.setFont("Helvetica-Bold", 13)
        c_pdf.drawString(50, y, title)
        y -= 20
        c_pdf.setFont("Courier", 8)
        for line in lines:
            c_pdf.drawString(60, y, line)
            y -= 12
            if y < 50:
                c_pdf.showPage()
                c_pdf.setFont("Courier", 8)
                y = height - 50
        return y - 10

    if result.summary:
        y = section("Summary", table_lines(result.summary, list(result.summary[0])), y)
    if result.fits:
        columns = ["quantity", "slope", "stderr", "prediction", "r2", "points", "reliable"]
        y = section("Exponent fits", table_lines(result.fits, columns), y)

    c_pdf.save()
    logger.info("Report written to %s", pdf_path)
    return pdf_path
