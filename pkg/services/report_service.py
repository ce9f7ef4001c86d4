"""
Rendering and parsing of drift reports in csv, json and text form.
"""
import csv
import io
import json
import logging
from typing import Union

from models.experiment import OUTPUT_FORMATS, DriftReport, DriftRow

logger = logging.getLogger(__name__)

REPORT_SCHEMA = 1
CSV_COLUMNS = ['name', 'initial', 'max_drift', 'threshold', 'status']


def _number(value: float) -> str:
    return format(float(value), '.17g')


def _status(row: DriftRow) -> str:
    return 'PASS' if row.passed else 'FAIL'


def report_render(report: DriftReport, fmt: str = 'text') -> bytes:
    if fmt not in OUTPUT_FORMATS:
        raise ValueError(f"Unknown report format: {fmt}. Must be one of {OUTPUT_FORMATS}")
    if fmt == 'json':
        document = {
            'schema': REPORT_SCHEMA,
            'passed': report.passed,
            'metadata': report.metadata,
            'rows': [row.to_dict() for row in report.rows],
        }
        return (json.dumps(document, indent=2, sort_keys=False) + '\n').encode('utf-8')
    if fmt == 'csv':
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(CSV_COLUMNS)
        for row in report.rows:
            writer.writerow([row.name, _number(row.initial), _number(row.max_drift),
                             _number(row.threshold), _status(row)])
        return buffer.getvalue().encode('utf-8')

    lines = [f"# {key}: {value}" for key, value in report.metadata.items()]
    width = max((len(row.name) for row in report.rows), default=0)
    for row in report.rows:
        lines.append(f"{row.name:<{width}}  initial={row.initial:.6g}  "
                     f"drift={row.max_drift:.3e}  threshold={row.threshold:.1e}  {_status(row)}")
    lines.append(f"# overall: {'PASS' if report.passed else 'FAIL'}")
    return ('\n'.join(lines) + '\n').encode('utf-8')


def report_parse(data: Union[bytes, str], fmt: str = 'json') -> DriftReport:
    # Inverse of report_render for the json and csv formats
    text = data.decode('utf-8') if isinstance(data, bytes) else data
    if fmt == 'json':
        document = json.loads(text)
        if document.get('schema') != REPORT_SCHEMA:
            raise ValueError(f"Unsupported report schema {document.get('schema')!r}")
        return DriftReport([DriftRow.from_dict(row) for row in document['rows']],
                           document.get('metadata', {}))
    if fmt == 'csv':
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(f"Unexpected CSV header {reader.fieldnames!r}")
        return DriftReport([DriftRow(row['name'], float(row['initial']), float(row['max_drift']),
                                     float(row['threshold'])) for row in reader])
    raise ValueError(f"Cannot parse {fmt} reports")
