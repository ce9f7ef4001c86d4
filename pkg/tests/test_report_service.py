import json

import pytest

from models.experiment import DriftReport
from services.report_service import report_parse, report_render


@pytest.fixture
def report():
    report = DriftReport(metadata={'experiment': 'oscillator', 'seed': 0})
    report.add('action', 0.5, 3.2e-12, 1e-8)
    report.add('phase', 0.0, 2e-5, 1e-6)
    return report


def test_empty_report_renders_a_header_only_csv():
    assert report_render(DriftReport(), 'csv') == b'name,initial,max_drift,threshold,status\n'


def test_csv_rows_carry_full_precision(report):
    lines = report_render(report, 'csv').decode().splitlines()
    name, initial, drift, threshold, status = lines[1].split(',')
    assert (name, initial, threshold, status) == ('action', '0.5', '1e-08', 'PASS')
    assert float(drift) == 3.2e-12
    assert lines[2].endswith(',FAIL')


def test_text_layout(report):
    text = report_render(report, 'text').decode()
    assert text.startswith('# experiment: oscillator\n# seed: 0\n')
    assert 'action' in text.splitlines()[2] and text.splitlines()[2].endswith('PASS')
    assert text.endswith('# overall: FAIL\n')


def test_json_document(report):
    document = json.loads(report_render(report, 'json'))
    assert document['schema'] == 1
    assert document['passed'] is False
    assert list(document['metadata']) == ['experiment', 'seed']
    assert report_parse(report_render(report, 'json'), 'json') == report


def test_csv_parse_keeps_rows(report):
    parsed = report_parse(report_render(report, 'csv'), 'csv')
    assert parsed.rows == report.rows


def test_unknown_format(report):
    with pytest.raises(ValueError):
        report_render(report, 'xml')
    with pytest.raises(ValueError):
        report_parse('', 'text')


def test_foreign_schema():
    with pytest.raises(ValueError):
        report_parse('{"schema": 2, "rows": []}', 'json')
