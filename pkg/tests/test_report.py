import math

import pytest

from hlab.models.Report import CheckReport, Report, Status, dump_json


def test_record_keeps_the_worst_witnesses():
    report = Report("concavity", "MA", 2, 10)
    for i in range(8):
        report.record(float(i), 2.5, index=i)
    assert not report.passed
    assert report.max_violation == 7.0
    assert [w["index"] for w in report.witnesses] == [7, 6, 5, 4, 3]


@pytest.mark.parametrize("violation", [math.nan, math.inf])
def test_non_finite_violation_fails(violation):
    report = Report("homogeneity", "MA", 2, 2)
    report.record(0.0, 1e-9)
    report.record(violation, 1e-9, index=1)
    assert not report.passed
    assert report.max_violation == math.inf
    assert report.witnesses[0]["index"] == 1
    assert '"max_violation": "inf"' in dump_json(report.to_dict())


def test_nan_check_report_fails():
    assert CheckReport("radial_ma", 3, math.nan, 1e-8).status == Status.FAIL
    assert CheckReport("radial_ma", 3, -math.inf, 0.0).passed
