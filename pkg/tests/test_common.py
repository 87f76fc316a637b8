import math

import numpy as np
from hypothesis import given, strategies as st

from heavytail._common import RatioReport, Verdict, combine, format_float, limit_verdict, settled


def test_combine_precedence():
    assert combine([Verdict.PASS, Verdict.PASS]) == Verdict.PASS
    assert combine([Verdict.PASS, Verdict.INCONCLUSIVE]) == Verdict.INCONCLUSIVE
    assert combine([Verdict.INCONCLUSIVE, Verdict.FAIL, Verdict.PASS]) == Verdict.FAIL
    assert combine([]) == Verdict.PASS


def test_limit_verdict_three_ways():
    assert limit_verdict([1.5, 1.005, 1.001, 1.0001], 1.0, 1e-2) == Verdict.PASS
    # distance to target growing and outside the band
    assert limit_verdict([1.5, 1.6, 1.7, 1.8], 1.0, 1e-2) == Verdict.FAIL
    # shrinking but not yet inside
    assert limit_verdict([2.0, 1.5, 1.2, 1.1], 1.0, 1e-2) == Verdict.INCONCLUSIVE
    assert limit_verdict([1.0], 1.0, 1e-2) == Verdict.INCONCLUSIVE


def test_settled():
    assert settled([5, 1.0, 1.0 + 1e-4, 1.0 - 1e-4], 1e-3)
    assert not settled([1.0, 2.0, 3.0], 1e-3)
    assert not settled([1.0, np.nan, 1.0], 1e-3)


def test_format_float_nonfinite():
    assert format_float(math.inf) == "inf"
    assert format_float(-math.inf) == "-inf"
    assert format_float(math.nan) == "nan"


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips(v):
    assert float(format_float(v)) == v


def test_ratio_report_csv_header_and_error():
    r = RatioReport([1.0, 2.0], [1.0, 1.5], 1.0)
    assert r.to_csv().splitlines()[0] == "x,value,target,relative_error"
    assert r.relative_error.tolist() == [0.0, 0.5]
