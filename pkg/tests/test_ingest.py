import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from interlab.ingest import (
    IDENTITY,
    BalanceError,
    BalanceReport,
    Dataset,
    ParseError,
    TransformError,
    TransformSpec,
    apply_transforms,
    example_path,
    parse_csv,
    table_from_records,
    validate_balanced,
)

from conftest import STUDY_SPEC


def write(tmp_path, text, name="study.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_parse_two_rows(tmp_path):
    p = write(tmp_path, "lab,dose,response\nA,1,49\nB,1,46\n")
    raw = parse_csv(p)
    assert len(raw) == 2
    assert [(r.lab, r.dose, r.response) for r in raw.rows] == [("A", 1.0, 49.0), ("B", 1.0, 46.0)]
    assert [r.line for r in raw.rows] == [2, 3]


def test_parse_ldh_table():
    raw = parse_csv(example_path("ldh"))
    assert len(raw) == 100
    assert raw.labs == ["A", "B", "C", "D", "E"]
    assert len(raw.doses) == 4


def test_malformed_row_names_line(tmp_path):
    p = write(tmp_path, "lab,dose,response\nA,1,49\nB,1,abc\n")
    with pytest.raises(ParseError) as exc:
        parse_csv(p)
    assert exc.value.line == 3
    assert ":3:" in str(exc.value)


def test_missing_column(tmp_path):
    p = write(tmp_path, "lab,response\nA,49\n")
    with pytest.raises(ParseError, match="dose"):
        parse_csv(p)


def test_missing_file(tmp_path):
    with pytest.raises(ParseError, match="cannot open"):
        parse_csv(tmp_path / "nope.csv")


def test_wrong_field_count(tmp_path):
    p = write(tmp_path, "lab,dose,response\nA,1,49,7\n")
    with pytest.raises(ParseError, match="fields"):
        parse_csv(p)


def test_quoted_lab_names_and_column_order(tmp_path):
    p = write(tmp_path, 'response,lab,dose\n49,"Lab, one",1\n46,"Lab two",1\n')
    raw = parse_csv(p)
    assert raw.labs == ["Lab, one", "Lab two"]


def test_nonpositive_response_under_log_is_reported_with_line(tmp_path):
    p = write(tmp_path, "lab,dose,response\nA,1,49\nA,2,0\n")
    with pytest.raises(TransformError, match=":3:"):
        parse_csv(p, STUDY_SPEC)


def test_bundled_dose_encoding_centers_to_quarter_steps():
    doses = [1.0, 1 / math.sqrt(10), 0.1, 0.1 / math.sqrt(10)]
    records = [(lab, d, 10.0 + k) for lab in "AB" for k, d in enumerate(doses)]
    data = apply_transforms(table_from_records(records), STUDY_SPEC)
    np.testing.assert_allclose(data.x, [-0.75, -0.25, 0.25, 0.75], atol=1e-12)


def test_identity_on_centered_doses():
    records = [(lab, d, 1.0 + d + k) for lab in "AB" for k, d in enumerate([-1.0, 1.0, -1.0, 1.0])]
    data = apply_transforms(table_from_records(records), IDENTITY)
    assert sorted(data.x.tolist()) == [-1.0, -1.0, 1.0, 1.0]


def test_natural_log_response():
    records = [("A", -1, math.e), ("A", 0, math.e), ("A", 1, math.e**2),
               ("B", -1, math.e), ("B", 0, math.e**2), ("B", 1, math.e**2)]
    spec = TransformSpec("identity", False, "natural_log")
    data = apply_transforms(table_from_records(records), spec)
    np.testing.assert_allclose(data.y, [[1, 1, 2], [1, 2, 2]], rtol=0, atol=1e-15)


def test_ldh_dataset_shape(ldh):
    assert (ldh.m, ldh.n) == (5, 20)
    assert ldh.m * ldh.n - 2 * ldh.m == 90
    assert ldh.labs == ("A", "B", "C", "D", "E")


def test_deleting_a_row_is_a_balance_violation():
    raw = parse_csv(example_path("ldh"))
    rows = raw.rows[:7] + raw.rows[8:]
    with pytest.raises(BalanceError) as exc:
        apply_transforms(type(raw)(rows, raw.source), STUDY_SPEC)
    msg = "\n".join(exc.value.report.violations)
    assert "lab 'A' has 19 observations, others have 20" in msg


def test_uncentered_without_centering_is_reported():
    groups = {"A": [(0.1, 1.0), (0.2, 2.0), (0.1, 1.5)], "B": [(0.1, 1.0), (0.2, 2.0), (0.1, 1.1)]}
    res = validate_balanced(groups)
    assert isinstance(res, BalanceReport)
    assert any("not centered" in v for v in res.violations)


def test_unbalanced_doses_listed_per_lab():
    groups = {
        "A": [(-1.0, 1.0), (0.0, 1.0), (1.0, 1.0)],
        "B": [(-1.0, 1.0), (0.5, 1.0), (1.0, 1.0)],
    }
    res = validate_balanced(groups, require_centered=False)
    assert isinstance(res, BalanceReport)
    (v,) = res.violations
    assert "missing dose(s) 0" in v and "extra dose(s) 0.5" in v


def test_validation_reports_every_problem():
    groups = {"A": [(1.0, 1.0), (1.0, 2.0)]}
    res = validate_balanced(groups)
    text = " | ".join(res.violations)
    assert "at least 2 labs" in text
    assert "at least 3 observations" in text
    assert "2 distinct dose" in text
    assert "not centered" in text


def test_valid_groups_return_dataset():
    groups = {"A": [(1.0, 3.0), (-1.0, 1.0), (0.0, 2.0)], "B": [(0.0, 5.0), (1.0, 6.0), (-1.0, 4.0)]}
    res = validate_balanced(groups)
    assert isinstance(res, Dataset)
    assert res.x.tolist() == [-1.0, 0.0, 1.0]
    assert res.y.tolist() == [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]


def test_lab_order_is_first_appearance(tmp_path):
    p = write(tmp_path, "lab,dose,response\nZ,-1,1\nA,-1,2\nZ,0,1\nA,0,2\nZ,1,1\nA,1,2\n")
    data = apply_transforms(parse_csv(p), IDENTITY)
    assert data.labs == ("Z", "A")


def test_unknown_transform_rejected():
    with pytest.raises(ValueError):
        TransformSpec(dose_transform="sqrt")


levels = st.lists(
    st.decimals(min_value=-50, max_value=50, places=3, allow_nan=False), min_size=2, max_size=5, unique=True
)


@given(levels=levels, reps=st.integers(1, 3), m=st.integers(2, 4), data=st.data())
def test_identity_round_trip_and_balance(levels, reps, m, data):
    doses = [float(d) for d in levels] * reps
    if len(doses) < 3:
        doses = doses * 2
    records = []
    for i in range(m):
        order = data.draw(st.permutations(doses))
        for d in order:
            resp = data.draw(st.decimals(-1000, 1000, places=4, allow_nan=False))
            records.append((f"L{i}", d, float(resp)))
    raw = table_from_records(records)
    result = validate_balanced(
        {lab: [(r.dose, r.response) for r in raw.rows if r.lab == lab] for lab in raw.labs},
        require_centered=False,
    )
    assert isinstance(result, Dataset)
    # every parsed value survives unchanged and each lab carries the same sorted doses
    assert sorted(result.x.tolist()) == sorted(doses)
    for i, lab in enumerate(result.labs):
        got = sorted(zip(result.x.tolist(), result.y[i].tolist()))
        want = sorted((r.dose, r.response) for r in raw.rows if r.lab == lab)
        assert got == want

    centered = apply_transforms(raw, TransformSpec("identity", True, "identity"))
    x = centered.x
    assert abs(x.sum()) <= 1e-9 * len(x) * max(1.0, np.abs(x).max())
