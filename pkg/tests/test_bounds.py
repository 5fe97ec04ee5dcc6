import csv
import io
import math
from pathlib import Path

import pytest

from momentvol.bounds import (CSV_COLUMNS, BoundError, BoundsConfig, bonferroni_bounds,
                              lower_bound, sweep, upper_bound)
from momentvol.measures import MeasureSpec
from momentvol.poly import parse
from momentvol.semialg import BasicSet, ProblemSpec, UnionSet, load_problem
from momentvol.solve import SolverSettings

EXAMPLES = Path(__file__).resolve().parents[1] / "examples" / "problems"
X12 = ("x1", "x2")


def leb2(sets, half=1.0):
    pieces = tuple(BasicSet(f"s{i}", tuple(parse(g, X12) for g in gs)) for i, gs in enumerate(sets))
    box = ((-half, half), (-half, half))
    return ProblemSpec(2, MeasureSpec("lebesgue", box=box), UnionSet(pieces), variables=X12)


TWO_ELLIPSES = [["1 - 4*x1^2 - x2^2"], ["1 - x1^2 - 4*x2^2"]]
# exact area of the union: 2 * (pi/2) - overlap, overlap = 2 * atan(1/2)
TWO_ELLIPSES_AREA = math.pi - 2 * math.atan(0.5)


def test_two_ellipses_area_oracle():
    from scipy import integrate
    height = lambda x: 2 * max(math.sqrt(max(1 - 4 * x * x, 0.0)),
                               0.5 * math.sqrt(max(1 - x * x, 0.0)))
    kinks = [-1 / math.sqrt(5), -0.5, 0.5, 1 / math.sqrt(5)]
    val = integrate.quad(height, -1, 1, points=kinks, limit=200)[0]
    assert val == pytest.approx(TWO_ELLIPSES_AREA, rel=1e-10)


def test_whole_box_is_exact():
    spec = load_problem(EXAMPLES / "lebesgue_whole_box_2d.yaml")
    for d in (1, 2, 3):
        for st in (False, True):
            assert upper_bound(spec, d, st)[0] == pytest.approx(4.0, abs=1e-7)
            assert lower_bound(spec, d, st)[0] == pytest.approx(4.0, abs=1e-7)


@pytest.mark.parametrize("d,stokes", [(2, False), (3, True)])
def test_doubling_box_scales_by_2_to_the_n(d, stokes):
    small = leb2(TWO_ELLIPSES)
    big = leb2([["1 - x1^2 - 0.25*x2^2"], ["1 - 0.25*x1^2 - x2^2"]], half=2.0)
    for fn in (upper_bound, lower_bound):
        a, b = fn(small, d, stokes)[0], fn(big, d, stokes)[0]
        assert b == pytest.approx(4.0 * a, rel=1e-6)


def test_bounds_bracket_exact_area_monotone_and_stokes_dominates():
    rep = sweep(leb2(TWO_ELLIPSES), 1, 4, use_stokes="both", sides="both")
    assert rep.all_optimal
    for st in (False, True):
        ups = [v for _, v in rep.series("upper", st)]
        los = [v for _, v in rep.series("lower", st)]
        assert all(u >= TWO_ELLIPSES_AREA - 1e-6 for u in ups)
        assert all(lo <= TWO_ELLIPSES_AREA + 1e-6 for lo in los)
        assert all(b <= a + 1e-6 for a, b in zip(ups, ups[1:]))
        assert all(b >= a - 1e-6 for a, b in zip(los, los[1:]))
    for d in range(1, 5):
        assert rep.row(d, "upper", True).value <= rep.row(d, "upper", False).value + 1e-7


def test_sweep_report_shape_and_gaps():
    rep = sweep(leb2(TWO_ELLIPSES), 2, 3, use_stokes=True, sides="both",
                reference=TWO_ELLIPSES_AREA)
    assert [(r.d, r.side) for r in rep.rows] == [(2, "upper"), (2, "lower"), (3, "upper"),
                                                 (3, "lower")]
    for r in rep.rows:
        up, lo = rep.row(r.d, "upper", True), rep.row(r.d, "lower", True)
        assert r.gap_eps == pytest.approx((up.value - lo.value) / up.value)
        assert r.gap_eps_ref >= -1e-6
    table = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert tuple(table[0].keys()) == CSV_COLUMNS
    assert float(table[0]["value"]) == rep.rows[0].value
    doc = rep.to_dict()
    assert doc["fingerprint"] == rep.fingerprint and len(doc["rows"]) == 4
    assert {m["d"] for m in doc["moments"]} == {2, 3}


def test_sweep_parallel_matches_serial():
    spec = leb2(TWO_ELLIPSES)
    a = sweep(spec, 2, 3, use_stokes="both", sides="both", workers=1)
    b = sweep(spec, 2, 3, use_stokes="both", sides="both", workers=4)
    assert [(r.d, r.side, r.stokes, r.status) for r in a.rows] == \
        [(r.d, r.side, r.stokes, r.status) for r in b.rows]
    for ra, rb in zip(a.rows, b.rows):
        assert ra.value == pytest.approx(rb.value, abs=1e-9)


def test_failed_rows_are_marked_not_raised():
    cfg = BoundsConfig(settings=SolverSettings(max_iter=1))
    rep = sweep(leb2(TWO_ELLIPSES), 3, 3, sides="upper", config=cfg)
    (row,) = rep.rows
    assert row.status == "numerical_failure" and math.isnan(row.value)
    assert rep.any_failed and row.reason
    with pytest.raises(BoundError) as err:
        upper_bound(leb2(TWO_ELLIPSES), 3, True, cfg)
    assert err.value.d == 3


def test_basis_fallback_recovers_an_ill_conditioned_solve():
    """Exponential measure, d=5 with Stokes: the scaled basis breaks down, the unscaled one
    certifies.  The union is the quarter disc (it contains the triangle)."""
    from scipy import integrate
    spec = load_problem(EXAMPLES / "exponential_simplex_2d.yaml")
    truth = integrate.dblquad(lambda y, x: math.exp(-x - y), 0, 1, 0,
                              lambda x: math.sqrt(1 - x * x))[0]
    with pytest.raises(BoundError):
        upper_bound(spec, 5, True, BoundsConfig(basis_fallback=False))
    value, res = upper_bound(spec, 5, True)
    assert res.status == "optimal" and "monomial-unscaled" in res.reason
    assert truth - 1e-7 <= value <= upper_bound(spec, 4, True)[0] + 1e-7


def test_sweep_rejects_bad_degrees():
    spec = leb2([["1 - x1^4 - x2^2"]])
    with pytest.raises(ValueError):
        sweep(spec, 1, 3)
    with pytest.raises(ValueError):
        sweep(spec, 3, 2)


def test_bonferroni_p1_is_direct():
    spec = leb2([["1 - x1^2 - x2^2"]])
    res = bonferroni_bounds(spec, 3)
    assert res.upper == pytest.approx(upper_bound(spec, 3)[0], abs=1e-9)
    assert res.lower == pytest.approx(lower_bound(spec, 3)[0], abs=1e-9)


def test_bonferroni_p2():
    spec = leb2(TWO_ELLIPSES)
    d = 3
    depth1 = bonferroni_bounds(spec, d, depth_limit=1)
    singles = [upper_bound(leb2([s]), d)[0] for s in TWO_ELLIPSES]
    assert depth1.upper == pytest.approx(sum(singles), rel=1e-7)
    full = bonferroni_bounds(spec, d)
    assert full.lower <= TWO_ELLIPSES_AREA + 1e-6 <= full.upper + 2e-6
    assert full.upper <= depth1.upper + 1e-9
    with pytest.raises(ValueError):
        bonferroni_bounds(spec, d, depth_limit=3)


def test_moments_symmetric_instance():
    spec = leb2(TWO_ELLIPSES)
    rep = sweep(spec, 4, 4, use_stokes=True, sides="upper", moment_order=2)
    est = {m.alpha: m.value for m in rep.moments[(4, True)]}
    assert est[(0, 0)] == pytest.approx(rep.rows[0].value, abs=1e-12)
    assert abs(est[(1, 0)]) < 2e-2 and abs(est[(0, 1)]) < 2e-2


def test_moment_of_interval_in_original_coordinates():
    """[0.2, 1] in the box [-1, 1]: int x dx = 0.48."""
    spec = load_problem(EXAMPLES / "lebesgue_interval_moment_1d.yaml")
    rep = sweep(spec, 8, 8, use_stokes=True, sides="upper", moment_order=1)
    est = {m.alpha: m.value for m in rep.moments[(8, True)]}
    assert est[(0,)] == pytest.approx(0.8, abs=1e-3)
    assert est[(1,)] == pytest.approx(0.48, abs=2e-2)


def test_moments_follow_the_box_scaling():
    """Same interval expressed in a box [0, 4]: x -> 2x + 2 doubles lengths."""
    pieces = (BasicSet("i", (parse("-(x - 2.4)*(x - 4)", ["x"]),)),)
    spec = ProblemSpec(1, MeasureSpec("lebesgue", box=((0.0, 4.0),)), UnionSet(pieces),
                       variables=("x",))
    rep = sweep(spec, 6, 6, use_stokes=True, sides="upper", moment_order=1)
    est = {m.alpha: m.value for m in rep.moments[(6, True)]}
    assert est[(0,)] == pytest.approx(1.6, abs=1e-3)
    assert est[(1,)] == pytest.approx((4.0 ** 2 - 2.4 ** 2) / 2, abs=5e-2)
