import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wzsafety.classify import BehaviorLabel
from wzsafety.core import Region, RegionGroup, WorkZoneLayout
from wzsafety.density import (K0, AssessmentReport, DensityField, DensityGridSpec, build_report, density_to_proportion,
                              find_cluster_centers, kde, kde_naive, unit_vehicle_weight)
from wzsafety.errors import LayoutMismatch, ValidationError

SPEC = DensityGridSpec(0.0, 400.0, -30.0, 44.0)
LAYOUT = WorkZoneLayout(zone_start_x=100.0)


def test_empty_points_zero_field():
    assert np.all(kde(np.empty((0, 2)), SPEC).values == 0)


def test_single_point_at_cell_center():
    x, y = SPEC.x_centers()[20], SPEC.y_centers()[6]
    fld = kde([(x, y)], SPEC)
    assert fld.values[6, 20] == pytest.approx((3 / math.pi) / 900, rel=1e-12)
    assert fld.values.max() == fld.values[6, 20]


points = st.lists(st.tuples(st.floats(-50, 450), st.floats(-40, 50)), min_size=0, max_size=25)


@given(points, st.lists(st.floats(0.1, 5), min_size=25, max_size=25))
def test_kde_equals_naive(pts, w):
    w = np.array(w[:len(pts)])
    grid = kde(pts, SPEC, w).values
    naive = kde_naive(pts, SPEC, w)
    assert np.allclose(grid, naive, rtol=1e-9, atol=1e-15)


def test_mass_of_interior_points(rng):
    pts = np.column_stack([rng.uniform(60, 340, 40), rng.uniform(5, 10, 40)])
    fld = kde(pts, DensityGridSpec(0, 400, -50, 60))
    assert fld.total_mass() == pytest.approx(40, rel=0.02)


@given(st.floats(40, 300), st.floats(0, 10))
def test_weight_doubling_is_linear(x, y):
    a = kde([(x, y)], SPEC).values
    b = kde([(x, y)], SPEC, [2.0]).values
    assert np.allclose(b, 2 * a)


@given(st.integers(-10, 10), st.integers(-2, 2))
def test_translation_by_whole_cells(dx, dy):
    spec = DensityGridSpec(0.0, 400.0, -100.0, 100.0)
    p = (200.3, 7.1)
    a = kde([p], spec).values
    b = kde([(p[0] + 5 * dx, p[1] + 5 * dy)], spec).values
    assert np.allclose(np.roll(a, (dy, dx), axis=(0, 1)), b, atol=1e-15)


def test_single_point_one_center():
    x, y = SPEC.x_centers()[30], SPEC.y_centers()[7]
    centers = find_cluster_centers(kde([(x, y)], SPEC), LAYOUT, min_peak=0.0001)
    assert len(centers) == 1 and centers[0].x == x and centers[0].y == y


def test_distant_points_two_centers():
    pts = [(SPEC.x_centers()[4], 7.5), (SPEC.x_centers()[4] + 300, 7.5)]
    assert len(find_cluster_centers(kde(pts, SPEC), LAYOUT, min_peak=1e-5)) == 2


def test_zero_field_no_centers():
    assert find_cluster_centers(kde([], SPEC), LAYOUT) == []


def test_center_region_and_proportion():
    w = unit_vehicle_weight(1, SPEC)
    fld = kde([(SPEC.x_centers()[10], SPEC.y_centers()[6])], SPEC, [w], BehaviorLabel.LD)
    c, = find_cluster_centers(fld, LAYOUT)
    assert c.density == pytest.approx(36.5)
    assert c.proportion == pytest.approx(100.0)
    assert c.region is Region.UPSTREAM and c.group is RegionGroup.UPSTREAM


@pytest.mark.parametrize("d, pct", [(5.88, 16.1), (36.5, 100.0), (0.0, 0.0)])
def test_density_to_proportion(d, pct):
    assert density_to_proportion(d) == pytest.approx(pct, abs=0.05)


def _field_with_peak(label, x, peak, spec=SPEC):
    ix = int((x - spec.x_min) // spec.cell)
    xc = spec.x_centers()[ix]
    base = kde([(xc, spec.y_centers()[6])], spec).values
    return DensityField(spec, label, base / base.max() * peak)


def test_report_single_row():
    lay = WorkZoneLayout(zone_start_x=0.0)
    spec = DensityGridSpec.for_layout(lay)
    fld = _field_with_peak(BehaviorLabel.TLCL, 515.0, 5.25, spec)
    report = build_report([{BehaviorLabel.TLCL: fld}], lay)
    assert report.density(BehaviorLabel.TLCL) == pytest.approx(5.25)
    assert report.density(BehaviorLabel.LA, RegionGroup.TERMINATION) == 0.0
    assert (BehaviorLabel.LA, RegionGroup.TERMINATION) not in report.entries


def test_report_averages_replications():
    reps = [{BehaviorLabel.LD: _field_with_peak(BehaviorLabel.LD, 200.0, d)} for d in (4.0, 5.0, 6.0)]
    report = build_report(reps, LAYOUT)
    assert report.density(BehaviorLabel.LD) == pytest.approx(5.0)
    assert report.entries[(BehaviorLabel.LD, RegionGroup.UPSTREAM)].present_in == 3


def test_report_missing_replication_counts_zero():
    reps = [{BehaviorLabel.LD: _field_with_peak(BehaviorLabel.LD, 200.0, 6.0)}, {}]
    assert build_report(reps, LAYOUT).density(BehaviorLabel.LD) == pytest.approx(3.0)


def test_report_round_trip():
    reps = [{BehaviorLabel.LD: _field_with_peak(BehaviorLabel.LD, 200.0, 6.0)}]
    r = build_report(reps, LAYOUT, metadata={"seed": 1})
    again = AssessmentReport.from_dict(r.to_dict())
    assert again.to_dict() == r.to_dict()


def test_mismatched_grids():
    other = DensityGridSpec(0.0, 500.0, -30.0, 44.0)
    reps = [{BehaviorLabel.LD: _field_with_peak(BehaviorLabel.LD, 200.0, 1.0),
             BehaviorLabel.LA: _field_with_peak(BehaviorLabel.LA, 200.0, 1.0, other)}]
    with pytest.raises(LayoutMismatch):
        build_report(reps, LAYOUT)


def test_empty_report_input():
    with pytest.raises(ValidationError):
        build_report([], LAYOUT)


def test_unit_vehicle_weight():
    assert unit_vehicle_weight(0, SPEC) == 0.0
    assert unit_vehicle_weight(10, SPEC) * K0 / SPEC.bandwidth**2 == pytest.approx(3.65)


def test_grid_validation():
    with pytest.raises(ValidationError):
        DensityGridSpec(0, 10, 0, 10, cell=0)
    with pytest.raises(ValidationError):
        DensityGridSpec(0, 10, 0, 10, cell=5, bandwidth=2)
