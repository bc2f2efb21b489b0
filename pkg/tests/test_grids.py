import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viability.grids import (AxisGrid, GridMismatchError, IndicatorField, ProductGrid, ScalarField,
                             field_to_csv, level_set, lift_to_q, measure_field, project_to_states,
                             read_field_csv, slice_counts, slice_measure, write_field_csv)


def small_grid(discrete=False):
    return ProductGrid((AxisGrid(0.0, 1.0, 4),), (AxisGrid(0.0, 0.5, 5),), discrete=discrete)


def test_axis_rejects_bad_bounds():
    with pytest.raises(ValueError):
        AxisGrid(1.0, 1.0, 3)
    with pytest.raises(ValueError):
        AxisGrid(0.0, 1.0, 0)
    with pytest.raises(ValueError):
        AxisGrid(0.0, np.inf, 3)


def test_axis_centers_and_snap():
    ax = AxisGrid(0.0, 2.0, 4)
    np.testing.assert_allclose(ax.centers, [0.25, 0.75, 1.25, 1.75])
    assert ax.snap(0.0) == (0, False)
    assert ax.snap(0.49) == (0, False)
    assert ax.snap(0.5) == (1, False)
    # the upper bound belongs to the last cell
    assert ax.snap(2.0) == (3, False)
    assert ax.snap(2.1) == (3, True)
    assert ax.snap(-0.1) == (0, True)


def test_product_grid_shapes():
    g = ProductGrid((AxisGrid(0, 1, 3), AxisGrid(0, 1, 2)), (AxisGrid(0, 1, 4),))
    assert g.shape == (3, 2, 4)
    assert g.state_shape == (3, 2)
    assert g.n_states == 6 and g.n_actions == 4 and g.size == 24
    assert g.centers().shape == (24, 3)
    # row-major: last axis varies fastest
    np.testing.assert_allclose(g.centers()[:4, 2], g.action_axes[0].centers)


def test_discrete_grid_uses_counting_measure():
    assert small_grid(discrete=True).action_cell_volume == 1.0
    assert small_grid().action_cell_volume == pytest.approx(0.1)


def test_field_shape_checked():
    g = small_grid()
    with pytest.raises(GridMismatchError):
        IndicatorField(g, np.zeros((4, 4), bool))
    with pytest.raises(ValueError):
        ScalarField(g, -np.ones(g.shape))
    with pytest.raises(ValueError):
        ScalarField(g, np.full(g.shape, np.nan))


def test_fields_are_immutable():
    f = IndicatorField(small_grid(), np.zeros((4, 5), bool))
    with pytest.raises(ValueError):
        f.values[0, 0] = True


def test_fields_on_different_grids_do_not_mix():
    a = IndicatorField(small_grid(), np.zeros((4, 5), bool))
    b = IndicatorField(small_grid(discrete=True), np.zeros((4, 5), bool))
    with pytest.raises(GridMismatchError):
        a & b


def test_slice_measure_examples():
    g = small_grid(discrete=True)
    vals = np.zeros(g.shape, bool)
    vals[1, [0, 2, 3]] = True
    q = IndicatorField(g, vals)
    assert slice_measure(q, 1) == 3
    assert slice_measure(q, 0) == 0
    with pytest.raises(IndexError):
        slice_measure(q, 4)
    cont = IndicatorField(small_grid(), vals)
    assert slice_measure(cont, 1) == pytest.approx(0.3)


def test_project_and_lift():
    g = small_grid()
    vals = np.zeros(g.shape, bool)
    vals[2, 4] = True
    s = project_to_states(IndicatorField(g, vals))
    assert s.over_states and s.values.tolist() == [False, False, True, False]
    lifted = lift_to_q(s)
    assert lifted.values[2].all() and lifted.count() == 5
    with pytest.raises(GridMismatchError):
        project_to_states(s)


def test_level_set_is_strict():
    g = small_grid()
    vals = np.zeros(g.shape)
    vals[0, 0] = 0.2
    f = ScalarField(g, vals)
    assert level_set(f, 0.0).count() == 1
    assert level_set(f, 0.2).count() == 0
    with pytest.raises(ValueError):
        level_set(f, -1)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_measure_field_matches_slice_counts(ns, na, data):
    g = ProductGrid((AxisGrid(0, 1, ns),), (AxisGrid(-1, 2, na),))
    bits = data.draw(st.lists(st.booleans(), min_size=ns * na, max_size=ns * na))
    q = IndicatorField(g, np.array(bits).reshape(ns, na))
    m = measure_field(q)
    np.testing.assert_allclose(m.values, slice_counts(q) * 3.0 / na)
    for i in range(ns):
        assert m.values[i] == pytest.approx(slice_measure(q, i))
    # a state is in the projection iff its slice has positive measure
    assert np.array_equal(project_to_states(q).values, m.values > 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.data())
def test_level_sets_are_nested(ns, na, data):
    g = ProductGrid((AxisGrid(0, 1, ns),), (AxisGrid(0, 1, na),))
    vals = data.draw(st.lists(st.floats(0, 10), min_size=ns * na, max_size=ns * na))
    f = ScalarField(g, np.array(vals).reshape(ns, na))
    lo, hi = sorted(data.draw(st.tuples(st.floats(0, 10), st.floats(0, 10))))
    assert level_set(f, hi).issubset(level_set(f, lo))


def test_csv_round_trip(tmp_path):
    g = small_grid()
    rng = np.random.default_rng(3)
    sf = ScalarField(g, rng.random(g.shape))
    write_field_csv(tmp_path / "f.csv", sf, "lam")
    assert read_field_csv(tmp_path / "f.csv", g) == sf
    ind = IndicatorField(g, rng.random(g.shape) > 0.5)
    write_field_csv(tmp_path / "b.csv", ind)
    assert read_field_csv(tmp_path / "b.csv", g, boolean=True) == ind
    st_field = IndicatorField(g, [True, False, True, True], over_states=True)
    write_field_csv(tmp_path / "s.csv", st_field)
    assert read_field_csv(tmp_path / "s.csv", g, over_states=True, boolean=True) == st_field


def test_csv_layout():
    g = ProductGrid((AxisGrid(0, 2, 2),), (AxisGrid(0, 1, 2),))
    text = field_to_csv(IndicatorField(g, [[True, False], [False, True]]), "v")
    assert text.splitlines() == ["s0,a0,v", "0.5,0.25,1", "0.5,0.75,0", "1.5,0.25,0", "1.5,0.75,1"]


def test_csv_rejects_other_grid(tmp_path):
    g = small_grid()
    write_field_csv(tmp_path / "f.csv", ScalarField(g, np.zeros(g.shape)))
    other = ProductGrid((AxisGrid(0.0, 2.0, 4),), (AxisGrid(0.0, 0.5, 5),))
    with pytest.raises(GridMismatchError):
        read_field_csv(tmp_path / "f.csv", other)
    with pytest.raises(GridMismatchError):
        read_field_csv(tmp_path / "f.csv", ProductGrid((AxisGrid(0, 1, 3),), (AxisGrid(0, 0.5, 5),)))
