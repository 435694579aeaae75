import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from struggle_fm.model import FEATURE_NAMES, FeatureGroup, FeatureVector, State, features_in
from struggle_fm.modulation import (
    FeatureModulator,
    ModulationFitError,
    ModulationParams,
    StateMoments,
    apply_modulation,
    fit_modulation,
)

T, P, U = State.TELIC, State.PARATELIC, State.UNASSIGNED
COL = FEATURE_NAMES.index("total_clicks")


def _matrix(telic_col, para_col):
    n = len(telic_col) + len(para_col)
    X = np.zeros((n, len(FEATURE_NAMES)))
    X[:, COL] = list(telic_col) + list(para_col)
    return X, [T] * len(telic_col) + [P] * len(para_col)


def test_fit_example():
    X, states = _matrix([0.2, 0.4, 0.6], [0.5, 0.7, 0.9])
    m = fit_modulation(X, states, [FeatureGroup.CLICK]).features["total_clicks"]
    assert m.mu_telic == pytest.approx(0.4, abs=1e-15)
    assert m.sigma_telic == pytest.approx(0.2, abs=1e-15)
    assert m.mu_paratelic == pytest.approx(0.7, abs=1e-15)
    assert m.sigma_paratelic == pytest.approx(0.2, abs=1e-15)


def test_fit_identical_states():
    X, states = _matrix([0.1, 0.5, 0.3], [0.1, 0.5, 0.3])
    m = fit_modulation(X, states, [FeatureGroup.CLICK]).features["total_clicks"]
    assert (m.mu_telic, m.sigma_telic) == (m.mu_paratelic, m.sigma_paratelic)


def test_constant_paratelic_falls_back_to_mean_shift():
    X, states = _matrix([0.2, 0.4, 0.6], [0.5, 0.5, 0.5])
    params = fit_modulation(X, states, [FeatureGroup.CLICK])
    m = params.features["total_clicks"]
    assert m.sigma_paratelic == 0.0
    assert m.apply(0.7) == pytest.approx(0.7 - 0.5 + 0.4, abs=1e-15)
    out = FeatureModulator([FeatureGroup.CLICK]).fit(X, states).transform(X, states)
    np.testing.assert_allclose(out[3:, COL], [0.4, 0.4, 0.4], atol=1e-15)


def test_fit_only_selected_groups_and_requires_two_per_state():
    X, states = _matrix([0.2, 0.4, 0.6], [0.5, 0.7, 0.9])
    params = fit_modulation(X, states, [FeatureGroup.CLICK])
    assert set(params.features) == set(features_in(FeatureGroup.CLICK))
    with pytest.raises(ModulationFitError):
        fit_modulation(X[:4], states[:4], [FeatureGroup.CLICK])


def test_apply_examples():
    m = StateMoments(0.4, 0.1, 0.8, 0.2)
    assert m.apply(0.8) == pytest.approx(0.4, abs=1e-15)
    assert m.apply(1.0) == pytest.approx(0.5, abs=1e-15)  # 0.5 * 1.0 + 0.4 - 0.5 * 0.8
    params = ModulationParams({FeatureGroup.CLICK}, {"total_clicks": m})
    values = dict.fromkeys(FEATURE_NAMES, 0.3)
    values["total_clicks"] = 1.0
    fv = FeatureVector(values, topic="Art")
    assert apply_modulation(fv, T, params) is fv
    assert apply_modulation(fv, U, params) is fv
    out = apply_modulation(fv, P, params)
    assert out["total_clicks"] == pytest.approx(0.5, abs=1e-15)
    assert out["num_queries"] == 0.3 and out.topic == "Art"
    row = apply_modulation(fv.as_list(), P, params)
    assert row[COL] == pytest.approx(0.5, abs=1e-15)


def test_params_validation():
    with pytest.raises(ValueError):
        StateMoments(0, -1, 0, 1)
    with pytest.raises(ValueError):
        ModulationParams({FeatureGroup.QUERY}, {"total_clicks": StateMoments(0, 1, 0, 1)})


def test_params_text_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(5)
    X = rng.uniform(size=(40, 58))
    states = [T, P] * 20
    params = fit_modulation(X, states, [FeatureGroup.READ, FeatureGroup.RARITY])
    path = tmp_path / "params.tsv"
    params.save(path)
    back = ModulationParams.load(path)
    assert back == params
    assert back.dumps() == params.dumps()
    assert params.dumps().splitlines()[0] == "#groups\tRarityEffort,ReadEffort"
    with pytest.raises(ValueError):
        ModulationParams.loads("total_clicks\t1\t2\t3\t4\n")
    with pytest.raises(ValueError):
        ModulationParams.loads("#groups\tClickEffort\nnot_a_feature\t1\t2\t3\t4\n")


def test_modulator_estimator_api():
    rng = np.random.default_rng(1)
    X = rng.uniform(size=(30, 58))
    states = [T, P, U] * 10
    mod = FeatureModulator().fit(X, states)
    assert mod.params_.selected_groups == frozenset(FeatureGroup)
    out = mod.transform(X, states)
    telic_or_unassigned = [s is not P for s in states]
    np.testing.assert_array_equal(out[telic_or_unassigned], X[telic_or_unassigned])
    rows = np.array([apply_modulation(x, s, mod.params_) for x, s in zip(X, states)])
    np.testing.assert_allclose(out, rows, atol=1e-15)
    again = FeatureModulator.from_params(mod.params_).transform(X, states)
    np.testing.assert_array_equal(again, out)
    assert list(mod.get_feature_names_out(list(FEATURE_NAMES))) == list(FEATURE_NAMES)
    with pytest.raises(ValueError):
        mod.transform(X, states[:-1])
    with pytest.raises(ValueError):
        FeatureModulator("some").fit(X, states)
    with pytest.raises(ValueError):
        FeatureModulator().fit(X[:, :10], states)


# --- properties -----------------------------------------------------------------------------------

_col = st.lists(st.floats(0, 1), min_size=3, max_size=20)


def _check_moments(telic, para):
    X, states = _matrix(telic, para)
    mod = FeatureModulator([FeatureGroup.CLICK]).fit(X, states)
    out = mod.transform(X, states)[len(telic):, COL]
    t = np.asarray(telic)
    return out, t


@settings(max_examples=300, deadline=None)
@given(telic=_col, para=_col)
@example(telic=[0.0, 0.0, 1.0], para=[0.22787586329483794] * 3)  # constant column whose std rounds to ~1e-17
def test_moment_matching_is_exact(telic, para):
    out, t = _check_moments(telic, para)
    assert abs(out.mean() - t.mean()) <= 1e-9
    if len(set(para)) > 1:
        assert abs(out.std(ddof=1) - t.std(ddof=1)) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(col=_col)
def test_identical_distributions_give_identity(col):
    out, _ = _check_moments(col, col)
    np.testing.assert_allclose(out, col, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(mt=st.floats(-5, 5), st_=st.floats(0.01, 5), mp=st.floats(-5, 5), sp=st.floats(0.01, 5),
       x=st.floats(-10, 10), dx=st.floats(0.001, 10), dy=st.floats(0.001, 10))
def test_transform_is_increasing_and_affine(mt, st_, mp, sp, x, dx, dy):
    m = StateMoments(mt, st_, mp, sp)
    assert m.apply(x + dx) > m.apply(x)
    lhs = m.apply(x + dx + dy) - m.apply(x)
    rhs = (m.apply(x + dx) - m.apply(x)) + (m.apply(x + dy) - m.apply(x))
    assert lhs == pytest.approx(rhs, abs=1e-9)
