import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from npcquake.cluster import (AlphaGrid, allocate, build_mode_function,
                              density_quantile_grid, extract_cores, pdf_cluster)
from npcquake.errors import DataError
from npcquake.kde import DensityModel, kde_at_sample
from npcquake.topology import delaunay
from conftest import ari, planted


def sweep(x, levels=99, min_size=3):
    model = DensityModel.fit(x)
    f = kde_at_sample(model)
    g = delaunay(x)
    mf, tree = build_mode_function(f, g, density_quantile_grid(f, levels), min_size=min_size)
    return f, g, mf, tree


def check_tree(tree, mf, f):
    for nd in tree.nodes:
        if nd.parent >= 0:
            par = tree.nodes[nd.parent]
            assert np.isin(nd.members, par.members).all()
            assert par.alpha < nd.alpha
        assert (f[nd.members] >= nd.alpha).all()
    assert mf.increments == len(tree.leaves)
    assert np.all(np.diff(mf.p) >= 0) and np.all(np.diff(mf.alpha) <= 0)
    assert (mf.m >= 0).all()


def test_quantile_grid(rng):
    f = rng.exponential(size=500)
    g = density_quantile_grid(f)
    assert len(g) == 99
    assert np.all(np.diff(g.levels) > 0)
    assert g.levels[0] >= 0 and g.levels[-1] <= f.max()
    assert len(density_quantile_grid(np.ones(10))) == 1


def test_alpha_grid_validation():
    with pytest.raises(DataError):
        AlphaGrid([])
    with pytest.raises(DataError):
        AlphaGrid([0.2, 0.1])
    with pytest.raises(DataError):
        AlphaGrid([-1.0, 0.1])


def test_single_zero_level_is_one_component(rng):
    x = rng.normal(size=(50, 2))
    g = delaunay(x)
    f = kde_at_sample(DensityModel.fit(x))
    mf, tree = build_mode_function(f, g, AlphaGrid([0.0]))
    assert list(mf.m) == [1] and mf.increments == 1
    assert len(tree.nodes) == 1 and tree.nodes[0].size == 50


def test_grid_above_max_is_clamped(rng, caplog):
    x = rng.normal(size=(40, 2))
    f = kde_at_sample(DensityModel.fit(x))
    mf, _ = build_mode_function(f, delaunay(x), AlphaGrid([0.0, f.max() * 2]))
    assert mf.alpha.max() == f.max()
    assert "clamping" in caplog.text


def test_unimodal_and_bimodal():
    x, _ = planted(1, 300, seed=11)
    f, g, mf, tree = sweep(x)
    assert mf.increments == 1 and len(tree.leaves) == 1
    x, truth = planted(2, 300, seed=11)
    f, g, mf, tree = sweep(x)
    assert len(tree.leaves) == 2
    check_tree(tree, mf, f)
    split = [nd for nd in tree.nodes if len(nd.children) == 2]
    assert len(split) == 1 and 0 < split[0].level < len(tree.levels) - 1
    cores = extract_cores(tree, f)
    assert len(cores) == 2
    assert not set(cores[0]) & set(cores[1])
    for c in cores:
        assert len(np.unique(truth[c])) == 1  # no cross-contamination
    # the first core carries the highest peak
    assert f[cores[0]].max() >= f[cores[1]].max()


def test_low_density_points_outside_cores():
    x, _ = planted(2, 300, seed=5)
    f, g, mf, tree = sweep(x)
    cores = extract_cores(tree, f)
    split = max(nd.alpha for nd in tree.nodes if len(nd.children) > 1)
    below = np.flatnonzero(f <= split)
    assert len(below) > 0
    assert not np.isin(below, np.concatenate(cores)).any()


def test_allocate_single_cluster_all_policies(rng):
    x = rng.normal(size=(30, 2))
    for pol in ("static", "seq", "batch"):
        part = allocate([np.arange(5)], x, [0.5, 0.5], policy=pol)
        assert part.M == 1 and (part.labels == 1).all()
        assert part.core_flag.sum() == 5


def test_allocate_coincident_point():
    x = np.array([[0, 0], [0.1, 0], [0, 0.1], [10, 10], [10.1, 10], [10, 10.1], [0, 0]], float)
    for pol in ("static", "sequential", "batch"):
        part = allocate([[0, 1, 2], [3, 4, 5]], x, [0.3, 0.3], policy=pol)
        assert part.labels[6] == 1


def test_allocate_tie_goes_to_lower_id():
    x = np.array([[-1, 0], [1, 0], [0, 0]], float)
    part = allocate([[1], [0]], x, [1.0, 1.0], policy="static")
    assert part.labels[2] == 1
    assert part.ties == (2,)


def test_allocate_errors():
    x = np.zeros((4, 2))
    with pytest.raises(DataError, match="empty"):
        allocate([[0], []], x, [1, 1])
    with pytest.raises(DataError, match="overlap"):
        allocate([[0, 1], [1, 2]], x, [1, 1])
    with pytest.raises(DataError, match="policy"):
        allocate([[0], [1]], x, [1, 1], policy="greedy")
    with pytest.raises(DataError):
        allocate([], x, [1, 1])


def test_allocation_with_five_percent_noncore():
    x, truth = planted(2, 600, seed=2)
    r = np.random.default_rng(0)
    held = r.choice(600, size=30, replace=False)
    core_mask = np.ones(600, bool)
    core_mask[held] = False
    cores = [np.flatnonzero(core_mask & (truth == k)) for k in (1, 2)]
    h = DensityModel.fit(x).bandwidths
    for pol in ("static", "sequential", "batch"):
        part = allocate(cores, x, h, policy=pol)
        assert ari(part.labels, truth) >= 0.95
        assert part.core_flag.sum() == 570


def test_policies_agree_when_well_separated():
    x, truth = planted(3, 450, seed=9)
    labs = [pdf_cluster(x, policy=p).partition.labels for p in ("static", "sequential", "batch")]
    for lab in labs:
        assert ari(lab, truth) == pytest.approx(1.0)


def test_determinism():
    x, _ = planted(3, 300, seed=4)
    a = pdf_cluster(x)
    b = pdf_cluster(x.copy())
    assert np.array_equal(a.partition.labels, b.partition.labels)
    assert np.array_equal(a.densities, b.densities)
    assert a.tree.rows() == b.tree.rows()


def test_pdf_cluster_inputs(rng):
    with pytest.raises(DataError):
        pdf_cluster(np.zeros((2, 2)))
    with pytest.raises(DataError):
        pdf_cluster(np.zeros((5, 3)))
    x = rng.normal(size=(50, 2))
    res = pdf_cluster(x, bandwidths=(0.5, 0.5), bandwidth_scale=2.0)
    assert np.allclose(res.model.bandwidths, [1.0, 1.0])
    assert len(res.cluster_models()) == res.M


def test_all_noise_gives_one_cluster(rng):
    x = rng.normal(size=(6, 2))
    res = pdf_cluster(x, min_core=50)
    assert res.M == 1 and (res.partition.labels == 1).all()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000), st.integers(20, 90), st.integers(1, 4))
def test_invariants_on_random_data(seed, n, k):
    r = np.random.default_rng(seed)
    centres = r.uniform(-5, 5, size=(k, 2))
    x = centres[r.integers(0, k, n)] + r.normal(scale=r.uniform(0.2, 2), size=(n, 2))
    res = pdf_cluster(x)
    part = res.partition
    assert part.M >= 1
    assert set(np.unique(part.labels)) <= set(range(1, part.M + 1))
    assert (part.labels >= 1).all()
    flat = np.concatenate(res.cores)
    assert len(np.unique(flat)) == len(flat)
    if res.tree.nodes:
        check_tree(res.tree, res.mode_function, res.densities)
        assert len(res.tree.leaves) == part.M
