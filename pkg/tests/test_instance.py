import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coflowsched.fixtures import five_server_instance
from coflowsched.instance import (
    CoflowTask,
    DiscreteDist,
    FlowSpec,
    GeneratorConfig,
    Instance,
    InstanceError,
    InstanceFormatError,
    check_instance,
    dist_cv_squared,
    dist_mean,
    dist_tail,
    dumps_instance,
    generate_instance,
    instance_delta,
    loads_instance,
    validate_instance,
)

from conftest import dists, make_instance

TWO_POINT = DiscreteDist(((1, 0.5), (3, 0.5)))


@pytest.mark.parametrize(
    "dist, mean",
    [(DiscreteDist.deterministic(1), 1.0), (TWO_POINT, 2.0), (DiscreteDist.deterministic(2), 2.0)],
)
def test_dist_mean(dist, mean):
    assert dist_mean(dist) == pytest.approx(mean, abs=1e-12)


@pytest.mark.parametrize(
    "dist, cv2",
    [(DiscreteDist.deterministic(1), 0.0), (TWO_POINT, 0.25), (DiscreteDist.deterministic(5), 0.0)],
)
def test_dist_cv_squared(dist, cv2):
    assert dist_cv_squared(dist) == pytest.approx(cv2, abs=1e-12)


def test_dist_tail_examples():
    u = DiscreteDist.deterministic(1)
    assert dist_tail(u, 0) == 1.0
    assert dist_tail(u, 1) == 0.0
    assert dist_tail(TWO_POINT, 1) == pytest.approx(0.5)
    assert dist_tail(TWO_POINT, 2) == pytest.approx(0.5)
    assert dist_tail(TWO_POINT, 3) == 0.0
    with pytest.raises(ValueError):
        dist_tail(u, -1)


@given(dists())
def test_tail_sum_equals_mean(d):
    total = math.fsum(dist_tail(d, r) for r in range(d.max_size))
    assert abs(total - dist_mean(d)) < 1e-9


@given(dists())
def test_tail_nonincreasing_and_vanishes(d):
    vals = [dist_tail(d, r) for r in range(d.max_size + 2)]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
    assert vals[0] == pytest.approx(1.0, abs=1e-9)
    assert vals[d.max_size] == 0.0


def test_instance_delta():
    det = make_instance(2, [(1, 1, 1, 1), (2, 2, 1, 3)])
    assert instance_delta(det) == 0.0
    assert instance_delta(make_instance(1, [(1, 1, 1, TWO_POINT)])) == pytest.approx(0.25)
    mixed = make_instance(2, [(1, 1, 1, TWO_POINT), (2, 2, 1, 4)])
    assert instance_delta(mixed) == pytest.approx(0.25)


def codes(inst):
    return {i.code for i in validate_instance(inst)}


def test_validate_five_server_ok():
    assert validate_instance(five_server_instance()) == []


def test_validate_pmf_sum():
    bad = make_instance(2, [(1, 2, 1, DiscreteDist(((1, 0.4), (2, 0.5))))])
    issues = validate_instance(bad)
    assert [i.code for i in issues] == ["pmf-sum"]
    assert issues[0].path == "tasks[0].flows[0].dist"


def test_validate_server_range():
    bad = make_instance(2, [(3, 1, 1, 1)])
    issues = validate_instance(bad)
    assert [i.code for i in issues] == ["server-range"]
    assert issues[0].path.endswith(".source")


def test_validate_duplicate_link_and_ids():
    d = DiscreteDist.deterministic(1)
    dup = Instance(2, (CoflowTask(1, (FlowSpec(1, 2, 1, d), FlowSpec(1, 2, 1, d))),))
    assert "duplicate-link" in codes(dup)
    gap = Instance(2, (CoflowTask(1, (FlowSpec(1, 2, 1, d),)), CoflowTask(3, (FlowSpec(1, 2, 3, d),))))
    assert "task-ids" in codes(gap)
    # same link in different tasks is fine
    assert codes(make_instance(2, [(1, 2, 1, 1), (1, 2, 2, 1)])) == set()


def test_validate_dist_shape_and_weight():
    d = DiscreteDist(((2, 0.5), (2, 0.5)))
    assert "size-order" in codes(make_instance(2, [(1, 1, 1, d)]))
    assert "size-range" in codes(make_instance(2, [(1, 1, 1, DiscreteDist(((0, 1.0),)))]))
    bad_w = Instance(1, (CoflowTask(1, (FlowSpec(1, 1, 1, DiscreteDist.deterministic(1)),), 0.0),))
    assert "weight" in codes(bad_w)
    with pytest.raises(InstanceError):
        check_instance(bad_w)


def test_generate_slot_group_shape():
    cfg = GeneratorConfig(m=4, n_tasks=3, density=10 / 48, family="deterministic")
    inst = generate_instance(cfg, 7)
    assert len(inst.flows) == 10
    assert validate_instance(inst) == []
    assert {t.id for t in inst.tasks} == {1, 2, 3}


@pytest.mark.parametrize("seed", [0, 1, 99])
def test_generate_single_flow(seed):
    inst = generate_instance(GeneratorConfig(m=1, n_tasks=1, density=1.0), seed)
    assert [f.key for f in inst.flows] == [(1, 1, 1)]


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    family=st.sampled_from(GeneratorConfig.FAMILIES),
    m=st.integers(1, 4),
    n=st.integers(1, 4),
    density=st.floats(0.01, 1.0),
    cap=st.integers(1, 6),
    release=st.sampled_from(["zero", "uniform"]),
)
def test_generate_valid_and_deterministic(seed, family, m, n, density, cap, release):
    cfg = GeneratorConfig(m=m, n_tasks=n, density=density, family=family, size_cap=cap,
                          weight_range=(0.5, 2.0), release=release, release_bound=3)
    a = generate_instance(cfg, seed)
    assert validate_instance(a) == []
    assert dumps_instance(a) == dumps_instance(generate_instance(cfg, seed))
    assert all(f.dist.max_size <= cap for f in a.flows)


def test_generate_two_point_cv_cap():
    cfg = GeneratorConfig(m=3, n_tasks=3, density=0.5, family="two-point", size_cap=4, max_cv2=0.5)
    for seed in range(20):
        assert instance_delta(generate_instance(cfg, seed)) <= 0.5


@pytest.mark.parametrize(
    "kwargs",
    [dict(density=0.0), dict(density=1.5), dict(family="poisson"), dict(size_cap=0),
     dict(weight_range=(2.0, 1.0)), dict(release="late"), dict(m=0)],
)
def test_generate_rejects_bad_config(kwargs):
    with pytest.raises(ValueError):
        generate_instance(GeneratorConfig(**kwargs), 0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), family=st.sampled_from(GeneratorConfig.FAMILIES))
def test_round_trip_bit_identical(seed, family):
    cfg = GeneratorConfig(m=3, n_tasks=3, density=0.4, family=family, size_cap=5,
                          weight_range=(0.1, 3.0), release="uniform", release_bound=4)
    inst = generate_instance(cfg, seed)
    text = dumps_instance(inst)
    back = loads_instance(text)
    assert back == inst
    assert dumps_instance(back) == text


def test_canonical_form_details():
    inst = make_instance(3, [(2, 1, 1, DiscreteDist(((1, 0.1), (2, 0.9)))), (1, 3, 1, 2)], {1: 0.3})
    text = dumps_instance(inst)
    assert "0.10000000000000001" in text and "0.29999999999999999" in text
    # flows are sorted by (source, sink) in the canonical document
    assert text.index('"sink": 3') < text.index('"sink": 1')


def test_loads_rejects_garbage():
    with pytest.raises(InstanceFormatError):
        loads_instance("{not json")
    with pytest.raises(InstanceFormatError):
        loads_instance('{"tasks": []}')
