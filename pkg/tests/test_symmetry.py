import itertools

import pytest
from hypothesis import given, strategies as st

from stein_cpg import ConfigError, SubgroupError
from stein_cpg.model import CouplingConfig
from stein_cpg.symmetry import (
    K8,
    K_REFL,
    KAPPA8,
    LAMBDA8,
    OMEGA,
    OMEGA8,
    Permutation,
    SpatiotemporalSymmetry,
    check_typed_automorphism,
    compose,
    cyc,
    d4,
    default_edge_types,
    generate_group,
    hk_catalog,
    identity,
    quotient,
    relabel_phases,
    verify_gait_symmetry,
)

perms4 = st.permutations([1, 2, 3, 4]).map(lambda m: Permutation(tuple(m)))


def test_cycle_parsing_and_str():
    assert OMEGA.mapping == (3, 4, 2, 1)
    assert str(OMEGA) == "(1324)"
    assert str(identity(4)) == "e"
    with pytest.raises(ConfigError):
        cyc("(11)")


def test_omega_squared():
    # bottom row "2 4 1 3" of the two-row form
    sq = compose(OMEGA, OMEGA)
    assert sq.mapping == (2, 1, 4, 3)
    assert sq == cyc("(12)(34)")


def test_identity_is_neutral():
    assert compose(OMEGA, identity(4)) == OMEGA
    assert compose(identity(4), OMEGA) == OMEGA


def test_kappa_from_lambda():
    assert compose(LAMBDA8, K8) == KAPPA8
    assert KAPPA8 == cyc("(17)(35)(28)(46)", 8)


def test_compose_size_mismatch():
    with pytest.raises(ConfigError):
        compose(OMEGA, OMEGA8)


@given(perms4, perms4, perms4)
def test_compose_associative(p, q, r):
    assert compose(compose(p, q), r) == compose(p, compose(q, r))


def test_d4_order_four_and_eight_nodes():
    assert d4().order == 8
    g8 = generate_group([OMEGA8, KAPPA8])
    assert g8.order == 8
    assert not g8.is_abelian()


def test_trivial_group():
    assert generate_group([identity(4)]).order == 1


@given(st.lists(perms4, min_size=1, max_size=3))
def test_generated_groups_satisfy_axioms(gens):
    G = generate_group(gens)
    assert G.check_axioms()
    assert 24 % G.order == 0


def test_d4_isomorphic_after_lift():
    lifted = d4().lift()
    assert lifted.order == 8
    assert OMEGA8 in lifted and K8 in lifted


def test_quotient_z4_by_z2():
    H = generate_group([OMEGA])
    K = generate_group([OMEGA ** 2])
    q = quotient(H, K)
    assert q.order == 2 and q.is_cyclic


def test_quotient_by_self():
    H = d4()
    q = quotient(H, H)
    assert q.order == 1 and q.is_cyclic


def test_quotient_d4_by_trivial_not_cyclic():
    q = quotient(d4(), generate_group([identity(4)]))
    assert q.order == 8 and not q.is_cyclic


def test_quotient_requires_subgroup():
    with pytest.raises(SubgroupError):
        quotient(generate_group([OMEGA]), generate_group([K_REFL]))


def test_omega_is_typed_automorphism():
    c = CouplingConfig()
    assert check_typed_automorphism(OMEGA8, c.lam, default_edge_types(c))


def test_lambda_not_automorphism_under_defaults():
    c = CouplingConfig()
    assert not check_typed_automorphism(LAMBDA8, c.lam, default_edge_types(c))


def test_lambda_automorphism_when_gamma_equals_delta():
    c = CouplingConfig(gamma=-0.3, delta=-0.3)
    assert check_typed_automorphism(LAMBDA8, c.lam, default_edge_types(c))


def test_kappa_automorphism_when_gamma_equals_delta():
    c = CouplingConfig(gamma=-0.3, delta=-0.3)
    assert check_typed_automorphism(KAPPA8, c.lam, default_edge_types(c))
    assert not check_typed_automorphism(KAPPA8, CouplingConfig().lam, default_edge_types())


def test_typed_automorphism_brute_force_oracle():
    # every permutation of 8 nodes checked directly against the edge-value table
    c = CouplingConfig()
    labels = {k: v[1] for k, v in default_edge_types(c).items()}
    found = set()
    for m in itertools.permutations(range(1, 9)):
        p = Permutation(m)
        ok = all(labels.get((p(j), p(i))) == v for (j, i), v in labels.items())
        if ok:
            found.add(p)
    expected = {g for g in generate_group([OMEGA8]).elements}
    assert found == expected
    for p in found:
        assert check_typed_automorphism(p, c.lam, default_edge_types(c))


def test_node_layers_respected():
    c = CouplingConfig(alpha=-0.2, beta=-0.2, gamma=-0.2, delta=-0.2)
    layers = ["hip"] * 4 + ["knee"] * 4
    assert check_typed_automorphism(KAPPA8, c.lam, default_edge_types(c))
    assert not check_typed_automorphism(KAPPA8, c.lam, default_edge_types(c), layers)


def test_inconsistent_label_table():
    c = CouplingConfig()
    labels = default_edge_types(c)
    labels.pop(next(iter(labels)))
    with pytest.raises(ConfigError):
        check_typed_automorphism(OMEGA8, c.lam, labels)


def test_hk_catalog_rows():
    rows = {e.gait: e for e in hk_catalog()}
    assert set(rows) == {"walk", "trot", "pace", "bound", "pronk"}
    assert rows["walk"].H_name == "Z4(w)" and rows["walk"].K.order == 1
    assert rows["walk"].quotient_order == 4 and rows["walk"].phases == (0.5, 0.25, 0.75)
    assert rows["pronk"].quotient_order == 1 and rows["pronk"].phases == (0.0, 0.0, 0.0)
    assert rows["bound"].K_name == "Z2(w^2)" and rows["bound"].quotient_order == 2
    assert rows["bound"].phases == (0.0, 0.5, 0.5)
    assert all(e.verified for e in rows.values())


def test_k_elements_have_zero_shift():
    for e in hk_catalog():
        for s in e.symmetries:
            if s.perm in e.K:
                assert s.phase_shift == 0.0


def test_identity_residual_zero(runs):
    traj = runs("walk")
    r = verify_gait_symmetry(traj, SpatiotemporalSymmetry(identity(8), 0.0), 0.259, (10.0, 14.0))
    assert r == 0.0


def test_trot_half_period_swap(runs):
    sym = SpatiotemporalSymmetry(cyc("(12)(34)(56)(78)", 8), 0.5)
    from stein_cpg.analysis import estimate_period

    T = estimate_period(runs("trot"), 1, (10.0, 14.0))
    assert verify_gait_symmetry(runs("trot"), sym, T, (10.0, 14.0)) < 0.02


def test_walk_quarter_rotation(runs):
    from stein_cpg.analysis import estimate_period

    T = estimate_period(runs("walk"), 1, (10.0, 14.0))
    sym = SpatiotemporalSymmetry(OMEGA8, 0.25)
    assert verify_gait_symmetry(runs("walk"), sym, T, (10.0, 14.0)) < 0.02
    wrong = SpatiotemporalSymmetry(OMEGA8, 0.75)
    assert verify_gait_symmetry(runs("walk"), wrong, T, (10.0, 14.0)) > 0.2


def test_window_beyond_trajectory(runs):
    with pytest.raises(ConfigError):
        verify_gait_symmetry(runs("walk"), SpatiotemporalSymmetry(OMEGA8, 0.5), 0.26, (10.0, 15.0))


def test_trot_pace_conjugate_by_k():
    trot = next(e for e in hk_catalog() if e.gait == "trot").phases
    pace = next(e for e in hk_catalog() if e.gait == "pace").phases
    assert relabel_phases(trot, K_REFL) == pace


def test_trot_pace_conjugate_by_k_omega():
    trot = next(e for e in hk_catalog() if e.gait == "trot").phases
    pace = next(e for e in hk_catalog() if e.gait == "pace").phases
    assert relabel_phases(trot, compose(K_REFL, OMEGA)) == pace
