import math

import numpy as np
import pytest

from rdlnlab.errors import LoadError, ParameterError
from rdlnlab.hmm import (allowed_transitions, build_hmm, build_state_maps, dumps_hmm,
                         emission_loglik, loads_hmm, load_hmm, save_hmm)


def test_single_state_closure():
    hmm = build_hmm(1, 1, 2, 0.5, seed=7)
    assert hmm.transitions.tolist() == [[1.0]]
    assert hmm.initial_probs.tolist() == [1.0]


def test_two_single_state_phones():
    hmm = build_hmm(2, 1, 2, 0.6, seed=1)
    # self-loop 0.6 plus 0.2 re-entry of its own phone; 0.2 to the other
    assert np.allclose(hmm.transitions, [[0.8, 0.2], [0.2, 0.8]], atol=1e-15)
    assert np.allclose(hmm.transitions.sum(axis=1), 1.0, atol=1e-15)


def test_default_topology_rows_by_summation(default_hmm):
    T = default_hmm.transitions
    assert T.shape == (30, 30)
    for row in T:
        s = 0.0
        for v in row:
            assert 0.0 <= v <= 1.0
            s += v
        assert abs(s - 1.0) <= 1e-9
    assert abs(sum(default_hmm.initial_probs) - 1.0) <= 1e-9
    assert np.all(default_hmm.variances > 0)
    assert not np.any((T > 0) & ~allowed_transitions(10, 3))


def test_topology_details(default_hmm):
    T = default_hmm.transitions
    assert T[0, 0] == 0.5 and T[0, 1] == 0.5
    # phone-final state: 0.5 self loop, 0.05 to each of ten entry states
    assert T[2, 2] == 0.5
    assert np.allclose(T[2, [0, 3, 6, 9, 12, 15, 18, 21, 24, 27]], 0.05)
    assert np.count_nonzero(T[2]) == 11


def test_mean_separation(default_hmm):
    m = default_hmm.means
    d = np.sqrt(((m[:, None] - m[None]) ** 2).sum(-1))
    assert d[~np.eye(30, dtype=bool)].min() >= 1.0


def test_low_dimensional_separation_terminates():
    hmm = build_hmm(6, 3, 1, 0.5, seed=0)
    m = np.sort(hmm.means[:, 0])
    assert np.diff(m).min() >= 1.0


def test_determinism():
    a = build_hmm(4, 3, 5, 0.3, seed=9)
    b = build_hmm(4, 3, 5, 0.3, seed=9)
    assert dumps_hmm(a) == dumps_hmm(b)
    assert a.fingerprint() == b.fingerprint()
    assert dumps_hmm(build_hmm(4, 3, 5, 0.3, seed=10)) != dumps_hmm(a)


@pytest.mark.parametrize("args", [(0, 1, 2, 0.5), (1, 0, 2, 0.5), (1, 1, 0, 0.5),
                                  (1, 1, 2, 0.0), (1, 1, 2, 1.0), (2.5, 1, 2, 0.5)])
def test_invalid_arguments(args):
    with pytest.raises(ParameterError):
        build_hmm(*args, seed=0)


def test_state_maps_monophones():
    maps = build_state_maps(build_hmm(2, 2, 2, 0.5, seed=0))
    assert maps.pdf_to_monophone[3] == 1


def test_state_maps_round_trip_and_counts(default_hmm, default_maps):
    maps = default_maps
    for p in range(default_hmm.num_pdfs):
        tids = maps.pdf_to_transition[p]
        assert tids
        assert maps.transition_to_pdf[tids[0]] == p
        assert all(maps.transition_to_pdf[t] == p for t in tids)
        # one transition-id per outgoing arc
        assert len(tids) == np.count_nonzero(default_hmm.transitions[p])
    counts = {}
    for p in range(30):
        counts[int(maps.pdf_to_monophone[p])] = counts.get(int(maps.pdf_to_monophone[p]), 0) + 1
    assert counts == {m: 3 for m in range(10)}


def test_transition_ids_lexicographic(small_hmm):
    maps = build_state_maps(small_hmm)
    arcs = list(zip(maps.transition_to_pdf.tolist(), maps.transition_dest.tolist()))
    assert arcs == sorted(arcs)
    assert np.array_equal(maps.transition_matrix(), small_hmm.transitions)


def test_emission_at_mean():
    hmm = build_hmm(2, 1, 2, 0.5, seed=4, variance_range=(1.0, 1.0))
    ll = emission_loglik(hmm, hmm.means[1])
    assert ll[1] == pytest.approx(-math.log(2 * math.pi), abs=1e-14)


def test_emission_matches_scalar_oracle(rng):
    hmm = build_hmm(3, 2, 3, 0.5, seed=8)
    x = rng.normal(size=3)
    ll = emission_loglik(hmm, x)
    for j in range(hmm.num_pdfs):
        ref = 0.0
        for d in range(3):
            mu, var = hmm.means[j, d], hmm.variances[j, d]
            ref += -0.5 * math.log(2 * math.pi * var) - (x[d] - mu) ** 2 / (2 * var)
        assert ll[j] == pytest.approx(ref, abs=1e-12)


def test_emission_identical_parameters_give_identical_entries():
    hmm = build_hmm(2, 1, 2, 0.5, seed=4)
    twin = type(hmm)(2, 1, 2, hmm.transitions.copy(), hmm.initial_probs.copy(),
                     np.vstack([hmm.means[0], hmm.means[0]]), np.vstack([hmm.variances[0]] * 2))
    ll = emission_loglik(twin, [0.3, -1.2])
    assert ll[0] == ll[1]


def test_emission_dimension_mismatch(small_hmm):
    with pytest.raises(ParameterError):
        emission_loglik(small_hmm, [1.0, 2.0])


def test_file_round_trip(tmp_path, default_hmm):
    path = tmp_path / "hmm.txt"
    save_hmm(default_hmm, path)
    back = load_hmm(path)
    for name in ("transitions", "initial_probs", "means", "variances"):
        assert np.array_equal(getattr(back, name), getattr(default_hmm, name))
    assert path.read_text().splitlines()[0] == "hmm v1 10 3 13"


@pytest.mark.parametrize("mutate, lineno", [
    (lambda ls: ["hmm v2 2 2 3"] + ls[1:], 1),
    (lambda ls: ls[:3], None),
    (lambda ls: ls[:2] + ["0.5 x 0.5 0"] + ls[3:], 3),
    (lambda ls: ls[:6] + [ls[6].replace("|", "")] + ls[7:], 7),
])
def test_loader_rejects_malformed(small_hmm, mutate, lineno):
    lines = dumps_hmm(small_hmm).splitlines()
    with pytest.raises(LoadError) as err:
        loads_hmm("\n".join(mutate(lines)) + "\n")
    assert str(err.value).startswith("line ")
    if lineno:
        assert str(err.value).startswith(f"line {lineno}:")


def test_loader_rejects_non_stochastic(small_hmm):
    lines = dumps_hmm(small_hmm).splitlines()
    lines[1] = "0.9 0.9 0 0"
    with pytest.raises(LoadError):
        loads_hmm("\n".join(lines))
