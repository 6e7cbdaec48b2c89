import json

import numpy as np
import pytest

from conftest import small_vein
from vesselmc.comms import DetectionConfig, ModulationScheme, zero_isi_cir
from vesselmc.core import ValveSpec
from vesselmc.relay import (
    compare_valve_aligned,
    RelayChain,
    RelayHop,
    TooManyHops,
    simulate_relay_chain,
    valve_aligned_placement,
)
from vesselmc.rng import RngStream

CSK = ModulationScheme.csk((100, 200), 1.0)


def _noisy_hop():
    # capture 0.1: Poisson-ish counts around 10 and 20, threshold 15
    return RelayHop(zero_isi_cir(1.0, capture=0.1), DetectionConfig.fixed(15))


def _bits(n, seed):
    return np.random.default_rng(seed).integers(0, 2, n)


def test_perfect_chain_is_identity():
    bcsk = ModulationScheme.bcsk(1000, 1.0)
    hop = RelayHop(zero_isi_cir(1.0), DetectionConfig.fixed(500))
    bits = _bits(500, 1)
    rep = simulate_relay_chain(RelayChain([hop] * 4, bcsk), bits, rng=3)
    assert rep.per_hop_ber == [0.0] * 4
    assert rep.end_to_end_ber == 0.0


def test_single_hop_end_to_end_equals_hop_ber():
    rep = simulate_relay_chain(RelayChain([_noisy_hop()], CSK), _bits(2000, 2), rng=5)
    assert rep.per_hop_ber[0] > 0
    assert rep.end_to_end_ber == rep.per_hop_ber[0]


def test_two_hop_composition():
    chain = RelayChain([_noisy_hop(), _noisy_hop()], CSK)
    e2e, p = [], []
    for seed in range(20):
        rep = simulate_relay_chain(chain, _bits(10_000, 100 + seed), rng=seed)
        e2e.append(rep.end_to_end_ber)
        p.extend(rep.per_hop_ber)
    p = np.mean(p)
    predicted = 2 * p * (1 - p)
    stderr = np.std(e2e, ddof=1) / np.sqrt(len(e2e))
    assert abs(np.mean(e2e) - predicted) < 3 * stderr + 1e-12


def test_processing_delay_does_not_change_decisions():
    bits = _bits(3000, 4)
    a = simulate_relay_chain(RelayChain([_noisy_hop()] * 3, CSK), bits, rng=9)
    b = simulate_relay_chain(RelayChain([_noisy_hop()] * 3, CSK, processing_delay_s=0.37), bits, rng=9)
    assert a.per_hop_ber == b.per_hop_ber
    assert a.end_to_end_ber == b.end_to_end_ber
    assert b.hop_start_s[1] == pytest.approx(3000 + 0.37)


def test_molecule_budget():
    bits = [1, 0, 1, 1, 0, 1]
    bcsk = ModulationScheme.bcsk(1000, 1.0)
    hop = RelayHop(zero_isi_cir(1.0), DetectionConfig.fixed(500))
    rep = simulate_relay_chain(RelayChain([hop] * 3, bcsk), bits, rng=RngStream(1, 0))
    assert rep.molecules_per_hop == [4000] * 3
    assert rep.total_molecules == 12000
    d = json.loads(rep.to_json())
    assert set(d) == {"per_hop_ber", "end_to_end_ber", "molecules_per_hop", "total_molecules", "hop_start_s"}


def test_chain_validation():
    with pytest.raises(ValueError):
        RelayChain([], CSK)
    with pytest.raises(ValueError):
        RelayChain([_noisy_hop()], CSK, processing_delay_s=-1)
    with pytest.raises(ValueError):
        simulate_relay_chain(RelayChain([_noisy_hop()], CSK), [], rng=0)


def _valved(axials):
    return small_vein(n=500, valves=tuple(ValveSpec(a, 1.0, 1.0, 0.0) for a in axials))


def test_one_valve_two_hops_splits_at_valve():
    sc = _valved([1000.0])
    chain = valve_aligned_placement(sc, 2, CSK, DetectionConfig.fixed(15))
    assert chain.boundaries_um == (1000.0,)
    first, second = (h.channel for h in chain.hops)
    assert first.geometry.length_um == pytest.approx(1000.0 - sc.tx_position.axial_um)
    # relay receiver touches the valve plane from upstream
    rx = first.receivers[0]
    assert rx.center_axial_um + rx.radius_um == pytest.approx(first.geometry.length_um)
    assert second.tx_position.axial_um == 0.0
    assert first.valves == () and second.valves == ()
    assert second.seed == sc.seed + 1


def test_zero_valves_one_hop_is_single_link():
    sc = small_vein(n=500)
    chain = valve_aligned_placement(sc, 1, CSK, DetectionConfig.fixed(15))
    assert len(chain.hops) == 1 and chain.hops[0].channel == sc


def test_too_many_hops():
    with pytest.raises(TooManyHops):
        valve_aligned_placement(_valved([1000.0]), 3, CSK, DetectionConfig.fixed(15))
    with pytest.raises(TooManyHops):
        valve_aligned_placement(small_vein(n=500), 2, CSK, DetectionConfig.fixed(15))


def test_inner_valves_stay_in_their_segment():
    sc = _valved([500.0, 1000.0, 1500.0])
    chain = valve_aligned_placement(sc, 2, CSK, DetectionConfig.fixed(15))
    assert chain.boundaries_um == (1000.0,)
    a, b = (h.channel for h in chain.hops)
    assert [v.axial_um for v in a.valves] == [500.0 - sc.tx_position.axial_um]
    assert [v.axial_um for v in b.valves] == [500.0]


@pytest.mark.slow
def test_valve_aligned_vs_single_link_reported():
    # outcome is reported only: the benefit of valve-aligned relays is a hypothesis
    sc = small_vein(n=20_000, end=3.0, valves=(ValveSpec(667.0, 1.0, 0.5), ValveSpec(1333.0, 1.0, 0.5)))
    rec = compare_valve_aligned(sc, 3, molecules_per_bit=100, symbol_duration_s=0.5, n_bits=2000, seeds=range(10))
    assert rec["boundaries_um"] == [667.0, 1333.0]
    assert len(rec["single_link_ber"]) == len(rec["relay_ber"]) == 10
    assert all(0.0 <= b <= 1.0 for b in rec["single_link_ber"] + rec["relay_ber"])
    print(f"\nvalve-aligned 3-hop mean BER {rec['relay_mean']:.4f} vs single link {rec['single_link_mean']:.4f}")
