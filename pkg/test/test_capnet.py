import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from cdcim.capnet import CALIBRATED_SIGMA_C, Capacitor, CapNetwork, build_binary_baseline, build_caat_leaf, \
    build_caat_root, capacitance_report, dump_network, effective_weights, inject_mismatch, inl_profile, \
    leaf_effective_bits, leaf_transfer, load_network, montecarlo_leaf, node_charges, sample_effective_weights, \
    sample_seeds, solve_redistribution, yield_at, _draw_epsilons
from cdcim.exceptions import InlError, NetworkConstructionError, SolverError, ValueRangeError
from cdcim.models import LeafConfig, NodeRole, Phase
from cdcim.numeric import digit_weights

HYBRID_WEIGHTS = [Fraction(w, 256) for w in (1, 1, 2, 4, 8, 16, 32, 64, 128)]


def divider(low_c=1, high_c=1):
    nodes = {'gnd': NodeRole.DRIVEN, 'a': NodeRole.DRIVEN, 'b': NodeRole.DRIVEN, 'x': NodeRole.FLOATING}
    capacitors = [Capacitor('c_a', low_c, 'x', 'a'), Capacitor('c_b', high_c, 'x', 'b')]
    return CapNetwork(nodes, capacitors, [], [['a'], ['b']], 'x', name='divider')


def port_drive(net, values):
    """Every driven node at 0 except the port nodes, which take values in port order."""
    drive = {node: 0 for node, role in net.nodes.items() if role is NodeRole.DRIVEN}
    for port, value in zip(net.ports, values):
        for node in port:
            drive[node] = value
    return drive


class TestLeafConstruction:

    def test_hybrid_capacitance(self):
        net = build_caat_leaf(LeafConfig.HYBRID)
        assert net.total_capacitance() == 96
        assert sum(1 for cap in net.capacitors if cap.kind == 'bridge') == 3

    def test_hybrid_loads_are_equal(self):
        loads = build_caat_leaf(LeafConfig.HYBRID).scl_loads()
        assert len(loads) == 10
        assert set(loads) == {9}

    def test_hybrid_weights(self):
        net = build_caat_leaf(LeafConfig.HYBRID)
        assert list(net.weights()) == HYBRID_WEIGHTS
        assert sum(net.weights()) == 1

    def test_msb_spans_two_scls(self):
        net = build_caat_leaf(LeafConfig.HYBRID)
        assert net.ports[-1] == ('scl_n7a', 'scl_n7b')

    def test_unsplit_msb(self):
        net = build_caat_leaf(LeafConfig.UNSPLIT)
        assert list(net.weights()) == HYBRID_WEIGHTS
        assert set(net.scl_loads()) == {17}

    def test_full_binary_weights(self):
        net = build_caat_leaf(LeafConfig.FULL_BINARY)
        assert list(net.weights()) == HYBRID_WEIGHTS
        assert not any(cap.kind == 'bridge' for cap in net.capacitors)

    def test_single_column(self):
        net = build_caat_leaf(LeafConfig(n_bits=1, binary_high_bits=0))
        assert len(net.ports) == 1
        assert list(net.weights()) == [1]

    def test_ladder_section(self):
        net = build_caat_leaf(LeafConfig(3, 0, False, 1, None))
        assert list(net.weights()) == [Fraction(1, 4), Fraction(1, 4), Fraction(1, 2)]

    def test_lone_half_digit_on_ladder(self):
        with pytest.raises(NetworkConstructionError):
            build_caat_leaf(LeafConfig(9, 8))

    def test_load_smaller_than_coupling(self):
        with pytest.raises(NetworkConstructionError):
            build_caat_leaf(LeafConfig(9, 4, True, 1, 4))

    def test_non_positive_capacitor(self):
        with pytest.raises(NetworkConstructionError):
            Capacitor('c', 0, 'a', 'b')

    def test_parasitics_attenuate(self):
        net = build_caat_leaf(LeafConfig.HYBRID, parasitic=1)
        assert net.total_capacitance() == 96
        assert sum(net.weights()) < 1
        assert any(cap.kind == 'parasitic' for cap in net.capacitors)

    def test_unknown_node(self):
        nodes = {'gnd': NodeRole.DRIVEN, 'x': NodeRole.FLOATING}
        with pytest.raises(NetworkConstructionError):
            CapNetwork(nodes, [Capacitor('c', 1, 'x', 'y')], [], [], 'x')

    def test_document_round_trip(self):
        net = inject_mismatch(build_caat_leaf(LeafConfig.HYBRID), 0.01, 3)
        assert load_network(dump_network(net)) == net

    def test_malformed_document(self):
        with pytest.raises(NetworkConstructionError):
            load_network('{"schema_version": 1}')


class TestRootAndBaseline:

    def test_nine_bank_root(self):
        root = build_caat_root(9)
        assert list(root.weights()) == HYBRID_WEIGHTS
        assert root.summation_phase == Phase.IN_ARRAY

    def test_single_bank_root(self):
        assert list(build_caat_root(1).weights()) == [1]

    def test_root_averages_equal_inputs(self):
        root = build_caat_root(9)
        v = Fraction(3, 7)
        assert sum(w * v for w in root.weights()) == v

    def test_baseline_capacitance(self):
        net = build_binary_baseline(8)
        assert net.total_capacitance() == 1032
        assert set(net.scl_loads()) == {129}
        assert list(net.weights()) == [Fraction(2 ** i, 255) for i in range(8)]

    def test_capacitance_report(self):
        report = capacitance_report()
        assert report['proposed_c'] == 96
        assert report['baseline_c'] == 1032
        assert report['reduction'] == pytest.approx(10.75)


class TestSolver:

    def test_equal_divider(self):
        voltages = solve_redistribution(divider(), {'a': 0, 'b': 1})
        assert voltages['x'] == pytest.approx(0.5)

    def test_unequal_divider_exact(self):
        voltages = solve_redistribution(divider(1, 3), {'a': 0, 'b': 1}, exact=True)
        assert voltages['x'] == Fraction(3, 4)

    def test_initial_charge(self):
        voltages = solve_redistribution(divider(1, 3), {'a': 0, 'b': 1}, initial_charges={'x': 1}, exact=True)
        assert voltages['x'] == 1

    def test_charge_is_conserved(self):
        net = divider(1, 3)
        voltages = solve_redistribution(net, {'a': 0.2, 'b': 0.9})
        charges = node_charges(net, voltages)
        assert charges['x'] == pytest.approx(0, abs=1e-12)

    def test_missing_drive(self):
        with pytest.raises(SolverError):
            solve_redistribution(divider(), {'a': 0})

    def test_floating_island(self):
        # no ScL is connected in the in-column phase, so the taps and ladder float freely
        net = build_caat_leaf(LeafConfig.HYBRID)
        drive = {node: 0 for node, role in net.nodes.items() if role is NodeRole.DRIVEN}
        with pytest.raises(SolverError):
            solve_redistribution(net, drive, phase=Phase.IN_COLUMN, exact=True)

    def test_leaf_superposition(self):
        net = build_caat_leaf(LeafConfig.HYBRID)
        drive = {node: 0 for node, role in net.nodes.items() if role is NodeRole.DRIVEN}
        drive.update({'scl_n7a': 1, 'scl_n7b': 1})
        assert solve_redistribution(net, drive, exact=True)['out'] == Fraction(1, 2)

    def test_superposition(self):
        net = build_caat_leaf(LeafConfig.HYBRID)
        rng = np.random.default_rng(3)
        a, b = Fraction(2, 3), Fraction(-5, 4)

        def out(values):
            return solve_redistribution(net, port_drive(net, values), exact=True)['out']

        for _ in range(3):
            first = [Fraction(int(x), 7) for x in rng.integers(-7, 8, len(net.ports))]
            second = [Fraction(int(x), 7) for x in rng.integers(-7, 8, len(net.ports))]
            combined = [a * x + b * y for x, y in zip(first, second)]
            assert out(combined) == a * out(first) + b * out(second)

    def test_exact_solve_returns_fractions(self):
        weights = effective_weights(build_caat_leaf(LeafConfig.HYBRID), exact=True)
        assert all(isinstance(w, Fraction) for w in weights)
        assert weights == HYBRID_WEIGHTS

    def test_transfer_is_monotone_over_all_inputs(self):
        net = build_caat_leaf(LeafConfig.HYBRID)
        combos = np.asarray(list(itertools.product((-1, 1), repeat=len(net.ports))))
        decoded = combos @ np.asarray([float(w) for w in digit_weights(8)])
        outputs = np.asarray([solve_redistribution(net, port_drive(net, combo))['out'] for combo in combos])
        order = np.argsort(decoded, kind='stable')
        decoded, outputs = decoded[order], outputs[order]
        assert outputs == pytest.approx(decoded / 128, abs=1e-12)
        steps = np.diff(outputs)[np.diff(decoded) > 0]
        assert steps.size == 256
        assert np.all(steps > 0)


class TestMismatch:

    def test_zero_sigma_is_identity(self):
        net = build_caat_leaf(LeafConfig.HYBRID)
        assert inject_mismatch(net, 0.0, 1) == net

    def test_same_seed(self):
        net = build_caat_leaf(LeafConfig.HYBRID)
        assert inject_mismatch(net, 0.01, 42) == inject_mismatch(net, 0.01, 42)
        assert inject_mismatch(net, 0.01, 42) != inject_mismatch(net, 0.01, 43)

    def test_epsilon_spread(self):
        epsilons = _draw_epsilons(10000, 0.01, 7)
        assert np.std(epsilons) == pytest.approx(0.01, rel=0.05)

    def test_negative_sigma(self):
        with pytest.raises(ValueRangeError):
            inject_mismatch(build_caat_leaf(), -0.01)

    def test_msb_half_upward(self):
        net = build_caat_leaf(LeafConfig.HYBRID)
        epsilons = [0.1 if cap.id == 'c_n7a' else 0.0 for cap in net.capacitors]
        weights = effective_weights(net.with_epsilons(epsilons))
        assert weights[-1] > 0.5
        assert weights[-1] == pytest.approx(16.8 / 32.8)
        assert float(np.sum(weights)) == pytest.approx(1.0)

    def test_float_path_matches_exact(self):
        net = build_caat_leaf(LeafConfig.HYBRID)
        weights = effective_weights(net, exact=False)
        assert np.allclose(weights, [float(w) for w in HYBRID_WEIGHTS], atol=1e-14)

    def test_batched_weights_match_single_draws(self):
        net = build_caat_leaf(LeafConfig.HYBRID)
        batch = sample_effective_weights(net, 0.02, 4, seed=5)
        for row, child in zip(batch, sample_seeds(5, 4)):
            single = effective_weights(inject_mismatch(net, 0.02, child))
            assert np.allclose(row, single, atol=1e-12)


class TestInl:

    def test_ideal_transfer(self):
        profile = inl_profile(np.arange(256))
        assert profile.max_abs_inl == 0
        assert profile.effective_bits == 8
        assert profile.monotone

    def test_mid_code_bump(self):
        transfer = np.arange(256, dtype=float)
        transfer[128] += 1.2
        profile = inl_profile(transfer)
        assert profile.max_abs_inl == pytest.approx(1.2)
        assert profile.effective_bits == pytest.approx(8 - math.log2(2.4))

    def test_end_points_are_zero(self):
        transfer = np.cumsum(np.random.default_rng(0).uniform(0.5, 1.5, 256))
        profile = inl_profile(transfer)
        assert profile.inl[0] == pytest.approx(0, abs=1e-9)
        assert profile.inl[-1] == pytest.approx(0, abs=1e-9)

    def test_too_few_codes(self):
        with pytest.raises(InlError):
            inl_profile([1.0])

    def test_ideal_leaf(self):
        net = build_caat_leaf(LeafConfig.HYBRID)
        assert len(leaf_transfer(net)) == 257
        assert leaf_effective_bits(net) == 8


class TestMonteCarlo:

    def test_zero_sigma(self):
        samples = montecarlo_leaf(0.0, 5, seed=1)
        assert [s.sample for s in samples] == list(range(5))
        assert all(s.effective_bits == 8 for s in samples)

    def test_seeded(self):
        assert montecarlo_leaf(0.02, 8, seed=3) == montecarlo_leaf(0.02, 8, seed=3)

    def test_yield_falls_with_sigma(self):
        assert yield_at(0.001, 200) >= yield_at(0.02, 200) >= yield_at(0.08, 200)

    @pytest.mark.slow
    def test_calibrated_yield(self):
        assert 0.55 <= yield_at(CALIBRATED_SIGMA_C, 1000, seed=0) <= 0.85
