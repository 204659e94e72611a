"""Capacitor networks: construction, charge-redistribution solves, mismatch and INL."""
import json
import logging
import math
from collections import namedtuple
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sympy import Matrix, Rational

from cdcim.exceptions import InlError, NetworkConstructionError, SolverError, ValueRangeError
from cdcim.models import ChipFigures, InlProfile, LeafConfig, NodeRole, Phase, PhaseSchedule, Switch
from cdcim.numeric import bit_indices, encode_array, value_range
from cdcim.utils import dumps_json

logger = logging.getLogger(__name__)

GROUND = 'gnd'
OUTPUT = 'out'
SOLVER_TOLERANCE = 1e-12
SCHEMA_VERSION = 1


class Capacitor(namedtuple('_Capacitor', ['id', 'nominal', 'a', 'b', 'epsilon', 'kind'])):
    """nominal is in units of C; the realized value is nominal * (1 + epsilon)."""

    def __new__(cls, id: str, nominal, a: str, b: str, epsilon: float = 0.0, kind: str = 'coupling'):
        nominal = Fraction(nominal)
        if nominal <= 0:
            raise NetworkConstructionError('capacitor {} has non-positive nominal value {}'.format(id, nominal))
        if 1 + epsilon <= 0:
            raise NetworkConstructionError('capacitor {} mismatch {} leaves no capacitance'.format(id, epsilon))
        return super().__new__(cls, id, nominal, a, b, float(epsilon), kind)

    @property
    def endpoints(self) -> Tuple[str, str]:
        return self.a, self.b

    @property
    def value(self):
        if self.epsilon == 0:
            return self.nominal
        return float(self.nominal) * (1 + self.epsilon)


class CapNetwork:
    """An immutable capacitor graph with driven input ports and one output node.

    ports[i] lists the driven nodes that carry input i; a port may span several
    nodes (the split MSB drives two ScL columns).
    """

    def __init__(self, nodes: Dict[str, NodeRole], capacitors: Sequence[Capacitor],
                 switches: Sequence[Tuple[Switch, str, str]], ports: Sequence[Sequence[str]],
                 output: str, summation_switch: Switch = Switch.S2, name: str = 'network') -> None:
        self._nodes = dict(nodes)
        self._capacitors = tuple(capacitors)
        self._switches = tuple((Switch(s), a, b) for s, a, b in switches)
        self._ports = tuple(tuple(port) for port in ports)
        self.output = output
        self.summation_switch = Switch(summation_switch)
        self.name = name
        self._weights = None
        self._validate()

    @property
    def nodes(self) -> Dict[str, NodeRole]:
        return dict(self._nodes)

    @property
    def capacitors(self) -> Tuple[Capacitor, ...]:
        return self._capacitors

    @property
    def switches(self) -> Tuple[Tuple[Switch, str, str], ...]:
        return self._switches

    @property
    def ports(self) -> Tuple[Tuple[str, ...], ...]:
        return self._ports

    @property
    def summation_phase(self) -> Phase:
        for phase, switch in PhaseSchedule.CLOSED.items():
            if switch is self.summation_switch:
                return phase

    def weights(self):
        """Effective weights, solved once per network."""
        if self._weights is None:
            weights = effective_weights(self)
            if isinstance(weights, np.ndarray):
                weights.flags.writeable = False
            else:
                weights = tuple(weights)
            self._weights = weights
        return self._weights

    @property
    def is_ideal(self) -> bool:
        return all(cap.epsilon == 0 for cap in self._capacitors)

    def _validate(self) -> None:
        for cap in self._capacitors:
            for node in cap.endpoints:
                if node not in self._nodes:
                    raise NetworkConstructionError('capacitor {} touches unknown node {}'.format(cap.id, node))
        for _, a, b in self._switches:
            if a not in self._nodes or b not in self._nodes:
                raise NetworkConstructionError('switch {}-{} touches an unknown node'.format(a, b))
        for port in self._ports:
            for node in port:
                if self._nodes.get(node) is not NodeRole.DRIVEN:
                    raise NetworkConstructionError('port node {} is not a driven node'.format(node))
        if self.output not in self._nodes:
            raise NetworkConstructionError('output node {} is unknown'.format(self.output))
        touched = {node for cap in self._capacitors for node in cap.endpoints}
        for node, role in self._nodes.items():
            if role is NodeRole.FLOATING and node not in touched:
                raise NetworkConstructionError('floating node {} has no capacitor'.format(node))
        groups = _merge_groups(self, self.summation_phase)
        adjacency = {}
        for cap in self._capacitors:
            ga, gb = groups[cap.a], groups[cap.b]
            adjacency.setdefault(ga, set()).add(gb)
            adjacency.setdefault(gb, set()).add(ga)
        frontier = [groups[self.output]]
        reached = set(frontier)
        while frontier:
            for neighbour in adjacency.get(frontier.pop(), ()):
                if neighbour not in reached:
                    reached.add(neighbour)
                    frontier.append(neighbour)
        if set(adjacency) - reached:
            raise NetworkConstructionError('{} is not connected in its summation phase'.format(self.name))

    def with_epsilons(self, epsilons: Sequence[float]) -> 'CapNetwork':
        if len(epsilons) != len(self._capacitors):
            raise NetworkConstructionError('expected {} mismatch values, got {}'.format(
                len(self._capacitors), len(epsilons)))
        capacitors = [Capacitor(cap.id, cap.nominal, cap.a, cap.b, float(eps), cap.kind)
                      for cap, eps in zip(self._capacitors, epsilons)]
        return CapNetwork(self._nodes, capacitors, self._switches, self._ports, self.output,
                          self.summation_switch, self.name)

    def total_capacitance(self, kinds: Optional[Sequence[str]] = None) -> Fraction:
        """Nominal capacitance in units of C, parasitics excluded unless asked for."""
        kinds = kinds or ('coupling', 'pad', 'bridge')
        return sum((cap.nominal for cap in self._capacitors if cap.kind in kinds), Fraction(0))

    def scl_loads(self) -> List[Fraction]:
        """Nominal capacitance on every ScL (every port node) with its switch closed."""
        groups = _merge_groups(self, self.summation_phase)
        loads = []
        for port in self._ports:
            for node in port:
                group = groups[node]
                loads.append(sum((cap.nominal for cap in self._capacitors
                                  if (groups[cap.a] == group) != (groups[cap.b] == group)), Fraction(0)))
        return loads

    def to_dict(self) -> dict:
        return {
            'schema_version': SCHEMA_VERSION,
            'name': self.name,
            'output': self.output,
            'summation_switch': self.summation_switch.value,
            'nodes': [{'id': node, 'role': role.value} for node, role in self._nodes.items()],
            'capacitors': [{'id': cap.id, 'a': cap.a, 'b': cap.b, 'nominal': str(cap.nominal),
                            'epsilon': cap.epsilon, 'kind': cap.kind} for cap in self._capacitors],
            'switches': [{'switch': s.value, 'a': a, 'b': b} for s, a, b in self._switches],
            'ports': [list(port) for port in self._ports],
        }

    @classmethod
    def from_dict(cls, document: dict) -> 'CapNetwork':
        if document.get('schema_version') != SCHEMA_VERSION:
            raise NetworkConstructionError('unsupported network schema {!r}'.format(document.get('schema_version')))
        try:
            nodes = {node['id']: NodeRole(node['role']) for node in document['nodes']}
            capacitors = [Capacitor(cap['id'], Fraction(cap['nominal']), cap['a'], cap['b'],
                                    cap.get('epsilon', 0.0), cap.get('kind', 'coupling'))
                          for cap in document['capacitors']]
            switches = [(Switch(sw['switch']), sw['a'], sw['b']) for sw in document['switches']]
            return cls(nodes, capacitors, switches, document['ports'], document['output'],
                       Switch(document['summation_switch']), document.get('name', 'network'))
        except (KeyError, TypeError, ValueError) as error:
            raise NetworkConstructionError('malformed network document: {}'.format(error))

    def __eq__(self, other) -> bool:
        return isinstance(other, CapNetwork) and self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return 'CapNetwork({!r}, {} nodes, {} capacitors, {} ports)'.format(
            self.name, len(self._nodes), len(self._capacitors), len(self._ports))


def dump_network(net: CapNetwork) -> str:
    return dumps_json(net.to_dict())


def load_network(text: str) -> CapNetwork:
    try:
        document = json.loads(text)
    except ValueError as error:
        raise NetworkConstructionError('network document is not JSON: {}'.format(error))
    return CapNetwork.from_dict(document)


class NetworkBuilder:
    def __init__(self, unit) -> None:
        self.unit = Fraction(unit)
        self.nodes = {GROUND: NodeRole.DRIVEN}
        self.capacitors = []
        self.switches = []

    def node(self, node: str, role: NodeRole) -> str:
        self.nodes[node] = role
        return node

    def cap(self, id: str, units, a: str, b: str, kind: str) -> None:
        self.capacitors.append(Capacitor(id, Fraction(units) * self.unit, a, b, kind=kind))

    def scl(self, name: str, coupling, target: str, switch: Switch) -> str:
        scl = self.node('scl_' + name, NodeRole.DRIVEN)
        tap = self.node('tap_' + name, NodeRole.FLOATING)
        self.switches.append((switch, scl, tap))
        self.cap('c_' + name, coupling, tap, target, 'coupling')
        return scl

    def pad_loads(self, scl_load) -> Fraction:
        couplings = {cap.a: cap.nominal for cap in self.capacitors if cap.kind == 'coupling'}
        largest = max(couplings.values())
        load = largest + self.unit if scl_load is None else Fraction(scl_load) * self.unit
        for tap, coupling in couplings.items():
            if coupling > load:
                raise NetworkConstructionError('ScL load {}C cannot hold a {}C coupling capacitor'.format(
                    load, coupling))
            if coupling < load:
                name = tap[len('tap_'):]
                self.cap('pad_' + name, (load - coupling) / self.unit, 'scl_' + name, GROUND, 'pad')
        return load

    def add_parasitics(self, parasitic) -> None:
        if not parasitic:
            return
        for node, role in list(self.nodes.items()):
            if role is NodeRole.FLOATING and not node.startswith('tap_'):
                self.cap('par_' + node, parasitic, node, GROUND, 'parasitic')


def _position_labels(n_bits: int) -> List[str]:
    return [str(k) if isinstance(k, str) else 'n{}'.format(k) for k in bit_indices(n_bits - 1)]


def build_caat_leaf(cfg: LeafConfig = LeafConfig.HYBRID, parasitic=0, switch: Switch = Switch.S2,
                    name: str = 'caat-leaf') -> CapNetwork:
    """Hybrid binary-C-2C summation network with equal ScL loads.

    Ports follow the balanced column order (n0p, n0m, n1, ..., n_{N-1}) and
    realize weights proportional to (1/2, 1/2, 1, 2, ..., 2**(N-2)). The upper
    binary_high_bits positions couple straight onto the output node; the rest
    reach it through a C-2C ladder with 2C bridges.
    """
    n_bits, high = int(cfg.n_bits), int(cfg.binary_high_bits)
    if n_bits < 1 or not 0 <= high <= n_bits:
        raise NetworkConstructionError('invalid leaf geometry n_bits={} binary_high_bits={}'.format(n_bits, high))
    builder = NetworkBuilder(cfg.unit_c)
    builder.node(OUTPUT, NodeRole.FLOATING)

    if n_bits == 1:
        scl = builder.scl('in', 1, OUTPUT, switch)
        builder.pad_loads(cfg.scl_load)
        net = CapNetwork(builder.nodes, builder.capacitors, builder.switches, [[scl]], OUTPUT, switch, name)
        return net

    labels = _position_labels(n_bits)
    lower = n_bits - high
    if lower == 1:
        raise NetworkConstructionError(
            'one half digit cannot sit on the ladder while its twin is binary weighted (n_bits={}, high={})'.format(
                n_bits, high))
    ports = [[] for _ in labels]

    if lower <= 2:
        # fully binary: halves 1 unit, integer bit i gets 2**i units
        top = 0
        for column in (0, 1):
            ports[column].append(builder.scl(labels[column], 1, OUTPUT, switch))
    else:
        top = lower - 2
        ladder = [builder.node('lad{}'.format(k), NodeRole.FLOATING) for k in range(1, top + 1)]
        ports[0].append(builder.scl(labels[0], 1, ladder[0], switch))
        ports[1].append(builder.scl(labels[1], 1, ladder[0], switch))
        for bit in range(1, top):
            ports[bit + 1].append(builder.scl(labels[bit + 1], 1, ladder[bit], switch))
        rungs = ladder + [OUTPUT]
        for k in range(top):
            builder.cap('bridge{}'.format(k + 1), 2, rungs[k], rungs[k + 1], 'bridge')
        ports[top + 1].append(builder.scl(labels[top + 1], 1, OUTPUT, switch))

    msb = n_bits - 2
    for bit in range(top + 1, n_bits - 1):
        value = Fraction(2 ** (bit - top))
        column = bit + 1
        if bit == msb and cfg.msb_split and value >= 2:
            for half in ('a', 'b'):
                ports[column].append(builder.scl(labels[column] + half, value / 2, OUTPUT, switch))
        else:
            ports[column].append(builder.scl(labels[column], value, OUTPUT, switch))

    builder.pad_loads(cfg.scl_load)
    builder.add_parasitics(parasitic)
    net = CapNetwork(builder.nodes, builder.capacitors, builder.switches, ports, OUTPUT, switch, name)
    logger.debug('built %s: %s C total over %d ScLs', name, net.total_capacitance(), len(net.scl_loads()))
    return net


def build_caat_root(n_banks: int = 9, cfg: LeafConfig = LeafConfig.HYBRID, parasitic=0) -> CapNetwork:
    """Cross-bank network: bank k carries activation column k, weights as in the leaf."""
    if n_banks < 1:
        raise NetworkConstructionError('root needs at least one bank, got {}'.format(n_banks))
    root_cfg = cfg._replace(n_bits=n_banks, binary_high_bits=min(cfg.binary_high_bits, n_banks))
    if n_banks != cfg.n_bits:
        root_cfg = root_cfg._replace(scl_load=None)
    if n_banks > 1 and n_banks - root_cfg.binary_high_bits == 1:
        root_cfg = root_cfg._replace(binary_high_bits=n_banks)
    return build_caat_leaf(root_cfg, parasitic=parasitic, switch=Switch.S3, name='caat-root')


def build_binary_baseline(n_bits: int = 8, unit_c=1) -> CapNetwork:
    """Plain binary-weighted summation network of the parallel-activation-input design.

    Column i couples 2**i units onto the output; every ScL is padded to the MSB
    capacitor plus one unit, so n_bits=8 accounts 8 x 129C = 1032C.
    """
    if n_bits < 1:
        raise NetworkConstructionError('baseline needs at least one bit')
    builder = NetworkBuilder(unit_c)
    builder.node(OUTPUT, NodeRole.FLOATING)
    ports = [[builder.scl('b{}'.format(i), 2 ** i, OUTPUT, Switch.S2)] for i in range(n_bits)]
    builder.pad_loads(None)
    return CapNetwork(builder.nodes, builder.capacitors, builder.switches, ports, OUTPUT, Switch.S2,
                      'binary-baseline')


def _merge_groups(net: CapNetwork, phase) -> Dict[str, str]:
    closed = PhaseSchedule.closed_switch(phase)
    parent = {node: node for node in net.nodes}

    def find(node):
        while parent[node] != node:
            parent[node] = parent[parent[node]]
            node = parent[node]
        return node

    for switch, a, b in net.switches:
        if switch is closed:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    return {node: find(node) for node in net.nodes}


class _System:
    """Charge-conservation equations G @ v_floating = q + B @ v_driven for one phase."""

    def __init__(self, net: CapNetwork, phase, exact: bool) -> None:
        self.groups = _merge_groups(net, phase)
        nodes = net.nodes
        driven = sorted({self.groups[node] for node, role in nodes.items() if role is NodeRole.DRIVEN})
        floating = sorted(set(self.groups.values()) - set(driven))
        self.driven = {g: i for i, g in enumerate(driven)}
        self.floating = {g: i for i, g in enumerate(floating)}
        zero = Fraction(0) if exact else 0.0
        self.G = [[zero] * len(floating) for _ in floating]
        self.B = [[zero] * len(driven) for _ in floating]
        for cap in net.capacitors:
            ga, gb = self.groups[cap.a], self.groups[cap.b]
            if ga == gb:
                continue
            value = Fraction(cap.value) if exact else float(cap.value)
            for this, other in ((ga, gb), (gb, ga)):
                if this in self.floating:
                    row = self.floating[this]
                    self.G[row][row] += value
                    if other in self.floating:
                        self.G[row][self.floating[other]] -= value
                    else:
                        self.B[row][self.driven[other]] += value

    def port_drive(self, net: CapNetwork, one, zero) -> List[list]:
        """Driven-group voltages (rows) for each unit-port excitation (columns)."""
        drive = [[zero] * len(net.ports) for _ in self.driven]
        for index, port in enumerate(net.ports):
            for node in port:
                drive[self.driven[self.groups[node]]][index] = one
        return drive


def _to_rational(value) -> Rational:
    value = Fraction(value)
    return Rational(value.numerator, value.denominator)


def _solve_exact(G: List[List[Fraction]], rhs: List[List[Fraction]]) -> List[List[Fraction]]:
    """Rational solve of G @ x = rhs; entries come back as Fraction."""
    G = Matrix([[_to_rational(v) for v in row] for row in G])
    rhs = Matrix([[_to_rational(v) for v in row] for row in rhs])
    if G.det(method='bareiss') == 0:
        raise SolverError('singular charge-conservation system (isolated floating island)')
    solution = G.LUsolve(rhs)
    return [[Fraction(int(v.p), int(v.q)) for v in solution.row(r)] for r in range(solution.rows)]


def _solve_float(G, rhs) -> np.ndarray:
    """Dense solve, batched over any leading axes of G and rhs."""
    G = np.asarray(G, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if G.shape[-1] == 0:
        return rhs
    try:
        solution = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        raise SolverError('singular charge-conservation system (isolated floating island)')
    scale = np.abs(G) @ np.abs(solution) + np.abs(rhs)
    residual = np.abs(G @ solution - rhs)
    if not np.all(np.isfinite(solution)) or np.any(residual > SOLVER_TOLERANCE * np.maximum(scale, 1.0)):
        raise SolverError('charge-conservation solve did not converge (residual {:.3g})'.format(np.max(residual)))
    return solution


def solve_redistribution(net: CapNetwork, driven_voltages: Dict[str, float],
                         initial_charges: Optional[Dict[str, float]] = None, phase=None,
                         exact: bool = False) -> Dict[str, float]:
    """Node voltages after charge redistribution with the phase's switches closed.

    Each floating node keeps its stored charge: the sum over incident capacitors
    of C * (V_node - V_other) equals initial_charges[node] (default 0).
    """
    phase = net.summation_phase if phase is None else phase
    system = _System(net, phase, exact)
    convert = Fraction if exact else float
    driven_values = [None] * len(system.driven)
    for node, group in system.groups.items():
        if group not in system.driven:
            continue
        if node in driven_voltages:
            value = convert(driven_voltages[node])
        elif node == GROUND:
            value = convert(0)
        else:
            continue
        index = system.driven[group]
        if driven_values[index] is not None and driven_values[index] != value:
            raise SolverError('switch shorts driven nodes held at different voltages ({})'.format(group))
        driven_values[index] = value
    missing = [g for g, i in system.driven.items() if driven_values[i] is None]
    if missing:
        raise SolverError('no voltage given for driven node(s) {}'.format(', '.join(missing)))

    charges = [convert(0) for _ in system.floating]
    for node, charge in (initial_charges or {}).items():
        group = system.groups.get(node)
        if group not in system.floating:
            raise SolverError('initial charge given for non-floating node {}'.format(node))
        charges[system.floating[group]] += convert(charge)

    rhs = []
    for row in range(len(system.floating)):
        total = charges[row]
        for col, value in enumerate(driven_values):
            total += system.B[row][col] * value
        rhs.append([total])
    if not rhs:
        solution = []
    elif exact:
        solution = [row[0] for row in _solve_exact(system.G, rhs)]
    else:
        solution = [float(v) for v in _solve_float(system.G, rhs)[:, 0]]

    voltages = {}
    for node, group in system.groups.items():
        if group in system.driven:
            voltages[node] = driven_values[system.driven[group]]
        else:
            voltages[node] = solution[system.floating[group]]
    return voltages


def node_charges(net: CapNetwork, voltages: Dict[str, float], phase=None) -> Dict[str, float]:
    """Net charge on every merged floating node for a given voltage assignment."""
    phase = net.summation_phase if phase is None else phase
    groups = _merge_groups(net, phase)
    floating = {groups[node] for node, role in net.nodes.items() if role is NodeRole.FLOATING}
    floating -= {groups[node] for node, role in net.nodes.items() if role is NodeRole.DRIVEN}
    charges = {group: 0 for group in floating}
    for cap in net.capacitors:
        ga, gb = groups[cap.a], groups[cap.b]
        if ga == gb:
            continue
        if ga in charges:
            charges[ga] += cap.value * (voltages[cap.a] - voltages[cap.b])
        if gb in charges:
            charges[gb] += cap.value * (voltages[cap.b] - voltages[cap.a])
    return charges


def effective_weights(net: CapNetwork, exact: Optional[bool] = None):
    """Summation coefficients of the network, one per port.

    weight_i is the output voltage with port i driven to 1, every other port
    and ground at 0, and no stored charge. Mismatch-free networks are solved
    in exact rationals and return a list of Fraction; otherwise a float array.
    """
    exact = net.is_ideal if exact is None else exact
    if not exact:
        return _Incidence(net).weights(np.asarray([[cap.epsilon for cap in net.capacitors]]))[0]
    system = _System(net, net.summation_phase, True)
    drive = system.port_drive(net, Fraction(1), Fraction(0))
    out_group = system.groups[net.output]
    if out_group in system.driven:
        return list(drive[system.driven[out_group]])
    n_driven = len(system.driven)
    rhs = [[sum((system.B[row][d] * drive[d][p] for d in range(n_driven)), Fraction(0))
            for p in range(len(net.ports))] for row in range(len(system.floating))]
    return list(_solve_exact(system.G, rhs)[system.floating[out_group]])


class _Incidence:
    """Per-capacitor stamps of the summation-phase system, for batched mismatch solves."""

    def __init__(self, net: CapNetwork) -> None:
        system = _System(net, net.summation_phase, False)
        n_floating, n_driven = len(system.floating), len(system.driven)
        n_caps = len(net.capacitors)
        self.nominal = np.asarray([float(cap.nominal) for cap in net.capacitors])
        self.g_stamps = np.zeros((n_caps, n_floating, n_floating))
        self.b_stamps = np.zeros((n_caps, n_floating, n_driven))
        for j, cap in enumerate(net.capacitors):
            ga, gb = system.groups[cap.a], system.groups[cap.b]
            if ga == gb:
                continue
            for this, other in ((ga, gb), (gb, ga)):
                if this in system.floating:
                    row = system.floating[this]
                    self.g_stamps[j, row, row] += 1
                    if other in system.floating:
                        self.g_stamps[j, row, system.floating[other]] -= 1
                    else:
                        self.b_stamps[j, row, system.driven[other]] += 1
        self.drive = np.asarray(system.port_drive(net, 1.0, 0.0), dtype=float).reshape(n_driven, len(net.ports))
        out_group = system.groups[net.output]
        self.out_driven = system.driven.get(out_group)
        self.out_floating = system.floating.get(out_group)

    def weights(self, epsilons: np.ndarray) -> np.ndarray:
        """Effective weights for each row of epsilons: shape (samples, ports)."""
        epsilons = np.atleast_2d(np.asarray(epsilons, dtype=float))
        if self.out_driven is not None:
            return np.repeat(self.drive[self.out_driven][None, :], epsilons.shape[0], axis=0)
        values = self.nominal * (1 + epsilons)
        G = np.einsum('sj,jab->sab', values, self.g_stamps)
        B = np.einsum('sj,jab->sab', values, self.b_stamps)
        solved = _solve_float(G, B @ self.drive)
        return solved[:, self.out_floating, :]


def inject_mismatch(net: CapNetwork, sigma_c: float, seed=None) -> CapNetwork:
    """Copy of net with every capacitor's epsilon drawn from N(0, sigma_c)."""
    return net.with_epsilons(_draw_epsilons(len(net.capacitors), sigma_c, seed))


def _draw_epsilons(n_caps: int, sigma_c: float, seed) -> np.ndarray:
    if sigma_c < 0 or not math.isfinite(sigma_c):
        raise ValueRangeError('sigma_c must be a non-negative number, got {}'.format(sigma_c))
    if sigma_c == 0:
        return np.zeros(n_caps)
    return np.random.default_rng(seed).normal(0.0, sigma_c, size=n_caps)


def sample_seeds(seed: int, n_samples: int) -> List[np.random.SeedSequence]:
    """Independent per-sample seeds; sample i is reproducible from (seed, i) alone."""
    return np.random.SeedSequence(seed).spawn(n_samples)


def sample_effective_weights(net: CapNetwork, sigma_c: float, n_samples: int, seed: int = 0) -> np.ndarray:
    """Effective weights of n_samples mismatched copies of net, shape (n_samples, ports).

    Row i equals effective_weights(inject_mismatch(net, sigma_c, sample_seeds(seed, n)[i])).
    """
    if n_samples < 1:
        raise ValueRangeError('n_samples must be positive, got {}'.format(n_samples))
    n_caps = len(net.capacitors)
    epsilons = np.stack([_draw_epsilons(n_caps, sigma_c, child) for child in sample_seeds(seed, n_samples)])
    return _Incidence(net).weights(epsilons)


def inl_profile(transfer: Sequence[float], target_bits: int = 8) -> InlProfile:
    """INL of a realized transfer against its end-point line, in LSBs.

    transfer holds one realized value per code (network outputs over the
    digital input space, or converter code-transition levels), in code order.
    """
    values = np.asarray([float(v) for v in transfer], dtype=float)
    if values.size < 2:
        raise InlError('an INL profile needs at least 2 codes, got {}'.format(values.size))
    lsb = (values[-1] - values[0]) / (values.size - 1)
    if lsb == 0 or not math.isfinite(lsb):
        raise InlError('transfer has no end-to-end span')
    ideal = values[0] + lsb * np.arange(values.size)
    inl = (values - ideal) / lsb
    dnl = np.diff(values) / lsb - 1
    max_abs_inl = float(np.max(np.abs(inl)))
    return InlProfile(inl, max_abs_inl, effective_bits(max_abs_inl, target_bits), dnl,
                      bool(np.all(np.diff(values) * np.sign(lsb) > 0)))


def effective_bits(max_abs_inl: float, target_bits: int = 8) -> float:
    """Resolution left after INL: an error of m LSB costs log2(2m) bits once it exceeds half an LSB."""
    return target_bits - math.log2(max(1.0, 2 * float(max_abs_inl)))


def _transfer_digits(n_ports: int) -> np.ndarray:
    width = n_ports - 1
    low, high = value_range(width)
    return encode_array(np.arange(low, high + 1), width).astype(float)


def leaf_transfer(net: CapNetwork) -> np.ndarray:
    """Network output for every decoded value, ports driven by the balanced digits."""
    weights = np.asarray([float(w) for w in effective_weights(net)], dtype=float)
    return _transfer_digits(len(net.ports)) @ weights


CALIBRATED_SIGMA_C = 0.012
YIELD_MIN_BITS = 7

MonteCarloSample = namedtuple('MonteCarloSample', ['sample', 'max_abs_inl', 'effective_bits'])


def montecarlo_leaf(sigma_c: float, n_samples: int, seed: int = 0, cfg: LeafConfig = LeafConfig.HYBRID,
                    target_bits: int = 8) -> List[MonteCarloSample]:
    """Mismatched leaf instances scored by the INL of their summation transfer."""
    net = build_caat_leaf(cfg)
    weights = sample_effective_weights(net, sigma_c, n_samples, seed)
    transfers = weights @ _transfer_digits(len(net.ports)).T
    span = transfers.shape[1] - 1
    lsb = (transfers[:, -1] - transfers[:, 0]) / span
    ideal = transfers[:, :1] + lsb[:, None] * np.arange(span + 1)
    max_inl = np.max(np.abs(transfers - ideal), axis=1) / np.abs(lsb)
    samples = [MonteCarloSample(i, float(m), effective_bits(m, target_bits)) for i, m in enumerate(max_inl)]
    logger.debug('montecarlo sigma_c=%g n=%d seed=%d: worst INL %.3f LSB', sigma_c, n_samples, seed,
                 float(max_inl.max()))
    return samples


def yield_at(sigma_c: float, n_samples: int = 1000, seed: int = 0, cfg: LeafConfig = LeafConfig.HYBRID,
             min_bits: float = YIELD_MIN_BITS, target_bits: int = 8) -> float:
    """Fraction of mismatched leaves that keep at least min_bits effective bits."""
    samples = montecarlo_leaf(sigma_c, n_samples, seed, cfg, target_bits)
    return sum(1 for s in samples if s.effective_bits >= min_bits) / len(samples)


def sweep_sigma_for_yield(target: float = ChipFigures.CAAT_7B_YIELD, n_samples: int = 1000, seed: int = 0,
                          cfg: LeafConfig = LeafConfig.HYBRID, low: float = 0.0, high: float = 0.1,
                          iterations: int = 30, min_bits: float = YIELD_MIN_BITS) -> float:
    """Largest sigma_c (to bisection precision) whose yield still meets target.

    The draws for a given seed scale linearly with sigma_c, so yield is
    non-increasing in sigma_c and bisection is well defined.
    """
    if not 0 < target <= 1:
        raise ValueRangeError('target yield must lie in (0, 1], got {}'.format(target))
    if yield_at(high, n_samples, seed, cfg, min_bits) >= target:
        raise ValueRangeError('yield at sigma_c={} still meets {}; raise the upper bound'.format(high, target))
    for _ in range(iterations):
        middle = (low + high) / 2
        if yield_at(middle, n_samples, seed, cfg, min_bits) >= target:
            low = middle
        else:
            high = middle
    logger.info('sigma_c for %.0f%% yield: %.5f', 100 * target, low)
    return low


def capacitance_report(cfg: LeafConfig = LeafConfig.HYBRID, baseline_bits: int = 8) -> Dict[str, float]:
    """Nominal capacitance of the hybrid leaf against the binary baseline."""
    proposed = build_caat_leaf(cfg).total_capacitance()
    baseline = build_binary_baseline(baseline_bits).total_capacitance()
    return {
        'proposed_c': float(proposed),
        'baseline_c': float(baseline),
        'reduction': float(baseline / proposed),
    }


def leaf_effective_bits(net: CapNetwork, target_bits: int = 8) -> float:
    return inl_profile(leaf_transfer(net), target_bits).effective_bits
