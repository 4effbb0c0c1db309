# -*- coding: utf-8 -*-
"""Rewrite rules checked against the stabilizer tableau.

Each check rebuilds the state a rule claims and compares it with what the
tableau gives for the same measurement, outcome bits included. The rules are
looked up through a RuleSet so a deliberately broken rule can be swapped in.
"""

import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from loguru import logger
from tqdm import tqdm

from src.benchmarks import build_benchmark
from src.errors import ExecutionAborted, OracleError
from src.frontend import limit_cz_degree, translate_circuit
from src.fusion_layer import HardwareConfig
from src.graphstate import (
    PAULI_Z_WORD,
    STANDARD_FUSION,
    X_BASIS,
    Y_BASIS,
    Z_BASIS,
    ByproductWord,
    Generator,
    GraphState,
    MeasurementBasis,
    Pauli,
    SignedPauli,
    fuse_fail,
    fuse_success,
    lc_byproducts,
    local_complement,
    measure_z,
    propagate_through_fusion,
    propagate_through_measurement,
)
from src.ir import VirtualHardwareConfig
from src.mapper import MapperConfig, map_program
from src.online import OnlineEngine, events_to_jsonl, recount_fusions
from src.oracle import (
    Tableau,
    apply_words,
    expectation,
    measure_pauli,
    measure_sequence,
    states_equal,
    tableau_from_graph,
)
from src.renormalization import RenormConfig

Outcomes = Tuple[int, int]
OUTCOME_PAIRS: List[Outcomes] = [(0, 0), (0, 1), (1, 0), (1, 1)]
MAX_EXAMPLES = 10


@dataclass(frozen=True)
class RuleSet:
    """The graph rewrites under test"""

    local_complement: Callable[[GraphState, int], GraphState] = local_complement
    measure_z: Callable[[GraphState, int, int], GraphState] = measure_z
    fuse_success: Callable[[GraphState, int, int, Outcomes], GraphState] = (
        fuse_success
    )
    fuse_fail: Callable[[GraphState, int, int, Outcomes], GraphState] = fuse_fail


@dataclass
class SuiteResult:
    """Agreement count of one suite and the first few disagreements"""

    name: str
    checks: int = 0
    failed: int = 0
    examples: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.checks > 0 and self.failed == 0

    def record(self, ok: bool, description: str) -> None:
        self.checks += 1
        if not ok:
            self.failed += 1
            if len(self.examples) < MAX_EXAMPLES:
                self.examples.append(description)

    def as_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "checks": self.checks,
            "failed": self.failed,
            "examples": list(self.examples),
        }


def _rebuilt(
    size: int, graph: GraphState, extra: Sequence[Tuple[int, int]] = ()
) -> Tableau:
    """Tableau over qubits 0..size-1 with the rewritten graph's edges"""
    return tableau_from_graph(GraphState.from_edges(size, graph.edges() + list(extra)))


def check_local_complement(graph: GraphState, v: int, rules: RuleSet) -> bool:
    actual = apply_words(tableau_from_graph(graph), lc_byproducts(graph, v))
    rewritten = rules.local_complement(graph, v)
    expected = apply_words(_rebuilt(len(graph), rewritten), rewritten.byproducts)
    return states_equal(actual, expected)


def check_measure_z(graph: GraphState, v: int, outcome: int, rules: RuleSet) -> bool:
    z = SignedPauli(((v, Pauli.Z),))
    actual, _, _ = measure_pauli(tableau_from_graph(graph), z, outcome)
    rewritten = rules.measure_z(graph, v, outcome)
    expected, _, _ = measure_pauli(_rebuilt(len(graph), rewritten), z, outcome)
    return states_equal(actual, apply_words(expected, rewritten.byproducts))


def check_fuse_success(
    graph: GraphState, q1: int, q2: int, outcomes: Outcomes, rules: RuleSet
) -> bool:
    """XZ then ZX on (q1, q2); the fused pair is left in a signed edge state"""
    products = [p.relabeled({0: q1, 1: q2}) for p in STANDARD_FUSION.products()]
    actual = measure_sequence(tableau_from_graph(graph), products, outcomes)
    rewritten = rules.fuse_success(graph, q1, q2, outcomes)
    words = dict(rewritten.byproducts)
    for qubit, bit in zip((q1, q2), outcomes):
        if bit:
            words[qubit] = PAULI_Z_WORD
    expected = _rebuilt(len(graph), rewritten, [(q1, q2)])
    return states_equal(actual, apply_words(expected, words))


def check_fuse_fail(
    graph: GraphState, q1: int, q2: int, outcomes: Outcomes, rules: RuleSet
) -> bool:
    """Y on a fused qubit of degree >= 2, Z otherwise"""
    products = [
        SignedPauli(((q, Pauli.Y if graph.degree(q) >= 2 else Pauli.Z),))
        for q in (q1, q2)
    ]
    actual = measure_sequence(tableau_from_graph(graph), products, outcomes)
    rewritten = rules.fuse_fail(graph, q1, q2, outcomes)
    expected = apply_words(_rebuilt(len(graph), rewritten), rewritten.byproducts)
    expected = measure_sequence(expected, products, outcomes)
    return states_equal(actual, expected)


def small_graphs(max_nodes: int = 5) -> Iterator[GraphState]:
    """Every graph up to isomorphism with 1..max_nodes nodes"""
    for atlas_graph in nx.graph_atlas_g():
        n = atlas_graph.number_of_nodes()
        if 1 <= n <= max_nodes:
            yield GraphState.from_edges(n, atlas_graph.edges())


def fusion_pairs(graph: GraphState) -> List[Tuple[int, int]]:
    return [
        (a, b)
        for a, b in itertools.combinations(sorted(graph.nodes), 2)
        if not graph.has_edge(a, b)
    ]


def _check_graph(
    result: SuiteResult,
    graph: GraphState,
    rules: RuleSet,
    vertices: Sequence[int],
    z_outcomes: Sequence[int],
    pairs: Sequence[Tuple[Tuple[int, int], Outcomes]],
) -> None:
    tag = f"graph {graph.edges()} on {len(graph)} nodes"
    for v in vertices:
        result.record(check_local_complement(graph, v, rules), f"LC at {v}, {tag}")
        for bit in z_outcomes:
            result.record(
                check_measure_z(graph, v, bit, rules), f"Z({v})={bit}, {tag}"
            )
    for (q1, q2), outcomes in pairs:
        result.record(
            check_fuse_success(graph, q1, q2, outcomes, rules),
            f"fusion ({q1}, {q2}) {outcomes}, {tag}",
        )
        result.record(
            check_fuse_fail(graph, q1, q2, outcomes, rules),
            f"failed fusion ({q1}, {q2}) {outcomes}, {tag}",
        )


def exhaustive_rule_suite(
    max_nodes: int = 5, rules: Optional[RuleSet] = None
) -> SuiteResult:
    """Every vertex, every non-adjacent pair and every outcome on small graphs"""
    rules = rules or RuleSet()
    result = SuiteResult("exhaustive")
    for graph in small_graphs(max_nodes):
        pairs = [(pair, bits) for pair in fusion_pairs(graph) for bits in OUTCOME_PAIRS]
        _check_graph(result, graph, rules, sorted(graph.nodes), (0, 1), pairs)
    return result


def random_rule_suite(
    cases: int = 500,
    seed: int = 0,
    sizes: Tuple[int, int] = (6, 8),
    rules: Optional[RuleSet] = None,
) -> SuiteResult:
    """Seeded G(n, 1/2) graphs; one random instance of every rule per graph"""
    rules = rules or RuleSet()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    result = SuiteResult("random")
    for _ in range(cases):
        n = int(rng.integers(sizes[0], sizes[1] + 1))
        graph = GraphState.from_edges(
            n, nx.gnp_random_graph(n, 0.5, seed=int(rng.integers(2**31))).edges()
        )
        v = int(rng.integers(n))
        bit = int(rng.integers(2))
        candidates = fusion_pairs(graph)
        pairs = []
        if candidates:
            pair = candidates[int(rng.integers(len(candidates)))]
            pairs.append((pair, OUTCOME_PAIRS[int(rng.integers(4))]))
        _check_graph(result, graph, rules, [v], [bit], pairs)
    return result


def _pauli_bases() -> List[MeasurementBasis]:
    return [
        MeasurementBasis(basis.plane, basis.angle, sign)
        for basis in (X_BASIS, Y_BASIS, Z_BASIS)
        for sign in (1, -1)
    ]


def _as_product(basis: MeasurementBasis, qubit: int) -> SignedPauli:
    pauli = basis.as_pauli()
    if pauli is None:
        raise OracleError(f"{basis!r} is not a Pauli basis")
    sign, axis = pauli
    return SignedPauli(((qubit, axis),), sign)


def _measure_all(
    t: Tableau, products: Sequence[SignedPauli], outcomes: Sequence[int]
) -> Optional[Tuple[Tableau, Tuple[Optional[int], ...]]]:
    """Forced measurements; None when a forced bit is impossible.

    The second item holds the deterministic outcome of each step, None for
    random steps.
    """
    kinds = []
    for product, outcome in zip(products, outcomes):
        fixed = expectation(t, product)
        if fixed is not None and fixed != outcome:
            return None
        kinds.append(fixed)
        t, _, _ = measure_pauli(t, product, outcome)
    return t, tuple(kinds)


def _propagation_agrees(
    t: Tableau,
    words: Dict[int, ByproductWord],
    actual: Sequence[SignedPauli],
    adjusted: Sequence[SignedPauli],
    outcomes: Sequence[int],
) -> bool:
    """Measuring actual after the words equals measuring adjusted before them"""
    direct = _measure_all(apply_words(t, words), actual, outcomes)
    deferred = _measure_all(t, adjusted, outcomes)
    if direct is None or deferred is None:
        return direct is None and deferred is None
    if direct[1] != deferred[1]:
        return False
    return states_equal(direct[0], apply_words(deferred[0], words))


def _words(max_length: int = 2) -> List[ByproductWord]:
    return [
        tuple(word)
        for length in range(max_length + 1)
        for word in itertools.product(list(Generator), repeat=length)
    ]


def propagation_suite(node_count: int = 3) -> SuiteResult:
    """Deferred byproducts give the same statistics and post-measurement states.

    Single-qubit bases are pushed through every word of length <= 2 and both
    outcomes; fusion bases through every pair of single generators on the two
    fused qubits.
    """
    result = SuiteResult("propagation")
    graphs = [g for g in small_graphs(node_count) if len(g) == node_count]
    words = _words()
    singles = [w for w in words if len(w) <= 1]
    for graph in graphs:
        t = tableau_from_graph(graph)
        tag = f"graph {graph.edges()}"
        cases = itertools.product(sorted(graph.nodes), words, _pauli_bases())
        for qubit, word, basis in cases:
            adjusted, _ = propagate_through_measurement(word, basis)
            for bit in (0, 1):
                result.record(
                    _propagation_agrees(
                        t,
                        {qubit: word},
                        [_as_product(basis, qubit)],
                        [_as_product(adjusted, qubit)],
                        [bit],
                    ),
                    f"{basis!r} after {word} on {qubit}={bit}, {tag}",
                )
        for (q1, q2), w1, w2 in itertools.product(
            itertools.combinations(sorted(graph.nodes), 2), singles, singles
        ):
            labels = {0: q1, 1: q2}
            fused = propagate_through_fusion(w1, w2, STANDARD_FUSION)
            actual = [p.relabeled(labels) for p in STANDARD_FUSION.products()]
            adjusted_products = [p.relabeled(labels) for p in fused.products()]
            for bits in OUTCOME_PAIRS:
                result.record(
                    _propagation_agrees(
                        t, {q1: w1, q2: w2}, actual, adjusted_products, bits
                    ),
                    f"fusion ({q1}, {q2}) after {w1}/{w2} {bits}, {tag}",
                )
    return result


def recount_suite(runs: int = 20, seed: int = 0) -> SuiteResult:
    """Report fusion totals equal the recount from each run's event log"""
    result = SuiteResult("recount")
    pattern = translate_circuit(limit_cz_degree(build_benchmark("qaoa", 4, seed)))
    ir = map_program(pattern, MapperConfig(vh=VirtualHardwareConfig()))
    cfg = HardwareConfig(rsl_width=8, rsl_height=8, p_fusion=0.75, seed=seed)
    rc = RenormConfig(node_size=4)
    for trial in range(runs):
        engine = OnlineEngine(cfg, rc, pattern=pattern, trial=trial)
        try:
            report = engine.run(ir)
        except ExecutionAborted as e:
            report = e.report
        recount = recount_fusions(events_to_jsonl(engine.events).splitlines())
        result.record(
            recount == report.fusions_attempted,
            f"trial {trial}: report {report.fusions_attempted} != recount {recount}",
        )
    return result


SUITES: Dict[str, Callable[[], SuiteResult]] = {
    "exhaustive": exhaustive_rule_suite,
    "random": random_rule_suite,
    "propagation": propagation_suite,
    "recount": recount_suite,
}


def run_verification(names: Optional[Sequence[str]] = None) -> List[SuiteResult]:
    """Run the named suites (all by default) and log a verdict per suite"""
    selected = list(names or SUITES)
    results = []
    for name in tqdm(selected, desc="Verifying"):
        suite = SUITES[name]()
        if suite.passed:
            logger.success(f"{name}: {suite.checks}/{suite.checks} agreements")
        else:
            logger.warning(
                f"{name}: {suite.failed}/{suite.checks} disagreements, "
                f"first: {suite.examples[:1]}"
            )
        results.append(suite)
    return results
