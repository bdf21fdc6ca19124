"""Partitioned automata: splitting, merging, determinization and minimization"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from itertools import product

import structlog

from src.models.automaton import LTA, GroundTransition, LambdaTransition, Transition, sorted_states, state_key
from src.models.errors import NonDeterministicInput, NotARefinement, PartitionError
from src.models.lattice import Interval, Partition
from src.processing.automaton_ops import eliminate_epsilon, is_deterministic, reduce

logger = structlog.get_logger()


@dataclass(frozen=True)
class PLTA:
    """An automaton whose lambda values each lie inside one partition block"""

    base: LTA
    partition: Partition

    def __post_init__(self):
        for t in self.base.lambdas:
            if self.partition.index_of(t.value) is None:
                raise PartitionError(f"Lambda {t} spans several blocks of {self.partition}")

    def block_index(self, t: LambdaTransition) -> int:
        index = self.partition.index_of(t.value)
        assert index is not None
        return index


def to_plta(a: LTA, partition: Partition) -> PLTA:
    """Split every lambda transition along the partition blocks."""
    partition.validate()
    transitions: list[Transition] = []
    for t in a.transitions:
        if isinstance(t, LambdaTransition):
            transitions.extend(
                LambdaTransition(part, t.target) for _, part in partition.block_of(t.value)
            )
        else:
            transitions.append(t)
    return PLTA(LTA.build(a.alphabet, transitions, a.finals, a.states), partition)


def _fuse_lambdas(plta: PLTA, transitions: list[Transition]) -> list[Transition]:
    fused: dict[tuple[str, int], Interval] = {}
    others: list[Transition] = []
    for t in transitions:
        if isinstance(t, LambdaTransition):
            key = (t.target, plta.block_index(t))
            fused[key] = fused[key].lub(t.value) if key in fused else t.value
        else:
            others.append(t)
    return others + [LambdaTransition(value, target) for (target, _), value in fused.items()]


def merge_plta(plta: PLTA) -> PLTA:
    """One lambda per (state, block): values sharing a target and block are joined."""
    base = plta.base
    merged = _fuse_lambdas(plta, list(base.transitions))
    return PLTA(LTA.build(base.alphabet, merged, base.finals, base.states), plta.partition)


def state_set_name(members: frozenset[str]) -> str:
    return "q{" + ",".join(sorted_states(members)) + "}"


def determinize(plta: PLTA) -> PLTA:
    """
    Subset construction with one lambda per partition block

    Every block contributes the set of states having a lambda inside it,
    labelled with the join of those lambdas. Ground transitions are then
    saturated over the state sets built so far until nothing new appears.

    Args:
        plta: Partitioned automaton; epsilon transitions are eliminated first

    Returns:
        Deterministic, merged partitioned automaton over state sets
    """
    base = eliminate_epsilon(plta.base)
    partition = plta.partition
    transitions: set[Transition] = set()
    sets: set[frozenset[str]] = set()

    for i, block in enumerate(partition.blocks):
        inside = [t for t in base.lambdas if t.value.leq(block)]
        if not inside:
            continue
        members = frozenset(t.target for t in inside)
        value = inside[0].value
        for t in inside[1:]:
            value = value.lub(t.value)
        sets.add(members)
        transitions.add(LambdaTransition(value, state_set_name(members)))

    by_head = base.index.ground_by_head
    heads = sorted(by_head)
    changed = True
    rounds = 0
    while changed:
        changed = False
        rounds += 1
        ordered = sorted(sets, key=lambda s: [state_key(q) for q in sorted_states(s)])
        for head in heads:
            rules = by_head[head]
            arity = len(rules[0].args)
            for combo in product(ordered, repeat=arity):
                targets = frozenset(
                    t.target for t in rules if all(q in s for q, s in zip(t.args, combo))
                )
                if not targets:
                    continue
                transitions.add(
                    GroundTransition(
                        head,
                        tuple(state_set_name(s) for s in combo),
                        state_set_name(targets),
                    )
                )
                if targets not in sets:
                    sets.add(targets)
                    changed = True

    finals = [state_set_name(s) for s in sets if s & base.finals]
    result = LTA.build(base.alphabet, transitions, finals, (state_set_name(s) for s in sets))
    logger.info(
        "Determinized automaton",
        input_states=len(base.states),
        output_states=len(result.states),
        rounds=rounds,
    )
    return PLTA(result, partition)


def minimize(plta: PLTA) -> PLTA:
    """
    Collapse equivalent states of a deterministic partitioned automaton

    Classes start as finals vs non-finals and are split until stable. Two
    states stay together when they have lambdas in the same blocks, the same
    nullary symbols, and every context built from one ground transition
    sends them to the same class. Lambdas of a merged class are joined per block.

    Raises:
        NonDeterministicInput: the automaton is not deterministic
    """
    if not is_deterministic(plta.base):
        logger.error("Minimization needs a deterministic automaton")
        raise NonDeterministicInput("minimize requires a deterministic automaton")
    base = reduce(plta.base)
    states = base.sorted_states()
    lambda_blocks: dict[str, set[int]] = defaultdict(set)
    for t in base.lambdas:
        lambda_blocks[t.target].add(plta.block_index(t))
    nullary: dict[str, set[str]] = defaultdict(set)
    for t in base.grounds:
        if not t.args:
            nullary[t.target].add(t.head)
    contexts: dict[str, list[tuple[str, int, tuple[str, ...], str]]] = defaultdict(list)
    for t in base.grounds:
        for i, q in enumerate(t.args):
            rest = t.args[:i] + t.args[i + 1:]
            contexts[q].append((t.head, i, rest, t.target))

    classes = {q: int(q in base.finals) for q in states}
    count = len(set(classes.values()))
    while True:
        signatures: dict[str, tuple] = {}
        for q in states:
            moves = sorted(
                (head, i, rest, classes[target]) for head, i, rest, target in contexts[q]
            )
            signatures[q] = (
                classes[q],
                tuple(sorted(lambda_blocks[q])),
                tuple(sorted(nullary[q])),
                tuple(moves),
            )
        numbering: dict[tuple, int] = {}
        refined = {q: numbering.setdefault(signatures[q], len(numbering)) for q in states}
        if len(numbering) == count:
            break
        classes, count = refined, len(numbering)

    representative: dict[int, str] = {}
    for q in states:
        representative.setdefault(classes[q], q)
    mapping = {q: representative[classes[q]] for q in states}
    renamed = base.renamed(mapping)
    fused = _fuse_lambdas(PLTA(renamed, plta.partition), list(renamed.transitions))
    result = LTA.build(renamed.alphabet, fused, renamed.finals, renamed.states)
    logger.info("Minimized automaton", input_states=len(states), output_states=len(result.states))
    return PLTA(result, plta.partition)


def refine_partition(plta: PLTA, finer: Partition) -> PLTA:
    """
    Re-split lambdas along a finer partition; the language is unchanged

    Raises:
        NotARefinement: some block of `finer` straddles two blocks of the current partition
    """
    finer.validate()
    if not finer.refines(plta.partition):
        logger.error("Partition is not a refinement", current=str(plta.partition), finer=str(finer))
        raise NotARefinement(f"{finer} does not refine {plta.partition}")
    return to_plta(plta.base, finer)
