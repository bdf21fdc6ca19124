"""Graphviz export of lattice tree automata"""

from pathlib import Path
from typing import Iterator, Union

import structlog

from src.models.automaton import LTA

logger = structlog.get_logger()


def _gvquote(s: str) -> str:
    return '"{}"'.format(s.replace("\\", "\\\\").replace('"', r"\""))


def to_dot(a: LTA, name: str = "lta") -> Iterator[str]:
    """
    Produce a graphviz digraph as an iterable of lines.

    States are circles (final states doubled). Every lambda transition gets a
    plain node carrying its interval; every ground transition gets a box node
    for its symbol, fed by its argument states in order. Epsilon transitions
    are dashed edges.

    Use like so::

        with open("a.dot", "w") as f:
            f.writelines(to_dot(automaton))
    """
    yield f"digraph {_gvquote(name)} {{\n"
    yield "  rankdir=BT\n"
    for state in a.sorted_states():
        shape = "doublecircle" if state in a.finals else "circle"
        yield f"  {_gvquote(state)} [shape={shape}]\n"
    for n, t in enumerate(a.lambdas):
        node = f"l{n}"
        yield f"  {node} [shape=plaintext label={_gvquote(str(t.value))}]\n"
        yield f"  {node} -> {_gvquote(t.target)}\n"
    for n, t in enumerate(a.grounds):
        node = f"g{n}"
        yield f"  {node} [shape=box label={_gvquote(t.head)}]\n"
        for i, arg in enumerate(t.args, start=1):
            yield f"  {_gvquote(arg)} -> {node} [arrowhead=none label={i}]\n"
        yield f"  {node} -> {_gvquote(t.target)}\n"
    for t in a.epsilons:
        yield f"  {_gvquote(t.source)} -> {_gvquote(t.target)} [style=dashed]\n"
    yield "}\n"


def write_dot(a: LTA, path: Union[str, Path], name: str = "lta") -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        f.writelines(to_dot(a, name))
    logger.info("DOT graph written", path=str(path), states=len(a.states))
    return path
