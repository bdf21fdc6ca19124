"""Canonical text form of automata, readable back by the spec loader"""

from pathlib import Path
from typing import Iterator, Optional, Union

import structlog

from src.models.automaton import LTA, Alphabet, sorted_states
from src.models.lattice import Partition

logger = structlog.get_logger()


def _signature_lines(alphabet: Alphabet) -> Iterator[str]:
    passive = " ".join(f"{name}:{arity}" for name, arity in alphabet.passive)
    builtins = " ".join(f"{name}:{arity}" for name, arity in alphabet.builtins)
    yield "lattice interval-int"
    yield f"symbols {{ {passive} }}" if passive else "symbols { }"
    yield f"builtins {{ {builtins} }}" if builtins else "builtins { }"


def format_automaton_block(a: LTA, name: str = "A") -> str:
    """One `automaton NAME { ... }` block with states, finals and sorted transitions"""
    lines = [f"automaton {name} {{"]
    lines.append("  states " + " ".join(a.sorted_states()) if a.states else "  states")
    lines.append("  final " + " ".join(sorted_states(a.finals)) if a.finals else "  final")
    lines.extend(f"  {t}" for t in a.transitions)
    lines.append("}")
    return "\n".join(lines)


def format_automaton(
    a: LTA, name: str = "A", partition: Optional[Partition] = None, header: bool = True
) -> str:
    """Spec text holding `a`; parsing it back yields an equal automaton."""
    parts = list(_signature_lines(a.alphabet)) if header else []
    if partition is not None:
        parts.append(f"partition {partition}")
    parts.append(format_automaton_block(a, name))
    return "\n".join(parts) + "\n"


def dump_automaton(
    a: LTA, path: Union[str, Path], name: str = "A", partition: Optional[Partition] = None
) -> Path:
    path = Path(path)
    path.write_text(format_automaton(a, name, partition), encoding="utf-8")
    logger.info("Automaton written", path=str(path), states=len(a.states), transitions=len(a.transitions))
    return path
