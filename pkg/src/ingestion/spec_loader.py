"""Spec file loader

A spec file declares the lattice, the signature, an optional partition and
any number of named automata, rewrite systems and equation sets:

    lattice interval-int
    symbols { f:1 cons:2 nil:0 }
    builtins { +:2 -:2 *:2 }
    partition ]-inf,0[ [0,0] ]0,+inf[
    automaton A0 {
      states q1 q2
      final q2
      [1,2] -> q1
      f(q1) -> q2
    }
    trs R {
      A: f(x) -> cons(x, f(x + 1)) <= x < 3
    }
    equations E {
      x = x + 2 <= x >= 5
    }
    config { widen-after 3 strict-int }

`#` starts a comment; `;` ends a line like a newline does.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional, Union

import structlog

from src.analytics.completion import CompletionConfig
from src.config import Settings
from src.models.automaton import (
    LTA,
    Alphabet,
    EpsilonTransition,
    GroundTransition,
    LambdaTransition,
    Transition,
)
from src.models.errors import LTAError, SpecSyntaxError, UnknownDeclaration
from src.models.lattice import Interval, Partition, parse_interval
from src.models.rewriting import TRS, Equation, EquationSet, Predicate, Relation, RewriteRule
from src.models.term import BUILTIN_ARITIES, Term, app, lat, num, op, var

logger = structlog.get_logger()

SUPPORTED_LATTICES = ("interval-int",)
CONFIG_KEYS = {"max-steps": "max_steps", "widen-after": "widen_after", "strict-int": "strict_int"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of file"
        if self.kind == "NEWLINE":
            return "end of line"
        return repr(self.text)


_INTERVAL = re.compile(r"[\[\]]\s*[+-]?(?:inf|\d+)\s*,\s*[+-]?(?:inf|\d+)\s*[\[\]]")
_IDENT_START = re.compile(r"[A-Za-z_]")
_IDENT_CHAR = re.compile(r"[A-Za-z0-9_.']")
_RELATIONS = ("<=", ">=", "!=", "==", "<>", "≤", "≥", "≠", "<", ">", "=")
_PUNCTUATION = {
    "(": "LPAREN",
    ")": "RPAREN",
    "{": "LBRACE",
    "}": "RBRACE",
    ",": "COMMA",
    ":": "COLON",
    "+": "PLUS",
    "*": "STAR",
    "-": "MINUS",
}


def _balanced(text: str, start: int) -> Optional[int]:
    depth = 0
    for i in range(start, len(text)):
        ch = text[i]
        if ch.isspace():
            return None
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
            if depth == 0:
                return i + 1
    return None


def _scan_identifier(text: str, start: int) -> int:
    # State names produced by the engine look like q!3, q[1,1], q{q1,q2}, L.q1 or p&q
    i = start + 1
    while i < len(text):
        ch = text[i]
        following = text[i + 1] if i + 1 < len(text) else ""
        if _IDENT_CHAR.match(ch):
            i += 1
        elif ch == "!" and following.isdigit():
            i += 1
        elif ch == "&" and _IDENT_START.match(following):
            i += 1
        elif ch in "[{" and (end := _balanced(text, i)) is not None:
            i = end
        else:
            break
    return i


def tokenize(text: str) -> list[Token]:
    """Split spec text into tokens; newlines inside parentheses are dropped."""
    text = text.replace("−", "-")
    tokens: list[Token] = []
    line, line_start, i, depth = 1, 0, 0, 0

    def emit(kind: str, start: int, end: int) -> None:
        tokens.append(Token(kind, text[start:end], line, start - line_start + 1))

    while i < len(text):
        ch = text[i]
        if ch == "\n":
            if depth == 0:
                emit("NEWLINE", i, i + 1)
            line += 1
            line_start = i + 1
            i += 1
        elif ch in " \t\r":
            i += 1
        elif ch == "#":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif ch == ";":
            if depth == 0:
                emit("NEWLINE", i, i + 1)
            i += 1
        elif text.startswith("->", i):
            emit("ARROW", i, i + 2)
            i += 2
        elif text.startswith("&&", i) or ch == "∧":
            end = i + (2 if ch == "&" else 1)
            emit("AND", i, end)
            i = end
        elif ch == "⇐":
            emit("GUARD", i, i + 1)
            i += 1
        elif (relation := next((r for r in _RELATIONS if text.startswith(r, i)), None)) is not None:
            emit("REL", i, i + len(relation))
            i += len(relation)
        elif ch in "[]":
            match = _INTERVAL.match(text, i)
            if match is None:
                raise SpecSyntaxError("malformed interval", line, i - line_start + 1)
            emit("INTERVAL", i, match.end())
            i = match.end()
        elif ch.isdigit():
            end = i
            while end < len(text) and text[end].isdigit():
                end += 1
            emit("NUMBER", i, end)
            i = end
        elif _IDENT_START.match(ch):
            end = _scan_identifier(text, i)
            emit("IDENT", i, end)
            i = end
        elif ch in _PUNCTUATION:
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth = max(0, depth - 1)
            emit(_PUNCTUATION[ch], i, i + 1)
            i += 1
        else:
            raise SpecSyntaxError(f"unexpected character {ch!r}", line, i - line_start + 1)
    tokens.append(Token("EOF", "", line, i - line_start + 1))
    return tokens


@dataclass(frozen=True)
class SpecFile:
    """Everything declared in one spec file, in declaration order"""

    lattice: str
    alphabet: Alphabet
    partition: Optional[Partition] = None
    automata: dict[str, LTA] = field(default_factory=dict)
    rule_sets: dict[str, TRS] = field(default_factory=dict)
    equation_sets: dict[str, EquationSet] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)
    source: Optional[str] = None

    def automaton(self, name: Optional[str] = None) -> LTA:
        """The named automaton, or the first one declared"""
        return _lookup(self.automata, name, "automaton")

    def trs(self, name: Optional[str] = None) -> TRS:
        if name is None and not self.rule_sets:
            return TRS("empty")
        return _lookup(self.rule_sets, name, "trs")

    def equations(self, name: Optional[str] = None) -> Optional[EquationSet]:
        if name is None and not self.equation_sets:
            return None
        return _lookup(self.equation_sets, name, "equations")

    def completion_config(
        self, settings: Settings, equations: Optional[str] = None, **overrides
    ) -> CompletionConfig:
        """Settings, then the config block, then explicit overrides that are not None"""
        values = dict(self.config)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return CompletionConfig.from_settings(settings, self.equations(equations), **values)


def _lookup(table: dict, name: Optional[str], kind: str):
    if name is None:
        if not table:
            raise UnknownDeclaration(f"spec declares no {kind}")
        return next(iter(table.values()))
    if name not in table:
        known = ", ".join(table) or "none"
        raise UnknownDeclaration(f"no {kind} named {name!r} (declared: {known})")
    return table[name]


class _Parser:
    def __init__(self, tokens: list[Token], allow_variables: bool = True):
        self.tokens = tokens
        self.pos = 0
        self.allow_variables = allow_variables
        self.lattice: Optional[str] = None
        self.passive: dict[str, int] = {}
        self.builtins: Optional[dict[str, int]] = None
        self.partition: Optional[Partition] = None
        self.automata: dict[str, LTA] = {}
        self.rule_sets: dict[str, TRS] = {}
        self.equation_sets: dict[str, EquationSet] = {}
        self.config: dict[str, Any] = {}
        self.declared: dict[tuple[str, str], Token] = {}
        self._alphabet: Optional[Alphabet] = None

    # token helpers

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        token = self.peek()
        self.pos = min(self.pos + 1, len(self.tokens) - 1)
        return token

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        token = self.peek()
        return token.kind == kind and (text is None or token.text == text)

    def error(self, token: Token, message: str) -> SpecSyntaxError:
        return SpecSyntaxError(message, token.line, token.column)

    def expect(self, kind: str, what: str) -> Token:
        token = self.peek()
        if token.kind != kind:
            raise self.error(token, f"expected {what}, found {token.describe()}")
        return self.next()

    def skip_newlines(self) -> None:
        while self.at("NEWLINE"):
            self.next()

    def end_of_line(self) -> None:
        if self.at("NEWLINE"):
            self.next()
        elif not (self.at("RBRACE") or self.at("EOF")):
            raise self.error(self.peek(), f"expected end of line, found {self.peek().describe()}")

    def dashed_name(self) -> tuple[str, Token]:
        first = self.expect("IDENT", "a name")
        text = first.text
        last = first
        while (
            self.at("MINUS")
            and self.peek(1).kind == "IDENT"
            and self._adjacent(last, self.peek())
            and self._adjacent(self.peek(), self.peek(1))
        ):
            self.next()
            last = self.next()
            text += "-" + last.text
        return text, first

    @staticmethod
    def _adjacent(left: Token, right: Token) -> bool:
        return left.line == right.line and left.column + len(left.text) == right.column

    def declare(self, kind: str, name: str, token: Token) -> None:
        first = self.declared.get((kind, name))
        if first is not None:
            raise self.error(
                token, f"duplicate {kind} {name} (first declared at {first.line}:{first.column})"
            )
        self.declared[(kind, name)] = token

    def alphabet(self) -> Alphabet:
        if self._alphabet is None:
            try:
                self._alphabet = Alphabet.of(self.passive, self.builtins)
            except LTAError as e:
                raise self.error(self.peek(), str(e)) from e
        return self._alphabet

    # declarations

    def parse(self) -> SpecFile:
        handlers: dict[str, Callable[[Token], None]] = {
            "lattice": self.lattice_line,
            "symbols": self.symbols_block,
            "builtins": self.builtins_block,
            "partition": self.partition_line,
            "automaton": self.automaton_block,
            "trs": self.trs_block,
            "equations": self.equations_block,
            "config": self.config_block,
        }
        self.skip_newlines()
        while not self.at("EOF"):
            keyword = self.expect("IDENT", "a declaration")
            if self.lattice is None and keyword.text != "lattice":
                raise self.error(keyword, "missing lattice declaration")
            handler = handlers.get(keyword.text)
            if handler is None:
                raise self.error(keyword, f"unknown declaration {keyword.text!r}")
            handler(keyword)
            self.end_of_line()
            self.skip_newlines()
        if self.lattice is None:
            eof = self.peek()
            raise self.error(eof, "missing lattice declaration")
        return SpecFile(
            lattice=self.lattice,
            alphabet=self.alphabet(),
            partition=self.partition,
            automata=self.automata,
            rule_sets=self.rule_sets,
            equation_sets=self.equation_sets,
            config=self.config,
        )

    def lattice_line(self, keyword: Token) -> None:
        self.declare("lattice", "declaration", keyword)
        name, token = self.dashed_name()
        if name not in SUPPORTED_LATTICES:
            raise self.error(token, f"unsupported lattice {name!r}")
        self.lattice = name

    def _signature_entries(self, keyword: Token, names: tuple[str, ...]) -> list[tuple[Token, int]]:
        if self._alphabet is not None:
            raise self.error(keyword, f"{keyword.text} must be declared before automata and rules")
        self.expect("LBRACE", "'{'")
        entries = []
        while True:
            self.skip_newlines()
            if self.at("RBRACE"):
                self.next()
                return entries
            token = self.next()
            if token.kind not in names:
                raise self.error(token, f"expected a symbol name, found {token.describe()}")
            self.expect("COLON", "':'")
            arity = self.expect("NUMBER", "an arity")
            self.declare("symbol", token.text, token)
            entries.append((token, int(arity.text)))

    def symbols_block(self, keyword: Token) -> None:
        for token, arity in self._signature_entries(keyword, ("IDENT",)):
            self.passive[token.text] = arity

    def builtins_block(self, keyword: Token) -> None:
        builtins = dict(self.builtins or {})
        for token, arity in self._signature_entries(keyword, ("IDENT", "PLUS", "MINUS", "STAR")):
            if BUILTIN_ARITIES.get(token.text) != arity:
                raise self.error(token, f"unknown builtin {token.text}:{arity}")
            builtins[token.text] = arity
        self.builtins = builtins

    def partition_line(self, keyword: Token) -> None:
        self.declare("partition", "declaration", keyword)
        blocks = []
        while self.at("INTERVAL"):
            blocks.append(self.next().text)
        if not blocks:
            raise self.error(self.peek(), "partition needs at least one interval block")
        try:
            self.partition = Partition.parse(" ".join(blocks))
        except ValueError as e:
            raise self.error(keyword, f"invalid partition: {e}") from e

    def config_block(self, keyword: Token) -> None:
        self.expect("LBRACE", "'{'")
        while True:
            self.skip_newlines()
            if self.at("RBRACE"):
                self.next()
                return
            key, token = self.dashed_name()
            name = CONFIG_KEYS.get(key)
            if name is None:
                raise self.error(token, f"unknown config key {key!r}")
            if name == "strict_int":
                value: Any = True
                if self.at("IDENT", "true") or self.at("IDENT", "false"):
                    value = self.next().text == "true"
            else:
                value = int(self.expect("NUMBER", f"a number for {key}").text)
            self.config[name] = value

    # automata

    def automaton_block(self, keyword: Token) -> None:
        name_token = self.expect("IDENT", "an automaton name")
        self.declare("automaton", name_token.text, name_token)
        alphabet = self.alphabet()
        self.expect("LBRACE", "'{'")
        states: Optional[dict[str, Token]] = None
        finals: list[Token] = []
        transitions: list[Transition] = []
        while True:
            self.skip_newlines()
            if self.at("RBRACE"):
                self.next()
                break
            head = self.peek()
            listing = head.kind == "IDENT" and self.peek(1).kind not in ("ARROW", "LPAREN")
            if listing and head.text == "states":
                self.next()
                states = states or {}
                for token in self._state_tokens():
                    first = states.get(token.text)
                    if first is not None:
                        raise self.error(
                            token,
                            f"duplicate state {token.text} (first declared at {first.line}:{first.column})",
                        )
                    states[token.text] = token
            elif listing and head.text in ("final", "finals"):
                self.next()
                finals.extend(self._state_tokens())
            else:
                transitions.append(self.transition(alphabet, states))
            self.end_of_line()
        if states is not None:
            for token in finals:
                if token.text not in states:
                    raise self.error(token, f"undeclared state {token.text}")
        try:
            automaton = LTA.build(
                alphabet,
                transitions,
                finals=[t.text for t in finals],
                states=list(states or ()),
            )
        except (LTAError, ValueError) as e:
            raise self.error(name_token, str(e)) from e
        self.automata[name_token.text] = automaton

    def _state_tokens(self) -> list[Token]:
        tokens = []
        while self.at("IDENT"):
            tokens.append(self.next())
        return tokens

    def state_name(self, known: Optional[dict[str, Token]]) -> str:
        token = self.expect("IDENT", "a state")
        if known is not None and token.text not in known:
            raise self.error(token, f"undeclared state {token.text}")
        return token.text

    def interval(self, token: Token) -> Interval:
        try:
            return parse_interval(token.text)
        except ValueError as e:
            raise self.error(token, str(e)) from e

    def transition(self, alphabet: Alphabet, known: Optional[dict[str, Token]]) -> Transition:
        start = self.peek()
        value: Optional[Interval] = None
        head: Optional[str] = None
        args: tuple[str, ...] = ()
        source: Optional[str] = None
        if start.kind == "INTERVAL":
            value = self.interval(self.next())
        elif start.kind == "NUMBER" or (start.kind == "MINUS" and self.peek(1).kind == "NUMBER"):
            value = Interval.atom(self.integer())
        elif start.kind in ("IDENT", "PLUS", "MINUS", "STAR"):
            self.next()
            if self.at("LPAREN"):
                head = start.text
                args = self.state_arguments(known)
            elif start.kind == "IDENT" and alphabet.is_passive(start.text) and alphabet.arity(start.text) == 0:
                head = start.text
            elif start.kind == "IDENT":
                if known is not None and start.text not in known:
                    raise self.error(start, f"undeclared state {start.text}")
                source = start.text
            else:
                raise self.error(self.peek(), "expected '(' after operator")
        else:
            raise self.error(start, f"expected a transition, found {start.describe()}")
        self.expect("ARROW", "'->'")
        target = self.state_name(known)
        if value is not None:
            if value.is_bottom:
                raise self.error(start, "lambda transition carries bottom")
            return LambdaTransition(value, target)
        if head is not None:
            arity = alphabet.arity(head)
            if arity is None:
                raise self.error(start, f"unknown symbol {head}")
            if arity != len(args):
                raise self.error(start, f"{head} has arity {arity}, transition uses {len(args)}")
            return GroundTransition(head, args, target)
        return EpsilonTransition(source, target)

    def state_arguments(self, known: Optional[dict[str, Token]]) -> tuple[str, ...]:
        self.expect("LPAREN", "'('")
        args: list[str] = []
        if not self.at("RPAREN"):
            args.append(self.state_name(known))
            while self.at("COMMA"):
                self.next()
                args.append(self.state_name(known))
        self.expect("RPAREN", "')'")
        return tuple(args)

    def integer(self) -> int:
        sign = 1
        if self.at("MINUS"):
            self.next()
            sign = -1
        return sign * int(self.expect("NUMBER", "a number").text)

    # terms

    def expression(self, alphabet: Alphabet) -> Term:
        left = self.product(alphabet)
        while self.peek().kind in ("PLUS", "MINUS"):
            operator = self.next()
            left = self.builtin(operator, alphabet, left, self.product(alphabet))
        return left

    def product(self, alphabet: Alphabet) -> Term:
        left = self.factor(alphabet)
        while self.at("STAR"):
            operator = self.next()
            left = self.builtin(operator, alphabet, left, self.factor(alphabet))
        return left

    def builtin(self, token: Token, alphabet: Alphabet, left: Term, right: Term) -> Term:
        if not alphabet.is_builtin(token.text):
            raise self.error(token, f"operator {token.text} is not a declared builtin")
        try:
            return op(token.text, left, right)
        except LTAError as e:
            raise self.error(token, str(e)) from e

    def factor(self, alphabet: Alphabet) -> Term:
        token = self.peek()
        if token.kind == "NUMBER" or (token.kind == "MINUS" and self.peek(1).kind == "NUMBER"):
            return num(self.integer())
        if token.kind == "INTERVAL":
            return lat(self.interval(self.next()))
        if token.kind == "LPAREN" and not self._prefix_call(token):
            self.next()
            inner = self.expression(alphabet)
            self.expect("RPAREN", "')'")
            return inner
        if token.kind == "IDENT" or self._prefix_call(token):
            self.next()
            if self.at("LPAREN"):
                return self.application(token, self.arguments(alphabet), alphabet)
            arity = alphabet.arity(token.text)
            if arity == 0:
                return app(token.text)
            if arity is not None:
                raise self.error(token, f"{token.text} expects {arity} arguments")
            if not self.allow_variables:
                raise self.error(token, f"unknown symbol {token.text}")
            return var(token.text)
        raise self.error(token, f"expected a term, found {token.describe()}")

    def _prefix_call(self, token: Token) -> bool:
        return token.kind in ("PLUS", "MINUS", "STAR") and self.peek(1).kind == "LPAREN"

    def arguments(self, alphabet: Alphabet) -> list[Term]:
        self.expect("LPAREN", "'('")
        args: list[Term] = []
        if not self.at("RPAREN"):
            args.append(self.expression(alphabet))
            while self.at("COMMA"):
                self.next()
                args.append(self.expression(alphabet))
        self.expect("RPAREN", "')'")
        return args

    def application(self, token: Token, args: list[Term], alphabet: Alphabet) -> Term:
        arity = alphabet.arity(token.text)
        if arity is None:
            raise self.error(token, f"unknown symbol {token.text}")
        if arity != len(args):
            raise self.error(token, f"{token.text} has arity {arity}, applied to {len(args)}")
        try:
            if alphabet.is_builtin(token.text):
                return op(token.text, *args)
            return app(token.text, *args)
        except LTAError as e:
            raise self.error(token, str(e)) from e

    def guard(self, alphabet: Alphabet) -> tuple[Predicate, ...]:
        if not (self.at("REL", "<=") or self.at("GUARD") or self.at("IDENT", "if")):
            return ()
        self.next()
        conditions = [self.predicate(alphabet)]
        while self.at("AND") or self.at("COMMA") or self.at("IDENT", "and"):
            self.next()
            conditions.append(self.predicate(alphabet))
        return tuple(conditions)

    def predicate(self, alphabet: Alphabet) -> Predicate:
        lhs = self.expression(alphabet)
        relation = self.expect("REL", "a comparison")
        rhs = self.expression(alphabet)
        return Predicate(Relation.parse(relation.text), lhs, rhs)

    # rewrite systems and equations

    def trs_block(self, keyword: Token) -> None:
        name_token = self.expect("IDENT", "a rule set name")
        self.declare("trs", name_token.text, name_token)
        alphabet = self.alphabet()
        self.expect("LBRACE", "'{'")
        rules: list[RewriteRule] = []
        while True:
            self.skip_newlines()
            if self.at("RBRACE"):
                self.next()
                break
            start = self.peek()
            label = None
            if start.kind == "IDENT" and self.peek(1).kind == "COLON":
                label = self.next().text
                self.next()
            lhs = self.expression(alphabet)
            self.expect("ARROW", "'->'")
            rhs = self.expression(alphabet)
            conditions = self.guard(alphabet)
            try:
                rules.append(RewriteRule(lhs, rhs, conditions, label))
            except (LTAError, ValueError) as e:
                raise self.error(start, str(e)) from e
            self.end_of_line()
        self.rule_sets[name_token.text] = TRS(name_token.text, rules)

    def equations_block(self, keyword: Token) -> None:
        name_token = self.expect("IDENT", "an equation set name")
        self.declare("equations", name_token.text, name_token)
        alphabet = self.alphabet()
        self.expect("LBRACE", "'{'")
        equations: list[Equation] = []
        while True:
            self.skip_newlines()
            if self.at("RBRACE"):
                self.next()
                break
            start = self.peek()
            u = self.expression(alphabet)
            equals = self.expect("REL", "'='")
            if Relation.parse(equals.text) is not Relation.EQ:
                raise self.error(equals, f"expected '=', found {equals.describe()}")
            v = self.expression(alphabet)
            conditions = self.guard(alphabet)
            try:
                equations.append(Equation(u, v, conditions))
            except (LTAError, ValueError) as e:
                raise self.error(start, str(e)) from e
            self.end_of_line()
        self.equation_sets[name_token.text] = EquationSet(name_token.text, equations)


def parse_spec_text(text: str, source: Optional[str] = None) -> SpecFile:
    spec = _Parser(tokenize(text)).parse()
    return spec if source is None else replace(spec, source=source)


def parse_spec(path: Union[str, Path]) -> SpecFile:
    """
    Load and validate a spec file

    Args:
        path: Location of a UTF-8 spec file

    Returns:
        Parsed declarations

    Raises:
        SpecSyntaxError: the text is malformed; carries line and column
    """
    path = Path(path)
    logger.info("Loading spec", path=str(path))
    try:
        spec = parse_spec_text(path.read_text(encoding="utf-8"), source=str(path))
    except SpecSyntaxError as e:
        logger.error("Invalid spec", path=str(path), line=e.line, column=e.column, err=e.message)
        raise
    except OSError as e:
        logger.error("Failed to read spec", path=str(path), err=str(e))
        raise
    logger.info(
        "Spec loaded",
        automata=list(spec.automata),
        rule_sets=list(spec.rule_sets),
        equation_sets=list(spec.equation_sets),
    )
    return spec


def parse_term(text: str, alphabet: Alphabet, allow_variables: bool = False) -> Term:
    """Parse one term over `alphabet`; bare unknown names are variables only when allowed."""
    parser = _Parser(tokenize(text), allow_variables=allow_variables)
    parser._alphabet = alphabet
    parser.skip_newlines()
    term = parser.expression(alphabet)
    parser.skip_newlines()
    parser.expect("EOF", "end of term")
    return term


def parse_automaton_text(text: str, name: Optional[str] = None) -> LTA:
    return parse_spec_text(text).automaton(name)
