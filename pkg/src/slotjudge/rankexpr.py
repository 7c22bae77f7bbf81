"""Score-expression language over requirement judgments r1..rM.

Grammar (left associative, longest-match lexing, whitespace insensitive):

    expr   := term (("+" | "-") term)*
    term   := factor ("*" factor)*
    factor := NUMBER | VAR | "(" expr ")" | "not" "(" expr ")"
            | ("min" | "max") "(" expr "," expr ")"
    VAR    := "r" digits

Judgments map yes -> 1.0, no -> 0.0; not(x) = 1 - x. Evaluation is
sandbox-free: there is no code execution, only this closed grammar.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from typing import Sequence, Union

from .judge import JudgmentSet, judge_single_pass
from .template import Requirement, assemble
from .vocab import Vocabulary
from .world import PairSample


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ExprBindError(ValueError):
    pass


# -- AST --------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based requirement index


@dataclass(frozen=True)
class Not:
    operand: "Node"


@dataclass(frozen=True)
class Fn2:
    name: str  # "min" | "max"
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # "+" | "-" | "*"
    left: "Node"
    right: "Node"


Node = Union[Num, Var, Not, Fn2, BinOp]


@dataclass(frozen=True)
class ScoreExpression:
    source: str
    root: Node

    def max_index(self) -> int:
        return _max_index(self.root)

    def bind(self, m: int) -> None:
        """Check that every variable index lies in [1, m]."""
        hi = self.max_index()
        if hi > m:
            raise ExprBindError(f"variable r{hi} exceeds requirement count {m}")


def _max_index(node: Node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Num):
        return 0
    if isinstance(node, Not):
        return _max_index(node.operand)
    return max(_max_index(node.left), _max_index(node.right))


# -- Lexer --------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d+|\d+|\.\d+)|(?P<var>r\d+)|(?P<name>not|min|max)"
    r"|(?P<punct>[+\-*(),]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            rest = source[pos:]
            stripped = rest.lstrip()
            if not stripped:
                break
            bad = pos + len(rest) - len(stripped)
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}", bad)
        for kind in ("num", "var", "name", "punct"):
            text = m.group(kind)
            if text is not None:
                tokens.append((kind, text, m.start(kind)))
                break
        pos = m.end()
    return tokens


# -- Parser -------------------------------------------------------------------


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise ExprSyntaxError("unexpected end of expression", len(self.source))
        self.i += 1
        return tok

    def expect(self, text: str):
        tok = self.next()
        if tok[1] != text:
            raise ExprSyntaxError(f"expected {text!r}, found {tok[1]!r}", tok[2])

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ExprSyntaxError(f"trailing input {tok[1]!r}", tok[2])
        return node

    def expr(self) -> Node:
        node = self.term()
        while (tok := self.peek()) is not None and tok[1] in ("+", "-"):
            self.next()
            node = BinOp(tok[1], node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while (tok := self.peek()) is not None and tok[1] == "*":
            self.next()
            node = BinOp("*", node, self.factor())
        return node

    def factor(self) -> Node:
        kind, text, pos = self.next()
        if kind == "num":
            return Num(float(text))
        if kind == "var":
            index = int(text[1:])
            if index < 1:
                raise ExprBindError(f"variable index must be >= 1: {text}")
            return Var(index)
        if kind == "name":
            self.expect("(")
            first = self.expr()
            if text == "not":
                self.expect(")")
                return Not(first)
            self.expect(",")
            second = self.expr()
            self.expect(")")
            return Fn2(text, first, second)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected token {text!r}", pos)


def parse(source: str) -> ScoreExpression:
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return ScoreExpression(source=source, root=_Parser(source).parse())


# -- Pretty printer -------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2}


def _print(node: Node, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(node, Num):
        v = node.value
        return str(int(v)) if v == int(v) else repr(v)
    if isinstance(node, Var):
        return f"r{node.index}"
    if isinstance(node, Not):
        return f"not({_print(node.operand)})"
    if isinstance(node, Fn2):
        return f"{node.name}({_print(node.left)}, {_print(node.right)})"
    prec = _PRECEDENCE[node.op]
    text = (
        f"{_print(node.left, prec, False)} {node.op} {_print(node.right, prec, True)}"
    )
    # left associativity: a right child at equal precedence needs parentheses
    if prec < parent_prec or (prec == parent_prec and right_side):
        return f"({text})"
    return text


def to_source(expr: ScoreExpression) -> str:
    return _print(expr.root)


# -- Evaluator --------------------------------------------------------------


def _judgment_values(judgments: Sequence) -> list[float]:
    values = []
    for j in judgments:
        if j in ("yes", True, 1, 1.0):
            values.append(1.0)
        elif j in ("no", False, 0, 0.0):
            values.append(0.0)
        else:
            raise ExprBindError(f"not a yes/no judgment: {j!r}")
    return values


def _eval(node: Node, values: list[float]) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.index > len(values):
            raise ExprBindError(
                f"variable r{node.index} exceeds judgment count {len(values)}"
            )
        return values[node.index - 1]
    if isinstance(node, Not):
        return 1.0 - _eval(node.operand, values)
    if isinstance(node, Fn2):
        f = min if node.name == "min" else max
        return f(_eval(node.left, values), _eval(node.right, values))
    a, b = _eval(node.left, values), _eval(node.right, values)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    return a * b


def evaluate(expr: ScoreExpression, judgments: Sequence) -> float:
    return _eval(expr.root, _judgment_values(judgments))


# -- Pairwise reranking harness ------------------------------------------------


@dataclass
class RerankResult:
    prediction: str  # "first" | "second"
    score_1: float
    score_2: float
    judgments_1: "JudgmentSet"
    judgments_2: "JudgmentSet"
    tie: bool
    wall_time_s: float


def rerank_pair(model, pair: PairSample, vocab: Vocabulary) -> RerankResult:
    """Judge both scenes against the pair's requirements in single-pass mode,
    score each with the pair expression, and predict the higher score. Ties
    predict "second" and are flagged."""
    expr = parse(pair.expression)
    expr.bind(len(pair.requirements))
    reqs = [Requirement(text=r) for r in pair.requirements]
    start = time.perf_counter()
    results = []
    for scene in (pair.scene_1, pair.scene_2):
        scene_tokens = vocab.encode(scene.to_words())
        t = assemble(reqs, scene_tokens, with_reasons=False, v=vocab, labeled=False)
        results.append(judge_single_pass(model, t, vocab))
    j1, j2 = results
    s1 = evaluate(expr, j1.decisions)
    s2 = evaluate(expr, j2.decisions)
    return RerankResult(
        prediction="first" if s1 > s2 else "second",
        score_1=s1,
        score_2=s2,
        judgments_1=j1,
        judgments_2=j2,
        tie=s1 == s2,
        wall_time_s=time.perf_counter() - start,
    )
