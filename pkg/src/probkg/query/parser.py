"""Tokenizer and recursive-descent parser for the query dialect.

Keywords are uppercase-only.  Triple patterns end with a dot; FILTER, BIND,
OPTIONAL, MINUS, UNION, and SIMJOIN are clause keywords.  FILTER
expressions apply to their whole group (collected during parsing and
attached at group end, in textual order), which is also where SIMJOIN
splits its group into two variable-disjoint sides.

Scope rules enforced at parse time:
  * FILTER expression variables must be bound somewhere in the group.
  * BIND expression variables must be bound by the group so far, and the
    target variable must be fresh.
  * SIMJOIN variables must come from two disjoint connected components of
    the group's triple patterns.
Violations raise UnboundVariable or QuerySyntax.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import QuerySyntax, UnboundVariable
from ..distributions import parse_distribution
from ..store import (
    DIST_DATATYPE,
    NUM_DATATYPE,
    PLAIN_DATATYPE,
    DistLiteral,
    Iri,
    Literal,
    TriplePattern,
    Variable,
    _unescape,
)
from .ast import (
    BUILTINS,
    Arith,
    Bgp,
    Bind,
    Call,
    Cmp,
    Const,
    EMPTY_BGP,
    Expr,
    Filter,
    Join,
    Minus,
    Neg,
    OptionalPat,
    Pattern,
    Query,
    SimJoin,
    Union,
    VarRef,
    expr_vars,
    in_scope_vars,
)

KEYWORDS = {"SELECT", "WHERE", "FILTER", "BIND", "AS", "UNION", "OPTIONAL", "MINUS", "SIMJOIN"}

_TOKEN_SPEC = [
    ("WS", r"[ \t\r\n]+"),
    ("COMMENT", r"#[^\n]*"),
    ("IRI", r"<[^<>\s]*>"),
    ("VAR", r"\?[A-Za-z_][A-Za-z0-9_]*"),
    ("STRING", r'"(?:[^"\\]|\\.)*"'),
    ("NUMBER", r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"),
    ("NAME", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("DTYPE", r"\^\^"),
    ("LANG", r"@[A-Za-z][A-Za-z0-9]*(?:-[A-Za-z0-9]+)*"),
    ("OP", r"<=|>=|!=|[<>=+\-*/]"),
    ("PUNCT", r"[{}(),.]"),
]
_MASTER_RE = re.compile("|".join(f"(?P<{n}>{p})" for n, p in _TOKEN_SPEC))


@dataclass(frozen=True)
class Token:
    kind: str  # IRI VAR STRING NUMBER NAME DTYPE LANG OP PUNCT EOF
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start = 1, 0
    pos = 0
    n = len(text)
    while pos < n:
        m = _MASTER_RE.match(text, pos)
        if m is None:
            raise QuerySyntax(line, pos - line_start + 1, "a valid token")
        kind = m.lastgroup
        lex = m.group()
        if kind not in ("WS", "COMMENT"):
            tokens.append(Token(kind, lex, line, pos - line_start + 1))
        nl = lex.count("\n")
        if nl:
            line += nl
            line_start = pos + lex.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("EOF", "", line, n - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    def peek(self, ahead: int = 0) -> Token:
        j = min(self.i + ahead, len(self.toks) - 1)
        return self.toks[j]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def error(self, expected: str, tok: Token | None = None):
        t = tok if tok is not None else self.peek()
        raise QuerySyntax(t.line, t.col, expected)

    def expect(self, kind: str, text: str | None = None, expected: str | None = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            self.error(expected or (text if text is not None else kind))
        return self.advance()

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    # -- entry ------------------------------------------------------------

    def parse(self) -> Query:
        self.expect("NAME", "SELECT", "SELECT")
        select: list[str] = []
        while self.at("VAR"):
            select.append(self.advance().text[1:])
        if not select:
            self.error("at least one ?variable")
        self.expect("NAME", "WHERE", "WHERE")
        where = self.group()
        if not self.at("EOF"):
            self.error("end of query")
        return Query(tuple(select), where)

    # -- groups -----------------------------------------------------------

    def group(self) -> Pattern:
        self.expect("PUNCT", "{", "{")
        pending: list[TriplePattern] = []
        g: Pattern | None = None
        filters: list[Expr] = []
        simjoin: tuple[str, str, float, Token] | None = None
        only_triples = True

        def flush():
            nonlocal g, pending
            if pending:
                b = Bgp(tuple(pending))
                g = b if g is None else Join(g, b)
                pending = []

        def scope_now() -> set[str]:
            s: set[str] = set()
            if g is not None:
                s |= in_scope_vars(g)
            for tp in pending:
                s |= {v.name for v in tp.variables()}
            return s

        while not self.at("PUNCT", "}"):
            t = self.peek()
            if t.kind == "EOF":
                self.error("}")
            if t.kind == "PUNCT" and t.text == "{":
                only_triples = False
                sub = self.group()
                while self.at("NAME", "UNION"):
                    self.advance()
                    sub = Union(sub, self.group())
                flush()
                g = sub if g is None else Join(g, sub)
            elif t.kind == "NAME" and t.text == "FILTER":
                self.advance()
                self.expect("PUNCT", "(", "(")
                filters.append(self.expression())
                self.expect("PUNCT", ")", ")")
            elif t.kind == "NAME" and t.text == "BIND":
                only_triples = False
                self.advance()
                self.expect("PUNCT", "(", "(")
                e = self.expression()
                self.expect("NAME", "AS", "AS")
                vt = self.expect("VAR", expected="?variable")
                self.expect("PUNCT", ")", ")")
                name = vt.text[1:]
                scope = scope_now()
                if name in scope:
                    self.error("a variable not already bound", vt)
                for v in sorted(expr_vars(e)):
                    if v not in scope:
                        raise UnboundVariable(v)
                flush()
                g = Bind(g if g is not None else EMPTY_BGP, e, name)
            elif t.kind == "NAME" and t.text == "OPTIONAL":
                only_triples = False
                self.advance()
                sub = self.group()
                flush()
                g = OptionalPat(g if g is not None else EMPTY_BGP, sub)
            elif t.kind == "NAME" and t.text == "MINUS":
                only_triples = False
                self.advance()
                sub = self.group()
                flush()
                g = Minus(g if g is not None else EMPTY_BGP, sub)
            elif t.kind == "NAME" and t.text == "SIMJOIN":
                self.advance()
                if simjoin is not None:
                    self.error("at most one SIMJOIN per group", t)
                self.expect("PUNCT", "(", "(")
                va = self.expect("VAR", expected="?variable").text[1:]
                self.expect("PUNCT", ",", ",")
                vb = self.expect("VAR", expected="?variable").text[1:]
                self.expect("PUNCT", ",", ",")
                self.expect("NAME", "JSD", "JSD")
                self.expect("PUNCT", ",", ",")
                theta = self.number()
                self.expect("PUNCT", ")", ")")
                simjoin = (va, vb, theta, t)
            elif t.kind == "NAME" and t.text not in KEYWORDS and t.text not in BUILTINS:
                self.error("a triple pattern or clause keyword (keywords are uppercase)")
            else:
                s = self.term()
                p = self.term()
                o = self.term()
                self.expect("PUNCT", ".", ". (triple patterns end with a dot)")
                pending.append(TriplePattern(s, p, o))
        self.expect("PUNCT", "}", "}")

        if simjoin is not None:
            va, vb, theta, st = simjoin
            if not only_triples:
                self.error("a SIMJOIN group containing only triple patterns and filters", st)
            g = self._partition_simjoin(pending, va, vb, theta, st)
        else:
            flush()
        if g is None:
            g = EMPTY_BGP
        scope = in_scope_vars(g)
        for e in filters:
            for v in sorted(expr_vars(e)):
                if v not in scope:
                    raise UnboundVariable(v)
            g = Filter(g, e)
        return g

    def _partition_simjoin(
        self, patterns: list[TriplePattern], va: str, vb: str, theta: float, st: Token
    ) -> Pattern:
        # connected components of triple patterns under shared variables
        parent = list(range(len(patterns)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        by_var: dict[str, int] = {}
        for idx, tp in enumerate(patterns):
            for v in tp.variables():
                if v.name in by_var:
                    ra, rb = find(by_var[v.name]), find(idx)
                    if ra != rb:
                        parent[rb] = ra
                else:
                    by_var[v.name] = idx
        if va not in by_var:
            raise UnboundVariable(va)
        if vb not in by_var:
            raise UnboundVariable(vb)
        comp_a = find(by_var[va])
        comp_b = find(by_var[vb])
        if comp_a == comp_b:
            self.error("variable-disjoint SIMJOIN sides", st)
        groups: dict[int, list[TriplePattern]] = {}
        for idx, tp in enumerate(patterns):
            groups.setdefault(find(idx), []).append(tp)
        left = Bgp(tuple(groups.pop(comp_a)))
        right = Bgp(tuple(groups.pop(comp_b)))
        g: Pattern = SimJoin(left, right, va, vb, theta)
        for root in sorted(groups):
            g = Join(g, Bgp(tuple(groups[root])))
        return g

    # -- terms ------------------------------------------------------------

    def number(self) -> float:
        neg = False
        if self.at("OP", "-"):
            self.advance()
            neg = True
        t = self.expect("NUMBER", expected="a number")
        v = float(t.text)
        return -v if neg else v

    def _string_value(self, t: Token) -> str:
        try:
            return _unescape(t.text[1:-1], t.line)
        except Exception:
            self.error("a valid string escape", t)

    def term(self):
        t = self.peek()
        if t.kind == "VAR":
            self.advance()
            return Variable(t.text[1:])
        if t.kind == "IRI":
            self.advance()
            return Iri(t.text[1:-1])
        if t.kind == "NUMBER" or (t.kind == "OP" and t.text == "-" and self.peek(1).kind == "NUMBER"):
            lex = ""
            if t.kind == "OP":
                self.advance()
                lex = "-"
            lex += self.advance().text
            return Literal(lex, NUM_DATATYPE)
        if t.kind == "STRING":
            self.advance()
            value = self._string_value(t)
            if self.at("DTYPE"):
                self.advance()
                dt = self.expect("IRI", expected="a datatype IRI").text[1:-1]
                if dt == DIST_DATATYPE:
                    try:
                        return DistLiteral(parse_distribution(value))
                    except Exception:
                        self.error("a parseable distribution literal", t)
                return Literal(value, dt)
            if self.at("LANG"):
                lang = self.advance().text[1:]
                return Literal(value, PLAIN_DATATYPE, lang)
            return Literal(value, PLAIN_DATATYPE)
        self.error("a term (IRI, ?variable, number, or string)")

    # -- expressions --------------------------------------------------------

    def expression(self) -> Expr:
        left = self.additive()
        if self.at("OP") and self.peek().text in ("<", "<=", ">", ">=", "=", "!="):
            op = self.advance().text
            right = self.additive()
            return Cmp(op, left, right)
        return left

    def additive(self) -> Expr:
        e = self.multiplicative()
        while self.at("OP") and self.peek().text in ("+", "-"):
            op = self.advance().text
            e = Arith(op, e, self.multiplicative())
        return e

    def multiplicative(self) -> Expr:
        e = self.unary()
        while self.at("OP") and self.peek().text in ("*", "/"):
            op = self.advance().text
            e = Arith(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.at("OP", "-"):
            self.advance()
            return Neg(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        t = self.peek()
        if t.kind == "NUMBER":
            self.advance()
            return Const(float(t.text))
        if t.kind == "VAR":
            self.advance()
            return VarRef(t.text[1:])
        if t.kind == "IRI":
            self.advance()
            return Const(Iri(t.text[1:-1]))
        if t.kind == "STRING":
            self.advance()
            value = self._string_value(t)
            if self.at("DTYPE"):
                self.advance()
                dt = self.expect("IRI", expected="a datatype IRI").text[1:-1]
                if dt == DIST_DATATYPE:
                    try:
                        return Const(parse_distribution(value))
                    except Exception:
                        self.error("a parseable distribution literal", t)
                if dt == NUM_DATATYPE:
                    return Const(float(value))
                return Const(value)
            return Const(value)
        if t.kind == "PUNCT" and t.text == "(":
            self.advance()
            e = self.expression()
            self.expect("PUNCT", ")", ")")
            return e
        if t.kind == "NAME":
            if t.text in BUILTINS:
                self.advance()
                self.expect("PUNCT", "(", "(")
                args = [self.expression()]
                while self.at("PUNCT", ","):
                    self.advance()
                    args.append(self.expression())
                self.expect("PUNCT", ")", ")")
                if len(args) != BUILTINS[t.text]:
                    self.error(f"{BUILTINS[t.text]} argument(s) to {t.text}", t)
                return Call(t.text, tuple(args))
            self.error("a builtin function (PGT, PBETWEEN, CDF, JSD, CONV, FUSE, MEAN, VAR)")
        self.error("an expression")


def parse_query(text: str) -> Query:
    """Parse query text to a scope-checked AST."""
    return _Parser(tokenize(text)).parse()
