"""Line-oriented scenario description language.

A ``.scen`` file declares the map, the controlled agents, the sampled
parameters and how those parameters are bound to simulator knobs::

    scenario intersection_ued
    map fourway
    ego count 1
    param route in {straight, left, right}
    param npc_count in 0..6
    param npc_target_speed in 4.0..12.0
    param keeps_safety_distance in bool
    bind ego.route = route

``#`` starts a comment that runs to the end of the line.  Integer ranges are
written with integer bounds, real ranges with at least one real bound.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Union

__all__ = [
    "Categorical",
    "IntRange",
    "RealRange",
    "Boolean",
    "ParamDomain",
    "EgoRole",
    "ScenarioSpec",
    "Diagnostic",
    "SpecError",
    "parse_spec",
    "load_spec",
    "format_spec",
]


@dataclass(frozen=True)
class Categorical:
    values: tuple[str, ...]

    def contains(self, value) -> bool:
        return value in self.values


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int

    def contains(self, value) -> bool:
        return isinstance(value, int) and not isinstance(value, bool) and self.lo <= value <= self.hi


@dataclass(frozen=True)
class RealRange:
    lo: float
    hi: float

    def contains(self, value) -> bool:
        return isinstance(value, float) and self.lo <= value <= self.hi


@dataclass(frozen=True)
class Boolean:
    def contains(self, value) -> bool:
        return isinstance(value, bool)


Domain = Union[Categorical, IntRange, RealRange, Boolean]


@dataclass(frozen=True)
class ParamDomain:
    name: str
    kind: Domain

    def contains(self, value) -> bool:
        return self.kind.contains(value)


@dataclass(frozen=True)
class EgoRole:
    count: int = 1


@dataclass(frozen=True)
class ScenarioSpec:
    name: str = "unnamed"
    map_id: str = "fourway"
    ego_role: EgoRole = field(default_factory=EgoRole)
    params: tuple[ParamDomain, ...] = ()
    # knob -> parameter name, in declaration order
    npc_behavior_binding: tuple[tuple[str, str], ...] = ()

    def param(self, name: str) -> ParamDomain:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    @property
    def bindings(self) -> dict[str, str]:
        return dict(self.npc_behavior_binding)


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str
    severity: str = "error"

    def format(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.line}:{self.col}: {self.severity}: {self.message}"


class SpecError(ValueError):
    """Raised when scenario text does not describe a valid spec."""

    def __init__(self, diagnostics: list[Diagnostic], filename: str = "<input>"):
        self.diagnostics = list(diagnostics)
        self.filename = filename
        super().__init__("\n".join(d.format(filename) for d in self.diagnostics))


# ---------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<dots>\.\.)
  | (?P<punct>[{},=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number | ident | dots | punct | eol
    text: str
    line: int
    col: int


class _LexError(Exception):
    def __init__(self, line: int, col: int, message: str):
        self.diag = Diagnostic(line, col, message)


def _tokenize_line(text: str, lineno: int) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise _LexError(lineno, pos + 1, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, m.group(), lineno, pos + 1))
        pos = m.end()
    tokens.append(_Token("eol", "", lineno, len(text) + 1))
    return tokens


# ---------------------------------------------------------------- parser


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        t = self.tokens[self.pos]
        if t.kind != "eol":
            self.pos += 1
        return t

    def error(self, message: str, tok: _Token | None = None) -> _LexError:
        t = tok or self.tok
        return _LexError(t.line, t.col, message)

    def _describe(self, t: _Token) -> str:
        return "end of line" if t.kind == "eol" else repr(t.text)

    def expect(self, kind: str, text: str | None = None) -> _Token:
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            want = repr(text) if text is not None else kind
            raise self.error(f"expected {want}, found {self._describe(t)}")
        return self.advance()

    def ident(self, dotted: bool = False) -> _Token:
        t = self.expect("ident")
        if not dotted and "." in t.text:
            raise self.error(f"expected plain identifier, found {t.text!r}", t)
        return t

    def end(self) -> None:
        if self.tok.kind != "eol":
            raise self.error(f"unexpected {self._describe(self.tok)}")

    def domain(self) -> Domain:
        t = self.tok
        if t.kind == "punct" and t.text == "{":
            self.advance()
            values: list[str] = []
            if self.tok.kind == "punct" and self.tok.text == "}":
                raise self.error("empty categorical domain", t)
            while True:
                v = self.ident()
                if v.text in values:
                    raise self.error(f"duplicate categorical value {v.text!r}", v)
                values.append(v.text)
                if self.tok.kind == "punct" and self.tok.text == ",":
                    self.advance()
                    continue
                self.expect("punct", "}")
                return Categorical(tuple(values))
        if t.kind == "ident" and t.text == "bool":
            self.advance()
            return Boolean()
        if t.kind == "number":
            lo_tok = self.advance()
            self.expect("dots")
            hi_tok = self.expect("number")
            is_real = any(_is_real(x.text) for x in (lo_tok, hi_tok))
            conv = float if is_real else int
            lo, hi = conv(lo_tok.text), conv(hi_tok.text)
            if is_real and not (math.isfinite(lo) and math.isfinite(hi)):
                raise self.error("range bounds must be finite", lo_tok)
            if lo > hi:
                raise self.error(f"inverted range {lo_tok.text}..{hi_tok.text}", lo_tok)
            return RealRange(lo, hi) if is_real else IntRange(lo, hi)
        raise self.error(f"expected domain, found {self._describe(t)}")


def _is_real(text: str) -> bool:
    return "." in text or "e" in text or "E" in text


def parse_spec(text: str, filename: str = "<input>") -> ScenarioSpec:
    """Parse scenario text into a validated :class:`ScenarioSpec`.

    All problems in the input are collected before raising a single
    :class:`SpecError` whose ``diagnostics`` carry 1-based line/column
    positions.
    """
    diags: list[Diagnostic] = []
    name = None
    map_id = None
    ego = None
    params: list[ParamDomain] = []
    binds: list[tuple[_Token, str, _Token]] = []
    seen_params: dict[str, int] = {}

    for lineno, line in enumerate(text.split("\n"), start=1):
        try:
            p = _Parser(_tokenize_line(line, lineno))
            if p.tok.kind == "eol":
                continue
            kw = p.ident()
            if kw.text == "scenario":
                value = p.ident().text
                p.end()
                if name is not None:
                    raise p.error("duplicate scenario statement", kw)
                name = value
            elif kw.text == "map":
                value = p.ident().text
                p.end()
                if map_id is not None:
                    raise p.error("duplicate map statement", kw)
                map_id = value
            elif kw.text == "ego":
                p.expect("ident", "count")
                n_tok = p.expect("number")
                p.end()
                if _is_real(n_tok.text) or int(n_tok.text) < 1:
                    raise p.error("ego count must be a positive integer", n_tok)
                if ego is not None:
                    raise p.error("duplicate ego statement", kw)
                ego = EgoRole(int(n_tok.text))
            elif kw.text == "param":
                name_tok = p.ident()
                p.expect("ident", "in")
                dom = p.domain()
                p.end()
                if name_tok.text in seen_params:
                    raise p.error(
                        f"duplicate parameter {name_tok.text!r} "
                        f"(first declared on line {seen_params[name_tok.text]})",
                        name_tok,
                    )
                seen_params[name_tok.text] = lineno
                params.append(ParamDomain(name_tok.text, dom))
            elif kw.text == "bind":
                knob = p.ident(dotted=True)
                p.expect("punct", "=")
                target = p.ident()
                p.end()
                binds.append((knob, target.text, target))
            else:
                raise p.error(f"unknown statement {kw.text!r}", kw)
        except _LexError as e:
            diags.append(e.diag)

    names = {p.name for p in params}
    knobs_seen: set[str] = set()
    binding = []
    for knob, target, tok in binds:
        if target not in names:
            diags.append(Diagnostic(tok.line, tok.col, f"bind references unknown parameter {target!r}"))
        elif knob.text in knobs_seen:
            diags.append(Diagnostic(knob.line, knob.col, f"knob {knob.text!r} bound twice"))
        else:
            knobs_seen.add(knob.text)
            binding.append((knob.text, target))

    if diags:
        diags.sort(key=lambda d: (d.line, d.col))
        raise SpecError(diags, filename)
    return ScenarioSpec(
        name=name or "unnamed",
        map_id=map_id or "fourway",
        ego_role=ego or EgoRole(),
        params=tuple(params),
        npc_behavior_binding=tuple(binding),
    )


def load_spec(path) -> ScenarioSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read(), filename=str(path))


def _format_domain(kind: Domain) -> str:
    if isinstance(kind, Categorical):
        return "{" + ", ".join(kind.values) + "}"
    if isinstance(kind, IntRange):
        return f"{kind.lo}..{kind.hi}"
    if isinstance(kind, RealRange):
        return f"{float(kind.lo)!r}..{float(kind.hi)!r}"
    return "bool"


def format_spec(spec: ScenarioSpec) -> str:
    """Canonical text for ``spec``; ``parse_spec(format_spec(s)) == s``."""
    lines = [
        f"scenario {spec.name}",
        f"map {spec.map_id}",
        f"ego count {spec.ego_role.count}",
    ]
    lines += [f"param {p.name} in {_format_domain(p.kind)}" for p in spec.params]
    lines += [f"bind {knob} = {target}" for knob, target in spec.npc_behavior_binding]
    return "\n".join(lines) + "\n"


def iter_diagnostics(err: SpecError) -> Iterable[str]:
    for d in err.diagnostics:
        yield d.format(err.filename)
