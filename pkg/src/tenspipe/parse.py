"""Textual pipeline descriptions.

Grammar (launch-style)::

    pipeline := branch { branch }
    branch   := node { "!" node }
    node     := element | caps | ref
    element  := IDENT { IDENT "=" value }     first IDENT is the kind;
                                              property name= names the instance
    caps     := CAPS_STRING                   constrains the surrounding link
    ref      := IDENT "." [PADNAME]           attach to/from a named element

Branches are separated by whitespace: a token that follows a node without
a ``!`` starts a new branch.  A branch starting with ``ref !`` attaches
downstream of the referenced element; a ref after ``!`` attaches into it
(multi-pad elements allocate request pads in link order).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .caps import StreamCaps, parse_caps
from .element import ELEMENT_KINDS, _convert_prop
from .errors import CapsError, LaunchParseError, PipelineError

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-]*$")
_REF = re.compile(r"^([A-Za-z_][A-Za-z0-9_\-]*)\.([A-Za-z0-9_\-]*)$")


@dataclass
class NodeSpec:
    kind: str
    name: str
    props: dict[str, str] = field(default_factory=dict)


@dataclass
class LinkSpec:
    src: str
    src_pad: str | None
    dst: str
    dst_pad: str | None
    filter_caps: StreamCaps | None = None


@dataclass
class GraphSpec:
    """Parsed pipeline: nodes by name plus ordered pad links."""

    nodes: dict[str, NodeSpec] = field(default_factory=dict)
    links: list[LinkSpec] = field(default_factory=list)


@dataclass
class _Token:
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    for lineno, line in enumerate(text.splitlines() or [""], start=1):
        col = 0
        for match in re.finditer(r"\S+", line):
            token = match.group(0)
            col = match.start() + 1
            # "a!b" is three tokens
            for part in re.split(r"(!)", token):
                if part:
                    tokens.append(_Token(part, lineno, col))
                    col += len(part)
    return tokens


def _is_caps_token(text: str) -> bool:
    head = text.split(",", 1)[0]
    return text == "ANY" or ("/" in head and "=" not in head)


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.spec = GraphSpec()
        self.auto_index: dict[str, int] = {}
        self.pending_links: list[tuple[LinkSpec, _Token]] = []

    def error(self, message: str, token: _Token | None = None):
        raise LaunchParseError(
            message,
            line=token.line if token else None,
            column=token.column if token else None,
        )

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    # -- nodes ---------------------------------------------------------------

    def auto_name(self, kind: str) -> str:
        while True:
            idx = self.auto_index.get(kind, 0)
            self.auto_index[kind] = idx + 1
            name = f"{kind}{idx}"
            if name not in self.spec.nodes:
                return name

    def parse_element(self, first: _Token) -> str:
        kind = first.text
        if kind not in ELEMENT_KINDS:
            self.error(f"unknown element kind {kind!r}", first)
        cls = ELEMENT_KINDS[kind]
        props: dict[str, str] = {}
        name = None
        while (tok := self.peek()) is not None:
            key, sep, value = tok.text.partition("=")
            if not sep or not _IDENT.match(key):
                break
            self.next()
            if value == "":
                self.error(f"property {key!r} has no value", tok)
            if key == "name":
                name = value
                continue
            if key not in cls.PROPS:
                self.error(
                    f"unknown property {key!r} of {kind} "
                    f"(known: {sorted(cls.PROPS)})", tok
                )
            try:
                _convert_prop(kind, key, cls.PROPS[key], value)
            except PipelineError as exc:
                self.error(str(exc), tok)
            if key in props:
                self.error(f"duplicate property {key!r}", tok)
            props[key] = value
        if name is None:
            name = self.auto_name(kind)
        if name in self.spec.nodes:
            self.error(f"duplicate element name {name!r}", first)
        for key, spec in cls.PROPS.items():
            if spec.required and key not in props:
                self.error(f"{kind} is missing required property {key!r}", first)
        self.spec.nodes[name] = NodeSpec(kind, name, props)
        return name

    # -- pipeline structure ----------------------------------------------------

    def parse(self) -> GraphSpec:
        while self.peek() is not None:
            self.parse_branch()
        if not self.spec.nodes:
            self.error("empty pipeline description")
        for link, token in self.pending_links:
            for endpoint in (link.src, link.dst):
                if endpoint not in self.spec.nodes:
                    self.error(f"reference to unknown element {endpoint!r}", token)
            self.spec.links.append(link)
        return self.spec

    def parse_branch(self) -> None:
        token = self.next()
        if token.text == "!":
            self.error("link with no upstream node", token)
        current: tuple[str, str | None]
        if _is_caps_token(token.text):
            self.error("caps filter needs an element before it", token)
        elif m := _REF.match(token.text):
            current = (m.group(1), m.group(2) or None)
        else:
            if not _IDENT.match(token.text):
                self.error(f"expected element, caps, or reference, got "
                           f"{token.text!r}", token)
            current = (self.parse_element(token), None)

        while (tok := self.peek()) is not None and tok.text == "!":
            bang = self.next()
            tok = self.peek()
            if tok is None:
                self.error("dangling '!' at end of description", bang)
            if tok.text == "!":
                self.error("empty node between '!'", tok)
            filter_caps = None
            if _is_caps_token(tok.text):
                caps_tok = self.next()
                try:
                    filter_caps = parse_caps(caps_tok.text)
                except CapsError as exc:
                    self.error(f"bad caps literal: {exc}", caps_tok)
                nxt = self.peek()
                if nxt is None or nxt.text != "!":
                    self.error("caps filter needs '! element' after it", caps_tok)
                self.next()
                tok = self.peek()
                if tok is None:
                    self.error("dangling '!' after caps filter", caps_tok)
                if _is_caps_token(tok.text):
                    self.error("two caps filters in a row", tok)
                if tok.text == "!":
                    self.error("empty node between '!'", tok)
            self.next()
            if m := _REF.match(tok.text):
                dst = (m.group(1), m.group(2) or None)
            else:
                if not _IDENT.match(tok.text):
                    self.error(f"expected element or reference, got "
                               f"{tok.text!r}", tok)
                dst = (self.parse_element(tok), None)
            link = LinkSpec(current[0], current[1], dst[0], dst[1], filter_caps)
            self.pending_links.append((link, bang))
            current = (dst[0], None)


def parse_pipeline(text: str) -> GraphSpec:
    """Parse a pipeline description into a graph spec."""
    return _Parser(text).parse()


def serialize_pipeline(spec: GraphSpec) -> str:
    """Canonical text form: one branch per element, then one per link.

    Parsing the result reproduces an identical graph (names are made
    explicit, so auto-naming cannot diverge).
    """
    parts = []
    for node in spec.nodes.values():
        props = " ".join(f"{k}={v}" for k, v in sorted(node.props.items()))
        parts.append(f"{node.kind} name={node.name}" + (f" {props}" if props else ""))
    for link in spec.links:
        src = f"{link.src}.{link.src_pad or ''}"
        dst = f"{link.dst}.{link.dst_pad or ''}"
        if link.filter_caps is not None:
            parts.append(f"{src} ! {link.filter_caps.render()} ! {dst}")
        else:
            parts.append(f"{src} ! {dst}")
    return "  ".join(parts)
