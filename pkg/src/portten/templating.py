"""Minimal Jinja-flavoured templater for kernel specialization.

Supported syntax::

    {{ name }}            substitution (ints, text, booleans)
    {{ name[i] }}         element of a bound list, ``i`` an identifier or integer
    {% for v in a..b %}   integer range, ``a`` inclusive, ``b`` exclusive
    {% for v in name %}   iterate a bound list
    {% if [not] name %} ... {% else %} ... {% endif %}
    {% endfor %}

There is deliberately no arithmetic: values are computed by the host and
bound in the render context. Text outside tags is copied byte-exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Mapping, Union

IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_TAG = re.compile(r"\{\{(.*?)\}\}|\{%(.*?)%\}", re.S)
_REF = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)(?:\[\s*([A-Za-z_][A-Za-z0-9_]*|\d+)\s*\])?\s*\Z")
_FOR = re.compile(r"\s*for\s+([A-Za-z_][A-Za-z0-9_]*)\s+in\s+(.+?)\s*\Z", re.S)
_RANGE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*|-?\d+)\s*\.\.\s*([A-Za-z_][A-Za-z0-9_]*|-?\d+)\Z")
_IF = re.compile(r"\s*if\s+(not\s+)?([A-Za-z_][A-Za-z0-9_]*)\s*\Z")


class TemplateSyntaxError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class TemplateRenderError(ValueError):
    pass


@dataclass(frozen=True)
class Text:
    text: str


@dataclass(frozen=True)
class Var:
    name: str
    index: str | int | None = None
    line: int = 0


@dataclass(frozen=True)
class For:
    var: str
    # ("range", lo, hi) or ("list", name); bounds are ints or identifiers
    source: tuple
    body: tuple
    line: int = 0


@dataclass(frozen=True)
class If:
    name: str
    negate: bool
    then: tuple
    orelse: tuple = ()
    line: int = 0


Node = Union[Text, Var, For, If]


@dataclass(frozen=True)
class Template:
    source: str
    ast: tuple = field(repr=False)

    def render(self, context: Mapping[str, Any] | None = None, **kwargs) -> str:
        ctx = dict(context or {})
        ctx.update(kwargs)
        return render(self, ctx)


def _line_of(source: str, pos: int) -> int:
    return source.count("\n", 0, pos) + 1


def _bound(token: str):
    return int(token) if token.lstrip("-").isdigit() else token


def parse(source: str) -> Template:
    """Parse ``source`` into a :class:`Template`; no variables are evaluated."""
    # stack entries: (kind, header node fields, children list, line)
    root: list = []
    stack: list[tuple[str, dict, list, int]] = []
    current = root
    pos = 0
    for m in _TAG.finditer(source):
        if m.start() > pos:
            current.append(Text(source[pos:m.start()]))
        pos = m.end()
        line = _line_of(source, m.start())
        if m.group(1) is not None:
            ref = _REF.match(m.group(1))
            if not ref:
                raise TemplateSyntaxError(f"malformed expression {{{{{m.group(1)}}}}}", line)
            index = ref.group(2)
            current.append(Var(ref.group(1), _bound(index) if index else None, line))
            continue

        tag = m.group(2).strip()
        word = tag.split(None, 1)[0] if tag else ""
        if word == "for":
            fm = _FOR.match(tag)
            if not fm:
                raise TemplateSyntaxError(f"malformed for tag {{% {tag} %}}", line)
            it = fm.group(2)
            rm = _RANGE.match(it)
            if rm:
                src = ("range", _bound(rm.group(1)), _bound(rm.group(2)))
            elif IDENT.match(it):
                src = ("list", it)
            else:
                raise TemplateSyntaxError(f"malformed loop source {it!r}", line)
            body: list = []
            stack.append(("for", {"var": fm.group(1), "source": src}, current, line))
            current = body
            stack[-1][1]["body"] = body
        elif word == "if":
            im = _IF.match(tag)
            if not im:
                raise TemplateSyntaxError(f"malformed if tag {{% {tag} %}}", line)
            then: list = []
            stack.append(("if", {"name": im.group(2), "negate": bool(im.group(1)),
                                 "then": then, "orelse": None}, current, line))
            current = then
        elif word == "else" and tag == "else":
            if not stack or stack[-1][0] != "if" or stack[-1][1]["orelse"] is not None:
                raise TemplateSyntaxError("{% else %} without matching {% if %}", line)
            orelse: list = []
            stack[-1][1]["orelse"] = orelse
            current = orelse
        elif tag in ("endfor", "endif"):
            kind = tag[3:]
            if not stack or stack[-1][0] != kind:
                raise TemplateSyntaxError(f"{{% {tag} %}} without matching {{% {kind} %}}", line)
            _, fields, parent, open_line = stack.pop()
            if kind == "for":
                node = For(fields["var"], fields["source"], tuple(fields["body"]), open_line)
            else:
                node = If(fields["name"], fields["negate"], tuple(fields["then"]),
                          tuple(fields["orelse"] or ()), open_line)
            parent.append(node)
            current = parent
        else:
            raise TemplateSyntaxError(f"unknown tag {{% {tag} %}}", line)

    rest = source[pos:]
    for opener in ("{{", "{%"):
        at = rest.find(opener)
        if at >= 0:
            raise TemplateSyntaxError(f"unterminated {opener!r} tag", _line_of(source, pos + at))
    if rest:
        current.append(Text(rest))
    if stack:
        kind, _, _, line = stack[-1]
        raise TemplateSyntaxError(f"unclosed {{% {kind} %}} block", line)
    return Template(source, tuple(root))


def _lookup(ctx: Mapping[str, Any], name: str, line: int):
    try:
        return ctx[name]
    except KeyError:
        raise TemplateRenderError(f"line {line}: unbound identifier '{name}'") from None


def _format(value, name: str, line: int) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, str)):
        return str(value)
    raise TemplateRenderError(
        f"line {line}: '{name}' of type {type(value).__name__} cannot be substituted"
    )


def _emit(nodes, ctx: dict, out: list[str]) -> None:
    for node in nodes:
        if isinstance(node, Text):
            out.append(node.text)
        elif isinstance(node, Var):
            value = _lookup(ctx, node.name, node.line)
            label = node.name
            if node.index is not None:
                idx = node.index
                if isinstance(idx, str):
                    idx = _lookup(ctx, idx, node.line)
                if not isinstance(value, (list, tuple)) or not isinstance(idx, int):
                    raise TemplateRenderError(f"line {node.line}: cannot index '{node.name}'")
                try:
                    value = value[idx]
                except IndexError:
                    raise TemplateRenderError(
                        f"line {node.line}: index {idx} out of range for '{node.name}'"
                    ) from None
                label = f"{node.name}[{idx}]"
            out.append(_format(value, label, node.line))
        elif isinstance(node, For):
            if node.source[0] == "range":
                lo, hi = (
                    b if isinstance(b, int) else _lookup(ctx, b, node.line)
                    for b in node.source[1:]
                )
                if not (isinstance(lo, int) and isinstance(hi, int)) or isinstance(lo, bool) or isinstance(hi, bool):
                    raise TemplateRenderError(f"line {node.line}: range bounds must be integers")
                items = range(lo, hi)
            else:
                items = _lookup(ctx, node.source[1], node.line)
                if not isinstance(items, (list, tuple)):
                    raise TemplateRenderError(
                        f"line {node.line}: '{node.source[1]}' is not iterable"
                    )
            saved = ctx.get(node.var, _MISSING)
            for item in items:
                ctx[node.var] = item
                _emit(node.body, ctx, out)
            if saved is _MISSING:
                ctx.pop(node.var, None)
            else:
                ctx[node.var] = saved
        else:
            cond = _lookup(ctx, node.name, node.line)
            if not isinstance(cond, bool):
                raise TemplateRenderError(
                    f"line {node.line}: condition '{node.name}' must be boolean, "
                    f"got {type(cond).__name__}"
                )
            _emit(node.then if cond != node.negate else node.orelse, ctx, out)


_MISSING = object()


def render(template: Template, context: Mapping[str, Any]) -> str:
    for key in context:
        if not IDENT.match(key):
            raise TemplateRenderError(f"invalid identifier {key!r} in render context")
    out: list[str] = []
    _emit(template.ast, dict(context), out)
    return "".join(out)


@lru_cache(maxsize=None)
def load(name: str) -> Template:
    """Parse a bundled ``<name>.kt.tmpl`` template from the package."""
    text = resources.files("portten").joinpath("templates", f"{name}.kt.tmpl").read_text()
    return parse(text)
