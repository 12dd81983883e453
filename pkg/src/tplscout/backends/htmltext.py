"""HTML to visible plain text.

Rules: the document title becomes the first line; script, style, noscript,
template, svg, nav, header, footer, aside and form subtrees are dropped;
block-level elements start new lines; runs of whitespace collapse to one
space and blank lines are removed.
"""

from __future__ import annotations

import re
from html.parser import HTMLParser

TRUNCATION_MARKER = "\n[... truncated]"

_SKIP = frozenset({"script", "style", "noscript", "template", "svg", "nav", "header", "footer", "aside", "form"})
_BLOCK = frozenset({
    "address", "article", "blockquote", "br", "dd", "div", "dl", "dt", "figcaption", "figure",
    "h1", "h2", "h3", "h4", "h5", "h6", "hr", "li", "main", "ol", "p", "pre", "section",
    "table", "tbody", "td", "th", "thead", "tr", "ul", "body", "html",
})
_VOID = frozenset({"area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta",
                   "param", "source", "track", "wbr"})
_WS = re.compile(r"[ \t\r\f\v\xa0]+")


class _TextParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self.title: list[str] = []
        self._skip_depth = 0
        self._in_title = False

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP and tag not in _VOID:
            self._skip_depth += 1
        elif tag == "title":
            self._in_title = True
        elif tag in _BLOCK:
            self.parts.append("\n")

    def handle_startendtag(self, tag, attrs):
        if tag in _BLOCK:
            self.parts.append("\n")

    def handle_endtag(self, tag):
        if tag in _SKIP and tag not in _VOID:
            self._skip_depth = max(0, self._skip_depth - 1)
        elif tag == "title":
            self._in_title = False
        elif tag in _BLOCK:
            self.parts.append("\n")

    def handle_data(self, data):
        if self._in_title:
            self.title.append(data)
        elif not self._skip_depth:
            self.parts.append(data)


def html_to_text(html: str) -> str:
    parser = _TextParser()
    parser.feed(html)
    parser.close()
    lines = []
    title = _WS.sub(" ", " ".join(parser.title)).strip()
    if title:
        lines.append(title)
    for line in "".join(parser.parts).split("\n"):
        line = _WS.sub(" ", line).strip()
        if line:
            lines.append(line)
    return "\n".join(lines)


def cap_text(text: str, byte_cap: int) -> str:
    """Cut ``text`` to at most ``byte_cap`` UTF-8 bytes and append a marker if anything was cut."""
    raw = text.encode("utf-8")
    if len(raw) <= byte_cap:
        return text
    return raw[:byte_cap].decode("utf-8", errors="ignore") + TRUNCATION_MARKER


def content_kind(content_type: str | None, body: str) -> str | None:
    """Classify a response as "html", "text" or None (unusable)."""
    if content_type:
        mime = content_type.split(";")[0].strip().lower()
        if mime in ("text/html", "application/xhtml+xml"):
            return "html"
        return "text" if mime.startswith("text/") else None
    head = body.lstrip()[:256].lower()
    return "html" if head.startswith("<!doctype html") or head.startswith("<html") else "text"
