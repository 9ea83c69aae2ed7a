"""Recursive-descent parser for the assembly-sequence DSL.

Grammar (EBNF):

    sequence   := "sequence" IDENT param_list? "{" item* "}"
    param_list := "(" (IDENT ":" type ("=" literal)?)* ")"
    item       := state | forloop
    forloop    := "for" IDENT "in" INT ".." INT "{" item* "}"
    state      := "state" IDENT ":" action transitions? ";"
    action     := "skill" STRING ("@" INT)? "on" IDENT
                | "cmd" IDENT "." IDENT param_doc?
                | "wait" FLOAT | "noop"
    transitions := ("on" OUTCOME "->" (IDENT | "end_success" | "end_failure"))+

``#`` comments run to end of line. Identifiers may embed ``$var`` before
expansion. ``param_doc`` is a JSON object; outcome labels are uppercase.
All syntax errors carry 1-based line/column and what was expected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..errors import DuplicateStateId, SequenceSyntaxError
from .nodes import (
    CmdAction,
    ForLoop,
    NoopAction,
    SequenceAST,
    SequenceParam,
    SkillAction,
    StateNode,
    WaitAction,
)

KEYWORDS = {"sequence", "state", "for", "in", "skill", "cmd", "wait", "noop",
            "on", "end_success", "end_failure"}

PUNCT = {
    "{": "LBRACE", "}": "RBRACE", "(": "LPAREN", ")": "RPAREN",
    ":": "COLON", ";": "SEMI", ".": "DOT", "@": "AT", "=": "EQUALS",
    ",": "COMMA", "[": "LBRACK", "]": "RBRACK",
}


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT/KEYWORD/STRING/INT/FLOAT/punct kinds/ARROW/DOTDOT/EOF
    value: object
    line: int
    column: int
    start: int
    end: int

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of input"
        return f"{self.kind} {self.value!r}"


def _ident_char(c: str) -> bool:
    return c.isalnum() or c in "_$"


class Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self._peeked: Token | None = None

    def _line_col(self, pos: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, pos) + 1
        last_nl = self.text.rfind("\n", 0, pos)
        return line, pos - last_nl

    def error(self, detail: str, pos: int | None = None):
        line, col = self._line_col(self.pos if pos is None else pos)
        raise SequenceSyntaxError(detail, line, col)

    def peek(self) -> Token:
        if self._peeked is None:
            self._peeked = self._scan()
        return self._peeked

    def next(self) -> Token:
        tok = self.peek()
        self._peeked = None
        self.pos = tok.end
        return tok

    def scan_json(self, at: Token) -> dict:
        """Decode a JSON object starting at the given LBRACE token and move
        the cursor past it."""
        try:
            obj, end = json.JSONDecoder().raw_decode(self.text, at.start)
        except json.JSONDecodeError as exc:
            line, col = self._line_col(at.start)
            raise SequenceSyntaxError(f"bad JSON parameter document: {exc.msg}", line, col) from exc
        if not isinstance(obj, dict):
            line, col = self._line_col(at.start)
            raise SequenceSyntaxError("parameter document must be a JSON object", line, col)
        self.pos = end
        self._peeked = None
        return obj

    def _skip_trivia(self):
        text = self.text
        while self.pos < len(text):
            c = text[self.pos]
            if c in " \t\r\n":
                self.pos += 1
            elif c == "#":
                nl = text.find("\n", self.pos)
                self.pos = len(text) if nl < 0 else nl + 1
            else:
                return

    def _scan(self) -> Token:
        self._skip_trivia()
        start = self.pos
        line, col = self._line_col(start)
        text = self.text
        if start >= len(text):
            return Token("EOF", None, line, col, start, start)
        c = text[start]

        if c == "-" and start + 1 < len(text) and text[start + 1] == ">":
            return Token("ARROW", "->", line, col, start, start + 2)
        if c == "." and start + 1 < len(text) and text[start + 1] == ".":
            return Token("DOTDOT", "..", line, col, start, start + 2)

        if c == '"':
            i = start + 1
            while i < len(text):
                if text[i] == "\\":
                    i += 2
                    continue
                if text[i] == '"':
                    try:
                        value = json.loads(text[start:i + 1])
                    except json.JSONDecodeError:
                        self.error("bad string literal", start)
                    return Token("STRING", value, line, col, start, i + 1)
                if text[i] == "\n":
                    break
                i += 1
            self.error("unterminated string literal", start)

        if c.isdigit() or (c == "-" and start + 1 < len(text) and text[start + 1].isdigit()):
            i = start + 1
            while i < len(text) and text[i].isdigit():
                i += 1
            is_float = False
            # a lone '.' starts a fraction; '..' is the range operator
            if i < len(text) and text[i] == "." and not text[i:i + 2] == "..":
                is_float = True
                i += 1
                while i < len(text) and text[i].isdigit():
                    i += 1
            if i < len(text) and text[i] in "eE":
                j = i + 1
                if j < len(text) and text[j] in "+-":
                    j += 1
                if j < len(text) and text[j].isdigit():
                    is_float = True
                    i = j
                    while i < len(text) and text[i].isdigit():
                        i += 1
            raw = text[start:i]
            if is_float:
                return Token("FLOAT", float(raw), line, col, start, i)
            return Token("INT", int(raw), line, col, start, i)

        if c.isalpha() or c in "_$":
            i = start
            while i < len(text) and _ident_char(text[i]):
                i += 1
            word = text[start:i]
            kind = "KEYWORD" if word in KEYWORDS else "IDENT"
            return Token(kind, word, line, col, start, i)

        if c in PUNCT:
            return Token(PUNCT[c], c, line, col, start, start + 1)

        self.error(f"unexpected character {c!r}", start)


class Parser:
    def __init__(self, text: str):
        self.lex = Lexer(text)

    # -- token helpers ------------------------------------------------------

    def _fail(self, expected: str, tok: Token):
        raise SequenceSyntaxError(f"expected {expected}, got {tok.describe()}", tok.line, tok.column)

    def expect(self, kind: str, expected: str | None = None) -> Token:
        tok = self.lex.next()
        if tok.kind != kind:
            self._fail(expected or kind, tok)
        return tok

    def expect_keyword(self, word: str) -> Token:
        tok = self.lex.next()
        if tok.kind != "KEYWORD" or tok.value != word:
            self._fail(f"keyword {word!r}", tok)
        return tok

    def at_keyword(self, word: str) -> bool:
        tok = self.lex.peek()
        return tok.kind == "KEYWORD" and tok.value == word

    def expect_ident(self, what: str) -> Token:
        tok = self.lex.next()
        if tok.kind != "IDENT":
            self._fail(what, tok)
        return tok

    # -- grammar -------------------------------------------------------------

    def parse(self) -> SequenceAST:
        self.expect_keyword("sequence")
        name = self.expect_ident("sequence name").value
        params = ()
        if self.lex.peek().kind == "LPAREN":
            params = self.parse_params()
        self.expect("LBRACE", "'{'")
        items = self.parse_items()
        self.expect("RBRACE", "'}'")
        tail = self.lex.peek()
        if tail.kind != "EOF":
            self._fail("end of input", tail)
        ast = SequenceAST(str(name), params, items)
        self._check_duplicate_ids(ast)
        return ast

    def parse_params(self) -> tuple:
        self.expect("LPAREN")
        params = []
        while self.lex.peek().kind != "RPAREN":
            name = self.expect_ident("parameter name").value
            self.expect("COLON", "':'")
            type_tok = self.lex.next()
            if type_tok.kind != "IDENT" or type_tok.value not in ("int", "float", "string"):
                self._fail("parameter type (int|float|string)", type_tok)
            default = None
            if self.lex.peek().kind == "EQUALS":
                self.lex.next()
                lit = self.lex.next()
                if lit.kind not in ("INT", "FLOAT", "STRING"):
                    self._fail("literal default", lit)
                default = lit.value
                if type_tok.value == "float" and lit.kind == "INT":
                    default = float(default)
            params.append(SequenceParam(str(name), str(type_tok.value), default))
        self.expect("RPAREN")
        return tuple(params)

    def parse_items(self) -> tuple:
        items = []
        while True:
            if self.at_keyword("state"):
                items.append(self.parse_state())
            elif self.at_keyword("for"):
                items.append(self.parse_for())
            else:
                return tuple(items)

    def parse_for(self) -> ForLoop:
        kw = self.expect_keyword("for")
        var = self.expect_ident("loop variable").value
        self.expect_keyword("in")
        start = self.expect("INT", "integer range start").value
        self.expect("DOTDOT", "'..'")
        end = self.expect("INT", "integer range end").value
        self.expect("LBRACE", "'{'")
        body = self.parse_items()
        self.expect("RBRACE", "'}'")
        return ForLoop(str(var), int(start), int(end), body, kw.line, kw.column)

    def parse_state(self) -> StateNode:
        kw = self.expect_keyword("state")
        state_id = self.expect_ident("state id").value
        self.expect("COLON", "':'")
        action = self.parse_action()
        transitions = self.parse_transitions()
        self.expect("SEMI", "';'")
        return StateNode(str(state_id), action, transitions, kw.line, kw.column)

    def parse_action(self):
        tok = self.lex.next()
        if tok.kind == "KEYWORD" and tok.value == "skill":
            name = self.expect("STRING", "skill name string").value
            version = None
            if self.lex.peek().kind == "AT":
                self.lex.next()
                version = int(self.expect("INT", "version integer").value)
            self.expect_keyword("on")
            robot = self.expect_ident("robot name").value
            return SkillAction(str(name), str(robot), version)
        if tok.kind == "KEYWORD" and tok.value == "cmd":
            module = self.expect_ident("module name").value
            self.expect("DOT", "'.'")
            verb = self.expect_ident("verb").value
            params = {}
            if self.lex.peek().kind == "LBRACE":
                params = self.lex.scan_json(self.lex.peek())
            return CmdAction(str(module), str(verb), params)
        if tok.kind == "KEYWORD" and tok.value == "wait":
            dur = self.lex.next()
            if dur.kind not in ("FLOAT", "INT"):
                self._fail("wait duration", dur)
            return WaitAction(float(dur.value))
        if tok.kind == "KEYWORD" and tok.value == "noop":
            return NoopAction()
        self._fail("action (skill|cmd|wait|noop)", tok)

    def parse_transitions(self) -> tuple:
        transitions = []
        while self.at_keyword("on"):
            self.lex.next()
            outcome = self.lex.next()
            if outcome.kind != "IDENT" or not str(outcome.value).isupper():
                self._fail("outcome label (uppercase)", outcome)
            self.expect("ARROW", "'->'")
            target = self.lex.next()
            if target.kind == "KEYWORD" and target.value in ("end_success", "end_failure"):
                tgt = target.value
            elif target.kind == "IDENT":
                tgt = str(target.value)
            else:
                self._fail("transition target", target)
            transitions.append((str(outcome.value), tgt))
        return tuple(transitions)

    def _check_duplicate_ids(self, ast: SequenceAST):
        seen = set()

        def walk(items):
            for item in items:
                if isinstance(item, ForLoop):
                    walk(item.body)
                else:
                    if item.id in seen:
                        raise DuplicateStateId(f"state id {item.id!r} declared twice (line {item.line})")
                    seen.add(item.id)

        walk(ast.items)


def parse(text: str) -> SequenceAST:
    """Parse DSL source into an AST (loops and placeholders intact)."""
    return Parser(text).parse()
