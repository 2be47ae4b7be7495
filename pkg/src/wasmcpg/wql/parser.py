"""Recursive-descent parser. Operator precedence is conventional
(|| < && < comparisons/in < additive < multiplicative < unary < postfix);
assignment binds loosest and yields its value."""

from __future__ import annotations

from ..errors import WqlSyntaxError
from . import ast as A
from .lexer import Token, tokenize


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.type != "EOF":
            self.i += 1
        return t

    def at(self, type_: str, value: str | None = None, k: int = 0) -> bool:
        t = self.peek(k)
        return t.type == type_ and (value is None or t.value == value)

    def expect(self, type_: str, value: str | None = None) -> Token:
        t = self.peek()
        if not self.at(type_, value):
            want = value or type_
            raise WqlSyntaxError(f"expected {want!r}, found {t.value or t.type!r}",
                                 t.line, t.col)
        return self.next()

    # -- statements -----------------------------------------------------------
    def program(self) -> A.Program:
        body = self.statements(top=True)
        self.expect("EOF")
        return A.Program(body=body, line=1)

    def statements(self, top: bool = False) -> list:
        out = []
        while True:
            t = self.peek()
            if t.type == "EOF" or t.type == "DEDENT":
                break
            if t.type == "KEYWORD" and t.value == "else":
                break
            out.append(self.statement())
        return out

    def block(self) -> list:
        if self.at("INDENT"):
            self.next()
            body = self.statements()
            self.expect("DEDENT")
            return body
        # single statement on the same line
        return [self.statement()]

    def statement(self):
        t = self.peek()
        if t.type == "KEYWORD":
            if t.value == "foreach":
                self.next()
                var = self.expect("NAME").value
                self.expect("KEYWORD", "in")
                iterable = self.expression()
                self.expect("OP", ":")
                return A.Foreach(var=var, iterable=iterable, body=self.block(),
                                 line=t.line)
            if t.value == "while":
                self.next()
                cond = self.expression()
                self.expect("OP", ":")
                return A.While(cond=cond, body=self.block(), line=t.line)
            if t.value == "if":
                self.next()
                cond = self.expression()
                self.expect("OP", ":")
                then = self.block()
                orelse: list = []
                if self.at("KEYWORD", "else"):
                    self.next()
                    self.expect("OP", ":")
                    orelse = self.block()
                return A.IfStmt(cond=cond, then=then, orelse=orelse, line=t.line)
            if t.value == "break":
                self.next()
                self.expect("OP", ";")
                return A.Break(line=t.line)
            if t.value == "continue":
                self.next()
                self.expect("OP", ";")
                return A.Continue(line=t.line)
        expr = self.expression()
        self.expect("OP", ";")
        return A.ExprStmt(expr=expr, line=t.line)

    # -- expressions ------------------------------------------------------------
    def expression(self):
        return self.assignment()

    def assignment(self):
        if self.at("NAME") and self.at("OP", ":=", 1):
            name_tok = self.next()
            self.next()
            return A.Assign(name=name_tok.value, expr=self.assignment(),
                            line=name_tok.line)
        return self.or_expr()

    def or_expr(self):
        left = self.and_expr()
        while self.at("OP", "||"):
            t = self.next()
            left = A.BinOp(op="||", left=left, right=self.and_expr(), line=t.line)
        return left

    def and_expr(self):
        left = self.cmp_expr()
        while self.at("OP", "&&"):
            t = self.next()
            left = A.BinOp(op="&&", left=left, right=self.cmp_expr(), line=t.line)
        return left

    _CMP = ("=", "!=", "<", "<=", ">", ">=")

    def cmp_expr(self):
        left = self.add_expr()
        t = self.peek()
        if t.type == "OP" and t.value in self._CMP:
            self.next()
            return A.BinOp(op=t.value, left=left, right=self.add_expr(), line=t.line)
        if t.type == "KEYWORD" and t.value == "in":
            self.next()
            return A.BinOp(op="in", left=left, right=self.add_expr(), line=t.line)
        return left

    def add_expr(self):
        left = self.mul_expr()
        while self.at("OP", "+") or self.at("OP", "-"):
            t = self.next()
            left = A.BinOp(op=t.value, left=left, right=self.mul_expr(), line=t.line)
        return left

    def mul_expr(self):
        left = self.unary()
        while self.at("OP", "*") or self.at("OP", "/"):
            t = self.next()
            left = A.BinOp(op=t.value, left=left, right=self.unary(), line=t.line)
        return left

    def unary(self):
        t = self.peek()
        if self.at("OP", "!") or self.at("OP", "-"):
            self.next()
            return A.UnOp(op=t.value, operand=self.unary(), line=t.line)
        return self.postfix()

    def postfix(self):
        node = self.primary()
        while True:
            if self.at("OP", "."):
                self.next()
                name = self.expect("NAME").value
                if self.at("OP", "("):
                    args = self._args()
                    node = A.MethodCall(obj=node, name=name, args=args,
                                        line=self.peek().line)
                else:
                    node = A.Attr(obj=node, name=name, line=self.peek().line)
            elif self.at("OP", "["):
                t = self.next()
                idx = self.expression()
                self.expect("OP", "]")
                node = A.Index(obj=node, index=idx, line=t.line)
            else:
                return node

    def _args(self) -> list:
        self.expect("OP", "(")
        args = []
        if not self.at("OP", ")"):
            args.append(self.expression())
            while self.at("OP", ","):
                self.next()
                args.append(self.expression())
        self.expect("OP", ")")
        return args

    def primary(self):
        t = self.peek()
        if t.type == "NUMBER":
            self.next()
            value = float(t.value) if "." in t.value else int(t.value)
            return A.Literal(value=value, line=t.line)
        if t.type == "STRING":
            self.next()
            return A.Literal(value=t.value, line=t.line)
        if t.type == "KEYWORD" and t.value in ("nil", "true", "false"):
            self.next()
            value = {"nil": None, "true": True, "false": False}[t.value]
            return A.Literal(value=value, line=t.line)
        if t.type == "NAME":
            if self.at("OP", "(", 1):
                name = self.next().value
                args = self._args()
                return A.CallBuiltin(name=name, args=args, line=t.line)
            self.next()
            return A.Var(name=t.value, line=t.line)
        if t.type == "OP" and t.value == "(":
            self.next()
            inner = self.expression()
            self.expect("OP", ")")
            return inner
        if t.type == "OP" and t.value == "[":
            self.next()
            var = self.expect("NAME").value
            self.expect("KEYWORD", "in")
            source = self.expression()
            self.expect("OP", ":")
            pred = self.expression()
            self.expect("OP", "]")
            return A.RangeExpr(var=var, source=source, pred=pred, line=t.line)
        raise WqlSyntaxError(f"unexpected token {t.value or t.type!r}", t.line, t.col)


def parse_wql(source: str) -> A.Program:
    return _Parser(tokenize(source)).program()
