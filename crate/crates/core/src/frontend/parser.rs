//! Recursive-descent parser for the analyzable C subset.

use crate::expr::{BinOp, UnOp};

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::FrontendError;

const TYPE_WORDS: &[&str] = &[
    "int", "long", "short", "char", "unsigned", "signed", "const", "static", "void", "volatile",
    "register", "extern", "float", "double", "size_t",
];

pub fn parse(expanded: &str) -> Result<Ast, FrontendError> {
    let tokens = tokenize(expanded)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut items = Vec::new();
    while !p.at_end() {
        if let Some(stmt) = p.item()? {
            items.push(stmt);
        }
    }
    Ok(Ast { items })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, offset: usize) -> Option<&TokenKind> {
        self.tokens.get(self.pos + offset).map(|t| &t.kind)
    }

    fn line(&self) -> usize {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map_or(1, |t| t.line)
    }

    fn error(&self, message: impl Into<String>) -> FrontendError {
        let (line, column) = match self.tokens.get(self.pos) {
            Some(t) => (t.line, t.column),
            None => self.tokens.last().map_or((1, 1), |t| (t.line, t.column + 1)),
        };
        let found = match self.tokens.get(self.pos) {
            Some(t) => format!(", found `{}`", t.spelling()),
            None => ", found end of input".to_string(),
        };
        FrontendError::Syntax {
            line,
            column,
            message: format!("{}{found}", message.into()),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(TokenKind::Punct(q)) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(TokenKind::Ident(s)) if s == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), FrontendError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{p}`")))
        }
    }

    fn ident(&mut self) -> Result<String, FrontendError> {
        match self.peek() {
            Some(TokenKind::Ident(s)) if !is_keyword(s) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    fn at_type(&self) -> bool {
        matches!(self.peek(), Some(TokenKind::Ident(s)) if TYPE_WORDS.contains(&s.as_str()))
    }

    /// Consumes a type specifier; returns whether it names a floating type.
    fn type_spec(&mut self) -> bool {
        let mut floating = false;
        while let Some(TokenKind::Ident(s)) = self.peek() {
            if !TYPE_WORDS.contains(&s.as_str()) {
                break;
            }
            floating |= s == "float" || s == "double";
            self.pos += 1;
        }
        floating
    }

    // ---- top level -------------------------------------------------------

    fn item(&mut self) -> Result<Option<Stmt>, FrontendError> {
        if self.at_type() && self.looks_like_function() {
            return self.function();
        }
        self.statement().map(Some)
    }

    fn looks_like_function(&self) -> bool {
        let mut i = self.pos;
        while let Some(Token { kind: TokenKind::Ident(s), .. }) = self.tokens.get(i) {
            if !TYPE_WORDS.contains(&s.as_str()) {
                break;
            }
            i += 1;
        }
        while matches!(self.tokens.get(i).map(|t| &t.kind), Some(TokenKind::Punct("*"))) {
            i += 1;
        }
        matches!(self.tokens.get(i).map(|t| &t.kind), Some(TokenKind::Ident(_)))
            && matches!(self.tokens.get(i + 1).map(|t| &t.kind), Some(TokenKind::Punct("(")))
    }

    fn function(&mut self) -> Result<Option<Stmt>, FrontendError> {
        let line = self.line();
        self.type_spec();
        while self.eat_punct("*") {}
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                if self.is_word("void") && matches!(self.peek_at(1), Some(TokenKind::Punct(")"))) {
                    self.pos += 1;
                    break;
                }
                if self.eat_punct("...") {
                    break;
                }
                if !self.at_type() {
                    return Err(self.error("expected parameter type"));
                }
                self.type_spec();
                let mut pointer = false;
                while self.eat_punct("*") {
                    pointer = true;
                }
                let pname = self.ident()?;
                let mut dims = 0;
                while self.eat_punct("[") {
                    while !self.eat_punct("]") {
                        if self.at_end() {
                            return Err(self.error("expected `]`"));
                        }
                        self.pos += 1;
                    }
                    dims += 1;
                }
                params.push(Param { name: pname, pointer, dims });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        if self.eat_punct(";") {
            // Prototype: nothing to analyze.
            return Ok(None);
        }
        self.expect_punct("{")?;
        let body = self.block_rest()?;
        Ok(Some(Stmt::Function { name, params, body, line }))
    }

    // ---- statements ------------------------------------------------------

    fn block_rest(&mut self) -> Result<Vec<Stmt>, FrontendError> {
        let mut body = Vec::new();
        loop {
            if self.eat_punct("}") {
                return Ok(body);
            }
            if self.at_end() {
                return Err(self.error("expected `}`"));
            }
            body.push(self.statement()?);
        }
    }

    /// Body of a `for`/`if`/`else`. An unbraced body is one statement,
    /// together with any pragma lines in front of it.
    fn body(&mut self) -> Result<Vec<Stmt>, FrontendError> {
        if self.eat_punct("{") {
            return self.block_rest();
        }
        let mut body = Vec::new();
        while let Some(TokenKind::Pragma(_)) = self.peek() {
            body.push(self.statement()?);
        }
        body.push(self.statement()?);
        Ok(body)
    }

    fn statement(&mut self) -> Result<Stmt, FrontendError> {
        let line = self.line();
        let Some(kind) = self.peek().cloned() else {
            return Err(self.error("expected statement"));
        };
        match kind {
            TokenKind::Pragma(text) => {
                self.pos += 1;
                Ok(Stmt::Pragma { text, line })
            }
            TokenKind::Punct("{") => {
                self.pos += 1;
                Ok(Stmt::Block(self.block_rest()?))
            }
            TokenKind::Punct(";") => {
                self.pos += 1;
                Ok(Stmt::Block(Vec::new()))
            }
            TokenKind::Ident(word) => match word.as_str() {
                "for" => self.for_loop(),
                "if" => self.if_chain(),
                "while" => {
                    self.pos += 1;
                    self.expect_punct("(")?;
                    self.expr()?;
                    self.expect_punct(")")?;
                    let children = self.body()?;
                    Ok(Stmt::Unsupported { reason: "while loop".into(), children, line })
                }
                "do" => {
                    self.pos += 1;
                    let children = self.body()?;
                    if !self.is_word("while") {
                        return Err(self.error("expected `while`"));
                    }
                    self.pos += 1;
                    self.expect_punct("(")?;
                    self.expr()?;
                    self.expect_punct(")")?;
                    self.expect_punct(";")?;
                    Ok(Stmt::Unsupported { reason: "do-while loop".into(), children, line })
                }
                "break" | "continue" | "goto" => {
                    self.pos += 1;
                    if word == "goto" {
                        self.ident()?;
                    }
                    self.expect_punct(";")?;
                    Ok(Stmt::Unsupported { reason: format!("`{word}` statement"), children: Vec::new(), line })
                }
                "return" => {
                    self.pos += 1;
                    let value = if self.is_punct(";") { None } else { Some(self.expr()?) };
                    self.expect_punct(";")?;
                    Ok(Stmt::Return { value, line })
                }
                "switch" | "struct" | "union" | "enum" | "typedef" => {
                    Err(self.error(format!("`{word}` is outside the supported subset")))
                }
                _ if self.at_type() => {
                    let stmt = self.declaration()?;
                    self.expect_punct(";")?;
                    Ok(stmt)
                }
                _ => self.simple_statement_terminated(),
            },
            _ => self.simple_statement_terminated(),
        }
    }

    fn simple_statement_terminated(&mut self) -> Result<Stmt, FrontendError> {
        let stmt = self.simple_statement()?;
        self.expect_punct(";")?;
        Ok(stmt)
    }

    fn declaration(&mut self) -> Result<Stmt, FrontendError> {
        let line = self.line();
        let floating = self.type_spec();
        let mut declarators = Vec::new();
        loop {
            let mut pointer = false;
            while self.eat_punct("*") {
                pointer = true;
            }
            let name = self.ident()?;
            let mut dims = Vec::new();
            while self.eat_punct("[") {
                if self.eat_punct("]") {
                    dims.push(None);
                } else {
                    dims.push(Some(self.expr()?));
                    self.expect_punct("]")?;
                }
            }
            let init = if self.eat_punct("=") {
                if self.eat_punct("{") {
                    let mut items = Vec::new();
                    while !self.eat_punct("}") {
                        items.push(self.assignment_expr()?);
                        if !self.eat_punct(",") {
                            self.expect_punct("}")?;
                            break;
                        }
                    }
                    Some(Init::List(items))
                } else {
                    Some(Init::Expr(self.assignment_expr()?))
                }
            } else {
                None
            };
            let init = if floating {
                // Floating variables never carry a usable integer value.
                Some(Init::Expr(CExpr::opaque("floating-point value", Vec::new())))
            } else {
                init
            };
            declarators.push(Declarator { name, pointer, dims, init });
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(Stmt::Decl { declarators, line })
    }

    /// Assignment, increment/decrement or expression statement, without the
    /// terminating `;`.
    fn simple_statement(&mut self) -> Result<Stmt, FrontendError> {
        let line = self.line();
        if self.is_punct("++") || self.is_punct("--") {
            let delta = if self.is_punct("++") { 1 } else { -1 };
            self.pos += 1;
            let operand = self.unary()?;
            let target = self.lvalue(operand)?;
            return Ok(Stmt::IncDec { target, delta, line });
        }
        let lhs = self.unary()?;
        let assign_op = match self.peek() {
            Some(TokenKind::Punct("=")) => Some(AssignOp::Set),
            Some(TokenKind::Punct("+=")) => Some(AssignOp::Add),
            Some(TokenKind::Punct("-=")) => Some(AssignOp::Sub),
            Some(TokenKind::Punct("*=")) => Some(AssignOp::Mul),
            Some(TokenKind::Punct("/=")) => Some(AssignOp::Div),
            Some(TokenKind::Punct("%=")) => Some(AssignOp::Rem),
            Some(TokenKind::Punct("<<=" | ">>=" | "&=" | "|=" | "^=")) => {
                self.pos += 1;
                let target = self.lvalue(lhs)?;
                self.assignment_expr()?;
                let name = match &target {
                    LValue::Var(v) | LValue::Index { array: v, .. } => v.clone(),
                    LValue::Deref(_) => "*".into(),
                };
                return Ok(Stmt::Unsupported {
                    reason: format!("bitwise compound assignment to `{name}`"),
                    children: vec![Stmt::Assign {
                        target,
                        op: AssignOp::Set,
                        value: CExpr::opaque("bitwise result", Vec::new()),
                        line,
                    }],
                    line,
                });
            }
            _ => None,
        };
        if let Some(op) = assign_op {
            self.pos += 1;
            let target = self.lvalue(lhs)?;
            let value = self.assignment_expr()?;
            return Ok(Stmt::Assign { target, op, value, line });
        }
        if self.is_punct("++") || self.is_punct("--") {
            let delta = if self.is_punct("++") { 1 } else { -1 };
            self.pos += 1;
            let target = self.lvalue(lhs)?;
            return Ok(Stmt::IncDec { target, delta, line });
        }
        let expr = self.binary_rest(0, lhs)?;
        let expr = self.ternary_rest(expr)?;
        Ok(Stmt::Expr { expr, line })
    }

    fn lvalue(&self, e: CExpr) -> Result<LValue, FrontendError> {
        match e {
            CExpr::Var(v) => Ok(LValue::Var(v)),
            CExpr::Index { array, indices } => Ok(LValue::Index { array, indices }),
            CExpr::Deref(inner) => Ok(LValue::Deref(*inner)),
            _ => Err(self.error("expression is not assignable")),
        }
    }

    fn for_loop(&mut self) -> Result<Stmt, FrontendError> {
        let line = self.line();
        self.pos += 1;
        self.expect_punct("(")?;
        if self.is_punct(";") {
            return Err(self.error("for-loop without an init clause"));
        }
        let init = if self.at_type() { self.declaration()? } else { self.simple_statement()? };
        self.expect_punct(";")?;
        if self.is_punct(";") {
            return Err(self.error("for-loop without a condition"));
        }
        let cond = self.expr()?;
        self.expect_punct(";")?;
        if self.is_punct(")") {
            return Err(self.error("for-loop without a step clause"));
        }
        let step = self.simple_statement()?;
        self.expect_punct(")")?;
        let body = self.body()?;
        Ok(Stmt::For(ForLoop {
            init: Box::new(init),
            cond,
            step: Box::new(step),
            body,
            line,
        }))
    }

    fn if_chain(&mut self) -> Result<Stmt, FrontendError> {
        let line = self.line();
        let mut arms = Vec::new();
        let mut otherwise = None;
        self.pos += 1;
        loop {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = self.body()?;
            arms.push((cond, body));
            if !self.is_word("else") {
                break;
            }
            self.pos += 1;
            if self.is_word("if") {
                self.pos += 1;
                continue;
            }
            otherwise = Some(self.body()?);
            break;
        }
        Ok(Stmt::If(IfChain { arms, otherwise, line }))
    }

    // ---- expressions -----------------------------------------------------

    fn expr(&mut self) -> Result<CExpr, FrontendError> {
        self.assignment_expr()
    }

    fn assignment_expr(&mut self) -> Result<CExpr, FrontendError> {
        let lhs = self.unary()?;
        let e = self.binary_rest(0, lhs)?;
        self.ternary_rest(e)
    }

    fn ternary_rest(&mut self, cond: CExpr) -> Result<CExpr, FrontendError> {
        if !self.eat_punct("?") {
            return Ok(cond);
        }
        let a = self.assignment_expr()?;
        self.expect_punct(":")?;
        let b = self.assignment_expr()?;
        Ok(CExpr::opaque("conditional expression", vec![cond, a, b]))
    }

    fn peek_binop(&self) -> Option<Result<BinOp, &'static str>> {
        let Some(TokenKind::Punct(p)) = self.peek() else {
            return None;
        };
        Some(Ok(match *p {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            "&" | "|" | "^" | "<<" | ">>" => return Some(Err(p)),
            _ => return None,
        }))
    }

    /// Precedence climbing, starting from an already parsed left operand.
    fn binary_rest(&mut self, min_prec: u8, mut lhs: CExpr) -> Result<CExpr, FrontendError> {
        loop {
            let (op, prec) = match self.peek_binop() {
                Some(Ok(op)) if op.precedence() >= min_prec => (Ok(op), op.precedence()),
                Some(Err(p)) if bitwise_precedence(p) >= min_prec => (Err(p), bitwise_precedence(p)),
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let mut rhs = self.unary()?;
            loop {
                let next_prec = match self.peek_binop() {
                    Some(Ok(next)) => next.precedence(),
                    Some(Err(p)) => bitwise_precedence(p),
                    None => break,
                };
                if next_prec <= prec {
                    break;
                }
                rhs = self.binary_rest(prec + 1, rhs)?;
            }
            lhs = match op {
                Ok(op) => CExpr::binary(op, lhs, rhs),
                Err(p) => CExpr::opaque(format!("`{p}` operator"), vec![lhs, rhs]),
            };
        }
    }

    fn unary(&mut self) -> Result<CExpr, FrontendError> {
        match self.peek() {
            Some(TokenKind::Punct("-")) => {
                self.pos += 1;
                Ok(CExpr::Unary(UnOp::Neg, Box::new(self.unary()?)))
            }
            Some(TokenKind::Punct("+")) => {
                self.pos += 1;
                self.unary()
            }
            Some(TokenKind::Punct("!")) => {
                self.pos += 1;
                Ok(CExpr::Unary(UnOp::Not, Box::new(self.unary()?)))
            }
            Some(TokenKind::Punct("~")) => {
                self.pos += 1;
                let e = self.unary()?;
                Ok(CExpr::opaque("`~` operator", vec![e]))
            }
            Some(TokenKind::Punct("&")) => {
                self.pos += 1;
                Ok(CExpr::AddrOf(Box::new(self.unary()?)))
            }
            Some(TokenKind::Punct("*")) => {
                self.pos += 1;
                Ok(CExpr::Deref(Box::new(self.unary()?)))
            }
            Some(TokenKind::Punct("++" | "--")) => {
                self.pos += 1;
                let e = self.unary()?;
                Ok(CExpr::opaque("increment inside an expression", vec![e]))
            }
            Some(TokenKind::Ident(s)) if s == "sizeof" => {
                self.pos += 1;
                if self.eat_punct("(") {
                    let mut depth = 1;
                    while depth > 0 {
                        match self.peek() {
                            None => return Err(self.error("expected `)`")),
                            Some(TokenKind::Punct("(")) => depth += 1,
                            Some(TokenKind::Punct(")")) => depth -= 1,
                            _ => {}
                        }
                        self.pos += 1;
                    }
                } else {
                    self.unary()?;
                }
                Ok(CExpr::opaque("sizeof", Vec::new()))
            }
            Some(TokenKind::Punct("(")) if self.cast_ahead() => {
                self.pos += 1;
                self.type_spec();
                while self.eat_punct("*") {}
                self.expect_punct(")")?;
                let e = self.unary()?;
                Ok(CExpr::opaque("cast", vec![e]))
            }
            _ => self.postfix(),
        }
    }

    fn cast_ahead(&self) -> bool {
        matches!(self.peek_at(1), Some(TokenKind::Ident(s)) if TYPE_WORDS.contains(&s.as_str()))
    }

    fn postfix(&mut self) -> Result<CExpr, FrontendError> {
        let mut e = self.primary()?;
        loop {
            if self.is_punct("[") {
                let CExpr::Var(name) = &e else {
                    self.pos += 1;
                    let idx = self.expr()?;
                    self.expect_punct("]")?;
                    e = CExpr::opaque("subscript of a non-array expression", vec![e, idx]);
                    continue;
                };
                let array = name.clone();
                let mut indices = Vec::new();
                while self.eat_punct("[") {
                    indices.push(self.expr()?);
                    self.expect_punct("]")?;
                }
                e = CExpr::Index { array, indices };
            } else if self.is_punct("(") {
                let CExpr::Var(name) = &e else {
                    return Err(self.error("call through an expression"));
                };
                let name = name.clone();
                self.pos += 1;
                let mut args = Vec::new();
                if !self.eat_punct(")") {
                    loop {
                        args.push(self.assignment_expr()?);
                        if self.eat_punct(")") {
                            break;
                        }
                        self.expect_punct(",")?;
                    }
                }
                e = CExpr::Call { name, args };
            } else if self.is_punct(".") || self.is_punct("->") {
                self.pos += 1;
                let field = self.ident()?;
                e = CExpr::opaque(format!("member access `.{field}`"), vec![e]);
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<CExpr, FrontendError> {
        let Some(kind) = self.peek().cloned() else {
            return Err(self.error("expected expression"));
        };
        self.pos += 1;
        match kind {
            TokenKind::Int(n) => Ok(CExpr::Int(n)),
            TokenKind::Char(c) => Ok(CExpr::Int(c)),
            TokenKind::Float(f) => Ok(CExpr::opaque(format!("floating literal {f}"), Vec::new())),
            TokenKind::Str(_) => Ok(CExpr::opaque("string literal", Vec::new())),
            TokenKind::Ident(s) if !is_keyword(&s) => Ok(CExpr::Var(s)),
            TokenKind::Punct("(") => {
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => {
                self.pos -= 1;
                Err(self.error("expected expression"))
            }
        }
    }
}

fn bitwise_precedence(p: &str) -> u8 {
    // Only used to keep the parse tree shaped like C; values are opaque.
    match p {
        "<<" | ">>" => 5,
        _ => 3,
    }
}

fn is_keyword(s: &str) -> bool {
    TYPE_WORDS.contains(&s)
        || matches!(
            s,
            "for" | "if" | "else" | "while" | "do" | "return" | "break" | "continue" | "goto"
                | "switch" | "case" | "default" | "struct" | "union" | "enum" | "typedef" | "sizeof"
        )
}
