//! Surface syntax: s-expression parser, program-point labeling and
//! scope/arity validation.
//!
//! Programs are a sequence of `(define (f v1 .. vn) body)` forms followed by a
//! single main expression. `let` is written `(let v <- e1 ; e2)`; comments run
//! from `;;` to the end of the line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::Error;

/// Index of an expression's program point: the point just before its
/// evaluation. Dense pre-order numbering, function bodies first, then main.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProgramPoint(pub usize);

impl fmt::Display for ProgramPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Unlabeled points get this placeholder until `label_program_points` runs.
const UNLABELED: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourcePos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for SourcePos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Const(i64),
    Var(String),
    Nil,
    Cons(Box<Expr>, Box<Expr>),
    Car(Box<Expr>),
    Cdr(Box<Expr>),
    IsPair(Box<Expr>),
    IsNull(Box<Expr>),
    Plus(Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Let(String, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub point: ProgramPoint,
    pub pos: SourcePos,
}

// source positions are bookkeeping for error messages, not part of identity
impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.point == other.point
    }
}

impl Expr {
    fn new(kind: ExprKind, pos: SourcePos) -> Expr {
        Expr {
            kind,
            point: ProgramPoint(UNLABELED),
            pos,
        }
    }

    /// Pre-order walk over this expression and all sub-expressions.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        match &self.kind {
            ExprKind::Const(_) | ExprKind::Var(_) | ExprKind::Nil => {}
            ExprKind::Car(e) | ExprKind::Cdr(e) | ExprKind::IsPair(e) | ExprKind::IsNull(e) => {
                e.walk(visit)
            }
            ExprKind::Cons(a, b) | ExprKind::Plus(a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            ExprKind::If(a, b, c) => {
                a.walk(visit);
                b.walk(visit);
                c.walk(visit);
            }
            ExprKind::Let(_, a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            ExprKind::Call(_, args) => {
                for a in args {
                    a.walk(visit);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub definitions: Vec<FunctionDef>,
    pub main: Expr,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.definitions.iter().find(|d| d.name == name)
    }

    /// Program points of the main expression (as opposed to function bodies).
    pub fn main_points(&self) -> BTreeSet<ProgramPoint> {
        let mut out = BTreeSet::new();
        self.main.walk(&mut |e| {
            out.insert(e.point);
        });
        out
    }

    /// Variables lexically in scope at each program point.
    pub fn scopes(&self) -> BTreeMap<ProgramPoint, Vec<String>> {
        let mut out = BTreeMap::new();
        for def in &self.definitions {
            collect_scopes(&def.body, &def.params.clone(), &mut out);
        }
        collect_scopes(&self.main, &[], &mut out);
        out
    }
}

fn collect_scopes(e: &Expr, in_scope: &[String], out: &mut BTreeMap<ProgramPoint, Vec<String>>) {
    out.insert(e.point, in_scope.to_vec());
    match &e.kind {
        ExprKind::Let(v, e1, e2) => {
            collect_scopes(e1, in_scope, out);
            let mut inner = in_scope.to_vec();
            inner.push(v.clone());
            collect_scopes(e2, &inner, out);
        }
        _ => {
            let mut visit_children = |children: Vec<&Expr>| {
                for c in children {
                    collect_scopes(c, in_scope, out);
                }
            };
            match &e.kind {
                ExprKind::Const(_) | ExprKind::Var(_) | ExprKind::Nil => {}
                ExprKind::Car(a) | ExprKind::Cdr(a) | ExprKind::IsPair(a) | ExprKind::IsNull(a) => {
                    visit_children(vec![a])
                }
                ExprKind::Cons(a, b) | ExprKind::Plus(a, b) => visit_children(vec![a, b]),
                ExprKind::If(a, b, c) => visit_children(vec![a, b, c]),
                ExprKind::Call(_, args) => visit_children(args.iter().collect()),
                ExprKind::Let(..) => unreachable!(),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    LParen,
    RParen,
    Arrow,
    Semi,
    Num(i64),
    Sym(String),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Token,
    pos: SourcePos,
}

fn lex(text: &str) -> Result<Vec<Spanned>, Error> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1usize;
    let mut col = 1usize;
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }
    loop {
        let pos = SourcePos { line, col };
        let c = match chars.peek() {
            None => break,
            Some(c) => *c,
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '(' => {
                bump!();
                out.push(Spanned {
                    tok: Token::LParen,
                    pos,
                });
            }
            ')' => {
                bump!();
                out.push(Spanned {
                    tok: Token::RParen,
                    pos,
                });
            }
            ';' => {
                bump!();
                if chars.peek() == Some(&';') {
                    // comment to end of line
                    while let Some(c) = chars.peek() {
                        if *c == '\n' {
                            break;
                        }
                        bump!();
                    }
                } else {
                    out.push(Spanned {
                        tok: Token::Semi,
                        pos,
                    });
                }
            }
            '<' => {
                bump!();
                if chars.peek() == Some(&'-') {
                    bump!();
                    out.push(Spanned {
                        tok: Token::Arrow,
                        pos,
                    });
                } else {
                    return Err(Error::Syntax {
                        pos,
                        message: "expected '<-'".into(),
                    });
                }
            }
            _ => {
                let mut word = String::new();
                while let Some(c) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | ';') {
                        break;
                    }
                    word.push(*c);
                    bump!();
                }
                let negative_num = word.len() > 1
                    && word.starts_with('-')
                    && word[1..].chars().all(|c| c.is_ascii_digit());
                if word.chars().all(|c| c.is_ascii_digit()) || negative_num {
                    let n = word.parse::<i64>().map_err(|_| Error::Syntax {
                        pos,
                        message: format!("bad integer literal {word:?}"),
                    })?;
                    out.push(Spanned {
                        tok: Token::Num(n),
                        pos,
                    });
                } else {
                    out.push(Spanned {
                        tok: Token::Sym(word),
                        pos,
                    });
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<Spanned>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.at)
    }

    fn pos(&self) -> SourcePos {
        self.peek()
            .map(|s| s.pos)
            .unwrap_or(SourcePos { line: 0, col: 0 })
    }

    fn next(&mut self) -> Result<Spanned, Error> {
        let s = self.toks.get(self.at).cloned().ok_or(Error::Syntax {
            pos: SourcePos { line: 0, col: 0 },
            message: "unexpected end of input".into(),
        })?;
        self.at += 1;
        Ok(s)
    }

    fn expect(&mut self, tok: Token, what: &str) -> Result<SourcePos, Error> {
        let s = self.next()?;
        if s.tok == tok {
            Ok(s.pos)
        } else {
            Err(Error::Syntax {
                pos: s.pos,
                message: format!("expected {what}"),
            })
        }
    }

    fn symbol(&mut self, what: &str) -> Result<(String, SourcePos), Error> {
        let s = self.next()?;
        match s.tok {
            Token::Sym(name) => Ok((name, s.pos)),
            _ => Err(Error::Syntax {
                pos: s.pos,
                message: format!("expected {what}"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, Error> {
        let s = self.next()?;
        let pos = s.pos;
        match s.tok {
            Token::Num(n) => Ok(Expr::new(ExprKind::Const(n), pos)),
            Token::Sym(name) => {
                if name == "Nil" {
                    Ok(Expr::new(ExprKind::Nil, pos))
                } else if is_keyword(&name) {
                    Err(Error::Syntax {
                        pos,
                        message: format!("keyword {name:?} used as a variable"),
                    })
                } else {
                    Ok(Expr::new(ExprKind::Var(name), pos))
                }
            }
            Token::LParen => {
                let (head, hpos) = self.symbol("operator or function name")?;
                let e = self.form(&head, hpos)?;
                self.expect(Token::RParen, "')'")?;
                Ok(Expr::new(e, pos))
            }
            _ => Err(Error::Syntax {
                pos,
                message: "expected expression".into(),
            }),
        }
    }

    fn form(&mut self, head: &str, hpos: SourcePos) -> Result<ExprKind, Error> {
        let unary = |p: &mut Parser| p.expr().map(Box::new);
        match head {
            "cons" => Ok(ExprKind::Cons(unary(self)?, unary(self)?)),
            "car" => Ok(ExprKind::Car(unary(self)?)),
            "cdr" => Ok(ExprKind::Cdr(unary(self)?)),
            "pair?" => Ok(ExprKind::IsPair(unary(self)?)),
            "null?" => Ok(ExprKind::IsNull(unary(self)?)),
            "+" => Ok(ExprKind::Plus(unary(self)?, unary(self)?)),
            "if" => Ok(ExprKind::If(unary(self)?, unary(self)?, unary(self)?)),
            "let" => {
                let (v, vpos) = self.symbol("let-bound variable")?;
                if is_keyword(&v) || v == "Nil" {
                    return Err(Error::Syntax {
                        pos: vpos,
                        message: format!("keyword {v:?} used as a variable"),
                    });
                }
                self.expect(Token::Arrow, "'<-'")?;
                let e1 = unary(self)?;
                self.expect(Token::Semi, "';'")?;
                let e2 = unary(self)?;
                Ok(ExprKind::Let(v, e1, e2))
            }
            "define" => Err(Error::Syntax {
                pos: hpos,
                message: "'define' only allowed at top level".into(),
            }),
            _ => {
                // user function application
                let mut args = Vec::new();
                while !matches!(self.peek().map(|s| &s.tok), Some(Token::RParen) | None) {
                    args.push(self.expr()?);
                }
                Ok(ExprKind::Call(head.to_string(), args))
            }
        }
    }

    fn definition(&mut self) -> Result<FunctionDef, Error> {
        // caller consumed "(define"
        self.expect(Token::LParen, "'(' before function signature")?;
        let (name, npos) = self.symbol("function name")?;
        if is_keyword(&name) || name == "Nil" {
            return Err(Error::Syntax {
                pos: npos,
                message: format!("keyword {name:?} used as a function name"),
            });
        }
        let mut params = Vec::new();
        while !matches!(self.peek().map(|s| &s.tok), Some(Token::RParen)) {
            let (p, ppos) = self.symbol("parameter name")?;
            if is_keyword(&p) || p == "Nil" {
                return Err(Error::Syntax {
                    pos: ppos,
                    message: format!("keyword {p:?} used as a parameter"),
                });
            }
            params.push(p);
        }
        self.expect(Token::RParen, "')'")?;
        let body = self.expr()?;
        self.expect(Token::RParen, "')' closing define")?;
        Ok(FunctionDef { name, params, body })
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(
        s,
        "define" | "if" | "let" | "cons" | "car" | "cdr" | "pair?" | "null?" | "+"
    )
}

/// Parse a whole program: definitions followed by one main expression.
pub fn parse_program(text: &str) -> Result<Program, Error> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0 };
    let mut definitions = Vec::new();
    loop {
        // lookahead for "(define"
        let is_define = matches!(p.peek().map(|s| &s.tok), Some(Token::LParen))
            && matches!(
                p.toks.get(p.at + 1).map(|s| &s.tok),
                Some(Token::Sym(s)) if s == "define"
            );
        if !is_define {
            break;
        }
        p.next()?;
        p.next()?;
        definitions.push(p.definition()?);
    }
    if p.peek().is_none() {
        return Err(Error::Syntax {
            pos: p.pos(),
            message: "missing main expression".into(),
        });
    }
    let main = p.expr()?;
    if let Some(s) = p.peek() {
        return Err(Error::Syntax {
            pos: s.pos,
            message: "trailing input after main expression".into(),
        });
    }
    Ok(Program { definitions, main })
}

// ---------------------------------------------------------------------------
// Labeling
// ---------------------------------------------------------------------------

/// Assign dense pre-order program points: function bodies in definition
/// order, then main. Idempotent.
pub fn label_program_points(mut p: Program) -> Program {
    let mut next = 0usize;
    for def in &mut p.definitions {
        label_expr(&mut def.body, &mut next);
    }
    label_expr(&mut p.main, &mut next);
    p
}

fn label_expr(e: &mut Expr, next: &mut usize) {
    e.point = ProgramPoint(*next);
    *next += 1;
    match &mut e.kind {
        ExprKind::Const(_) | ExprKind::Var(_) | ExprKind::Nil => {}
        ExprKind::Car(a) | ExprKind::Cdr(a) | ExprKind::IsPair(a) | ExprKind::IsNull(a) => {
            label_expr(a, next)
        }
        ExprKind::Cons(a, b) | ExprKind::Plus(a, b) => {
            label_expr(a, next);
            label_expr(b, next);
        }
        ExprKind::If(a, b, c) => {
            label_expr(a, next);
            label_expr(b, next);
            label_expr(c, next);
        }
        ExprKind::Let(_, a, b) => {
            label_expr(a, next);
            label_expr(b, next);
        }
        ExprKind::Call(_, args) => {
            for a in args {
                label_expr(a, next);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Check scoping and arity, and rename shadowed variables so every binding in
/// the program has a globally unique name. Idempotent on valid programs.
pub fn validate(p: &Program) -> Result<Program, Error> {
    let mut arities: BTreeMap<String, usize> = BTreeMap::new();
    for def in &p.definitions {
        if arities.insert(def.name.clone(), def.params.len()).is_some() {
            return Err(Error::Validate(format!(
                "function {:?} defined more than once",
                def.name
            )));
        }
        let mut seen = BTreeSet::new();
        for param in &def.params {
            if !seen.insert(param.clone()) {
                return Err(Error::Validate(format!(
                    "duplicate parameter {:?} in function {:?}",
                    param, def.name
                )));
            }
        }
    }

    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut out = p.clone();
    for def in &mut out.definitions {
        let mut scope: Vec<(String, String)> = Vec::new();
        for param in &mut def.params {
            let fresh = unique_name(param, &mut used);
            scope.push((param.clone(), fresh.clone()));
            *param = fresh;
        }
        rename_expr(&mut def.body, &mut scope, &mut used, &arities)?;
    }
    let mut scope = Vec::new();
    rename_expr(&mut out.main, &mut scope, &mut used, &arities)?;
    Ok(out)
}

fn unique_name(name: &str, used: &mut BTreeSet<String>) -> String {
    if used.insert(name.to_string()) {
        return name.to_string();
    }
    let mut k = 1usize;
    loop {
        let candidate = format!("{name}_{k}");
        if used.insert(candidate.clone()) {
            return candidate;
        }
        k += 1;
    }
}

fn rename_expr(
    e: &mut Expr,
    scope: &mut Vec<(String, String)>,
    used: &mut BTreeSet<String>,
    arities: &BTreeMap<String, usize>,
) -> Result<(), Error> {
    match &mut e.kind {
        ExprKind::Const(_) | ExprKind::Nil => Ok(()),
        ExprKind::Var(v) => {
            if arities.contains_key(v) && !scope.iter().any(|(orig, _)| orig == v) {
                return Err(Error::Validate(format!(
                    "function name {v:?} used as a value at {}",
                    e.pos
                )));
            }
            match scope.iter().rev().find(|(orig, _)| orig == v) {
                Some((_, fresh)) => {
                    *v = fresh.clone();
                    Ok(())
                }
                None => Err(Error::Validate(format!(
                    "unbound variable {v:?} at {}",
                    e.pos
                ))),
            }
        }
        ExprKind::Car(a) | ExprKind::Cdr(a) | ExprKind::IsPair(a) | ExprKind::IsNull(a) => {
            rename_expr(a, scope, used, arities)
        }
        ExprKind::Cons(a, b) | ExprKind::Plus(a, b) => {
            rename_expr(a, scope, used, arities)?;
            rename_expr(b, scope, used, arities)
        }
        ExprKind::If(a, b, c) => {
            rename_expr(a, scope, used, arities)?;
            rename_expr(b, scope, used, arities)?;
            rename_expr(c, scope, used, arities)
        }
        ExprKind::Let(v, a, b) => {
            rename_expr(a, scope, used, arities)?;
            let fresh = unique_name(v, used);
            scope.push((v.clone(), fresh.clone()));
            *v = fresh;
            let r = rename_expr(b, scope, used, arities);
            scope.pop();
            r
        }
        ExprKind::Call(f, args) => {
            match arities.get(f.as_str()) {
                None => {
                    return Err(Error::Validate(format!(
                        "unknown function {f:?} at {}",
                        e.pos
                    )))
                }
                Some(n) if *n != args.len() => {
                    return Err(Error::Validate(format!(
                        "function {f:?} expects {n} argument(s), got {} at {}",
                        args.len(),
                        e.pos
                    )))
                }
                Some(_) => {}
            }
            for a in args {
                rename_expr(a, scope, used, arities)?;
            }
            Ok(())
        }
    }
}

/// Parse, label and validate in one step.
pub fn load_program(text: &str) -> Result<Program, Error> {
    let parsed = parse_program(text)?;
    let labeled = label_program_points(parsed);
    validate(&labeled)
}

// ---------------------------------------------------------------------------
// Pretty printer
// ---------------------------------------------------------------------------

pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    for def in &p.definitions {
        out.push_str(&format!("(define ({}", def.name));
        for param in &def.params {
            out.push_str(&format!(" {param}"));
        }
        out.push_str(") ");
        print_expr(&def.body, &mut out);
        out.push_str(")\n");
    }
    print_expr(&p.main, &mut out);
    out.push('\n');
    out
}

fn print_expr(e: &Expr, out: &mut String) {
    match &e.kind {
        ExprKind::Const(n) => out.push_str(&n.to_string()),
        ExprKind::Var(v) => out.push_str(v),
        ExprKind::Nil => out.push_str("Nil"),
        ExprKind::Cons(a, b) => print_app(out, "cons", &[a, b]),
        ExprKind::Car(a) => print_app(out, "car", &[a]),
        ExprKind::Cdr(a) => print_app(out, "cdr", &[a]),
        ExprKind::IsPair(a) => print_app(out, "pair?", &[a]),
        ExprKind::IsNull(a) => print_app(out, "null?", &[a]),
        ExprKind::Plus(a, b) => print_app(out, "+", &[a, b]),
        ExprKind::If(a, b, c) => print_app(out, "if", &[a, b, c]),
        ExprKind::Let(v, a, b) => {
            out.push_str(&format!("(let {v} <- "));
            print_expr(a, out);
            out.push_str(" ; ");
            print_expr(b, out);
            out.push(')');
        }
        ExprKind::Call(f, args) => {
            out.push('(');
            out.push_str(f);
            for a in args {
                out.push(' ');
                print_expr(a, out);
            }
            out.push(')');
        }
    }
}

fn print_app(out: &mut String, head: &str, args: &[&Expr]) {
    out.push('(');
    out.push_str(head);
    for a in args {
        out.push(' ');
        print_expr(a, out);
    }
    out.push(')');
}

/// The running example: list append followed by a car/cdr chain.
pub const APPEND_PROGRAM: &str = "\
(define (app list1 list2)
  (if (null? list1)
      list2
      (cons (car list1)
            (app (cdr list1) list2))))
(let z <- (cons (cons 4 (cons 5 Nil)) (cons 6 Nil)) ;
(let y <- (cons 3 Nil) ;
(let w <- (app y z) ;
(car (car (cdr w))))))
";
