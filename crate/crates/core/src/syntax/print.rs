use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::ast::*;
use super::{MonadOp, Name, Op};
use crate::types::Mult;

// Precedence levels of the concrete grammar.
const TERM: u8 = 0;
const BIND: u8 = 1;
const REL: u8 = 2;
const ADD: u8 = 3;
const MUL: u8 = 4;
const APP: u8 = 5;
const ATOM: u8 = 6;

/// Renders a term in concrete syntax that parses back to an alpha-equivalent
/// term. Generated names (`x#3`) are mapped to fresh identifiers.
pub fn pretty_print(t: &Term) -> String {
    let mut p = Printer::new(t);
    p.term(t, TERM);
    p.out
}

/// Renders a term keeping every name verbatim, generated ones included.
pub fn print_verbatim(t: &Term) -> String {
    let mut p = Printer { out: String::new(), names: BTreeMap::new() };
    p.term(t, TERM);
    p.out
}

pub fn pretty_print_program(prog: &Program) -> String {
    let mut p = Printer::new(&prog.body);
    for d in prog.user_decls() {
        p.data_decl(d);
        p.out.push('\n');
    }
    p.term(&prog.body, TERM);
    p.out
}

struct Printer {
    out: String,
    names: BTreeMap<Name, String>,
}

impl Printer {
    fn new(t: &Term) -> Self {
        let mut all = BTreeSet::new();
        collect_names(t, &mut all);
        let mut taken: BTreeSet<String> = all.iter().filter(|n| !n.contains('#')).map(|n| n.to_string()).collect();
        let mut names = BTreeMap::new();
        for n in all.iter().filter(|n| n.contains('#')) {
            let base = n.as_str().replace('#', "_");
            let mut cand = base.clone();
            let mut k = 0;
            while taken.contains(&cand) {
                k += 1;
                cand = format!("{base}_{k}");
            }
            taken.insert(cand.clone());
            names.insert(n.clone(), cand);
        }
        Printer { out: String::new(), names }
    }

    fn name(&mut self, n: &Name) {
        match self.names.get(n) {
            Some(s) => self.out.push_str(s),
            None => self.out.push_str(n),
        }
    }

    fn data_decl(&mut self, d: &DataDecl) {
        let _ = write!(self.out, "data {}", d.name);
        for p in &d.params {
            let _ = write!(self.out, " #{p}");
        }
        self.out.push_str(" where");
        let result: String = std::iter::once(d.name.to_string()).chain(d.params.iter().map(|p| format!("#{p}"))).collect::<Vec<_>>().join(" ");
        for (i, c) in d.ctors.iter().enumerate() {
            self.out.push_str(if i == 0 { " " } else { " | " });
            let _ = write!(self.out, "{} : ", c.name);
            for (m, t) in &c.fields {
                let arrow = if *m == Mult::One { "-o" } else { "->" };
                let _ = write!(self.out, "{} {arrow} ", ParenType(t));
            }
            self.out.push_str(&result);
        }
        self.out.push_str(" ;");
    }

    fn open(&mut self, wrap: bool) {
        if wrap {
            self.out.push('(');
        }
    }

    fn close(&mut self, wrap: bool) {
        if wrap {
            self.out.push(')');
        }
    }

    fn tyargs(&mut self, args: &[TyArg]) {
        if args.is_empty() {
            return;
        }
        self.out.push_str(" @[");
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            let _ = match a {
                TyArg::Hole => write!(self.out, "_"),
                TyArg::Type(t) => write!(self.out, "{t}"),
                TyArg::Lifetime(l) => write!(self.out, "{l}"),
                TyArg::Mult(m) => write!(self.out, "{m}"),
                TyArg::Kind(k) => write!(self.out, "{k}"),
            };
        }
        self.out.push(']');
    }

    fn mult_suffix(&mut self, m: &Option<Mult>) {
        if let Some(m) = m {
            let _ = write!(self.out, "[{m}]");
        }
    }

    fn args(&mut self, args: &[Term]) {
        for a in args {
            self.out.push(' ');
            self.term(a, ATOM);
        }
    }

    fn term(&mut self, t: &Term, prec: u8) {
        match t {
            Term::At(_, inner) => self.term(inner, prec),
            Term::Var(x) => self.name(x),
            Term::Int(n) if *n < 0 => {
                let _ = write!(self.out, "({n})");
            }
            Term::Int(n) => {
                let _ = write!(self.out, "{n}");
            }
            Term::Let(kind, binds, body) => {
                self.open(prec > TERM);
                self.out.push_str(if *kind == LetKind::Rec { "let " } else { "let1 " });
                for (i, b) in binds.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str("; ");
                    }
                    self.name(&b.name);
                    self.mult_suffix(&b.mult);
                    if let Some(ty) = &b.ty {
                        let _ = write!(self.out, " : {ty}");
                    }
                    self.out.push_str(" = ");
                    self.term(&b.body, TERM);
                }
                self.out.push_str(" in ");
                self.term(body, TERM);
                self.close(prec > TERM);
            }
            Term::Lam(b, body) => {
                self.open(prec > TERM);
                self.out.push('\\');
                match &b.ty {
                    Some(ty) => {
                        self.out.push('(');
                        self.name(&b.name);
                        self.mult_suffix(&b.mult);
                        let _ = write!(self.out, " : {ty})");
                    }
                    None => {
                        self.name(&b.name);
                        self.mult_suffix(&b.mult);
                    }
                }
                self.out.push_str(". ");
                self.term(body, TERM);
                self.close(prec > TERM);
            }
            Term::TyAbs(k, n, body) => {
                self.open(prec > TERM);
                let _ = write!(self.out, "forall {}{n}. ", k.sigil());
                self.term(body, TERM);
                self.close(prec > TERM);
            }
            Term::Seq(x, body) => {
                self.open(prec > TERM);
                self.out.push_str("seq ");
                self.name(x);
                self.out.push_str(" in ");
                self.term(body, TERM);
                self.close(prec > TERM);
            }
            Term::Case(s, branches) => {
                self.open(prec > TERM);
                self.out.push_str("case ");
                self.term(s, TERM);
                self.out.push_str(" of { ");
                for (i, br) in branches.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(" ; ");
                    }
                    self.pattern(br);
                    self.out.push_str(" -> ");
                    self.term(&br.body, TERM);
                }
                self.out.push_str(" }");
                self.close(prec > TERM);
            }
            Term::Mo(MonadOp::Bind, inst, args) if inst.is_empty() => {
                self.open(prec > BIND);
                self.term(&args[0], BIND);
                self.out.push_str(" >>= ");
                self.term(&args[1], REL);
                self.close(prec > BIND);
            }
            Term::Op(Op::Rel(r), _, args) => {
                self.open(prec > REL);
                self.term(&args[0], ADD);
                let _ = write!(self.out, " {} ", r.symbol());
                self.term(&args[1], ADD);
                self.close(prec > REL);
            }
            Term::Op(Op::Int(o), _, args) => {
                let level = if o.symbol() == "*" { MUL } else { ADD };
                self.open(prec > level);
                self.term(&args[0], level);
                let _ = write!(self.out, " {} ", o.symbol());
                self.term(&args[1], level + 1);
                self.close(prec > level);
            }
            Term::Con(c, inst, args) if &**c == UNIT && inst.is_empty() && args.is_empty() => self.out.push_str("()"),
            Term::Con(c, inst, args) if &**c == PAIR && inst.is_empty() && args.len() == 2 => {
                self.out.push('(');
                self.term(&args[0], TERM);
                self.out.push_str(", ");
                self.term(&args[1], TERM);
                self.out.push(')');
            }
            Term::Con(c, inst, args) if inst.is_empty() && args.is_empty() => {
                let _ = write!(self.out, "{c}");
            }
            Term::Con(c, inst, args) => {
                self.open(prec > APP);
                let _ = write!(self.out, "{c}");
                self.tyargs(inst);
                self.args(args);
                self.close(prec > APP);
            }
            Term::Op(op, inst, args) => {
                self.open(prec > APP);
                self.out.push_str(op.keyword());
                self.tyargs(inst);
                self.args(args);
                self.close(prec > APP);
            }
            Term::Mo(op, inst, args) => {
                self.open(prec > APP);
                self.out.push_str(op.keyword());
                self.tyargs(inst);
                self.args(args);
                self.close(prec > APP);
            }
            Term::App(f, a) => {
                self.open(prec > APP);
                // Saturated prefix forms cannot take further arguments.
                let f_prec = if is_prefix_form(f) { ATOM } else { APP };
                self.term(f, f_prec);
                self.out.push(' ');
                self.term(a, ATOM);
                self.close(prec > APP);
            }
            Term::TyApp(inner, inst) => {
                self.open(prec > APP);
                self.term(inner, ATOM);
                if inst.is_empty() {
                    self.out.push_str(" @[]");
                }
                self.tyargs(inst);
                self.close(prec > APP);
            }
            Term::Ann(inner, ty) => {
                self.out.push('(');
                self.term(inner, TERM);
                let _ = write!(self.out, " : {ty})");
            }
        }
    }

    fn pattern(&mut self, br: &Branch) {
        if &*br.ctor == UNIT {
            self.out.push_str("()");
        } else if &*br.ctor == PAIR {
            self.out.push('(');
            self.name(&br.vars[0]);
            self.out.push_str(", ");
            self.name(&br.vars[1]);
            self.out.push(')');
        } else {
            let _ = write!(self.out, "{}", br.ctor);
            for v in &br.vars {
                self.out.push(' ');
                self.name(v);
            }
        }
    }
}

fn is_prefix_form(t: &Term) -> bool {
    match t.peel() {
        Term::Con(c, inst, args) => !inst.is_empty() || (!args.is_empty() && &**c != PAIR),
        Term::Op(op, _, _) => !op.is_infix(),
        Term::Mo(op, inst, _) => *op != MonadOp::Bind || !inst.is_empty(),
        _ => false,
    }
}

struct ParenType<'a>(&'a crate::types::Type);

impl std::fmt::Display for ParenType<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use crate::types::Type;
        match self.0 {
            Type::Fun(..) | Type::Forall(..) => write!(f, "({})", self.0),
            t => write!(f, "{t}"),
        }
    }
}

fn collect_names(t: &Term, out: &mut BTreeSet<Name>) {
    match t {
        Term::Var(x) => {
            out.insert(x.clone());
        }
        Term::Seq(x, body) => {
            out.insert(x.clone());
            collect_names(body, out);
        }
        Term::Let(_, binds, body) => {
            for b in binds {
                out.insert(b.name.clone());
                collect_names(&b.body, out);
            }
            collect_names(body, out);
        }
        Term::Lam(b, body) => {
            out.insert(b.name.clone());
            collect_names(body, out);
        }
        Term::App(f, a) => {
            collect_names(f, out);
            collect_names(a, out);
        }
        Term::Int(_) => {}
        Term::Con(_, _, args) | Term::Op(_, _, args) | Term::Mo(_, _, args) => args.iter().for_each(|a| collect_names(a, out)),
        Term::Case(s, brs) => {
            collect_names(s, out);
            for br in brs {
                out.extend(br.vars.iter().cloned());
                collect_names(&br.body, out);
            }
        }
        Term::TyAbs(_, _, body) | Term::TyApp(body, _) | Term::Ann(body, _) | Term::At(_, body) => collect_names(body, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_equal, parse_program};

    fn round_trip(src: &str) {
        let prog = parse_program(src).unwrap();
        let printed = pretty_print_program(&prog);
        let again = parse_program(&printed).unwrap_or_else(|e| panic!("reparse of `{printed}` failed: {e}"));
        assert!(alpha_equal(&prog.body, &again.body), "{src}\n{printed}");
        assert_eq!(prog.data_decls, again.data_decls);
    }

    #[test]
    fn round_trips() {
        round_trip("42");
        round_trip("(-3) - -3");
        round_trip("1 - (2 - 3)");
        round_trip("(1 + 2) * 3 <= 4");
        round_trip("let f : Int -> Int = \\n. f (n + 1) in f 0");
        round_trip("let1 x[w] = 1; y = 2 in x + y");
        round_trip("\\(x[1] : Int). case (x, ()) of { (a, b) -> seq a in b }");
        round_trip("pure 1 >>= (\\x. pure x) >>= (\\y. pure y)");
        round_trip("(freeRef r) 1");
        round_trip("borrow @[^i, Int] li rf");
        round_trip("forall ^i. \\now. endLifetime @[^i] now");
        round_trip("data List #a where Nil : List #a | Cons : #a -o List #a -o List #a ; Cons 1 Nil");
        round_trip("data W where W : (Int -o Int) -> W ; case W (\\x. x) of { W f -> f 1 }");
        round_trip("((\\x. x) : Int -o Int) @[]");
        round_trip("modifyRef (\\a. a + 4) m");
    }

    #[test]
    fn generated_names_are_printable() {
        let t = Term::lam("x#1", Term::op(Op::Int(crate::syntax::IntOp::Add), vec![Term::var("x#1"), Term::var("x_1")]));
        let s = pretty_print(&t);
        let back = parse_program(&s).unwrap().body;
        assert!(alpha_equal(&t, &back), "{s}");
    }
}
