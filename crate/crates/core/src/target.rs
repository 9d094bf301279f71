//! The unbounded calculus: Damas-Milner style prenex polymorphism over a
//! type language with one unary constructor `T`, unit and binary products.
//! There is no subtyping here at all; the slack that bounded quantification
//! provided on the source side is recovered by matching primitive
//! ascriptions against the types of constants.

use crate::phantom::{arrow, match_one_sided, PhantomType};
use std::collections::BTreeMap;
use std::fmt;

/// The one constructor name the type language of this calculus admits.
pub const TCON: &str = "T";

pub fn t_of(arg: PhantomType) -> PhantomType {
    crate::phantom::con(TCON, arg)
}

/// Checks that a type stays inside this calculus: variables, arrows, unit,
/// products and `T` applications only.
pub fn check_target_type(ty: &PhantomType) -> Result<(), TargetTypeError> {
    match ty {
        PhantomType::Unit | PhantomType::Var(_) => Ok(()),
        PhantomType::Con(c, a) => {
            if c != TCON {
                return Err(TargetTypeError::BadType(format!(
                    "constructor {c} is not available; only {TCON} is"
                )));
            }
            check_target_type(a)
        }
        PhantomType::Product(l, r) | PhantomType::Arrow(l, r) => {
            check_target_type(l)?;
            check_target_type(r)
        }
    }
}

/// Renders a type in the surface syntax of this calculus: prefix `T`,
/// `1` for unit, bare variable names.
pub fn display_target_type(ty: &PhantomType) -> String {
    let mut s = String::new();
    fmt_arrow(ty, &mut s);
    s
}

fn fmt_arrow(t: &PhantomType, out: &mut String) {
    if let PhantomType::Arrow(d, c) = t {
        fmt_prod(d, out);
        out.push_str(" -> ");
        fmt_arrow(c, out);
    } else {
        fmt_prod(t, out);
    }
}

fn fmt_prod(t: &PhantomType, out: &mut String) {
    if let PhantomType::Product(l, r) = t {
        fmt_app(l, out);
        out.push_str(" * ");
        fmt_prod(r, out);
    } else {
        fmt_app(t, out);
    }
}

fn fmt_app(t: &PhantomType, out: &mut String) {
    if let PhantomType::Con(c, a) = t {
        out.push_str(c);
        out.push(' ');
        fmt_atom(a, out);
    } else {
        fmt_atom(t, out);
    }
}

fn fmt_atom(t: &PhantomType, out: &mut String) {
    match t {
        PhantomType::Unit => out.push('1'),
        PhantomType::Var(v) => out.push_str(v),
        _ => {
            out.push('(');
            fmt_arrow(t, out);
            out.push(')');
        }
    }
}

/// An unbounded prenex scheme.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TargetScheme {
    pub vars: Vec<String>,
    pub body: PhantomType,
}

impl fmt::Display for TargetScheme {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        if self.vars.is_empty() {
            return write!(f, "{}", display_target_type(&self.body));
        }
        write!(
            f,
            "forall {}. {}",
            self.vars.join(", "),
            display_target_type(&self.body)
        )
    }
}

/// Alpha-equivalence of schemes, preserving quantifier order: the i-th
/// variable of one maps to the i-th of the other.
pub fn scheme_alpha_eq(a: &TargetScheme, b: &TargetScheme) -> bool {
    if a.vars.len() != b.vars.len() {
        return false;
    }
    let bindings: Vec<(String, PhantomType)> = a
        .vars
        .iter()
        .zip(&b.vars)
        .map(|(x, y)| (x.clone(), PhantomType::Var(y.clone())))
        .collect();
    a.body.substitute(&bindings) == b.body
}

#[derive(Clone, PartialEq, Eq)]
pub enum TargetTerm {
    Const(String),
    Prim(String, Option<(PhantomType, PhantomType)>),
    Var(String),
    Lam(String, PhantomType, Box<TargetTerm>),
    App(Box<TargetTerm>, Box<TargetTerm>),
    TyApp(Box<TargetTerm>, Vec<PhantomType>),
    Let(String, Box<TargetTerm>, Box<TargetTerm>),
    TyLam(Vec<String>, Box<TargetTerm>),
}

/// Drops primitive ascriptions, leaving the bare operation name. Useful
/// for comparing machine output, which always carries ascriptions,
/// against terms written by hand without them.
pub fn strip_prim_ascriptions(term: &TargetTerm) -> TargetTerm {
    match term {
        TargetTerm::Const(_) | TargetTerm::Var(_) => term.clone(),
        TargetTerm::Prim(f, _) => TargetTerm::Prim(f.clone(), None),
        TargetTerm::Lam(x, t, b) => tlam(x.clone(), t.clone(), strip_prim_ascriptions(b)),
        TargetTerm::App(a, b) => tapp(strip_prim_ascriptions(a), strip_prim_ascriptions(b)),
        TargetTerm::TyApp(p, args) => ttyapp(strip_prim_ascriptions(p), args.clone()),
        TargetTerm::Let(x, p, e) => {
            tlet(x.clone(), strip_prim_ascriptions(p), strip_prim_ascriptions(e))
        }
        TargetTerm::TyLam(vars, b) => TargetTerm::TyLam(
            vars.clone(),
            Box::new(strip_prim_ascriptions(b)),
        ),
    }
}

/// Alpha-equivalence of closed terms: bound term variables and bound type
/// variables may be renamed, free names must agree.
pub fn term_alpha_eq(a: &TargetTerm, b: &TargetTerm) -> bool {
    fn ty_eq(a: &PhantomType, b: &PhantomType, tyenv: &[(String, String)]) -> bool {
        match (a, b) {
            (PhantomType::Var(x), PhantomType::Var(y)) => {
                match tyenv.iter().rev().find(|(l, _)| l == x) {
                    Some((_, r)) => r == y,
                    None => x == y,
                }
            }
            (PhantomType::Unit, PhantomType::Unit) => true,
            (PhantomType::Con(c, s), PhantomType::Con(d, t)) => c == d && ty_eq(s, t, tyenv),
            (PhantomType::Product(l1, r1), PhantomType::Product(l2, r2)) => {
                ty_eq(l1, l2, tyenv) && ty_eq(r1, r2, tyenv)
            }
            (PhantomType::Arrow(l1, r1), PhantomType::Arrow(l2, r2)) => {
                ty_eq(l1, l2, tyenv) && ty_eq(r1, r2, tyenv)
            }
            _ => false,
        }
    }
    fn go(
        a: &TargetTerm,
        b: &TargetTerm,
        env: &mut Vec<(String, String)>,
        tyenv: &mut Vec<(String, String)>,
    ) -> bool {
        match (a, b) {
            (TargetTerm::Const(c), TargetTerm::Const(d)) => c == d,
            (TargetTerm::Prim(f, None), TargetTerm::Prim(g, None)) => f == g,
            (TargetTerm::Prim(f, Some((d1, c1))), TargetTerm::Prim(g, Some((d2, c2)))) => {
                f == g && ty_eq(d1, d2, tyenv) && ty_eq(c1, c2, tyenv)
            }
            (TargetTerm::Var(x), TargetTerm::Var(y)) => {
                match env.iter().rev().find(|(l, _)| l == x) {
                    Some((_, r)) => r == y,
                    None => x == y,
                }
            }
            (TargetTerm::Lam(x, t1, b1), TargetTerm::Lam(y, t2, b2)) => {
                if !ty_eq(t1, t2, tyenv) {
                    return false;
                }
                env.push((x.clone(), y.clone()));
                let ok = go(b1, b2, env, tyenv);
                env.pop();
                ok
            }
            (TargetTerm::App(f1, a1), TargetTerm::App(f2, a2)) => {
                go(f1, f2, env, tyenv) && go(a1, a2, env, tyenv)
            }
            (TargetTerm::TyApp(p1, ts1), TargetTerm::TyApp(p2, ts2)) => {
                ts1.len() == ts2.len()
                    && go(p1, p2, env, tyenv)
                    && ts1.iter().zip(ts2).all(|(s, t)| ty_eq(s, t, tyenv))
            }
            (TargetTerm::Let(x, p1, e1), TargetTerm::Let(y, p2, e2)) => {
                if !go(p1, p2, env, tyenv) {
                    return false;
                }
                env.push((x.clone(), y.clone()));
                let ok = go(e1, e2, env, tyenv);
                env.pop();
                ok
            }
            (TargetTerm::TyLam(vs1, b1), TargetTerm::TyLam(vs2, b2)) => {
                if vs1.len() != vs2.len() {
                    return false;
                }
                for (v, w) in vs1.iter().zip(vs2) {
                    tyenv.push((v.clone(), w.clone()));
                }
                let ok = go(b1, b2, env, tyenv);
                for _ in vs1 {
                    tyenv.pop();
                }
                ok
            }
            _ => false,
        }
    }
    go(a, b, &mut Vec::new(), &mut Vec::new())
}

pub fn tconst(name: impl Into<String>) -> TargetTerm {
    TargetTerm::Const(name.into())
}

pub fn tprim(name: impl Into<String>) -> TargetTerm {
    TargetTerm::Prim(name.into(), None)
}

pub fn tvar(name: impl Into<String>) -> TargetTerm {
    TargetTerm::Var(name.into())
}

pub fn tlam(x: impl Into<String>, annot: PhantomType, body: TargetTerm) -> TargetTerm {
    TargetTerm::Lam(x.into(), annot, Box::new(body))
}

pub fn tapp(f: TargetTerm, a: TargetTerm) -> TargetTerm {
    TargetTerm::App(Box::new(f), Box::new(a))
}

pub fn ttyapp(p: TargetTerm, args: Vec<PhantomType>) -> TargetTerm {
    TargetTerm::TyApp(Box::new(p), args)
}

pub fn tlet(x: impl Into<String>, bound: TargetTerm, body: TargetTerm) -> TargetTerm {
    TargetTerm::Let(x.into(), Box::new(bound), Box::new(body))
}

pub fn ttylam(vars: Vec<&str>, body: TargetTerm) -> TargetTerm {
    TargetTerm::TyLam(vars.into_iter().map(String::from).collect(), Box::new(body))
}

impl fmt::Display for TargetTerm {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            TargetTerm::Const(c) => write!(f, "{c}"),
            TargetTerm::Prim(p, None) => write!(f, "{p}"),
            TargetTerm::Prim(p, Some((d, c))) => write!(
                f,
                "(prim {p} : {} -> {})",
                display_target_type(d),
                fmt_arrow_cod(c)
            ),
            TargetTerm::Var(x) => write!(f, "{x}"),
            TargetTerm::Lam(x, t, b) => write!(f, "\\{x}:{}. {b}", display_target_type(t)),
            TargetTerm::App(e1, e2) => {
                fmt_operand(e1, f)?;
                write!(f, " ")?;
                fmt_argument(e2, f)
            }
            TargetTerm::TyApp(p, args) => {
                fmt_argument(p, f)?;
                write!(f, "[")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", display_target_type(a))?;
                }
                write!(f, "]")
            }
            TargetTerm::Let(x, p, e) => write!(f, "let {x} = {p} in {e}"),
            TargetTerm::TyLam(vars, e) => write!(f, "/\\{}. {e}", vars.join(", ")),
        }
    }
}

fn fmt_arrow_cod(c: &PhantomType) -> String {
    // The codomain of an ascription arrow; parenthesise nested arrows so the
    // printed ascription parses back to the same shape.
    match c {
        PhantomType::Arrow(_, _) => format!("({})", display_target_type(c)),
        _ => display_target_type(c),
    }
}

fn fmt_operand(e: &TargetTerm, f: &mut fmt::Formatter) -> fmt::Result {
    match e {
        TargetTerm::App(_, _)
        | TargetTerm::Const(_)
        | TargetTerm::Var(_)
        | TargetTerm::TyApp(_, _)
        | TargetTerm::Prim(_, _) => write!(f, "{e}"),
        _ => write!(f, "({e})"),
    }
}

fn fmt_argument(e: &TargetTerm, f: &mut fmt::Formatter) -> fmt::Result {
    match e {
        TargetTerm::Const(_) | TargetTerm::Var(_) | TargetTerm::Prim(_, None) => write!(f, "{e}"),
        _ => write!(f, "({e})"),
    }
}

impl fmt::Debug for TargetTerm {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TargetTypeError {
    UnboundVariable(String),
    UnboundTypeVariable(String),
    UnknownConstant(String),
    UnknownPrim(String),
    BadType(String),
    TypeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },
    PrimAmbiguous { prim: String, candidates: Vec<String> },
    PrimNotCovered { prim: String, missing: String },
    PrimNeedsAscription(String),
    ArityMismatch { expected: usize, found: usize },
    ShadowedTypeVariable(String),
    PolymorphicUse(String),
}

impl std::error::Error for TargetTypeError {}

impl fmt::Display for TargetTypeError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        use TargetTypeError::*;
        match self {
            UnboundVariable(x) => write!(f, "unbound variable {x}"),
            UnboundTypeVariable(a) => write!(f, "unbound type variable {a}"),
            UnknownConstant(c) => write!(f, "unknown constant {c}"),
            UnknownPrim(p) => write!(f, "unknown primitive {p}"),
            BadType(m) => write!(f, "bad type: {m}"),
            TypeMismatch {
                context,
                expected,
                found,
            } => write!(f, "type mismatch in {context}: expected {expected}, found {found}"),
            PrimAmbiguous { prim, candidates } => write!(
                f,
                "ambiguous use of primitive {prim}: candidate types {}",
                candidates.join(", ")
            ),
            PrimNotCovered { prim, missing } => {
                write!(f, "primitive {prim} is not covered at instance {missing}")
            }
            PrimNeedsAscription(p) => {
                write!(f, "primitive {p} needs an ascription outside application position")
            }
            ArityMismatch { expected, found } => write!(
                f,
                "wrong number of type arguments: expected {expected}, found {found}"
            ),
            ShadowedTypeVariable(a) => write!(f, "type variable {a} shadows an enclosing binder"),
            PolymorphicUse(m) => write!(f, "{m}"),
        }
    }
}

/// The interpretation on this side of the translation: constants carry
/// closed types of the form `T t`, primitives carry closed arrows between
/// such types, and the reduction table is over constant names as before.
#[derive(Clone, Debug, Default)]
pub struct TargetInterpretation {
    constants: BTreeMap<String, PhantomType>,
    prims: BTreeMap<String, Vec<(PhantomType, PhantomType)>>,
    delta: BTreeMap<(String, String), String>,
}

impl TargetInterpretation {
    pub fn new() -> TargetInterpretation {
        TargetInterpretation::default()
    }

    pub fn add_constant(&mut self, name: &str, ty: PhantomType) -> Result<(), TargetTypeError> {
        check_target_type(&ty)?;
        if !ty.is_closed() || !matches!(ty, PhantomType::Con(_, _)) {
            return Err(TargetTypeError::BadType(format!(
                "constant {name} needs a closed type of the form {TCON} t, got {}",
                display_target_type(&ty)
            )));
        }
        self.constants.insert(name.to_string(), ty);
        Ok(())
    }

    pub fn add_prim(
        &mut self,
        name: &str,
        rows: Vec<(PhantomType, PhantomType)>,
    ) -> Result<(), TargetTypeError> {
        let mut resolved: Vec<(PhantomType, PhantomType)> = Vec::new();
        for (d, c) in rows {
            for t in [&d, &c] {
                check_target_type(t)?;
                if !t.is_closed() || !matches!(t, PhantomType::Con(_, _)) {
                    return Err(TargetTypeError::BadType(format!(
                        "primitive {name} rows need closed {TCON}-types, got {}",
                        display_target_type(t)
                    )));
                }
            }
            if !resolved.contains(&(d.clone(), c.clone())) {
                resolved.push((d, c));
            }
        }
        self.prims.insert(name.to_string(), resolved);
        Ok(())
    }

    pub fn add_delta(&mut self, prim: &str, arg: &str, result: &str) -> Result<(), TargetTypeError> {
        if !self.prims.contains_key(prim) {
            return Err(TargetTypeError::UnknownPrim(prim.to_string()));
        }
        for c in [arg, result] {
            if !self.constants.contains_key(c) {
                return Err(TargetTypeError::UnknownConstant(c.to_string()));
            }
        }
        self.delta
            .insert((prim.to_string(), arg.to_string()), result.to_string());
        Ok(())
    }

    pub fn constant_type(&self, name: &str) -> Option<&PhantomType> {
        self.constants.get(name)
    }

    pub fn constants(&self) -> impl Iterator<Item = (&String, &PhantomType)> {
        self.constants.iter()
    }

    pub fn prim_rows(&self, name: &str) -> Option<&[(PhantomType, PhantomType)]> {
        self.prims.get(name).map(|v| v.as_slice())
    }

    pub fn prims(&self) -> impl Iterator<Item = (&String, &Vec<(PhantomType, PhantomType)>)> {
        self.prims.iter()
    }

    pub fn delta(&self, prim: &str, arg: &str) -> Option<&str> {
        self.delta
            .get(&(prim.to_string(), arg.to_string()))
            .map(|s| s.as_str())
    }

    pub fn deltas(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.delta
            .iter()
            .map(|((f, c), r)| (f.as_str(), c.as_str(), r.as_str()))
    }
}

/// Typing of a target term.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TargetTyping {
    Mono(PhantomType),
    Poly(TargetScheme),
}

impl fmt::Display for TargetTyping {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            TargetTyping::Mono(t) => write!(f, "{}", display_target_type(t)),
            TargetTyping::Poly(s) => write!(f, "{s}"),
        }
    }
}

struct CheckerT<'a> {
    interp: &'a TargetInterpretation,
    tyvars: Vec<String>,
    gamma: Vec<(String, TargetTyping)>,
}

/// Typechecks a closed target term, returning the type it synthesises.
pub fn typecheck_t(
    interp: &TargetInterpretation,
    term: &TargetTerm,
) -> Result<TargetTyping, TargetTypeError> {
    let mut checker = CheckerT {
        interp,
        tyvars: Vec::new(),
        gamma: Vec::new(),
    };
    checker.check(term)
}

impl<'a> CheckerT<'a> {
    fn check(&mut self, term: &TargetTerm) -> Result<TargetTyping, TargetTypeError> {
        match term {
            TargetTerm::Const(c) => {
                let ty = self
                    .interp
                    .constant_type(c)
                    .ok_or_else(|| TargetTypeError::UnknownConstant(c.clone()))?;
                Ok(TargetTyping::Mono(ty.clone()))
            }
            TargetTerm::Var(x) => self
                .gamma
                .iter()
                .rev()
                .find(|(name, _)| name == x)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| TargetTypeError::UnboundVariable(x.clone())),
            TargetTerm::Prim(p, Some((dom, cod))) => {
                self.check_prim_ascription(p, dom, cod)?;
                Ok(TargetTyping::Mono(arrow(dom.clone(), cod.clone())))
            }
            TargetTerm::Prim(p, None) => Err(TargetTypeError::PrimNeedsAscription(p.clone())),
            TargetTerm::Lam(x, annot, body) => {
                self.check_type_wf(annot)?;
                self.gamma
                    .push((x.clone(), TargetTyping::Mono(annot.clone())));
                let body_ty = self.check_mono(body);
                self.gamma.pop();
                Ok(TargetTyping::Mono(arrow(annot.clone(), body_ty?)))
            }
            TargetTerm::App(e1, e2) => {
                if let TargetTerm::Prim(p, None) = &**e1 {
                    let arg_ty = self.check_mono(e2)?;
                    let (_, cod) = self.infer_prim(p, &arg_ty)?;
                    return Ok(TargetTyping::Mono(cod));
                }
                let func_ty = self.check_mono(e1)?;
                let (dom, cod) = match func_ty {
                    PhantomType::Arrow(d, c) => (*d, *c),
                    other => {
                        return Err(TargetTypeError::TypeMismatch {
                            context: "application head",
                            expected: "an arrow type".into(),
                            found: display_target_type(&other),
                        })
                    }
                };
                let arg_ty = self.check_mono(e2)?;
                if arg_ty != dom {
                    return Err(TargetTypeError::TypeMismatch {
                        context: "application argument",
                        expected: display_target_type(&dom),
                        found: display_target_type(&arg_ty),
                    });
                }
                Ok(TargetTyping::Mono(cod))
            }
            TargetTerm::TyApp(p, args) => {
                let scheme = match self.check(p)? {
                    TargetTyping::Poly(s) => s,
                    TargetTyping::Mono(t) => {
                        return Err(TargetTypeError::PolymorphicUse(format!(
                            "type application of a monomorphic term of type {}",
                            display_target_type(&t)
                        )))
                    }
                };
                if scheme.vars.len() != args.len() {
                    return Err(TargetTypeError::ArityMismatch {
                        expected: scheme.vars.len(),
                        found: args.len(),
                    });
                }
                for a in args {
                    self.check_type_wf(a)?;
                }
                let bindings: Vec<(String, PhantomType)> = scheme
                    .vars
                    .iter()
                    .cloned()
                    .zip(args.iter().cloned())
                    .collect();
                Ok(TargetTyping::Mono(scheme.body.substitute(&bindings)))
            }
            TargetTerm::Let(x, p, e) => {
                let bound = self.check(p)?;
                self.gamma.push((x.clone(), bound));
                let body = self.check_mono(e);
                self.gamma.pop();
                Ok(TargetTyping::Mono(body?))
            }
            TargetTerm::TyLam(vars, body) => {
                for v in vars {
                    if self.tyvars.contains(v) || vars.iter().filter(|w| *w == v).count() > 1 {
                        return Err(TargetTypeError::ShadowedTypeVariable(v.clone()));
                    }
                }
                let depth = self.tyvars.len();
                self.tyvars.extend(vars.iter().cloned());
                let body_ty = self.check_mono(body);
                self.tyvars.truncate(depth);
                Ok(TargetTyping::Poly(TargetScheme {
                    vars: vars.clone(),
                    body: body_ty?,
                }))
            }
        }
    }

    fn check_mono(&mut self, term: &TargetTerm) -> Result<PhantomType, TargetTypeError> {
        match self.check(term)? {
            TargetTyping::Mono(t) => Ok(t),
            TargetTyping::Poly(s) => Err(TargetTypeError::PolymorphicUse(format!(
                "polymorphic term of type {s} used without type application"
            ))),
        }
    }

    fn check_type_wf(&self, ty: &PhantomType) -> Result<(), TargetTypeError> {
        check_target_type(ty)?;
        for v in ty.fv() {
            if !self.tyvars.contains(&v) {
                return Err(TargetTypeError::UnboundTypeVariable(v));
            }
        }
        Ok(())
    }

    /// The matching side condition on ascriptions: for every constant type
    /// the domain matches, the fully instantiated arrow must be a table row.
    /// Constants whose types do not match the domain can never reach the
    /// primitive, so they impose nothing.
    fn check_prim_ascription(
        &self,
        prim: &str,
        dom: &PhantomType,
        cod: &PhantomType,
    ) -> Result<(), TargetTypeError> {
        let rows = self
            .interp
            .prim_rows(prim)
            .ok_or_else(|| TargetTypeError::UnknownPrim(prim.to_string()))?;
        self.check_type_wf(dom)?;
        self.check_type_wf(cod)?;
        let dom_vars = dom.fv();
        for v in cod.fv() {
            if !dom_vars.contains(&v) {
                return Err(TargetTypeError::PrimNotCovered {
                    prim: prim.to_string(),
                    missing: format!("codomain variable {v} does not occur in the domain"),
                });
            }
        }
        let mut images: Vec<&PhantomType> = Vec::new();
        for (_, ty) in self.interp.constants() {
            if !images.contains(&ty) {
                images.push(ty);
            }
        }
        for image in images {
            if let Some(bindings) = match_one_sided(dom, image) {
                let inst_dom = dom.substitute(&bindings);
                let inst_cod = cod.substitute(&bindings);
                let present = rows
                    .iter()
                    .any(|(d, c)| *d == inst_dom && *c == inst_cod);
                if !present {
                    return Err(TargetTypeError::PrimNotCovered {
                        prim: prim.to_string(),
                        missing: format!(
                            "{} -> {}",
                            display_target_type(&inst_dom),
                            display_target_type(&inst_cod)
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Resolves an unascribed primitive against its argument type. The
    /// diagonal ascription (codomain = the argument type itself) is tried
    /// first, since it is the most general and keeps phantom information
    /// flowing; failing that, exactly one ground table codomain may fit.
    fn infer_prim(
        &self,
        prim: &str,
        arg_ty: &PhantomType,
    ) -> Result<(PhantomType, PhantomType), TargetTypeError> {
        let rows = self
            .interp
            .prim_rows(prim)
            .ok_or_else(|| TargetTypeError::UnknownPrim(prim.to_string()))?;
        if self.check_prim_ascription(prim, arg_ty, arg_ty).is_ok() {
            return Ok((arg_ty.clone(), arg_ty.clone()));
        }
        let mut candidates: Vec<PhantomType> = Vec::new();
        for (_, c) in rows {
            if c != arg_ty && !candidates.contains(c) {
                candidates.push(c.clone());
            }
        }
        let mut fits = Vec::new();
        let mut first_miss = None;
        for cod in candidates {
            match self.check_prim_ascription(prim, arg_ty, &cod) {
                Ok(()) => fits.push(cod),
                Err(TargetTypeError::PrimNotCovered { missing, .. }) => {
                    first_miss.get_or_insert(missing);
                }
                Err(other) => return Err(other),
            }
        }
        match fits.len() {
            1 => Ok((arg_ty.clone(), fits.pop().unwrap())),
            0 => Err(TargetTypeError::PrimNotCovered {
                prim: prim.to_string(),
                missing: first_miss
                    .unwrap_or_else(|| format!("{} -> ?", display_target_type(arg_ty))),
            }),
            _ => Err(TargetTypeError::PrimAmbiguous {
                prim: prim.to_string(),
                candidates: fits
                    .iter()
                    .map(|c| {
                        format!(
                            "{} -> {}",
                            display_target_type(arg_ty),
                            display_target_type(c)
                        )
                    })
                    .collect(),
            }),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum StepOutcomeT {
    Value,
    Step(TargetTerm),
    Stuck,
}

pub fn is_value_t(term: &TargetTerm) -> bool {
    matches!(
        term,
        TargetTerm::Const(_)
            | TargetTerm::Prim(_, _)
            | TargetTerm::Lam(_, _, _)
            | TargetTerm::TyLam(_, _)
    )
}

/// A single small-step reduction. Unlike the source calculus, a let
/// binding is an evaluation context here: its right-hand side runs to a
/// value before being substituted.
pub fn step_t(interp: &TargetInterpretation, term: &TargetTerm) -> StepOutcomeT {
    if is_value_t(term) {
        return StepOutcomeT::Value;
    }
    match term {
        TargetTerm::App(e1, e2) => {
            if !is_value_t(e1) {
                return step_under(interp, e1, |e| tapp(e, (**e2).clone()));
            }
            if !is_value_t(e2) {
                return step_under(interp, e2, |e| tapp((**e1).clone(), e));
            }
            match (&**e1, &**e2) {
                (TargetTerm::Lam(x, _, body), v) => StepOutcomeT::Step(subst_term_t(body, x, v)),
                (TargetTerm::Prim(f, _), TargetTerm::Const(c)) => match interp.delta(f, c) {
                    Some(result) => StepOutcomeT::Step(tconst(result)),
                    None => StepOutcomeT::Stuck,
                },
                _ => StepOutcomeT::Stuck,
            }
        }
        TargetTerm::TyApp(p, args) => match &**p {
            TargetTerm::TyLam(vars, body) => {
                if vars.len() != args.len() {
                    return StepOutcomeT::Stuck;
                }
                let bindings: Vec<(String, PhantomType)> =
                    vars.iter().cloned().zip(args.iter().cloned()).collect();
                StepOutcomeT::Step(subst_types_in_term_t(body, &bindings))
            }
            _ if !is_value_t(p) => step_under(interp, p, |e| ttyapp(e, args.clone())),
            _ => StepOutcomeT::Stuck,
        },
        TargetTerm::Let(x, p, e) => {
            if !is_value_t(p) {
                return step_under(interp, p, |q| tlet(x.clone(), q, (**e).clone()));
            }
            StepOutcomeT::Step(subst_term_t(e, x, p))
        }
        _ => StepOutcomeT::Stuck,
    }
}

fn step_under(
    interp: &TargetInterpretation,
    inner: &TargetTerm,
    rebuild: impl FnOnce(TargetTerm) -> TargetTerm,
) -> StepOutcomeT {
    match step_t(interp, inner) {
        StepOutcomeT::Step(e) => StepOutcomeT::Step(rebuild(e)),
        other => other,
    }
}

pub fn subst_term_t(term: &TargetTerm, x: &str, replacement: &TargetTerm) -> TargetTerm {
    match term {
        TargetTerm::Var(y) if y == x => replacement.clone(),
        TargetTerm::Var(_) | TargetTerm::Const(_) | TargetTerm::Prim(_, _) => term.clone(),
        TargetTerm::Lam(y, t, body) => {
            if y == x {
                term.clone()
            } else {
                tlam(y.clone(), t.clone(), subst_term_t(body, x, replacement))
            }
        }
        TargetTerm::App(e1, e2) => tapp(
            subst_term_t(e1, x, replacement),
            subst_term_t(e2, x, replacement),
        ),
        TargetTerm::TyApp(p, args) => ttyapp(subst_term_t(p, x, replacement), args.clone()),
        TargetTerm::Let(y, p, e) => {
            let p = subst_term_t(p, x, replacement);
            if y == x {
                tlet(y.clone(), p, (**e).clone())
            } else {
                tlet(y.clone(), p, subst_term_t(e, x, replacement))
            }
        }
        TargetTerm::TyLam(vars, body) => TargetTerm::TyLam(
            vars.clone(),
            Box::new(subst_term_t(body, x, replacement)),
        ),
    }
}

pub fn subst_types_in_term_t(
    term: &TargetTerm,
    bindings: &[(String, PhantomType)],
) -> TargetTerm {
    if bindings.is_empty() {
        return term.clone();
    }
    match term {
        TargetTerm::Const(_) | TargetTerm::Var(_) => term.clone(),
        TargetTerm::Prim(p, asc) => TargetTerm::Prim(
            p.clone(),
            asc.as_ref()
                .map(|(d, c)| (d.substitute(bindings), c.substitute(bindings))),
        ),
        TargetTerm::Lam(x, t, body) => tlam(
            x.clone(),
            t.substitute(bindings),
            subst_types_in_term_t(body, bindings),
        ),
        TargetTerm::App(e1, e2) => tapp(
            subst_types_in_term_t(e1, bindings),
            subst_types_in_term_t(e2, bindings),
        ),
        TargetTerm::TyApp(p, args) => ttyapp(
            subst_types_in_term_t(p, bindings),
            args.iter().map(|a| a.substitute(bindings)).collect(),
        ),
        TargetTerm::Let(x, p, e) => tlet(
            x.clone(),
            subst_types_in_term_t(p, bindings),
            subst_types_in_term_t(e, bindings),
        ),
        TargetTerm::TyLam(vars, body) => {
            let inner: Vec<(String, PhantomType)> = bindings
                .iter()
                .filter(|(v, _)| !vars.contains(v))
                .cloned()
                .collect();
            TargetTerm::TyLam(vars.clone(), Box::new(subst_types_in_term_t(body, &inner)))
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum EvalErrorT {
    Stuck(TargetTerm),
    OutOfFuel,
}

impl fmt::Display for EvalErrorT {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            EvalErrorT::Stuck(t) => write!(f, "evaluation stuck at {t}"),
            EvalErrorT::OutOfFuel => write!(f, "evaluation ran out of fuel"),
        }
    }
}

pub fn eval_t(
    interp: &TargetInterpretation,
    term: &TargetTerm,
    fuel: u64,
) -> Result<TargetTerm, EvalErrorT> {
    let mut current = term.clone();
    for _ in 0..fuel {
        match step_t(interp, &current) {
            StepOutcomeT::Value => return Ok(current),
            StepOutcomeT::Step(next) => current = next,
            StepOutcomeT::Stuck => return Err(EvalErrorT::Stuck(current)),
        }
    }
    Err(EvalErrorT::OutOfFuel)
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SoundnessViolationT {
    ConflictingRows {
        prim: String,
        dom: String,
        cod1: String,
        cod2: String,
    },
    MissingDelta { prim: String, constant: String },
    WrongResultType {
        prim: String,
        constant: String,
        result: String,
        expected: String,
        found: String,
    },
}

impl fmt::Display for SoundnessViolationT {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        use SoundnessViolationT::*;
        match self {
            ConflictingRows {
                prim,
                dom,
                cod1,
                cod2,
            } => write!(
                f,
                "primitive {prim} maps domain {dom} to both {cod1} and {cod2}"
            ),
            MissingDelta { prim, constant } => {
                write!(f, "{prim} {constant} is typeable but has no reduction")
            }
            WrongResultType {
                prim,
                constant,
                result,
                expected,
                found,
            } => write!(
                f,
                "{prim} {constant} reduces to {result} of type {found}, expected {expected}"
            ),
        }
    }
}

/// The target-side analogue of the table soundness sweep: whenever `f c`
/// is typeable (the constant's type equals a row domain), the reduction is
/// defined and lands on a constant of the row's codomain type.
pub fn check_pi_f_sound_t(interp: &TargetInterpretation) -> Result<(), SoundnessViolationT> {
    for (prim, rows) in interp.prims() {
        for (i, (d1, c1)) in rows.iter().enumerate() {
            for (d2, c2) in rows.iter().skip(i + 1) {
                if d1 == d2 && c1 != c2 {
                    return Err(SoundnessViolationT::ConflictingRows {
                        prim: prim.clone(),
                        dom: display_target_type(d1),
                        cod1: display_target_type(c1),
                        cod2: display_target_type(c2),
                    });
                }
            }
        }
        for (dom, cod) in rows {
            for (constant, ty) in interp.constants() {
                if ty != dom {
                    continue;
                }
                match interp.delta(prim, constant) {
                    None => {
                        return Err(SoundnessViolationT::MissingDelta {
                            prim: prim.clone(),
                            constant: constant.clone(),
                        })
                    }
                    Some(result) => {
                        let found = interp
                            .constant_type(result)
                            .expect("delta results are known constants");
                        if found != cod {
                            return Err(SoundnessViolationT::WrongResultType {
                                prim: prim.clone(),
                                constant: constant.clone(),
                                result: result.to_string(),
                                expected: display_target_type(cod),
                                found: display_target_type(found),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
