//! The bounded calculus: simply typed terms over base sorts from a
//! hierarchy, plus prenex polymorphism where every quantified variable
//! carries a closed upper bound.
//!
//! Subtyping is deliberately shallow. Base types are ordered by the
//! hierarchy, arrows are covariant in the result only, and there is no
//! subsumption rule: the only place subtyping is consulted is type
//! application, which must witness that each argument is below its bound.
//! Primitive operations are typed against a finite interpretation table,
//! so a polymorphic use is admitted only when every closed instantiation
//! of its ascription is present in the table.

use crate::hierarchy::{Hierarchy, Sort};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, PartialEq, Eq)]
pub enum SourceType {
    Base(Sort),
    Var(String),
    Arrow(Box<SourceType>, Box<SourceType>),
}

pub fn base(name: impl Into<String>) -> SourceType {
    SourceType::Base(Sort::new(name))
}

pub fn tvar(name: impl Into<String>) -> SourceType {
    SourceType::Var(name.into())
}

pub fn sarrow(dom: SourceType, cod: SourceType) -> SourceType {
    SourceType::Arrow(Box::new(dom), Box::new(cod))
}

impl SourceType {
    pub fn fv(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.fv_into(&mut out);
        out
    }

    fn fv_into(&self, out: &mut Vec<String>) {
        match self {
            SourceType::Base(_) => {}
            SourceType::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            SourceType::Arrow(d, c) => {
                d.fv_into(out);
                c.fv_into(out);
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.fv().is_empty()
    }

    pub fn substitute(&self, bindings: &[(String, SourceType)]) -> SourceType {
        match self {
            SourceType::Base(_) => self.clone(),
            SourceType::Var(v) => bindings
                .iter()
                .find(|(name, _)| name == v)
                .map(|(_, t)| t.clone())
                .unwrap_or_else(|| self.clone()),
            SourceType::Arrow(d, c) => sarrow(d.substitute(bindings), c.substitute(bindings)),
        }
    }
}

impl fmt::Display for SourceType {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            SourceType::Base(s) => write!(f, "{s}"),
            SourceType::Var(v) => write!(f, "{v}"),
            SourceType::Arrow(d, c) => {
                match **d {
                    SourceType::Arrow(_, _) => write!(f, "({d}) -> {c}"),
                    _ => write!(f, "{d} -> {c}"),
                }
            }
        }
    }
}

impl fmt::Debug for SourceType {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A prenex scheme: every bound is closed, so bounds never mention each
/// other or the quantified variables.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SourceScheme {
    pub bounds: Vec<(String, SourceType)>,
    pub body: SourceType,
}

impl fmt::Display for SourceScheme {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        if self.bounds.is_empty() {
            return write!(f, "{}", self.body);
        }
        write!(f, "forall ")?;
        for (i, (v, b)) in self.bounds.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}<:{b}")?;
        }
        write!(f, ". {}", self.body)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub enum SourceTerm {
    Const(String),
    /// A primitive operation, optionally ascribed with the arrow type it is
    /// used at. Without an ascription it is typeable only in application
    /// position, and only when a unique ascription fits.
    Prim(String, Option<(SourceType, SourceType)>),
    Var(String),
    Lam(String, SourceType, Box<SourceTerm>),
    App(Box<SourceTerm>, Box<SourceTerm>),
    TyApp(Box<SourceTerm>, Vec<SourceType>),
    Let(String, Box<SourceTerm>, Box<SourceTerm>),
    TyLam(Vec<(String, SourceType)>, Box<SourceTerm>),
}

pub fn sconst(name: impl Into<String>) -> SourceTerm {
    SourceTerm::Const(name.into())
}

pub fn sprim(name: impl Into<String>) -> SourceTerm {
    SourceTerm::Prim(name.into(), None)
}

pub fn svar(name: impl Into<String>) -> SourceTerm {
    SourceTerm::Var(name.into())
}

pub fn slam(x: impl Into<String>, annot: SourceType, body: SourceTerm) -> SourceTerm {
    SourceTerm::Lam(x.into(), annot, Box::new(body))
}

pub fn sapp(f: SourceTerm, a: SourceTerm) -> SourceTerm {
    SourceTerm::App(Box::new(f), Box::new(a))
}

pub fn styapp(p: SourceTerm, args: Vec<SourceType>) -> SourceTerm {
    SourceTerm::TyApp(Box::new(p), args)
}

pub fn slet(x: impl Into<String>, bound: SourceTerm, body: SourceTerm) -> SourceTerm {
    SourceTerm::Let(x.into(), Box::new(bound), Box::new(body))
}

pub fn stylam(bounds: Vec<(&str, SourceType)>, body: SourceTerm) -> SourceTerm {
    SourceTerm::TyLam(
        bounds.into_iter().map(|(v, b)| (v.to_string(), b)).collect(),
        Box::new(body),
    )
}

impl fmt::Display for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            SourceTerm::Const(c) => write!(f, "{c}"),
            SourceTerm::Prim(p, None) => write!(f, "{p}"),
            SourceTerm::Prim(p, Some((d, c))) => write!(f, "(prim {p} : {d} -> {c})"),
            SourceTerm::Var(x) => write!(f, "{x}"),
            SourceTerm::Lam(x, t, b) => write!(f, "\\{x}:{t}. {b}"),
            SourceTerm::App(e1, e2) => {
                fmt_app_operand(e1, f)?;
                write!(f, " ")?;
                fmt_app_argument(e2, f)
            }
            SourceTerm::TyApp(p, args) => {
                fmt_app_argument(p, f)?;
                write!(f, "[")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, "]")
            }
            SourceTerm::Let(x, p, e) => write!(f, "let {x} = {p} in {e}"),
            SourceTerm::TyLam(bounds, e) => {
                write!(f, "/\\")?;
                for (i, (v, b)) in bounds.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}<:{b}")?;
                }
                write!(f, ". {e}")
            }
        }
    }
}

fn fmt_app_operand(e: &SourceTerm, f: &mut fmt::Formatter) -> fmt::Result {
    match e {
        SourceTerm::App(_, _)
        | SourceTerm::Const(_)
        | SourceTerm::Var(_)
        | SourceTerm::TyApp(_, _)
        | SourceTerm::Prim(_, _) => write!(f, "{e}"),
        _ => write!(f, "({e})"),
    }
}

fn fmt_app_argument(e: &SourceTerm, f: &mut fmt::Formatter) -> fmt::Result {
    match e {
        SourceTerm::Const(_) | SourceTerm::Var(_) | SourceTerm::Prim(_, None) => write!(f, "{e}"),
        _ => write!(f, "({e})"),
    }
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// The finite interpretation a program runs against: a hierarchy, a sort
/// for every constant, a set of base arrows for every primitive, and the
/// reduction table for primitives applied to constants.
#[derive(Clone, Debug)]
pub struct Interpretation {
    pub hierarchy: Hierarchy,
    constants: BTreeMap<String, Sort>,
    prims: BTreeMap<String, Vec<(Sort, Sort)>>,
    delta: BTreeMap<(String, String), String>,
}

impl Interpretation {
    pub fn new(hierarchy: Hierarchy) -> Interpretation {
        Interpretation {
            hierarchy,
            constants: BTreeMap::new(),
            prims: BTreeMap::new(),
            delta: BTreeMap::new(),
        }
    }

    pub fn add_constant(&mut self, name: &str, sort: &str) -> Result<(), TypeError> {
        let sort = Sort::new(sort);
        if !self.hierarchy.contains(&sort) {
            return Err(TypeError::UnknownSort(sort.0));
        }
        self.constants.insert(name.to_string(), sort);
        Ok(())
    }

    pub fn add_prim(&mut self, name: &str, rows: &[(&str, &str)]) -> Result<(), TypeError> {
        let mut resolved = Vec::new();
        for (d, c) in rows {
            let d = Sort::new(*d);
            let c = Sort::new(*c);
            for s in [&d, &c] {
                if !self.hierarchy.contains(s) {
                    return Err(TypeError::UnknownSort(s.0.clone()));
                }
            }
            if !resolved.contains(&(d.clone(), c.clone())) {
                resolved.push((d, c));
            }
        }
        self.prims.insert(name.to_string(), resolved);
        Ok(())
    }

    pub fn add_delta(&mut self, prim: &str, arg: &str, result: &str) -> Result<(), TypeError> {
        if !self.prims.contains_key(prim) {
            return Err(TypeError::UnknownPrim(prim.to_string()));
        }
        for c in [arg, result] {
            if !self.constants.contains_key(c) {
                return Err(TypeError::UnknownConstant(c.to_string()));
            }
        }
        self.delta
            .insert((prim.to_string(), arg.to_string()), result.to_string());
        Ok(())
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn constant_sort(&self, name: &str) -> Option<&Sort> {
        self.constants.get(name)
    }

    pub fn constants(&self) -> impl Iterator<Item = (&String, &Sort)> {
        self.constants.iter()
    }

    pub fn prim_rows(&self, name: &str) -> Option<&[(Sort, Sort)]> {
        self.prims.get(name).map(|v| v.as_slice())
    }

    pub fn prims(&self) -> impl Iterator<Item = (&String, &Vec<(Sort, Sort)>)> {
        self.prims.iter()
    }

    pub fn delta(&self, prim: &str, arg: &str) -> Option<&str> {
        self.delta
            .get(&(prim.to_string(), arg.to_string()))
            .map(|s| s.as_str())
    }

    pub fn delta_rows(&self) -> impl Iterator<Item = (&(String, String), &String)> {
        self.delta.iter()
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TypeError {
    UnboundVariable(String),
    UnboundTypeVariable(String),
    UnknownSort(String),
    UnknownConstant(String),
    UnknownPrim(String),
    TypeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },
    /// More than one ascription fits an unascribed primitive use.
    PrimAmbiguous { prim: String, candidates: Vec<String> },
    /// Some closed instantiation of the ascription is missing from the
    /// primitive's interpretation table.
    PrimNotCovered { prim: String, missing: String },
    PrimNeedsAscription(String),
    BoundViolation {
        var: String,
        bound: String,
        arg: String,
    },
    ArityMismatch { expected: usize, found: usize },
    ShadowedTypeVariable(String),
    /// The bound of a quantifier mentions a type variable.
    OpenBound(String, String),
    /// A polymorphic term showed up where a monomorphic one is required,
    /// or vice versa.
    PolymorphicUse(String),
}

impl std::error::Error for TypeError {}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        use TypeError::*;
        match self {
            UnboundVariable(x) => write!(f, "unbound variable {x}"),
            UnboundTypeVariable(a) => write!(f, "unbound type variable {a}"),
            UnknownSort(s) => write!(f, "unknown sort {s}"),
            UnknownConstant(c) => write!(f, "unknown constant {c}"),
            UnknownPrim(p) => write!(f, "unknown primitive {p}"),
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
            PrimNotCovered { prim, missing } => write!(
                f,
                "primitive {prim} is not covered at instance {missing}"
            ),
            PrimNeedsAscription(p) => {
                write!(f, "primitive {p} needs an ascription outside application position")
            }
            BoundViolation { var, bound, arg } => write!(
                f,
                "type argument {arg} for {var} is not a subtype of its bound {bound}"
            ),
            ArityMismatch { expected, found } => write!(
                f,
                "wrong number of type arguments: expected {expected}, found {found}"
            ),
            ShadowedTypeVariable(a) => write!(f, "type variable {a} shadows an enclosing binder"),
            OpenBound(a, b) => write!(f, "bound {b} of {a} must be closed"),
            PolymorphicUse(m) => write!(f, "{m}"),
        }
    }
}

/// Subtyping: reflexivity, base sorts by the hierarchy, a variable below
/// its bound, and arrows covariant in the result with syntactically equal
/// domains. Transitivity is admissible in this algorithmic form.
pub fn subtype(
    h: &Hierarchy,
    delta_env: &[(String, SourceType)],
    a: &SourceType,
    b: &SourceType,
) -> bool {
    if a == b {
        return true;
    }
    match (a, b) {
        (SourceType::Base(s1), SourceType::Base(s2)) => h.leq(s1, s2).unwrap_or(false),
        (SourceType::Var(v), _) => delta_env
            .iter()
            .rev()
            .find(|(name, _)| name == v)
            .map(|(_, bound)| subtype(h, delta_env, bound, b))
            .unwrap_or(false),
        (SourceType::Arrow(d1, c1), SourceType::Arrow(d2, c2)) => {
            d1 == d2 && subtype(h, delta_env, c1, c2)
        }
        _ => false,
    }
}

/// Typing of a term, or of a polymorphic binding.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Typing {
    Mono(SourceType),
    Poly(SourceScheme),
}

impl fmt::Display for Typing {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            Typing::Mono(t) => write!(f, "{t}"),
            Typing::Poly(s) => write!(f, "{s}"),
        }
    }
}

/// A typing derivation, one node per term node. Each constructor carries
/// exactly the extra information the typing rule established for it, which
/// is what the translation walks.
#[derive(Clone, Debug)]
pub enum TypedTerm {
    Const {
        name: String,
        sort: Sort,
    },
    Prim {
        name: String,
        dom: SourceType,
        cod: SourceType,
    },
    Var {
        name: String,
        ty: SourceType,
    },
    PolyVar {
        name: String,
        scheme: SourceScheme,
    },
    Lam {
        param: String,
        annot: SourceType,
        body: Box<TypedTerm>,
    },
    App {
        func: Box<TypedTerm>,
        arg: Box<TypedTerm>,
    },
    TyApp {
        target: Box<TypedTerm>,
        args: Vec<SourceType>,
    },
    Let {
        name: String,
        bound: Box<TypedTerm>,
        body: Box<TypedTerm>,
    },
    TyLam {
        bounds: Vec<(String, SourceType)>,
        body: Box<TypedTerm>,
    },
}

impl TypedTerm {
    /// The typing this derivation node establishes.
    pub fn typing(&self) -> Typing {
        match self {
            TypedTerm::Const { sort, .. } => Typing::Mono(SourceType::Base(sort.clone())),
            TypedTerm::Prim { dom, cod, .. } => {
                Typing::Mono(sarrow(dom.clone(), cod.clone()))
            }
            TypedTerm::Var { ty, .. } => Typing::Mono(ty.clone()),
            TypedTerm::PolyVar { scheme, .. } => Typing::Poly(scheme.clone()),
            TypedTerm::Lam { annot, body, .. } => match body.typing() {
                Typing::Mono(t) => Typing::Mono(sarrow(annot.clone(), t)),
                Typing::Poly(_) => unreachable!("lambda bodies are monomorphic"),
            },
            TypedTerm::App { func, .. } => match func.typing() {
                Typing::Mono(SourceType::Arrow(_, cod)) => Typing::Mono(*cod),
                _ => unreachable!("application head is an arrow"),
            },
            TypedTerm::TyApp { target, args } => match target.typing() {
                Typing::Poly(scheme) => {
                    let bindings: Vec<(String, SourceType)> = scheme
                        .bounds
                        .iter()
                        .map(|(v, _)| v.clone())
                        .zip(args.iter().cloned())
                        .collect();
                    Typing::Mono(scheme.body.substitute(&bindings))
                }
                Typing::Mono(_) => unreachable!("type application target is polymorphic"),
            },
            TypedTerm::Let { body, .. } => body.typing(),
            TypedTerm::TyLam { bounds, body } => match body.typing() {
                Typing::Mono(t) => Typing::Poly(SourceScheme {
                    bounds: bounds.clone(),
                    body: t,
                }),
                Typing::Poly(_) => unreachable!("type abstraction bodies are monomorphic"),
            },
        }
    }

    pub fn mono_type(&self) -> Option<SourceType> {
        match self.typing() {
            Typing::Mono(t) => Some(t),
            Typing::Poly(_) => None,
        }
    }

    /// Reassembles the underlying term, with every primitive carrying the
    /// ascription its typing established.
    pub fn term(&self) -> SourceTerm {
        match self {
            TypedTerm::Const { name, .. } => sconst(name.clone()),
            TypedTerm::Prim { name, dom, cod } => {
                SourceTerm::Prim(name.clone(), Some((dom.clone(), cod.clone())))
            }
            TypedTerm::Var { name, .. } | TypedTerm::PolyVar { name, .. } => svar(name.clone()),
            TypedTerm::Lam { param, annot, body } => {
                slam(param.clone(), annot.clone(), body.term())
            }
            TypedTerm::App { func, arg } => sapp(func.term(), arg.term()),
            TypedTerm::TyApp { target, args } => styapp(target.term(), args.clone()),
            TypedTerm::Let { name, bound, body } => {
                slet(name.clone(), bound.term(), body.term())
            }
            TypedTerm::TyLam { bounds, body } => {
                SourceTerm::TyLam(bounds.clone(), Box::new(body.term()))
            }
        }
    }
}

struct Checker<'a> {
    interp: &'a Interpretation,
    delta_env: Vec<(String, SourceType)>,
    gamma: Vec<(String, Typing)>,
}

/// Typechecks a term in the empty context, returning its derivation.
pub fn typecheck(interp: &Interpretation, term: &SourceTerm) -> Result<TypedTerm, TypeError> {
    let mut checker = Checker {
        interp,
        delta_env: Vec::new(),
        gamma: Vec::new(),
    };
    checker.check(term)
}

impl<'a> Checker<'a> {
    fn check(&mut self, term: &SourceTerm) -> Result<TypedTerm, TypeError> {
        match term {
            SourceTerm::Const(c) => {
                let sort = self
                    .interp
                    .constant_sort(c)
                    .ok_or_else(|| TypeError::UnknownConstant(c.clone()))?;
                Ok(TypedTerm::Const {
                    name: c.clone(),
                    sort: sort.clone(),
                })
            }
            SourceTerm::Var(x) => {
                let typing = self
                    .gamma
                    .iter()
                    .rev()
                    .find(|(name, _)| name == x)
                    .map(|(_, t)| t.clone())
                    .ok_or_else(|| TypeError::UnboundVariable(x.clone()))?;
                Ok(match typing {
                    Typing::Mono(ty) => TypedTerm::Var {
                        name: x.clone(),
                        ty,
                    },
                    Typing::Poly(scheme) => TypedTerm::PolyVar {
                        name: x.clone(),
                        scheme,
                    },
                })
            }
            SourceTerm::Prim(p, Some((dom, cod))) => {
                self.check_prim_ascription(p, dom, cod)?;
                Ok(TypedTerm::Prim {
                    name: p.clone(),
                    dom: dom.clone(),
                    cod: cod.clone(),
                })
            }
            SourceTerm::Prim(p, None) => Err(TypeError::PrimNeedsAscription(p.clone())),
            SourceTerm::Lam(x, annot, body) => {
                self.check_type_wf(annot)?;
                self.gamma.push((x.clone(), Typing::Mono(annot.clone())));
                let body = self.check_mono(body);
                self.gamma.pop();
                Ok(TypedTerm::Lam {
                    param: x.clone(),
                    annot: annot.clone(),
                    body: Box::new(body?),
                })
            }
            SourceTerm::App(e1, e2) => {
                // An unascribed primitive is resolved from the argument type.
                if let SourceTerm::Prim(p, None) = &**e1 {
                    let arg = self.check_mono(e2)?;
                    let arg_ty = arg.mono_type().unwrap();
                    let (dom, cod) = self.infer_prim(p, &arg_ty)?;
                    return Ok(TypedTerm::App {
                        func: Box::new(TypedTerm::Prim {
                            name: p.clone(),
                            dom,
                            cod,
                        }),
                        arg: Box::new(arg),
                    });
                }
                let func = self.check_mono(e1)?;
                let func_ty = func.mono_type().unwrap();
                let (dom, _cod) = match &func_ty {
                    SourceType::Arrow(d, c) => ((**d).clone(), (**c).clone()),
                    other => {
                        return Err(TypeError::TypeMismatch {
                            context: "application head",
                            expected: "an arrow type".into(),
                            found: other.to_string(),
                        })
                    }
                };
                let arg = self.check_mono(e2)?;
                let arg_ty = arg.mono_type().unwrap();
                if arg_ty != dom {
                    return Err(TypeError::TypeMismatch {
                        context: "application argument",
                        expected: dom.to_string(),
                        found: arg_ty.to_string(),
                    });
                }
                Ok(TypedTerm::App {
                    func: Box::new(func),
                    arg: Box::new(arg),
                })
            }
            SourceTerm::TyApp(p, args) => {
                let target = self.check(p)?;
                let scheme = match target.typing() {
                    Typing::Poly(s) => s,
                    Typing::Mono(t) => {
                        return Err(TypeError::PolymorphicUse(format!(
                            "type application of a monomorphic term of type {t}"
                        )))
                    }
                };
                if scheme.bounds.len() != args.len() {
                    return Err(TypeError::ArityMismatch {
                        expected: scheme.bounds.len(),
                        found: args.len(),
                    });
                }
                for ((v, bound), arg) in scheme.bounds.iter().zip(args) {
                    self.check_type_wf(arg)?;
                    if !subtype(&self.interp.hierarchy, &self.delta_env, arg, bound) {
                        return Err(TypeError::BoundViolation {
                            var: v.clone(),
                            bound: bound.to_string(),
                            arg: arg.to_string(),
                        });
                    }
                }
                Ok(TypedTerm::TyApp {
                    target: Box::new(target),
                    args: args.clone(),
                })
            }
            SourceTerm::Let(x, p, e) => {
                let bound = self.check(p)?;
                self.gamma.push((x.clone(), bound.typing()));
                let body = self.check_mono(e);
                self.gamma.pop();
                Ok(TypedTerm::Let {
                    name: x.clone(),
                    bound: Box::new(bound),
                    body: Box::new(body?),
                })
            }
            SourceTerm::TyLam(bounds, body) => {
                for (v, bound) in bounds {
                    if !bound.is_closed() {
                        return Err(TypeError::OpenBound(v.clone(), bound.to_string()));
                    }
                    self.check_type_wf(bound)?;
                    let shadows = self.delta_env.iter().any(|(name, _)| name == v)
                        || bounds.iter().filter(|(name, _)| name == v).count() > 1;
                    if shadows {
                        return Err(TypeError::ShadowedTypeVariable(v.clone()));
                    }
                }
                let depth = self.delta_env.len();
                self.delta_env.extend(bounds.iter().cloned());
                let body = self.check_mono(body);
                self.delta_env.truncate(depth);
                Ok(TypedTerm::TyLam {
                    bounds: bounds.clone(),
                    body: Box::new(body?),
                })
            }
        }
    }

    fn check_mono(&mut self, term: &SourceTerm) -> Result<TypedTerm, TypeError> {
        let typed = self.check(term)?;
        match typed.typing() {
            Typing::Mono(_) => Ok(typed),
            Typing::Poly(s) => Err(TypeError::PolymorphicUse(format!(
                "polymorphic term of type {s} used without type application"
            ))),
        }
    }

    fn check_type_wf(&self, ty: &SourceType) -> Result<(), TypeError> {
        match ty {
            SourceType::Base(s) => {
                if self.interp.hierarchy.contains(s) {
                    Ok(())
                } else {
                    Err(TypeError::UnknownSort(s.0.clone()))
                }
            }
            SourceType::Var(v) => {
                if self.delta_env.iter().any(|(name, _)| name == v) {
                    Ok(())
                } else {
                    Err(TypeError::UnboundTypeVariable(v.clone()))
                }
            }
            SourceType::Arrow(d, c) => {
                self.check_type_wf(d)?;
                self.check_type_wf(c)
            }
        }
    }

    /// Every closed type below `ty`: for a base sort, the sorts below it;
    /// for an arrow, the same domain over every subtype of the codomain.
    /// Always non-empty, since subtyping is reflexive.
    fn closed_subtypes(&self, ty: &SourceType) -> Vec<SourceType> {
        match ty {
            SourceType::Base(s) => self
                .interp
                .hierarchy
                .sorts()
                .iter()
                .filter(|t| self.interp.hierarchy.leq(t, s).unwrap_or(false))
                .cloned()
                .map(SourceType::Base)
                .collect(),
            SourceType::Arrow(d, c) => self
                .closed_subtypes(c)
                .into_iter()
                .map(|c| sarrow((**d).clone(), c))
                .collect(),
            SourceType::Var(_) => Vec::new(),
        }
    }

    /// The universal side condition on primitive ascriptions: every closed
    /// instantiation of the domain's variables (each ranging over the
    /// closed subtypes of its bound) must produce an arrow present in the
    /// primitive's table.
    fn check_prim_ascription(
        &self,
        prim: &str,
        dom: &SourceType,
        cod: &SourceType,
    ) -> Result<(), TypeError> {
        let rows = self
            .interp
            .prim_rows(prim)
            .ok_or_else(|| TypeError::UnknownPrim(prim.to_string()))?;
        self.check_type_wf(dom)?;
        self.check_type_wf(cod)?;
        let dom_vars = dom.fv();
        for v in cod.fv() {
            if !dom_vars.contains(&v) {
                return Err(TypeError::PrimNotCovered {
                    prim: prim.to_string(),
                    missing: format!("codomain variable {v} does not occur in the domain"),
                });
            }
        }
        let mut ranges = Vec::new();
        for v in &dom_vars {
            let bound = self
                .delta_env
                .iter()
                .rev()
                .find(|(name, _)| name == v)
                .map(|(_, b)| b.clone())
                .ok_or_else(|| TypeError::UnboundTypeVariable(v.clone()))?;
            ranges.push(self.closed_subtypes(&bound));
        }
        let mut assignment = vec![0usize; dom_vars.len()];
        'instances: loop {
            let bindings: Vec<(String, SourceType)> = dom_vars
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), ranges[i][assignment[i]].clone()))
                .collect();
            let inst_dom = dom.substitute(&bindings);
            let inst_cod = cod.substitute(&bindings);
            let present = match (&inst_dom, &inst_cod) {
                (SourceType::Base(a), SourceType::Base(b)) => {
                    rows.iter().any(|(d, c)| d == a && c == b)
                }
                _ => false,
            };
            if !present {
                return Err(TypeError::PrimNotCovered {
                    prim: prim.to_string(),
                    missing: format!("{inst_dom} -> {inst_cod}"),
                });
            }
            // Advance the mixed-radix counter over variable assignments.
            let mut i = 0;
            loop {
                if i == assignment.len() {
                    break 'instances;
                }
                assignment[i] += 1;
                if assignment[i] < ranges[i].len() {
                    continue 'instances;
                }
                assignment[i] = 0;
                i += 1;
            }
        }
        Ok(())
    }

    /// Resolves an unascribed primitive applied to an argument of the given
    /// type. Candidate codomains are every sort plus the argument type
    /// itself; exactly one must satisfy the coverage condition.
    fn infer_prim(
        &self,
        prim: &str,
        arg_ty: &SourceType,
    ) -> Result<(SourceType, SourceType), TypeError> {
        if self.interp.prim_rows(prim).is_none() {
            return Err(TypeError::UnknownPrim(prim.to_string()));
        }
        let mut candidates: Vec<SourceType> = self
            .interp
            .hierarchy
            .sorts()
            .iter()
            .map(|s| SourceType::Base(s.clone()))
            .collect();
        if matches!(arg_ty, SourceType::Var(_)) {
            candidates.push(arg_ty.clone());
        }
        let mut fits = Vec::new();
        let mut first_miss = None;
        for cod in candidates {
            match self.check_prim_ascription(prim, arg_ty, &cod) {
                Ok(()) => fits.push(cod),
                Err(TypeError::PrimNotCovered { missing, .. }) => {
                    first_miss.get_or_insert(missing);
                }
                Err(other) => return Err(other),
            }
        }
        match fits.len() {
            1 => Ok((arg_ty.clone(), fits.pop().unwrap())),
            0 => Err(TypeError::PrimNotCovered {
                prim: prim.to_string(),
                missing: first_miss.unwrap_or_else(|| format!("{arg_ty} -> ?")),
            }),
            _ => Err(TypeError::PrimAmbiguous {
                prim: prim.to_string(),
                candidates: fits
                    .iter()
                    .map(|c| format!("{arg_ty} -> {c}"))
                    .collect(),
            }),
        }
    }
}

/// One outcome of [`step`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum StepOutcome {
    /// The term is a value (or a type abstraction, which is a normal form).
    Value,
    Step(SourceTerm),
    /// No rule applies: a primitive met a constant its table does not
    /// cover, or the term was open or ill-formed to begin with.
    Stuck,
}

pub fn is_value(term: &SourceTerm) -> bool {
    matches!(
        term,
        SourceTerm::Const(_) | SourceTerm::Prim(_, _) | SourceTerm::Lam(_, _, _) | SourceTerm::TyLam(_, _)
    )
}

/// A single small-step reduction. Evaluation contexts are application
/// (left operand, then the argument of a value) and the target of a type
/// application; a let binding substitutes immediately without evaluating
/// its right-hand side, since there is no let context in this calculus.
pub fn step(interp: &Interpretation, term: &SourceTerm) -> StepOutcome {
    if is_value(term) {
        return StepOutcome::Value;
    }
    match term {
        SourceTerm::App(e1, e2) => {
            if !is_value(e1) {
                return step_under(interp, e1, |e| sapp(e, (**e2).clone()));
            }
            if !is_value(e2) {
                return step_under(interp, e2, |e| sapp((**e1).clone(), e));
            }
            match (&**e1, &**e2) {
                (SourceTerm::Lam(x, _, body), v) => {
                    StepOutcome::Step(subst_term(body, x, v))
                }
                (SourceTerm::Prim(f, _), SourceTerm::Const(c)) => match interp.delta(f, c) {
                    Some(result) => StepOutcome::Step(sconst(result)),
                    None => StepOutcome::Stuck,
                },
                _ => StepOutcome::Stuck,
            }
        }
        SourceTerm::TyApp(p, args) => match &**p {
            SourceTerm::TyLam(bounds, body) => {
                if bounds.len() != args.len() {
                    return StepOutcome::Stuck;
                }
                let bindings: Vec<(String, SourceType)> = bounds
                    .iter()
                    .map(|(v, _)| v.clone())
                    .zip(args.iter().cloned())
                    .collect();
                StepOutcome::Step(subst_types_in_term(body, &bindings))
            }
            _ if !is_value(p) => step_under(interp, p, |e| styapp(e, args.clone())),
            _ => StepOutcome::Stuck,
        },
        SourceTerm::Let(x, p, e) => StepOutcome::Step(subst_term(e, x, p)),
        _ => StepOutcome::Stuck,
    }
}

fn step_under(
    interp: &Interpretation,
    inner: &SourceTerm,
    rebuild: impl FnOnce(SourceTerm) -> SourceTerm,
) -> StepOutcome {
    match step(interp, inner) {
        StepOutcome::Step(e) => StepOutcome::Step(rebuild(e)),
        other => other,
    }
}

/// Capture-avoiding for the closed substitutions evaluation performs:
/// binders shadow, and substituted terms are closed so no renaming is
/// needed.
pub fn subst_term(term: &SourceTerm, x: &str, replacement: &SourceTerm) -> SourceTerm {
    match term {
        SourceTerm::Var(y) if y == x => replacement.clone(),
        SourceTerm::Var(_) | SourceTerm::Const(_) | SourceTerm::Prim(_, _) => term.clone(),
        SourceTerm::Lam(y, t, body) => {
            if y == x {
                term.clone()
            } else {
                slam(y.clone(), t.clone(), subst_term(body, x, replacement))
            }
        }
        SourceTerm::App(e1, e2) => sapp(
            subst_term(e1, x, replacement),
            subst_term(e2, x, replacement),
        ),
        SourceTerm::TyApp(p, args) => styapp(subst_term(p, x, replacement), args.clone()),
        SourceTerm::Let(y, p, e) => {
            let p = subst_term(p, x, replacement);
            if y == x {
                slet(y.clone(), p, (**e).clone())
            } else {
                slet(y.clone(), p, subst_term(e, x, replacement))
            }
        }
        SourceTerm::TyLam(bounds, body) => {
            SourceTerm::TyLam(bounds.clone(), Box::new(subst_term(body, x, replacement)))
        }
    }
}

/// Substitutes type variables throughout a term's annotations, ascriptions
/// and type arguments. Quantifiers shadow their own variables.
pub fn subst_types_in_term(
    term: &SourceTerm,
    bindings: &[(String, SourceType)],
) -> SourceTerm {
    if bindings.is_empty() {
        return term.clone();
    }
    match term {
        SourceTerm::Const(_) | SourceTerm::Var(_) => term.clone(),
        SourceTerm::Prim(p, asc) => SourceTerm::Prim(
            p.clone(),
            asc.as_ref()
                .map(|(d, c)| (d.substitute(bindings), c.substitute(bindings))),
        ),
        SourceTerm::Lam(x, t, body) => slam(
            x.clone(),
            t.substitute(bindings),
            subst_types_in_term(body, bindings),
        ),
        SourceTerm::App(e1, e2) => sapp(
            subst_types_in_term(e1, bindings),
            subst_types_in_term(e2, bindings),
        ),
        SourceTerm::TyApp(p, args) => styapp(
            subst_types_in_term(p, bindings),
            args.iter().map(|a| a.substitute(bindings)).collect(),
        ),
        SourceTerm::Let(x, p, e) => slet(
            x.clone(),
            subst_types_in_term(p, bindings),
            subst_types_in_term(e, bindings),
        ),
        SourceTerm::TyLam(bounds, body) => {
            let inner: Vec<(String, SourceType)> = bindings
                .iter()
                .filter(|(v, _)| !bounds.iter().any(|(b, _)| b == v))
                .cloned()
                .collect();
            SourceTerm::TyLam(bounds.clone(), Box::new(subst_types_in_term(body, &inner)))
        }
    }
}

pub const DEFAULT_FUEL: u64 = 10_000;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum EvalError {
    Stuck(SourceTerm),
    OutOfFuel,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            EvalError::Stuck(t) => write!(f, "evaluation stuck at {t}"),
            EvalError::OutOfFuel => write!(f, "evaluation ran out of fuel"),
        }
    }
}

/// Runs a term to a value, or reports where it got stuck.
pub fn eval(interp: &Interpretation, term: &SourceTerm, fuel: u64) -> Result<SourceTerm, EvalError> {
    let mut current = term.clone();
    for _ in 0..fuel {
        match step(interp, &current) {
            StepOutcome::Value => return Ok(current),
            StepOutcome::Step(next) => current = next,
            StepOutcome::Stuck => return Err(EvalError::Stuck(current)),
        }
    }
    Err(EvalError::OutOfFuel)
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SoundnessViolation {
    /// Two table rows give the same domain different codomains, so no
    /// reduction result could satisfy both.
    ConflictingRows {
        prim: String,
        dom: Sort,
        cod1: Sort,
        cod2: Sort,
    },
    /// `f c` is typeable but the reduction table has no entry for it.
    MissingDelta { prim: String, constant: String },
    /// The reduction result exists but has the wrong sort.
    WrongResultSort {
        prim: String,
        constant: String,
        result: String,
        expected: Sort,
        found: Sort,
    },
}

impl fmt::Display for SoundnessViolation {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        use SoundnessViolation::*;
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
            MissingDelta { prim, constant } => write!(
                f,
                "{prim} {constant} is typeable but has no reduction"
            ),
            WrongResultSort {
                prim,
                constant,
                result,
                expected,
                found,
            } => write!(
                f,
                "{prim} {constant} reduces to {result} of sort {found}, expected {expected}"
            ),
        }
    }
}

/// Checks that the interpretation can actually deliver what its typing
/// table promises: whenever `f c` is typeable at `t`, the reduction is
/// defined and produces a constant of sort `t`.
pub fn check_pi_f_sound(interp: &Interpretation) -> Result<(), SoundnessViolation> {
    for (prim, rows) in interp.prims() {
        for (i, (d1, c1)) in rows.iter().enumerate() {
            for (d2, c2) in rows.iter().skip(i + 1) {
                if d1 == d2 && c1 != c2 {
                    return Err(SoundnessViolation::ConflictingRows {
                        prim: prim.clone(),
                        dom: d1.clone(),
                        cod1: c1.clone(),
                        cod2: c2.clone(),
                    });
                }
            }
        }
        for (dom, cod) in rows {
            for (constant, sort) in interp.constants() {
                if sort != dom {
                    continue;
                }
                match interp.delta(prim, constant) {
                    None => {
                        return Err(SoundnessViolation::MissingDelta {
                            prim: prim.clone(),
                            constant: constant.clone(),
                        })
                    }
                    Some(result) => {
                        let found = interp
                            .constant_sort(result)
                            .expect("delta results are known constants");
                        if found != cod {
                            return Err(SoundnessViolation::WrongResultSort {
                                prim: prim.clone(),
                                constant: constant.clone(),
                                result: result.to_string(),
                                expected: cod.clone(),
                                found: found.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
