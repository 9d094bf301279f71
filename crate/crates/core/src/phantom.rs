//! The type language that encodings live in: variables, arrows, postfix
//! constructor applications, unit, and binary products.
//!
//! Two flavours of solving are provided. [`match_one_sided`] treats the
//! right-hand side as rigid and only binds pattern variables, which is how
//! concrete encodings are checked against abstract ones. [`unify_general`]
//! is ordinary first-order unification with an occurs check, needed once
//! concrete encodings may contain variables of their own.

use std::collections::{HashMap, HashSet};
use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PhantomType {
    Unit,
    Var(String),
    /// Postfix constructor application, written `arg Name`.
    Con(String, Box<PhantomType>),
    Product(Box<PhantomType>, Box<PhantomType>),
    Arrow(Box<PhantomType>, Box<PhantomType>),
}

pub use PhantomType::Unit;

pub fn var(name: impl Into<String>) -> PhantomType {
    PhantomType::Var(name.into())
}

pub fn con(name: impl Into<String>, arg: PhantomType) -> PhantomType {
    PhantomType::Con(name.into(), Box::new(arg))
}

pub fn prod(l: PhantomType, r: PhantomType) -> PhantomType {
    PhantomType::Product(Box::new(l), Box::new(r))
}

pub fn arrow(dom: PhantomType, cod: PhantomType) -> PhantomType {
    PhantomType::Arrow(Box::new(dom), Box::new(cod))
}

/// Right-nests a non-empty list into a tuple: `[a, b, c]` becomes
/// `a * (b * c)`. A single component is just itself.
pub fn tuple(mut parts: Vec<PhantomType>) -> PhantomType {
    assert!(!parts.is_empty(), "tuple of no components");
    let mut acc = parts.pop().unwrap();
    while let Some(t) = parts.pop() {
        acc = prod(t, acc);
    }
    acc
}

/// A single variable binding produced by matching or unification.
pub type Binding = (String, PhantomType);

impl PhantomType {
    /// Free variables in depth-first, left-to-right order of first
    /// occurrence. There are no binders in this type language, so every
    /// variable occurrence is free.
    pub fn fv(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        self.fv_into(&mut seen, &mut out);
        out
    }

    fn fv_into(&self, seen: &mut HashSet<String>, out: &mut Vec<String>) {
        match self {
            PhantomType::Unit => {}
            PhantomType::Var(v) => {
                if seen.insert(v.clone()) {
                    out.push(v.clone());
                }
            }
            PhantomType::Con(_, a) => a.fv_into(seen, out),
            PhantomType::Product(l, r) | PhantomType::Arrow(l, r) => {
                l.fv_into(seen, out);
                r.fv_into(seen, out);
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.fv().is_empty()
    }

    /// Simultaneous substitution: variables bound in `bindings` are replaced
    /// in one pass, so bindings never act on each other's images.
    pub fn substitute(&self, bindings: &[Binding]) -> PhantomType {
        match self {
            PhantomType::Unit => PhantomType::Unit,
            PhantomType::Var(v) => bindings
                .iter()
                .find(|(name, _)| name == v)
                .map(|(_, t)| t.clone())
                .unwrap_or_else(|| self.clone()),
            PhantomType::Con(c, a) => con(c.clone(), a.substitute(bindings)),
            PhantomType::Product(l, r) => prod(l.substitute(bindings), r.substitute(bindings)),
            PhantomType::Arrow(l, r) => arrow(l.substitute(bindings), r.substitute(bindings)),
        }
    }

    /// Renames every variable via the supply, keeping each name's first
    /// replacement. Used to instantiate stored templates with fresh names.
    pub fn instantiate(&self, supply: &mut FreshSupply, hint: &str) -> PhantomType {
        let bindings: Vec<Binding> = self
            .fv()
            .into_iter()
            .map(|v| (v, var(supply.fresh(hint))))
            .collect();
        self.substitute(&bindings)
    }

    /// All constructor names appearing in the type, first-occurrence order.
    pub fn constructors(&self) -> Vec<String> {
        fn walk(t: &PhantomType, seen: &mut HashSet<String>, out: &mut Vec<String>) {
            match t {
                PhantomType::Unit | PhantomType::Var(_) => {}
                PhantomType::Con(c, a) => {
                    if seen.insert(c.clone()) {
                        out.push(c.clone());
                    }
                    walk(a, seen, out);
                }
                PhantomType::Product(l, r) | PhantomType::Arrow(l, r) => {
                    walk(l, seen, out);
                    walk(r, seen, out);
                }
            }
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        walk(self, &mut seen, &mut out);
        out
    }
}

/// Matches `pattern` against a rigid `target`: only pattern variables bind,
/// and variables in the target are treated as constants. On success the
/// bindings are listed in first-occurrence order of the pattern variables
/// and satisfy `pattern.substitute(&bindings) == *target`.
pub fn match_one_sided(pattern: &PhantomType, target: &PhantomType) -> Option<Vec<Binding>> {
    let mut bound: HashMap<String, PhantomType> = HashMap::new();
    if !walk_match(pattern, target, &mut bound) {
        return None;
    }
    Some(
        pattern
            .fv()
            .into_iter()
            .map(|v| {
                let t = bound[&v].clone();
                (v, t)
            })
            .collect(),
    )
}

fn walk_match(
    pattern: &PhantomType,
    target: &PhantomType,
    bound: &mut HashMap<String, PhantomType>,
) -> bool {
    match (pattern, target) {
        (PhantomType::Var(v), t) => match bound.get(v) {
            Some(prev) => prev == t,
            None => {
                bound.insert(v.clone(), t.clone());
                true
            }
        },
        (PhantomType::Unit, PhantomType::Unit) => true,
        (PhantomType::Con(c1, a1), PhantomType::Con(c2, a2)) => {
            c1 == c2 && walk_match(a1, a2, bound)
        }
        (PhantomType::Product(l1, r1), PhantomType::Product(l2, r2))
        | (PhantomType::Arrow(l1, r1), PhantomType::Arrow(l2, r2)) => {
            walk_match(l1, l2, bound) && walk_match(r1, r2, bound)
        }
        _ => false,
    }
}

/// First-order unification with an occurs check. Both sides may contain
/// variables; callers are expected to have renamed them apart. On success
/// the substitution is idempotent and unifies the two types.
pub fn unify_general(a: &PhantomType, b: &PhantomType) -> Option<Vec<Binding>> {
    let mut subst: Vec<Binding> = Vec::new();
    if !unify_walk(a.clone(), b.clone(), &mut subst) {
        return None;
    }
    Some(subst)
}

fn unify_walk(a: PhantomType, b: PhantomType, subst: &mut Vec<Binding>) -> bool {
    let a = a.substitute(subst);
    let b = b.substitute(subst);
    match (a, b) {
        (PhantomType::Var(v), t) | (t, PhantomType::Var(v)) => {
            if t == PhantomType::Var(v.clone()) {
                return true;
            }
            if t.fv().contains(&v) {
                return false; // occurs check
            }
            // Keep the substitution idempotent: eliminate v everywhere.
            let binding = [(v.clone(), t.clone())];
            for (_, image) in subst.iter_mut() {
                *image = image.substitute(&binding);
            }
            subst.push((v, t));
            true
        }
        (PhantomType::Unit, PhantomType::Unit) => true,
        (PhantomType::Con(c1, a1), PhantomType::Con(c2, a2)) => {
            c1 == c2 && unify_walk(*a1, *a2, subst)
        }
        (PhantomType::Product(l1, r1), PhantomType::Product(l2, r2))
        | (PhantomType::Arrow(l1, r1), PhantomType::Arrow(l2, r2)) => {
            unify_walk(*l1, *l2, subst) && unify_walk(*r1, *r2, subst)
        }
        _ => false,
    }
}

/// Issues globally unique variable names. Each hint keeps its own counter
/// (`a` gives `a1`, `a2`, ...), and a registry of every name handed out
/// guards against clashes between hints like `a` and `a1`.
#[derive(Debug, Clone, Default)]
pub struct FreshSupply {
    counters: HashMap<String, u64>,
    issued: HashSet<String>,
}

impl FreshSupply {
    pub fn new() -> FreshSupply {
        FreshSupply::default()
    }

    pub fn fresh(&mut self, hint: &str) -> String {
        loop {
            let n = self.counters.entry(hint.to_string()).or_insert(0);
            *n += 1;
            let candidate = format!("{hint}{n}");
            if self.issued.insert(candidate.clone()) {
                return candidate;
            }
        }
    }

    pub fn fresh_var(&mut self, hint: &str) -> PhantomType {
        var(self.fresh(hint))
    }
}

// Canonical printing: postfix constructor arguments are parenthesised
// unless atomic, products chain to the right without parentheses, arrows
// are right-associative, and `*` binds tighter than `->`.
impl fmt::Display for PhantomType {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        fmt_arrow(self, f)
    }
}

impl fmt::Debug for PhantomType {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn fmt_arrow(t: &PhantomType, f: &mut fmt::Formatter) -> fmt::Result {
    match t {
        PhantomType::Arrow(d, c) => {
            fmt_prod(d, f)?;
            write!(f, " -> ")?;
            fmt_arrow(c, f)
        }
        _ => fmt_prod(t, f),
    }
}

fn fmt_prod(t: &PhantomType, f: &mut fmt::Formatter) -> fmt::Result {
    match t {
        PhantomType::Product(l, r) => {
            fmt_app(l, f)?;
            write!(f, " * ")?;
            fmt_prod(r, f)
        }
        _ => fmt_app(t, f),
    }
}

fn fmt_app(t: &PhantomType, f: &mut fmt::Formatter) -> fmt::Result {
    match t {
        PhantomType::Con(c, a) => {
            fmt_atom(a, f)?;
            write!(f, " {c}")
        }
        _ => fmt_atom(t, f),
    }
}

fn fmt_atom(t: &PhantomType, f: &mut fmt::Formatter) -> fmt::Result {
    match t {
        PhantomType::Unit => write!(f, "unit"),
        PhantomType::Var(v) => write!(f, "'{v}"),
        _ => {
            write!(f, "(")?;
            fmt_arrow(t, f)?;
            write!(f, ")")
        }
    }
}
