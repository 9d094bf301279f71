//! Translating the bounded calculus into the unbounded one. Types go
//! through the fixed encoding pair: base sorts become their concrete
//! encoding under the type constructor, bounds become abstract encodings
//! whose fresh variables are quantified in the output, and subtyping
//! witnesses at type application are compiled into explicit instantiation
//! lists computed by matching. Expressions are translated off their typing
//! derivations, and the result can be re-checked on the target side to
//! confirm the translation preserved the type.

use crate::encodings::EncodingPair;
use crate::hierarchy::Sort;
use crate::phantom::{match_one_sided, FreshSupply, PhantomType};
use crate::source::{
    typecheck, Interpretation, SourceScheme, SourceType, TypeError, TypedTerm, Typing,
};
use crate::target::{
    t_of, tapp, tconst, tlam, tlet, ttyapp, tvar, typecheck_t, TargetInterpretation, TargetScheme,
    TargetTerm, TargetTypeError, TargetTyping,
};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransError {
    UnboundTypeVar(String),
    /// The encoding functions are only defined on closed types; a bare
    /// type variable reaching them means the caller skipped typechecking.
    AppliedToVariable(String),
    /// The fixed encoding assigns this sort an open concrete type (the
    /// open-tailed scheme); such encodings cannot be translated.
    NonGroundConcrete(Sort),
    MissingEncoding(Sort),
    NotPolymorphic(String),
    /// Matching an abstract bound encoding against a translated argument
    /// failed or bound the wrong number of variables; with a respectful
    /// encoding and a valid derivation this cannot happen.
    UnificationFailed(String),
    Source(TypeError),
    Target(TargetTypeError),
}

impl std::error::Error for TransError {}

impl fmt::Display for TransError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        use TransError::*;
        match self {
            UnboundTypeVar(a) => write!(f, "type variable {a} is not bound"),
            AppliedToVariable(a) => {
                write!(f, "encoding translation applied to type variable {a}")
            }
            NonGroundConcrete(s) => write!(
                f,
                "sort {s} has an open concrete encoding; translation needs ground encodings"
            ),
            MissingEncoding(s) => write!(f, "no encoding for sort {s}"),
            NotPolymorphic(x) => write!(f, "{x} is not polymorphic"),
            UnificationFailed(m) => write!(f, "instantiation matching failed: {m}"),
            Source(e) => write!(f, "source: {e}"),
            Target(e) => write!(f, "target: {e}"),
        }
    }
}

impl From<TypeError> for TransError {
    fn from(e: TypeError) -> TransError {
        TransError::Source(e)
    }
}

impl From<TargetTypeError> for TransError {
    fn from(e: TargetTypeError) -> TransError {
        TransError::Target(e)
    }
}

/// Per-session translation state: the environment mapping each in-scope
/// source type variable to the abstract encoding of its bound, and the
/// supply all fresh target variables are drawn from.
pub struct TransEnv {
    rho: Vec<(String, PhantomType)>,
    pub supply: FreshSupply,
}

impl TransEnv {
    pub fn new() -> TransEnv {
        TransEnv {
            rho: Vec::new(),
            supply: FreshSupply::new(),
        }
    }

    fn lookup(&self, name: &str) -> Option<&PhantomType> {
        self.rho
            .iter()
            .rev()
            .find(|(x, _)| x == name)
            .map(|(_, t)| t)
    }
}

impl Default for TransEnv {
    fn default() -> TransEnv {
        TransEnv::new()
    }
}

fn conc_of(pair: &EncodingPair, sort: &Sort) -> Result<PhantomType, TransError> {
    let t = pair
        .conc(sort)
        .ok_or_else(|| TransError::MissingEncoding(sort.clone()))?;
    if !t.is_closed() {
        return Err(TransError::NonGroundConcrete(sort.clone()));
    }
    Ok(t.clone())
}

/// The concrete translation: base sorts become their concrete encoding
/// under the type constructor, arrows are structural.
pub fn trans_concrete(pair: &EncodingPair, ty: &SourceType) -> Result<PhantomType, TransError> {
    match ty {
        SourceType::Base(t) => Ok(t_of(conc_of(pair, t)?)),
        SourceType::Var(a) => Err(TransError::AppliedToVariable(a.clone())),
        SourceType::Arrow(d, c) => Ok(PhantomType::Arrow(
            Box::new(trans_concrete(pair, d)?),
            Box::new(trans_concrete(pair, c)?),
        )),
    }
}

/// The abstract translation: base sorts become their abstract encoding
/// (fresh variables from the supply, hinted by `hint`) under the type
/// constructor; arrow domains flip to the concrete translation.
pub fn trans_abstract(
    pair: &EncodingPair,
    ty: &SourceType,
    supply: &mut FreshSupply,
    hint: &str,
) -> Result<PhantomType, TransError> {
    match ty {
        SourceType::Base(t) => {
            let a = pair
                .abst(t, supply, hint)
                .ok_or_else(|| TransError::MissingEncoding(t.clone()))?;
            Ok(t_of(a))
        }
        SourceType::Var(a) => Err(TransError::AppliedToVariable(a.clone())),
        SourceType::Arrow(d, c) => Ok(PhantomType::Arrow(
            Box::new(trans_concrete(pair, d)?),
            Box::new(trans_abstract(pair, c, supply, hint)?),
        )),
    }
}

/// Translates a source type under the environment: variables look up the
/// abstract encoding of their bound, base sorts go concrete.
pub fn trans_type(
    pair: &EncodingPair,
    ty: &SourceType,
    env: &TransEnv,
) -> Result<PhantomType, TransError> {
    match ty {
        SourceType::Var(a) => env
            .lookup(a)
            .cloned()
            .ok_or_else(|| TransError::UnboundTypeVar(a.clone())),
        SourceType::Base(t) => Ok(t_of(conc_of(pair, t)?)),
        SourceType::Arrow(d, c) => Ok(PhantomType::Arrow(
            Box::new(trans_type(pair, d, env)?),
            Box::new(trans_type(pair, c, env)?),
        )),
    }
}

/// Translates a bounded scheme: each bound's abstract encoding donates
/// its fresh variables to the prenex quantifier block, in bound order,
/// and the body is translated with the bound variables mapped to those
/// encodings.
pub fn trans_scheme(
    pair: &EncodingPair,
    scheme: &SourceScheme,
    env: &mut TransEnv,
) -> Result<TargetScheme, TransError> {
    let mut vars = Vec::new();
    let mut pushed = 0;
    let mut result = || -> Result<PhantomType, TransError> {
        for (alpha, bound) in &scheme.bounds {
            let a = trans_abstract(pair, bound, &mut env.supply, alpha)?;
            vars.extend(a.fv());
            env.rho.push((alpha.clone(), a));
            pushed += 1;
        }
        trans_type(pair, &scheme.body, env)
    };
    let body = result();
    for _ in 0..pushed {
        env.rho.pop();
    }
    Ok(TargetScheme { vars, body: body? })
}

/// Translates a whole interpretation: constant sorts and primitive rows
/// are pushed through the concrete translation, the semantic table is
/// carried over unchanged.
pub fn trans_interp(
    pair: &EncodingPair,
    interp: &Interpretation,
) -> Result<TargetInterpretation, TransError> {
    let mut out = TargetInterpretation::new();
    for (name, sort) in interp.constants() {
        out.add_constant(name, t_of(conc_of(pair, sort)?))?;
    }
    for (name, rows) in interp.prims() {
        let mut t_rows = Vec::with_capacity(rows.len());
        for (dom, cod) in rows {
            t_rows.push((t_of(conc_of(pair, dom)?), t_of(conc_of(pair, cod)?)));
        }
        out.add_prim(name, t_rows)?;
    }
    for ((prim, arg), result) in interp.delta_rows() {
        out.add_delta(prim, arg, result)?;
    }
    Ok(out)
}

/// The bounds a polymorphic expression abstracts over, read off its
/// derivation.
pub fn bounds_of(d: &TypedTerm) -> Result<Vec<(String, SourceType)>, TransError> {
    match d.typing() {
        Typing::Poly(scheme) => Ok(scheme.bounds),
        Typing::Mono(_) => Err(TransError::NotPolymorphic(format!("{}", d.term()))),
    }
}

/// Translates a typing derivation into a target term. Type abstractions
/// quantify the fresh variables of their bounds' abstract encodings; type
/// applications compute the corresponding instantiations by matching each
/// abstract bound encoding against the translated argument; primitives
/// carry the translated ascription established by their derivation node.
pub fn trans_expr(
    pair: &EncodingPair,
    d: &TypedTerm,
    env: &mut TransEnv,
) -> Result<TargetTerm, TransError> {
    match d {
        TypedTerm::Const { name, .. } => Ok(tconst(name.clone())),
        TypedTerm::Prim { name, dom, cod } => {
            let dom_t = trans_type(pair, dom, env)?;
            let cod_t = trans_type(pair, cod, env)?;
            Ok(TargetTerm::Prim(name.clone(), Some((dom_t, cod_t))))
        }
        TypedTerm::Var { name, .. } | TypedTerm::PolyVar { name, .. } => Ok(tvar(name.clone())),
        TypedTerm::Lam { param, annot, body } => {
            let annot_t = trans_type(pair, annot, env)?;
            Ok(tlam(param.clone(), annot_t, trans_expr(pair, body, env)?))
        }
        TypedTerm::App { func, arg } => Ok(tapp(
            trans_expr(pair, func, env)?,
            trans_expr(pair, arg, env)?,
        )),
        TypedTerm::Let { name, bound, body } => Ok(tlet(
            name.clone(),
            trans_expr(pair, bound, env)?,
            trans_expr(pair, body, env)?,
        )),
        TypedTerm::TyLam { bounds, body } => {
            let mut vars = Vec::new();
            let mut pushed = 0;
            let mut inner = || -> Result<TargetTerm, TransError> {
                for (alpha, bound) in bounds {
                    let a = trans_abstract(pair, bound, &mut env.supply, alpha)?;
                    vars.extend(a.fv());
                    env.rho.push((alpha.clone(), a));
                    pushed += 1;
                }
                trans_expr(pair, body, env)
            };
            let body_t = inner();
            for _ in 0..pushed {
                env.rho.pop();
            }
            Ok(TargetTerm::TyLam(vars, Box::new(body_t?)))
        }
        TypedTerm::TyApp { target, args } => {
            let bounds = bounds_of(target)?;
            let head = trans_expr(pair, target, env)?;
            let mut type_args = Vec::new();
            for ((alpha, bound), arg) in bounds.iter().zip(args) {
                let pattern = trans_abstract(pair, bound, &mut env.supply, alpha)?;
                let k = pattern.fv().len();
                let arg_t = trans_type(pair, arg, env)?;
                let theta = match_one_sided(&pattern, &arg_t).ok_or_else(|| {
                    TransError::UnificationFailed(format!(
                        "abstract encoding of bound {alpha} does not match argument"
                    ))
                })?;
                if theta.len() != k {
                    return Err(TransError::UnificationFailed(format!(
                        "bound {alpha}: expected {k} bindings, got {}",
                        theta.len()
                    )));
                }
                type_args.extend(theta.into_iter().map(|(_, t)| t));
            }
            Ok(ttyapp(head, type_args))
        }
    }
}

/// What [`verify_preservation`] found: the source typing, the expected
/// target typing (the source typing translated), and the typing the
/// target checker actually produced.
#[derive(Clone, Debug)]
pub struct PreservationReport {
    pub source_type: String,
    pub expected_type: String,
    pub target_type: String,
    pub preserved: bool,
}

/// Typechecks the source term, translates term and interpretation, and
/// re-typechecks on the target side; preserved means the target typing
/// equals the translated source typing (alpha-equivalence for schemes).
/// A source type error or a broken encoding is an error; a target-side
/// mismatch is an unpreserved report.
pub fn verify_preservation(
    pair: &EncodingPair,
    interp: &Interpretation,
    term: &crate::source::SourceTerm,
) -> Result<PreservationReport, TransError> {
    let derivation = typecheck(interp, term)?;
    let source_typing = derivation.typing();
    let target_interp = trans_interp(pair, interp)?;
    let mut env = TransEnv::new();
    let translated = trans_expr(pair, &derivation, &mut env)?;
    let expected = match &source_typing {
        Typing::Mono(t) => TargetTyping::Mono(trans_type(pair, t, &TransEnv::new())?),
        Typing::Poly(s) => TargetTyping::Poly(trans_scheme(pair, s, &mut TransEnv::new())?),
    };
    let (target_type, preserved) = match typecheck_t(&target_interp, &translated) {
        Ok(actual) => {
            let same = match (&expected, &actual) {
                (TargetTyping::Mono(a), TargetTyping::Mono(b)) => a == b,
                (TargetTyping::Poly(a), TargetTyping::Poly(b)) => {
                    crate::target::scheme_alpha_eq(a, b)
                }
                _ => false,
            };
            (format!("{actual}"), same)
        }
        Err(e) => (format!("error: {e}"), false),
    };
    Ok(PreservationReport {
        source_type: format!("{source_typing}"),
        expected_type: format!("{expected}"),
        target_type,
        preserved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::{encode_width, CtorPolicy, SchemeConfig, WidthLabeling};
    use crate::fixtures;
    use crate::phantom::{prod, var, Unit};
    use crate::source::{
        base, eval, sapp, sconst, slam, slet, sprim, stylam, styapp, svar, tvar as stv,
        DEFAULT_FUEL,
    };
    use crate::target::{
        check_pi_f_sound_t, eval_t, strip_prim_ascriptions, term_alpha_eq, tprim, ttylam,
    };

    /// The five-sort interpretation under the width-three nesting
    /// encoding with the single constructor also used by the target
    /// calculus, labeled so that int and nat stack in the first
    /// coordinate and bool and str occupy the other two.
    fn atom_pair() -> EncodingPair {
        let fx = fixtures::atom_five();
        let labels = WidthLabeling::new(vec![
            ("atom".into(), vec![0, 0, 0]),
            ("int".into(), vec![1, 0, 0]),
            ("nat".into(), vec![2, 0, 0]),
            ("bool".into(), vec![0, 1, 0]),
            ("str".into(), vec![0, 0, 1]),
        ])
        .unwrap();
        labels.check(&fx.hierarchy).unwrap();
        let cfg = SchemeConfig {
            ctor: CtorPolicy::Single("T".into()),
        };
        encode_width(&fx.hierarchy, &labels, &cfg).unwrap()
    }

    fn tt(t: PhantomType) -> PhantomType {
        t_of(t)
    }

    #[test]
    fn concrete_translations_match_the_table() {
        let pair = atom_pair();
        let rows: Vec<(&str, PhantomType)> = vec![
            ("atom", prod(Unit, prod(Unit, Unit))),
            ("int", prod(tt(Unit), prod(Unit, Unit))),
            ("nat", prod(tt(tt(Unit)), prod(Unit, Unit))),
            ("bool", prod(Unit, prod(tt(Unit), Unit))),
            ("str", prod(Unit, prod(Unit, tt(Unit)))),
        ];
        for (sort, body) in rows {
            assert_eq!(
                trans_concrete(&pair, &base(sort)).unwrap(),
                tt(body),
                "{sort}"
            );
        }
    }

    #[test]
    fn abstract_translation_freshens_per_call() {
        let pair = atom_pair();
        let mut supply = FreshSupply::new();
        let first = trans_abstract(&pair, &base("int"), &mut supply, "a").unwrap();
        assert_eq!(
            first,
            tt(prod(tt(var("a1")), prod(var("a2"), var("a3"))))
        );
        let second = trans_abstract(&pair, &base("int"), &mut supply, "a").unwrap();
        assert_eq!(
            second,
            tt(prod(tt(var("a4")), prod(var("a5"), var("a6"))))
        );
    }

    #[test]
    fn arrow_translations_flip_to_concrete_domains() {
        let pair = atom_pair();
        let mut supply = FreshSupply::new();
        let got = trans_abstract(
            &pair,
            &crate::source::sarrow(base("int"), base("str")),
            &mut supply,
            "a",
        )
        .unwrap();
        let expected = PhantomType::Arrow(
            Box::new(trans_concrete(&pair, &base("int")).unwrap()),
            Box::new(tt(prod(var("a1"), prod(var("a2"), tt(var("a3")))))),
        );
        assert_eq!(got, expected);
    }

    #[test]
    fn scheme_translation_quantifies_the_bound_encoding_variables() {
        let pair = atom_pair();
        let scheme = SourceScheme {
            bounds: vec![("a".into(), base("atom"))],
            body: crate::source::sarrow(stv("a"), base("str")),
        };
        let got = trans_scheme(&pair, &scheme, &mut TransEnv::new()).unwrap();
        let expected = TargetScheme {
            vars: vec!["x1".into(), "x2".into(), "x3".into()],
            body: PhantomType::Arrow(
                Box::new(tt(prod(var("x1"), prod(var("x2"), var("x3"))))),
                Box::new(tt(prod(Unit, prod(Unit, tt(Unit))))),
            ),
        };
        assert!(crate::target::scheme_alpha_eq(&got, &expected));
        assert_eq!(got.vars.len(), 3);
    }

    #[test]
    fn interpretation_translation_is_sound_end_to_end() {
        let fx = fixtures::atom_five();
        let pair = atom_pair();
        let t_interp = trans_interp(&pair, &fx.interp).unwrap();
        assert_eq!(
            t_interp.constant_type("ci"),
            Some(&tt(prod(tt(Unit), prod(Unit, Unit))))
        );
        let rows = t_interp.prim_rows("double").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(
            rows[0],
            (
                tt(prod(tt(Unit), prod(Unit, Unit))),
                tt(prod(tt(Unit), prod(Unit, Unit)))
            )
        );
        assert_eq!(t_interp.delta("double", "ci"), Some("cj"));
        check_pi_f_sound_t(&t_interp).unwrap();
    }

    #[test]
    fn infinite_encodings_are_rejected_for_translation() {
        let fx = fixtures::powerset(2);
        let assignment: std::collections::BTreeMap<Sort, Vec<usize>> = [
            (Sort::new("x"), vec![]),
            (Sort::new("x1"), vec![1]),
            (Sort::new("x2"), vec![2]),
            (Sort::new("x12"), vec![1, 2]),
        ]
        .into_iter()
        .collect();
        let cfg = SchemeConfig {
            ctor: CtorPolicy::Single("z".into()),
        };
        let pair =
            crate::encodings::encode_infinite_powerset(&fx.hierarchy, &assignment, &cfg).unwrap();
        let err = trans_concrete(&pair, &base("x1")).unwrap_err();
        assert!(matches!(err, TransError::NonGroundConcrete(_)));
    }

    fn double_wrapper() -> crate::source::SourceTerm {
        stylam(
            vec![("a", base("int"))],
            slam("x", stv("a"), sapp(sprim("double"), svar("x"))),
        )
    }

    fn tostring_wrapper() -> crate::source::SourceTerm {
        stylam(
            vec![("a", base("atom"))],
            slam("x", stv("a"), sapp(sprim("toString"), svar("x"))),
        )
    }

    #[test]
    fn double_wrapper_translates_to_the_displayed_term() {
        let fx = fixtures::atom_five();
        let pair = atom_pair();
        let derivation = typecheck(&fx.interp, &double_wrapper()).unwrap();
        let mut env = TransEnv::new();
        let translated = trans_expr(&pair, &derivation, &mut env).unwrap();
        let displayed = ttylam(
            vec!["a", "b", "c"],
            tlam(
                "x",
                tt(prod(tt(var("a")), prod(var("b"), var("c")))),
                tapp(tprim("double"), tvar("x")),
            ),
        );
        assert!(term_alpha_eq(&strip_prim_ascriptions(&translated), &displayed));
        // The quantifier block has one variable per fresh variable of the
        // bound's abstract encoding.
        match &translated {
            TargetTerm::TyLam(vars, _) => assert_eq!(vars.len(), 3),
            other => panic!("expected a type abstraction, got {other}"),
        }
    }

    #[test]
    fn tostring_wrapper_translates_to_the_displayed_term() {
        let fx = fixtures::atom_five();
        let pair = atom_pair();
        let derivation = typecheck(&fx.interp, &tostring_wrapper()).unwrap();
        let mut env = TransEnv::new();
        let translated = trans_expr(&pair, &derivation, &mut env).unwrap();
        let displayed = ttylam(
            vec!["a", "b", "c"],
            tlam(
                "x",
                tt(prod(var("a"), prod(var("b"), var("c")))),
                tapp(tprim("toString"), tvar("x")),
            ),
        );
        assert!(term_alpha_eq(&strip_prim_ascriptions(&translated), &displayed));
    }

    #[test]
    fn both_wrappers_preserve_their_schemes() {
        let fx = fixtures::atom_five();
        let pair = atom_pair();
        for (term, body) in [
            (
                double_wrapper(),
                PhantomType::Arrow(
                    Box::new(tt(prod(tt(var("a")), prod(var("b"), var("c"))))),
                    Box::new(tt(prod(tt(var("a")), prod(var("b"), var("c"))))),
                ),
            ),
            (
                tostring_wrapper(),
                PhantomType::Arrow(
                    Box::new(tt(prod(var("a"), prod(var("b"), var("c"))))),
                    Box::new(tt(prod(Unit, prod(Unit, tt(Unit))))),
                ),
            ),
        ] {
            let report = verify_preservation(&pair, &fx.interp, &term).unwrap();
            assert!(report.preserved, "{report:?}");
            let stated = TargetScheme {
                vars: vec!["a".into(), "b".into(), "c".into()],
                body,
            };
            let source_scheme = match typecheck(&fx.interp, &term).unwrap().typing() {
                Typing::Poly(s) => s,
                Typing::Mono(_) => unreachable!("wrappers are polymorphic"),
            };
            let translated = trans_scheme(&pair, &source_scheme, &mut TransEnv::new()).unwrap();
            assert!(crate::target::scheme_alpha_eq(&translated, &stated));
        }
    }

    #[test]
    fn type_application_emits_the_matched_bindings() {
        let fx = fixtures::atom_five();
        let pair = atom_pair();
        let term = styapp(tostring_wrapper(), vec![base("int")]);
        let derivation = typecheck(&fx.interp, &term).unwrap();
        let mut env = TransEnv::new();
        let translated = trans_expr(&pair, &derivation, &mut env).unwrap();
        match &translated {
            TargetTerm::TyApp(_, args) => {
                assert_eq!(args.as_slice(), &[tt(Unit), Unit, Unit]);
            }
            other => panic!("expected a type application, got {other}"),
        }
    }

    #[test]
    fn substitution_commutes_with_translation_on_all_sort_pairs() {
        for fx in [fixtures::atom_five(), fixtures::tree_five(), fixtures::sockets()] {
            let cfg = SchemeConfig {
                ctor: CtorPolicy::Single("T".into()),
            };
            let emb = fx.hierarchy.downset_embedding();
            let pair = crate::encodings::encode_embedded(&fx.hierarchy, &emb, &cfg).unwrap();
            for t_sub in fx.hierarchy.sorts() {
                for t_sup in fx.hierarchy.sorts() {
                    if !fx.hierarchy.leq(t_sub, t_sup).unwrap() {
                        continue;
                    }
                    // tau = a -> a under a <: t_sup; instantiate a at t_sub
                    // both before and after translation.
                    let tau = crate::source::sarrow(stv("a"), stv("a"));
                    let mut env = TransEnv::new();
                    let bound_abst =
                        trans_abstract(&pair, &base(t_sup.name()), &mut env.supply, "a").unwrap();
                    env.rho.push(("a".into(), bound_abst.clone()));
                    let translated_open = trans_type(&pair, &tau, &env).unwrap();
                    let arg_conc = trans_concrete(&pair, &base(t_sub.name())).unwrap();
                    let theta = match_one_sided(&bound_abst, &arg_conc)
                        .expect("respectful encodings match along the order");
                    let substituted_after = translated_open.substitute(&theta);
                    let substituted_before = trans_type(
                        &pair,
                        &tau.substitute(&[("a".into(), base(t_sub.name()))]),
                        &TransEnv::new(),
                    )
                    .unwrap();
                    assert_eq!(substituted_after, substituted_before);
                }
            }
        }
    }

    #[test]
    fn closing_program_translates_runs_and_agrees() {
        let fx = fixtures::atom_five();
        let pair = atom_pair();
        // let d = /\a<:int. \x:a. double x in
        // let s = /\a<:atom. \x:a. toString x in s[nat] (d[nat] cm)
        let program = slet(
            "d",
            double_wrapper(),
            slet(
                "s",
                tostring_wrapper(),
                sapp(
                    styapp(svar("s"), vec![base("nat")]),
                    sapp(styapp(svar("d"), vec![base("nat")]), sconst("cm")),
                ),
            ),
        );
        let report = verify_preservation(&pair, &fx.interp, &program).unwrap();
        assert!(report.preserved, "{report:?}");
        let source_result = eval(&fx.interp, &program, DEFAULT_FUEL).unwrap();
        let derivation = typecheck(&fx.interp, &program).unwrap();
        let translated = trans_expr(&pair, &derivation, &mut TransEnv::new()).unwrap();
        let t_interp = trans_interp(&pair, &fx.interp).unwrap();
        let target_result = eval_t(&t_interp, &translated, DEFAULT_FUEL).unwrap();
        match (&source_result, &target_result) {
            (crate::source::SourceTerm::Const(a), TargetTerm::Const(b)) => {
                assert_eq!(a, "cs");
                assert_eq!(a, b);
            }
            other => panic!("expected constants on both sides, got {other:?}"),
        }
    }

    #[test]
    fn two_bound_abstraction_quantifies_both_variable_blocks() {
        let fx = fixtures::atom_five();
        let pair = atom_pair();
        let term = stylam(
            vec![("a", base("int")), ("b", base("bool"))],
            slam(
                "x",
                stv("a"),
                slam("y", stv("b"), sapp(sprim("double"), svar("x"))),
            ),
        );
        let derivation = typecheck(&fx.interp, &term).unwrap();
        let translated = trans_expr(&pair, &derivation, &mut TransEnv::new()).unwrap();
        match &translated {
            TargetTerm::TyLam(vars, _) => {
                assert_eq!(vars.len(), 6);
                let mut unique = vars.clone();
                unique.sort();
                unique.dedup();
                assert_eq!(unique.len(), 6);
            }
            other => panic!("expected a type abstraction, got {other}"),
        }
        let report = verify_preservation(&pair, &fx.interp, &term).unwrap();
        assert!(report.preserved, "{report:?}");
    }

    #[test]
    fn preservation_holds_across_fixtures_and_schemes() {
        for fx in [fixtures::atom_five(), fixtures::sockets(), fixtures::atom_two()] {
            let cfg = SchemeConfig {
                ctor: CtorPolicy::Single("T".into()),
            };
            let emb = fx.hierarchy.downset_embedding();
            let pair = crate::encodings::encode_embedded(&fx.hierarchy, &emb, &cfg).unwrap();
            for (name, sort) in fx.interp.constants() {
                let term = sconst(name.clone());
                let report = verify_preservation(&pair, &fx.interp, &term).unwrap();
                assert!(report.preserved, "constant {name} of sort {sort}");
            }
        }
    }
}
