//! Emitting ML-style interface text for an encoded hierarchy: the
//! datatype declarations backing the constructors, a safe signature with
//! abstract encodings at argument positions and concrete encodings at
//! results, and a wrapper structure implementing it over an unsafe base
//! structure. The output is documentation-grade text, deterministic for
//! golden testing, and mirrors the phantom type pretty-printer.

use crate::encodings::EncodingPair;
use crate::hierarchy::{Hierarchy, Sort};
use crate::phantom::{FreshSupply, PhantomType};
use std::collections::BTreeSet;
use std::fmt;

/// One argument position of an operation.
#[derive(Clone, Debug)]
pub enum ArgSpec {
    /// An ordinary ML type, passed through verbatim (`int`, `string`).
    Plain(String),
    /// The abstract encoding of a sort, fresh variables per position.
    Abst(Sort),
    /// The abstract encoding of a sort, variables shared with every other
    /// position carrying the same group number.
    AbstShared(Sort, usize),
}

/// The result position of an operation.
#[derive(Clone, Debug)]
pub enum ResultSpec {
    Plain(String),
    /// The concrete encoding of a sort; the default for results.
    Conc(Sort),
    /// The same abstract encoding (same variables) as the argument group;
    /// only legal when some argument carries that group.
    SameAs(usize),
}

#[derive(Clone, Debug)]
pub struct OpSpec {
    pub name: String,
    pub args: Vec<ArgSpec>,
    pub result: ResultSpec,
}

impl OpSpec {
    pub fn new(name: &str, args: Vec<ArgSpec>, result: ResultSpec) -> OpSpec {
        OpSpec {
            name: name.to_string(),
            args,
            result,
        }
    }
}

/// Everything needed to emit a safe interface: naming, the underlying
/// unsafe structure, and the operation signatures over sorts.
#[derive(Clone, Debug)]
pub struct InterfaceSpec {
    pub signature_name: String,
    pub structure_name: String,
    /// The phantom-carrying type, e.g. `safe_atom`.
    pub type_name: String,
    /// The structure providing the unchecked operations, e.g. `Atom`.
    pub unsafe_structure: String,
    /// The representation type being wrapped, e.g. `Atom.atom`.
    pub base_type: String,
    pub ops: Vec<OpSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CodegenError {
    /// A result position asks for type variables that no argument
    /// position introduces; such a signature would let callers conjure
    /// arbitrary encodings.
    PolarityViolation(String),
    UnknownSort(String),
}

impl std::error::Error for CodegenError {}

impl fmt::Display for CodegenError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            CodegenError::PolarityViolation(m) => write!(f, "polarity violation: {m}"),
            CodegenError::UnknownSort(s) => write!(f, "unknown sort {s}"),
        }
    }
}

/// Splices an encoding in front of the phantom-carrying type name,
/// parenthesizing products so the postfix application reads correctly.
fn splice(enc: &PhantomType, type_name: &str) -> String {
    match enc {
        PhantomType::Product(_, _) => format!("({enc}) {type_name}"),
        _ => format!("{enc} {type_name}"),
    }
}

/// One `datatype 'a N = Irrelevant_N` line per constructor the encoding
/// uses: sort-named constructors first in hierarchy declaration order,
/// then any marker constructors alphabetically.
pub fn emit_datatypes(pair: &EncodingPair, h: &Hierarchy) -> String {
    let mut used: BTreeSet<String> = BTreeSet::new();
    for sort in h.sorts() {
        if let Some(t) = pair.conc(sort) {
            used.extend(t.constructors());
        }
        if let Some(t) = pair.abst_template(sort) {
            used.extend(t.constructors());
        }
    }
    let mut lines = Vec::new();
    for sort in h.sorts() {
        if used.remove(sort.name()) {
            lines.push(format!(
                "datatype 'a {0} = Irrelevant_{0}",
                sort.name()
            ));
        }
    }
    for marker in used {
        lines.push(format!("datatype 'a {marker} = Irrelevant_{marker}"));
    }
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

/// The encoded argument and result types of one operation, with fresh
/// variables scoped to the operation.
struct OpTypes {
    args: Vec<String>,
    result: String,
}

fn op_types(
    op: &OpSpec,
    pair: &EncodingPair,
    type_name: &str,
) -> Result<OpTypes, CodegenError> {
    let mut supply = FreshSupply::new();
    let mut groups: Vec<(usize, String)> = Vec::new();
    let mut args = Vec::with_capacity(op.args.len());
    for arg in &op.args {
        match arg {
            ArgSpec::Plain(t) => args.push(t.clone()),
            ArgSpec::Abst(sort) => {
                let enc = pair
                    .abst(sort, &mut supply, "a")
                    .ok_or_else(|| CodegenError::UnknownSort(sort.name().to_string()))?;
                args.push(splice(&enc, type_name));
            }
            ArgSpec::AbstShared(sort, group) => {
                let text = match groups.iter().find(|(g, _)| g == group) {
                    Some((_, text)) => text.clone(),
                    None => {
                        let enc = pair
                            .abst(sort, &mut supply, "a")
                            .ok_or_else(|| CodegenError::UnknownSort(sort.name().to_string()))?;
                        let text = splice(&enc, type_name);
                        groups.push((*group, text.clone()));
                        text
                    }
                };
                args.push(text);
            }
        }
    }
    let result = match &op.result {
        ResultSpec::Plain(t) => t.clone(),
        ResultSpec::Conc(sort) => {
            let enc = pair
                .conc(sort)
                .ok_or_else(|| CodegenError::UnknownSort(sort.name().to_string()))?;
            splice(enc, type_name)
        }
        ResultSpec::SameAs(group) => groups
            .iter()
            .find(|(g, _)| g == group)
            .map(|(_, text)| text.clone())
            .ok_or_else(|| {
                CodegenError::PolarityViolation(format!(
                    "operation {} returns variable group {group} that no argument introduces",
                    op.name
                ))
            })?,
    };
    Ok(OpTypes { args, result })
}

/// The safe signature: the phantom-carrying type declaration plus one val
/// per operation, abstract encodings at arguments and concrete encodings
/// at results.
pub fn emit_safe_signature(
    spec: &InterfaceSpec,
    pair: &EncodingPair,
) -> Result<String, CodegenError> {
    let mut text = format!("signature {} = sig\n", spec.signature_name);
    text.push_str(&format!("  type 'a {}\n", spec.type_name));
    for op in &spec.ops {
        let tys = op_types(op, pair, &spec.type_name)?;
        if tys.args.is_empty() {
            text.push_str(&format!("  val {}: {}\n", op.name, tys.result));
        } else {
            text.push_str(&format!(
                "  val {}: {} -> {}\n",
                op.name,
                tys.args.join(" * "),
                tys.result
            ));
        }
    }
    text.push_str("end\n");
    Ok(text)
}

/// The wrapper implementation: a datatype wrapping the base type, with
/// each operation unwrapping its encoded arguments and rewrapping encoded
/// results. A commented block shows the opaque-constraint alternative
/// that avoids the wrapper entirely.
pub fn emit_safe_structure(
    spec: &InterfaceSpec,
    pair: &EncodingPair,
) -> Result<String, CodegenError> {
    let mut text = format!(
        "structure {} : {} = struct\n",
        spec.structure_name, spec.signature_name
    );
    text.push_str(&format!(
        "  datatype 'a {} = W of {}\n",
        spec.type_name, spec.base_type
    ));
    for op in &spec.ops {
        let tys = op_types(op, pair, &spec.type_name)?;
        let mut params = Vec::with_capacity(op.args.len());
        let mut inner_args = Vec::with_capacity(op.args.len());
        for (i, (arg, ty)) in op.args.iter().zip(&tys.args).enumerate() {
            let v = format!("v{}", i + 1);
            match arg {
                ArgSpec::Plain(_) => params.push(format!("{v}: {ty}")),
                ArgSpec::Abst(_) | ArgSpec::AbstShared(_, _) => {
                    params.push(format!("W {v}: {ty}"))
                }
            }
            inner_args.push(v);
        }
        let call = if inner_args.is_empty() {
            format!("{}.{}", spec.unsafe_structure, op.name)
        } else {
            format!(
                "{}.{} ({})",
                spec.unsafe_structure,
                op.name,
                inner_args.join(", ")
            )
        };
        let body = match op.result {
            ResultSpec::Plain(_) => call,
            ResultSpec::Conc(_) | ResultSpec::SameAs(_) => format!("W ({call})"),
        };
        if params.is_empty() {
            text.push_str(&format!("  val {}: {} = {}\n", op.name, tys.result, body));
        } else {
            text.push_str(&format!(
                "  fun {} ({}): {} = {}\n",
                op.name,
                params.join(", "),
                tys.result,
                body
            ));
        }
    }
    text.push_str("end\n");
    text.push('\n');
    text.push_str("(* Alternative: constrain the unsafe structure opaquely instead of\n");
    text.push_str("   wrapping it in a datatype. The phantom parameter is then free on\n");
    text.push_str("   the type, and no run-time wrapping occurs.\n");
    text.push_str(&format!(
        "structure {} :> {} = struct\n",
        spec.structure_name, spec.signature_name
    ));
    text.push_str(&format!(
        "  type 'a {} = {}\n",
        spec.type_name, spec.base_type
    ));
    for op in &spec.ops {
        text.push_str(&format!(
            "  val {} = {}.{}\n",
            op.name, spec.unsafe_structure, op.name
        ));
    }
    text.push_str("end\n");
    text.push_str("*)\n");
    Ok(text)
}
