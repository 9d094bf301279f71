//! Respectful phantom-type encodings for finite subtyping hierarchies.
//!
//! A hierarchy of sorts with a unique top is turned into a pair of type
//! encodings: a ground "concrete" encoding for values and a variable-laden
//! "abstract" encoding for operation domains, such that the concrete
//! encoding of one sort matches the abstract encoding of another exactly
//! when the first is a subtype of the second. One-sided matching then
//! makes an ML-style type system enforce the subtyping for free.
//!
//! The crate provides:
//!
//! - [`hierarchy`]: finite posets of sorts, width computation, chain
//!   partitions and powerset-lattice embeddings;
//! - [`phantom`]: the phantom type language, one-sided matching, general
//!   unification and fresh-variable supplies;
//! - [`encodings`]: the encoding schemes (per-sort constructor chains,
//!   powerset tuples, embeddings, width labelings, an infinite variant)
//!   plus hierarchy extension and the respectfulness check;
//! - [`source`]: a small calculus with bounded quantification over sorts;
//! - [`target`]: a Damas-Milner style calculus with one unary type
//!   constructor and matching-based primitive typing;
//! - [`translate`]: the type-preserving translation from the former to the
//!   latter;
//! - [`codegen`]: rendering of safe ML interface text from an encoding;
//! - [`syntax`]: parsing for types and terms of both calculi;
//! - [`fixtures`]: the worked examples shared by tests and benches.

pub mod codegen;
pub mod encodings;
pub mod fixtures;
pub mod hierarchy;
pub mod phantom;
pub mod source;
pub mod syntax;
pub mod target;
pub mod translate;

pub use codegen::{
    emit_datatypes, emit_safe_signature, emit_safe_structure, ArgSpec, CodegenError,
    InterfaceSpec, OpSpec, ResultSpec,
};
pub use encodings::{
    check_respectful, derive_encoding, CtorPolicy, EncodingError, EncodingPair, Scheme,
    SchemeConfig, WidthLabeling,
};
pub use hierarchy::{Embedding, Hierarchy, HierarchyError, Sort};
pub use phantom::{match_one_sided, unify_general, FreshSupply, PhantomType};
pub use syntax::{
    parse_phantom_type, parse_source_term, parse_source_type, parse_target_term,
    parse_target_type, tokenize, ParseError, Parser, Spanned, Token,
};
pub use source::{typecheck, Interpretation, SourceScheme, SourceTerm, SourceType, TypeError};
pub use target::{typecheck_t, TargetInterpretation, TargetScheme, TargetTerm, TargetTypeError};
pub use translate::{
    trans_abstract, trans_concrete, trans_expr, trans_interp, trans_scheme, trans_type,
    verify_preservation, PreservationReport, TransEnv, TransError,
};
