//! Project files: one self-contained text file per invocation, made of
//! named blocks in braces. A `hierarchy` block is required; `encoding`,
//! `constants`, `ops`, `delta`, `program`, and `interface` blocks are
//! optional and may appear in any order. All sort and constant references
//! are resolved while loading, so commands start from a consistent model.

use phantomenc::codegen::{ArgSpec, InterfaceSpec, OpSpec, ResultSpec};
use phantomenc::encodings::{CtorPolicy, Scheme, SchemeConfig, WidthLabeling};
use phantomenc::hierarchy::{manual_embedding, Hierarchy, Sort};
use phantomenc::source::Interpretation;
use phantomenc::syntax::{tokenize, ParseError, Parser, Token};
use std::collections::BTreeMap;

/// A verbatim slice of the project file (the program block), with the
/// position of its first token so parse errors can be re-anchored.
pub struct Fragment {
    pub text: String,
    pub line: usize,
    pub col: usize,
}

/// The raw contents of the `encoding` block. Scheme resolution happens in
/// [`build_scheme`] so command-line flags can override individual fields.
#[derive(Default)]
pub struct EncodingBlock {
    pub scheme: Option<String>,
    pub ctor: Option<String>,
    /// Number of tuple positions for the `embed` scheme.
    pub ground: Option<usize>,
    /// 1-based tuple positions per sort (`embed` and `infinite`).
    pub positions: Vec<(String, Vec<usize>)>,
    /// Explicit width labels per sort (`width`).
    pub labels: Vec<(String, Vec<u32>)>,
}

pub struct ProjectFile {
    pub hierarchy: Hierarchy,
    pub encoding: EncodingBlock,
    pub interp: Interpretation,
    pub program: Option<Fragment>,
    pub interface: Option<InterfaceSpec>,
}

fn err_at(line: usize, col: usize, expected: impl Into<String>) -> ParseError {
    ParseError {
        line,
        col,
        expected: expected.into(),
    }
}

struct RawOp {
    name: String,
    args: Vec<RawSpec>,
    result: RawSpec,
}

/// An interface position before arg/result roles are assigned.
struct RawSpec {
    kind: RawKind,
    line: usize,
    col: usize,
}

enum RawKind {
    Abst(String, Option<usize>),
    Conc(String),
    Same(usize),
    Plain(String),
}

struct RawInterface {
    signature: Option<String>,
    structure: Option<String>,
    type_name: Option<String>,
    unsafe_structure: Option<String>,
    base_type: Option<String>,
    ops: Vec<RawOp>,
    line: usize,
    col: usize,
}

pub fn parse_project(text: &str) -> Result<ProjectFile, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks);

    let mut sorts: Vec<String> = Vec::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut hierarchy_at: Option<(usize, usize)> = None;
    let mut encoding = EncodingBlock::default();
    let mut saw_encoding = false;
    let mut constants: Vec<(String, String, usize, usize)> = Vec::new();
    let mut saw_constants = false;
    let mut ops: Vec<(String, Vec<(String, String)>, usize, usize)> = Vec::new();
    let mut saw_ops = false;
    let mut delta: Vec<(String, String, String, usize, usize)> = Vec::new();
    let mut saw_delta = false;
    let mut program: Option<Fragment> = None;
    let mut interface: Option<RawInterface> = None;

    loop {
        if matches!(p.peek(), Token::Eof) {
            break;
        }
        let (line, col) = p.position();
        let name = p.ident("a block name")?;
        match name.as_str() {
            "hierarchy" => {
                if hierarchy_at.is_some() {
                    return Err(err_at(line, col, "at most one hierarchy block"));
                }
                hierarchy_at = Some((line, col));
                parse_hierarchy_block(&mut p, &mut sorts, &mut edges)?;
            }
            "encoding" => {
                if saw_encoding {
                    return Err(err_at(line, col, "at most one encoding block"));
                }
                saw_encoding = true;
                parse_encoding_block(&mut p, &mut encoding)?;
            }
            "constants" => {
                if saw_constants {
                    return Err(err_at(line, col, "at most one constants block"));
                }
                saw_constants = true;
                parse_constants_block(&mut p, &mut constants)?;
            }
            "ops" => {
                if saw_ops {
                    return Err(err_at(line, col, "at most one ops block"));
                }
                saw_ops = true;
                parse_ops_block(&mut p, &mut ops)?;
            }
            "delta" => {
                if saw_delta {
                    return Err(err_at(line, col, "at most one delta block"));
                }
                saw_delta = true;
                parse_delta_block(&mut p, &mut delta)?;
            }
            "program" => {
                if program.is_some() {
                    return Err(err_at(line, col, "at most one program block"));
                }
                program = Some(parse_program_block(&mut p, text)?);
            }
            "interface" => {
                if interface.is_some() {
                    return Err(err_at(line, col, "at most one interface block"));
                }
                interface = Some(parse_interface_block(&mut p, line, col)?);
            }
            other => {
                return Err(err_at(
                    line,
                    col,
                    format!(
                        "a block name (hierarchy, encoding, constants, ops, delta, \
                         program, interface), found '{other}'"
                    ),
                ));
            }
        }
    }
    p.expect_eof()?;

    let (hline, hcol) = hierarchy_at.ok_or_else(|| err_at(1, 1, "a hierarchy block"))?;
    let hierarchy = Hierarchy::new_poset(&sorts, &edges)
        .map_err(|e| err_at(hline, hcol, format!("a valid hierarchy: {e}")))?;

    // Resolution: every sort named outside the hierarchy block must exist,
    // and delta entries must mention declared operations and constants.
    for (sort, what) in encoding
        .positions
        .iter()
        .map(|(s, _)| (s, "positions"))
        .chain(encoding.labels.iter().map(|(s, _)| (s, "labels")))
    {
        if !hierarchy.contains(&Sort::new(sort.clone())) {
            return Err(err_at(
                hline,
                hcol,
                format!("{what} entry names undeclared sort '{sort}'"),
            ));
        }
    }
    let mut interp = Interpretation::new(hierarchy.clone());
    for (cname, sort, line, col) in &constants {
        interp
            .add_constant(cname, sort)
            .map_err(|e| err_at(*line, *col, format!("a declared sort: {e}")))?;
    }
    for (fname, rows, line, col) in &ops {
        let rows: Vec<(&str, &str)> = rows
            .iter()
            .map(|(d, c)| (d.as_str(), c.as_str()))
            .collect();
        interp
            .add_prim(fname, &rows)
            .map_err(|e| err_at(*line, *col, format!("declared sorts: {e}")))?;
    }
    for (fname, arg, result, line, col) in &delta {
        interp
            .add_delta(fname, arg, result)
            .map_err(|e| err_at(*line, *col, format!("declared names: {e}")))?;
    }
    let interface = match interface {
        Some(raw) => Some(resolve_interface(raw, &hierarchy)?),
        None => None,
    };

    Ok(ProjectFile {
        hierarchy,
        encoding,
        interp,
        program,
        interface,
    })
}

fn parse_hierarchy_block(
    p: &mut Parser,
    sorts: &mut Vec<String>,
    edges: &mut Vec<(String, String)>,
) -> Result<(), ParseError> {
    p.expect(&Token::LBrace)?;
    while !p.eat(&Token::RBrace) {
        let kw = p.ident("'sort' or '}'")?;
        if kw != "sort" {
            return Err(p.err("'sort'"));
        }
        let name = p.ident("a sort name")?;
        if p.eat(&Token::Lt) {
            loop {
                let upper = p.ident("a supertype name")?;
                edges.push((name.clone(), upper));
                if !p.eat(&Token::Comma) {
                    break;
                }
            }
        }
        p.expect(&Token::Semi)?;
        sorts.push(name);
    }
    Ok(())
}

fn number(p: &mut Parser, what: &str) -> Result<usize, ParseError> {
    match p.peek() {
        Token::Number(s) => {
            let n = s
                .parse::<usize>()
                .map_err(|_| p.err(format!("{what} in range")))?;
            p.advance();
            Ok(n)
        }
        _ => Err(p.err(what)),
    }
}

fn parse_encoding_block(p: &mut Parser, out: &mut EncodingBlock) -> Result<(), ParseError> {
    p.expect(&Token::LBrace)?;
    while !p.eat(&Token::RBrace) {
        let kw = p.ident("an encoding option")?;
        match kw.as_str() {
            "scheme" => {
                let name = p.ident("a scheme name")?;
                if !matches!(
                    name.as_str(),
                    "tree" | "powerset" | "embed" | "width" | "infinite"
                ) {
                    return Err(p.err(format!(
                        "one of tree, powerset, embed, width, infinite (found '{name}' value)"
                    )));
                }
                out.scheme = Some(name);
            }
            "ctor" => {
                let name = p.ident("a constructor policy")?;
                if name != "T" && name != "perSort" {
                    return Err(p.err("'T' or 'perSort'"));
                }
                out.ctor = Some(name);
            }
            "ground" => {
                out.ground = Some(number(p, "a position count")?);
            }
            "positions" => {
                let sort = p.ident("a sort name")?;
                p.expect(&Token::Eq)?;
                let mut nums = Vec::new();
                while matches!(p.peek(), Token::Number(_)) {
                    nums.push(number(p, "a position")?);
                }
                out.positions.push((sort, nums));
            }
            "labels" => {
                let sort = p.ident("a sort name")?;
                p.expect(&Token::Eq)?;
                let mut nums = Vec::new();
                while matches!(p.peek(), Token::Number(_)) {
                    nums.push(number(p, "a label")? as u32);
                }
                out.labels.push((sort, nums));
            }
            _ => {
                return Err(p.err(
                    "an encoding option (scheme, ctor, ground, positions, labels)",
                ));
            }
        }
        p.expect(&Token::Semi)?;
    }
    Ok(())
}

fn parse_constants_block(
    p: &mut Parser,
    out: &mut Vec<(String, String, usize, usize)>,
) -> Result<(), ParseError> {
    p.expect(&Token::LBrace)?;
    while !p.eat(&Token::RBrace) {
        let (line, col) = p.position();
        let name = p.ident("a constant name")?;
        p.expect(&Token::Colon)?;
        let sort = p.ident("a sort name")?;
        p.expect(&Token::Semi)?;
        out.push((name, sort, line, col));
    }
    Ok(())
}

fn parse_ops_block(
    p: &mut Parser,
    out: &mut Vec<(String, Vec<(String, String)>, usize, usize)>,
) -> Result<(), ParseError> {
    p.expect(&Token::LBrace)?;
    while !p.eat(&Token::RBrace) {
        let (line, col) = p.position();
        let name = p.ident("an operation name")?;
        p.expect(&Token::Colon)?;
        let mut rows = Vec::new();
        loop {
            let dom = p.ident("a domain sort")?;
            p.expect(&Token::Arrow)?;
            let cod = p.ident("a codomain sort")?;
            rows.push((dom, cod));
            if !p.eat(&Token::Pipe) {
                break;
            }
        }
        p.expect(&Token::Semi)?;
        out.push((name, rows, line, col));
    }
    Ok(())
}

fn parse_delta_block(
    p: &mut Parser,
    out: &mut Vec<(String, String, String, usize, usize)>,
) -> Result<(), ParseError> {
    p.expect(&Token::LBrace)?;
    while !p.eat(&Token::RBrace) {
        let (line, col) = p.position();
        let name = p.ident("an operation name")?;
        let arg = p.ident("a constant name")?;
        p.expect(&Token::Eq)?;
        let result = p.ident("a constant name")?;
        p.expect(&Token::Semi)?;
        out.push((name, arg, result, line, col));
    }
    Ok(())
}

/// The program block is captured verbatim; which calculus it belongs to
/// is only known at command time.
fn parse_program_block(p: &mut Parser, text: &str) -> Result<Fragment, ParseError> {
    p.expect(&Token::LBrace)?;
    let (line, col) = p.position();
    let start = p.offset();
    while !matches!(p.peek(), Token::RBrace | Token::Eof) {
        p.advance();
    }
    let end = p.offset();
    p.expect(&Token::RBrace)?;
    Ok(Fragment {
        text: text[start..end].to_string(),
        line,
        col,
    })
}

fn qualified_ident(p: &mut Parser, what: &str) -> Result<String, ParseError> {
    let mut name = p.ident(what)?;
    while p.eat(&Token::Dot) {
        name.push('.');
        name.push_str(&p.ident("a name after '.'")?);
    }
    Ok(name)
}

fn parse_spec(p: &mut Parser) -> Result<RawSpec, ParseError> {
    let (line, col) = p.position();
    let head = qualified_ident(p, "a type or an encoding spec")?;
    let kind = match head.as_str() {
        "abst" => {
            let sort = p.ident("a sort name")?;
            let group = if matches!(p.peek(), Token::Ident(s) if s == "as") {
                p.advance();
                Some(number(p, "a group number")?)
            } else {
                None
            };
            RawKind::Abst(sort, group)
        }
        "conc" => RawKind::Conc(p.ident("a sort name")?),
        "same" => RawKind::Same(number(p, "a group number")?),
        _ => RawKind::Plain(head),
    };
    Ok(RawSpec { kind, line, col })
}

fn parse_interface_block(
    p: &mut Parser,
    line: usize,
    col: usize,
) -> Result<RawInterface, ParseError> {
    let mut raw = RawInterface {
        signature: None,
        structure: None,
        type_name: None,
        unsafe_structure: None,
        base_type: None,
        ops: Vec::new(),
        line,
        col,
    };
    p.expect(&Token::LBrace)?;
    while !p.eat(&Token::RBrace) {
        let kw = p.ident("an interface item")?;
        match kw.as_str() {
            "signature" => raw.signature = Some(p.ident("a signature name")?),
            "structure" => raw.structure = Some(p.ident("a structure name")?),
            "type" => raw.type_name = Some(p.ident("a type name")?),
            "unsafe" => raw.unsafe_structure = Some(p.ident("a structure name")?),
            "base" => raw.base_type = Some(qualified_ident(p, "a type name")?),
            "op" => {
                let name = p.ident("an operation name")?;
                p.expect(&Token::Colon)?;
                let mut specs = vec![parse_spec(p)?];
                while p.eat(&Token::Star) {
                    specs.push(parse_spec(p)?);
                }
                let (args, result) = if p.eat(&Token::Arrow) {
                    (specs, parse_spec(p)?)
                } else if specs.len() == 1 {
                    (Vec::new(), specs.pop().unwrap())
                } else {
                    return Err(p.err("'->' before the result of a multi-argument op"));
                };
                raw.ops.push(RawOp { name, args, result });
            }
            _ => {
                return Err(p.err(
                    "an interface item (signature, structure, type, unsafe, base, op)",
                ));
            }
        }
        p.expect(&Token::Semi)?;
    }
    Ok(raw)
}

fn resolve_interface(raw: RawInterface, h: &Hierarchy) -> Result<InterfaceSpec, ParseError> {
    let missing = |what: &str| {
        err_at(
            raw.line,
            raw.col,
            format!("an interface block with a '{what}' item"),
        )
    };
    let check_sort = |name: &str, line: usize, col: usize| {
        if h.contains(&Sort::new(name)) {
            Ok(Sort::new(name))
        } else {
            Err(err_at(
                line,
                col,
                format!("a declared sort (found '{name}')"),
            ))
        }
    };
    let mut ops = Vec::new();
    for op in raw.ops {
        let mut args = Vec::new();
        for spec in op.args {
            let arg = match spec.kind {
                RawKind::Abst(sort, None) => ArgSpec::Abst(check_sort(&sort, spec.line, spec.col)?),
                RawKind::Abst(sort, Some(g)) => {
                    ArgSpec::AbstShared(check_sort(&sort, spec.line, spec.col)?, g)
                }
                RawKind::Plain(name) => ArgSpec::Plain(name),
                RawKind::Conc(_) | RawKind::Same(_) => {
                    return Err(err_at(
                        spec.line,
                        spec.col,
                        "an argument spec (abst <sort>, abst <sort> as <n>, or a plain type)",
                    ));
                }
            };
            args.push(arg);
        }
        let result = match op.result.kind {
            RawKind::Conc(sort) => {
                ResultSpec::Conc(check_sort(&sort, op.result.line, op.result.col)?)
            }
            RawKind::Same(g) => ResultSpec::SameAs(g),
            RawKind::Plain(name) => ResultSpec::Plain(name),
            RawKind::Abst(_, _) => {
                return Err(err_at(
                    op.result.line,
                    op.result.col,
                    "a result spec (conc <sort>, same <n>, or a plain type)",
                ));
            }
        };
        ops.push(OpSpec {
            name: op.name,
            args,
            result,
        });
    }
    Ok(InterfaceSpec {
        signature_name: raw.signature.ok_or_else(|| missing("signature"))?,
        structure_name: raw.structure.ok_or_else(|| missing("structure"))?,
        type_name: raw.type_name.ok_or_else(|| missing("type"))?,
        unsafe_structure: raw.unsafe_structure.ok_or_else(|| missing("unsafe"))?,
        base_type: raw.base_type.ok_or_else(|| missing("base"))?,
        ops,
    })
}

/// Errors from turning the encoding block plus command-line overrides into
/// a concrete scheme. Missing information is a usage problem; a failed
/// embedding or labeling law is a domain failure.
pub enum SchemeError {
    Usage(String),
    Domain(String),
}

/// Resolves the scheme named by the `--scheme` flag (if given) or the
/// encoding block, materializing embeddings and labelings.
pub fn build_scheme(
    project: &ProjectFile,
    scheme_flag: Option<&str>,
) -> Result<Scheme, SchemeError> {
    let name = scheme_flag
        .or(project.encoding.scheme.as_deref())
        .ok_or_else(|| {
            SchemeError::Usage(
                "no encoding scheme: add a 'scheme' line to the encoding block or pass --scheme"
                    .into(),
            )
        })?;
    let h = &project.hierarchy;
    match name {
        "tree" => Ok(Scheme::Tree),
        "powerset" => Ok(Scheme::Embedded(h.downset_embedding())),
        "embed" => {
            if project.encoding.positions.is_empty() {
                return Err(SchemeError::Usage(
                    "the embed scheme needs 'positions <sort> = ...' lines".into(),
                ));
            }
            let max_pos = project
                .encoding
                .positions
                .iter()
                .flat_map(|(_, v)| v.iter().copied())
                .max()
                .unwrap_or(0);
            let n = project.encoding.ground.unwrap_or(max_pos);
            if max_pos > n || max_pos == 0 && n == 0 {
                return Err(SchemeError::Usage(format!(
                    "positions run up to {max_pos} but the ground count is {n}"
                )));
            }
            let labels: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
            let label_refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
            let zero_based: Vec<(String, Vec<usize>)> = project
                .encoding
                .positions
                .iter()
                .map(|(s, v)| (s.clone(), v.iter().map(|p| p - 1).collect()))
                .collect();
            let map: Vec<(&str, &[usize])> = zero_based
                .iter()
                .map(|(s, v)| (s.as_str(), v.as_slice()))
                .collect();
            let embedding = manual_embedding(h, &label_refs, &map)
                .map_err(|e| SchemeError::Domain(e.to_string()))?;
            Ok(Scheme::Embedded(embedding))
        }
        "width" => {
            if project.encoding.labels.is_empty() {
                return Ok(Scheme::Width(None));
            }
            let labels: Vec<(Sort, Vec<u32>)> = project
                .encoding
                .labels
                .iter()
                .map(|(s, v)| (Sort::new(s.clone()), v.clone()))
                .collect();
            let labeling =
                WidthLabeling::new(labels).map_err(|e| SchemeError::Domain(e.to_string()))?;
            labeling
                .check(h)
                .map_err(|e| SchemeError::Domain(e.to_string()))?;
            Ok(Scheme::Width(Some(labeling)))
        }
        "infinite" => {
            if project.encoding.positions.is_empty() {
                return Err(SchemeError::Usage(
                    "the infinite scheme needs 'positions <sort> = ...' lines".into(),
                ));
            }
            let assignment: BTreeMap<Sort, Vec<usize>> = project
                .encoding
                .positions
                .iter()
                .map(|(s, v)| (Sort::new(s.clone()), v.clone()))
                .collect();
            Ok(Scheme::Infinite(assignment))
        }
        other => Err(SchemeError::Usage(format!("unknown scheme '{other}'"))),
    }
}

/// Resolves the constructor policy from the `--ctor` flag or the encoding
/// block; the single constructor `T` is the default.
pub fn build_config(project: &ProjectFile, ctor_flag: Option<&str>) -> SchemeConfig {
    match ctor_flag.or(project.encoding.ctor.as_deref()) {
        Some("perSort") => SchemeConfig {
            ctor: CtorPolicy::PerSort,
        },
        _ => SchemeConfig::default(),
    }
}
