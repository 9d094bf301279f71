//! Encoding schemes: deriving concrete/abstract phantom type pairs for a
//! hierarchy, extending encoded hierarchies with new sorts, and checking
//! respectfulness exhaustively.
//!
//! An encoding pair is respectful when the concrete encoding of one sort
//! matches the abstract encoding of another exactly when the first sort is
//! a subtype of the second. Every derivation here is double-checked by
//! [`check_respectful`], which tests all ordered pairs of sorts; nothing
//! relies on the constructions being correct by fiat.

use crate::hierarchy::{Embedding, Hierarchy, HierarchyError, Sort};
use crate::phantom::{
    con, match_one_sided, tuple, unify_general, var, FreshSupply, PhantomType, Unit,
};
use std::collections::BTreeMap;
use std::fmt;

/// Chooses the constructor names an encoding uses: one constructor per
/// sort (tree encodings, graft markers) or a single name everywhere (the
/// nesting marker of the tuple schemes; "T" makes encodings expressible in
/// the target calculus, "z" matches the classic datatype).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CtorPolicy {
    PerSort,
    Single(String),
}

impl Default for CtorPolicy {
    fn default() -> CtorPolicy {
        CtorPolicy::Single("T".into())
    }
}

impl CtorPolicy {
    fn marker(&self) -> Result<&str, EncodingError> {
        match self {
            // The tuple schemes need one marker constructor; per-sort
            // naming does not apply to them, so fall back to the
            // conventional name.
            CtorPolicy::PerSort => Ok("z"),
            CtorPolicy::Single(name) => {
                check_ctor_name(name)?;
                Ok(name)
            }
        }
    }

    fn sort_name<'a>(&'a self, sort: &'a Sort) -> Result<&'a str, EncodingError> {
        let name = match self {
            CtorPolicy::PerSort => sort.name(),
            CtorPolicy::Single(name) => name,
        };
        check_ctor_name(name)?;
        Ok(name)
    }
}

fn check_ctor_name(name: &str) -> Result<(), EncodingError> {
    let mut chars = name.chars();
    let ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'');
    if ok {
        Ok(())
    } else {
        Err(EncodingError::BadConstructorName(name.to_string()))
    }
}

/// Which family of encodings a pair was derived from; extensions are only
/// defined for some of them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    Tree,
    /// Tuple encodings indexed by subsets of a ground set, whether the
    /// hierarchy is itself a powerset lattice or embedded into one.
    Lattice,
    Width,
    /// The open-tailed tuple encoding of finite subsets of an infinite
    /// ground set; concrete encodings carry a free tail variable.
    Infinite,
}

/// How an encoding scheme is selected and parameterised.
#[derive(Clone, Debug)]
pub enum Scheme {
    /// Per-sort constructor chains along the paths of a tree hierarchy.
    Tree,
    /// Tuple encoding through an embedding into a powerset lattice. For a
    /// hierarchy that is itself a powerset lattice this is the identity
    /// embedding; the down-set embedding works for any hierarchy.
    Embedded(Embedding),
    /// Tuples sized by the hierarchy's width, with nesting depths taken
    /// from the labeling (computed when not supplied).
    Width(Option<WidthLabeling>),
    /// Open-tailed tuples over an infinite ground set; the map assigns
    /// each sort its finite subset (1-based positions).
    Infinite(BTreeMap<Sort, Vec<usize>>),
}

#[derive(Clone, Debug, Default)]
pub struct SchemeConfig {
    pub ctor: CtorPolicy,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EncodingError {
    NotATree(Sort),
    BadConstructorName(String),
    IndexOutOfRange(String),
    /// A labeling was constructed but failed the all-pairs check; the
    /// witness pair violates the iff property.
    WidthLabelingFailed(Sort, Sort),
    SchemeNotExtensible(String),
    UnknownSort(String),
    /// An extension produced a hierarchy or an encoding that does not hold
    /// together; carries the underlying reason.
    ExtensionFailed(String),
}

impl std::error::Error for EncodingError {}

impl fmt::Display for EncodingError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        use EncodingError::*;
        match self {
            NotATree(s) => write!(f, "sort {s} has more than one immediate supertype"),
            BadConstructorName(n) => write!(f, "bad constructor name {n:?}"),
            IndexOutOfRange(m) => write!(f, "index out of range: {m}"),
            WidthLabelingFailed(a, b) => {
                write!(f, "width labeling violates the order at pair ({a}, {b})")
            }
            SchemeNotExtensible(m) => write!(f, "scheme not extensible: {m}"),
            UnknownSort(n) => write!(f, "unknown sort {n}"),
            ExtensionFailed(m) => write!(f, "extension failed: {m}"),
        }
    }
}

impl From<HierarchyError> for EncodingError {
    fn from(e: HierarchyError) -> EncodingError {
        EncodingError::ExtensionFailed(e.to_string())
    }
}

/// A concrete/abstract encoding pair over the sorts of one hierarchy.
///
/// Concrete encodings are stored directly (they are ground for every
/// scheme except the infinite one, where they carry a tail variable).
/// Abstract encodings are stored as templates with canonical variable
/// names and instantiated with fresh variables at each use, so two uses
/// against one supply can never share a variable.
#[derive(Clone, Debug)]
pub struct EncodingPair {
    kind: SchemeKind,
    ctor: CtorPolicy,
    conc: BTreeMap<Sort, PhantomType>,
    abst: BTreeMap<Sort, PhantomType>,
}

impl EncodingPair {
    pub fn new(kind: SchemeKind, ctor: CtorPolicy) -> EncodingPair {
        EncodingPair {
            kind,
            ctor,
            conc: BTreeMap::new(),
            abst: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn sorts(&self) -> impl Iterator<Item = &Sort> {
        self.conc.keys()
    }

    /// The concrete encoding of a sort. Ground except in the infinite
    /// scheme, where the stored tail variable should be freshened with
    /// [`EncodingPair::conc_fresh`] before use.
    pub fn conc(&self, sort: &Sort) -> Option<&PhantomType> {
        self.conc.get(sort)
    }

    /// The concrete encoding with any variables (the infinite scheme's
    /// tail) renamed fresh.
    pub fn conc_fresh(&self, sort: &Sort, supply: &mut FreshSupply) -> Option<PhantomType> {
        self.conc.get(sort).map(|t| t.instantiate(supply, "a"))
    }

    /// The stored abstract template, with canonical variable names. Most
    /// callers want [`EncodingPair::abst`] instead.
    pub fn abst_template(&self, sort: &Sort) -> Option<&PhantomType> {
        self.abst.get(sort)
    }

    /// The abstract encoding of a sort, instantiated with fresh variables
    /// from the supply (hinted by `hint`).
    pub fn abst(&self, sort: &Sort, supply: &mut FreshSupply, hint: &str) -> Option<PhantomType> {
        self.abst.get(sort).map(|t| t.instantiate(supply, hint))
    }

    /// Installs or replaces the encodings of one sort. Extensions build on
    /// this; tests use it to inject faults.
    pub fn set_encoding(&mut self, sort: Sort, conc: PhantomType, abst_template: PhantomType) {
        self.conc.insert(sort.clone(), conc);
        self.abst.insert(sort, abst_template);
    }
}

/// Derives an encoding pair for the hierarchy with the selected scheme.
pub fn derive_encoding(
    h: &Hierarchy,
    scheme: &Scheme,
    cfg: &SchemeConfig,
) -> Result<EncodingPair, EncodingError> {
    match scheme {
        Scheme::Tree => encode_tree(h, cfg),
        Scheme::Embedded(emb) => encode_embedded(h, emb, cfg),
        Scheme::Width(Some(lab)) => encode_width(h, lab, cfg),
        Scheme::Width(None) => {
            let lab = width_labeling(h)?;
            encode_width(h, &lab, cfg)
        }
        Scheme::Infinite(assignment) => encode_infinite_powerset(h, assignment, cfg),
    }
}

/// Per-sort constructor chains: the concrete encoding of a sort is the
/// path of constructors from the top down to the sort, closed by `unit`;
/// the abstract encoding closes the path prefix with a variable instead.
pub fn encode_tree(h: &Hierarchy, cfg: &SchemeConfig) -> Result<EncodingPair, EncodingError> {
    let mut pair = EncodingPair::new(SchemeKind::Tree, cfg.ctor.clone());
    for sort in h.sorts() {
        let chain = path_to_top(h, sort, &cfg.ctor)?;
        let conc = chain
            .iter()
            .fold(Unit, |acc, name| con(name.clone(), acc));
        let abst = chain
            .iter()
            .fold(var("v"), |acc, name| con(name.clone(), acc));
        pair.set_encoding(sort.clone(), conc, abst);
    }
    Ok(pair)
}

/// Constructor names from `sort` up to the top, innermost first.
fn path_to_top(
    h: &Hierarchy,
    sort: &Sort,
    ctor: &CtorPolicy,
) -> Result<Vec<String>, EncodingError> {
    let mut chain = Vec::new();
    let mut cursor = sort.clone();
    loop {
        chain.push(ctor.sort_name(&cursor)?.to_string());
        if &cursor == h.top() {
            return Ok(chain);
        }
        let parents = h.parents(&cursor).map_err(|_| {
            EncodingError::UnknownSort(cursor.name().to_string())
        })?;
        match parents.as_slice() {
            [only] => cursor = (*only).clone(),
            _ => return Err(EncodingError::NotATree(cursor.clone())),
        }
    }
}

/// The tuple encoding of one subset of an `n`-element ground set:
/// position `i` holds `unit` (concretely) or a variable (abstractly) when
/// `i` is in the subset, and the same wrapped in the marker constructor
/// otherwise. Positions are 0-based here.
pub fn encode_powerset(
    n: usize,
    subset: &[usize],
    cfg: &SchemeConfig,
) -> Result<(PhantomType, PhantomType), EncodingError> {
    let marker = cfg.ctor.marker()?;
    if n == 0 {
        return Err(EncodingError::IndexOutOfRange(
            "ground set must not be empty".into(),
        ));
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= n) {
        return Err(EncodingError::IndexOutOfRange(format!(
            "position {bad} outside a {n}-element ground set"
        )));
    }
    let mut conc_parts = Vec::with_capacity(n);
    let mut abst_parts = Vec::with_capacity(n);
    for i in 0..n {
        let present = subset.contains(&i);
        let v = var(format!("a{}", i + 1));
        if present {
            conc_parts.push(Unit);
            abst_parts.push(v);
        } else {
            conc_parts.push(con(marker, Unit));
            abst_parts.push(con(marker, v));
        }
    }
    Ok((tuple(conc_parts), tuple(abst_parts)))
}

/// Encodes every sort through its image in a powerset lattice. When the
/// hierarchy is itself a powerset lattice the embedding is the identity;
/// otherwise respectfulness is inherited from the embedding being an
/// order embedding.
pub fn encode_embedded(
    h: &Hierarchy,
    emb: &Embedding,
    cfg: &SchemeConfig,
) -> Result<EncodingPair, EncodingError> {
    let n = emb.ground().len();
    let mut pair = EncodingPair::new(SchemeKind::Lattice, cfg.ctor.clone());
    for sort in h.sorts() {
        let positions = emb
            .positions(sort)
            .map_err(|_| EncodingError::UnknownSort(sort.name().to_string()))?;
        let (conc, abst) = encode_powerset(n, &positions, cfg)?;
        pair.set_encoding(sort.clone(), conc, abst);
    }
    Ok(pair)
}

/// A labeling of the sorts by vectors of `w` naturals such that the order
/// coincides with the componentwise reversed order of labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WidthLabeling {
    w: usize,
    labels: BTreeMap<Sort, Vec<u32>>,
}

impl WidthLabeling {
    /// Wraps explicit labels (an override to the computed construction).
    /// All vectors must have the same positive length.
    pub fn new(labels: Vec<(Sort, Vec<u32>)>) -> Result<WidthLabeling, EncodingError> {
        let w = labels.first().map(|(_, v)| v.len()).unwrap_or(0);
        if w == 0 {
            return Err(EncodingError::IndexOutOfRange(
                "labels must have positive length".into(),
            ));
        }
        let mut map = BTreeMap::new();
        for (s, v) in labels {
            if v.len() != w {
                return Err(EncodingError::IndexOutOfRange(format!(
                    "label for {s} has length {}, expected {w}",
                    v.len()
                )));
            }
            map.insert(s, v);
        }
        Ok(WidthLabeling { w, labels: map })
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn label(&self, sort: &Sort) -> Option<&[u32]> {
        self.labels.get(sort).map(|v| v.as_slice())
    }

    /// The all-pairs check: `x <= y` iff the label of `x` dominates the
    /// label of `y` componentwise. Returns the first violating pair.
    pub fn check(&self, h: &Hierarchy) -> Result<(), EncodingError> {
        for x in h.sorts() {
            for y in h.sorts() {
                let lx = self
                    .label(x)
                    .ok_or_else(|| EncodingError::UnknownSort(x.name().to_string()))?;
                let ly = self
                    .label(y)
                    .ok_or_else(|| EncodingError::UnknownSort(y.name().to_string()))?;
                let dominates = lx.iter().zip(ly).all(|(a, b)| a >= b);
                if dominates != h.leq(x, y).unwrap_or(false) {
                    return Err(EncodingError::WidthLabelingFailed(x.clone(), y.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Computes a labeling witnessing the hierarchy's width.
///
/// The sorts are partitioned into `w = width(h)` chains. For coordinate
/// `i`, the order is enlarged by placing every member of chain `i` below
/// everything it is incomparable to; the result is still a partial order
/// (two chain members forced below opposite ends of a comparable pair
/// would themselves be ordered), and the label is the longest-path depth
/// from the top in that enlarged order. Comparable sorts keep dominating
/// labels in every coordinate, and an incomparable pair is separated by
/// the coordinates of the chains containing its two sides.
///
/// The result is post-checked against the order; a violation is reported
/// rather than returned silently.
pub fn width_labeling(h: &Hierarchy) -> Result<WidthLabeling, EncodingError> {
    let n = h.len();
    let chains = h.chain_partition();
    let w = chains.len();
    let index = |s: &Sort| h.sort_index(s).expect("chain sorts come from h");
    let mut labels: BTreeMap<Sort, Vec<u32>> =
        h.sorts().iter().map(|s| (s.clone(), vec![0; w])).collect();
    for (coord, chain) in chains.iter().enumerate() {
        // above[x] lists everything strictly above x in the enlarged order.
        let mut above: Vec<Vec<usize>> = vec![Vec::new(); n];
        for a in 0..n {
            for b in 0..n {
                if a != b && h.leq_idx(a, b) {
                    above[a].push(b);
                }
            }
        }
        for c in chain {
            let ci = index(c);
            for x in 0..n {
                if x != ci && !h.leq_idx(ci, x) && !h.leq_idx(x, ci) {
                    above[ci].push(x);
                }
            }
        }
        // Longest-path depth from the maximal elements, memoised.
        let mut depth: Vec<Option<u32>> = vec![None; n];
        fn depth_of(x: usize, above: &[Vec<usize>], depth: &mut [Option<u32>]) -> u32 {
            if let Some(d) = depth[x] {
                return d;
            }
            // Mark before recursing; the enlarged order is acyclic, so a
            // revisit cannot happen on the recursion path.
            let d = above[x]
                .clone()
                .into_iter()
                .map(|u| depth_of(u, above, depth) + 1)
                .max()
                .unwrap_or(0);
            depth[x] = Some(d);
            d
        }
        for (i, sort) in h.sorts().iter().enumerate() {
            labels.get_mut(sort).unwrap()[coord] = depth_of(i, &above, &mut depth);
        }
    }
    let labeling = WidthLabeling { w, labels };
    labeling.check(h)?;
    Ok(labeling)
}

fn nest(marker: &str, depth: u32, core: PhantomType) -> PhantomType {
    let mut t = core;
    for _ in 0..depth {
        t = con(marker, t);
    }
    t
}

/// Width-sized tuples: coordinate `i` is the marker constructor nested to
/// the label's depth around `unit` (concrete) or a per-coordinate
/// variable (abstract).
pub fn encode_width(
    h: &Hierarchy,
    lab: &WidthLabeling,
    cfg: &SchemeConfig,
) -> Result<EncodingPair, EncodingError> {
    let marker = cfg.ctor.marker()?;
    let mut pair = EncodingPair::new(SchemeKind::Width, cfg.ctor.clone());
    for sort in h.sorts() {
        let label = lab
            .label(sort)
            .ok_or_else(|| EncodingError::UnknownSort(sort.name().to_string()))?;
        let conc = tuple(
            label
                .iter()
                .map(|&d| nest(marker, d, Unit))
                .collect(),
        );
        let abst = tuple(
            label
                .iter()
                .enumerate()
                .map(|(i, &d)| nest(marker, d, var(format!("a{}", i + 1))))
                .collect(),
        );
        pair.set_encoding(sort.clone(), conc, abst);
    }
    Ok(pair)
}

/// Open-tailed tuples for sorts assigned finite subsets of an infinite
/// ground set (1-based positions). Each sort's tuple stops at the least
/// index covering its subset: the concrete tail is a variable standing
/// for the rest of the encoding, the abstract tail is `unit`.
pub fn encode_infinite_powerset(
    h: &Hierarchy,
    assignment: &BTreeMap<Sort, Vec<usize>>,
    cfg: &SchemeConfig,
) -> Result<EncodingPair, EncodingError> {
    let marker = cfg.ctor.marker()?;
    let mut pair = EncodingPair::new(SchemeKind::Infinite, cfg.ctor.clone());
    for sort in h.sorts() {
        let subset = assignment
            .get(sort)
            .ok_or_else(|| EncodingError::UnknownSort(sort.name().to_string()))?;
        if subset.contains(&0) {
            return Err(EncodingError::IndexOutOfRange(
                "infinite scheme positions are 1-based".into(),
            ));
        }
        let n = subset.iter().copied().max().unwrap_or(0);
        let mut conc_parts = Vec::with_capacity(n + 1);
        let mut abst_parts = Vec::with_capacity(n + 1);
        for i in 1..=n {
            let present = subset.contains(&i);
            let v = var(format!("a{i}"));
            if present {
                conc_parts.push(Unit);
                abst_parts.push(v);
            } else {
                conc_parts.push(con(marker, Unit));
                abst_parts.push(con(marker, v));
            }
        }
        conc_parts.push(var("r"));
        abst_parts.push(Unit);
        pair.set_encoding(sort.clone(), tuple(conc_parts), tuple(abst_parts));
    }
    Ok(pair)
}

/// Adds `new` as a child of `parent` in a tree-encoded hierarchy. The
/// encodings of existing sorts are carried over untouched; the new sort
/// extends its parent's constructor chain by one constructor.
pub fn extend_tree(
    pair: &EncodingPair,
    h: &Hierarchy,
    new: &Sort,
    parent: &Sort,
) -> Result<(EncodingPair, Hierarchy), EncodingError> {
    if pair.kind != SchemeKind::Tree {
        return Err(EncodingError::SchemeNotExtensible(
            "adding a chain link needs a tree encoding".into(),
        ));
    }
    let extended = grow_hierarchy(h, new, parent)?;
    let name = pair.ctor.sort_name(new)?.to_string();
    let parent_conc = pair
        .conc(parent)
        .ok_or_else(|| EncodingError::UnknownSort(parent.name().to_string()))?;
    let parent_abst = pair
        .abst_template(parent)
        .ok_or_else(|| EncodingError::UnknownSort(parent.name().to_string()))?;
    // The parent's encodings close their chain with unit (concrete) or a
    // variable (abstract) innermost; wrap that closure in the new
    // constructor to go one level deeper.
    let conc = splice_innermost(parent_conc, &|inner| con(name.clone(), inner));
    let abst = splice_innermost(parent_abst, &|inner| con(name.clone(), inner));
    let mut out = pair.clone();
    out.set_encoding(new.clone(), conc, abst);
    Ok((out, extended))
}

/// Rebuilds a constructor chain with its innermost non-constructor part
/// replaced by `wrap` applied to it.
fn splice_innermost(t: &PhantomType, wrap: &dyn Fn(PhantomType) -> PhantomType) -> PhantomType {
    match t {
        PhantomType::Con(c, a) => con(c.clone(), splice_innermost(a, wrap)),
        other => wrap(other.clone()),
    }
}

fn grow_hierarchy(h: &Hierarchy, new: &Sort, parent: &Sort) -> Result<Hierarchy, EncodingError> {
    if !h.contains(parent) {
        return Err(EncodingError::UnknownSort(parent.name().to_string()));
    }
    if h.contains(new) {
        return Err(EncodingError::ExtensionFailed(format!(
            "sort {new} already exists"
        )));
    }
    let mut sorts: Vec<String> = h.sorts().iter().map(|s| s.name().to_string()).collect();
    sorts.push(new.name().to_string());
    let mut edges: Vec<(String, String)> = h
        .edges()
        .map(|(c, p)| (c.name().to_string(), p.name().to_string()))
        .collect();
    edges.push((new.name().to_string(), parent.name().to_string()));
    Ok(Hierarchy::new(&sorts, &edges)?)
}

/// Adds `new` below `parent` in a tuple-encoded hierarchy by marking the
/// parent's `unit` positions with a constructor named after the new sort:
/// concretely `unit N`, abstractly a fresh variable under `N` at those
/// positions and the usual marked variable elsewhere.
pub fn extend_powerset_sort(
    pair: &EncodingPair,
    h: &Hierarchy,
    new: &Sort,
    parent: &Sort,
) -> Result<(EncodingPair, Hierarchy), EncodingError> {
    if pair.kind != SchemeKind::Lattice {
        return Err(EncodingError::SchemeNotExtensible(
            "adding a sort below a tuple position needs a lattice encoding".into(),
        ));
    }
    let sub_h = Hierarchy::new(&[new.name()], &[])?;
    let sub_cfg = SchemeConfig {
        ctor: CtorPolicy::PerSort,
    };
    let sub_pair = encode_tree(&sub_h, &sub_cfg)?;
    extend_subhierarchy(pair, h, parent, &sub_h, &sub_pair)
}

/// Grafts a whole encoded hierarchy below `parent` of a tuple-encoded
/// hierarchy: each grafted sort places its own encoding at the parent's
/// `unit` positions (with position-distinct variables in the abstract
/// version) and a marked hole everywhere else.
pub fn extend_subhierarchy(
    pair: &EncodingPair,
    h: &Hierarchy,
    parent: &Sort,
    sub_h: &Hierarchy,
    sub_pair: &EncodingPair,
) -> Result<(EncodingPair, Hierarchy), EncodingError> {
    if pair.kind != SchemeKind::Lattice {
        return Err(EncodingError::SchemeNotExtensible(
            "grafting needs a lattice encoding on the host side".into(),
        ));
    }
    if sub_pair.kind == SchemeKind::Infinite {
        return Err(EncodingError::SchemeNotExtensible(
            "grafted encodings must have ground concrete types".into(),
        ));
    }
    let marker = pair.ctor.marker()?;
    let parent_conc = pair
        .conc(parent)
        .ok_or_else(|| EncodingError::UnknownSort(parent.name().to_string()))?;
    let slots = tuple_slots(parent_conc);

    // Extend the hierarchy: all of sub_h goes below parent.
    let mut sorts: Vec<String> = h.sorts().iter().map(|s| s.name().to_string()).collect();
    let mut edges: Vec<(String, String)> = h
        .edges()
        .map(|(c, p)| (c.name().to_string(), p.name().to_string()))
        .collect();
    for s in sub_h.sorts() {
        if h.contains(s) {
            return Err(EncodingError::ExtensionFailed(format!(
                "sort {s} exists on both sides of the graft"
            )));
        }
        sorts.push(s.name().to_string());
    }
    edges.extend(
        sub_h
            .edges()
            .map(|(c, p)| (c.name().to_string(), p.name().to_string())),
    );
    edges.push((sub_h.top().name().to_string(), parent.name().to_string()));
    let extended = Hierarchy::new(&sorts, &edges)?;

    let mut out = pair.clone();
    for s in sub_h.sorts() {
        let sub_conc = sub_pair
            .conc(s)
            .ok_or_else(|| EncodingError::UnknownSort(s.name().to_string()))?;
        if !sub_conc.is_closed() {
            return Err(EncodingError::SchemeNotExtensible(
                "grafted encodings must have ground concrete types".into(),
            ));
        }
        let sub_abst = sub_pair
            .abst_template(s)
            .ok_or_else(|| EncodingError::UnknownSort(s.name().to_string()))?;
        let mut conc_parts = Vec::with_capacity(slots.len());
        let mut abst_parts = Vec::with_capacity(slots.len());
        for (i, slot) in slots.iter().enumerate() {
            match slot {
                Slot::Present => {
                    conc_parts.push(sub_conc.clone());
                    // Variables must be distinct across positions so one
                    // instantiation cannot tie two positions together.
                    let renames: Vec<(String, PhantomType)> = sub_abst
                        .fv()
                        .into_iter()
                        .map(|v| {
                            let renamed = format!("p{}{v}", i + 1);
                            (v, var(renamed))
                        })
                        .collect();
                    abst_parts.push(sub_abst.substitute(&renames));
                }
                Slot::Absent => {
                    conc_parts.push(con(marker, Unit));
                    abst_parts.push(con(marker, var(format!("h{}", i + 1))));
                }
            }
        }
        out.set_encoding(s.clone(), tuple(conc_parts), tuple(abst_parts));
    }
    Ok((out, extended))
}

enum Slot {
    Present,
    Absent,
}

/// Reads the unit/marked shape off a stored tuple encoding: `unit`
/// components are the sort's positions, anything else is a marked hole.
fn tuple_slots(conc: &PhantomType) -> Vec<Slot> {
    let mut parts = Vec::new();
    let mut cursor = conc;
    while let PhantomType::Product(l, r) = cursor {
        parts.push(&**l);
        cursor = r;
    }
    parts.push(cursor);
    parts
        .into_iter()
        .map(|p| match p {
            Unit => Slot::Present,
            _ => Slot::Absent,
        })
        .collect()
}

/// Which way a non-respectful pair fails.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// The encodings match but the sorts are not ordered: the encoding
    /// admits more than the hierarchy allows.
    OverApproximates,
    /// The sorts are ordered but the encodings do not match.
    UnderApproximates,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub sigma1: Sort,
    pub sigma2: Sort,
    pub direction: Direction,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self.direction {
            Direction::OverApproximates => write!(
                f,
                "conc({}) matches abst({}) but {} <= {} does not hold",
                self.sigma1, self.sigma2, self.sigma1, self.sigma2
            ),
            Direction::UnderApproximates => write!(
                f,
                "{} <= {} holds but conc({}) does not match abst({})",
                self.sigma1, self.sigma2, self.sigma1, self.sigma2
            ),
        }
    }
}

/// The respectfulness oracle: for every ordered pair of sorts, the
/// concrete encoding of the first must match the abstract encoding of the
/// second exactly when the first is a subtype of the second. The infinite
/// scheme has open concrete encodings, so matching there is two-sided
/// unification of variable-disjoint instances.
pub fn check_respectful(pair: &EncodingPair, h: &Hierarchy) -> Result<(), Counterexample> {
    for s1 in h.sorts() {
        for s2 in h.sorts() {
            let mut supply = FreshSupply::new();
            let conc = pair
                .conc_fresh(s1, &mut supply)
                .expect("encoding covers every sort");
            let abst = pair
                .abst(s2, &mut supply, "b")
                .expect("encoding covers every sort");
            let matched = if pair.kind == SchemeKind::Infinite {
                unify_general(&conc, &abst).is_some()
            } else {
                match_one_sided(&abst, &conc).is_some()
            };
            let expected = h.leq(s1, s2).expect("sorts come from h");
            if matched != expected {
                return Err(Counterexample {
                    sigma1: s1.clone(),
                    sigma2: s2.clone(),
                    direction: if matched {
                        Direction::OverApproximates
                    } else {
                        Direction::UnderApproximates
                    },
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn zcfg() -> SchemeConfig {
        SchemeConfig {
            ctor: CtorPolicy::Single("z".into()),
        }
    }

    fn named() -> SchemeConfig {
        SchemeConfig {
            ctor: CtorPolicy::PerSort,
        }
    }

    fn show(t: &PhantomType) -> String {
        format!("{t}")
    }

    #[test]
    fn tree_encoding_matches_the_path_table() {
        let fx = fixtures::tree_five();
        let pair = encode_tree(&fx.hierarchy, &named()).unwrap();
        assert_eq!(show(pair.conc(&"A".into()).unwrap()), "unit A");
        assert_eq!(show(pair.conc(&"B".into()).unwrap()), "(unit B) A");
        assert_eq!(show(pair.conc(&"C".into()).unwrap()), "(unit C) A");
        assert_eq!(show(pair.conc(&"D".into()).unwrap()), "((unit D) C) A");
        assert_eq!(show(pair.conc(&"E".into()).unwrap()), "((unit E) C) A");
        let mut supply = FreshSupply::new();
        assert_eq!(
            show(&pair.abst(&"A".into(), &mut supply, "a").unwrap()),
            "'a1 A"
        );
        assert_eq!(
            show(&pair.abst(&"D".into(), &mut supply, "a").unwrap()),
            "(('a2 D) C) A"
        );
        check_respectful(&pair, &fx.hierarchy).unwrap();
    }

    #[test]
    fn atom_tree_with_named_ctors() {
        let fx = fixtures::atom_two();
        let pair = encode_tree(&fx.hierarchy, &named()).unwrap();
        assert_eq!(show(pair.conc(&"int".into()).unwrap()), "(unit int) atom");
        check_respectful(&pair, &fx.hierarchy).unwrap();
    }

    #[test]
    fn tree_encoding_needs_a_tree() {
        let fx = fixtures::six_sort();
        assert!(matches!(
            encode_tree(&fx.hierarchy, &named()),
            Err(EncodingError::NotATree(s)) if s.name() == "D"
        ));
    }

    #[test]
    fn powerset_subset_examples() {
        // {2} of {1,2,3,4}: 0-based position 1.
        let (conc, _) = encode_powerset(4, &[1], &zcfg()).unwrap();
        assert_eq!(show(&conc), "unit z * unit * unit z * unit z");
        let (_, abst) = encode_powerset(4, &[0, 1], &zcfg()).unwrap();
        let mut supply = FreshSupply::new();
        assert_eq!(
            show(&abst.instantiate(&mut supply, "a")),
            "'a1 * 'a2 * 'a3 z * 'a4 z"
        );
        let (conc, _) = encode_powerset(1, &[], &zcfg()).unwrap();
        assert_eq!(show(&conc), "unit z");
        assert!(matches!(
            encode_powerset(2, &[5], &zcfg()),
            Err(EncodingError::IndexOutOfRange(_))
        ));
    }

    #[test]
    fn powerset_lattice_encoding_is_respectful() {
        let fx = fixtures::powerset(4);
        let pair = encode_embedded(&fx.hierarchy, &fx.embedding, &zcfg()).unwrap();
        check_respectful(&pair, &fx.hierarchy).unwrap();
    }

    #[test]
    fn embedded_six_sort_table() {
        let fx = fixtures::six_sort();
        let pair = encode_embedded(&fx.hierarchy, &fx.embedding, &zcfg()).unwrap();
        assert_eq!(
            show(pair.conc(&"A".into()).unwrap()),
            "unit * unit * unit * unit"
        );
        assert_eq!(
            show(pair.conc(&"D".into()).unwrap()),
            "unit z * unit * unit * unit z"
        );
        assert_eq!(
            show(pair.conc(&"F".into()).unwrap()),
            "unit z * unit * unit z * unit z"
        );
        check_respectful(&pair, &fx.hierarchy).unwrap();
    }

    #[test]
    fn downset_embedding_encodes_any_fixture() {
        for fx in [
            fixtures::atom_five(),
            fixtures::six_sort(),
            fixtures::crown(),
            fixtures::sockets(),
        ] {
            let emb = fx.hierarchy.downset_embedding();
            let pair = encode_embedded(&fx.hierarchy, &emb, &zcfg()).unwrap();
            check_respectful(&pair, &fx.hierarchy).unwrap();
        }
    }

    fn handwritten_crown_labels() -> WidthLabeling {
        WidthLabeling::new(vec![
            ("A".into(), vec![0, 0]),
            ("B".into(), vec![1, 0]),
            ("C".into(), vec![0, 1]),
            ("D".into(), vec![2, 1]),
            ("E".into(), vec![1, 2]),
            ("F".into(), vec![3, 2]),
            ("G".into(), vec![2, 3]),
            ("H".into(), vec![3, 3]),
        ])
        .unwrap()
    }

    #[test]
    fn crown_override_labels_check_out() {
        let fx = fixtures::crown();
        handwritten_crown_labels().check(&fx.hierarchy).unwrap();
    }

    #[test]
    fn crown_width_table_is_reproduced() {
        let fx = fixtures::crown();
        let pair = encode_width(&fx.hierarchy, &handwritten_crown_labels(), &zcfg()).unwrap();
        let rows = [
            ("A", "unit * unit"),
            ("B", "unit z * unit"),
            ("C", "unit * unit z"),
            ("D", "(unit z) z * unit z"),
            ("E", "unit z * (unit z) z"),
            ("F", "((unit z) z) z * (unit z) z"),
            ("G", "(unit z) z * ((unit z) z) z"),
            ("H", "((unit z) z) z * ((unit z) z) z"),
        ];
        for (sort, expected) in rows {
            assert_eq!(show(pair.conc(&sort.into()).unwrap()), expected, "{sort}");
        }
        let mut supply = FreshSupply::new();
        assert_eq!(
            show(&pair.abst(&"D".into(), &mut supply, "a").unwrap()),
            "('a1 z) z * 'a2 z"
        );
        check_respectful(&pair, &fx.hierarchy).unwrap();
    }

    #[test]
    fn computed_labelings_pass_their_postcheck() {
        for fx in [
            fixtures::atom_five(),
            fixtures::tree_five(),
            fixtures::crown(),
            fixtures::six_sort(),
            fixtures::sockets(),
            fixtures::powerset(3),
            fixtures::prime_six(),
        ] {
            let lab = width_labeling(&fx.hierarchy).unwrap();
            assert_eq!(lab.width(), fx.hierarchy.width());
            let pair = encode_width(&fx.hierarchy, &lab, &zcfg()).unwrap();
            check_respectful(&pair, &fx.hierarchy).unwrap();
        }
    }

    #[test]
    fn chain_labeling_is_monotone() {
        let h = Hierarchy::new(&["t", "m", "b"], &[("m", "t"), ("b", "m")]).unwrap();
        let lab = width_labeling(&h).unwrap();
        assert_eq!(lab.width(), 1);
        assert_eq!(lab.label(&"t".into()).unwrap(), &[0]);
        let m = lab.label(&"m".into()).unwrap()[0];
        let b = lab.label(&"b".into()).unwrap()[0];
        assert!(b > m && m > 0);
    }

    /// A small deterministic generator for random posets: take a random
    /// DAG on n elements under a forced top, close transitively.
    fn random_poset(seed: u64, n: usize) -> Hierarchy {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let mut edges: Vec<(String, String)> = Vec::new();
        for i in 1..n {
            // Guarantee reachability of the top, then sprinkle extras.
            let upper = (next() as usize) % i;
            edges.push((names[i].clone(), names[upper].clone()));
            if next() % 3 == 0 && i >= 2 {
                let extra = (next() as usize) % i;
                if extra != upper {
                    edges.push((names[i].clone(), names[extra].clone()));
                }
            }
        }
        Hierarchy::new_poset(&names, &edges).expect("DAG toward s0 is a poset with top")
    }

    #[test]
    fn random_posets_get_valid_labelings() {
        for seed in 0..200 {
            let h = random_poset(seed, 8);
            let lab = width_labeling(&h).unwrap();
            lab.check(&h).unwrap();
            let pair = encode_width(&h, &lab, &zcfg()).unwrap();
            check_respectful(&pair, &h).unwrap();
        }
    }

    #[test]
    fn infinite_scheme_examples() {
        let h = fixtures::powerset(2).hierarchy;
        let assignment: BTreeMap<Sort, Vec<usize>> = [
            (Sort::new("x"), vec![]),
            (Sort::new("x1"), vec![1]),
            (Sort::new("x2"), vec![2]),
            (Sort::new("x12"), vec![1, 2]),
        ]
        .into_iter()
        .collect();
        let pair = encode_infinite_powerset(&h, &assignment, &zcfg()).unwrap();
        let mut supply = FreshSupply::new();
        assert_eq!(
            show(&pair.conc_fresh(&"x1".into(), &mut supply).unwrap()),
            "unit * 'a1"
        );
        assert_eq!(
            show(&pair.conc_fresh(&"x".into(), &mut supply).unwrap()),
            "'a2"
        );
        assert_eq!(
            show(&pair.conc_fresh(&"x2".into(), &mut supply).unwrap()),
            "unit z * unit * 'a3"
        );
        assert_eq!(
            show(&pair.abst(&"x12".into(), &mut supply, "a").unwrap()),
            "'a4 * 'a5 * unit"
        );
        check_respectful(&pair, &h).unwrap();
    }

    #[test]
    fn tree_extension_keeps_old_encodings() {
        let fx = fixtures::atom_two();
        let pair = encode_tree(&fx.hierarchy, &named()).unwrap();
        let (extended, h2) =
            extend_tree(&pair, &fx.hierarchy, &"str".into(), &"atom".into()).unwrap();
        assert_eq!(show(extended.conc(&"str".into()).unwrap()), "(unit str) atom");
        for s in fx.hierarchy.sorts() {
            assert_eq!(pair.conc(s), extended.conc(s));
            assert_eq!(pair.abst_template(s), extended.abst_template(s));
        }
        check_respectful(&extended, &h2).unwrap();
        // A child under a leaf goes one constructor deeper.
        let (extended, h3) = extend_tree(&extended, &h2, &"nat".into(), &"int".into()).unwrap();
        assert_eq!(
            show(extended.conc(&"nat".into()).unwrap()),
            "((unit nat) int) atom"
        );
        check_respectful(&extended, &h3).unwrap();
    }

    #[test]
    fn sibling_extensions_differ_innermost() {
        let fx = fixtures::tree_five();
        let pair = encode_tree(&fx.hierarchy, &named()).unwrap();
        let (pair, h2) = extend_tree(&pair, &fx.hierarchy, &"F".into(), &"C".into()).unwrap();
        let (pair, h3) = extend_tree(&pair, &h2, &"G".into(), &"C".into()).unwrap();
        assert_eq!(show(pair.conc(&"F".into()).unwrap()), "((unit F) C) A");
        assert_eq!(show(pair.conc(&"G".into()).unwrap()), "((unit G) C) A");
        check_respectful(&pair, &h3).unwrap();
    }

    #[test]
    fn single_sort_lattice_extension() {
        let fx = fixtures::six_sort();
        let pair = encode_embedded(&fx.hierarchy, &fx.embedding, &zcfg()).unwrap();
        let (extended, h2) =
            extend_powerset_sort(&pair, &fx.hierarchy, &"N".into(), &"D".into()).unwrap();
        assert_eq!(
            show(extended.conc(&"N".into()).unwrap()),
            "unit z * unit N * unit N * unit z"
        );
        for s in fx.hierarchy.sorts() {
            assert_eq!(pair.conc(s), extended.conc(s));
        }
        check_respectful(&extended, &h2).unwrap();
        // Under the top every position is marked with the new constructor.
        let (top_ext, h3) =
            extend_powerset_sort(&pair, &fx.hierarchy, &"M".into(), &"A".into()).unwrap();
        assert_eq!(
            show(top_ext.conc(&"M".into()).unwrap()),
            "unit M * unit M * unit M * unit M"
        );
        check_respectful(&top_ext, &h3).unwrap();
    }

    fn prime_labels() -> WidthLabeling {
        WidthLabeling::new(vec![
            ("Ap".into(), vec![0, 0]),
            ("Bp".into(), vec![0, 1]),
            ("Cp".into(), vec![1, 0]),
            ("Dp".into(), vec![0, 2]),
            ("Ep".into(), vec![1, 1]),
            ("Fp".into(), vec![2, 0]),
        ])
        .unwrap()
    }

    #[test]
    fn grafted_hierarchy_reproduces_the_extension_table() {
        let host = fixtures::six_sort();
        let host_pair = encode_embedded(&host.hierarchy, &host.embedding, &zcfg()).unwrap();
        let sub = fixtures::prime_six();
        prime_labels().check(&sub.hierarchy).unwrap();
        let sub_pair = encode_width(&sub.hierarchy, &prime_labels(), &zcfg()).unwrap();
        check_respectful(&sub_pair, &sub.hierarchy).unwrap();
        let (pair, grafted) = extend_subhierarchy(
            &host_pair,
            &host.hierarchy,
            &"D".into(),
            &sub.hierarchy,
            &sub_pair,
        )
        .unwrap();
        let rows = [
            ("Ap", "unit z * (unit * unit) * (unit * unit) * unit z"),
            ("Bp", "unit z * (unit * unit z) * (unit * unit z) * unit z"),
            ("Cp", "unit z * (unit z * unit) * (unit z * unit) * unit z"),
            (
                "Dp",
                "unit z * (unit * (unit z) z) * (unit * (unit z) z) * unit z",
            ),
            (
                "Ep",
                "unit z * (unit z * unit z) * (unit z * unit z) * unit z",
            ),
            (
                "Fp",
                "unit z * ((unit z) z * unit) * ((unit z) z * unit) * unit z",
            ),
        ];
        for (sort, expected) in rows {
            assert_eq!(show(pair.conc(&sort.into()).unwrap()), expected, "{sort}");
        }
        // Host encodings are untouched and the whole graft is respectful.
        for s in host.hierarchy.sorts() {
            assert_eq!(host_pair.conc(s), pair.conc(s));
        }
        assert!(grafted.leq(&"Ap".into(), &"D".into()).unwrap());
        assert!(!grafted.leq(&"Ap".into(), &"E".into()).unwrap());
        check_respectful(&pair, &grafted).unwrap();
    }

    #[test]
    fn singleton_graft_agrees_with_single_sort_extension() {
        let fx = fixtures::six_sort();
        let pair = encode_embedded(&fx.hierarchy, &fx.embedding, &zcfg()).unwrap();
        let (via_sort, _) =
            extend_powerset_sort(&pair, &fx.hierarchy, &"N".into(), &"D".into()).unwrap();
        let sub_h = Hierarchy::new(&["N"], &[] as &[(&str, &str)]).unwrap();
        let sub_pair = encode_tree(
            &sub_h,
            &SchemeConfig {
                ctor: CtorPolicy::PerSort,
            },
        )
        .unwrap();
        let (via_graft, _) =
            extend_subhierarchy(&pair, &fx.hierarchy, &"D".into(), &sub_h, &sub_pair).unwrap();
        assert_eq!(via_sort.conc(&"N".into()), via_graft.conc(&"N".into()));
        let mut s1 = FreshSupply::new();
        let mut s2 = FreshSupply::new();
        assert_eq!(
            via_sort.abst(&"N".into(), &mut s1, "a"),
            via_graft.abst(&"N".into(), &mut s2, "a")
        );
    }

    #[test]
    fn corrupted_encoding_is_caught_as_overapproximation() {
        let fx = fixtures::tree_five();
        let mut pair = encode_tree(&fx.hierarchy, &named()).unwrap();
        let conc_c = pair.conc(&"C".into()).unwrap().clone();
        let abst_c = pair.abst_template(&"C".into()).unwrap().clone();
        pair.set_encoding(Sort::new("B"), conc_c, abst_c);
        let err = check_respectful(&pair, &fx.hierarchy).unwrap_err();
        assert_eq!(
            err,
            Counterexample {
                sigma1: Sort::new("B"),
                sigma2: Sort::new("C"),
                direction: Direction::OverApproximates,
            }
        );
    }

    #[test]
    fn width_labeling_override_is_validated() {
        let fx = fixtures::crown();
        let bogus = WidthLabeling::new(vec![
            ("A".into(), vec![0, 0]),
            ("B".into(), vec![0, 0]),
            ("C".into(), vec![0, 1]),
            ("D".into(), vec![2, 1]),
            ("E".into(), vec![1, 2]),
            ("F".into(), vec![3, 2]),
            ("G".into(), vec![2, 3]),
            ("H".into(), vec![3, 3]),
        ])
        .unwrap();
        assert!(matches!(
            bogus.check(&fx.hierarchy),
            Err(EncodingError::WidthLabelingFailed(_, _))
        ));
    }

    #[test]
    fn abstract_instantiations_share_no_variables() {
        let fx = fixtures::six_sort();
        let pair = encode_embedded(&fx.hierarchy, &fx.embedding, &zcfg()).unwrap();
        let mut supply = FreshSupply::new();
        let one = pair.abst(&"A".into(), &mut supply, "a").unwrap();
        let two = pair.abst(&"A".into(), &mut supply, "a").unwrap();
        let fv1 = one.fv();
        assert!(two.fv().iter().all(|v| !fv1.contains(v)));
    }

    #[test]
    fn tree_conc_depth_tracks_path_length() {
        let fx = fixtures::tree_five();
        let pair = encode_tree(&fx.hierarchy, &named()).unwrap();
        for sort in fx.hierarchy.sorts() {
            let mut depth = 0;
            let mut cursor = pair.conc(sort).unwrap();
            while let PhantomType::Con(_, a) = cursor {
                depth += 1;
                cursor = a;
            }
            // Path from top to the sort, counting both endpoints.
            let mut len = 1;
            let mut here = sort.clone();
            while &here != fx.hierarchy.top() {
                here = fx.hierarchy.parents(&here).unwrap()[0].clone();
                len += 1;
            }
            assert_eq!(depth, len);
        }
    }
}
