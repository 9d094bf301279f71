//! Finite subtyping hierarchies: partially ordered sets of sorts with a
//! unique top and pairwise joins, plus order embeddings into powerset
//! lattices.
//!
//! Hierarchies are capped at 64 sorts so that up-sets and embedding images
//! fit in a `u64` bitmask.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

/// A sort (base type) name in a hierarchy.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sort(pub String);

impl Sort {
    pub fn new(name: impl Into<String>) -> Sort {
        Sort(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for Sort {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "Sort({})", self.0)
    }
}

impl From<&str> for Sort {
    fn from(s: &str) -> Sort {
        Sort::new(s)
    }
}

pub const MAX_SORTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HierarchyError {
    /// Two distinct sorts are mutually related; the declared edges are not
    /// antisymmetric.
    CycleDetected(Sort, Sort),
    /// No sort is an upper bound of every other sort; the two witnesses are
    /// maximal but unrelated.
    NoTop(Sort, Sort),
    /// The two sorts have no least upper bound.
    MissingJoin(Sort, Sort),
    /// A sort name was used that the hierarchy does not declare.
    UnknownSort(String),
    DuplicateSort(String),
    TooManySorts(usize),
    /// The stored order relation disagrees with the transitive closure of
    /// the declared edges (hand-built hierarchies only).
    InconsistentOrder(Sort, Sort),
    /// The candidate map is not an order embedding; the flag tells which
    /// direction of the iff failed for the witness pair.
    NotAnEmbedding {
        lhs: Sort,
        rhs: Sort,
        kind: EmbeddingViolation,
    },
    /// An embedding image refers to a ground-set position that does not
    /// exist, or two sorts share an image.
    BadEmbeddingImage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingViolation {
    /// lhs <= rhs in the hierarchy but map(lhs) is not a subset of map(rhs).
    OrderNotPreserved,
    /// map(lhs) is a subset of map(rhs) but lhs <= rhs does not hold.
    OrderNotReflected,
}

impl std::error::Error for HierarchyError {}

impl fmt::Display for HierarchyError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        use HierarchyError::*;
        match self {
            CycleDetected(a, b) => write!(f, "cycle detected: {a} and {b} are mutually related"),
            NoTop(a, b) => write!(f, "no top sort: {a} and {b} are both maximal"),
            MissingJoin(a, b) => write!(f, "sorts {a} and {b} have no least upper bound"),
            UnknownSort(n) => write!(f, "unknown sort {n}"),
            DuplicateSort(n) => write!(f, "duplicate sort {n}"),
            TooManySorts(n) => write!(f, "hierarchy has {n} sorts; at most {MAX_SORTS} supported"),
            InconsistentOrder(a, b) => write!(
                f,
                "stored order disagrees with edge closure at pair ({a}, {b})"
            ),
            NotAnEmbedding { lhs, rhs, kind } => match kind {
                EmbeddingViolation::OrderNotPreserved => write!(
                    f,
                    "not an embedding: {lhs} <= {rhs} but map({lhs}) is not a subset of map({rhs})"
                ),
                EmbeddingViolation::OrderNotReflected => write!(
                    f,
                    "not an embedding: map({lhs}) is a subset of map({rhs}) but {lhs} <= {rhs} fails"
                ),
            },
            BadEmbeddingImage(m) => write!(f, "bad embedding image: {m}"),
        }
    }
}

/// A finite subtyping hierarchy.
///
/// Stored as the declared immediate-supertype edges together with the
/// reflexive-transitive closure of the order, one `u64` up-set bitmask per
/// sort. The closure is recomputed from the edges by [`Hierarchy::validate`]
/// so hand-built values with an inconsistent order are caught.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    sorts: Vec<Sort>,
    index: HashMap<String, usize>,
    /// (child, parent) pairs: child <= parent, declared directly.
    edges: Vec<(usize, usize)>,
    /// up[i] bit j set iff sorts[i] <= sorts[j].
    up: Vec<u64>,
    top: usize,
}

impl Hierarchy {
    /// Builds a hierarchy from sort names and `(subtype, supertype)` edges,
    /// then validates every invariant including pairwise joins.
    pub fn new<S: Into<String> + Clone>(
        sorts: &[S],
        edges: &[(S, S)],
    ) -> Result<Hierarchy, HierarchyError> {
        let h = Hierarchy::assemble(sorts, edges)?;
        h.validate()?;
        Ok(h)
    }

    /// Builds a hierarchy validating only the order laws (antisymmetry and
    /// a unique top), not the existence of joins. Encoding derivation and
    /// respectfulness only ever query the order, so shapes like a crown
    /// (two incomparable sorts sharing two incomparable supertypes) are
    /// fine there even though they have no joins.
    pub fn new_poset<S: Into<String> + Clone>(
        sorts: &[S],
        edges: &[(S, S)],
    ) -> Result<Hierarchy, HierarchyError> {
        let h = Hierarchy::assemble(sorts, edges)?;
        h.validate_order()?;
        Ok(h)
    }

    fn assemble<S: Into<String> + Clone>(
        sorts: &[S],
        edges: &[(S, S)],
    ) -> Result<Hierarchy, HierarchyError> {
        let names: Vec<Sort> = sorts.iter().map(|s| Sort::new(s.clone())).collect();
        let mut index = HashMap::new();
        for (i, s) in names.iter().enumerate() {
            if index.insert(s.0.clone(), i).is_some() {
                return Err(HierarchyError::DuplicateSort(s.0.clone()));
            }
        }
        if names.len() > MAX_SORTS {
            return Err(HierarchyError::TooManySorts(names.len()));
        }
        let mut resolved = Vec::with_capacity(edges.len());
        for (c, p) in edges {
            let c: String = c.clone().into();
            let p: String = p.clone().into();
            let ci = *index.get(&c).ok_or(HierarchyError::UnknownSort(c))?;
            let pi = *index.get(&p).ok_or(HierarchyError::UnknownSort(p))?;
            resolved.push((ci, pi));
        }
        let up = close(names.len(), &resolved);
        let top = find_top(&names, &up)?;
        Ok(Hierarchy {
            sorts: names,
            index,
            edges: resolved,
            up,
            top,
        })
    }

    /// Builds a hierarchy from already-resolved parts without checking any
    /// poset law. Callers are expected to run [`Hierarchy::validate`]; this
    /// exists so that tests can exercise validation on broken inputs.
    pub fn from_parts(
        sorts: Vec<Sort>,
        edges: Vec<(usize, usize)>,
        up: Vec<u64>,
        top: usize,
    ) -> Hierarchy {
        let index = sorts
            .iter()
            .enumerate()
            .map(|(i, s)| (s.0.clone(), i))
            .collect();
        Hierarchy {
            sorts,
            index,
            edges,
            up,
            top,
        }
    }

    /// Checks every hierarchy invariant: the stored order is the closure of
    /// the declared edges, the order is antisymmetric, a unique top exists,
    /// and every pair of sorts has a join.
    pub fn validate(&self) -> Result<(), HierarchyError> {
        self.validate_order()?;
        let n = self.sorts.len();
        // Joins: every pair needs a unique minimal common upper bound.
        for a in 0..n {
            for b in (a + 1)..n {
                let common = (0..n)
                    .filter(|&u| bit(self.up[a], u) && bit(self.up[b], u))
                    .collect::<Vec<_>>();
                let minimal: Vec<usize> = common
                    .iter()
                    .copied()
                    .filter(|&u| {
                        common
                            .iter()
                            .all(|&v| v == u || !bit(self.up[v], u) || u == v)
                    })
                    .collect();
                if minimal.len() != 1 {
                    return Err(HierarchyError::MissingJoin(
                        self.sorts[a].clone(),
                        self.sorts[b].clone(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The join-free part of [`Hierarchy::validate`].
    pub fn validate_order(&self) -> Result<(), HierarchyError> {
        let n = self.sorts.len();
        if n > MAX_SORTS {
            return Err(HierarchyError::TooManySorts(n));
        }
        if n == 0 {
            return Err(HierarchyError::UnknownSort("<empty hierarchy>".into()));
        }
        let fresh = close(n, &self.edges);
        // Antisymmetry first: a cycle is reported as such, not as a closure
        // mismatch.
        for i in 0..n {
            for j in 0..n {
                if i != j && bit(fresh[i], j) && bit(fresh[j], i) {
                    return Err(HierarchyError::CycleDetected(
                        self.sorts[i].clone(),
                        self.sorts[j].clone(),
                    ));
                }
            }
        }
        for i in 0..n {
            if fresh[i] != self.up[i] {
                let j = (0..n)
                    .find(|&j| bit(fresh[i], j) != bit(self.up[i], j))
                    .unwrap();
                return Err(HierarchyError::InconsistentOrder(
                    self.sorts[i].clone(),
                    self.sorts[j].clone(),
                ));
            }
        }
        let top = find_top(&self.sorts, &self.up)?;
        if top != self.top {
            return Err(HierarchyError::InconsistentOrder(
                self.sorts[self.top].clone(),
                self.sorts[top].clone(),
            ));
        }
        Ok(())
    }

    pub fn sorts(&self) -> &[Sort] {
        &self.sorts
    }

    pub fn len(&self) -> usize {
        self.sorts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorts.is_empty()
    }

    pub fn top(&self) -> &Sort {
        &self.sorts[self.top]
    }

    pub fn contains(&self, s: &Sort) -> bool {
        self.index.contains_key(&s.0)
    }

    pub fn sort_index(&self, s: &Sort) -> Result<usize, HierarchyError> {
        self.index
            .get(&s.0)
            .copied()
            .ok_or_else(|| HierarchyError::UnknownSort(s.0.clone()))
    }

    /// Declared `(subtype, supertype)` edges, in declaration order.
    pub fn edges(&self) -> impl Iterator<Item = (&Sort, &Sort)> {
        self.edges
            .iter()
            .map(move |&(c, p)| (&self.sorts[c], &self.sorts[p]))
    }

    /// Immediate supertypes of `s` in declaration order.
    pub fn parents(&self, s: &Sort) -> Result<Vec<&Sort>, HierarchyError> {
        let i = self.sort_index(s)?;
        Ok(self
            .edges
            .iter()
            .filter(|&&(c, _)| c == i)
            .map(|&(_, p)| &self.sorts[p])
            .collect())
    }

    pub fn leq(&self, a: &Sort, b: &Sort) -> Result<bool, HierarchyError> {
        let i = self.sort_index(a)?;
        let j = self.sort_index(b)?;
        Ok(self.leq_idx(i, j))
    }

    pub(crate) fn leq_idx(&self, i: usize, j: usize) -> bool {
        bit(self.up[i], j)
    }

    /// The size of a largest antichain, computed as a minimum chain cover
    /// via bipartite matching on the strict order.
    pub fn width(&self) -> usize {
        let all: Vec<usize> = (0..self.sorts.len()).collect();
        self.width_of(&all)
    }

    fn width_of(&self, subset: &[usize]) -> usize {
        if subset.is_empty() {
            return 0;
        }
        subset.len() - self.matching_on(subset).iter().filter(|m| m.is_some()).count()
    }

    /// Maximum bipartite matching between left/right copies of `subset`,
    /// with an edge wherever the left sort is strictly below the right one
    /// (Kuhn's augmenting paths; fine at this scale). Returns, for each
    /// left position, the matched right position.
    fn matching_on(&self, subset: &[usize]) -> Vec<Option<usize>> {
        let k = subset.len();
        let mut match_left: Vec<Option<usize>> = vec![None; k];
        let mut match_right: Vec<Option<usize>> = vec![None; k];
        fn augment(
            u: usize,
            adj: &dyn Fn(usize, usize) -> bool,
            k: usize,
            seen: &mut [bool],
            match_left: &mut [Option<usize>],
            match_right: &mut [Option<usize>],
        ) -> bool {
            for v in 0..k {
                if adj(u, v) && !seen[v] {
                    seen[v] = true;
                    if match_right[v].is_none()
                        || augment(match_right[v].unwrap(), adj, k, seen, match_left, match_right)
                    {
                        match_left[u] = Some(v);
                        match_right[v] = Some(u);
                        return true;
                    }
                }
            }
            false
        }
        let adj = |u: usize, v: usize| {
            let (a, b) = (subset[u], subset[v]);
            a != b && self.leq_idx(a, b)
        };
        for u in 0..k {
            let mut seen = vec![false; k];
            augment(u, &adj, k, &mut seen, &mut match_left, &mut match_right);
        }
        match_left
    }

    /// Partitions the sorts into `width()` chains (each sorted from bottom
    /// to top), following the matched edges of the chain-cover matching.
    pub fn chain_partition(&self) -> Vec<Vec<Sort>> {
        let n = self.sorts.len();
        let all: Vec<usize> = (0..n).collect();
        let match_left = self.matching_on(&all);
        let mut has_pred = vec![false; n];
        for m in match_left.iter().flatten() {
            has_pred[*m] = true;
        }
        let mut chains = Vec::new();
        for start in 0..n {
            if has_pred[start] {
                continue;
            }
            let mut chain = vec![self.sorts[start].clone()];
            let mut cur = start;
            while let Some(next) = match_left[cur] {
                chain.push(self.sorts[next].clone());
                cur = next;
            }
            chains.push(chain);
        }
        chains
    }

    /// The lexicographically least maximum antichain, as a name-sorted list.
    ///
    /// Greedy over sort names: a sort joins the antichain when some maximum
    /// antichain extends the current prefix with it using only larger names,
    /// which is checked exactly by an induced-width computation.
    pub fn max_antichain(&self) -> Vec<Sort> {
        let n = self.sorts.len();
        let w = self.width();
        let mut by_name: Vec<usize> = (0..n).collect();
        by_name.sort_by(|&a, &b| self.sorts[a].0.cmp(&self.sorts[b].0));
        let mut chosen: Vec<usize> = Vec::new();
        for (pos, &cand) in by_name.iter().enumerate() {
            if chosen.len() == w {
                break;
            }
            let incomparable_to_chosen = chosen
                .iter()
                .all(|&c| !self.leq_idx(c, cand) && !self.leq_idx(cand, c));
            if !incomparable_to_chosen {
                continue;
            }
            let future: Vec<usize> = by_name[pos + 1..]
                .iter()
                .copied()
                .filter(|&f| {
                    chosen
                        .iter()
                        .chain(std::iter::once(&cand))
                        .all(|&c| !self.leq_idx(c, f) && !self.leq_idx(f, c))
                })
                .collect();
            if chosen.len() + 1 + self.width_of(&future) >= w {
                chosen.push(cand);
            }
        }
        debug_assert_eq!(chosen.len(), w);
        chosen.iter().map(|&i| self.sorts[i].clone()).collect()
    }

    /// The canonical embedding of the hierarchy into the powerset lattice
    /// over its own sorts: each sort maps to its down-set.
    pub fn downset_embedding(&self) -> Embedding {
        let n = self.sorts.len();
        let ground: Vec<String> = self.sorts.iter().map(|s| s.0.clone()).collect();
        let mut map = BTreeMap::new();
        for i in 0..n {
            let mut mask = 0u64;
            for j in 0..n {
                if self.leq_idx(j, i) {
                    mask |= 1 << j;
                }
            }
            map.insert(self.sorts[i].clone(), mask);
        }
        Embedding { ground, map }
    }
}

/// An order embedding of a hierarchy into the powerset lattice over a ground
/// set of labels: `a <= b` iff `map(a)` is a subset of `map(b)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Embedding {
    ground: Vec<String>,
    map: BTreeMap<Sort, u64>,
}

impl Embedding {
    pub fn ground(&self) -> &[String] {
        &self.ground
    }

    /// Image of `s` as a bitmask over ground-set positions.
    pub fn image(&self, s: &Sort) -> Result<u64, HierarchyError> {
        self.map
            .get(s)
            .copied()
            .ok_or_else(|| HierarchyError::UnknownSort(s.0.clone()))
    }

    /// Image of `s` as sorted ground-set positions (0-based).
    pub fn positions(&self, s: &Sort) -> Result<Vec<usize>, HierarchyError> {
        let mask = self.image(s)?;
        Ok((0..self.ground.len()).filter(|&i| bit(mask, i)).collect())
    }
}

/// Checks that a hand-supplied map is an order embedding of `h` into the
/// powerset lattice over `ground`, and wraps it up if so.
pub fn manual_embedding(
    h: &Hierarchy,
    ground: &[&str],
    map: &[(&str, &[usize])],
) -> Result<Embedding, HierarchyError> {
    if ground.len() > MAX_SORTS {
        return Err(HierarchyError::BadEmbeddingImage(format!(
            "ground set has {} labels; at most {MAX_SORTS} supported",
            ground.len()
        )));
    }
    let mut masks: BTreeMap<Sort, u64> = BTreeMap::new();
    for (name, positions) in map {
        let sort = Sort::new(*name);
        h.sort_index(&sort)?;
        let mut mask = 0u64;
        for &p in *positions {
            if p >= ground.len() {
                return Err(HierarchyError::BadEmbeddingImage(format!(
                    "sort {name} refers to position {p}, but the ground set has {} labels",
                    ground.len()
                )));
            }
            mask |= 1 << p;
        }
        if masks.insert(sort, mask).is_some() {
            return Err(HierarchyError::BadEmbeddingImage(format!(
                "sort {name} mapped twice"
            )));
        }
    }
    for s in h.sorts() {
        if !masks.contains_key(s) {
            return Err(HierarchyError::BadEmbeddingImage(format!(
                "sort {s} has no image"
            )));
        }
    }
    let mut seen: HashMap<u64, &Sort> = HashMap::new();
    for (s, m) in &masks {
        if let Some(other) = seen.insert(*m, s) {
            return Err(HierarchyError::BadEmbeddingImage(format!(
                "sorts {other} and {s} share an image"
            )));
        }
    }
    // The embedding iff, both directions, every ordered pair.
    for a in h.sorts() {
        for b in h.sorts() {
            let leq = h.leq(a, b).unwrap();
            let subset = masks[a] & !masks[b] == 0;
            if leq && !subset {
                return Err(HierarchyError::NotAnEmbedding {
                    lhs: a.clone(),
                    rhs: b.clone(),
                    kind: EmbeddingViolation::OrderNotPreserved,
                });
            }
            if subset && !leq {
                return Err(HierarchyError::NotAnEmbedding {
                    lhs: a.clone(),
                    rhs: b.clone(),
                    kind: EmbeddingViolation::OrderNotReflected,
                });
            }
        }
    }
    Ok(Embedding {
        ground: ground.iter().map(|g| g.to_string()).collect(),
        map: masks,
    })
}

fn bit(mask: u64, i: usize) -> bool {
    mask & (1 << i) != 0
}

/// Reflexive-transitive closure of the edge relation as up-set bitmasks.
fn close(n: usize, edges: &[(usize, usize)]) -> Vec<u64> {
    let mut up: Vec<u64> = (0..n).map(|i| 1 << i).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for &(c, p) in edges {
            let merged = up[c] | up[p];
            if merged != up[c] {
                up[c] = merged;
                changed = true;
            }
        }
    }
    up
}

fn find_top(sorts: &[Sort], up: &[u64]) -> Result<usize, HierarchyError> {
    let n = sorts.len();
    let maximal: Vec<usize> = (0..n)
        .filter(|&i| (0..n).all(|j| j == i || !bit(up[i], j)))
        .collect();
    match maximal.as_slice() {
        [t] => {
            // Unique maximal sort; it is the top only if everything is below it.
            for i in 0..n {
                if !bit(up[i], *t) {
                    return Err(HierarchyError::NoTop(sorts[i].clone(), sorts[*t].clone()));
                }
            }
            Ok(*t)
        }
        [a, b, ..] => Err(HierarchyError::NoTop(sorts[*a].clone(), sorts[*b].clone())),
        [] => Err(HierarchyError::CycleDetected(
            sorts[0].clone(),
            sorts[0].clone(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    /// Brute-force width by subset enumeration; only usable on small
    /// hierarchies, which is exactly what makes it a trustworthy oracle.
    fn brute_width(h: &Hierarchy) -> usize {
        let n = h.len();
        assert!(n <= 16, "oracle is exponential");
        let mut best = 0;
        for mask in 0u64..(1 << n) {
            let members: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            let antichain = members.iter().all(|&a| {
                members
                    .iter()
                    .all(|&b| a == b || (!h.leq_idx(a, b) && !h.leq_idx(b, a)))
            });
            if antichain {
                best = best.max(members.len());
            }
        }
        best
    }

    #[test]
    fn five_sort_tree_orders() {
        let h = fixtures::tree_five().hierarchy;
        assert_eq!(h.top().name(), "A");
        assert!(h.leq(&"D".into(), &"C".into()).unwrap());
        assert!(h.leq(&"D".into(), &"A".into()).unwrap());
        assert!(!h.leq(&"D".into(), &"B".into()).unwrap());
        assert!(!h.leq(&"B".into(), &"D".into()).unwrap());
        assert!(h.leq(&"E".into(), &"E".into()).unwrap());
        assert!(matches!(
            h.leq(&"Z".into(), &"A".into()),
            Err(HierarchyError::UnknownSort(_))
        ));
    }

    #[test]
    fn five_sort_tree_width_and_antichain() {
        let h = fixtures::tree_five().hierarchy;
        assert_eq!(h.width(), 3);
        assert_eq!(brute_width(&h), 3);
        let antichain: Vec<String> = h.max_antichain().iter().map(|s| s.0.clone()).collect();
        assert_eq!(antichain, ["B", "D", "E"]);
    }

    #[test]
    fn atom_hierarchy_width() {
        let h = fixtures::atom_five().hierarchy;
        assert_eq!(h.width(), 3);
        assert_eq!(brute_width(&h), 3);
        let antichain: Vec<String> = h.max_antichain().iter().map(|s| s.0.clone()).collect();
        // {bool, int, str} and {bool, nat, str} are both maximum; the
        // name-lexicographic rule picks int over nat.
        assert_eq!(antichain, ["bool", "int", "str"]);
    }

    #[test]
    fn crown_width_is_two() {
        let h = fixtures::crown().hierarchy;
        assert_eq!(h.width(), 2);
        assert_eq!(brute_width(&h), 2);
        assert_eq!(
            h.max_antichain()
                .iter()
                .map(|s| s.name().to_string())
                .collect::<Vec<_>>(),
            ["B", "C"]
        );
    }

    #[test]
    fn chain_partition_covers_with_width_chains() {
        for h in [
            fixtures::tree_five().hierarchy,
            fixtures::atom_five().hierarchy,
            fixtures::crown().hierarchy,
            fixtures::six_sort().hierarchy,
        ] {
            let chains = h.chain_partition();
            assert_eq!(chains.len(), h.width());
            let mut seen = std::collections::HashSet::new();
            for chain in &chains {
                for pair in chain.windows(2) {
                    assert!(h.leq(&pair[0], &pair[1]).unwrap());
                }
                for s in chain {
                    assert!(seen.insert(s.clone()));
                }
            }
            assert_eq!(seen.len(), h.len());
        }
    }

    #[test]
    fn cycle_is_detected() {
        let err = Hierarchy::new(&["a", "b"], &[("a", "b"), ("b", "a")]).unwrap_err();
        assert!(matches!(err, HierarchyError::CycleDetected(_, _)));
    }

    #[test]
    fn two_maximal_sorts_have_no_top() {
        let err = Hierarchy::new(&["a", "b", "c"], &[("c", "a"), ("c", "b")]).unwrap_err();
        assert!(matches!(err, HierarchyError::NoTop(_, _)));
    }

    #[test]
    fn diamond_without_join_is_rejected() {
        // d and e share two minimal upper bounds b and c.
        let err = Hierarchy::new(
            &["a", "b", "c", "d", "e"],
            &[
                ("b", "a"),
                ("c", "a"),
                ("d", "b"),
                ("d", "c"),
                ("e", "b"),
                ("e", "c"),
            ],
        )
        .unwrap_err();
        assert_eq!(
            err,
            HierarchyError::MissingJoin(Sort::new("d"), Sort::new("e"))
        );
    }

    #[test]
    fn crown_like_shape_with_joins_is_fine() {
        // Same shape as above plus a mid layer making joins unique.
        let h = Hierarchy::new(
            &["a", "b", "c", "m", "d", "e"],
            &[
                ("b", "a"),
                ("c", "a"),
                ("m", "b"),
                ("m", "c"),
                ("d", "m"),
                ("e", "m"),
            ],
        )
        .unwrap();
        assert_eq!(h.width(), 2);
    }

    #[test]
    fn validate_catches_hand_built_inconsistency() {
        let good = fixtures::tree_five().hierarchy;
        let mut up = (0..5).map(|i| 1u64 << i).collect::<Vec<_>>();
        // Claim B <= C even though no edge says so.
        up[1] |= 1 << 2;
        let bad = Hierarchy::from_parts(
            good.sorts().to_vec(),
            good.edges
                .clone(),
            up,
            0,
        );
        assert!(matches!(
            bad.validate(),
            Err(HierarchyError::InconsistentOrder(_, _))
        ));
    }

    #[test]
    fn sixty_five_sorts_is_too_many() {
        let names: Vec<String> = (0..65).map(|i| format!("s{i}")).collect();
        let edges: Vec<(String, String)> = (1..65).map(|i| (format!("s{i}"), "s0".into())).collect();
        let err = Hierarchy::new(&names, &edges).unwrap_err();
        assert_eq!(err, HierarchyError::TooManySorts(65));
    }

    #[test]
    fn downset_embedding_of_six_sort_hierarchy() {
        let h = fixtures::six_sort().hierarchy;
        let emb = h.downset_embedding();
        assert_eq!(emb.ground(), &["A", "B", "C", "D", "E", "F"]);
        let down = |s: &str| {
            emb.positions(&s.into())
                .unwrap()
                .iter()
                .map(|&i| emb.ground()[i].clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(down("A"), ["A", "B", "C", "D", "E", "F"]);
        assert_eq!(down("B"), ["B", "D", "F"]);
        assert_eq!(down("C"), ["C", "D", "E", "F"]);
        assert_eq!(down("D"), ["D", "F"]);
        assert_eq!(down("F"), ["F"]);
    }

    #[test]
    fn downset_embedding_always_passes_manual_check() {
        for h in [
            fixtures::tree_five().hierarchy,
            fixtures::atom_five().hierarchy,
            fixtures::crown().hierarchy,
            fixtures::six_sort().hierarchy,
            fixtures::sockets().hierarchy,
        ] {
            let emb = h.downset_embedding();
            let ground: Vec<&str> = emb.ground().iter().map(|g| g.as_str()).collect();
            let images: Vec<(&str, Vec<usize>)> = h
                .sorts()
                .iter()
                .map(|s| (s.name(), emb.positions(s).unwrap()))
                .collect();
            let borrowed: Vec<(&str, &[usize])> = images
                .iter()
                .map(|(n, p)| (*n, p.as_slice()))
                .collect();
            manual_embedding(&h, &ground, &borrowed).expect("down-set embedding must verify");
        }
    }

    #[test]
    fn six_sort_handwritten_embedding_verifies() {
        let fx = fixtures::six_sort();
        let emb = fx.embedding;
        assert_eq!(emb.positions(&"A".into()).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(emb.positions(&"F".into()).unwrap(), vec![1]);
    }

    #[test]
    fn swapped_images_are_not_an_embedding() {
        let h = fixtures::six_sort().hierarchy;
        let err = manual_embedding(
            &h,
            &["1", "2", "3", "4"],
            &[
                ("A", &[0, 1, 2, 3]),
                ("B", &[1, 2, 3]),
                ("C", &[0, 1, 2]),
                ("D", &[1, 2]),
                ("E", &[2, 3]),
                ("F", &[1]),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, HierarchyError::NotAnEmbedding { .. }));
    }
}
