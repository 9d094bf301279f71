//! Worked examples shared by unit tests, integration tests and benches:
//! small hierarchies with interpretation tables and embeddings.
//!
//! Everything here is deterministic and cheap to build, so fixtures are
//! returned by value and constructed fresh at each call.

use crate::hierarchy::{Embedding, Hierarchy};
use crate::source::Interpretation;

/// A hierarchy bundled with an interpretation over it and an embedding of
/// it into a powerset lattice. Fixtures without anything interesting to
/// say on one of these axes carry an empty interpretation or the down-set
/// embedding.
pub struct Fixture {
    pub hierarchy: Hierarchy,
    pub interp: Interpretation,
    pub embedding: Embedding,
}

fn plain(hierarchy: Hierarchy) -> Fixture {
    Fixture {
        embedding: hierarchy.downset_embedding(),
        interp: Interpretation::new(hierarchy.clone()),
        hierarchy,
    }
}

/// Three sorts: a base `atom` above `int` and `bool`.
pub fn atom_two() -> Fixture {
    let h = Hierarchy::new(&["atom", "int", "bool"], &[("int", "atom"), ("bool", "atom")])
        .unwrap();
    let mut interp = Interpretation::new(h.clone());
    interp.add_constant("ca", "atom").unwrap();
    interp.add_constant("ci", "int").unwrap();
    interp.add_constant("cb", "bool").unwrap();
    interp
        .add_prim("toInt", &[("atom", "int"), ("int", "int"), ("bool", "int")])
        .unwrap();
    interp.add_prim("neg", &[("bool", "bool")]).unwrap();
    for c in ["ca", "ci", "cb"] {
        interp.add_delta("toInt", c, "ci").unwrap();
    }
    interp.add_delta("neg", "cb", "cb").unwrap();
    Fixture {
        embedding: h.downset_embedding(),
        hierarchy: h,
        interp,
    }
}

/// The five-sort atom hierarchy: `atom` above `int`, `bool` and `str`,
/// with `nat` below `int`. Comes with the `double`/`toString` tables.
pub fn atom_five() -> Fixture {
    let h = Hierarchy::new(
        &["atom", "int", "nat", "bool", "str"],
        &[
            ("int", "atom"),
            ("nat", "int"),
            ("bool", "atom"),
            ("str", "atom"),
        ],
    )
    .unwrap();
    let mut interp = Interpretation::new(h.clone());
    interp.add_constant("ca", "atom").unwrap();
    interp.add_constant("cb", "bool").unwrap();
    interp.add_constant("ci", "int").unwrap();
    interp.add_constant("cj", "int").unwrap();
    interp.add_constant("cm", "nat").unwrap();
    interp.add_constant("cn", "nat").unwrap();
    interp.add_constant("cs", "str").unwrap();
    interp
        .add_prim("double", &[("int", "int"), ("nat", "nat")])
        .unwrap();
    interp
        .add_prim(
            "toString",
            &[
                ("atom", "str"),
                ("int", "str"),
                ("nat", "str"),
                ("bool", "str"),
                ("str", "str"),
            ],
        )
        .unwrap();
    interp.add_delta("double", "ci", "cj").unwrap();
    interp.add_delta("double", "cj", "ci").unwrap();
    interp.add_delta("double", "cm", "cn").unwrap();
    interp.add_delta("double", "cn", "cm").unwrap();
    for c in ["ca", "cb", "ci", "cj", "cm", "cn", "cs"] {
        interp.add_delta("toString", c, "cs").unwrap();
    }
    Fixture {
        embedding: h.downset_embedding(),
        hierarchy: h,
        interp,
    }
}

/// [`atom_five`] plus a `conj` primitive whose table claims an
/// `int -> bool` row that the reduction function does not honour. Used to
/// exercise stuck evaluation and the table soundness sweep.
pub fn atom_five_unsound() -> Fixture {
    let mut fx = atom_five();
    fx.interp
        .add_prim("conj", &[("bool", "bool"), ("int", "bool")])
        .unwrap();
    fx.interp.add_delta("conj", "cb", "cb").unwrap();
    fx
}

/// The five-sort tree: `A` above `B` and `C`, with `D` and `E` below `C`.
pub fn tree_five() -> Fixture {
    plain(
        Hierarchy::new(
            &["A", "B", "C", "D", "E"],
            &[("B", "A"), ("C", "A"), ("D", "C"), ("E", "C")],
        )
        .unwrap(),
    )
}

/// Sockets: `sock` above `udp` and `tcp`, with a couple of handles and
/// per-kind operations.
pub fn sockets() -> Fixture {
    let h = Hierarchy::new(&["sock", "udp", "tcp"], &[("udp", "sock"), ("tcp", "sock")])
        .unwrap();
    let mut interp = Interpretation::new(h.clone());
    interp.add_constant("u1", "udp").unwrap();
    interp.add_constant("t1", "tcp").unwrap();
    interp.add_constant("s0", "sock").unwrap();
    interp
        .add_prim("reopen", &[("udp", "udp"), ("tcp", "tcp")])
        .unwrap();
    interp
        .add_prim(
            "identify",
            &[("udp", "sock"), ("tcp", "sock"), ("sock", "sock")],
        )
        .unwrap();
    interp.add_delta("reopen", "u1", "u1").unwrap();
    interp.add_delta("reopen", "t1", "t1").unwrap();
    for c in ["u1", "t1", "s0"] {
        interp.add_delta("identify", c, "s0").unwrap();
    }
    Fixture {
        embedding: h.downset_embedding(),
        hierarchy: h,
        interp,
    }
}

/// Six sorts with a join element: `A` above `B` and `C`, `D` below both
/// `B` and `C`, `E` below `C`, `F` below `D`. Bundled with its embedding
/// into the powerset lattice of {1,2,3,4}.
pub fn six_sort() -> Fixture {
    let h = Hierarchy::new(
        &["A", "B", "C", "D", "E", "F"],
        &[
            ("B", "A"),
            ("C", "A"),
            ("D", "B"),
            ("D", "C"),
            ("E", "C"),
            ("F", "D"),
        ],
    )
    .unwrap();
    let embedding = crate::hierarchy::manual_embedding(
        &h,
        &["1", "2", "3", "4"],
        &[
            ("A", &[0, 1, 2, 3]),
            ("B", &[0, 1, 2]),
            ("C", &[1, 2, 3]),
            ("D", &[1, 2]),
            ("E", &[2, 3]),
            ("F", &[1]),
        ],
    )
    .unwrap();
    Fixture {
        interp: Interpretation::new(h.clone()),
        hierarchy: h,
        embedding,
    }
}

/// An eight-sort crown: pairs (B,C), (D,E), (F,G) are incomparable, each
/// element of a pair sits above both elements of the pair below, and H is
/// the bottom. Width 2, but no joins (D and E have two minimal upper
/// bounds), so this one is built as a plain poset.
pub fn crown() -> Fixture {
    let h = Hierarchy::new_poset(
        &["A", "B", "C", "D", "E", "F", "G", "H"],
        &[
            ("B", "A"),
            ("C", "A"),
            ("D", "B"),
            ("D", "C"),
            ("E", "B"),
            ("E", "C"),
            ("F", "D"),
            ("F", "E"),
            ("G", "D"),
            ("G", "E"),
            ("H", "F"),
            ("H", "G"),
        ],
    )
    .unwrap();
    plain(h)
}

/// The six-sort sub-hierarchy used to exercise grafting one hierarchy
/// below a sort of another: `Ap` above `Bp` and `Cp`, `Dp` and `Ep` below
/// `Bp`, `Ep` and `Fp` below `Cp`. Width 2.
pub fn prime_six() -> Fixture {
    plain(
        Hierarchy::new(
            &["Ap", "Bp", "Cp", "Dp", "Ep", "Fp"],
            &[
                ("Bp", "Ap"),
                ("Cp", "Ap"),
                ("Dp", "Bp"),
                ("Ep", "Bp"),
                ("Ep", "Cp"),
                ("Fp", "Cp"),
            ],
        )
        .unwrap(),
    )
}

/// The powerset lattice of {1..n} as a hierarchy. The sort for a subset
/// is named `x` followed by the member digits in ascending order (the
/// empty set is plain `x`), so the top of `powerset(3)` is `x123`.
pub fn powerset(n: u32) -> Fixture {
    assert!((1..=6).contains(&n), "2^n sorts must stay within the cap");
    let name = |mask: u32| {
        let mut s = String::from("x");
        for i in 0..n {
            if mask & (1 << i) != 0 {
                s.push_str(&(i + 1).to_string());
            }
        }
        s
    };
    let sorts: Vec<String> = (0..1u32 << n).map(name).collect();
    let mut edges = Vec::new();
    for mask in 0..1u32 << n {
        for i in 0..n {
            if mask & (1 << i) == 0 {
                // Covering edge: adding one element goes up the lattice.
                edges.push((name(mask), name(mask | (1 << i))));
            }
        }
    }
    let h = Hierarchy::new(&sorts, &edges).unwrap();
    // The identity embedding: each subset is its own image.
    let ground: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    let ground_refs: Vec<&str> = ground.iter().map(|s| s.as_str()).collect();
    let images: Vec<(String, Vec<usize>)> = (0..1u32 << n)
        .map(|mask| {
            (
                name(mask),
                (0..n as usize).filter(|i| mask & (1 << i) != 0).collect(),
            )
        })
        .collect();
    let image_refs: Vec<(&str, &[usize])> = images
        .iter()
        .map(|(s, v)| (s.as_str(), v.as_slice()))
        .collect();
    let embedding = crate::hierarchy::manual_embedding(&h, &ground_refs, &image_refs).unwrap();
    Fixture {
        interp: Interpretation::new(h.clone()),
        hierarchy: h,
        embedding,
    }
}
