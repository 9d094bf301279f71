//! Shared helpers for the integration suites: a small deterministic RNG,
//! a random poset generator, and goal-directed generators that produce
//! well-typed closed programs for both calculi. Generated programs are
//! always typed at an inhabited base sort so evaluation ends in a
//! constant.

use phantomenc::hierarchy::{Hierarchy, Sort};
use phantomenc::phantom::PhantomType;
use phantomenc::source::{Interpretation, SourceTerm, SourceType};
use phantomenc::target::{TargetInterpretation, TargetTerm};
use std::collections::BTreeMap;

/// xorshift64*; deterministic and seedable, which keeps every suite
/// reproducible without pulling in an RNG crate for tests.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng(seed.wrapping_mul(0x9e3779b97f4a7c15) | 1)
    }

    pub fn next(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0.wrapping_mul(0x2545f4914f6cdd1d)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }
}

/// A random DAG on `n` elements where element 0 dominates everything,
/// closed into a poset-with-top.
pub fn random_poset(rng: &mut Rng, n: usize) -> Hierarchy {
    let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let mut edges: Vec<(String, String)> = Vec::new();
    for i in 1..n {
        let upper = rng.below(i);
        edges.push((names[i].clone(), names[upper].clone()));
        if i >= 2 && rng.below(3) == 0 {
            let extra = rng.below(i);
            if extra != upper {
                edges.push((names[i].clone(), names[extra].clone()));
            }
        }
    }
    Hierarchy::new_poset(&names, &edges).expect("a DAG toward s0 is a poset with a top")
}

/// Facts precomputed from an interpretation that guide generation: which
/// sorts have constants, which primitive rows can produce a goal sort,
/// and which polymorphic wrappers are admissible.
pub struct SourceGen<'a> {
    interp: &'a Interpretation,
    inhabited: Vec<Sort>,
    consts_by_sort: BTreeMap<Sort, Vec<String>>,
    /// (prim, domain, codomain) rows whose domain sort has constants.
    usable_rows: Vec<(String, Sort, Sort)>,
    /// prims whose rows all share one codomain; safe to use unascribed.
    uniform: Vec<(String, Vec<Sort>, Sort)>,
    /// (prim, bound): every sort below the bound has a diagonal row.
    diagonal_wrappers: Vec<(String, Sort)>,
    /// (prim, bound, codomain): every sort below the bound maps to the
    /// same codomain.
    constant_wrappers: Vec<(String, Sort, Sort)>,
    counter: usize,
}

impl<'a> SourceGen<'a> {
    pub fn new(interp: &'a Interpretation) -> SourceGen<'a> {
        let h = interp.hierarchy();
        let mut consts_by_sort: BTreeMap<Sort, Vec<String>> = BTreeMap::new();
        for (name, sort) in interp.constants() {
            consts_by_sort
                .entry(sort.clone())
                .or_default()
                .push(name.clone());
        }
        let inhabited: Vec<Sort> = consts_by_sort.keys().cloned().collect();
        let mut usable_rows = Vec::new();
        let mut uniform = Vec::new();
        let mut diagonal_wrappers = Vec::new();
        let mut constant_wrappers = Vec::new();
        for (prim, rows) in interp.prims() {
            for (dom, cod) in rows {
                if consts_by_sort.contains_key(dom) {
                    usable_rows.push((prim.clone(), dom.clone(), cod.clone()));
                }
            }
            let cods: Vec<&Sort> = rows.iter().map(|(_, c)| c).collect();
            if let Some(first) = cods.first() {
                if cods.iter().all(|c| c == first) {
                    uniform.push((
                        prim.clone(),
                        rows.iter()
                            .map(|(d, _)| d.clone())
                            .filter(|d| consts_by_sort.contains_key(d))
                            .collect(),
                        (*first).clone(),
                    ));
                }
            }
            for bound in h.sorts() {
                let below: Vec<&Sort> = h
                    .sorts()
                    .iter()
                    .filter(|s| h.leq(s, bound).unwrap())
                    .collect();
                if below
                    .iter()
                    .all(|s| rows.iter().any(|(d, c)| d == *s && c == *s))
                {
                    diagonal_wrappers.push((prim.clone(), bound.clone()));
                }
                for cod in h.sorts() {
                    if below
                        .iter()
                        .all(|s| rows.iter().any(|(d, c)| d == *s && c == cod))
                    {
                        constant_wrappers.push((prim.clone(), bound.clone(), cod.clone()));
                    }
                }
            }
        }
        SourceGen {
            interp,
            inhabited,
            consts_by_sort,
            usable_rows,
            uniform,
            diagonal_wrappers,
            constant_wrappers,
            counter: 0,
        }
    }

    pub fn has_material(&self) -> bool {
        !self.inhabited.is_empty()
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{}", self.counter)
    }

    /// A random inhabited sort to use as a program type.
    pub fn goal(&self, rng: &mut Rng) -> Sort {
        self.inhabited[rng.below(self.inhabited.len())].clone()
    }

    /// A closed, well-typed program of type `Base(goal)`.
    pub fn program(&mut self, rng: &mut Rng, goal: &Sort, depth: usize) -> SourceTerm {
        let mut env = Vec::new();
        self.term(rng, goal, &mut env, depth)
    }

    fn constant_of(&self, rng: &mut Rng, sort: &Sort) -> SourceTerm {
        let pool = &self.consts_by_sort[sort];
        SourceTerm::Const(pool[rng.below(pool.len())].clone())
    }

    fn term(
        &mut self,
        rng: &mut Rng,
        goal: &Sort,
        env: &mut Vec<(String, Sort)>,
        depth: usize,
    ) -> SourceTerm {
        let h = self.interp.hierarchy().clone();
        let vars: Vec<String> = env
            .iter()
            .filter(|(_, s)| s == goal)
            .map(|(x, _)| x.clone())
            .collect();
        if depth == 0 {
            if !vars.is_empty() && rng.below(2) == 0 {
                return SourceTerm::Var(vars[rng.below(vars.len())].clone());
            }
            return self.constant_of(rng, goal);
        }
        let rows: Vec<(String, Sort)> = self
            .usable_rows
            .iter()
            .filter(|(_, _, c)| c == goal)
            .map(|(f, d, _)| (f.clone(), d.clone()))
            .collect();
        let uniform: Vec<(String, Vec<Sort>)> = self
            .uniform
            .iter()
            .filter(|(_, doms, c)| c == goal && !doms.is_empty())
            .map(|(f, doms, _)| (f.clone(), doms.clone()))
            .collect();
        let diags: Vec<String> = self
            .diagonal_wrappers
            .iter()
            .filter(|(_, b)| h.leq(goal, b).unwrap())
            .map(|(f, _)| f.clone())
            .collect();
        let consts: Vec<(String, Sort, Sort)> = self
            .constant_wrappers
            .iter()
            .filter(|(_, b, c)| {
                c == goal
                    && self
                        .inhabited
                        .iter()
                        .any(|s| h.leq(s, b).unwrap())
            })
            .cloned()
            .collect();
        loop {
            match rng.below(9) {
                0 => return self.constant_of(rng, goal),
                1 if !vars.is_empty() => {
                    return SourceTerm::Var(vars[rng.below(vars.len())].clone());
                }
                // Ascribed primitive application at a ground row.
                2 if !rows.is_empty() => {
                    let (f, d) = rows[rng.below(rows.len())].clone();
                    let arg = self.term(rng, &d, env, depth - 1);
                    return SourceTerm::App(
                        Box::new(SourceTerm::Prim(
                            f,
                            Some((SourceType::Base(d), SourceType::Base(goal.clone()))),
                        )),
                        Box::new(arg),
                    );
                }
                // Bare primitive where every row returns the same sort.
                3 if !uniform.is_empty() => {
                    let (f, doms) = uniform[rng.below(uniform.len())].clone();
                    let d = doms[rng.below(doms.len())].clone();
                    let arg = self.term(rng, &d, env, depth - 1);
                    return SourceTerm::App(
                        Box::new(SourceTerm::Prim(f, None)),
                        Box::new(arg),
                    );
                }
                // Beta redex through an inhabited domain.
                4 => {
                    let d = self.goal(rng);
                    let x = self.fresh("x");
                    env.push((x.clone(), d.clone()));
                    let body = self.term(rng, goal, env, depth - 1);
                    env.pop();
                    let arg = self.term(rng, &d, env, depth - 1);
                    return SourceTerm::App(
                        Box::new(SourceTerm::Lam(x, SourceType::Base(d), Box::new(body))),
                        Box::new(arg),
                    );
                }
                // Monomorphic let.
                5 => {
                    let d = self.goal(rng);
                    let y = self.fresh("y");
                    let bound = self.term(rng, &d, env, depth - 1);
                    env.push((y.clone(), d));
                    let body = self.term(rng, goal, env, depth - 1);
                    env.pop();
                    return SourceTerm::Let(y, Box::new(bound), Box::new(body));
                }
                // Polymorphic diagonal wrapper instantiated at the goal.
                6 if !diags.is_empty() => {
                    let f = diags[rng.below(diags.len())].clone();
                    let g = self.fresh("g");
                    let wrapper = SourceTerm::TyLam(
                        vec![("a".to_string(), SourceType::Base(goal.clone()))],
                        Box::new(SourceTerm::Lam(
                            "x".into(),
                            SourceType::Var("a".into()),
                            Box::new(SourceTerm::App(
                                Box::new(SourceTerm::Prim(
                                    f,
                                    Some((SourceType::Var("a".into()), SourceType::Var("a".into()))),
                                )),
                                Box::new(SourceTerm::Var("x".into())),
                            )),
                        )),
                    );
                    let arg = self.term(rng, goal, env, depth - 1);
                    return SourceTerm::Let(
                        g.clone(),
                        Box::new(wrapper),
                        Box::new(SourceTerm::App(
                            Box::new(SourceTerm::TyApp(
                                Box::new(SourceTerm::Var(g)),
                                vec![SourceType::Base(goal.clone())],
                            )),
                            Box::new(arg),
                        )),
                    );
                }
                // Polymorphic constant-result wrapper.
                7 if !consts.is_empty() => {
                    let (f, b, c) = consts[rng.below(consts.len())].clone();
                    let below: Vec<Sort> = self
                        .inhabited
                        .iter()
                        .filter(|s| h.leq(s, &b).unwrap())
                        .cloned()
                        .collect();
                    let inst = below[rng.below(below.len())].clone();
                    let g = self.fresh("g");
                    let wrapper = SourceTerm::TyLam(
                        vec![("a".to_string(), SourceType::Base(b))],
                        Box::new(SourceTerm::Lam(
                            "x".into(),
                            SourceType::Var("a".into()),
                            Box::new(SourceTerm::App(
                                Box::new(SourceTerm::Prim(
                                    f,
                                    Some((
                                        SourceType::Var("a".into()),
                                        SourceType::Base(c.clone()),
                                    )),
                                )),
                                Box::new(SourceTerm::Var("x".into())),
                            )),
                        )),
                    );
                    let arg = self.term(rng, &inst, env, depth - 1);
                    return SourceTerm::Let(
                        g.clone(),
                        Box::new(wrapper),
                        Box::new(SourceTerm::App(
                            Box::new(SourceTerm::TyApp(
                                Box::new(SourceTerm::Var(g)),
                                vec![SourceType::Base(inst)],
                            )),
                            Box::new(arg),
                        )),
                    );
                }
                // Higher-order: bind a function, then call it.
                8 => {
                    let d = self.goal(rng);
                    let fname = self.fresh("w");
                    let x = self.fresh("x");
                    env.push((x.clone(), d.clone()));
                    let fbody = self.term(rng, goal, env, depth - 1);
                    env.pop();
                    let func = SourceTerm::Lam(
                        x,
                        SourceType::Base(d.clone()),
                        Box::new(fbody),
                    );
                    let arg = self.term(rng, &d, env, depth - 1);
                    return SourceTerm::Let(
                        fname.clone(),
                        Box::new(func),
                        Box::new(SourceTerm::App(
                            Box::new(SourceTerm::Var(fname)),
                            Box::new(arg),
                        )),
                    );
                }
                _ => continue,
            }
        }
    }
}

/// Counterpart generator for the other calculus; goals are the ground
/// types of declared constants.
pub struct TargetGen {
    goals: Vec<PhantomType>,
    consts_by_type: Vec<(PhantomType, Vec<String>)>,
    usable_rows: Vec<(String, PhantomType, PhantomType)>,
    uniform: Vec<(String, Vec<PhantomType>, PhantomType)>,
    counter: usize,
}

impl TargetGen {
    pub fn new(interp: &TargetInterpretation) -> TargetGen {
        let mut consts_by_type: Vec<(PhantomType, Vec<String>)> = Vec::new();
        for (name, ty) in interp.constants() {
            match consts_by_type.iter_mut().find(|(t, _)| t == ty) {
                Some((_, pool)) => pool.push(name.clone()),
                None => consts_by_type.push((ty.clone(), vec![name.clone()])),
            }
        }
        let goals: Vec<PhantomType> = consts_by_type.iter().map(|(t, _)| t.clone()).collect();
        let mut usable_rows = Vec::new();
        let mut uniform = Vec::new();
        for (prim, rows) in interp.prims() {
            for (dom, cod) in rows {
                if goals.contains(dom) {
                    usable_rows.push((prim.clone(), dom.clone(), cod.clone()));
                }
            }
            if let Some((_, first)) = rows.first() {
                if rows.iter().all(|(_, c)| c == first) {
                    uniform.push((
                        prim.clone(),
                        rows.iter()
                            .map(|(d, _)| d.clone())
                            .filter(|d| goals.contains(d))
                            .collect(),
                        first.clone(),
                    ));
                }
            }
        }
        TargetGen {
            goals,
            consts_by_type,
            usable_rows,
            uniform,
            counter: 0,
        }
    }

    pub fn has_material(&self) -> bool {
        !self.goals.is_empty()
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{}", self.counter)
    }

    pub fn goal(&self, rng: &mut Rng) -> PhantomType {
        self.goals[rng.below(self.goals.len())].clone()
    }

    pub fn program(&mut self, rng: &mut Rng, goal: &PhantomType, depth: usize) -> TargetTerm {
        let mut env = Vec::new();
        self.term(rng, goal, &mut env, depth)
    }

    fn constant_of(&self, rng: &mut Rng, ty: &PhantomType) -> TargetTerm {
        let pool = &self
            .consts_by_type
            .iter()
            .find(|(t, _)| t == ty)
            .expect("goal is inhabited")
            .1;
        TargetTerm::Const(pool[rng.below(pool.len())].clone())
    }

    fn term(
        &mut self,
        rng: &mut Rng,
        goal: &PhantomType,
        env: &mut Vec<(String, PhantomType)>,
        depth: usize,
    ) -> TargetTerm {
        let vars: Vec<String> = env
            .iter()
            .filter(|(_, t)| t == goal)
            .map(|(x, _)| x.clone())
            .collect();
        if depth == 0 {
            if !vars.is_empty() && rng.below(2) == 0 {
                return TargetTerm::Var(vars[rng.below(vars.len())].clone());
            }
            return self.constant_of(rng, goal);
        }
        let rows: Vec<(String, PhantomType)> = self
            .usable_rows
            .iter()
            .filter(|(_, _, c)| c == goal)
            .map(|(f, d, _)| (f.clone(), d.clone()))
            .collect();
        let uniform: Vec<(String, Vec<PhantomType>)> = self
            .uniform
            .iter()
            .filter(|(_, doms, c)| c == goal && !doms.is_empty())
            .map(|(f, doms, _)| (f.clone(), doms.clone()))
            .collect();
        loop {
            match rng.below(8) {
                0 => return self.constant_of(rng, goal),
                1 if !vars.is_empty() => {
                    return TargetTerm::Var(vars[rng.below(vars.len())].clone());
                }
                2 if !rows.is_empty() => {
                    let (f, d) = rows[rng.below(rows.len())].clone();
                    let arg = self.term(rng, &d, env, depth - 1);
                    return TargetTerm::App(
                        Box::new(TargetTerm::Prim(f, Some((d, goal.clone())))),
                        Box::new(arg),
                    );
                }
                3 if !uniform.is_empty() => {
                    let (f, doms) = uniform[rng.below(uniform.len())].clone();
                    let d = doms[rng.below(doms.len())].clone();
                    let arg = self.term(rng, &d, env, depth - 1);
                    return TargetTerm::App(
                        Box::new(TargetTerm::Prim(f, None)),
                        Box::new(arg),
                    );
                }
                4 => {
                    let d = self.goal(rng);
                    let x = self.fresh("x");
                    env.push((x.clone(), d.clone()));
                    let body = self.term(rng, goal, env, depth - 1);
                    env.pop();
                    let arg = self.term(rng, &d, env, depth - 1);
                    return TargetTerm::App(
                        Box::new(TargetTerm::Lam(x, d, Box::new(body))),
                        Box::new(arg),
                    );
                }
                5 => {
                    let d = self.goal(rng);
                    let y = self.fresh("y");
                    let bound = self.term(rng, &d, env, depth - 1);
                    env.push((y.clone(), d));
                    let body = self.term(rng, goal, env, depth - 1);
                    env.pop();
                    return TargetTerm::Let(y, Box::new(bound), Box::new(body));
                }
                // Polymorphic identity instantiated at the goal type.
                6 => {
                    let g = self.fresh("g");
                    let identity = TargetTerm::TyLam(
                        vec!["a".to_string()],
                        Box::new(TargetTerm::Lam(
                            "x".into(),
                            PhantomType::Var("a".into()),
                            Box::new(TargetTerm::Var("x".into())),
                        )),
                    );
                    let arg = self.term(rng, goal, env, depth - 1);
                    return TargetTerm::Let(
                        g.clone(),
                        Box::new(identity),
                        Box::new(TargetTerm::App(
                            Box::new(TargetTerm::TyApp(
                                Box::new(TargetTerm::Var(g)),
                                vec![goal.clone()],
                            )),
                            Box::new(arg),
                        )),
                    );
                }
                7 => {
                    let d = self.goal(rng);
                    let fname = self.fresh("w");
                    let x = self.fresh("x");
                    env.push((x.clone(), d.clone()));
                    let fbody = self.term(rng, goal, env, depth - 1);
                    env.pop();
                    let func = TargetTerm::Lam(x, d.clone(), Box::new(fbody));
                    let arg = self.term(rng, &d, env, depth - 1);
                    return TargetTerm::Let(
                        fname.clone(),
                        Box::new(func),
                        Box::new(TargetTerm::App(
                            Box::new(TargetTerm::Var(fname)),
                            Box::new(arg),
                        )),
                    );
                }
                _ => continue,
            }
        }
    }
}
