//! Auditing, stripping and saturating redundant filters and relate clauses.
//!
//! Candidates for removal are the object filters in a run that ends at an
//! object-level `unique`, and a `relate` at the bottom of such a run
//! (removing it puts `scene` in its place). A candidate is redundant when
//! the program without it still makes every `unique` pick the same
//! referent.

use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::concepts::Attribute;
use crate::exec_det::{execute_ops, execute_trace, ExecValue};
use crate::program::{FilterKey, Function, Node, Program, ValueType};
use crate::scene::{ObjectInstance, Relation, Scene};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum CandidateKind {
    Filter(FilterKey),
    Relate,
}

#[derive(Clone, Debug)]
pub(crate) struct Candidate {
    pub path: Vec<usize>,
    pub kind: CandidateKind,
    pub label: usize,
}

impl CandidateKind {
    /// Removal order used by stripping: relates, then texture, material, size, color, category, shape.
    fn priority(self) -> u8 {
        match self {
            CandidateKind::Relate => 0,
            CandidateKind::Filter(FilterKey::Attr(Attribute::Texture)) => 1,
            CandidateKind::Filter(FilterKey::Attr(Attribute::Material)) => 2,
            CandidateKind::Filter(FilterKey::Attr(Attribute::Size)) => 3,
            CandidateKind::Filter(FilterKey::Attr(Attribute::Color)) => 4,
            CandidateKind::Filter(FilterKey::Category) => 5,
            CandidateKind::Filter(_) => 6,
        }
    }
}

/// Gives every node a distinct preorder label in `origin`.
pub(crate) fn relabel(root: &mut Node) {
    fn go(n: &mut Node, next: &mut usize) {
        n.origin = Some(*next);
        *next += 1;
        for c in &mut n.children {
            go(c, next);
        }
    }
    go(root, &mut 0);
}

/// Values of every labeled node.
pub(crate) fn eval_labeled(root: &Node, scene: &Scene) -> Option<HashMap<usize, ExecValue>> {
    let (ops, origins) = root.emit_ops();
    let values = execute_ops(&ops, scene).ok()?;
    Some(origins.into_iter().zip(values).filter_map(|(o, v)| o.map(|o| (o, v))).collect())
}

pub(crate) fn is_object_filter(n: &Node) -> bool {
    n.function.is_filter() && n.ty == ValueType::ObjectSet
}

pub(crate) fn is_object_unique(n: &Node) -> bool {
    n.function == Function::Unique && n.ty == ValueType::Object
}

pub(crate) fn node_at<'a>(root: &'a Node, path: &[usize]) -> &'a Node {
    path.iter().fold(root, |n, &i| &n.children[i])
}

fn node_at_mut<'a>(root: &'a mut Node, path: &[usize]) -> &'a mut Node {
    path.iter().fold(root, |n, &i| &mut n.children[i])
}

pub(crate) fn candidates(root: &Node) -> Vec<Candidate> {
    fn go(n: &Node, path: &mut Vec<usize>, out: &mut Vec<Candidate>) {
        if is_object_unique(n) {
            let mut p = path.clone();
            p.push(0);
            loop {
                let cur = node_at_rel(n, &p[path.len()..]);
                if is_object_filter(cur) {
                    out.push(Candidate {
                        path: p.clone(),
                        kind: CandidateKind::Filter(cur.function.filter_key().expect("filter")),
                        label: cur.origin.expect("labeled"),
                    });
                    p.push(0);
                } else {
                    if cur.function == Function::Relate {
                        out.push(Candidate { path: p.clone(), kind: CandidateKind::Relate, label: cur.origin.expect("labeled") });
                    }
                    break;
                }
            }
        }
        for (i, c) in n.children.iter().enumerate() {
            path.push(i);
            go(c, path, out);
            path.pop();
        }
    }
    fn node_at_rel<'a>(n: &'a Node, rel: &[usize]) -> &'a Node {
        node_at(n, rel)
    }
    let mut out = Vec::new();
    go(root, &mut Vec::new(), &mut out);
    out
}

pub(crate) fn delete(root: &Node, c: &Candidate) -> Node {
    let mut t = root.clone();
    let slot = node_at_mut(&mut t, &c.path);
    *slot = match c.kind {
        CandidateKind::Filter(_) => slot.children[0].clone(),
        CandidateKind::Relate => Node::scene(),
    };
    t
}

/// Every remaining `unique` still yields the value recorded in `orig`.
pub(crate) fn uniques_preserved(orig: &HashMap<usize, ExecValue>, root: &Node, scene: &Scene) -> bool {
    let (ops, origins) = root.emit_ops();
    let Ok(values) = execute_ops(&ops, scene) else { return false };
    ops.iter().zip(&origins).zip(&values).all(|((op, origin), v)| {
        op.function != Function::Unique || origin.and_then(|o| orig.get(&o)) == Some(v)
    })
}

pub(crate) fn redundant(root: &Node, scene: &Scene, orig: &HashMap<usize, ExecValue>) -> Vec<Candidate> {
    candidates(root).into_iter().filter(|c| uniques_preserved(orig, &delete(root, c), scene)).collect()
}

/// Operation indices of redundant filters and relates.
pub fn redundancy_audit(program: &Program, scene: &Scene) -> Vec<usize> {
    let Ok(trace) = execute_trace(program, scene) else { return vec![] };
    let orig: HashMap<usize, ExecValue> = trace.into_iter().enumerate().collect();
    let tree = program.to_tree();
    let mut out: Vec<usize> = redundant(&tree, scene, &orig).into_iter().map(|c| c.label).collect();
    out.sort_unstable();
    out
}

pub(crate) fn strip_tree(tree: &Node, scene: &Scene, relates_only: bool) -> Node {
    let mut t = tree.clone();
    loop {
        relabel(&mut t);
        let Some(orig) = eval_labeled(&t, scene) else { return t };
        let best = redundant(&t, scene, &orig)
            .into_iter()
            .filter(|c| !relates_only || c.kind == CandidateKind::Relate)
            .min_by_key(|c| c.kind.priority());
        match best {
            Some(c) => t = delete(&t, &c),
            None => return t,
        }
    }
}

/// Deletes redundant attribute filters and relate clauses until the audit is empty.
pub fn strip_redundancy(program: &Program, scene: &Scene) -> Program {
    strip_tree(&program.to_tree(), scene, false).to_program().expect("deletions preserve types")
}

/// CLEVR-style random subsets: each candidate filter is dropped with probability 1/2 when the
/// referents survive the drop; then redundant relates are removed.
pub(crate) fn random_drop<R: Rng + ?Sized>(tree: &Node, scene: &Scene, rng: &mut R) -> Node {
    let mut t = tree.clone();
    relabel(&mut t);
    let Some(orig) = eval_labeled(&t, scene) else { return t };
    let labels: Vec<usize> = candidates(&t)
        .into_iter()
        .filter(|c| matches!(c.kind, CandidateKind::Filter(_)))
        .map(|c| c.label)
        .collect();
    for label in labels {
        if !rng.random_bool(0.5) {
            continue;
        }
        let Some(c) = candidates(&t).into_iter().find(|c| c.label == label) else { continue };
        let next = delete(&t, &c);
        if uniques_preserved(&orig, &next, scene) {
            t = next;
        }
    }
    strip_tree(&t, scene, true)
}

fn full_filters(o: &ObjectInstance) -> Vec<(Function, String)> {
    let mut f = vec![
        (Function::FilterSize, o.size.clone()),
        (Function::FilterColor, o.color.clone()),
        (Function::FilterMaterial, o.material.clone()),
    ];
    if let Some(t) = &o.texture {
        f.push((Function::FilterTexture, t.clone()));
    }
    f.push((Function::FilterShape, o.shape.clone()));
    f
}

/// Canonical filter order bottom-up: size, color, material, texture, shape, category.
pub(crate) fn canonical_rank(f: Function) -> u8 {
    match f {
        Function::FilterSize => 0,
        Function::FilterColor => 1,
        Function::FilterMaterial => 2,
        Function::FilterTexture => 3,
        Function::FilterShape => 4,
        Function::FilterCategory => 5,
        _ => 6,
    }
}

pub(crate) fn build_run(base: Node, filters: &[(Function, String)]) -> Node {
    let mut sorted = filters.to_vec();
    sorted.sort_by_key(|(f, _)| canonical_rank(*f));
    sorted.dedup();
    sorted.into_iter().fold(base, |acc, (f, v)| Node::new(f, vec![v], vec![acc]).expect("object filter over a set"))
}

/// Objects whose full attribute tuple is unique in the scene.
pub(crate) fn fully_identifiable(scene: &Scene) -> Vec<usize> {
    let key = |o: &ObjectInstance| (o.size.clone(), o.color.clone(), o.material.clone(), o.texture.clone(), o.shape.clone());
    let mut counts: HashMap<_, usize> = HashMap::new();
    for o in &scene.objects {
        *counts.entry(key(o)).or_default() += 1;
    }
    (0..scene.len()).filter(|&i| counts[&key(&scene.objects[i])] == 1).collect()
}

/// `relate(r, unique(full description of a))` over scene.
pub(crate) fn anchor_clause(scene: &Scene, anchor: usize, relation: Relation) -> Node {
    let a = build_run(Node::scene(), &full_filters(&scene.objects[anchor]));
    let u = Node::new(Function::Unique, vec![], vec![a]).expect("unique over a set");
    Node::new(Function::Relate, vec![relation.name().into()], vec![u]).expect("relate over an object")
}

fn pick_anchor<R: Rng + ?Sized>(scene: &Scene, target: usize, rng: &mut R) -> Option<Node> {
    let pairs: Vec<(usize, Relation)> = fully_identifiable(scene)
        .into_iter()
        .filter(|&a| a != target)
        .flat_map(|a| Relation::ALL.into_iter().map(move |r| (a, r)))
        .filter(|&(a, r)| scene.relationships.related(r, a).contains(&target))
        .collect();
    pairs.choose(rng).map(|&(a, r)| anchor_clause(scene, a, r))
}

pub(crate) fn saturate_tree<R: Rng + ?Sized>(tree: &Node, scene: &Scene, rng: &mut R) -> Node {
    let mut t = tree.clone();
    relabel(&mut t);
    let Some(vals) = eval_labeled(&t, scene) else { return tree.clone() };
    sat(&t, &vals, scene, rng)
}

fn sat<R: Rng + ?Sized>(n: &Node, vals: &HashMap<usize, ExecValue>, scene: &Scene, rng: &mut R) -> Node {
    if is_object_unique(n) {
        if let Some(ExecValue::Object(target)) = n.origin.and_then(|o| vals.get(&o)) {
            let mut filters: Vec<(Function, String)> = Vec::new();
            let mut cur = &n.children[0];
            while is_object_filter(cur) {
                filters.push((cur.function, cur.value_inputs[0].clone()));
                cur = &cur.children[0];
            }
            let mut base = sat(cur, vals, scene, rng);
            if base.function == Function::Scene {
                if let Some(clause) = pick_anchor(scene, *target, rng) {
                    base = clause;
                }
            }
            filters.extend(full_filters(&scene.objects[*target]));
            let run = build_run(base, &filters);
            return Node::new(Function::Unique, vec![], vec![run]).expect("unique over a set");
        }
    }
    let mut out = n.clone();
    out.children = n.children.iter().map(|c| sat(c, vals, scene, rng)).collect();
    out
}

/// Adds every ground-truth attribute of each referent and one relate clause where possible.
pub fn saturate_redundancy<R: Rng + ?Sized>(program: &Program, scene: &Scene, rng: &mut R) -> Program {
    saturate_tree(&program.to_tree(), scene, rng).to_program().expect("insertions preserve types")
}

/// (referent, filters on its run) for every object-level `unique`.
pub fn referent_chains(program: &Program, scene: &Scene) -> Vec<(usize, Vec<(Function, String)>)> {
    let mut t = program.to_tree();
    relabel(&mut t);
    let Some(vals) = eval_labeled(&t, scene) else { return vec![] };
    let mut out = Vec::new();
    t.walk(&mut |n| {
        if is_object_unique(n) {
            if let Some(ExecValue::Object(r)) = n.origin.and_then(|o| vals.get(&o)) {
                let mut filters = Vec::new();
                let mut cur = &n.children[0];
                while is_object_filter(cur) {
                    filters.push((cur.function, cur.value_inputs[0].clone()));
                    cur = &cur.children[0];
                }
                out.push((*r, filters));
            }
        }
    });
    out
}

/// Whether every referent's run names all of its ground-truth attributes.
pub fn referents_saturated(program: &Program, scene: &Scene) -> bool {
    referent_chains(program, scene).into_iter().all(|(r, filters)| {
        full_filters(&scene.objects[r]).iter().all(|f| filters.contains(f))
    })
}
