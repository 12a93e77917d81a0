#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use shiftbench::concepts::{Attribute, ConceptVocabulary};
use shiftbench::exec_det::Answer;
use shiftbench::program::{FilterKey, Function, Operation, Program, ValueType};
use shiftbench::sampler::{sample_scene, GenConfig, Visual};
use shiftbench::scene::{Relation, Scene};

pub fn vocab() -> ConceptVocabulary {
    ConceptVocabulary::default()
}

pub fn scenes(visual: Visual, seed: u64, ids: std::ops::Range<u64>) -> Vec<Scene> {
    let v = vocab();
    let cfg = GenConfig::balanced(visual, &v, seed);
    ids.map(|i| sample_scene(&cfg, &v, i).unwrap()).collect()
}

fn all_types() -> Vec<ValueType> {
    let mut t = vec![
        ValueType::ObjectSet,
        ValueType::Object,
        ValueType::PartSet,
        ValueType::Part,
        ValueType::Integer,
        ValueType::Boolean,
    ];
    t.extend(Attribute::ALL.map(ValueType::Attr));
    t
}

/// Every (function, input types, output type) overload, found by enumeration.
pub fn signatures() -> Vec<(Function, Vec<ValueType>, ValueType)> {
    let types = all_types();
    let mut out = vec![];
    for f in Function::ALL {
        let combos: Vec<Vec<ValueType>> = match f.input_arity() {
            0 => vec![vec![]],
            1 => types.iter().map(|&t| vec![t]).collect(),
            _ => types.iter().flat_map(|&a| types.iter().map(move |&b| vec![a, b])).collect(),
        };
        for c in combos {
            if let Some(r) = f.result_type(&c) {
                out.push((f, c, r));
            }
        }
    }
    out
}

pub fn literal<R: Rng + ?Sized>(f: Function, vocab: &ConceptVocabulary, rng: &mut R) -> Vec<String> {
    if f == Function::Relate {
        return vec![Relation::ALL.choose(rng).unwrap().name().to_string()];
    }
    let pool: Vec<String> = match f.filter_key() {
        None => return vec![],
        Some(FilterKey::Attr(a)) => vocab.values(a).to_vec(),
        Some(FilterKey::Category) => vocab.categories.clone(),
        Some(FilterKey::PartName) => vocab.all_part_names(),
    };
    vec![pool.choose(rng).unwrap().clone()]
}

pub struct ProgramGen {
    sigs: Vec<(Function, Vec<ValueType>, ValueType)>,
}

impl Default for ProgramGen {
    fn default() -> Self {
        ProgramGen { sigs: signatures() }
    }
}

impl ProgramGen {
    fn emit<R: Rng + ?Sized>(
        &self,
        ty: ValueType,
        depth: usize,
        vocab: &ConceptVocabulary,
        rng: &mut R,
        ops: &mut Vec<Operation>,
    ) -> usize {
        if ty == ValueType::ObjectSet && (depth == 0 || rng.random_bool(0.15)) {
            ops.push(Operation::new(Function::Scene, vec![], vec![]));
            return ops.len() - 1;
        }
        let cands: Vec<_> = self
            .sigs
            .iter()
            .filter(|(f, ins, out)| {
                *out == ty && *f != Function::Scene && (depth > 0 || ins.iter().all(|t| *t == ValueType::ObjectSet))
            })
            .collect();
        // depth exhausted for a non-set type: take the shortest route back to scene
        let (f, ins, _) = if cands.is_empty() {
            self.sigs.iter().find(|(f, _, out)| *out == ty && *f != Function::Scene).expect("type reachable")
        } else {
            *cands.choose(rng).unwrap()
        };
        let next = depth.saturating_sub(1);
        let inputs: Vec<usize> = ins.iter().map(|&t| self.emit(t, next, vocab, rng, ops)).collect();
        ops.push(Operation::new(*f, inputs, literal(*f, vocab, rng)));
        ops.len() - 1
    }

    /// A well-typed single-sink program with an answer-typed result.
    pub fn program<R: Rng + ?Sized>(&self, vocab: &ConceptVocabulary, max_depth: usize, rng: &mut R) -> Program {
        let answers: Vec<ValueType> = all_types().into_iter().filter(|t| t.is_answer()).collect();
        let ty = *answers.choose(rng).unwrap();
        let depth = rng.random_range(1..=max_depth);
        let mut ops = vec![];
        self.emit(ty, depth, vocab, rng, &mut ops);
        Program::new(ops).expect("generator emits typed programs")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefValue {
    Objects(BTreeSet<usize>),
    Object(usize),
    Parts(BTreeSet<(usize, usize)>),
    Part((usize, usize)),
    Int(i64),
    Bool(bool),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefError {
    NonUnique,
    MissingTexture,
}

fn holds(rel: Relation, anchor: [f64; 2], other: [f64; 2]) -> bool {
    match rel {
        Relation::Left => other[0] < anchor[0],
        Relation::Right => other[0] > anchor[0],
        Relation::Front => other[1] > anchor[1],
        Relation::Behind => other[1] < anchor[1],
    }
}

fn attr_of(scene: &Scene, o: usize, a: Attribute) -> Option<String> {
    let ob = &scene.objects[o];
    match a {
        Attribute::Size => Some(ob.size.clone()),
        Attribute::Color => Some(ob.color.clone()),
        Attribute::Material => Some(ob.material.clone()),
        Attribute::Shape => Some(ob.shape.clone()),
        Attribute::Texture => ob.texture.clone(),
    }
}

/// Naive set-comprehension semantics, written against the scene's raw fields.
pub fn reference_execute(program: &Program, scene: &Scene) -> Result<Answer, RefError> {
    use Function::*;
    let n = scene.objects.len();
    let mut vals: Vec<RefValue> = vec![];
    for op in program.ops() {
        let get = |k: usize| vals[op.inputs[k]].clone();
        let lit = op.value_inputs.first().cloned().unwrap_or_default();
        let v = match op.function {
            Scene => RefValue::Objects((0..n).collect()),
            FilterSize | FilterColor | FilterMaterial | FilterShape | FilterTexture | FilterCategory | FilterPartName => {
                match get(0) {
                    RefValue::Objects(s) => RefValue::Objects(
                        s.into_iter()
                            .filter(|&o| {
                                let ob = &scene.objects[o];
                                match op.function {
                                    FilterSize => ob.size == lit,
                                    FilterColor => ob.color == lit,
                                    FilterMaterial => ob.material == lit,
                                    FilterShape => ob.shape == lit,
                                    FilterTexture => ob.texture.as_deref() == Some(lit.as_str()),
                                    _ => ob.category == lit,
                                }
                            })
                            .collect(),
                    ),
                    RefValue::Parts(s) => RefValue::Parts(
                        s.into_iter()
                            .filter(|&(o, p)| {
                                let part = &scene.objects[o].parts[p];
                                match op.function {
                                    FilterColor => part.color == lit,
                                    FilterMaterial => part.material == lit,
                                    _ => part.name == lit,
                                }
                            })
                            .collect(),
                    ),
                    _ => unreachable!(),
                }
            }
            Unique => match get(0) {
                RefValue::Objects(s) if s.len() == 1 => RefValue::Object(*s.first().unwrap()),
                RefValue::Parts(s) if s.len() == 1 => RefValue::Part(*s.first().unwrap()),
                _ => return Err(RefError::NonUnique),
            },
            Relate => {
                let RefValue::Object(a) = get(0) else { unreachable!() };
                let rel: Relation = lit.parse().unwrap();
                let pa = scene.objects[a].position;
                RefValue::Objects((0..n).filter(|&j| j != a && holds(rel, pa, scene.objects[j].position)).collect())
            }
            SameSize | SameColor | SameMaterial | SameShape => {
                let RefValue::Object(a) = get(0) else { unreachable!() };
                let attr = op.function.attribute().unwrap();
                let want = attr_of(scene, a, attr);
                RefValue::Objects((0..n).filter(|&j| j != a && attr_of(scene, j, attr) == want).collect())
            }
            Intersect | Union => {
                let (RefValue::Objects(x), RefValue::Objects(y)) = (get(0), get(1)) else { unreachable!() };
                RefValue::Objects(if op.function == Intersect {
                    x.intersection(&y).copied().collect()
                } else {
                    x.union(&y).copied().collect()
                })
            }
            Count => {
                let RefValue::Objects(s) = get(0) else { unreachable!() };
                RefValue::Int(s.len() as i64)
            }
            Exist => {
                let RefValue::Objects(s) = get(0) else { unreachable!() };
                RefValue::Bool(!s.is_empty())
            }
            QuerySize | QueryColor | QueryMaterial | QueryShape | QueryTexture => {
                let attr = op.function.attribute().unwrap();
                match get(0) {
                    RefValue::Object(o) => RefValue::Str(attr_of(scene, o, attr).ok_or(RefError::MissingTexture)?),
                    RefValue::Part((o, p)) => {
                        let part = &scene.objects[o].parts[p];
                        RefValue::Str(if attr == Attribute::Color { part.color.clone() } else { part.material.clone() })
                    }
                    _ => unreachable!(),
                }
            }
            EqualInteger | LessThan | GreaterThan => {
                let (RefValue::Int(a), RefValue::Int(b)) = (get(0), get(1)) else { unreachable!() };
                RefValue::Bool(match op.function {
                    EqualInteger => a == b,
                    LessThan => a < b,
                    _ => a > b,
                })
            }
            EqualSize | EqualColor | EqualMaterial | EqualShape => {
                let (RefValue::Str(a), RefValue::Str(b)) = (get(0), get(1)) else { unreachable!() };
                RefValue::Bool(a == b)
            }
            ObjectToPart => {
                let owners: BTreeSet<usize> = match get(0) {
                    RefValue::Object(o) => [o].into(),
                    RefValue::Objects(s) => s,
                    _ => unreachable!(),
                };
                RefValue::Parts(
                    owners.into_iter().flat_map(|o| (0..scene.objects[o].parts.len()).map(move |p| (o, p))).collect(),
                )
            }
            PartToObject => {
                let RefValue::Parts(s) = get(0) else { unreachable!() };
                RefValue::Objects(s.into_iter().map(|(o, _)| o).collect())
            }
        };
        vals.push(v);
    }
    Ok(match vals.pop().unwrap() {
        RefValue::Int(n) => Answer::Integer(n),
        RefValue::Bool(b) => Answer::Boolean(b),
        RefValue::Str(s) => Answer::Attribute(s),
        other => panic!("non-answer sink {other:?}"),
    })
}
