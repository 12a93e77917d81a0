//! Deterministic executor over a ground-truth scene graph.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::Attribute;
use crate::program::{FilterKey, Function, Operation, Program};
use crate::scene::Scene;

/// A part addressed by its parent object and its index in the object's part list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartRef {
    pub object: usize,
    pub part: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecValue {
    /// Sorted, duplicate-free object ids.
    ObjectSet(Vec<usize>),
    Object(usize),
    PartSet(Vec<PartRef>),
    Part(PartRef),
    Integer(i64),
    Boolean(bool),
    Attribute(String),
}

/// Final answer of a question.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Boolean(bool),
    Integer(i64),
    Attribute(String),
}

impl Answer {
    /// Comparison key used for scoring: attribute answers are case-folded.
    pub fn normalized(&self) -> Answer {
        match self {
            Answer::Attribute(s) => Answer::Attribute(s.trim().to_lowercase()),
            other => other.clone(),
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Boolean(true) => f.write_str("yes"),
            Answer::Boolean(false) => f.write_str("no"),
            Answer::Integer(n) => write!(f, "{n}"),
            Answer::Attribute(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("operation {index}: unique over {size} candidates")]
    NonUnique { index: usize, size: usize },
    #[error("operation {index}: object {object} has no texture")]
    MissingTexture { index: usize, object: usize },
    #[error("operation {index}: empty selection")]
    EmptySelection { index: usize },
    #[error("operation {index}: invalid literal {value:?}")]
    InvalidLiteral { index: usize, value: String },
    #[error("operation {index}: operand lengths differ")]
    LengthMismatch { index: usize },
    #[error("operation {index}: value does not match the operation's type")]
    TypeFault { index: usize },
}

impl ExecError {
    pub fn index(&self) -> usize {
        match self {
            ExecError::NonUnique { index, .. }
            | ExecError::MissingTexture { index, .. }
            | ExecError::EmptySelection { index }
            | ExecError::InvalidLiteral { index, .. }
            | ExecError::LengthMismatch { index }
            | ExecError::TypeFault { index } => *index,
        }
    }
}

pub fn execute(program: &Program, scene: &Scene) -> Result<Answer, ExecError> {
    let trace = execute_trace(program, scene)?;
    let index = trace.len() - 1;
    to_answer(index, trace.into_iter().last().expect("nonempty program"))
}

pub(crate) fn to_answer(index: usize, value: ExecValue) -> Result<Answer, ExecError> {
    match value {
        ExecValue::Integer(n) => Ok(Answer::Integer(n)),
        ExecValue::Boolean(b) => Ok(Answer::Boolean(b)),
        ExecValue::Attribute(s) => Ok(Answer::Attribute(s)),
        _ => Err(ExecError::TypeFault { index }),
    }
}

/// Executes every operation and returns all intermediate values in program order.
pub fn execute_trace(program: &Program, scene: &Scene) -> Result<Vec<ExecValue>, ExecError> {
    execute_ops(program.ops(), scene)
}

/// Runs operations that have not been type-checked; ill-typed edges surface as [`ExecError::TypeFault`].
pub fn execute_ops(ops: &[Operation], scene: &Scene) -> Result<Vec<ExecValue>, ExecError> {
    let mut values: Vec<ExecValue> = Vec::with_capacity(ops.len());
    for (index, op) in ops.iter().enumerate() {
        if op.inputs.iter().any(|&i| i >= index) {
            return Err(ExecError::TypeFault { index });
        }
        let arg = |k: usize| &values[op.inputs[k]];
        let fault = ExecError::TypeFault { index };
        let v = match op.function {
            Function::Scene => ExecValue::ObjectSet((0..scene.objects.len()).collect()),
            f if f.is_filter() => {
                let value = op.value().unwrap_or_default();
                let key = f.filter_key().expect("filter");
                match arg(0) {
                    ExecValue::ObjectSet(ids) => ExecValue::ObjectSet(
                        ids.iter().copied().filter(|&i| object_matches(scene, i, key, value)).collect(),
                    ),
                    ExecValue::PartSet(ps) => {
                        ExecValue::PartSet(ps.iter().copied().filter(|p| part_matches(scene, *p, key, value)).collect())
                    }
                    _ => return Err(fault),
                }
            }
            Function::Unique => match arg(0) {
                ExecValue::ObjectSet(ids) if ids.len() == 1 => ExecValue::Object(ids[0]),
                ExecValue::PartSet(ps) if ps.len() == 1 => ExecValue::Part(ps[0]),
                ExecValue::ObjectSet(ids) => return Err(ExecError::NonUnique { index, size: ids.len() }),
                ExecValue::PartSet(ps) => return Err(ExecError::NonUnique { index, size: ps.len() }),
                _ => return Err(fault),
            },
            Function::Relate => {
                let ExecValue::Object(o) = *arg(0) else { return Err(fault) };
                let rel = op.relation().ok_or_else(|| ExecError::InvalidLiteral {
                    index,
                    value: op.value().unwrap_or_default().to_string(),
                })?;
                let mut ids = scene.relationships.related(rel, o).to_vec();
                ids.sort_unstable();
                ExecValue::ObjectSet(ids)
            }
            f if f.is_same() => {
                let ExecValue::Object(o) = *arg(0) else { return Err(fault) };
                let attr = f.attribute().expect("same_* reads an attribute");
                let target = scene.objects[o].attribute(attr);
                ExecValue::ObjectSet(
                    (0..scene.objects.len()).filter(|&i| i != o && scene.objects[i].attribute(attr) == target).collect(),
                )
            }
            Function::Intersect | Function::Union => {
                let (ExecValue::ObjectSet(a), ExecValue::ObjectSet(b)) = (arg(0), arg(1)) else { return Err(fault) };
                let out = if op.function == Function::Intersect {
                    a.iter().copied().filter(|i| b.binary_search(i).is_ok()).collect()
                } else {
                    let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
                    u.sort_unstable();
                    u.dedup();
                    u
                };
                ExecValue::ObjectSet(out)
            }
            Function::Count => {
                let ExecValue::ObjectSet(ids) = arg(0) else { return Err(fault) };
                ExecValue::Integer(ids.len() as i64)
            }
            Function::Exist => {
                let ExecValue::ObjectSet(ids) = arg(0) else { return Err(fault) };
                ExecValue::Boolean(!ids.is_empty())
            }
            f if f.is_query() => {
                let attr = f.attribute().expect("query reads an attribute");
                let found = match *arg(0) {
                    ExecValue::Object(o) => scene.objects[o].attribute(attr).map(str::to_string).ok_or(o),
                    ExecValue::Part(p) => {
                        let part = &scene.objects[p.object].parts[p.part];
                        match attr {
                            Attribute::Color => Ok(part.color.clone()),
                            Attribute::Material => Ok(part.material.clone()),
                            Attribute::Texture => part.texture.clone().ok_or(p.object),
                            _ => return Err(fault),
                        }
                    }
                    _ => return Err(fault),
                };
                match found {
                    Ok(s) => ExecValue::Attribute(s),
                    Err(object) => return Err(ExecError::MissingTexture { index, object }),
                }
            }
            Function::EqualInteger | Function::LessThan | Function::GreaterThan => {
                let (ExecValue::Integer(a), ExecValue::Integer(b)) = (arg(0), arg(1)) else { return Err(fault) };
                ExecValue::Boolean(match op.function {
                    Function::EqualInteger => a == b,
                    Function::LessThan => a < b,
                    _ => a > b,
                })
            }
            Function::EqualSize | Function::EqualColor | Function::EqualMaterial | Function::EqualShape => {
                let (ExecValue::Attribute(a), ExecValue::Attribute(b)) = (arg(0), arg(1)) else { return Err(fault) };
                ExecValue::Boolean(a == b)
            }
            Function::ObjectToPart => {
                let ids = match arg(0) {
                    ExecValue::Object(o) => vec![*o],
                    ExecValue::ObjectSet(ids) => ids.clone(),
                    _ => return Err(fault),
                };
                ExecValue::PartSet(
                    ids.iter()
                        .flat_map(|&object| (0..scene.objects[object].parts.len()).map(move |part| PartRef { object, part }))
                        .collect(),
                )
            }
            Function::PartToObject => {
                let ExecValue::PartSet(ps) = arg(0) else { return Err(fault) };
                let mut ids: Vec<usize> = ps.iter().map(|p| p.object).collect();
                ids.dedup();
                ExecValue::ObjectSet(ids)
            }
            _ => return Err(fault),
        };
        values.push(v);
    }
    Ok(values)
}

pub(crate) fn object_matches(scene: &Scene, id: usize, key: FilterKey, value: &str) -> bool {
    let o = &scene.objects[id];
    match key {
        FilterKey::Attr(a) => o.attribute(a) == Some(value),
        FilterKey::Category => o.category == value,
        FilterKey::PartName => false,
    }
}

pub(crate) fn part_matches(scene: &Scene, p: PartRef, key: FilterKey, value: &str) -> bool {
    let part = &scene.objects[p.object].parts[p.part];
    match key {
        FilterKey::PartName => part.name == value,
        FilterKey::Attr(Attribute::Color) => part.color == value,
        FilterKey::Attr(Attribute::Material) => part.material == value,
        FilterKey::Attr(Attribute::Texture) => part.texture.as_deref() == Some(value),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::ProgramBuilder;
    use crate::scene::tests::{five_object_scene, object};
    use crate::scene::{Provenance, Scene};
    use Function::*;

    fn query(shape: &str, f: Function) -> Program {
        let mut b = ProgramBuilder::new();
        let s = b.push(Scene, &[], &[]);
        let fs = b.push(FilterShape, &[s], &[shape]);
        let u = b.push(Unique, &[fs], &[]);
        b.push(f, &[u], &[]);
        b.build().unwrap()
    }

    #[test]
    fn query_only_bus() {
        let scene = Scene::from_objects(
            0,
            vec![
                object(0, "school bus", "red", "large", "metal", -2.0, 1.0),
                object(1, "sedan", "blue", "small", "rubber", 2.0, -1.0),
            ],
            Provenance::default(),
        )
        .unwrap();
        assert_eq!(execute(&query("school bus", QueryColor), &scene), Ok(Answer::Attribute("red".into())));
    }

    #[test]
    fn count_category() {
        let scene = Scene::from_objects(
            0,
            vec![
                object(0, "sedan", "red", "large", "metal", -3.0, 1.0),
                object(1, "wagon", "blue", "small", "rubber", 0.0, -1.5),
                object(2, "jet", "gray", "large", "metal", 3.0, 2.5),
            ],
            Provenance::default(),
        )
        .unwrap();
        let mut b = ProgramBuilder::new();
        let s = b.push(Scene, &[], &[]);
        let f = b.push(FilterCategory, &[s], &["car"]);
        b.push(Count, &[f], &[]);
        assert_eq!(execute(&b.build().unwrap(), &scene), Ok(Answer::Integer(2)));
    }

    #[test]
    fn non_unique_and_missing_texture() {
        let scene = Scene::from_objects(
            0,
            vec![
                object(0, "school bus", "red", "large", "metal", -2.0, 1.0),
                object(1, "school bus", "red", "small", "rubber", 2.0, -1.0),
            ],
            Provenance::default(),
        )
        .unwrap();
        let mut b = ProgramBuilder::new();
        let s = b.push(Scene, &[], &[]);
        let c = b.push(FilterColor, &[s], &["red"]);
        let f = b.push(FilterShape, &[c], &["school bus"]);
        let u = b.push(Unique, &[f], &[]);
        b.push(QuerySize, &[u], &[]);
        assert_eq!(execute(&b.build().unwrap(), &scene), Err(ExecError::NonUnique { index: 3, size: 2 }));

        let mut b = ProgramBuilder::new();
        let s = b.push(Scene, &[], &[]);
        let f = b.push(FilterSize, &[s], &["large"]);
        let u = b.push(Unique, &[f], &[]);
        b.push(QueryTexture, &[u], &[]);
        assert_eq!(execute(&b.build().unwrap(), &scene), Err(ExecError::MissingTexture { index: 3, object: 0 }));
    }

    #[test]
    fn same_excludes_anchor_and_relate_follows_graph() {
        let scene = five_object_scene();
        let mut b = ProgramBuilder::new();
        let s = b.push(Scene, &[], &[]);
        let f = b.push(FilterShape, &[s], &[&scene.objects[0].shape.clone()]);
        let u = b.push(Unique, &[f], &[]);
        let same = b.push(SameMaterial, &[u], &[]);
        b.push(Count, &[same], &[]);
        let p = b.build().unwrap();
        let trace = execute_trace(&p, &scene).unwrap();
        let ExecValue::ObjectSet(ids) = &trace[3] else { panic!() };
        assert!(!ids.contains(&0));
        let want: Vec<usize> =
            (1..scene.len()).filter(|&i| scene.objects[i].material == scene.objects[0].material).collect();
        assert_eq!(ids, &want);
    }

    #[test]
    fn answers_serialize_untagged() {
        assert_eq!(serde_json::to_string(&Answer::Integer(3)).unwrap(), "3");
        assert_eq!(serde_json::to_string(&Answer::Boolean(true)).unwrap(), "true");
        assert_eq!(serde_json::from_str::<Answer>("\"red\"").unwrap(), Answer::Attribute("red".into()));
        assert_eq!(Answer::Attribute(" Red".into()).normalized(), Answer::Attribute("red".into()));
    }
}
