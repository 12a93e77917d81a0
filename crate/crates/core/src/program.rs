//! Typed reasoning programs.
//!
//! A program is a list of operations in CLEVR's record form
//! (`function` / `inputs` / `value_inputs`). Inputs point at strictly earlier
//! operations, the last operation is the single sink, and every edge is
//! checked against the signature table in [`Function::result_type`].
//! `filter_color`, `filter_material`, `unique`, `query_color` and
//! `query_material` are overloaded on objects and parts; the overload is
//! resolved from the input type.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{Attribute, ConceptVocabulary};
use crate::scene::Relation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Function {
    Scene,
    FilterSize,
    FilterColor,
    FilterMaterial,
    FilterShape,
    FilterTexture,
    FilterCategory,
    FilterPartName,
    Unique,
    Relate,
    SameSize,
    SameColor,
    SameMaterial,
    SameShape,
    Intersect,
    Union,
    Count,
    Exist,
    QuerySize,
    QueryColor,
    QueryMaterial,
    QueryShape,
    QueryTexture,
    EqualInteger,
    LessThan,
    GreaterThan,
    EqualSize,
    EqualColor,
    EqualMaterial,
    EqualShape,
    ObjectToPart,
    PartToObject,
}

/// What a filter operation tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FilterKey {
    Attr(Attribute),
    Category,
    PartName,
}

impl Function {
    pub const ALL: [Function; 32] = [
        Function::Scene,
        Function::FilterSize,
        Function::FilterColor,
        Function::FilterMaterial,
        Function::FilterShape,
        Function::FilterTexture,
        Function::FilterCategory,
        Function::FilterPartName,
        Function::Unique,
        Function::Relate,
        Function::SameSize,
        Function::SameColor,
        Function::SameMaterial,
        Function::SameShape,
        Function::Intersect,
        Function::Union,
        Function::Count,
        Function::Exist,
        Function::QuerySize,
        Function::QueryColor,
        Function::QueryMaterial,
        Function::QueryShape,
        Function::QueryTexture,
        Function::EqualInteger,
        Function::LessThan,
        Function::GreaterThan,
        Function::EqualSize,
        Function::EqualColor,
        Function::EqualMaterial,
        Function::EqualShape,
        Function::ObjectToPart,
        Function::PartToObject,
    ];

    pub fn name(self) -> &'static str {
        use Function::*;
        match self {
            Scene => "scene",
            FilterSize => "filter_size",
            FilterColor => "filter_color",
            FilterMaterial => "filter_material",
            FilterShape => "filter_shape",
            FilterTexture => "filter_texture",
            FilterCategory => "filter_category",
            FilterPartName => "filter_part_name",
            Unique => "unique",
            Relate => "relate",
            SameSize => "same_size",
            SameColor => "same_color",
            SameMaterial => "same_material",
            SameShape => "same_shape",
            Intersect => "intersect",
            Union => "union",
            Count => "count",
            Exist => "exist",
            QuerySize => "query_size",
            QueryColor => "query_color",
            QueryMaterial => "query_material",
            QueryShape => "query_shape",
            QueryTexture => "query_texture",
            EqualInteger => "equal_integer",
            LessThan => "less_than",
            GreaterThan => "greater_than",
            EqualSize => "equal_size",
            EqualColor => "equal_color",
            EqualMaterial => "equal_material",
            EqualShape => "equal_shape",
            ObjectToPart => "object_to_part",
            PartToObject => "part_to_object",
        }
    }

    pub fn filter_key(self) -> Option<FilterKey> {
        use Function::*;
        Some(match self {
            FilterSize => FilterKey::Attr(Attribute::Size),
            FilterColor => FilterKey::Attr(Attribute::Color),
            FilterMaterial => FilterKey::Attr(Attribute::Material),
            FilterShape => FilterKey::Attr(Attribute::Shape),
            FilterTexture => FilterKey::Attr(Attribute::Texture),
            FilterCategory => FilterKey::Category,
            FilterPartName => FilterKey::PartName,
            _ => return None,
        })
    }

    pub fn filter_for(attr: Attribute) -> Function {
        match attr {
            Attribute::Size => Function::FilterSize,
            Attribute::Color => Function::FilterColor,
            Attribute::Material => Function::FilterMaterial,
            Attribute::Shape => Function::FilterShape,
            Attribute::Texture => Function::FilterTexture,
        }
    }

    pub fn is_filter(self) -> bool {
        self.filter_key().is_some()
    }

    /// Attribute read by `query_*` and `same_*`.
    pub fn attribute(self) -> Option<Attribute> {
        use Function::*;
        Some(match self {
            QuerySize | SameSize | EqualSize => Attribute::Size,
            QueryColor | SameColor | EqualColor => Attribute::Color,
            QueryMaterial | SameMaterial | EqualMaterial => Attribute::Material,
            QueryShape | SameShape | EqualShape => Attribute::Shape,
            QueryTexture => Attribute::Texture,
            _ => return None,
        })
    }

    pub fn is_query(self) -> bool {
        use Function::*;
        matches!(self, QuerySize | QueryColor | QueryMaterial | QueryShape | QueryTexture)
    }

    pub fn is_same(self) -> bool {
        use Function::*;
        matches!(self, SameSize | SameColor | SameMaterial | SameShape)
    }

    pub fn input_arity(self) -> usize {
        use Function::*;
        match self {
            Scene => 0,
            Intersect | Union | EqualInteger | LessThan | GreaterThan | EqualSize | EqualColor | EqualMaterial
            | EqualShape => 2,
            _ => 1,
        }
    }

    pub fn value_arity(self) -> usize {
        if self.is_filter() || self == Function::Relate {
            1
        } else {
            0
        }
    }

    /// Result type for the given input types, or `None` if no overload applies.
    pub fn result_type(self, inputs: &[ValueType]) -> Option<ValueType> {
        use Function::*;
        use ValueType as T;
        let t = match (self, inputs) {
            (Scene, []) => T::ObjectSet,
            (FilterColor | FilterMaterial, [T::PartSet]) => T::PartSet,
            (FilterPartName, [T::PartSet]) => T::PartSet,
            (FilterSize | FilterColor | FilterMaterial | FilterShape | FilterTexture | FilterCategory, [T::ObjectSet]) => {
                T::ObjectSet
            }
            (Unique, [T::ObjectSet]) => T::Object,
            (Unique, [T::PartSet]) => T::Part,
            (Relate | SameSize | SameColor | SameMaterial | SameShape, [T::Object]) => T::ObjectSet,
            (Intersect | Union, [T::ObjectSet, T::ObjectSet]) => T::ObjectSet,
            (Count, [T::ObjectSet]) => T::Integer,
            (Exist, [T::ObjectSet]) => T::Boolean,
            (QueryColor | QueryMaterial, [T::Part]) => T::Attr(self.attribute()?),
            (QuerySize | QueryColor | QueryMaterial | QueryShape | QueryTexture, [T::Object]) => {
                T::Attr(self.attribute()?)
            }
            (EqualInteger | LessThan | GreaterThan, [T::Integer, T::Integer]) => T::Boolean,
            (EqualSize | EqualColor | EqualMaterial | EqualShape, [T::Attr(a), T::Attr(b)])
                if *a == self.attribute()? && *b == *a =>
            {
                T::Boolean
            }
            (ObjectToPart, [T::Object | T::ObjectSet]) => T::PartSet,
            (PartToObject, [T::PartSet]) => T::ObjectSet,
            _ => return None,
        };
        Some(t)
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Function {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Function::ALL.into_iter().find(|f| f.name() == s).ok_or(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ValueType {
    ObjectSet,
    Object,
    PartSet,
    Part,
    Integer,
    Boolean,
    Attr(Attribute),
}

impl ValueType {
    pub fn is_answer(self) -> bool {
        matches!(self, ValueType::Integer | ValueType::Boolean | ValueType::Attr(_))
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::ObjectSet => f.write_str("ObjectSet"),
            ValueType::Object => f.write_str("Object"),
            ValueType::PartSet => f.write_str("PartSet"),
            ValueType::Part => f.write_str("Part"),
            ValueType::Integer => f.write_str("Integer"),
            ValueType::Boolean => f.write_str("Boolean"),
            ValueType::Attr(a) => write!(f, "Attribute({a})"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramError {
    #[error("empty program")]
    Empty,
    #[error("operation {index}: unknown function {name:?}")]
    UnknownFunction { index: usize, name: String },
    #[error("operation {index} ({function}): expected {expected} inputs, found {found}")]
    InputArity { index: usize, function: Function, expected: usize, found: usize },
    #[error("operation {index} ({function}): expected {expected} value inputs, found {found}")]
    ValueArity { index: usize, function: Function, expected: usize, found: usize },
    #[error("operation {index}: input {input} is not an earlier operation")]
    ForwardReference { index: usize, input: usize },
    #[error("operation {index} ({function}): invalid literal {value:?}")]
    InvalidLiteral { index: usize, function: Function, value: String },
    #[error("operation {index} ({function}): no signature accepts inputs ({found})")]
    TypeMismatch { index: usize, function: Function, found: String },
    #[error("operation {index}: result is never used (programs have exactly one sink)")]
    MultipleSinks { index: usize },
    #[error("operation {index} ({function}): final result must be an attribute, integer or boolean, found {found}")]
    BadSinkType { index: usize, function: Function, found: ValueType },
}

impl ProgramError {
    pub fn index(&self) -> Option<usize> {
        use ProgramError::*;
        match self {
            Empty => None,
            UnknownFunction { index, .. }
            | InputArity { index, .. }
            | ValueArity { index, .. }
            | ForwardReference { index, .. }
            | InvalidLiteral { index, .. }
            | TypeMismatch { index, .. }
            | MultipleSinks { index }
            | BadSinkType { index, .. } => Some(*index),
        }
    }
}

/// Wire form of one operation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpRecord {
    pub function: String,
    #[serde(default)]
    pub inputs: Vec<usize>,
    #[serde(default)]
    pub value_inputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Operation {
    pub function: Function,
    pub inputs: Vec<usize>,
    pub value_inputs: Vec<String>,
}

impl Operation {
    pub fn new(function: Function, inputs: Vec<usize>, value_inputs: Vec<String>) -> Self {
        Operation { function, inputs, value_inputs }
    }

    pub fn value(&self) -> Option<&str> {
        self.value_inputs.first().map(String::as_str)
    }

    pub fn relation(&self) -> Option<Relation> {
        self.value().and_then(|v| v.parse().ok())
    }
}

/// A parsed and type-checked program.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Program {
    ops: Vec<Operation>,
    types: Vec<ValueType>,
}

/// Structural checks: known functions, arities, backward references, relation names.
pub fn parse_structure(records: &[OpRecord]) -> Result<Vec<Operation>, ProgramError> {
    records
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let function = r
                .function
                .parse::<Function>()
                .map_err(|_| ProgramError::UnknownFunction { index, name: r.function.clone() })?;
            let op = Operation::new(function, r.inputs.clone(), r.value_inputs.clone());
            check_structure(index, &op)?;
            Ok(op)
        })
        .collect()
}

fn check_structure(index: usize, op: &Operation) -> Result<(), ProgramError> {
    let function = op.function;
    if op.inputs.len() != function.input_arity() {
        return Err(ProgramError::InputArity { index, function, expected: function.input_arity(), found: op.inputs.len() });
    }
    if op.value_inputs.len() != function.value_arity() {
        return Err(ProgramError::ValueArity {
            index,
            function,
            expected: function.value_arity(),
            found: op.value_inputs.len(),
        });
    }
    if let Some(&input) = op.inputs.iter().find(|&&i| i >= index) {
        return Err(ProgramError::ForwardReference { index, input });
    }
    if function == Function::Relate && op.relation().is_none() {
        return Err(ProgramError::InvalidLiteral { index, function, value: op.value_inputs[0].clone() });
    }
    Ok(())
}

/// Assigns a result type to every operation and checks the single-sink rule.
pub fn typecheck(ops: &[Operation]) -> Result<Vec<ValueType>, ProgramError> {
    if ops.is_empty() {
        return Err(ProgramError::Empty);
    }
    let mut types: Vec<ValueType> = Vec::with_capacity(ops.len());
    let mut used = vec![false; ops.len()];
    for (index, op) in ops.iter().enumerate() {
        check_structure(index, op)?;
        let inputs: Vec<ValueType> = op.inputs.iter().map(|&i| types[i]).collect();
        let t = op.function.result_type(&inputs).ok_or_else(|| ProgramError::TypeMismatch {
            index,
            function: op.function,
            found: inputs.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", "),
        })?;
        for &i in &op.inputs {
            used[i] = true;
        }
        types.push(t);
    }
    let last = ops.len() - 1;
    if let Some(index) = used[..last].iter().position(|u| !u) {
        return Err(ProgramError::MultipleSinks { index });
    }
    if !types[last].is_answer() {
        return Err(ProgramError::BadSinkType { index: last, function: ops[last].function, found: types[last] });
    }
    Ok(types)
}

pub fn parse_program(records: &[OpRecord]) -> Result<Program, ProgramError> {
    Program::new(parse_structure(records)?)
}

impl Program {
    pub fn new(ops: Vec<Operation>) -> Result<Program, ProgramError> {
        let types = typecheck(&ops)?;
        Ok(Program { ops, types })
    }

    pub fn ops(&self) -> &[Operation] {
        &self.ops
    }

    pub fn types(&self) -> &[ValueType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn sink_type(&self) -> ValueType {
        *self.types.last().expect("programs are nonempty")
    }

    pub fn to_records(&self) -> Vec<OpRecord> {
        self.ops
            .iter()
            .map(|op| OpRecord {
                function: op.function.name().to_string(),
                inputs: op.inputs.clone(),
                value_inputs: op.value_inputs.clone(),
            })
            .collect()
    }

    /// Checks attribute, category and part-name literals against `vocab`.
    pub fn check_literals(&self, vocab: &ConceptVocabulary) -> Result<(), ProgramError> {
        for (index, op) in self.ops.iter().enumerate() {
            let Some(value) = op.value() else { continue };
            let ok = match op.function.filter_key() {
                Some(FilterKey::Attr(a)) => vocab.index_of(a, value).is_some(),
                Some(FilterKey::Category) => vocab.category_index(value).is_some(),
                Some(FilterKey::PartName) => vocab.parts.values().any(|ps| ps.iter().any(|p| p == value)),
                None => true,
            };
            if !ok {
                return Err(ProgramError::InvalidLiteral { index, function: op.function, value: value.to_string() });
            }
        }
        Ok(())
    }

    pub fn to_tree(&self) -> Node {
        self.subtree(self.ops.len() - 1)
    }

    fn subtree(&self, index: usize) -> Node {
        let op = &self.ops[index];
        Node {
            function: op.function,
            value_inputs: op.value_inputs.clone(),
            children: op.inputs.iter().map(|&i| self.subtree(i)).collect(),
            ty: self.types[index],
            origin: Some(index),
        }
    }
}

impl Serialize for Program {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_records().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Program {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let records = Vec::<OpRecord>::deserialize(deserializer)?;
        parse_program(&records).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, op) in self.ops.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}", op.function)?;
            if !op.value_inputs.is_empty() {
                write!(f, "({})", op.value_inputs.join(", "))?;
            }
        }
        Ok(())
    }
}

/// Tree view of a program, used by the question generator's rewrites.
///
/// `origin` is the index of the operation in the program the tree came
/// from, or `None` for nodes inserted by a rewrite.
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub function: Function,
    pub value_inputs: Vec<String>,
    pub children: Vec<Node>,
    pub ty: ValueType,
    pub origin: Option<usize>,
}

impl Node {
    pub fn scene() -> Node {
        Node { function: Function::Scene, value_inputs: vec![], children: vec![], ty: ValueType::ObjectSet, origin: None }
    }

    /// Builds a node, deriving its type from the children.
    pub fn new(function: Function, value_inputs: Vec<String>, children: Vec<Node>) -> Option<Node> {
        let inputs: Vec<ValueType> = children.iter().map(|c| c.ty).collect();
        let ty = function.result_type(&inputs)?;
        Some(Node { function, value_inputs, children, ty, origin: None })
    }

    pub fn value(&self) -> Option<&str> {
        self.value_inputs.first().map(String::as_str)
    }

    /// Postorder emission; children are emitted left to right.
    pub fn to_program(&self) -> Result<Program, ProgramError> {
        let mut ops = Vec::new();
        self.emit(&mut ops);
        Program::new(ops)
    }

    fn emit(&self, ops: &mut Vec<Operation>) -> usize {
        let inputs = self.children.iter().map(|c| c.emit(ops)).collect();
        ops.push(Operation::new(self.function, inputs, self.value_inputs.clone()));
        ops.len() - 1
    }

    /// Postorder operations without type checking, plus each operation's `origin`.
    pub fn emit_ops(&self) -> (Vec<Operation>, Vec<Option<usize>>) {
        fn go(n: &Node, ops: &mut Vec<Operation>, origins: &mut Vec<Option<usize>>) -> usize {
            let inputs = n.children.iter().map(|c| go(c, ops, origins)).collect();
            ops.push(Operation::new(n.function, inputs, n.value_inputs.clone()));
            origins.push(n.origin);
            ops.len() - 1
        }
        let (mut ops, mut origins) = (Vec::new(), Vec::new());
        go(self, &mut ops, &mut origins);
        (ops, origins)
    }

    /// Preorder traversal.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Node)) {
        visit(self);
        for c in &self.children {
            c.walk(visit);
        }
    }
}

/// Incremental construction of programs in record order.
#[derive(Default)]
pub struct ProgramBuilder {
    ops: Vec<Operation>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, function: Function, inputs: &[usize], values: &[&str]) -> usize {
        self.ops.push(Operation::new(function, inputs.to_vec(), values.iter().map(|s| s.to_string()).collect()));
        self.ops.len() - 1
    }

    pub fn build(self) -> Result<Program, ProgramError> {
        Program::new(self.ops)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Function::*;

    fn rec(function: &str, inputs: &[usize], values: &[&str]) -> OpRecord {
        OpRecord {
            function: function.into(),
            inputs: inputs.to_vec(),
            value_inputs: values.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn query_color_of_truck() {
        let p = parse_program(&[
            rec("scene", &[], &[]),
            rec("filter_shape", &[0], &["truck"]),
            rec("unique", &[1], &[]),
            rec("query_color", &[2], &[]),
        ])
        .unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.sink_type(), ValueType::Attr(Attribute::Color));
    }

    #[test]
    fn minimal_count() {
        let p = parse_program(&[rec("scene", &[], &[]), rec("count", &[0], &[])]).unwrap();
        assert_eq!(p.sink_type(), ValueType::Integer);
    }

    #[test]
    fn forward_reference() {
        let err = parse_program(&[
            rec("scene", &[], &[]),
            rec("unique", &[0], &[]),
            rec("relate", &[1], &["left"]),
            rec("count", &[5], &[]),
        ])
        .unwrap_err();
        assert_eq!(err, ProgramError::ForwardReference { index: 3, input: 5 });
        assert_eq!(err.index(), Some(3));
    }

    #[test]
    fn structural_errors_name_the_operation() {
        let e = parse_program(&[rec("scene", &[], &[]), rec("frobnicate", &[0], &[])]).unwrap_err();
        assert_eq!(e.index(), Some(1));
        let e = parse_program(&[rec("scene", &[], &[]), rec("filter_color", &[0], &[])]).unwrap_err();
        assert!(matches!(e, ProgramError::ValueArity { index: 1, .. }));
        let e = parse_program(&[rec("scene", &[], &[]), rec("intersect", &[0], &[])]).unwrap_err();
        assert!(matches!(e, ProgramError::InputArity { index: 1, .. }));
        let e = parse_program(&[rec("scene", &[], &[]), rec("unique", &[0], &[]), rec("relate", &[1], &["above"])])
            .unwrap_err();
        assert!(matches!(e, ProgramError::InvalidLiteral { index: 2, .. }));
    }

    #[test]
    fn type_errors() {
        let mut b = ProgramBuilder::new();
        let s = b.push(Scene, &[], &[]);
        b.push(QueryColor, &[s], &[]);
        assert!(matches!(b.build(), Err(ProgramError::TypeMismatch { index: 1, .. })));

        let mut b = ProgramBuilder::new();
        let s = b.push(Scene, &[], &[]);
        let u = b.push(Unique, &[s], &[]);
        let p = b.push(PartToObject, &[u], &[]);
        b.push(Count, &[p], &[]);
        assert!(matches!(b.build(), Err(ProgramError::TypeMismatch { index: 2, .. })));

        let mut b = ProgramBuilder::new();
        let s = b.push(Scene, &[], &[]);
        let f = b.push(FilterColor, &[s], &["red"]);
        let c1 = b.push(Count, &[f], &[]);
        let s2 = b.push(Scene, &[], &[]);
        let c2 = b.push(Count, &[s2], &[]);
        b.push(EqualInteger, &[c1, c2], &[]);
        assert!(b.build().is_ok());
    }

    #[test]
    fn multi_sink_and_bad_sink() {
        let mut b = ProgramBuilder::new();
        let s = b.push(Scene, &[], &[]);
        b.push(Scene, &[], &[]);
        b.push(Count, &[s], &[]);
        assert_eq!(b.build(), Err(ProgramError::MultipleSinks { index: 1 }));

        let mut b = ProgramBuilder::new();
        let s = b.push(Scene, &[], &[]);
        b.push(FilterColor, &[s], &["red"]);
        assert!(matches!(b.build(), Err(ProgramError::BadSinkType { index: 1, .. })));
        assert_eq!(Program::new(vec![]), Err(ProgramError::Empty));
    }

    #[test]
    fn attribute_comparisons_must_agree() {
        let mut b = ProgramBuilder::new();
        let s = b.push(Scene, &[], &[]);
        let u = b.push(Unique, &[s], &[]);
        let q1 = b.push(QueryColor, &[u], &[]);
        let s2 = b.push(Scene, &[], &[]);
        let u2 = b.push(Unique, &[s2], &[]);
        let q2 = b.push(QuerySize, &[u2], &[]);
        b.push(EqualColor, &[q1, q2], &[]);
        assert!(matches!(b.build(), Err(ProgramError::TypeMismatch { index: 6, .. })));
    }

    #[test]
    fn part_overloads() {
        let mut b = ProgramBuilder::new();
        let s = b.push(Scene, &[], &[]);
        let f = b.push(FilterShape, &[s], &["sedan"]);
        let u = b.push(Unique, &[f], &[]);
        let ps = b.push(ObjectToPart, &[u], &[]);
        let pf = b.push(FilterPartName, &[ps], &["hood"]);
        let pu = b.push(Unique, &[pf], &[]);
        b.push(QueryColor, &[pu], &[]);
        let p = b.build().unwrap();
        assert_eq!(p.types()[5], ValueType::Part);
        // part-level shape query is not in the signature table
        let mut ops = p.ops().to_vec();
        ops[6].function = QueryShape;
        assert!(Program::new(ops).is_err());
    }

    #[test]
    fn literal_check() {
        let vocab = ConceptVocabulary::default();
        let p = parse_program(&[rec("scene", &[], &[]), rec("filter_color", &[0], &["mauve"]), rec("count", &[1], &[])])
            .unwrap();
        assert!(matches!(p.check_literals(&vocab), Err(ProgramError::InvalidLiteral { index: 1, .. })));
    }

    #[test]
    fn tree_round_trip() {
        let mut b = ProgramBuilder::new();
        let s = b.push(Scene, &[], &[]);
        let f = b.push(FilterColor, &[s], &["cyan"]);
        let u = b.push(Unique, &[f], &[]);
        let r = b.push(Relate, &[u], &["behind"]);
        let f2 = b.push(FilterShape, &[r], &["regular bus"]);
        let u2 = b.push(Unique, &[f2], &[]);
        b.push(QueryColor, &[u2], &[]);
        let p = b.build().unwrap();
        assert_eq!(p.to_tree().to_program().unwrap(), p);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Program>(&json).unwrap(), p);
    }
}
