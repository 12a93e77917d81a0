//! Surface text from an instantiated program.

use std::collections::HashMap;

use super::template::{GroupKey, Slot, SlotKind, Template, TemplateNode};
use crate::program::{Function, Node, Program, ValueType};
use crate::scene::Relation;

#[derive(Clone, Debug, Default, PartialEq)]
struct GroupFill {
    filters: Vec<(Function, String)>,
    /// Relate clause not present in the template: relation and the anchor's filters.
    clause: Option<(Relation, Vec<(Function, String)>)>,
}

#[derive(Debug, Default)]
struct Fill {
    groups: HashMap<GroupKey, GroupFill>,
    relates: HashMap<usize, Relation>,
}

fn run_of(n: &Node, part: bool) -> (Vec<(Function, String)>, &Node) {
    let want = if part { ValueType::PartSet } else { ValueType::ObjectSet };
    let mut filters = Vec::new();
    let mut cur = n;
    while cur.function.is_filter() && cur.ty == want {
        filters.push((cur.function, cur.value_inputs[0].clone()));
        cur = &cur.children[0];
    }
    (filters, cur)
}

fn align(t: &Template, ti: usize, p: &Node, fill: &mut Fill) -> Option<()> {
    match &t.nodes[ti] {
        TemplateNode::Scene => (p.function == Function::Scene).then_some(()),
        TemplateNode::Group(g) => {
            let (filters, base) = run_of(p, g.key.part);
            let mut gf = GroupFill { filters, clause: None };
            match &t.nodes[g.input] {
                TemplateNode::Scene if base.function == Function::Relate => {
                    let (anchor, _) = run_of(base.children.first()?.children.first()?, false);
                    gf.clause = Some((base.value()?.parse().ok()?, anchor));
                }
                TemplateNode::Op { function: Function::Relate, .. } if base.function == Function::Scene => {}
                _ => align(t, g.input, base, fill)?,
            }
            fill.groups.insert(g.key.clone(), gf);
            Some(())
        }
        TemplateNode::Op { function, inputs } => {
            if p.function != *function || p.children.len() != inputs.len() {
                return None;
            }
            if *function == Function::Relate {
                fill.relates.insert(ti, p.value()?.parse().ok()?);
            }
            for (&i, c) in inputs.iter().zip(&p.children) {
                align(t, i, c, fill)?;
            }
            Some(())
        }
    }
}

pub fn plural(noun: &str) -> String {
    if noun.ends_with('s') || noun.ends_with('x') || noun.ends_with("ch") || noun.ends_with("sh") {
        format!("{noun}es")
    } else {
        format!("{noun}s")
    }
}

fn relation_phrase(r: Relation) -> &'static str {
    match r {
        Relation::Left => "left of",
        Relation::Right => "right of",
        Relation::Front => "in front of",
        Relation::Behind => "behind",
    }
}

fn value_of(filters: &[(Function, String)], f: Function) -> Option<&str> {
    filters.iter().find(|(g, _)| *g == f).map(|(_, v)| v.as_str())
}

fn object_np(filters: &[(Function, String)], plural_noun: bool) -> String {
    let mut words: Vec<&str> = [Function::FilterSize, Function::FilterColor, Function::FilterMaterial, Function::FilterTexture]
        .into_iter()
        .filter_map(|f| value_of(filters, f))
        .collect();
    let noun = value_of(filters, Function::FilterShape)
        .or_else(|| value_of(filters, Function::FilterCategory))
        .unwrap_or("object");
    let noun = if plural_noun { plural(noun) } else { noun.to_string() };
    words.push(&noun);
    words.join(" ")
}

fn part_np(filters: &[(Function, String)]) -> String {
    [Function::FilterColor, Function::FilterMaterial, Function::FilterPartName]
        .into_iter()
        .filter_map(|f| value_of(filters, f))
        .collect::<Vec<_>>()
        .join(" ")
}

fn group_np(key: &GroupKey, gf: &GroupFill, plural_noun: bool) -> String {
    if key.part {
        return part_np(&gf.filters);
    }
    let mut s = object_np(&gf.filters, plural_noun);
    if let Some((r, anchor)) = &gf.clause {
        s.push(' ');
        s.push_str(relation_phrase(*r));
        s.push_str(" the ");
        s.push_str(&object_np(anchor, false));
    }
    s
}

fn starts_with_vowel(w: &str) -> bool {
    w.chars().next().is_some_and(|c| "aeiouAEIOU".contains(c))
}

fn render(t: &Template, fill: &Fill) -> String {
    // braces: keep the span iff its relate survived
    let mut text = String::new();
    let mut rest = t.text.as_str();
    let mut r_index = 0;
    while let Some(open) = rest.find('{') {
        text.push_str(&rest[..open]);
        let close = rest[open..].find('}').expect("validated braces") + open;
        let span = &rest[open + 1..close];
        let present = t.relates.get(r_index).and_then(|ti| fill.relates.get(ti));
        if let Some(r) = present {
            text.push_str(&span.replace("<R>", relation_phrase(*r)));
        }
        r_index += span.matches("<R>").count();
        rest = &rest[close + 1..];
    }
    text.push_str(rest);

    // group tokens; a trailing "s" after the shape slot pluralizes the whole group
    let mut plural_groups: Vec<GroupKey> = Vec::new();
    let mut scan = text.as_str();
    while let Some(open) = scan.find('<') {
        let close = scan[open..].find('>').expect("validated tokens") + open;
        let slot = Slot::parse(&scan[open..=close]).expect("validated tokens");
        scan = &scan[close + 1..];
        if slot.kind == SlotKind::Shape && scan.starts_with('s') {
            plural_groups.push(slot.group());
        }
    }
    let mut out = String::new();
    let mut done: Vec<GroupKey> = Vec::new();
    let mut rest = text.as_str();
    while let Some(open) = rest.find('<') {
        out.push_str(&rest[..open]);
        let close = rest[open..].find('>').expect("validated tokens") + open;
        let slot = Slot::parse(&rest[open..=close]).expect("validated tokens");
        rest = &rest[close + 1..];
        if slot.kind == SlotKind::Shape && rest.starts_with('s') {
            rest = &rest[1..];
        }
        let key = slot.group();
        let plural_noun = plural_groups.contains(&key);
        if !done.contains(&key) {
            let gf = fill.groups.get(&key).cloned().unwrap_or_default();
            out.push_str(&group_np(&key, &gf, plural_noun));
            done.push(key);
        }
    }
    out.push_str(rest);

    // whitespace and articles
    let words: Vec<&str> = out.split_whitespace().collect();
    let mut fixed: Vec<String> = Vec::with_capacity(words.len());
    for (i, w) in words.iter().enumerate() {
        let next = words.get(i + 1).copied().unwrap_or("");
        if (*w == "a" || *w == "A") && starts_with_vowel(next) {
            fixed.push(format!("{w}n"));
        } else {
            fixed.push(w.to_string());
        }
    }
    let mut s = fixed.join(" ");
    for p in ["?", ",", "."] {
        s = s.replace(&format!(" {p}"), p);
    }
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => s,
    }
}

/// Deterministic slot substitution; `None` if `program` does not follow `template`'s skeleton.
pub fn realize_text(program: &Program, template: &Template) -> Option<String> {
    let mut fill = Fill::default();
    align(template, template.nodes.len() - 1, &program.to_tree(), &mut fill)?;
    Some(render(template, &fill))
}
