//! Predicate-level stream dependency graph, component graph with master
//! node, stream-stratification check and pub/listening/augwant labels.
//!
//! Component edges point in the direction data flows: from the component
//! producing an atom to the component reading it through a window.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::lars_lang::{BodyAtom, GroundProgram, HeadPattern, Literal, RuleTemplate};
use crate::semantics::Window;
use crate::stream_model::Predicate;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecompositionError {
    #[error("program is not stream-stratified: cycle {}", fmt_cycle(.0))]
    NotStratified(Vec<NodeId>),
}

fn fmt_cycle(c: &[NodeId]) -> String {
    c.iter().map(ToString::to_string).collect::<Vec<_>>().join(" -> ")
}

/// Streaming atoms abstracted to predicates, plus negation nodes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DepNode {
    Atom(Predicate),
    At(Predicate),
    WinAt(Window, Predicate),
    WinDiamond(Window, Predicate),
    WinBox(Window, Predicate),
    Not(Box<DepNode>),
}

impl DepNode {
    /// The predicate underneath any operators.
    pub fn predicate(&self) -> &Predicate {
        match self {
            DepNode::Atom(p) | DepNode::At(p) | DepNode::WinAt(_, p) | DepNode::WinDiamond(_, p) | DepNode::WinBox(_, p) => p,
            DepNode::Not(n) => n.predicate(),
        }
    }
}

impl fmt::Display for DepNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DepNode::Atom(p) => write!(f, "{}", p.name),
            DepNode::At(p) => write!(f, "@{}", p.name),
            DepNode::WinAt(w, p) => write!(f, "{w}@{}", p.name),
            DepNode::WinDiamond(w, p) => write!(f, "{w}<>{}", p.name),
            DepNode::WinBox(w, p) => write!(f, "{w}[]{}", p.name),
            DepNode::Not(n) => write!(f, "not {n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Ge,
    Gt,
    Eq,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DepGraph {
    pub nodes: BTreeSet<DepNode>,
    /// Edges `u rel v`.
    pub edges: BTreeSet<(DepNode, Rel, DepNode)>,
}

impl DepGraph {
    fn add(&mut self, u: DepNode, rel: Rel, v: DepNode) {
        self.nodes.insert(u.clone());
        self.nodes.insert(v.clone());
        self.edges.insert((u, rel, v));
    }

    pub fn has_edge(&self, u: &DepNode, rel: Rel, v: &DepNode) -> bool {
        self.edges.contains(&(u.clone(), rel, v.clone()))
    }
}

fn body_node(b: &BodyAtom, tick_ms: u64) -> DepNode {
    let p = b.atom().predicate();
    match b {
        BodyAtom::Plain(_) => DepNode::Atom(p),
        BodyAtom::At(..) => DepNode::At(p),
        BodyAtom::WinAt(w, _, _) => DepNode::WinAt(w.resolve(tick_ms), p),
        BodyAtom::WinDiamond(w, _) => DepNode::WinDiamond(w.resolve(tick_ms), p),
        BodyAtom::WinBox(w, _) => DepNode::WinBox(w.resolve(tick_ms), p),
    }
}

fn head_node(h: &HeadPattern) -> DepNode {
    match h {
        HeadPattern::Plain(a) => DepNode::Atom(a.predicate()),
        HeadPattern::At(_, a) => DepNode::At(a.predicate()),
    }
}

/// Adds the operator edges of a streaming-atom node (items on `@` and window forms).
fn operator_edges(g: &mut DepGraph, u: &DepNode) {
    let inner = DepNode::Atom(u.predicate().clone());
    match u {
        DepNode::At(_) | DepNode::WinAt(..) => {
            g.add(u.clone(), Rel::Eq, inner.clone());
            g.add(inner, Rel::Eq, u.clone());
        }
        DepNode::WinDiamond(..) | DepNode::WinBox(..) => g.add(u.clone(), Rel::Gt, inner),
        DepNode::Atom(_) | DepNode::Not(_) => {
            g.nodes.insert(u.clone());
        }
    }
}

/// Dependency graph of (non-ground) rules; constraints must already be
/// rewritten into rules with heads.
pub fn build_dep_graph(rules: &[RuleTemplate], tick_ms: u64) -> DepGraph {
    let mut g = DepGraph::default();
    for r in rules {
        let Some(h) = &r.head else { continue };
        let head = head_node(h);
        operator_edges(&mut g, &head);
        for l in &r.body {
            let (b, negative) = match l {
                Literal::Pos(b) => (b, false),
                Literal::Neg(b) => (b, true),
                Literal::NotNot(a) => {
                    // Not normalized: treat as a negated negation node.
                    let v = DepNode::Atom(a.predicate());
                    g.add(head.clone(), Rel::Ge, v.clone());
                    g.add(v.clone(), Rel::Ge, DepNode::Not(Box::new(v)));
                    continue;
                }
                Literal::Cmp(..) => continue,
            };
            let v = body_node(b, tick_ms);
            g.add(head.clone(), Rel::Ge, v.clone());
            operator_edges(&mut g, &v);
            if negative {
                g.add(v.clone(), Rel::Ge, DepNode::Not(Box::new(v)));
            }
        }
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Master,
    Comp(usize),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Master => f.write_str("master"),
            NodeId::Comp(i) => write!(f, "c{}", i + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    /// Indices of the rules (templates) this component evaluates.
    pub rules: Vec<usize>,
    /// Predicates of all dependency-graph nodes in the component.
    pub predicates: BTreeSet<Predicate>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentGraph {
    pub components: Vec<Component>,
    /// Data-flow edges, including those to and from the master.
    pub edges: BTreeSet<(NodeId, NodeId)>,
}

impl ComponentGraph {
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::once(NodeId::Master).chain((0..self.components.len()).map(NodeId::Comp))
    }

    pub fn successors(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.edges.iter().filter(move |(a, _)| *a == u).map(|(_, b)| *b)
    }

    pub fn predecessors(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.edges.iter().filter(move |(_, b)| *b == u).map(|(a, _)| *a)
    }

    /// Single-component graph running every rule in one node.
    pub fn fused(rules: &[RuleTemplate]) -> ComponentGraph {
        let indices: Vec<usize> = (0..rules.len()).filter(|i| rules[*i].head.is_some()).collect();
        if indices.is_empty() {
            return ComponentGraph { components: Vec::new(), edges: BTreeSet::new() };
        }
        let predicates = rules
            .iter()
            .filter_map(|r| r.head.as_ref())
            .map(|h| h.atom().predicate())
            .chain(rules.iter().flat_map(|r| r.body_predicates()))
            .collect();
        let c = NodeId::Comp(0);
        ComponentGraph {
            components: vec![Component { rules: indices, predicates }],
            edges: [(NodeId::Master, c), (c, NodeId::Master)].into_iter().collect(),
        }
    }

    /// A cycle avoiding the master, if any.
    pub fn non_master_cycle(&self) -> Option<Vec<NodeId>> {
        let n = self.components.len();
        let mut adj = vec![Vec::new(); n];
        for (a, b) in &self.edges {
            if let (NodeId::Comp(i), NodeId::Comp(j)) = (a, b) {
                adj[*i].push(*j);
            }
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; n];
        let mut stack = Vec::new();
        fn dfs(u: usize, adj: &[Vec<usize>], state: &mut [u8], stack: &mut Vec<usize>) -> Option<Vec<usize>> {
            state[u] = 1;
            stack.push(u);
            for &v in &adj[u] {
                if state[v] == 1 {
                    let start = stack.iter().position(|x| *x == v).expect("on stack");
                    let mut cycle = stack[start..].to_vec();
                    cycle.push(v);
                    return Some(cycle);
                }
                if state[v] == 0 {
                    if let Some(c) = dfs(v, adj, state, stack) {
                        return Some(c);
                    }
                }
            }
            stack.pop();
            state[u] = 2;
            None
        }
        for s in 0..n {
            if state[s] == 0 {
                if let Some(c) = dfs(s, &adj, &mut state, &mut stack) {
                    return Some(c.into_iter().map(NodeId::Comp).collect());
                }
            }
        }
        None
    }
}

/// Every cycle passes through the master.
pub fn is_stream_stratified(c: &ComponentGraph) -> bool {
    c.non_master_cycle().is_none()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Components are connected components of `g` without `>` edges; rules go to
/// the component of their head; components without rules are dropped.
pub fn build_component_graph(g: &DepGraph, rules: &[RuleTemplate]) -> ComponentGraph {
    let nodes: Vec<&DepNode> = g.nodes.iter().collect();
    let index: BTreeMap<&DepNode, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut uf = UnionFind((0..nodes.len()).collect());
    for (u, rel, v) in &g.edges {
        if *rel != Rel::Gt {
            uf.union(index[u], index[v]);
        }
    }
    let mut groups: BTreeMap<usize, Component> = BTreeMap::new();
    for (i, r) in rules.iter().enumerate() {
        let Some(h) = &r.head else { continue };
        let root = uf.find(index[&head_node(h)]);
        groups.entry(root).or_insert_with(|| Component { rules: Vec::new(), predicates: BTreeSet::new() }).rules.push(i);
    }
    for (i, n) in nodes.iter().enumerate() {
        let root = uf.find(i);
        if let Some(c) = groups.get_mut(&root) {
            c.predicates.insert(n.predicate().clone());
        }
    }
    // Data flows from the producer of v to the reader of the window atom u.
    let mut raw_edges = BTreeSet::new();
    for (u, rel, v) in &g.edges {
        if *rel == Rel::Gt {
            let (ru, rv) = (uf.find(index[u]), uf.find(index[v]));
            if groups.contains_key(&ru) && groups.contains_key(&rv) {
                raw_edges.insert((rv, ru));
            }
        }
    }

    // Deterministic order: topological where possible, ties by smallest
    // head predicate name.
    let key = |c: &Component| -> String {
        c.rules.iter().filter_map(|i| rules[*i].head.as_ref()).map(|h| h.atom().pred.to_string()).min().unwrap_or_default()
    };
    let keys: BTreeMap<usize, String> = groups.iter().map(|(r, c)| (*r, key(c))).collect();
    let mut remaining: BTreeSet<usize> = groups.keys().copied().collect();
    let mut order: Vec<usize> = Vec::new();
    while !remaining.is_empty() {
        let ready: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|r| !raw_edges.iter().any(|(a, b)| b == r && a != r && remaining.contains(a)))
            .collect();
        let pool = if ready.is_empty() { remaining.iter().copied().collect() } else { ready };
        let next = pool.into_iter().min_by_key(|r| &keys[r]).expect("nonempty");
        order.push(next);
        remaining.remove(&next);
    }
    let pos: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, r)| (*r, i)).collect();
    let components: Vec<Component> = order.iter().map(|r| groups.remove(r).expect("component")).collect();
    let mut edges: BTreeSet<(NodeId, NodeId)> =
        raw_edges.iter().map(|(a, b)| (NodeId::Comp(pos[a]), NodeId::Comp(pos[b]))).collect();
    for i in 0..components.len() {
        let c = NodeId::Comp(i);
        if !edges.iter().any(|(a, b)| *b == c && *a != c) {
            edges.insert((NodeId::Master, c));
        }
        if !edges.iter().any(|(a, b)| *a == c && *b != c && *b != NodeId::Master) {
            edges.insert((c, NodeId::Master));
        }
    }
    ComponentGraph { components, edges }
}

/// Atom labels at predicate level.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeLabels {
    pub want: BTreeMap<NodeId, BTreeSet<Predicate>>,
    pub prod: BTreeMap<NodeId, BTreeSet<Predicate>>,
    pub publish: BTreeMap<NodeId, BTreeSet<Predicate>>,
    pub augwant: BTreeMap<NodeId, BTreeSet<Predicate>>,
    pub listening: BTreeMap<(NodeId, NodeId), BTreeSet<Predicate>>,
}

impl NodeLabels {
    pub fn listening(&self, from: NodeId, to: NodeId) -> &BTreeSet<Predicate> {
        static EMPTY: BTreeSet<Predicate> = BTreeSet::new();
        self.listening.get(&(from, to)).unwrap_or(&EMPTY)
    }
}

/// Least fixpoint of the pub/augwant/listening equations. `want` and `prod`
/// of a component are the body and head predicates of some of its rules.
pub fn label(
    c: &ComponentGraph,
    rules: &[RuleTemplate],
    intensional: &BTreeSet<Predicate>,
    extensional: &BTreeSet<Predicate>,
) -> Result<NodeLabels, DecompositionError> {
    if let Some(cycle) = c.non_master_cycle() {
        return Err(DecompositionError::NotStratified(cycle));
    }
    let mut l = NodeLabels::default();
    l.want.insert(NodeId::Master, intensional.clone());
    l.prod.insert(NodeId::Master, extensional.clone());
    for (i, comp) in c.components.iter().enumerate() {
        let id = NodeId::Comp(i);
        let want = comp.rules.iter().flat_map(|r| rules[*r].body_predicates()).collect();
        let prod = comp.rules.iter().filter_map(|r| rules[*r].head.as_ref()).map(|h| h.atom().predicate()).collect();
        l.want.insert(id, want);
        l.prod.insert(id, prod);
    }
    for u in c.nodes() {
        l.publish.insert(u, BTreeSet::new());
        l.augwant.insert(u, BTreeSet::new());
    }
    l.publish.insert(NodeId::Master, extensional.clone());
    l.augwant.insert(NodeId::Master, intensional.clone());
    loop {
        let mut changed = false;
        for u in c.nodes().filter(|u| *u != NodeId::Master) {
            let publish: BTreeSet<Predicate> = c.successors(u).flat_map(|w| l.augwant[&w].iter().cloned()).collect();
            let mut augwant = l.want[&u].clone();
            augwant.extend(publish.difference(&l.prod[&u]).cloned());
            if publish != l.publish[&u] || augwant != l.augwant[&u] {
                changed = true;
                l.publish.insert(u, publish);
                l.augwant.insert(u, augwant);
            }
        }
        if !changed {
            break;
        }
    }
    for (u, v) in &c.edges {
        let set = l.publish[u].intersection(&l.augwant[v]).cloned().collect();
        l.listening.insert((*u, *v), set);
    }
    Ok(l)
}

/// Component graph and labels of a grounded program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub graph: ComponentGraph,
    pub labels: NodeLabels,
}

impl Decomposition {
    pub fn new(program: &GroundProgram) -> Result<Self, DecompositionError> {
        let dep = build_dep_graph(&program.templates, program.options.tick_ms);
        let graph = build_component_graph(&dep, &program.templates);
        Self::with_graph(program, graph)
    }

    /// Everything in one component.
    pub fn fused(program: &GroundProgram) -> Result<Self, DecompositionError> {
        Self::with_graph(program, ComponentGraph::fused(&program.templates))
    }

    fn with_graph(program: &GroundProgram, graph: ComponentGraph) -> Result<Self, DecompositionError> {
        let labels = label(&graph, &program.templates, &program.intensional, &program.extensional)?;
        Ok(Decomposition { graph, labels })
    }

    pub fn to_json(&self, program: &GroundProgram) -> Value {
        let names = |s: &BTreeSet<Predicate>| s.iter().map(ToString::to_string).collect::<Vec<_>>();
        let nodes: Vec<Value> = self
            .graph
            .nodes()
            .map(|u| {
                let rules: Vec<Value> = match u {
                    NodeId::Master => Vec::new(),
                    NodeId::Comp(i) => self.graph.components[i]
                        .rules
                        .iter()
                        .map(|r| json!({"index": r, "text": program.templates[*r].to_string()}))
                        .collect(),
                };
                json!({
                    "id": u.to_string(),
                    "rules": rules,
                    "want": names(&self.labels.want[&u]),
                    "prod": names(&self.labels.prod[&u]),
                    "pub": names(&self.labels.publish[&u]),
                    "augwant": names(&self.labels.augwant[&u]),
                })
            })
            .collect();
        let edges: Vec<Value> = self
            .graph
            .edges
            .iter()
            .map(|(a, b)| json!({"from": a.to_string(), "to": b.to_string(), "listening": names(self.labels.listening(*a, *b))}))
            .collect();
        json!({"components": self.graph.components.len(), "nodes": nodes, "edges": edges})
    }

    pub fn to_dot(&self, program: &GroundProgram) -> String {
        let mut out = String::from("digraph components {\n  master [shape=doublecircle];\n");
        for (i, c) in self.graph.components.iter().enumerate() {
            let text: Vec<String> = c.rules.iter().map(|r| program.templates[*r].to_string().replace('"', "\\\"")).collect();
            let id = NodeId::Comp(i);
            out.push_str(&format!("  {id} [shape=box, label=\"{id}\\l{}\\l\"];\n", text.join("\\l")));
        }
        for (a, b) in &self.graph.edges {
            let l: Vec<String> = self.labels.listening(*a, *b).iter().map(ToString::to_string).collect();
            out.push_str(&format!("  {a} -> {b} [label=\"{}\"];\n", l.join(", ")));
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lars_lang::{ground, normalize, parse, GroundOptions};

    fn p(n: &str) -> Predicate {
        Predicate::new(n, 0)
    }

    fn dep(text: &str) -> DepGraph {
        build_dep_graph(&normalize(&parse(text).unwrap()).rules, 1000)
    }

    fn decompose(text: &str) -> (GroundProgram, Result<Decomposition, DecompositionError>) {
        let g = ground(&parse(text).unwrap(), GroundOptions::default()).unwrap();
        let d = Decomposition::new(&g);
        (g, d)
    }

    #[test]
    fn box_window_edges() {
        let g = dep("lfu :- high always [3].");
        let w = DepNode::WinBox(Window::time(3), p("high"));
        assert!(g.has_edge(&w, Rel::Gt, &DepNode::Atom(p("high"))));
        assert!(g.has_edge(&DepNode::Atom(p("lfu")), Rel::Ge, &w));
    }

    #[test]
    fn at_edges_both_directions() {
        let g = dep("a :- b at 5.");
        let at = DepNode::At(p("b"));
        assert!(g.has_edge(&at, Rel::Eq, &DepNode::Atom(p("b"))));
        assert!(g.has_edge(&DepNode::Atom(p("b")), Rel::Eq, &at));
    }

    #[test]
    fn negation_edges() {
        let g = dep("a :- not b.");
        let b = DepNode::Atom(p("b"));
        assert!(g.has_edge(&DepNode::Atom(p("a")), Rel::Ge, &b));
        assert!(g.has_edge(&b, Rel::Ge, &DepNode::Not(Box::new(b.clone()))));
    }

    #[test]
    fn single_rule_program() {
        let (_, d) = decompose("a :- b.");
        let d = d.unwrap();
        assert_eq!(d.graph.components.len(), 1);
        let c = NodeId::Comp(0);
        assert_eq!(d.graph.edges, [(NodeId::Master, c), (c, NodeId::Master)].into_iter().collect());
        assert_eq!(d.labels.listening(NodeId::Master, c), &[p("b")].into_iter().collect());
        assert_eq!(d.labels.listening(c, NodeId::Master), &[p("a")].into_iter().collect());
    }

    #[test]
    fn window_cycle_is_not_stratified() {
        let (_, d) = decompose("a :- b in [1]. b :- a in [1].");
        assert!(matches!(d, Err(DecompositionError::NotStratified(_))));
        let g = dep("a :- b in [1]. b :- a in [1].");
        let rules = normalize(&parse("a :- b in [1]. b :- a in [1].").unwrap()).rules;
        assert!(!is_stream_stratified(&build_component_graph(&g, &rules)));
    }

    #[test]
    fn self_recursion_through_window_is_not_stratified() {
        let (_, d) = decompose("a :- a in [2].");
        assert!(d.is_err());
    }

    #[test]
    fn even_loop_collapses_into_one_component() {
        let (_, d) = decompose("a :- not b. b :- not a.");
        let d = d.unwrap();
        assert_eq!(d.graph.components.len(), 1);
    }

    #[test]
    fn every_rule_in_exactly_one_component() {
        let (g, d) = decompose("a :- b in [2]. c :- a always [3], not d. d :- e. f :- c at 4 [1].");
        let d = d.unwrap();
        let mut all: Vec<usize> = d.graph.components.iter().flat_map(|c| c.rules.clone()).collect();
        all.sort();
        assert_eq!(all, (0..g.templates.len()).collect::<Vec<_>>());
        for ((u, v), set) in &d.labels.listening {
            assert!(set.is_subset(&d.labels.publish[u]));
            assert!(set.is_subset(&d.labels.augwant[v]));
        }
        let prods: BTreeSet<Predicate> = d.graph.components.iter().enumerate().flat_map(|(i, _)| d.labels.prod[&NodeId::Comp(i)].clone()).collect();
        assert_eq!(prods, g.intensional);
    }
}
