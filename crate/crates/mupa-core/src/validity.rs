//! Global correctness conditions on circular proofs, decided by Büchi
//! language inclusion.
//!
//! A proof graph spawns three automata over the alphabet of its edges
//! (node, premise-index pairs):
//!
//! * the **branch automaton** accepts exactly the infinite root-paths of
//!   the graph (deterministic, every state accepting);
//! * the **trace automaton** accepts the branches that carry a successful
//!   trace: a formula-ancestry path (see [`crate::trace`]) whose least
//!   unfolding priority occurring infinitely often is even — it skips a
//!   prefix, optionally tracks a formula, then commits to an even priority
//!   `p`, dying on anything smaller and ticking the Büchi condition each
//!   time `p` itself fires;
//! * the **good-branch automaton** accepts the branches along whose tail
//!   some ordinal variable stays in the constraint forever and is reset
//!   infinitely often.
//!
//! [`check_progressing`] asks `branches ⊆ traced`; [`check_reset_condition`]
//! asks `branches ⊆ good`. A failed inclusion yields a lasso-shaped
//! counterexample branch, which is shrunk and then re-verified by a direct
//! graph-theoretic confirmer that is independent of the language-inclusion
//! engines; disagreement between the two is reported as an internal error
//! rather than papered over.

use std::collections::HashMap;
use std::collections::{BTreeMap, BTreeSet};

use mupa_buchi::{includes, BuchiError, Inclusion, Lasso, Nba};

use crate::proof::{Node, Proof, ProofError, Rule};
use crate::trace::{trace_edges, TraceEdge};

/// Errors from the validity checks.
#[derive(Debug, thiserror::Error)]
pub enum ValidityError {
    #[error("proof structure: {0}")]
    Structure(#[from] ProofError),
    #[error("language inclusion engine: {0}")]
    Engine(#[from] BuchiError),
    #[error("lasso refers to unknown node {0}")]
    UnknownNode(String),
    #[error("lasso step {node} premise {premise} is out of range")]
    BadPremise { node: String, premise: usize },
    #[error("self-check failed: {0}")]
    SelfCheck(String),
}

/// One step of a branch: leave `node` through premise `premise`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchStep {
    pub node: String,
    pub premise: usize,
}

/// An ultimately periodic branch of the proof graph, witnessing a failed
/// global condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchLasso {
    pub stem: Vec<BranchStep>,
    pub cycle: Vec<BranchStep>,
}

impl std::fmt::Display for BranchLasso {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let step = |s: &BranchStep| format!("{}:{}", s.node, s.premise);
        for s in &self.stem {
            write!(f, "{} ", step(s))?;
        }
        write!(f, "(")?;
        for (i, s) in self.cycle.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", step(s))?;
        }
        write!(f, ")^w")
    }
}

/// Outcome of the progress check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProgressOutcome {
    Progressing,
    NotProgressing(BranchLasso),
}

/// Outcome of the reset check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResetOutcome {
    Satisfied,
    Violated(BranchLasso),
}

/// An automaton together with printable names for its states and letters.
pub struct LabeledNba {
    pub name: String,
    pub nba: Nba,
    pub states: Vec<String>,
    pub letters: Vec<String>,
}

/// The three automata of one proof graph, sharing an alphabet.
pub struct ProofAutomata {
    pub branch: LabeledNba,
    pub trace: LabeledNba,
    pub good_branch: LabeledNba,
}

/// One edge of the proof graph, identified by indices into `Graph::ids`.
#[derive(Debug, Clone, Copy)]
struct GEdge {
    src: usize,
    premise: usize,
    dst: usize,
}

/// The reachable proof graph with a fixed enumeration of nodes and edges.
/// Edge positions double as automaton letters.
struct Graph<'a> {
    ids: Vec<String>,
    nodes: Vec<&'a Node>,
    root: usize,
    edges: Vec<GEdge>,
    /// Letter indices leaving each node, plus the ancestry edges of the
    /// rule instance at that node.
    out: Vec<Vec<usize>>,
    traces: Vec<Vec<TraceEdge>>,
}

impl<'a> Graph<'a> {
    fn new(proof: &'a Proof) -> Result<Graph<'a>, ValidityError> {
        proof.validate_structure()?;
        let reach = proof.reachable();
        let ids: Vec<String> = reach.into_iter().collect();
        let index: BTreeMap<&str, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let nodes: Vec<&Node> = ids.iter().map(|id| proof.node(id)).collect();
        let root = index[proof.root.as_str()];
        let mut edges = Vec::new();
        let mut out = vec![Vec::new(); ids.len()];
        let mut traces = Vec::new();
        for (src, node) in nodes.iter().enumerate() {
            for (premise, p) in node.premises.iter().enumerate() {
                let dst = index[p.as_str()];
                out[src].push(edges.len());
                edges.push(GEdge { src, premise, dst });
            }
            let premise_nodes: Vec<&Node> =
                node.premises.iter().map(|p| proof.node(p)).collect();
            traces.push(trace_edges(node, &premise_nodes));
        }
        Ok(Graph {
            ids,
            nodes,
            root,
            edges,
            out,
            traces,
        })
    }

    fn letter_names(&self) -> Vec<String> {
        self.edges
            .iter()
            .map(|e| format!("{}:{}", self.ids[e.src], e.premise))
            .collect()
    }

    fn step(&self, lasso: &Lasso) -> Result<BranchLasso, ValidityError> {
        let decode = |letters: &[u32]| {
            letters
                .iter()
                .map(|&l| {
                    let e = self.edges[l as usize];
                    BranchStep {
                        node: self.ids[e.src].clone(),
                        premise: e.premise,
                    }
                })
                .collect()
        };
        Ok(BranchLasso {
            stem: decode(&lasso.stem),
            cycle: decode(&lasso.cycle),
        })
    }

    /// Deterministic automaton of all infinite root-paths: states are the
    /// graph nodes, every state accepts.
    fn branch_nba(&self) -> LabeledNba {
        let mut nba = Nba::new(self.edges.len() as u32);
        for _ in 0..self.nodes.len() {
            nba.add_state(true);
        }
        nba.add_initial(self.root as u32);
        for (i, e) in self.edges.iter().enumerate() {
            nba.add_transition(e.src as u32, i as u32, e.dst as u32);
        }
        LabeledNba {
            name: "branch".to_string(),
            nba,
            states: self.ids.clone(),
            letters: self.letter_names(),
        }
    }

    /// Automaton of branches carrying a successful trace. Built lazily
    /// from the initial states; unreachable combinations never materialise.
    fn trace_nba(&self) -> LabeledNba {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        enum TState {
            /// Following the branch, not yet tracing.
            Search(usize),
            /// Tracing formula `pos` of node `n`.
            Track(usize, usize),
            /// Tracing, committed to even priority `p`; the flag records
            /// whether the step just taken emitted exactly `p`.
            Committed(usize, usize, u64, bool),
        }

        // Candidate commitments: the even priorities that actually occur.
        let mut evens: BTreeSet<u64> = BTreeSet::new();
        for tes in &self.traces {
            for te in tes {
                if let Some(p) = te.kind.priority() {
                    if p % 2 == 0 {
                        evens.insert(p);
                    }
                }
            }
        }
        let evens: Vec<u64> = evens.into_iter().collect();

        let mut nba = Nba::new(self.edges.len() as u32);
        let mut states: Vec<TState> = Vec::new();
        let mut names: Vec<String> = Vec::new();
        let mut lookup: HashMap<TState, u32> = HashMap::new();
        let mut work: Vec<u32> = Vec::new();
        let mut intern = |s: TState,
                          nba: &mut Nba,
                          states: &mut Vec<TState>,
                          names: &mut Vec<String>,
                          work: &mut Vec<u32>|
         -> u32 {
            if let Some(&q) = lookup.get(&s) {
                return q;
            }
            let accepting = matches!(s, TState::Committed(_, _, _, true));
            let q = nba.add_state(accepting);
            lookup.insert(s, q);
            states.push(s);
            names.push(match s {
                TState::Search(n) => format!("search {}", self.ids[n]),
                TState::Track(n, i) => format!("track {}#{}", self.ids[n], i),
                TState::Committed(n, i, p, e) => format!(
                    "commit {}#{} p={}{}",
                    self.ids[n],
                    i,
                    p,
                    if e { " !" } else { "" }
                ),
            });
            work.push(q);
            q
        };

        let root = self.root;
        let mut initial = vec![TState::Search(root)];
        for pos in 0..self.nodes[root].sequent.len() {
            initial.push(TState::Track(root, pos));
            for &p in &evens {
                initial.push(TState::Committed(root, pos, p, false));
            }
        }
        for s in initial {
            let q = intern(s, &mut nba, &mut states, &mut names, &mut work);
            nba.add_initial(q);
        }

        while let Some(q) = work.pop() {
            let s = states[q as usize];
            let n = match s {
                TState::Search(n) | TState::Track(n, _) | TState::Committed(n, _, _, _) => n,
            };
            for &letter in &self.out[n] {
                let e = self.edges[letter];
                match s {
                    TState::Search(_) => {
                        // Keep searching, or start tracing any formula of
                        // the premise node.
                        let t = intern(
                            TState::Search(e.dst),
                            &mut nba,
                            &mut states,
                            &mut names,
                            &mut work,
                        );
                        nba.add_transition(q, letter as u32, t);
                        for pos in 0..self.nodes[e.dst].sequent.len() {
                            let t = intern(
                                TState::Track(e.dst, pos),
                                &mut nba,
                                &mut states,
                                &mut names,
                                &mut work,
                            );
                            nba.add_transition(q, letter as u32, t);
                        }
                    }
                    TState::Track(_, pos) => {
                        for te in &self.traces[n] {
                            if te.premise != e.premise || te.from != pos {
                                continue;
                            }
                            let t = intern(
                                TState::Track(e.dst, te.to),
                                &mut nba,
                                &mut states,
                                &mut names,
                                &mut work,
                            );
                            nba.add_transition(q, letter as u32, t);
                            for &p in &evens {
                                if let Some(prio) = te.kind.priority() {
                                    if prio < p {
                                        continue;
                                    }
                                }
                                let emitted = te.kind.priority() == Some(p);
                                let t = intern(
                                    TState::Committed(e.dst, te.to, p, emitted),
                                    &mut nba,
                                    &mut states,
                                    &mut names,
                                    &mut work,
                                );
                                nba.add_transition(q, letter as u32, t);
                            }
                        }
                    }
                    TState::Committed(_, pos, p, _) => {
                        for te in &self.traces[n] {
                            if te.premise != e.premise || te.from != pos {
                                continue;
                            }
                            if let Some(prio) = te.kind.priority() {
                                if prio < p {
                                    continue;
                                }
                            }
                            let emitted = te.kind.priority() == Some(p);
                            let t = intern(
                                TState::Committed(e.dst, te.to, p, emitted),
                                &mut nba,
                                &mut states,
                                &mut names,
                                &mut work,
                            );
                            nba.add_transition(q, letter as u32, t);
                        }
                    }
                }
            }
        }

        LabeledNba {
            name: "trace".to_string(),
            nba,
            states: names,
            letters: self.letter_names(),
        }
    }

    /// Ordinal variables of a node's constraint (empty when unannotated).
    fn ord_vars(&self, n: usize) -> BTreeSet<String> {
        self.nodes[n]
            .constraint
            .as_ref()
            .map(|c| c.vars().clone())
            .unwrap_or_default()
    }

    /// Automaton of branches on whose tail some ordinal variable survives
    /// forever and is reset infinitely often.
    fn good_branch_nba(&self) -> LabeledNba {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        enum GState {
            Wait(usize),
            /// Watching ordinal variable (by universe index) at node.
            Watch(usize, usize),
        }

        let mut universe: BTreeSet<String> = BTreeSet::new();
        for n in 0..self.nodes.len() {
            universe.extend(self.ord_vars(n));
        }
        let universe: Vec<String> = universe.into_iter().collect();
        let uindex: BTreeMap<&str, usize> = universe
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        let has: Vec<Vec<bool>> = (0..self.nodes.len())
            .map(|n| {
                let vs = self.ord_vars(n);
                universe.iter().map(|v| vs.contains(v)).collect()
            })
            .collect();
        // A watch state accepts at a node that resets the watched variable.
        let resets: Vec<Option<usize>> = self
            .nodes
            .iter()
            .map(|node| match &node.rule {
                Rule::Reset { kappa } => uindex.get(kappa.as_str()).copied(),
                _ => None,
            })
            .collect();

        let mut nba = Nba::new(self.edges.len() as u32);
        let mut states: Vec<GState> = Vec::new();
        let mut names: Vec<String> = Vec::new();
        let mut lookup: HashMap<GState, u32> = HashMap::new();
        let mut work: Vec<u32> = Vec::new();
        let mut intern = |s: GState,
                          nba: &mut Nba,
                          states: &mut Vec<GState>,
                          names: &mut Vec<String>,
                          work: &mut Vec<u32>|
         -> u32 {
            if let Some(&q) = lookup.get(&s) {
                return q;
            }
            let accepting = match s {
                GState::Wait(_) => false,
                GState::Watch(n, k) => resets[n] == Some(k),
            };
            let q = nba.add_state(accepting);
            lookup.insert(s, q);
            states.push(s);
            names.push(match s {
                GState::Wait(n) => format!("wait {}", self.ids[n]),
                GState::Watch(n, k) => format!("watch {} {}", self.ids[n], universe[k]),
            });
            work.push(q);
            q
        };

        let root = self.root;
        let mut initial = vec![GState::Wait(root)];
        for (k, _) in universe.iter().enumerate() {
            if has[root][k] {
                initial.push(GState::Watch(root, k));
            }
        }
        for s in initial {
            let q = intern(s, &mut nba, &mut states, &mut names, &mut work);
            nba.add_initial(q);
        }

        while let Some(q) = work.pop() {
            let s = states[q as usize];
            let n = match s {
                GState::Wait(n) | GState::Watch(n, _) => n,
            };
            for &letter in &self.out[n] {
                let e = self.edges[letter];
                match s {
                    GState::Wait(_) => {
                        let t = intern(
                            GState::Wait(e.dst),
                            &mut nba,
                            &mut states,
                            &mut names,
                            &mut work,
                        );
                        nba.add_transition(q, letter as u32, t);
                        for (k, &present) in has[e.dst].iter().enumerate() {
                            if present {
                                let t = intern(
                                    GState::Watch(e.dst, k),
                                    &mut nba,
                                    &mut states,
                                    &mut names,
                                    &mut work,
                                );
                                nba.add_transition(q, letter as u32, t);
                            }
                        }
                    }
                    GState::Watch(_, k) => {
                        if has[e.dst][k] {
                            let t = intern(
                                GState::Watch(e.dst, k),
                                &mut nba,
                                &mut states,
                                &mut names,
                                &mut work,
                            );
                            nba.add_transition(q, letter as u32, t);
                        }
                    }
                }
            }
        }

        LabeledNba {
            name: "good-branch".to_string(),
            nba,
            states: names,
            letters: self.letter_names(),
        }
    }

    /// Shrink a counterexample lasso by splicing out repeated automaton
    /// states, keeping every candidate that the condition automaton still
    /// rejects. The branch automaton is deterministic, so states along the
    /// word are exactly the visited graph nodes.
    fn minimize_lasso(&self, condition: &Nba, lasso: &Lasso) -> Result<Lasso, ValidityError> {
        let mut stem = lasso.stem.clone();
        let mut cycle = lasso.cycle.clone();
        if cycle.is_empty() {
            return Err(ValidityError::SelfCheck(
                "counterexample lasso has an empty cycle".to_string(),
            ));
        }
        let trail = |word: &[u32], start: usize| -> Result<Vec<usize>, ValidityError> {
            let mut at = start;
            let mut seen = vec![at];
            for &l in word {
                let e = self.edges[l as usize];
                if e.src != at {
                    return Err(ValidityError::SelfCheck(
                        "counterexample is not a path of the proof graph".to_string(),
                    ));
                }
                at = e.dst;
                seen.push(at);
            }
            Ok(seen)
        };
        let rejects = |stem: &[u32], cycle: &[u32]| -> bool {
            !condition.accepts_ultimately_periodic(stem, cycle)
        };
        if !rejects(&stem, &cycle) {
            return Err(ValidityError::SelfCheck(
                "inclusion counterexample is accepted by the condition automaton".to_string(),
            ));
        }
        // Splice repeated states out of the cycle, then out of the stem,
        // re-validating after each candidate cut.
        loop {
            let states = trail(&cycle, trail(&stem, self.root)?[stem.len()])?;
            let mut cut = None;
            'outer: for i in 0..states.len() {
                for j in (i + 1)..states.len() {
                    if states[i] == states[j] && j - i < cycle.len() {
                        cut = Some((i, j));
                        break 'outer;
                    }
                }
            }
            let Some((i, j)) = cut else { break };
            let mut candidate = cycle.clone();
            candidate.drain(i..j);
            if rejects(&stem, &candidate) {
                cycle = candidate;
            } else {
                break;
            }
        }
        loop {
            let states = trail(&stem, self.root)?;
            let mut cut = None;
            'outer: for i in 0..states.len() {
                for j in (i + 1)..states.len() {
                    if states[i] == states[j] {
                        cut = Some((i, j));
                        break 'outer;
                    }
                }
            }
            let Some((i, j)) = cut else { break };
            let mut candidate = stem.clone();
            candidate.drain(i..j);
            if rejects(&candidate, &cycle) {
                stem = candidate;
            } else {
                break;
            }
        }
        Ok(Lasso { stem, cycle })
    }
}

/// Build all three automata of a proof for inspection or export.
pub fn build_automata(proof: &Proof) -> Result<ProofAutomata, ValidityError> {
    let g = Graph::new(proof)?;
    Ok(ProofAutomata {
        branch: g.branch_nba(),
        trace: g.trace_nba(),
        good_branch: g.good_branch_nba(),
    })
}

/// Render one automaton as a deterministic text listing.
pub fn render_nba(l: &LabeledNba) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "automaton {}: {} states, {} letters\n",
        l.name,
        l.nba.num_states(),
        l.nba.alphabet_size()
    ));
    let name = |q: u32| l.states[q as usize].clone();
    let mut initial: Vec<String> = l.nba.initial_states().iter().map(|&q| name(q)).collect();
    initial.sort();
    out.push_str(&format!("initial: {}\n", initial.join(", ")));
    let mut accepting: Vec<String> = l.nba.accepting_states().map(name).collect();
    accepting.sort();
    out.push_str(&format!("accepting: {}\n", accepting.join(", ")));
    let mut lines = Vec::new();
    for q in 0..l.nba.num_states() as u32 {
        for &(letter, t) in l.nba.transitions_from(q) {
            lines.push(format!(
                "  [{}] --{}--> [{}]",
                name(q),
                l.letters[letter as usize],
                name(t)
            ));
        }
    }
    lines.sort();
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Decide whether every infinite branch of the proof carries a successful
/// trace. Counterexamples are shrunk and independently confirmed.
pub fn check_progressing(proof: &Proof) -> Result<ProgressOutcome, ValidityError> {
    let g = Graph::new(proof)?;
    let branch = g.branch_nba();
    let trace = g.trace_nba();
    match includes(&branch.nba, &trace.nba)? {
        Inclusion::Holds => Ok(ProgressOutcome::Progressing),
        Inclusion::Counterexample(lasso) => {
            if !branch.nba.accepts_ultimately_periodic(&lasso.stem, &lasso.cycle) {
                return Err(ValidityError::SelfCheck(
                    "counterexample is not a branch of the proof".to_string(),
                ));
            }
            let lasso = g.minimize_lasso(&trace.nba, &lasso)?;
            let branch_lasso = g.step(&lasso)?;
            if !confirm_not_progressing(proof, &branch_lasso)? {
                return Err(ValidityError::SelfCheck(format!(
                    "inclusion engine rejected branch {branch_lasso}, but a direct search \
                     finds a successful trace on it"
                )));
            }
            Ok(ProgressOutcome::NotProgressing(branch_lasso))
        }
    }
}

/// Decide whether every infinite branch satisfies the reset condition.
/// Counterexamples are shrunk and independently confirmed.
pub fn check_reset_condition(proof: &Proof) -> Result<ResetOutcome, ValidityError> {
    let g = Graph::new(proof)?;
    let branch = g.branch_nba();
    let good = g.good_branch_nba();
    match includes(&branch.nba, &good.nba)? {
        Inclusion::Holds => Ok(ResetOutcome::Satisfied),
        Inclusion::Counterexample(lasso) => {
            if !branch.nba.accepts_ultimately_periodic(&lasso.stem, &lasso.cycle) {
                return Err(ValidityError::SelfCheck(
                    "counterexample is not a branch of the proof".to_string(),
                ));
            }
            let lasso = g.minimize_lasso(&good.nba, &lasso)?;
            let branch_lasso = g.step(&lasso)?;
            if !confirm_reset_failure(proof, &branch_lasso)? {
                return Err(ValidityError::SelfCheck(format!(
                    "inclusion engine rejected branch {branch_lasso}, but some ordinal \
                     variable survives its cycle and is reset on it"
                )));
            }
            Ok(ResetOutcome::Violated(branch_lasso))
        }
    }
}

/// The cycle's nodes and taken premise indices, resolved and validated.
fn cycle_nodes<'a>(
    proof: &'a Proof,
    lasso: &BranchLasso,
) -> Result<Vec<(&'a Node, usize)>, ValidityError> {
    if lasso.cycle.is_empty() {
        return Err(ValidityError::SelfCheck(
            "lasso cycle is empty".to_string(),
        ));
    }
    let mut out = Vec::new();
    for step in &lasso.cycle {
        let node = proof
            .nodes
            .get(&step.node)
            .ok_or_else(|| ValidityError::UnknownNode(step.node.clone()))?;
        if step.premise >= node.premises.len() {
            return Err(ValidityError::BadPremise {
                node: step.node.clone(),
                premise: step.premise,
            });
        }
        out.push((node, step.premise));
    }
    // The steps must chain up and close.
    for (i, (node, premise)) in out.iter().enumerate() {
        let next = &out[(i + 1) % out.len()].0.id;
        if &node.premises[*premise] != next {
            return Err(ValidityError::SelfCheck(format!(
                "lasso cycle does not close: {}:{} does not lead to {}",
                node.id, premise, next
            )));
        }
    }
    Ok(out)
}

/// Strongly connected components by Kosaraju's method (iterative).
/// Returns a component index per vertex.
fn scc(n: usize, adj: &[Vec<usize>]) -> Vec<usize> {
    let mut radj = vec![Vec::new(); n];
    for (u, vs) in adj.iter().enumerate() {
        for &v in vs {
            radj[v].push(u);
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut stack = vec![(s, 0usize)];
        seen[s] = true;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if *next < adj[u].len() {
                let v = adj[u][*next];
                *next += 1;
                if !seen[v] {
                    seen[v] = true;
                    stack.push((v, 0));
                }
            } else {
                order.push(u);
                stack.pop();
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut c = 0;
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = c;
        while let Some(u) = stack.pop() {
            for &v in &radj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = c;
                    stack.push(v);
                }
            }
        }
        c += 1;
    }
    comp
}

/// Directly confirm that no successful trace lives on the given lasso,
/// without Büchi machinery: build the (cycle phase × formula position)
/// ancestry graph and, for each even priority `p` occurring in it, ask
/// whether some `p`-edge closes a cycle inside the subgraph of edges with
/// priority at least `p` (carries count as unbounded). Such a cycle is
/// exactly a trace whose least infinitely-recurring priority is `p`.
///
/// Returns `true` when the lasso is confirmed non-successful.
pub fn confirm_not_progressing(
    proof: &Proof,
    lasso: &BranchLasso,
) -> Result<bool, ValidityError> {
    let cyc = cycle_nodes(proof, lasso)?;
    let len = cyc.len();
    // Vertices: (phase, formula position), flattened per phase.
    let widths: Vec<usize> = cyc.iter().map(|(n, _)| n.sequent.len()).collect();
    let offset: Vec<usize> = widths
        .iter()
        .scan(0, |acc, w| {
            let o = *acc;
            *acc += w;
            Some(o)
        })
        .collect();
    let total: usize = widths.iter().sum();
    let mut arcs: Vec<(usize, usize, Option<u64>)> = Vec::new();
    for (phase, (node, premise)) in cyc.iter().enumerate() {
        let premise_nodes: Vec<&Node> = node.premises.iter().map(|p| proof.node(p)).collect();
        let next = (phase + 1) % len;
        for te in trace_edges(node, &premise_nodes) {
            if te.premise != *premise {
                continue;
            }
            if te.from >= widths[phase] || te.to >= widths[next] {
                continue;
            }
            arcs.push((
                offset[phase] + te.from,
                offset[next] + te.to,
                te.kind.priority(),
            ));
        }
    }
    let evens: BTreeSet<u64> = arcs
        .iter()
        .filter_map(|&(_, _, p)| p)
        .filter(|p| p % 2 == 0)
        .collect();
    for p in evens {
        let mut adj = vec![Vec::new(); total];
        for &(u, v, prio) in &arcs {
            if prio.is_none_or(|q| q >= p) {
                adj[u].push(v);
            }
        }
        let comp = scc(total, &adj);
        for &(u, v, prio) in &arcs {
            if prio == Some(p) && comp[u] == comp[v] {
                // A cycle through this edge stays at priorities >= p and
                // hits p itself infinitely often: a successful trace.
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Directly confirm that the lasso violates the reset condition: no
/// ordinal variable lies in every cycle node's constraint while also being
/// reset somewhere on the cycle. Returns `true` when confirmed.
pub fn confirm_reset_failure(
    proof: &Proof,
    lasso: &BranchLasso,
) -> Result<bool, ValidityError> {
    let cyc = cycle_nodes(proof, lasso)?;
    let mut survivors: Option<BTreeSet<String>> = None;
    for (node, _) in &cyc {
        let vars = node
            .constraint
            .as_ref()
            .map(|c| c.vars().clone())
            .unwrap_or_default();
        survivors = Some(match survivors {
            None => vars,
            Some(s) => s.intersection(&vars).cloned().collect(),
        });
    }
    let survivors = survivors.unwrap_or_default();
    for (node, _) in &cyc {
        if let Rule::Reset { kappa } = &node.rule {
            if survivors.contains(kappa) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proof::{Constraint, Sequent};
    use crate::sexpr::parse_formula;

    fn f(s: &str) -> crate::formula::Formula {
        parse_formula(s).unwrap()
    }

    fn node(id: &str, rule: Rule, seq: Vec<&str>, premises: Vec<&str>) -> Node {
        Node {
            id: id.to_string(),
            rule,
            sequent: Sequent(seq.into_iter().map(f).collect()),
            constraint: None,
            premises: premises.into_iter().map(|s| s.to_string()).collect(),
        }
    }

    fn proof_of(root: &str, nodes: Vec<Node>) -> Proof {
        Proof {
            root: root.to_string(),
            nodes: nodes.into_iter().map(|n| (n.id.clone(), n)).collect(),
        }
    }

    #[test]
    fn an_unfounded_mu_loop_is_rejected_with_a_one_step_lasso() {
        let p = proof_of(
            "m",
            vec![node(
                "m",
                Rule::Mu,
                vec!["(in 0 (mu X x (in x X)))"],
                vec!["m"],
            )],
        );
        match check_progressing(&p).unwrap() {
            ProgressOutcome::NotProgressing(l) => {
                assert!(l.stem.is_empty(), "stem should minimize away: {l}");
                assert_eq!(l.cycle.len(), 1);
                assert_eq!(l.cycle[0].node, "m");
                assert!(confirm_not_progressing(&p, &l).unwrap());
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn a_nu_loop_progresses() {
        let p = proof_of(
            "n",
            vec![node(
                "n",
                Rule::Nu { fresh: None },
                vec!["(in 0 (nu X x (in x X)))"],
                vec!["n"],
            )],
        );
        assert_eq!(
            check_progressing(&p).unwrap(),
            ProgressOutcome::Progressing
        );
    }

    #[test]
    fn carries_alone_do_not_make_progress() {
        // A loop that only exchanges two formulas unfolds nothing.
        let p = proof_of(
            "a",
            vec![
                node(
                    "a",
                    Rule::Exchange { at: 0 },
                    vec!["(= 0 0)", "(< 0 0)"],
                    vec!["b"],
                ),
                node(
                    "b",
                    Rule::Exchange { at: 0 },
                    vec!["(< 0 0)", "(= 0 0)"],
                    vec!["a"],
                ),
            ],
        );
        match check_progressing(&p).unwrap() {
            ProgressOutcome::NotProgressing(l) => {
                assert_eq!(l.cycle.len(), 2);
                assert!(confirm_not_progressing(&p, &l).unwrap());
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn one_successful_trace_suffices_even_next_to_an_unfounded_one() {
        // Two formula slots survive a four-node loop. The nu slot unfolds
        // (even priority) at node a, the mu slot (odd priority) at node c;
        // exchanges shuttle each into last position before its unfolding.
        // The trace following the nu slot succeeds, which is enough.
        let nu = "(in 0 (nu X x (in x X)))";
        let mu = "(in 0 (mu X x (in x X)))";
        let p = proof_of(
            "a",
            vec![
                node("a", Rule::Nu { fresh: None }, vec![mu, nu], vec!["b"]),
                node("b", Rule::Exchange { at: 0 }, vec![mu, nu], vec!["c"]),
                node("c", Rule::Mu, vec![nu, mu], vec!["d"]),
                node("d", Rule::Exchange { at: 0 }, vec![nu, mu], vec!["a"]),
            ],
        );
        assert_eq!(
            check_progressing(&p).unwrap(),
            ProgressOutcome::Progressing
        );
    }

    #[test]
    fn finite_proofs_have_no_infinite_branches_to_check() {
        let p = proof_of(
            "r",
            vec![
                node("r", Rule::Weaken, vec!["(= 0 0)", "(< 0 0)"], vec!["l"]),
                node("l", Rule::EqRefl, vec!["(= 0 0)"], vec![]),
            ],
        );
        assert_eq!(
            check_progressing(&p).unwrap(),
            ProgressOutcome::Progressing
        );
        assert_eq!(check_reset_condition(&p).unwrap(), ResetOutcome::Satisfied);
    }

    fn annotated(mut n: Node, vars: Vec<&str>) -> Node {
        let mut c = Constraint::new();
        for v in vars {
            c = c.add_root(v).unwrap();
        }
        n.constraint = Some(c);
        n
    }

    #[test]
    fn a_surviving_variable_reset_forever_satisfies_the_reset_condition() {
        let p = proof_of(
            "a",
            vec![
                annotated(
                    node("a", Rule::Reset { kappa: "k0".to_string() }, vec!["(= 0 0)"], vec!["b"]),
                    vec!["k0", "k1"],
                ),
                annotated(
                    node("b", Rule::Weaken, vec!["(= 0 0)"], vec!["a"]),
                    vec!["k0"],
                ),
            ],
        );
        assert_eq!(check_reset_condition(&p).unwrap(), ResetOutcome::Satisfied);
    }

    #[test]
    fn a_loop_without_resets_violates_the_reset_condition() {
        let p = proof_of(
            "m",
            vec![annotated(
                node("m", Rule::Mu, vec!["(in 0 (mu X x (in x X)))"], vec!["m"]),
                vec![],
            )],
        );
        match check_reset_condition(&p).unwrap() {
            ResetOutcome::Violated(l) => {
                assert_eq!(l.cycle.len(), 1);
                assert!(confirm_reset_failure(&p, &l).unwrap());
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn resetting_a_variable_that_later_disappears_does_not_help() {
        // k1 is reset on the loop but dropped at node b; k0 survives but is
        // never reset.
        let p = proof_of(
            "a",
            vec![
                annotated(
                    node("a", Rule::Reset { kappa: "k1".to_string() }, vec!["(= 0 0)"], vec!["b"]),
                    vec!["k0", "k1"],
                ),
                annotated(
                    node("b", Rule::Cw { removed: vec!["k1".to_string()] }, vec!["(= 0 0)"], vec!["c"]),
                    vec!["k0"],
                ),
                annotated(
                    node("c", Rule::Prune, vec!["(= 0 0)"], vec!["a"]),
                    vec!["k0", "k1"],
                ),
            ],
        );
        match check_reset_condition(&p).unwrap() {
            ResetOutcome::Violated(l) => {
                assert!(confirm_reset_failure(&p, &l).unwrap());
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn automata_render_deterministically() {
        let p = proof_of(
            "n",
            vec![node(
                "n",
                Rule::Nu { fresh: None },
                vec!["(in 0 (nu X x (in x X)))"],
                vec!["n"],
            )],
        );
        let a = build_automata(&p).unwrap();
        let r1 = render_nba(&a.branch);
        let r2 = render_nba(&build_automata(&p).unwrap().branch);
        assert_eq!(r1, r2);
        assert!(r1.contains("automaton branch: 1 states, 1 letters"));
        let t = render_nba(&a.trace);
        assert!(t.contains("commit"));
    }

    #[test]
    fn lassos_through_larger_graphs_minimize_to_the_offending_loop() {
        // A progressing entry region followed by an unfounded mu loop.
        let p = proof_of(
            "r",
            vec![
                node("r", Rule::Weaken, vec!["(in 0 (mu X x (in x X)))", "(= 0 0)"], vec!["s"]),
                node("s", Rule::Weaken, vec!["(in 0 (mu X x (in x X)))"], vec!["m"]),
                node("m", Rule::Mu, vec!["(in 0 (mu X x (in x X)))"], vec!["m"]),
            ],
        );
        match check_progressing(&p).unwrap() {
            ProgressOutcome::NotProgressing(l) => {
                assert_eq!(l.cycle.len(), 1);
                assert_eq!(l.cycle[0].node, "m");
                assert!(l.stem.len() <= 2);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }
}
