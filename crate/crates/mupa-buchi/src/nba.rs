//! Core NBA representation, ultimately-periodic membership, emptiness with
//! lasso extraction, and the Büchi product.

pub type State = u32;
pub type Letter = u32;

/// Nondeterministic Büchi automaton over the alphabet `{0, …, alphabet_size-1}`.
#[derive(Debug, Clone)]
pub struct Nba {
    alphabet_size: u32,
    accepting: Vec<bool>,
    initial: Vec<State>,
    /// Outgoing transitions per state, in insertion order.
    delta: Vec<Vec<(Letter, State)>>,
}

/// An ultimately periodic word `stem · cycle^ω` (cycle nonempty).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lasso {
    pub stem: Vec<Letter>,
    pub cycle: Vec<Letter>,
}

impl Nba {
    pub fn new(alphabet_size: u32) -> Self {
        Nba {
            alphabet_size,
            accepting: Vec::new(),
            initial: Vec::new(),
            delta: Vec::new(),
        }
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }

    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn add_state(&mut self, accepting: bool) -> State {
        self.accepting.push(accepting);
        self.delta.push(Vec::new());
        (self.accepting.len() - 1) as State
    }

    pub fn set_accepting(&mut self, q: State, acc: bool) {
        self.accepting[q as usize] = acc;
    }

    pub fn is_accepting(&self, q: State) -> bool {
        self.accepting[q as usize]
    }

    pub fn add_initial(&mut self, q: State) {
        if !self.initial.contains(&q) {
            self.initial.push(q);
        }
    }

    pub fn initial_states(&self) -> &[State] {
        &self.initial
    }

    pub fn add_transition(&mut self, from: State, letter: Letter, to: State) {
        debug_assert!(letter < self.alphabet_size);
        let out = &mut self.delta[from as usize];
        if !out.contains(&(letter, to)) {
            out.push((letter, to));
        }
    }

    pub fn transitions_from(&self, q: State) -> &[(Letter, State)] {
        &self.delta[q as usize]
    }

    pub fn successors<'a>(&'a self, q: State, letter: Letter) -> impl Iterator<Item = State> + 'a {
        self.delta[q as usize]
            .iter()
            .filter(move |(l, _)| *l == letter)
            .map(|&(_, t)| t)
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.num_states() as State).filter(|&q| self.is_accepting(q))
    }

    /// Does the automaton accept `stem · cycle^ω`? `cycle` must be nonempty.
    pub fn accepts_ultimately_periodic(&self, stem: &[Letter], cycle: &[Letter]) -> bool {
        assert!(!cycle.is_empty(), "cycle of an ultimately periodic word must be nonempty");
        // Deterministic position automaton for the word: positions
        // 0..stem.len() then stem.len()..stem.len()+cycle.len() looping.
        let s = stem.len();
        let c = cycle.len();
        let total = s + c;
        let letter_at = |i: usize| -> Letter {
            if i < s {
                stem[i]
            } else {
                cycle[i - s]
            }
        };
        let next_pos = |i: usize| -> usize {
            if i + 1 < total {
                i + 1
            } else {
                s
            }
        };
        // Product graph node: pos * n + state.
        let n = self.num_states();
        if n == 0 {
            return false;
        }
        let node = |pos: usize, q: State| pos * n + q as usize;
        let mut reach = vec![false; total * n];
        let mut stack: Vec<usize> = Vec::new();
        for &q0 in &self.initial {
            let v = node(0, q0);
            if !reach[v] {
                reach[v] = true;
                stack.push(v);
            }
        }
        let mut edges: Vec<Vec<usize>> = vec![Vec::new(); total * n];
        while let Some(v) = stack.pop() {
            let pos = v / n;
            let q = (v % n) as State;
            let a = letter_at(pos);
            let np = next_pos(pos);
            for q2 in self.successors(q, a) {
                let w = node(np, q2);
                edges[v].push(w);
                if !reach[w] {
                    reach[w] = true;
                    stack.push(w);
                }
            }
        }
        // Accepting run exists iff some reachable cycle in the product goes
        // through a node with an accepting automaton state. Any cycle stays
        // within one SCC, so look for a nontrivial SCC (or self-loop)
        // containing an accepting node.
        let sccs = tarjan_sccs(total * n, |v| edges[v].iter().copied(), &reach);
        let mut scc_of = vec![usize::MAX; total * n];
        for (i, scc) in sccs.iter().enumerate() {
            for &v in scc {
                scc_of[v] = i;
            }
        }
        for (i, scc) in sccs.iter().enumerate() {
            let mut has_internal_edge = false;
            'outer: for &v in scc {
                for &w in &edges[v] {
                    if scc_of[w] == i {
                        has_internal_edge = true;
                        break 'outer;
                    }
                }
            }
            if !has_internal_edge {
                continue;
            }
            if scc.iter().any(|&v| self.is_accepting((v % n) as State)) {
                return true;
            }
        }
        false
    }

    /// Emptiness check. Returns an accepting lasso if the language is
    /// nonempty, `None` otherwise.
    pub fn find_accepting_lasso(&self) -> Option<Lasso> {
        let n = self.num_states();
        if n == 0 || self.initial.is_empty() {
            return None;
        }
        // Reachability from initial states.
        let mut reach = vec![false; n];
        let mut stack: Vec<State> = Vec::new();
        for &q in &self.initial {
            if !reach[q as usize] {
                reach[q as usize] = true;
                stack.push(q);
            }
        }
        while let Some(q) = stack.pop() {
            for &(_, t) in self.transitions_from(q) {
                if !reach[t as usize] {
                    reach[t as usize] = true;
                    stack.push(t);
                }
            }
        }
        let sccs = tarjan_sccs(
            n,
            |v| self.delta[v].iter().map(|&(_, t)| t as usize),
            &reach,
        );
        let mut scc_of = vec![usize::MAX; n];
        for (i, scc) in sccs.iter().enumerate() {
            for &v in scc {
                scc_of[v] = i;
            }
        }
        for (i, scc) in sccs.iter().enumerate() {
            let mut internal = false;
            'e: for &v in scc {
                for &(_, t) in self.transitions_from(v as State) {
                    if scc_of[t as usize] == i {
                        internal = true;
                        break 'e;
                    }
                }
            }
            if !internal {
                continue;
            }
            if let Some(&target) = scc.iter().find(|&&v| self.is_accepting(v as State)) {
                let stem = self.shortest_path_letters(&self.initial, target, None)?;
                let cycle = self.shortest_cycle_letters(target, &scc_of, i)?;
                return Some(Lasso { stem, cycle });
            }
        }
        None
    }

    /// BFS shortest letter path from any of `sources` to `target`,
    /// optionally restricted to states within one SCC.
    fn shortest_path_letters(
        &self,
        sources: &[State],
        target: usize,
        restrict: Option<(&[usize], usize)>,
    ) -> Option<Vec<Letter>> {
        let n = self.num_states();
        let ok = |v: usize| match restrict {
            None => true,
            Some((scc_of, i)) => scc_of[v] == i,
        };
        let mut prev: Vec<Option<(usize, Letter)>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        for &s in sources {
            if ok(s as usize) && !seen[s as usize] {
                seen[s as usize] = true;
                queue.push_back(s as usize);
            }
        }
        if seen.get(target) == Some(&true) {
            return Some(Vec::new());
        }
        while let Some(v) = queue.pop_front() {
            for &(a, t) in self.transitions_from(v as State) {
                let t = t as usize;
                if ok(t) && !seen[t] {
                    seen[t] = true;
                    prev[t] = Some((v, a));
                    if t == target {
                        let mut letters = Vec::new();
                        let mut cur = target;
                        while let Some((p, a)) = prev[cur] {
                            letters.push(a);
                            cur = p;
                        }
                        letters.reverse();
                        return Some(letters);
                    }
                    queue.push_back(t);
                }
            }
        }
        None
    }

    /// Shortest nonempty cycle through `target` staying inside its SCC.
    fn shortest_cycle_letters(
        &self,
        target: usize,
        scc_of: &[usize],
        scc_idx: usize,
    ) -> Option<Vec<Letter>> {
        // One forced step out of target, then a shortest path back.
        let mut best: Option<Vec<Letter>> = None;
        for &(a, t) in self.transitions_from(target as State) {
            let t = t as usize;
            if scc_of[t] != scc_idx {
                continue;
            }
            if t == target {
                return Some(vec![a]);
            }
            if let Some(mut back) =
                self.shortest_path_letters(&[t as State], target, Some((scc_of, scc_idx)))
            {
                let mut cyc = vec![a];
                cyc.append(&mut back);
                if best.as_ref().map_or(true, |b| cyc.len() < b.len()) {
                    best = Some(cyc);
                }
            }
        }
        best
    }

    /// Büchi intersection with the standard two-phase counter construction.
    pub fn intersect(&self, other: &Nba) -> Nba {
        assert_eq!(self.alphabet_size, other.alphabet_size);
        let mut out = Nba::new(self.alphabet_size);
        let mut index: std::collections::HashMap<(State, State, u8), State> =
            std::collections::HashMap::new();
        let mut stack: Vec<(State, State, u8)> = Vec::new();
        let get = |out: &mut Nba,
                       stack: &mut Vec<(State, State, u8)>,
                       index: &mut std::collections::HashMap<(State, State, u8), State>,
                       key: (State, State, u8),
                       acc: bool|
         -> State {
            *index.entry(key).or_insert_with(|| {
                let q = out.add_state(acc);
                stack.push(key);
                q
            })
        };
        for &qa in &self.initial {
            for &qb in &other.initial {
                let key = (qa, qb, 0u8);
                let acc = false;
                let q = get(&mut out, &mut stack, &mut index, key, acc);
                out.add_initial(q);
            }
        }
        while let Some((qa, qb, i)) = stack.pop() {
            let from = index[&(qa, qb, i)];
            let i_next = if i == 0 {
                if self.is_accepting(qa) {
                    1
                } else {
                    0
                }
            } else if other.is_accepting(qb) {
                0
            } else {
                1
            };
            for &(a, ta) in self.transitions_from(qa) {
                for tb in other.successors(qb, a) {
                    let key = (ta, tb, i_next);
                    let acc = i_next == 1 && other.is_accepting(tb);
                    let to = get(&mut out, &mut stack, &mut index, key, acc);
                    out.add_transition(from, a, to);
                }
            }
        }
        out
    }
}

/// Tarjan's strongly connected components over an implicit graph, restricted
/// to nodes with `mask[v] = true`. Returned in reverse topological order.
pub(crate) fn tarjan_sccs<I, F>(n: usize, succ: F, mask: &[bool]) -> Vec<Vec<usize>>
where
    I: Iterator<Item = usize>,
    F: Fn(usize) -> I,
{
    #[derive(Clone, Copy)]
    struct NodeData {
        index: u32,
        lowlink: u32,
        on_stack: bool,
        visited: bool,
    }
    let mut data = vec![
        NodeData {
            index: 0,
            lowlink: 0,
            on_stack: false,
            visited: false,
        };
        n
    ];
    let mut next_index = 0u32;
    let mut stack: Vec<usize> = Vec::new();
    let mut sccs: Vec<Vec<usize>> = Vec::new();
    // Iterative Tarjan with an explicit work stack of (node, child iterator state).
    for start in 0..n {
        if !mask[start] || data[start].visited {
            continue;
        }
        let mut work: Vec<(usize, Vec<usize>, usize)> = Vec::new();
        let children: Vec<usize> = succ(start).filter(|&w| mask[w]).collect();
        data[start].visited = true;
        data[start].index = next_index;
        data[start].lowlink = next_index;
        next_index += 1;
        data[start].on_stack = true;
        stack.push(start);
        work.push((start, children, 0));
        while let Some((v, children, mut ci)) = work.pop() {
            let mut descended = false;
            while ci < children.len() {
                let w = children[ci];
                ci += 1;
                if !data[w].visited {
                    data[w].visited = true;
                    data[w].index = next_index;
                    data[w].lowlink = next_index;
                    next_index += 1;
                    data[w].on_stack = true;
                    stack.push(w);
                    let wc: Vec<usize> = succ(w).filter(|&x| mask[x]).collect();
                    work.push((v, children, ci));
                    work.push((w, wc, 0));
                    descended = true;
                    break;
                } else if data[w].on_stack {
                    data[v].lowlink = data[v].lowlink.min(data[w].index);
                }
            }
            if descended {
                continue;
            }
            if data[v].lowlink == data[v].index {
                let mut scc = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    data[w].on_stack = false;
                    scc.push(w);
                    if w == v {
                        break;
                    }
                }
                sccs.push(scc);
            }
            if let Some(&mut (p, _, _)) = work.last_mut() {
                data[p].lowlink = data[p].lowlink.min(data[v].lowlink);
            }
        }
    }
    sccs
}
