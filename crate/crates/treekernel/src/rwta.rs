//! Root-weighted tree automata: construction from tree sets, bottom-up
//! evaluation, intersection, and the subtree kernel.
//!
//! An RWTA is a 4-tuple (Σ, Q, μ, δ) whose weights sit only on states
//! (root weights). The subtree automaton of a tree set has the distinct
//! subtrees as states, occurrence counts as weights, and one transition
//! per state `s = f(s_1..s_k)`, namely `(s, f, s_1..s_k)` — which makes it
//! deterministic and lets the one-state-per-line file format leave
//! transitions implicit.
//!
//! The kernel of two sets is the weight sum of the intersection automaton:
//! states shared by both, weights multiplied. [`brute_force_kernel`] is an
//! independent reference that counts matching node pairs directly and is
//! used to cross-check the automaton path.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::series::language_series;
use crate::tree::{CanonicalTerm, GradedAlphabet, Symbol, Tree};

/// Header line of the RWTA file format.
pub const RWTA_FILE_HEADER: &str = "#rwta v1";

/// A kernel value: the weight sum of an intersection automaton.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct KernelValue(pub u64);

impl fmt::Display for KernelValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// State index into the sorted state table.
type StateId = u32;

#[derive(Clone, Debug)]
struct Transition {
    target: StateId,
    symbol: Symbol,
    args: Vec<StateId>,
}

/// A view of one transition with state labels resolved.
#[derive(Clone, Debug)]
pub struct TransitionView<'a> {
    pub target: &'a CanonicalTerm,
    pub symbol: &'a Symbol,
    pub args: Vec<&'a CanonicalTerm>,
}

/// A root-weighted tree automaton.
///
/// States are labelled by canonical terms (for subtree automata the label
/// *is* the subtree). Weights are exact unsigned 64-bit integers; any
/// arithmetic that would overflow is reported as an error, never wrapped.
#[derive(Clone, Debug)]
pub struct Rwta {
    alphabet: GradedAlphabet,
    /// Sorted state labels; `StateId` indexes into this table.
    states: Vec<CanonicalTerm>,
    /// Root weight per state (same order as `states`). Reads as 0 when a
    /// state is absent, honoring μ(∅) = 0.
    mu: Vec<u64>,
    transitions: Vec<Transition>,
    /// (symbol, argument states) → reachable states, for bottom-up runs.
    index: HashMap<(Symbol, Vec<StateId>), Vec<StateId>>,
    /// True when states are exactly their own subtrees with the implicit
    /// transition per state; required for intersection and file output.
    subtree_form: bool,
}

impl Rwta {
    /// Builds a general automaton from explicit parts. Transitions are
    /// `(target, symbol, argument states)` with `q ∈ δ(f, q_1..q_k)`.
    pub fn new(
        alphabet: GradedAlphabet,
        states: Vec<CanonicalTerm>,
        weights: Vec<(CanonicalTerm, u64)>,
        delta: Vec<(CanonicalTerm, Symbol, Vec<CanonicalTerm>)>,
    ) -> Result<Rwta> {
        let mut states = states;
        states.sort();
        for pair in states.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::CorruptRwta(format!(
                    "duplicate state '{}'",
                    pair[0]
                )));
            }
        }
        let find = |label: &CanonicalTerm| -> Result<StateId> {
            states
                .binary_search(label)
                .map(|i| i as StateId)
                .map_err(|_| Error::CorruptRwta(format!("unknown state '{label}'")))
        };
        let mut mu = vec![0u64; states.len()];
        let mut seen = vec![false; states.len()];
        for (label, weight) in &weights {
            let id = find(label)? as usize;
            if seen[id] {
                return Err(Error::CorruptRwta(format!(
                    "state '{label}' weighted twice"
                )));
            }
            seen[id] = true;
            mu[id] = *weight;
        }
        let mut transitions = Vec::with_capacity(delta.len());
        for (target, symbol, args) in &delta {
            if args.len() != symbol.arity() {
                return Err(Error::CorruptRwta(format!(
                    "transition for '{target}': symbol {symbol:?} given {} arguments",
                    args.len()
                )));
            }
            if !alphabet.contains(symbol.name(), symbol.arity()) {
                return Err(Error::CorruptRwta(format!(
                    "transition symbol {symbol:?} not in the alphabet"
                )));
            }
            let target = find(target)?;
            let args = args.iter().map(&find).collect::<Result<Vec<_>>>()?;
            transitions.push(Transition {
                target,
                symbol: symbol.clone(),
                args,
            });
        }
        let index = build_index(&transitions);
        Ok(Rwta {
            alphabet,
            states,
            mu,
            transitions,
            index,
            subtree_form: false,
        })
    }

    /// Assembles a subtree automaton from `(subtree, weight)` pairs: the
    /// alphabet and the implicit transitions are derived from the state
    /// labels themselves. The state set must be closed under taking
    /// subtrees and weights must be nonzero.
    pub fn from_state_weights(pairs: Vec<(CanonicalTerm, u64)>) -> Result<Rwta> {
        let mut pairs = pairs;
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        for pair in pairs.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::CorruptRwta(format!(
                    "duplicate state '{}'",
                    pair[0].0
                )));
            }
        }
        let mut states = Vec::with_capacity(pairs.len());
        let mut mu = Vec::with_capacity(pairs.len());
        for (term, weight) in pairs {
            if weight == 0 {
                return Err(Error::CorruptRwta(format!(
                    "state '{term}' has zero weight"
                )));
            }
            states.push(term);
            mu.push(weight);
        }
        let mut symbols = Vec::with_capacity(states.len());
        let mut transitions = Vec::with_capacity(states.len());
        for (id, term) in states.iter().enumerate() {
            let (name, children) = split_canonical(term.as_str())?;
            let symbol = Symbol::new(name, children.len())
                .map_err(|e| Error::CorruptRwta(format!("state '{term}': {e}")))?;
            let mut args = Vec::with_capacity(children.len());
            for child in children {
                let child_id = states
                    .binary_search_by(|probe| probe.as_str().cmp(child))
                    .map_err(|_| {
                        Error::CorruptRwta(format!(
                            "state '{term}' references missing subtree '{child}'"
                        ))
                    })?;
                args.push(child_id as StateId);
            }
            symbols.push(symbol.clone());
            transitions.push(Transition {
                target: id as StateId,
                symbol,
                args,
            });
        }
        let alphabet = GradedAlphabet::new(symbols);
        let index = build_index(&transitions);
        Ok(Rwta {
            alphabet,
            states,
            mu,
            transitions,
            index,
            subtree_form: true,
        })
    }

    pub fn alphabet(&self) -> &GradedAlphabet {
        &self.alphabet
    }

    /// State labels in lexicographic order.
    pub fn states(&self) -> impl ExactSizeIterator<Item = &CanonicalTerm> {
        self.states.iter()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// μ of one state label; 0 when absent.
    pub fn state_weight(&self, label: &str) -> u64 {
        self.states
            .binary_search_by(|probe| probe.as_str().cmp(label))
            .map(|i| self.mu[i])
            .unwrap_or(0)
    }

    /// `(label, weight)` pairs in lexicographic label order.
    pub fn weights(&self) -> impl ExactSizeIterator<Item = (&CanonicalTerm, u64)> {
        self.states.iter().zip(self.mu.iter().copied())
    }

    pub fn transitions(&self) -> impl Iterator<Item = TransitionView<'_>> {
        self.transitions.iter().map(|t| TransitionView {
            target: &self.states[t.target as usize],
            symbol: &t.symbol,
            args: t.args.iter().map(|&a| &self.states[a as usize]).collect(),
        })
    }

    /// Whether this automaton is a subtree automaton (states are their own
    /// subtrees with the implicit transitions).
    pub fn is_subtree_automaton(&self) -> bool {
        self.subtree_form
    }

    /// Runs the automaton bottom-up on `t` and returns the reached state
    /// set Δ(t). Symbols or combinations without transitions simply yield
    /// the empty set.
    pub fn eval_delta(&self, tree: &Tree) -> BTreeSet<CanonicalTerm> {
        let mut stack: Vec<Vec<StateId>> = Vec::new();
        for sub in tree.subtrees() {
            let symbol = sub.root();
            let arity = symbol.arity();
            let child_sets = stack.split_off(stack.len() - arity);
            let mut reached: Vec<StateId> = Vec::new();
            if child_sets.iter().all(|s| !s.is_empty()) {
                // δ extended to state sets: union over each choice of
                // argument states
                let mut pick = vec![0usize; arity];
                let mut args: Vec<StateId> = vec![0; arity];
                'combos: loop {
                    for (slot, &i) in pick.iter().enumerate() {
                        args[slot] = child_sets[slot][i];
                    }
                    if let Some(targets) = self.index.get(&(symbol.clone(), args.clone())) {
                        reached.extend_from_slice(targets);
                    }
                    let mut slot = arity;
                    loop {
                        if slot == 0 {
                            break 'combos;
                        }
                        slot -= 1;
                        pick[slot] += 1;
                        if pick[slot] < child_sets[slot].len() {
                            break;
                        }
                        pick[slot] = 0;
                    }
                }
                reached.sort_unstable();
                reached.dedup();
            }
            stack.push(reached);
        }
        let reached = stack.pop().expect("non-empty tree");
        reached
            .into_iter()
            .map(|id| self.states[id as usize].clone())
            .collect()
    }

    /// The weight of a tree: μ(Δ(t)), with μ(∅) = 0.
    pub fn tree_weight(&self, tree: &Tree) -> Result<u64> {
        let mut sum: u64 = 0;
        for label in self.eval_delta(tree) {
            sum = sum
                .checked_add(self.state_weight(label.as_str()))
                .ok_or(Error::Overflow {
                    context: "summing root weights of reached states",
                })?;
        }
        Ok(sum)
    }

    /// One `label\tweight` line per state, in lexicographic label order —
    /// the body of the file format and the input of the parallel
    /// intersection mapper.
    pub fn state_lines(&self) -> Vec<String> {
        self.weights()
            .map(|(label, weight)| format!("{label}\t{weight}"))
            .collect()
    }

    /// Renders the automaton in the RWTA file format. Only subtree
    /// automata can be rendered: the format leaves transitions implicit.
    pub fn to_file_string(&self) -> Result<String> {
        if !self.subtree_form {
            return Err(Error::InvalidAutomaton(
                "only subtree automata have an implicit-transition file form".into(),
            ));
        }
        let mut out = String::new();
        out.push_str(RWTA_FILE_HEADER);
        out.push('\n');
        for (label, weight) in self.weights() {
            out.push_str(label.as_str());
            out.push('\t');
            out.push_str(&weight.to_string());
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses the RWTA file format. State terms must be canonical; the
    /// state set must be subtree-closed; weights must be nonzero 64-bit
    /// integers; arities must be consistent across the file.
    pub fn from_file_str(text: &str) -> Result<Rwta> {
        let mut lines = text.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, line)) if line.trim().is_empty() => continue,
                Some((_, line)) => break line.trim_end(),
                None => {
                    return Err(Error::CorruptRwta("missing header line".into()));
                }
            }
        };
        if header != RWTA_FILE_HEADER {
            return Err(Error::CorruptRwta(format!(
                "expected header '{RWTA_FILE_HEADER}', found '{header}'"
            )));
        }
        let mut inferred = crate::tree::InferredAlphabet::new();
        let mut pairs = Vec::new();
        for (idx, line) in lines {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let (term_text, weight_text) = line.split_once('\t').ok_or_else(|| {
                Error::CorruptRwta("state line is not '<term>\\t<weight>'".into())
                    .at_line(idx + 1)
            })?;
            let tree = crate::tree::parse_tree_infer(term_text, &mut inferred)
                .map_err(|e| e.at_line(idx + 1))?;
            let canonical = tree.canonical();
            if canonical.as_str() != term_text {
                return Err(Error::CorruptRwta(format!(
                    "state term '{term_text}' is not canonical"
                ))
                .at_line(idx + 1));
            }
            let weight: u64 = weight_text.parse().map_err(|_| {
                Error::CorruptRwta(format!("bad weight '{weight_text}'")).at_line(idx + 1)
            })?;
            if weight == 0 {
                return Err(
                    Error::CorruptRwta(format!("state '{term_text}' has zero weight"))
                        .at_line(idx + 1),
                );
            }
            pairs.push((canonical, weight));
        }
        Rwta::from_state_weights(pairs)
    }
}

fn build_index(transitions: &[Transition]) -> HashMap<(Symbol, Vec<StateId>), Vec<StateId>> {
    let mut index: HashMap<(Symbol, Vec<StateId>), Vec<StateId>> = HashMap::new();
    for t in transitions {
        index
            .entry((t.symbol.clone(), t.args.clone()))
            .or_default()
            .push(t.target);
    }
    index
}

/// Splits a canonical term into its root name and top-level child terms.
fn split_canonical(term: &str) -> Result<(&str, Vec<&str>)> {
    let bytes = term.as_bytes();
    let mut i = 0;
    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
        i += 1;
    }
    if i == 0 {
        return Err(Error::CorruptRwta(format!("malformed term '{term}'")));
    }
    let name = &term[..i];
    if i == bytes.len() {
        return Ok((name, Vec::new()));
    }
    if bytes[i] != b'(' || bytes[bytes.len() - 1] != b')' {
        return Err(Error::CorruptRwta(format!("malformed term '{term}'")));
    }
    let mut children = Vec::new();
    let mut depth = 0usize;
    let mut start = i + 1;
    for (j, &b) in bytes.iter().enumerate().skip(i + 1) {
        match b {
            b'(' => depth += 1,
            b')' if depth > 0 => depth -= 1,
            b')' => {
                if j != bytes.len() - 1 || start == j {
                    return Err(Error::CorruptRwta(format!("malformed term '{term}'")));
                }
                children.push(&term[start..j]);
                return Ok((name, children));
            }
            b',' if depth == 0 => {
                if start == j {
                    return Err(Error::CorruptRwta(format!("malformed term '{term}'")));
                }
                children.push(&term[start..j]);
                start = j + 1;
            }
            _ => {}
        }
    }
    Err(Error::CorruptRwta(format!("malformed term '{term}'")))
}

// ---------------------------------------------------------------------------
// Construction, intersection, kernel
// ---------------------------------------------------------------------------

/// Builds the subtree automaton of a tree multiset: states are the
/// distinct subtrees, weights their occurrence counts across the whole
/// input (duplicate trees contribute multiplicity).
pub fn build_rwta(trees: &[Tree]) -> Result<Rwta> {
    let series = language_series(trees)?;
    Rwta::from_state_weights(series.into_pairs())
}

/// Intersects two subtree automata: the shared states survive with the
/// product of their weights, and transitions restrict to the retained
/// states (automatic, since subtree sets are closed under subtrees).
pub fn intersect(x: &Rwta, y: &Rwta) -> Result<Rwta> {
    if !x.subtree_form || !y.subtree_form {
        return Err(Error::InvalidAutomaton(
            "intersection is defined on subtree automata".into(),
        ));
    }
    let mut pairs = Vec::new();
    let mut xs = x.weights().peekable();
    let mut ys = y.weights().peekable();
    while let (Some(&(xl, xw)), Some(&(yl, yw))) = (xs.peek(), ys.peek()) {
        match xl.cmp(yl) {
            std::cmp::Ordering::Less => {
                xs.next();
            }
            std::cmp::Ordering::Greater => {
                ys.next();
            }
            std::cmp::Ordering::Equal => {
                let product = xw.checked_mul(yw).ok_or(Error::Overflow {
                    context: "multiplying intersection weights",
                })?;
                pairs.push((xl.clone(), product));
                xs.next();
                ys.next();
            }
        }
    }
    Rwta::from_state_weights(pairs)
}

/// The kernel realized by an intersection automaton: the sum of all root
/// weights (every state of a subtree automaton is accessible through its
/// own transition chain, so no reachability pass is needed).
pub fn kernel(automaton: &Rwta) -> Result<KernelValue> {
    let mut sum: u64 = 0;
    for &w in &automaton.mu {
        sum = sum.checked_add(w).ok_or(Error::Overflow {
            context: "summing kernel weights",
        })?;
    }
    Ok(KernelValue(sum))
}

/// Convenience composition: kernel of two tree multisets via the
/// automaton path.
pub fn kernel_of(xs: &[Tree], ys: &[Tree]) -> Result<KernelValue> {
    kernel(&intersect(&build_rwta(xs)?, &build_rwta(ys)?)?)
}

/// Reference kernel by direct enumeration: every node of X paired with
/// every node of Y scores 1 when the subtrees rooted there are equal.
/// Counting is done by sorting the rendered occurrence lists and merging,
/// with no shared machinery with the automaton path. Intended for
/// desk-scale inputs.
pub fn brute_force_kernel(xs: &[Tree], ys: &[Tree]) -> Result<KernelValue> {
    let occurrences = |trees: &[Tree]| -> Vec<String> {
        let mut out = Vec::new();
        for tree in trees {
            for sub in tree.subtrees() {
                out.push(sub.canonical().into_string());
            }
        }
        out.sort_unstable();
        out
    };
    let xs = occurrences(xs);
    let ys = occurrences(ys);
    let mut total: u64 = 0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < xs.len() && j < ys.len() {
        match xs[i].cmp(&ys[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let run_x = xs[i..].iter().take_while(|t| **t == xs[i]).count();
                let run_y = ys[j..].iter().take_while(|t| **t == ys[j]).count();
                let pairs = (run_x as u64)
                    .checked_mul(run_y as u64)
                    .ok_or(Error::Overflow {
                        context: "counting matching node pairs",
                    })?;
                total = total.checked_add(pairs).ok_or(Error::Overflow {
                    context: "counting matching node pairs",
                })?;
                i += run_x;
                j += run_y;
            }
        }
    }
    Ok(KernelValue(total))
}
