//! Formal tree series over ℕ and the subtree / prefix enumerations.
//!
//! A tree series maps canonical trees to natural coefficients; the subtree
//! series of a tree counts every subtree occurrence, and the series of a
//! language is the pointwise sum over its members (duplicates contribute
//! multiplicity). Counting is done by hash-consing subtrees to integer ids
//! so each distinct subtree is rendered to text exactly once.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::tree::{BottomTree, CanonicalTerm, Symbol, Tree};

/// A finite formal sum of trees with non-negative 64-bit coefficients.
/// Zero coefficients are never stored, so the key set is the support.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TreeSeries {
    terms: BTreeMap<CanonicalTerm, u64>,
}

impl TreeSeries {
    pub fn new() -> TreeSeries {
        TreeSeries::default()
    }

    /// Adds `count` occurrences of `term`; exact arithmetic, overflow is an
    /// error.
    pub fn add(&mut self, term: CanonicalTerm, count: u64) -> Result<()> {
        if count == 0 {
            return Ok(());
        }
        match self.terms.entry(term) {
            Entry::Vacant(slot) => {
                slot.insert(count);
            }
            Entry::Occupied(mut slot) => {
                let sum = slot.get().checked_add(count).ok_or(Error::Overflow {
                    context: "summing series coefficients",
                })?;
                *slot.get_mut() = sum;
            }
        }
        Ok(())
    }

    /// Pointwise sum with another series.
    pub fn add_series(&mut self, other: &TreeSeries) -> Result<()> {
        for (term, &count) in other.iter_pairs() {
            self.add(term.clone(), count)?;
        }
        Ok(())
    }

    /// The coefficient of a term, 0 outside the support.
    pub fn coefficient(&self, term: &str) -> u64 {
        self.terms.get(term).copied().unwrap_or(0)
    }

    /// The support: terms with nonzero coefficient, in lexicographic order.
    pub fn support(&self) -> impl Iterator<Item = &CanonicalTerm> {
        self.terms.keys()
    }

    pub fn iter_pairs(&self) -> impl Iterator<Item = (&CanonicalTerm, &u64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sum of all coefficients. For a subtree series this equals the node
    /// count of the underlying trees.
    pub fn total(&self) -> Result<u64> {
        let mut sum: u64 = 0;
        for &c in self.terms.values() {
            sum = sum.checked_add(c).ok_or(Error::Overflow {
                context: "summing series coefficients",
            })?;
        }
        Ok(sum)
    }

    pub fn into_pairs(self) -> Vec<(CanonicalTerm, u64)> {
        self.terms.into_iter().collect()
    }
}

impl FromIterator<(CanonicalTerm, u64)> for TreeSeries {
    fn from_iter<I: IntoIterator<Item = (CanonicalTerm, u64)>>(iter: I) -> TreeSeries {
        let mut series = TreeSeries::new();
        for (term, count) in iter {
            series
                .add(term, count)
                .expect("coefficient overflow while collecting series");
        }
        series
    }
}

// ---------------------------------------------------------------------------
// Subtree enumeration
// ---------------------------------------------------------------------------

/// Interns subtrees bottom-up: a subtree's id is determined by its root
/// symbol and its children's ids, so structurally equal subtrees across a
/// whole corpus share one id and one rendered text.
struct SubtreeInterner {
    ids: HashMap<(Symbol, Vec<u32>), u32>,
    /// (symbol, child ids) per id; child ids are always smaller.
    defs: Vec<(Symbol, Vec<u32>)>,
    counts: Vec<u64>,
}

impl SubtreeInterner {
    fn new() -> SubtreeInterner {
        SubtreeInterner {
            ids: HashMap::new(),
            defs: Vec::new(),
            counts: Vec::new(),
        }
    }

    /// Counts every subtree occurrence of `tree` (postorder, one stack).
    fn count_tree(&mut self, tree: &Tree) -> Result<()> {
        let mut stack: Vec<u32> = Vec::new();
        for sub in tree.subtrees() {
            let symbol = sub.root().clone();
            let arity = symbol.arity();
            let args = stack.split_off(stack.len() - arity);
            let key = (symbol, args);
            let id = match self.ids.get(&key) {
                Some(&id) => id,
                None => {
                    let id = self.defs.len() as u32;
                    self.defs.push(key.clone());
                    self.counts.push(0);
                    self.ids.insert(key, id);
                    id
                }
            };
            self.counts[id as usize] = self.counts[id as usize]
                .checked_add(1)
                .ok_or(Error::Overflow {
                    context: "counting subtree occurrences",
                })?;
            stack.push(id);
        }
        Ok(())
    }

    /// Renders every distinct subtree once, reusing child texts.
    fn into_series(self) -> TreeSeries {
        let mut texts: Vec<String> = Vec::with_capacity(self.defs.len());
        for (symbol, args) in &self.defs {
            let mut text = String::from(symbol.name());
            if !args.is_empty() {
                text.push('(');
                for (i, &arg) in args.iter().enumerate() {
                    if i > 0 {
                        text.push(',');
                    }
                    text.push_str(&texts[arg as usize]);
                }
                text.push(')');
            }
            texts.push(text);
        }
        texts
            .into_iter()
            .zip(self.counts)
            .map(|(text, count)| (CanonicalTerm::from_trusted(text), count))
            .collect()
    }
}

/// The set of distinct subtrees of `tree`, itself included.
pub fn subtree_set(tree: &Tree) -> BTreeSet<CanonicalTerm> {
    subtree_series(tree)
        .expect("per-tree counts fit in u64")
        .into_pairs()
        .into_iter()
        .map(|(term, _)| term)
        .collect()
}

/// The subtree series of `tree`: each subtree mapped to its number of
/// occurrences. Coefficients sum to the node count.
pub fn subtree_series(tree: &Tree) -> Result<TreeSeries> {
    language_series(std::slice::from_ref(tree))
}

/// The series of a finite language: pointwise sum of the subtree series of
/// its members. The input is a multiset; duplicates add.
pub fn language_series(trees: &[Tree]) -> Result<TreeSeries> {
    let mut interner = SubtreeInterner::new();
    for tree in trees {
        interner.count_tree(tree)?;
    }
    Ok(interner.into_series())
}

// ---------------------------------------------------------------------------
// Prefix enumeration
// ---------------------------------------------------------------------------

/// All prefixes of `tree`: the trees obtained by replacing whole subtrees
/// with the placeholder leaf `⊥`. The tree itself is included, the lone
/// `⊥` is not. Output size is the product over internal nodes, so this is
/// meant for small trees.
pub fn prefix_set(tree: &Tree) -> BTreeSet<BottomTree> {
    prefix_table(tree).pop().expect("non-empty tree").into_iter().collect()
}

/// All prefixes of all subtrees of `tree` (the "node with partial
/// descendancy" segments).
pub fn sst_set(tree: &Tree) -> BTreeSet<BottomTree> {
    prefix_table(tree).into_iter().flatten().collect()
}

/// Prefix lists for every node of `tree`, in postorder. Index i holds the
/// prefixes of the subtree rooted at postorder node i.
fn prefix_table(tree: &Tree) -> Vec<Vec<BottomTree>> {
    let mut table: Vec<Vec<BottomTree>> = Vec::with_capacity(tree.node_count());
    // per-node prefix lists are combined bottom-up over the postorder
    let mut stack: Vec<usize> = Vec::new(); // indices into `table`
    for sub in tree.subtrees() {
        let symbol = sub.root().clone();
        let arity = symbol.arity();
        let child_tables = stack.split_off(stack.len() - arity);
        let prefixes = if arity == 0 {
            vec![BottomTree::from_tree(sub.to_tree())]
        } else {
            // each child slot ranges over its own prefixes plus ⊥
            let mut options: Vec<Vec<BottomTree>> = Vec::with_capacity(arity);
            for &ti in &child_tables {
                let mut opts = Vec::with_capacity(table[ti].len() + 1);
                opts.push(BottomTree::bottom());
                opts.extend(table[ti].iter().cloned());
                options.push(opts);
            }
            cross_product(&symbol, &options)
        };
        table.push(prefixes);
        stack.push(table.len() - 1);
    }
    table
}

fn cross_product(symbol: &Symbol, options: &[Vec<BottomTree>]) -> Vec<BottomTree> {
    let total: usize = options.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    let mut pick = vec![0usize; options.len()];
    loop {
        let children: Vec<BottomTree> = pick
            .iter()
            .zip(options)
            .map(|(&i, opts)| opts[i].clone())
            .collect();
        out.push(BottomTree::new(symbol.clone(), children).expect("arity matches"));
        // odometer increment
        let mut slot = options.len();
        loop {
            if slot == 0 {
                return out;
            }
            slot -= 1;
            pick[slot] += 1;
            if pick[slot] < options[slot].len() {
                break;
            }
            pick[slot] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(text: &str) -> Tree {
        Tree::parse(text).unwrap()
    }

    fn set(tree_text: &str) -> Vec<String> {
        subtree_set(&tree(tree_text))
            .into_iter()
            .map(CanonicalTerm::into_string)
            .collect()
    }

    fn series_map(texts: &[&str]) -> BTreeMap<String, u64> {
        let trees: Vec<Tree> = texts.iter().map(|t| tree(t)).collect();
        language_series(&trees)
            .unwrap()
            .into_pairs()
            .into_iter()
            .map(|(term, c)| (term.into_string(), c))
            .collect()
    }

    #[test]
    fn subtree_set_of_the_worked_example() {
        assert_eq!(
            set("f(h(a),g(b))"),
            ["a", "b", "f(h(a),g(b))", "g(b)", "h(a)"]
        );
    }

    #[test]
    fn subtree_set_of_a_leaf() {
        assert_eq!(set("a"), ["a"]);
    }

    #[test]
    fn subtree_set_collapses_duplicates() {
        assert_eq!(set("f(a,a)"), ["a", "f(a,a)"]);
    }

    #[test]
    fn subtree_series_counts_occurrences() {
        // t1 = f(f(h(a),b),g(b)): every subtree once except b twice
        let m = series_map(&["f(f(h(a),b),g(b))"]);
        let expected: BTreeMap<String, u64> = [
            ("f(f(h(a),b),g(b))", 1),
            ("f(h(a),b)", 1),
            ("h(a)", 1),
            ("g(b)", 1),
            ("a", 1),
            ("b", 2),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        assert_eq!(m, expected);
    }

    #[test]
    fn subtree_series_of_t3() {
        let m = series_map(&["f(f(h(a),b),f(h(a),g(b)))"]);
        let expected: BTreeMap<String, u64> = [
            ("f(f(h(a),b),f(h(a),g(b)))", 1),
            ("f(h(a),b)", 1),
            ("f(h(a),g(b))", 1),
            ("h(a)", 2),
            ("g(b)", 1),
            ("a", 2),
            ("b", 2),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        assert_eq!(m, expected);
    }

    #[test]
    fn subtree_series_of_a_leaf() {
        let m = series_map(&["a"]);
        assert_eq!(m.len(), 1);
        assert_eq!(m["a"], 1);
    }

    #[test]
    fn language_series_sums_member_series() {
        // {t1, t2}: computed from the per-tree series by pointwise addition
        let m = series_map(&["f(f(h(a),b),g(b))", "f(h(a),g(b))"]);
        let expected: BTreeMap<String, u64> = [
            ("f(f(h(a),b),g(b))", 1),
            ("f(h(a),g(b))", 1),
            ("f(h(a),b)", 1),
            ("h(a)", 2),
            ("g(b)", 2),
            ("a", 2),
            ("b", 3),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        assert_eq!(m, expected);
    }

    #[test]
    fn language_series_of_empty_language_is_empty() {
        assert!(language_series(&[]).unwrap().is_empty());
    }

    #[test]
    fn language_series_respects_multiset_duplicates() {
        let m = series_map(&["a", "a"]);
        assert_eq!(m["a"], 2);
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn coefficient_mass_equals_node_count() {
        for text in ["a", "f(h(a),g(b))", "f(f(h(a),b),g(b))", "f(a,f(a,f(a,a)))"] {
            let t = tree(text);
            assert_eq!(
                subtree_series(&t).unwrap().total().unwrap(),
                t.node_count() as u64,
                "mass for {text}"
            );
        }
    }

    #[test]
    fn series_addition_is_commutative() {
        let a = subtree_series(&tree("f(h(a),g(b))")).unwrap();
        let b = subtree_series(&tree("f(f(h(a),b),g(b))")).unwrap();
        let mut ab = a.clone();
        ab.add_series(&b).unwrap();
        let mut ba = b.clone();
        ba.add_series(&a).unwrap();
        assert_eq!(ab, ba);
    }

    fn prefixes(text: &str) -> Vec<String> {
        prefix_set(&tree(text))
            .into_iter()
            .map(|p| p.canonical().into_string())
            .collect()
    }

    fn ssts(text: &str) -> Vec<String> {
        sst_set(&tree(text))
            .into_iter()
            .map(|p| p.canonical().into_string())
            .collect()
    }

    #[test]
    fn prefix_set_of_a_leaf_is_itself() {
        assert_eq!(prefixes("a"), ["a"]);
    }

    #[test]
    fn prefix_set_of_unary_tree() {
        let mut got = prefixes("h(a)");
        got.sort();
        assert_eq!(got, ["h(_)", "h(a)"]);
    }

    #[test]
    fn prefix_set_of_binary_tree() {
        let mut got = prefixes("f(a,b)");
        got.sort();
        assert_eq!(got, ["f(_,_)", "f(_,b)", "f(a,_)", "f(a,b)"]);
    }

    #[test]
    fn prefix_set_never_contains_bottom_alone() {
        for text in ["a", "h(a)", "f(a,b)", "f(h(a),g(b))"] {
            assert!(prefix_set(&tree(text)).iter().all(|p| !p.is_bottom()));
        }
    }

    #[test]
    fn prefix_count_follows_the_product_rule() {
        // |PS(f(t1..tk))| = prod (|PS(ti)| + 1); leaf = 1
        assert_eq!(prefixes("f(h(a),g(b))").len(), 9);
        assert_eq!(prefixes("f(f(a,b),b)").len(), 5 * 2);
    }

    #[test]
    fn sst_sets_union_prefixes_of_subtrees() {
        assert_eq!(ssts("a"), ["a"]);
        let mut got = ssts("h(a)");
        got.sort();
        assert_eq!(got, ["a", "h(_)", "h(a)"]);
        let mut got = ssts("f(a,b)");
        got.sort();
        assert_eq!(got, ["a", "b", "f(_,_)", "f(_,b)", "f(a,_)", "f(a,b)"]);
    }
}
