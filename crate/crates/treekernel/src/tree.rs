//! Ranked ordered trees over a graded alphabet, canonical term notation,
//! and the line-oriented tree file format.
//!
//! Trees are stored as a flat postorder node array rather than as a boxed
//! recursive structure. Every subtree is a contiguous slice of that array,
//! so subtree enumeration is a linear walk, structural equality is a slice
//! comparison, and no operation (parsing, printing, drop, clone) recurses
//! on tree depth. The parser accepts nesting up to [`MAX_PARSE_DEPTH`] on
//! an explicit heap stack.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Text rendering of the placeholder leaf `⊥` used by bottom trees.
/// The name is reserved: it is not a legal symbol of a base alphabet.
pub const BOTTOM_NAME: &str = "_";

/// Maximum nesting depth accepted by the parser.
pub const MAX_PARSE_DEPTH: usize = 1_000_000;

// ---------------------------------------------------------------------------
// Symbols and alphabets
// ---------------------------------------------------------------------------

/// A ranked symbol: a name over `[A-Za-z0-9_]` plus a fixed arity.
///
/// Names are interned behind an `Arc` so per-node storage stays cheap.
/// Identity is the `(name, arity)` pair.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol {
    name: Arc<str>,
    arity: usize,
}

impl Symbol {
    /// Creates a symbol, validating the lexical rules. The bare name `_`
    /// is reserved for the placeholder leaf and rejected here.
    pub fn new(name: &str, arity: usize) -> Result<Symbol> {
        if name.is_empty() {
            return Err(Error::InvalidSymbol {
                name: name.to_string(),
                reason: "name is empty".into(),
            });
        }
        if !name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
            return Err(Error::InvalidSymbol {
                name: name.to_string(),
                reason: "only [A-Za-z0-9_] is allowed".into(),
            });
        }
        if name == BOTTOM_NAME {
            return Err(Error::InvalidSymbol {
                name: name.to_string(),
                reason: "'_' is reserved for the placeholder leaf".into(),
            });
        }
        Ok(Symbol {
            name: Arc::from(name),
            arity,
        })
    }

    /// The placeholder leaf `⊥`. Not part of any base alphabet.
    pub(crate) fn bottom() -> Symbol {
        Symbol {
            name: Arc::from(BOTTOM_NAME),
            arity: 0,
        }
    }

    fn from_interned(name: Arc<str>, arity: usize) -> Symbol {
        Symbol { name, arity }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// True for the placeholder leaf `⊥`.
    pub fn is_bottom(&self) -> bool {
        &*self.name == BOTTOM_NAME
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// A graded alphabet: a finite set of symbols partitioned by arity.
///
/// The same name may appear at several arities only when declared so;
/// arity inference (see [`InferredAlphabet`]) never produces such homonyms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GradedAlphabet {
    arities: BTreeMap<Arc<str>, BTreeSet<usize>>,
    max_arity: usize,
    len: usize,
}

impl GradedAlphabet {
    /// Builds an alphabet from symbols; duplicate `(name, arity)` pairs
    /// collapse, matching set semantics.
    pub fn new(symbols: impl IntoIterator<Item = Symbol>) -> GradedAlphabet {
        let mut arities: BTreeMap<Arc<str>, BTreeSet<usize>> = BTreeMap::new();
        for sym in symbols {
            arities.entry(sym.name).or_default().insert(sym.arity);
        }
        let mut max_arity = 0;
        let mut len = 0;
        for set in arities.values() {
            len += set.len();
            if let Some(&m) = set.iter().next_back() {
                max_arity = max_arity.max(m);
            }
        }
        GradedAlphabet {
            arities,
            max_arity,
            len,
        }
    }

    pub fn contains(&self, name: &str, arity: usize) -> bool {
        self.arities
            .get(name)
            .is_some_and(|set| set.contains(&arity))
    }

    /// Looks up `(name, arity)`, returning the interned symbol.
    pub fn symbol(&self, name: &str, arity: usize) -> Option<Symbol> {
        let (key, set) = self.arities.get_key_value(name)?;
        set.contains(&arity)
            .then(|| Symbol::from_interned(key.clone(), arity))
    }

    /// All symbols in `(name, arity)` order.
    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.arities.iter().flat_map(|(name, set)| {
            set.iter()
                .map(move |&a| Symbol::from_interned(name.clone(), a))
        })
    }

    /// Largest arity among the symbols; 0 when there are none above zero
    /// (or the alphabet is empty).
    pub fn max_arity(&self) -> usize {
        self.max_arity
    }

    /// Number of distinct `(name, arity)` pairs.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Arity table grown while parsing with inference. One instance spans a
/// whole document so conflicting uses across lines are reported.
#[derive(Clone, Debug, Default)]
pub struct InferredAlphabet {
    arities: HashMap<Arc<str>, usize>,
}

impl InferredAlphabet {
    pub fn new() -> InferredAlphabet {
        InferredAlphabet::default()
    }

    /// Records a usage of `name` at `arity`, failing on a conflict with an
    /// earlier usage.
    fn resolve(&mut self, name: &str, arity: usize) -> Result<Symbol> {
        if let Some((key, &first)) = self.arities.get_key_value(name) {
            if first != arity {
                return Err(Error::ArityConflict {
                    name: name.to_string(),
                    first,
                    found: arity,
                });
            }
            return Ok(Symbol::from_interned(key.clone(), arity));
        }
        let key: Arc<str> = Arc::from(name);
        self.arities.insert(key.clone(), arity);
        Ok(Symbol::from_interned(key, arity))
    }

    /// The alphabet inferred so far.
    pub fn to_alphabet(&self) -> GradedAlphabet {
        GradedAlphabet::new(
            self.arities
                .iter()
                .map(|(name, &a)| Symbol::from_interned(name.clone(), a)),
        )
    }
}

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
struct Node {
    symbol: Symbol,
    /// Number of nodes in the subtree rooted here, including this node.
    size: usize,
}

/// A ranked ordered tree in postorder layout. Non-empty by construction;
/// every node has exactly `arity` children.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Assembles a tree from a root symbol and its children.
    pub fn new(symbol: Symbol, mut children: Vec<Tree>) -> Result<Tree> {
        if children.len() != symbol.arity() {
            return Err(Error::ArityMismatch {
                name: symbol.name().to_string(),
                expected: symbol.arity(),
                found: children.len(),
            });
        }
        let size = 1 + children.iter().map(|c| c.nodes.len()).sum::<usize>();
        let mut nodes = Vec::with_capacity(size);
        for child in &mut children {
            nodes.append(&mut child.nodes);
        }
        nodes.push(Node { symbol, size });
        Ok(Tree { nodes })
    }

    /// A single leaf; the symbol must be nullary.
    pub fn leaf(symbol: Symbol) -> Result<Tree> {
        Tree::new(symbol, Vec::new())
    }

    /// Parses a term with one-off arity inference.
    pub fn parse(text: &str) -> Result<Tree> {
        let mut inferred = InferredAlphabet::new();
        parse_tree_infer(text, &mut inferred)
    }

    pub fn root(&self) -> &Symbol {
        &self.nodes.last().expect("tree is non-empty").symbol
    }

    /// Total number of nodes (occurrences, not distinct subtrees).
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Depth in nodes: a lone leaf has depth 1.
    pub fn depth(&self) -> usize {
        self.as_ref().depth()
    }

    pub fn as_ref(&self) -> SubtreeRef<'_> {
        SubtreeRef { nodes: &self.nodes }
    }

    pub fn children(&self) -> Vec<SubtreeRef<'_>> {
        self.as_ref().children()
    }

    /// All subtree occurrences (one per node), in postorder.
    pub fn subtrees(&self) -> Subtrees<'_> {
        Subtrees {
            nodes: &self.nodes,
            idx: 0,
        }
    }

    /// The canonical term notation of this tree.
    pub fn canonical(&self) -> CanonicalTerm {
        self.as_ref().canonical()
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical().as_str())
    }
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tree({})", self.canonical().as_str())
    }
}

/// A borrowed subtree: a contiguous postorder slice with the root last.
#[derive(Clone, Copy)]
pub struct SubtreeRef<'a> {
    nodes: &'a [Node],
}

impl<'a> SubtreeRef<'a> {
    pub fn root(&self) -> &'a Symbol {
        &self.nodes.last().expect("subtree is non-empty").symbol
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Child subtrees in order.
    pub fn children(&self) -> Vec<SubtreeRef<'a>> {
        let mut rest = &self.nodes[..self.nodes.len() - 1];
        let mut out = Vec::with_capacity(self.root().arity());
        while !rest.is_empty() {
            let size = rest.last().expect("non-empty").size;
            let at = rest.len() - size;
            out.push(SubtreeRef { nodes: &rest[at..] });
            rest = &rest[..at];
        }
        out.reverse();
        out
    }

    pub fn depth(&self) -> usize {
        // postorder scan with a parallel stack of child depths
        let mut stack: Vec<usize> = Vec::new();
        for node in self.nodes {
            let arity = node.symbol.arity();
            let mut d = 0;
            for _ in 0..arity {
                d = d.max(stack.pop().expect("valid postorder"));
            }
            stack.push(d + 1);
        }
        stack.pop().expect("non-empty")
    }

    /// Copies this subtree into an owned [`Tree`].
    pub fn to_tree(&self) -> Tree {
        Tree {
            nodes: self.nodes.to_vec(),
        }
    }

    pub fn canonical(&self) -> CanonicalTerm {
        let mut out = String::with_capacity(self.nodes.len() * 4);
        self.write_canonical(&mut out);
        CanonicalTerm(out)
    }

    /// Appends the canonical rendering without recursing on depth.
    pub(crate) fn write_canonical(&self, out: &mut String) {
        enum Item<'n> {
            Term(&'n [Node]),
            Text(&'static str),
        }
        let mut stack = vec![Item::Term(self.nodes)];
        while let Some(item) = stack.pop() {
            match item {
                Item::Text(s) => out.push_str(s),
                Item::Term(nodes) => {
                    let sub = SubtreeRef { nodes };
                    let root = sub.root();
                    out.push_str(root.name());
                    if root.arity() > 0 {
                        out.push('(');
                        stack.push(Item::Text(")"));
                        let children = sub.children();
                        for (i, child) in children.iter().enumerate().rev() {
                            stack.push(Item::Term(child.nodes));
                            if i > 0 {
                                stack.push(Item::Text(","));
                            }
                        }
                    }
                }
            }
        }
    }
}

impl PartialEq for SubtreeRef<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl Eq for SubtreeRef<'_> {}

impl fmt::Debug for SubtreeRef<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubtreeRef({})", self.canonical().as_str())
    }
}

/// Iterator over all subtree occurrences of a tree, in postorder.
pub struct Subtrees<'a> {
    nodes: &'a [Node],
    idx: usize,
}

impl<'a> Iterator for Subtrees<'a> {
    type Item = SubtreeRef<'a>;

    fn next(&mut self) -> Option<SubtreeRef<'a>> {
        if self.idx >= self.nodes.len() {
            return None;
        }
        let size = self.nodes[self.idx].size;
        let slice = &self.nodes[self.idx + 1 - size..=self.idx];
        self.idx += 1;
        Some(SubtreeRef { nodes: slice })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.nodes.len() - self.idx;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Subtrees<'_> {}

// ---------------------------------------------------------------------------
// Canonical term notation
// ---------------------------------------------------------------------------

/// The unique text rendering of a tree: no whitespace, children
/// comma-separated, `⊥` rendered as `_`. Two trees are structurally equal
/// iff their canonical texts are byte-equal, which makes this the shuffle
/// key and state label everywhere.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalTerm(String);

impl CanonicalTerm {
    /// Parses (placeholder leaves allowed) and normalizes to canonical
    /// text. Accepts whitespace that the canonical form itself omits.
    pub fn parse(text: &str) -> Result<CanonicalTerm> {
        let mut inferred = InferredAlphabet::new();
        let tree = Parser::new(text, SymbolSource::Infer(&mut inferred), true).parse()?;
        Ok(tree.canonical())
    }

    /// Wraps text already known to be canonical (printed by us or
    /// validated against a reparse).
    pub(crate) fn from_trusted(text: String) -> CanonicalTerm {
        CanonicalTerm(text)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for CanonicalTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for CanonicalTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl Borrow<str> for CanonicalTerm {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for CanonicalTerm {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

// ---------------------------------------------------------------------------
// Bottom trees
// ---------------------------------------------------------------------------

/// A tree over `Σ ∪ {⊥}`: ordinary symbols plus the placeholder leaf,
/// which only ever occurs at leaf positions. Produced by prefix
/// enumeration.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BottomTree {
    tree: Tree,
}

impl BottomTree {
    /// The lone placeholder leaf `⊥`.
    pub fn bottom() -> BottomTree {
        BottomTree {
            tree: Tree::leaf(Symbol::bottom()).expect("bottom is nullary"),
        }
    }

    pub fn new(symbol: Symbol, children: Vec<BottomTree>) -> Result<BottomTree> {
        let children = children.into_iter().map(|c| c.tree).collect();
        Ok(BottomTree {
            tree: Tree::new(symbol, children)?,
        })
    }

    /// Every plain tree is also a bottom tree.
    pub fn from_tree(tree: Tree) -> BottomTree {
        BottomTree { tree }
    }

    pub fn parse(text: &str) -> Result<BottomTree> {
        let mut inferred = InferredAlphabet::new();
        let tree = Parser::new(text, SymbolSource::Infer(&mut inferred), true).parse()?;
        Ok(BottomTree { tree })
    }

    pub fn root(&self) -> &Symbol {
        self.tree.root()
    }

    /// True only for the lone `⊥` leaf.
    pub fn is_bottom(&self) -> bool {
        self.tree.node_count() == 1 && self.tree.root().is_bottom()
    }

    pub fn node_count(&self) -> usize {
        self.tree.node_count()
    }

    pub fn children(&self) -> Vec<BottomTree> {
        self.tree
            .children()
            .into_iter()
            .map(|c| BottomTree { tree: c.to_tree() })
            .collect()
    }

    pub fn canonical(&self) -> CanonicalTerm {
        self.tree.canonical()
    }
}

impl fmt::Display for BottomTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical().as_str())
    }
}

impl fmt::Debug for BottomTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BottomTree({})", self.canonical().as_str())
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

enum SymbolSource<'a> {
    Declared(&'a GradedAlphabet),
    Infer(&'a mut InferredAlphabet),
}

struct Parser<'t, 's> {
    text: &'t str,
    pos: usize,
    source: SymbolSource<'s>,
    allow_bottom: bool,
}

struct Frame {
    name_start: usize,
    name_end: usize,
    children_start: usize,
    completed: usize,
}

impl<'t, 's> Parser<'t, 's> {
    fn new(text: &'t str, source: SymbolSource<'s>, allow_bottom: bool) -> Parser<'t, 's> {
        Parser {
            text,
            pos: 0,
            source,
            allow_bottom,
        }
    }

    fn skip_ws(&mut self) {
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len() && (bytes[self.pos] as char).is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.as_bytes().get(self.pos).copied()
    }

    fn ident(&mut self) -> Result<(usize, usize)> {
        let bytes = self.text.as_bytes();
        let start = self.pos;
        while self.pos < bytes.len()
            && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Syntax {
                pos: start,
                msg: match self.peek() {
                    Some(b) => format!("expected a symbol, found '{}'", b as char),
                    None => "expected a symbol, found end of input".to_string(),
                },
            });
        }
        Ok((start, self.pos))
    }

    fn resolve(&mut self, start: usize, end: usize, arity: usize) -> Result<Symbol> {
        let name = &self.text[start..end];
        if name == BOTTOM_NAME {
            if !self.allow_bottom {
                return Err(Error::Syntax {
                    pos: start,
                    msg: "'_' is reserved for the placeholder leaf".to_string(),
                });
            }
            if arity != 0 {
                return Err(Error::Syntax {
                    pos: start,
                    msg: "the placeholder leaf '_' takes no children".to_string(),
                });
            }
            return Ok(Symbol::bottom());
        }
        match &mut self.source {
            SymbolSource::Declared(alphabet) => {
                alphabet
                    .symbol(name, arity)
                    .ok_or_else(|| Error::UnknownSymbol {
                        name: name.to_string(),
                        arity,
                    })
            }
            SymbolSource::Infer(inferred) => inferred.resolve(name, arity),
        }
    }

    fn parse(mut self) -> Result<Tree> {
        let mut nodes: Vec<Node> = Vec::new();
        let mut stack: Vec<Frame> = Vec::new();
        loop {
            // expect a term: symbol, optionally followed by '(' children ')'
            self.skip_ws();
            let (name_start, name_end) = self.ident()?;
            self.skip_ws();
            if self.peek() == Some(b'(') {
                // a node under `stack.len()` open frames sits at node depth
                // `stack.len() + 1`, so cap frames at one below the limit
                if stack.len() >= MAX_PARSE_DEPTH - 1 {
                    return Err(Error::Syntax {
                        pos: name_start,
                        msg: format!("nesting deeper than {MAX_PARSE_DEPTH}"),
                    });
                }
                self.pos += 1;
                stack.push(Frame {
                    name_start,
                    name_end,
                    children_start: nodes.len(),
                    completed: 0,
                });
                continue;
            }
            let symbol = self.resolve(name_start, name_end, 0)?;
            nodes.push(Node { symbol, size: 1 });

            // a term just completed: close frames / step to the next sibling
            loop {
                self.skip_ws();
                let Some(frame) = stack.last_mut() else {
                    return if self.pos == self.text.len() {
                        Ok(Tree { nodes })
                    } else {
                        Err(Error::Syntax {
                            pos: self.pos,
                            msg: "unexpected trailing input".to_string(),
                        })
                    };
                };
                match self.peek() {
                    Some(b',') => {
                        self.pos += 1;
                        frame.completed += 1;
                        break; // next child term
                    }
                    Some(b')') => {
                        self.pos += 1;
                        let frame = stack.pop().expect("frame present");
                        let arity = frame.completed + 1;
                        let symbol = self.resolve(frame.name_start, frame.name_end, arity)?;
                        let size = nodes.len() - frame.children_start + 1;
                        nodes.push(Node { symbol, size });
                        // the closed term completes a child of the frame below
                    }
                    Some(b) => {
                        return Err(Error::Syntax {
                            pos: self.pos,
                            msg: format!("expected ',' or ')', found '{}'", b as char),
                        });
                    }
                    None => {
                        return Err(Error::Syntax {
                            pos: self.pos,
                            msg: "unexpected end of input: unclosed '('".to_string(),
                        });
                    }
                }
            }
        }
    }
}

/// Parses one term against a declared alphabet.
pub fn parse_tree(text: &str, alphabet: &GradedAlphabet) -> Result<Tree> {
    Parser::new(text, SymbolSource::Declared(alphabet), false).parse()
}

/// Parses one term, inferring arities into `inferred`. Thread one
/// [`InferredAlphabet`] through a document to catch cross-line conflicts.
pub fn parse_tree_infer(text: &str, inferred: &mut InferredAlphabet) -> Result<Tree> {
    Parser::new(text, SymbolSource::Infer(inferred), false).parse()
}

// ---------------------------------------------------------------------------
// Tree files: one term per line; blank lines and `#` comments ignored
// ---------------------------------------------------------------------------

/// Reads a tree file with document-wide arity inference. Errors carry the
/// 1-based line number.
pub fn parse_tree_file(text: &str) -> Result<Vec<Tree>> {
    let mut inferred = InferredAlphabet::new();
    let mut trees = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tree = parse_tree_infer(trimmed, &mut inferred).map_err(|e| e.at_line(idx + 1))?;
        trees.push(tree);
    }
    Ok(trees)
}

/// Renders trees as a tree file, one canonical term per line.
pub fn write_tree_file(trees: &[Tree]) -> String {
    let mut out = String::new();
    for tree in trees {
        tree.as_ref().write_canonical(&mut out);
        out.push('\n');
    }
    out
}
