//! Seeded synthetic tree corpora for benchmarks and property tests.
//!
//! Generation is fully determined by the spec and its 64-bit seed: the
//! alphabet is drawn first, then each tree top-down with a per-tree depth
//! target — any symbol may be drawn above the target depth, a nullary
//! symbol is forced at it. Corpora are plain tree files, with the drawn
//! alphabet saved to a sidecar.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tree::{GradedAlphabet, Symbol, Tree};

/// Header line of the alphabet sidecar format.
pub const ALPHABET_FILE_HEADER: &str = "#alphabet v1";

/// Parameters for one synthetic corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenSpec {
    pub n_trees: usize,
    /// Inclusive bounds on the number of symbols.
    pub alphabet_size: (usize, usize),
    /// Inclusive arity bounds for non-nullary symbols; nullary leaves are
    /// always present on top (generation could not terminate otherwise).
    pub arity_range: (usize, usize),
    /// Inclusive bounds on the per-tree depth target; a lone leaf has
    /// depth 1.
    pub depth_range: (usize, usize),
    pub seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        if self.alphabet_size.0 < 2 {
            return fail(format!(
                "alphabet_lo must be >= 2 (one nullary and one non-nullary symbol), got {}",
                self.alphabet_size.0
            ));
        }
        if self.alphabet_size.0 > self.alphabet_size.1 {
            return fail("alphabet_lo exceeds alphabet_hi".into());
        }
        if self.arity_range.1 < 1 {
            return fail("arity_hi must be >= 1".into());
        }
        if self.arity_range.0 > self.arity_range.1 {
            return fail("arity_lo exceeds arity_hi".into());
        }
        if self.depth_range.0 < 1 {
            return fail("depth_lo must be >= 1".into());
        }
        if self.depth_range.0 > self.depth_range.1 {
            return fail("depth_lo exceeds depth_hi".into());
        }
        Ok(())
    }

    /// Parses the key=value spec file. Keys: `n_trees`, `alphabet_lo`,
    /// `alphabet_hi`, `arity_hi`, `depth_lo`, `depth_hi`, `seed`; optional
    /// `arity_lo` (default 1). Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<GenSpec> {
        let mut n_trees = None;
        let mut alphabet_lo = None;
        let mut alphabet_hi = None;
        let mut arity_lo: Option<u64> = None;
        let mut arity_hi = None;
        let mut depth_lo = None;
        let mut depth_hi = None;
        let mut seed = None;
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidSpec(format!("line {}: expected key=value", idx + 1))
            })?;
            let key = key.trim();
            let value: u64 = value.trim().parse().map_err(|_| {
                Error::InvalidSpec(format!("line {}: bad value for '{key}'", idx + 1))
            })?;
            let slot = match key {
                "n_trees" => &mut n_trees,
                "alphabet_lo" => &mut alphabet_lo,
                "alphabet_hi" => &mut alphabet_hi,
                "arity_lo" => &mut arity_lo,
                "arity_hi" => &mut arity_hi,
                "depth_lo" => &mut depth_lo,
                "depth_hi" => &mut depth_hi,
                "seed" => &mut seed,
                other => {
                    return Err(Error::InvalidSpec(format!(
                        "line {}: unknown key '{other}'",
                        idx + 1
                    )));
                }
            };
            if slot.replace(value).is_some() {
                return Err(Error::InvalidSpec(format!(
                    "line {}: duplicate key '{key}'",
                    idx + 1
                )));
            }
        }
        let require = |slot: Option<u64>, key: &str| {
            slot.ok_or_else(|| Error::InvalidSpec(format!("missing key '{key}'")))
        };
        let spec = GenSpec {
            n_trees: require(n_trees, "n_trees")? as usize,
            alphabet_size: (
                require(alphabet_lo, "alphabet_lo")? as usize,
                require(alphabet_hi, "alphabet_hi")? as usize,
            ),
            arity_range: (
                arity_lo.unwrap_or(1) as usize,
                require(arity_hi, "arity_hi")? as usize,
            ),
            depth_range: (
                require(depth_lo, "depth_lo")? as usize,
                require(depth_hi, "depth_hi")? as usize,
            ),
            seed: require(seed, "seed")?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Draws an alphabet within the spec bounds: symbol `s0` is nullary,
/// `s1` is non-nullary, the rest flip between the two kinds. Deterministic
/// in the rng state.
pub fn generate_alphabet(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Result<GradedAlphabet> {
    spec.validate()?;
    let size = rng.random_range(spec.alphabet_size.0..=spec.alphabet_size.1);
    let arity_lo = spec.arity_range.0.max(1);
    let arity_hi = spec.arity_range.1;
    let mut symbols = Vec::with_capacity(size);
    for i in 0..size {
        let arity = match i {
            0 => 0,
            1 => rng.random_range(arity_lo..=arity_hi),
            _ => {
                if rng.random_range(0..2u32) == 0 {
                    0
                } else {
                    rng.random_range(arity_lo..=arity_hi)
                }
            }
        };
        symbols.push(Symbol::new(&format!("s{i}"), arity).expect("generated names are valid"));
    }
    Ok(GradedAlphabet::new(symbols))
}

/// Generates one tree top-down: above the depth target any symbol is drawn
/// uniformly, at the target a nullary symbol is forced, so the resulting
/// depth is within `[1, depth_target]`.
pub fn generate_tree(alphabet: &GradedAlphabet, depth_target: usize, rng: &mut ChaCha8Rng) -> Tree {
    let all: Vec<Symbol> = alphabet.symbols().collect();
    let nullary: Vec<Symbol> = alphabet.symbols().filter(|s| s.arity() == 0).collect();
    assert!(
        !nullary.is_empty() && depth_target >= 1,
        "alphabet must provide leaves and the target must be positive"
    );
    let mut builder = TreeBuilder::new(None);
    builder
        .generate(&all, &nullary, depth_target, rng)
        .expect("no budget configured");
    builder.finish()
}

/// Incremental corpus generator with an optional total-node budget.
struct TreeBuilder {
    trees: Vec<Tree>,
    nodes_total: usize,
    budget: Option<usize>,
}

impl TreeBuilder {
    fn new(budget: Option<usize>) -> TreeBuilder {
        TreeBuilder {
            trees: Vec::new(),
            nodes_total: 0,
            budget,
        }
    }

    /// Generates one tree, checking the budget per node so a runaway spec
    /// aborts instead of exhausting memory.
    fn generate(
        &mut self,
        all: &[Symbol],
        nullary: &[Symbol],
        depth_target: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        struct Frame {
            symbol: Symbol,
            remaining: usize,
        }
        let mut children: Vec<Vec<Tree>> = vec![Vec::new()];
        let mut stack: Vec<Frame> = Vec::new();
        loop {
            // draw the symbol for the next node; depth is stack.len() + 1
            let depth = stack.len() + 1;
            let symbol = if depth >= depth_target {
                nullary[rng.random_range(0..nullary.len())].clone()
            } else {
                all[rng.random_range(0..all.len())].clone()
            };
            self.nodes_total += 1;
            if let Some(budget) = self.budget {
                if self.nodes_total > budget {
                    return Err(Error::BudgetExceeded(budget));
                }
            }
            let arity = symbol.arity();
            if arity > 0 {
                children.push(Vec::with_capacity(arity));
                stack.push(Frame {
                    symbol,
                    remaining: arity,
                });
                continue;
            }
            let mut completed = Tree::leaf(symbol).expect("nullary symbol");
            // bubble completed subtrees up while frames are saturated
            loop {
                match stack.last_mut() {
                    None => {
                        debug_assert_eq!(children.len(), 1);
                        self.trees.push(completed);
                        return Ok(());
                    }
                    Some(frame) => {
                        children.last_mut().expect("one list per frame").push(completed);
                        frame.remaining -= 1;
                        if frame.remaining > 0 {
                            break; // next child of this frame
                        }
                        let frame = stack.pop().expect("checked");
                        let kids = children.pop().expect("one list per frame");
                        completed = Tree::new(frame.symbol, kids).expect("arity matched");
                    }
                }
            }
        }
    }

    fn finish(mut self) -> Tree {
        debug_assert_eq!(self.trees.len(), 1);
        self.trees.pop().expect("one tree generated")
    }
}

/// Generates a whole corpus: the alphabet, then `n_trees` trees with
/// depth targets drawn from the spec's depth range. Byte-identical output
/// for equal specs.
pub fn generate_corpus(spec: &GenSpec) -> Result<(GradedAlphabet, Vec<Tree>)> {
    generate_corpus_capped(spec, None)
}

/// Like [`generate_corpus`] but aborts with an error once the corpus
/// exceeds `max_total_nodes`.
pub fn generate_corpus_capped(
    spec: &GenSpec,
    max_total_nodes: Option<usize>,
) -> Result<(GradedAlphabet, Vec<Tree>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let alphabet = generate_alphabet(spec, &mut rng)?;
    let all: Vec<Symbol> = alphabet.symbols().collect();
    let nullary: Vec<Symbol> = alphabet.symbols().filter(|s| s.arity() == 0).collect();
    let mut builder = TreeBuilder::new(max_total_nodes);
    for _ in 0..spec.n_trees {
        let depth_target = rng.random_range(spec.depth_range.0..=spec.depth_range.1);
        builder.generate(&all, &nullary, depth_target, &mut rng)?;
    }
    Ok((alphabet, builder.trees))
}

/// Generates an X/Y corpus pair over one shared alphabet, with the two
/// tree streams split off the same seed.
pub fn generate_corpus_pair(
    spec: &GenSpec,
    max_total_nodes: Option<usize>,
) -> Result<(GradedAlphabet, Vec<Tree>, Vec<Tree>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let alphabet = generate_alphabet(spec, &mut rng)?;
    let all: Vec<Symbol> = alphabet.symbols().collect();
    let nullary: Vec<Symbol> = alphabet.symbols().filter(|s| s.arity() == 0).collect();
    let seed_x: u64 = rng.random();
    let seed_y: u64 = rng.random();
    let generate_side = |seed: u64, builder: &mut TreeBuilder| -> Result<Vec<Tree>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..spec.n_trees {
            let depth_target = rng.random_range(spec.depth_range.0..=spec.depth_range.1);
            builder.generate(&all, &nullary, depth_target, &mut rng)?;
        }
        Ok(std::mem::take(&mut builder.trees))
    };
    let mut builder = TreeBuilder::new(max_total_nodes);
    let xs = generate_side(seed_x, &mut builder)?;
    let ys = generate_side(seed_y, &mut builder)?;
    Ok((alphabet, xs, ys))
}

// ---------------------------------------------------------------------------
// Alphabet sidecar format
// ---------------------------------------------------------------------------

/// Renders the sidecar: header plus one `name\tarity` line per symbol.
pub fn write_alphabet_file(alphabet: &GradedAlphabet) -> String {
    let mut out = String::from(ALPHABET_FILE_HEADER);
    out.push('\n');
    for symbol in alphabet.symbols() {
        out.push_str(symbol.name());
        out.push('\t');
        out.push_str(&symbol.arity().to_string());
        out.push('\n');
    }
    out
}

/// Parses the sidecar format back into an alphabet.
pub fn parse_alphabet_file(text: &str) -> Result<GradedAlphabet> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == ALPHABET_FILE_HEADER => {}
        other => {
            return Err(Error::InvalidSpec(format!(
                "expected header '{ALPHABET_FILE_HEADER}', found {:?}",
                other.map(|(_, l)| l).unwrap_or("")
            )));
        }
    }
    let mut symbols = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let (name, arity) = line.split_once('\t').ok_or_else(|| {
            Error::InvalidSpec(format!("line {}: expected name\\tarity", idx + 1))
        })?;
        let arity: usize = arity.parse().map_err(|_| {
            Error::InvalidSpec(format!("line {}: bad arity '{arity}'", idx + 1))
        })?;
        symbols.push(Symbol::new(name, arity).map_err(|e| e.at_line(idx + 1))?);
    }
    Ok(GradedAlphabet::new(symbols))
}
