//! Deterministic in-process map-shuffle-reduce, and the two parallel jobs:
//! automaton construction from a tree file and automaton intersection.
//!
//! The pipeline contract: map functions are pure per input record, the
//! partition of a record depends only on its key, all records sharing a
//! key are reduced together exactly once, and reduce functions are
//! insensitive to the order of their value list. Under that contract the
//! output is identical for every choice of worker count, partition count
//! and chunk size — the parallel path produces the same bytes as the
//! sequential one.
//!
//! Map tasks run on a bounded pool of scoped threads, each owning its
//! chunk of the input exclusively; the shuffle is the only cross-task
//! communication; each reduce group is owned by exactly one worker.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::rwta::{kernel, KernelValue, Rwta};
use crate::series::subtree_series;
use crate::tree::{parse_tree_infer, CanonicalTerm, InferredAlphabet};

/// Worker, partition and chunking choices for one pipeline run. Results
/// never depend on these; only wall time does.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PipelineConfig {
    /// Concurrent workers for the map and reduce phases.
    pub workers: usize,
    /// Number of reduce groups the key space is hashed into.
    pub partitions: usize,
    /// Input records per map task.
    pub chunk_size: usize,
}

impl PipelineConfig {
    pub fn new(workers: usize, partitions: usize, chunk_size: usize) -> PipelineConfig {
        PipelineConfig {
            workers,
            partitions,
            chunk_size,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.workers == 0 || self.partitions == 0 || self.chunk_size == 0 {
            return Err(Error::InvalidSpec(
                "pipeline workers, partitions and chunk_size must all be >= 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig::new(4, 16, 256)
    }
}

/// Counters for one pipeline run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct JobStats {
    /// Map tasks executed (input chunks).
    pub map_tasks: usize,
    /// Records emitted by all mappers and routed through the shuffle.
    pub records_shuffled: usize,
    /// Distinct keys reduced.
    pub reduce_groups: usize,
    /// End-to-end wall time of the run.
    pub wall_time: Duration,
}

impl JobStats {
    /// Accumulates the counters of a multi-job computation.
    pub fn merge(&mut self, other: &JobStats) {
        self.map_tasks += other.map_tasks;
        self.records_shuffled += other.records_shuffled;
        self.reduce_groups += other.reduce_groups;
        self.wall_time += other.wall_time;
    }
}

/// Runs `n` tasks on at most `workers` threads and returns the results in
/// task order.
fn run_tasks<T, F>(workers: usize, n: usize, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let results: Mutex<Vec<(usize, T)>> = Mutex::new(Vec::with_capacity(n));
    let next = AtomicUsize::new(0);
    let threads = workers.min(n);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = task(i);
                results.lock().expect("worker panicked").push((i, out));
            });
        }
    });
    let mut results = results.into_inner().expect("worker panicked");
    results.sort_by_key(|&(i, _)| i);
    results.into_iter().map(|(_, t)| t).collect()
}

/// Routes a key to its reduce partition; depends on the key alone.
fn partition_of<K: Hash>(key: &K, partitions: usize) -> usize {
    let mut hasher = DefaultHasher::new();
    key.hash(&mut hasher);
    (hasher.finish() % partitions as u64) as usize
}

/// Generic map-shuffle-reduce over an in-memory input.
///
/// `map_fn` turns one input record into keyed records; `reduce_fn` folds
/// the full value multiset of one key, returning `None` to drop the key
/// from the output. The output is sorted by key and is identical for every
/// `PipelineConfig`. Errors carry the offending record index or key; with
/// several failures the earliest record (smallest key) wins, so error
/// reporting is deterministic too.
pub fn run_pipeline<I, K, V, O, MF, RF>(
    input: &[I],
    map_fn: MF,
    reduce_fn: RF,
    config: &PipelineConfig,
) -> Result<(Vec<(K, O)>, JobStats)>
where
    I: Sync,
    K: Ord + Hash + Clone + Send + fmt::Display,
    V: Send,
    O: Send,
    MF: Fn(&I) -> Result<Vec<(K, V)>> + Sync,
    RF: Fn(&K, Vec<V>) -> Result<Option<O>> + Sync,
{
    config.validate()?;
    let start = Instant::now();

    // map phase: one task per chunk, emissions pre-split by partition
    struct MapOut<K, V> {
        buckets: Vec<Vec<(K, V)>>,
        emitted: usize,
        error: Option<(usize, Error)>,
    }
    let chunks: Vec<&[I]> = input.chunks(config.chunk_size).collect();
    let map_tasks = chunks.len();
    let map_outputs = run_tasks(config.workers, map_tasks, |task| {
        let mut out = MapOut {
            buckets: (0..config.partitions).map(|_| Vec::new()).collect(),
            emitted: 0,
            error: None,
        };
        for (offset, record) in chunks[task].iter().enumerate() {
            match map_fn(record) {
                Ok(records) => {
                    out.emitted += records.len();
                    for (key, value) in records {
                        let p = partition_of(&key, config.partitions);
                        out.buckets[p].push((key, value));
                    }
                }
                Err(e) => {
                    out.error = Some((task * config.chunk_size + offset, e));
                    break;
                }
            }
        }
        out
    });

    // shuffle: concatenate per-partition buckets in task order
    let mut partitions: Vec<Vec<(K, V)>> = (0..config.partitions).map(|_| Vec::new()).collect();
    let mut records_shuffled = 0usize;
    let mut map_error: Option<(usize, Error)> = None;
    for out in map_outputs {
        records_shuffled += out.emitted;
        if let Some((index, e)) = out.error {
            if map_error.as_ref().is_none_or(|(i, _)| index < *i) {
                map_error = Some((index, e));
            }
        }
        for (p, bucket) in out.buckets.into_iter().enumerate() {
            partitions[p].extend(bucket);
        }
    }
    if let Some((index, e)) = map_error {
        return Err(Error::MapFailed {
            index,
            source: Box::new(e),
        });
    }

    // reduce phase: group each partition by key, fold groups in key order
    struct ReduceOut<K, O> {
        rows: Vec<(K, O)>,
        groups: usize,
        error: Option<(K, Error)>,
    }
    let partitions: Vec<Mutex<Vec<(K, V)>>> = partitions.into_iter().map(Mutex::new).collect();
    let reduce_outputs = run_tasks(config.workers, partitions.len(), |p| {
        // each partition index is dispatched to exactly one task
        let bucket = std::mem::take(&mut *partitions[p].lock().expect("worker panicked"));
        let mut grouped: HashMap<K, Vec<V>> = HashMap::new();
        for (key, value) in bucket {
            grouped.entry(key).or_default().push(value);
        }
        let mut keys: Vec<K> = grouped.keys().cloned().collect();
        keys.sort();
        let mut out = ReduceOut {
            rows: Vec::new(),
            groups: keys.len(),
            error: None,
        };
        for key in keys {
            let values = grouped.remove(&key).expect("grouped above");
            match reduce_fn(&key, values) {
                Ok(Some(o)) => out.rows.push((key, o)),
                Ok(None) => {}
                Err(e) => {
                    out.error = Some((key, e));
                    break;
                }
            }
        }
        out
    });

    let mut rows: Vec<(K, O)> = Vec::new();
    let mut reduce_groups = 0usize;
    let mut reduce_error: Option<(K, Error)> = None;
    for out in reduce_outputs {
        reduce_groups += out.groups;
        if let Some((key, e)) = out.error {
            if reduce_error.as_ref().is_none_or(|(k, _)| key < *k) {
                reduce_error = Some((key, e));
            }
        }
        rows.extend(out.rows);
    }
    if let Some((key, e)) = reduce_error {
        return Err(Error::ReduceFailed {
            key: key.to_string(),
            source: Box::new(e),
        });
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));

    let stats = JobStats {
        map_tasks,
        records_shuffled,
        reduce_groups,
        wall_time: start.elapsed(),
    };
    Ok((rows, stats))
}

// ---------------------------------------------------------------------------
// Job 1: parallel automaton construction
// ---------------------------------------------------------------------------

/// Builds the subtree automaton of a tree file with the pipeline.
///
/// Each mapper parses its line and emits `(subtree, 1)` once per subtree
/// occurrence; reducers sum the counts into the state weights. The result
/// equals the sequential construction exactly, for every config.
pub fn parallel_build_rwta(text: &str, config: &PipelineConfig) -> Result<(Rwta, JobStats)> {
    // keep original line numbers for error reporting
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();

    let map_fn = |&(line_no, line): &(usize, &str)| -> Result<Vec<(CanonicalTerm, u64)>> {
        let mut inferred = InferredAlphabet::new();
        let tree = parse_tree_infer(line, &mut inferred).map_err(|e| e.at_line(line_no))?;
        let series = subtree_series(&tree)?;
        let mut records = Vec::with_capacity(tree.node_count());
        for (term, &count) in series.iter_pairs() {
            for _ in 0..count {
                records.push((term.clone(), 1u64));
            }
        }
        Ok(records)
    };
    let reduce_fn = |_key: &CanonicalTerm, values: Vec<u64>| -> Result<Option<u64>> {
        let mut weight: u64 = 0;
        for v in values {
            weight = weight.checked_add(v).ok_or(Error::Overflow {
                context: "summing subtree occurrence counts",
            })?;
        }
        Ok(Some(weight))
    };

    let (rows, stats) = run_pipeline(&lines, map_fn, reduce_fn, config)?;
    let automaton = Rwta::from_state_weights(rows)?;
    // cross-line arity conflicts surface here as homonym states: mappers
    // infer arities per line, so a clash only shows in the assembled
    // alphabet (every symbol of a subtree-closed state set roots a state)
    let mut prev: Option<(String, usize)> = None;
    for symbol in automaton.alphabet().symbols() {
        if let Some((name, arity)) = &prev {
            if name == symbol.name() && *arity != symbol.arity() {
                return Err(Error::ArityConflict {
                    name: name.clone(),
                    first: *arity,
                    found: symbol.arity(),
                });
            }
        }
        prev = Some((symbol.name().to_string(), symbol.arity()));
    }
    Ok((automaton, stats))
}

// ---------------------------------------------------------------------------
// Job 2: parallel automaton intersection
// ---------------------------------------------------------------------------

/// Intersects two subtree automata with the pipeline.
///
/// The mappers consume `state\tweight` lines (the RWTA file body) from
/// both automata and emit `(state, (1, weight))`; reducers sum the
/// presence flags and multiply the weights, keeping exactly the states
/// with presence 2. Equals the sequential intersection for every config.
pub fn parallel_intersect(
    x: &Rwta,
    y: &Rwta,
    config: &PipelineConfig,
) -> Result<(Rwta, JobStats)> {
    if !x.is_subtree_automaton() || !y.is_subtree_automaton() {
        return Err(Error::InvalidAutomaton(
            "intersection is defined on subtree automata".into(),
        ));
    }
    let mut lines = x.state_lines();
    lines.extend(y.state_lines());
    let (rows, stats) = intersect_lines(&lines, config)?;
    let automaton = Rwta::from_state_weights(rows)?;
    Ok((automaton, stats))
}

/// The intersection job on raw state lines; the mapper is exactly the
/// file-format consumer.
fn intersect_lines(
    lines: &[String],
    config: &PipelineConfig,
) -> Result<(Vec<(CanonicalTerm, u64)>, JobStats)> {
    let map_fn = |line: &String| -> Result<Vec<(CanonicalTerm, (u64, u64))>> {
        let (term, weight) = line
            .split_once('\t')
            .ok_or_else(|| Error::CorruptRwta("state line is not '<term>\\t<weight>'".into()))?;
        let weight: u64 = weight
            .parse()
            .map_err(|_| Error::CorruptRwta(format!("bad weight '{weight}'")))?;
        Ok(vec![(
            CanonicalTerm::from_trusted(term.to_string()),
            (1, weight),
        )])
    };
    let reduce_fn = |key: &CanonicalTerm, values: Vec<(u64, u64)>| -> Result<Option<u64>> {
        let mut presence: u64 = 0;
        let mut weight: u64 = 1;
        for (p, w) in values {
            presence += p;
            weight = weight.checked_mul(w).ok_or(Error::Overflow {
                context: "multiplying intersection weights",
            })?;
        }
        match presence {
            1 => Ok(None),
            2 => Ok(Some(weight)),
            _ => Err(Error::CorruptRwta(format!(
                "state '{key}' occurs {presence} times across two automata"
            ))),
        }
    };
    run_pipeline(lines, map_fn, reduce_fn, config)
}

// ---------------------------------------------------------------------------
// Composed job: kernel of two tree files
// ---------------------------------------------------------------------------

/// Kernel of two tree files via two parallel constructions, one parallel
/// intersection, and the weight sum. Stats are the totals of the three
/// pipeline runs.
pub fn parallel_kernel(
    x_text: &str,
    y_text: &str,
    config: &PipelineConfig,
) -> Result<(KernelValue, JobStats)> {
    let (ax, mut stats) = parallel_build_rwta(x_text, config)?;
    let (ay, build_y) = parallel_build_rwta(y_text, config)?;
    let (axy, inter) = parallel_intersect(&ax, &ay, config)?;
    stats.merge(&build_y);
    stats.merge(&inter);
    Ok((kernel(&axy)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rwta::{build_rwta, intersect};
    use crate::tree::Tree;
    use std::collections::BTreeMap;

    fn cfg(workers: usize, partitions: usize, chunk: usize) -> PipelineConfig {
        PipelineConfig::new(workers, partitions, chunk)
    }

    fn word_count(lines: &[String], config: &PipelineConfig) -> (Vec<(String, u64)>, JobStats) {
        run_pipeline(
            lines,
            |line: &String| {
                Ok(line
                    .split_whitespace()
                    .map(|w| (w.to_string(), 1u64))
                    .collect())
            },
            |_k: &String, vs: Vec<u64>| Ok(Some(vs.iter().sum())),
            config,
        )
        .unwrap()
    }

    #[test]
    fn word_count_is_identical_across_worker_counts() {
        let lines: Vec<String> = vec![
            "the quick brown fox".into(),
            "the quick brown fox".into(),
            "the quick brown fox".into(),
        ];
        let (rows1, stats1) = word_count(&lines, &cfg(1, 1, 1));
        let (rows4, stats4) = word_count(&lines, &cfg(4, 16, 2));
        assert_eq!(rows1, rows4);
        assert_eq!(rows1[0], ("brown".to_string(), 3));
        assert_eq!(stats1.records_shuffled, 12);
        assert_eq!(stats4.records_shuffled, 12);
        assert_eq!(stats1.map_tasks, 3);
        assert_eq!(stats4.map_tasks, 2);
        assert_eq!(stats1.reduce_groups, 4);
    }

    #[test]
    fn empty_input_yields_empty_output_and_zero_stats() {
        let (rows, stats) = word_count(&[], &cfg(4, 16, 64));
        assert!(rows.is_empty());
        assert_eq!(stats.map_tasks, 0);
        assert_eq!(stats.records_shuffled, 0);
        assert_eq!(stats.reduce_groups, 0);
    }

    #[test]
    fn config_must_be_positive() {
        let lines: Vec<String> = vec!["a".into()];
        for bad in [cfg(0, 1, 1), cfg(1, 0, 1), cfg(1, 1, 0)] {
            assert!(run_pipeline(
                &lines,
                |l: &String| Ok(vec![(l.clone(), 1u64)]),
                |_k, vs: Vec<u64>| Ok(Some(vs.len() as u64)),
                &bad,
            )
            .is_err());
        }
    }

    fn weight_map(a: &Rwta) -> BTreeMap<String, u64> {
        a.weights()
            .map(|(l, w)| (l.as_str().to_string(), w))
            .collect()
    }

    #[test]
    fn construction_job_reproduces_the_six_state_automaton() {
        let (a, stats) = parallel_build_rwta("f(f(h(a),b),g(b))\n", &cfg(2, 3, 1)).unwrap();
        assert_eq!(a.state_weight("b"), 2);
        assert_eq!(a.num_states(), 6);
        // one record per subtree occurrence
        assert_eq!(stats.records_shuffled, 7);
        assert_eq!(stats.reduce_groups, 6);
    }

    #[test]
    fn construction_job_counts_duplicate_lines() {
        let (a, _) = parallel_build_rwta("a\na\n", &cfg(4, 16, 1)).unwrap();
        assert_eq!(a.state_weight("a"), 2);
    }

    #[test]
    fn construction_job_on_empty_file() {
        let (a, stats) = parallel_build_rwta("", &cfg(4, 16, 64)).unwrap();
        assert!(a.is_empty());
        assert_eq!(stats.records_shuffled, 0);
    }

    #[test]
    fn construction_job_equals_sequential_build() {
        let text = "f(f(h(a),b),g(b))\nf(h(a),g(b))\n# comment\n\nh(h(h(a)))\n";
        let trees: Vec<Tree> = crate::tree::parse_tree_file(text).unwrap();
        let seq = build_rwta(&trees).unwrap();
        for config in [cfg(1, 1, 1), cfg(2, 3, 2), cfg(8, 16, 4096)] {
            let (par, _) = parallel_build_rwta(text, &config).unwrap();
            assert_eq!(weight_map(&par), weight_map(&seq));
        }
    }

    #[test]
    fn construction_job_reports_parse_errors_with_line_numbers() {
        let err = parallel_build_rwta("a\nf(\nb\n", &cfg(4, 4, 1)).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("line 2"), "got: {text}");
    }

    #[test]
    fn construction_job_reports_the_earliest_bad_line() {
        let err = parallel_build_rwta("a\nf(\ng(\n", &cfg(8, 4, 1)).unwrap_err();
        assert!(err.to_string().contains("line 2"), "got: {err}");
    }

    #[test]
    fn construction_job_rejects_cross_line_arity_conflicts() {
        let err = parallel_build_rwta("f(a)\nf(a,b)\n", &cfg(2, 4, 1)).unwrap_err();
        assert!(matches!(err, Error::ArityConflict { .. }), "got: {err:?}");
    }

    #[test]
    fn intersection_job_equals_sequential_intersection() {
        let xs = crate::tree::parse_tree_file("f(f(h(a),b),g(b))\nf(h(a),g(b))\n").unwrap();
        let ys = crate::tree::parse_tree_file("f(f(h(a),b),f(h(a),g(b)))\n").unwrap();
        let ax = build_rwta(&xs).unwrap();
        let ay = build_rwta(&ys).unwrap();
        let seq = intersect(&ax, &ay).unwrap();
        for config in [cfg(1, 1, 1), cfg(4, 3, 2), cfg(8, 16, 4096)] {
            let (par, _) = parallel_intersect(&ax, &ay, &config).unwrap();
            assert_eq!(weight_map(&par), weight_map(&seq));
        }
    }

    #[test]
    fn intersection_job_on_disjoint_automata_is_empty() {
        let ax = build_rwta(&[Tree::parse("a").unwrap()]).unwrap();
        let ay = build_rwta(&[Tree::parse("b").unwrap()]).unwrap();
        let (axy, stats) = parallel_intersect(&ax, &ay, &cfg(2, 2, 1)).unwrap();
        assert!(axy.is_empty());
        // both states were shuffled and reduced, then dropped at presence 1
        assert_eq!(stats.records_shuffled, 2);
        assert_eq!(stats.reduce_groups, 2);
    }

    #[test]
    fn intersection_job_squares_weights_on_self() {
        let a = build_rwta(&crate::tree::parse_tree_file("f(a,a)\nh(a)\n").unwrap()).unwrap();
        let (aa, _) = parallel_intersect(&a, &a, &cfg(4, 4, 1)).unwrap();
        for (label, weight) in a.weights() {
            assert_eq!(aa.state_weight(label.as_str()), weight * weight);
        }
    }

    #[test]
    fn intersection_job_detects_duplicate_states() {
        // a corrupt "automaton" with the same state three times
        let lines = vec!["a\t1".to_string(), "a\t2".to_string(), "a\t3".to_string()];
        let err = intersect_lines(&lines, &cfg(2, 2, 1)).unwrap_err();
        assert!(matches!(err, Error::ReduceFailed { .. }), "got: {err:?}");
    }

    #[test]
    fn parallel_kernel_matches_sequential_kernel() {
        let x_text = "f(f(h(a),b),g(b))\nf(h(a),g(b))\n";
        let y_text = "f(f(h(a),b),f(h(a),g(b)))\n";
        let (value, stats) = parallel_kernel(x_text, y_text, &cfg(4, 8, 2)).unwrap();
        assert_eq!(value.0, 18);
        assert!(stats.map_tasks > 0);
        let (one, _) = parallel_kernel("a\n", "a\n", &cfg(1, 1, 1)).unwrap();
        assert_eq!(one.0, 1);
    }

    #[test]
    fn reducer_results_are_order_insensitive_under_replay() {
        // replay the construction reducer on a reversed value list
        let values: Vec<u64> = vec![1; 97];
        let reduce = |vs: Vec<u64>| -> u64 {
            let mut w = 0u64;
            for v in vs {
                w = w.checked_add(v).unwrap();
            }
            w
        };
        assert_eq!(reduce(values.clone()), 97);
        let mut reversed = values.clone();
        reversed.reverse();
        assert_eq!(reduce(reversed), 97);

        // and the intersection fold with weights in both orders
        let fold = |vs: Vec<(u64, u64)>| -> (u64, u64) {
            let mut p = 0;
            let mut w = 1u64;
            for (a, b) in vs {
                p += a;
                w *= b;
            }
            (p, w)
        };
        assert_eq!(fold(vec![(1, 3), (1, 5)]), fold(vec![(1, 5), (1, 3)]));
    }
}
