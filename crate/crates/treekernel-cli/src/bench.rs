//! Phase-timed kernel runs and the benchmark table.

use std::time::Instant;

use treekernel::parallel::{
    parallel_build_rwta, parallel_intersect, JobStats, PipelineConfig,
};
use treekernel::rwta::{build_rwta, intersect, kernel};
use treekernel::tree::parse_tree_file;
use treekernel::Result;

/// Per-phase wall times of one kernel run, in milliseconds. The parallel
/// path parses inside its build jobs, so its `parse_ms` is folded into
/// `build_ms`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Phases {
    pub parse_ms: f64,
    pub build_ms: f64,
    pub intersect_ms: f64,
    pub sum_ms: f64,
}

impl Phases {
    pub fn total_ms(&self) -> f64 {
        self.parse_ms + self.build_ms + self.intersect_ms + self.sum_ms
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Sequential path: parse both files, build both automata, intersect, sum.
pub fn run_sequential(x_text: &str, y_text: &str) -> Result<(u64, Phases)> {
    let mut phases = Phases::default();

    let t = Instant::now();
    let xs = parse_tree_file(x_text)?;
    let ys = parse_tree_file(y_text)?;
    phases.parse_ms = ms(t);

    let t = Instant::now();
    let ax = build_rwta(&xs)?;
    let ay = build_rwta(&ys)?;
    phases.build_ms = ms(t);

    let t = Instant::now();
    let axy = intersect(&ax, &ay)?;
    phases.intersect_ms = ms(t);

    let t = Instant::now();
    let value = kernel(&axy)?;
    phases.sum_ms = ms(t);

    Ok((value.0, phases))
}

/// Stats of the three pipeline jobs behind one parallel kernel run.
pub type NamedJobStats = Vec<(&'static str, JobStats)>;

/// Parallel path: two construction jobs, one intersection job, then the
/// sequential weight sum. Also returns the per-job pipeline stats.
pub fn run_parallel(
    x_text: &str,
    y_text: &str,
    config: &PipelineConfig,
) -> Result<(u64, Phases, NamedJobStats)> {
    let mut phases = Phases::default();

    let t = Instant::now();
    let (ax, stats_x) = parallel_build_rwta(x_text, config)?;
    let (ay, stats_y) = parallel_build_rwta(y_text, config)?;
    phases.build_ms = ms(t);

    let t = Instant::now();
    let (axy, stats_xy) = parallel_intersect(&ax, &ay, config)?;
    phases.intersect_ms = ms(t);

    let t = Instant::now();
    let value = kernel(&axy)?;
    phases.sum_ms = ms(t);

    Ok((
        value.0,
        phases,
        vec![
            ("build_x", stats_x),
            ("build_y", stats_y),
            ("intersect", stats_xy),
        ],
    ))
}

/// Median of a sample; benches report medians so single outliers do not
/// dominate desk-scale runs.
pub fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    match samples.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => samples[n / 2],
        n => (samples[n / 2 - 1] + samples[n / 2]) / 2.0,
    }
}

/// One benchmark result row: a dataset at a worker count.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub dataset: String,
    pub workers: usize,
    pub nodes_x: usize,
    pub nodes_y: usize,
    pub t_seq_ms: f64,
    pub t_par_ms: f64,
    pub a_abs: f64,
    pub kernel: u64,
    pub seq_phases: Phases,
    pub par_phases: Phases,
}

impl BenchRow {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "dataset": self.dataset,
            "workers": self.workers,
            "nodes_x": self.nodes_x,
            "nodes_y": self.nodes_y,
            "t_seq_ms": self.t_seq_ms,
            "t_par_ms": self.t_par_ms,
            "a_abs": self.a_abs,
            "kernel": self.kernel,
            "seq_parse_ms": self.seq_phases.parse_ms,
            "seq_build_ms": self.seq_phases.build_ms,
            "seq_intersect_ms": self.seq_phases.intersect_ms,
            "seq_sum_ms": self.seq_phases.sum_ms,
            "par_build_ms": self.par_phases.build_ms,
            "par_intersect_ms": self.par_phases.intersect_ms,
            "par_sum_ms": self.par_phases.sum_ms,
        })
    }
}

/// Renders the text table with one average line per worker count.
pub fn render_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>7} {:>10} {:>10} {:>12} {:>12} {:>8} {:>14}\n",
        "dataset", "workers", "nodes_x", "nodes_y", "t_seq_ms", "t_par_ms", "A_abs", "kernel"
    ));
    for row in rows {
        out.push_str(&format!(
            "{:<16} {:>7} {:>10} {:>10} {:>12.1} {:>12.1} {:>8.2} {:>14}\n",
            row.dataset,
            row.workers,
            row.nodes_x,
            row.nodes_y,
            row.t_seq_ms,
            row.t_par_ms,
            row.a_abs,
            row.kernel
        ));
    }
    let mut worker_counts: Vec<usize> = rows.iter().map(|r| r.workers).collect();
    worker_counts.sort_unstable();
    worker_counts.dedup();
    for workers in worker_counts {
        let group: Vec<&BenchRow> = rows.iter().filter(|r| r.workers == workers).collect();
        let avg = group.iter().map(|r| r.a_abs).sum::<f64>() / group.len() as f64;
        out.push_str(&format!(
            "{:<16} {:>7} {:>10} {:>10} {:>12} {:>12} {:>8.2} {:>14}\n",
            "average", workers, "", "", "", "", avg, ""
        ));
    }
    out
}
