//! `treekernel` — subtree kernels of tree corpora, sequential or via the
//! deterministic in-process map-shuffle-reduce pipeline.
//!
//! Exit status: 0 on success, 1 on internal or `--check` failures, 2 on
//! usage and input errors. The `kernel` subcommand prints the bare kernel
//! value on stdout; everything else goes to stderr.

mod bench;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use treekernel::datagen::{generate_corpus, generate_corpus_pair, write_alphabet_file, GenSpec};
use treekernel::parallel::{JobStats, PipelineConfig};
use treekernel::rwta::brute_force_kernel;
use treekernel::tree::{parse_tree_file, write_tree_file};

#[derive(Parser)]
#[command(
    name = "treekernel",
    version,
    about = "Subtree kernels of tree sets via weighted automata, with a data-parallel pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, ValueEnum)]
enum Mode {
    /// Single-threaded reference path.
    Seq,
    /// Map-shuffle-reduce pipeline; identical output by construction.
    Par,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Seq => "seq",
            Mode::Par => "par",
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic tree corpus from a key=value spec file.
    Gen {
        /// Spec file: n_trees, alphabet_lo/hi, arity_hi (optional
        /// arity_lo), depth_lo/hi, seed.
        spec: PathBuf,
        /// Output tree file, one term per line.
        out: PathBuf,
        /// Alphabet sidecar path (default: `<out>.alphabet`).
        #[arg(long)]
        alphabet_out: Option<PathBuf>,
        /// Override the seed from the spec file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the subtree automaton of a tree file and write it as an
    /// RWTA file.
    Build {
        input: PathBuf,
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Seq)]
        mode: Mode,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long, default_value_t = 16)]
        partitions: usize,
        #[arg(long, default_value_t = 256)]
        chunk: usize,
    },
    /// Compute the subtree kernel of two tree files; prints the bare
    /// value on stdout.
    Kernel {
        x: PathBuf,
        y: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Seq)]
        mode: Mode,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long, default_value_t = 16)]
        partitions: usize,
        #[arg(long, default_value_t = 256)]
        chunk: usize,
        /// Also run the brute-force reference and fail on any mismatch.
        #[arg(long)]
        check: bool,
        /// Emit per-job stats as JSON lines on stderr.
        #[arg(long)]
        json: bool,
    },
    /// Generate corpora from spec files and compare the sequential and
    /// parallel paths.
    Bench {
        /// One spec file per dataset; each yields an X/Y corpus pair over
        /// a shared alphabet.
        specs: Vec<PathBuf>,
        /// Worker counts to benchmark the parallel path at.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8])]
        workers: Vec<usize>,
        /// Repetitions per measurement; medians are reported.
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 16)]
        partitions: usize,
        #[arg(long, default_value_t = 256)]
        chunk: usize,
        /// Skip a dataset (with a warning) once its corpus pair exceeds
        /// this many nodes.
        #[arg(long, default_value_t = 10_000_000)]
        budget_nodes: usize,
        /// Override the seed of every spec file.
        #[arg(long)]
        seed: Option<u64>,
        /// Emit rows as JSON lines on stdout instead of the table.
        #[arg(long)]
        json: bool,
    },
}

/// Exit-status discipline: 2 for input problems, 1 for internal or check
/// failures.
struct CliError {
    code: u8,
    message: String,
}

type CliResult<T> = Result<T, CliError>;

impl From<treekernel::Error> for CliError {
    fn from(e: treekernel::Error) -> CliError {
        CliError {
            code: 2,
            message: e.to_string(),
        }
    }
}

fn internal(message: String) -> CliError {
    CliError { code: 1, message }
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Gen {
            spec,
            out,
            alphabet_out,
            seed,
        } => cmd_gen(&spec, &out, alphabet_out.as_deref(), seed),
        Command::Build {
            input,
            out,
            mode,
            workers,
            partitions,
            chunk,
        } => cmd_build(
            &input,
            &out,
            mode,
            &PipelineConfig::new(workers, partitions, chunk),
        ),
        Command::Kernel {
            x,
            y,
            mode,
            workers,
            partitions,
            chunk,
            check,
            json,
        } => cmd_kernel(
            &x,
            &y,
            mode,
            &PipelineConfig::new(workers, partitions, chunk),
            check,
            json,
        ),
        Command::Bench {
            specs,
            workers,
            reps,
            partitions,
            chunk,
            budget_nodes,
            seed,
            json,
        } => cmd_bench(
            &specs,
            &workers,
            reps.max(1),
            partitions,
            chunk,
            budget_nodes,
            seed,
            json,
        ),
    }
}

fn cmd_gen(
    spec_path: &Path,
    out: &Path,
    alphabet_out: Option<&Path>,
    seed: Option<u64>,
) -> CliResult<()> {
    let mut spec = GenSpec::parse(&read_file(spec_path)?)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let (alphabet, trees) = generate_corpus(&spec)?;
    let corpus = write_tree_file(&trees);
    write_file(out, &corpus)?;
    let sidecar_path = match alphabet_out {
        Some(p) => p.to_path_buf(),
        None => {
            let mut name = out.file_name().unwrap_or_default().to_os_string();
            name.push(".alphabet");
            out.with_file_name(name)
        }
    };
    write_file(&sidecar_path, &write_alphabet_file(&alphabet))?;
    println!(
        "wrote {} trees ({} bytes) to {}",
        trees.len(),
        corpus.len(),
        out.display()
    );
    println!(
        "wrote {} symbols to {}",
        alphabet.len(),
        sidecar_path.display()
    );
    Ok(())
}

fn cmd_build(input: &Path, out: &Path, mode: Mode, config: &PipelineConfig) -> CliResult<()> {
    let text = read_file(input)?;
    let automaton = match mode {
        Mode::Seq => treekernel::rwta::build_rwta(&parse_tree_file(&text)?)?,
        Mode::Par => treekernel::parallel::parallel_build_rwta(&text, config)?.0,
    };
    write_file(out, &automaton.to_file_string()?)?;
    println!(
        "wrote {} states to {}",
        automaton.num_states(),
        out.display()
    );
    Ok(())
}

fn print_job_stats(job: &str, stats: &JobStats) {
    eprintln!(
        "{}",
        serde_json::json!({
            "job": job,
            "map_tasks": stats.map_tasks,
            "records_shuffled": stats.records_shuffled,
            "reduce_groups": stats.reduce_groups,
            "wall_ms": stats.wall_time.as_secs_f64() * 1e3,
        })
    );
}

fn cmd_kernel(
    x: &Path,
    y: &Path,
    mode: Mode,
    config: &PipelineConfig,
    check: bool,
    json: bool,
) -> CliResult<()> {
    let x_text = read_file(x)?;
    let y_text = read_file(y)?;
    let value = match mode {
        Mode::Seq => {
            let (value, phases) = bench::run_sequential(&x_text, &y_text)?;
            if json {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "job": "sequential",
                        "parse_ms": phases.parse_ms,
                        "build_ms": phases.build_ms,
                        "intersect_ms": phases.intersect_ms,
                        "sum_ms": phases.sum_ms,
                    })
                );
            }
            value
        }
        Mode::Par => {
            let (value, _, jobs) = bench::run_parallel(&x_text, &y_text, config)?;
            if json {
                for (job, stats) in &jobs {
                    print_job_stats(job, stats);
                }
            }
            value
        }
    };
    if check {
        let xs = parse_tree_file(&x_text)?;
        let ys = parse_tree_file(&y_text)?;
        let reference = brute_force_kernel(&xs, &ys)?.0;
        if reference != value {
            return Err(internal(format!(
                "kernel check failed: computed {value}, brute force says {reference}"
            )));
        }
    }
    println!("{value}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    specs: &[PathBuf],
    workers: &[usize],
    reps: usize,
    partitions: usize,
    chunk: usize,
    budget_nodes: usize,
    seed: Option<u64>,
    json: bool,
) -> CliResult<()> {
    if specs.is_empty() {
        return Err(CliError {
            code: 2,
            message: "bench needs at least one spec file".into(),
        });
    }
    let mut rows: Vec<bench::BenchRow> = Vec::new();
    for spec_path in specs {
        let mut spec = GenSpec::parse(&read_file(spec_path)?)?;
        if let Some(seed) = seed {
            spec.seed = seed;
        }
        let dataset = spec_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| spec_path.display().to_string());
        let (_, xs, ys) = match generate_corpus_pair(&spec, Some(budget_nodes)) {
            Ok(pair) => pair,
            Err(treekernel::Error::BudgetExceeded(limit)) => {
                eprintln!(
                    "warning: dataset '{dataset}' exceeds the {limit}-node budget, skipped"
                );
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let nodes_x: usize = xs.iter().map(|t| t.node_count()).sum();
        let nodes_y: usize = ys.iter().map(|t| t.node_count()).sum();
        let x_text = write_tree_file(&xs);
        let y_text = write_tree_file(&ys);
        drop(xs);
        drop(ys);

        let mut seq_totals = Vec::with_capacity(reps);
        let mut seq_phase_samples = Vec::with_capacity(reps);
        let mut seq_value = 0u64;
        for _ in 0..reps {
            let (value, phases) = bench::run_sequential(&x_text, &y_text)?;
            seq_value = value;
            seq_totals.push(phases.total_ms());
            seq_phase_samples.push(phases);
        }
        let t_seq_ms = bench::median(&mut seq_totals);
        let seq_phases = median_phases(&seq_phase_samples);

        let mut par_time_by_workers: Vec<(usize, f64)> = Vec::new();
        for &w in workers {
            let config = PipelineConfig::new(w, partitions, chunk);
            let mut par_totals = Vec::with_capacity(reps);
            let mut par_phase_samples = Vec::with_capacity(reps);
            let mut par_value = 0u64;
            for _ in 0..reps {
                let (value, phases, _) = bench::run_parallel(&x_text, &y_text, &config)?;
                par_value = value;
                par_totals.push(phases.total_ms());
                par_phase_samples.push(phases);
            }
            if par_value != seq_value {
                return Err(internal(format!(
                    "dataset '{dataset}': parallel kernel {par_value} != sequential {seq_value}"
                )));
            }
            let t_par_ms = bench::median(&mut par_totals);
            par_time_by_workers.push((w, t_par_ms));
            rows.push(bench::BenchRow {
                dataset: dataset.clone(),
                workers: w,
                nodes_x,
                nodes_y,
                t_seq_ms,
                t_par_ms,
                a_abs: t_seq_ms / t_par_ms,
                kernel: seq_value,
                seq_phases,
                par_phases: median_phases(&par_phase_samples),
            });
        }

        // soft expectation, logged and never asserted: more workers should
        // help once the corpus is large enough
        if nodes_x + nodes_y >= 1_000_000 {
            let t1 = par_time_by_workers.iter().find(|(w, _)| *w == 1);
            let t4 = par_time_by_workers.iter().find(|(w, _)| *w == 4);
            if let (Some((_, t1)), Some((_, t4))) = (t1, t4) {
                let held = t4 < t1;
                eprintln!(
                    "note: dataset '{dataset}' ({} nodes): t_par(4)={t4:.1}ms {} t_par(1)={t1:.1}ms{}",
                    nodes_x + nodes_y,
                    if held { "<" } else { ">=" },
                    if held { "" } else { " (speedup expectation not met)" },
                );
            }
        }
    }

    if json {
        for row in &rows {
            println!("{}", row.to_json());
        }
    } else {
        print!("{}", bench::render_table(&rows));
    }
    Ok(())
}

fn median_phases(samples: &[bench::Phases]) -> bench::Phases {
    let grab = |f: fn(&bench::Phases) -> f64| {
        let mut values: Vec<f64> = samples.iter().map(f).collect();
        bench::median(&mut values)
    };
    bench::Phases {
        parse_ms: grab(|p| p.parse_ms),
        build_ms: grab(|p| p.build_ms),
        intersect_ms: grab(|p| p.intersect_ms),
        sum_ms: grab(|p| p.sum_ms),
    }
}
