use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use asbm::attr::sample_attributes;
use asbm::baselines::{detect_kmeans_only, detect_naive_mf};
use asbm::experiment::{
    emit_report, load_solver_config, run_experiment, summarize, ExperimentConfig, ExperimentKind,
    Method, Preset,
};
use asbm::generate::sample_four_group;
use asbm::io;
use asbm::metrics::evaluate;
use asbm::seeds::derive_seed;
use asbm::{detect, AttributedNetwork, DetectConfig, GroundTruth};

#[derive(Parser)]
#[command(name = "asbm", version, about = "Community detection on attributed networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a four-group benchmark network with Gaussian attributes.
    Generate(GenerateArgs),
    /// Detect communities in one network.
    Detect(DetectArgs),
    /// Run an experiment sweep and write CSV reports.
    Sweep(SweepArgs),
    /// Score a labeling against ground truth.
    Eval(EvalArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 2.5)]
    z_out: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Attribute means are `mean_spacing * label`.
    #[arg(long, default_value_t = 10.0)]
    mean_spacing: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Where a network comes from: a GML file or an edge list.
#[derive(Args)]
struct NetworkArgs {
    /// GML file; node `value` fields are read as ground truth.
    #[arg(long, conflicts_with = "edges")]
    dataset: Option<PathBuf>,
    /// Edge list, one `i j` pair per line.
    #[arg(long)]
    edges: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    network: NetworkArgs,
    /// `vertex_id,value` CSV. Required unless --sigma is given with a labeled dataset.
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Sample attributes from the dataset's labels with this deviation.
    #[arg(long, conflicts_with = "attributes")]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    mean_spacing: f64,
    /// `vertex_id,label` CSV used for scoring.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Number of communities to fit; defaults to the ground-truth count.
    #[arg(long)]
    l_max: Option<usize>,
    #[arg(long, default_value = "bp-em")]
    method: Method,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// TOML file with a `[solver]` table.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML file with `[experiment]` and optional `[solver]` tables.
    #[arg(long, required_unless_present = "kind")]
    config: Option<PathBuf>,
    /// Experiment kind, used with its preset when no config is given.
    #[arg(long, value_parser = parse_kind)]
    kind: Option<ExperimentKind>,
    #[arg(long, value_parser = parse_preset, default_value = "ci")]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Restrict to these methods (repeatable).
    #[arg(long)]
    method: Vec<Method>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    network: NetworkArgs,
    /// Predicted `vertex_id,label` CSV.
    #[arg(long)]
    labels: PathBuf,
    /// True `vertex_id,label` CSV; defaults to the dataset's `value` fields.
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    match s {
        "four-group-sweep-zout" => Ok(ExperimentKind::FourGroupSweepZout),
        "four-group-sweep-sigma" => Ok(ExperimentKind::FourGroupSweepSigma),
        "real-network-sweep-sigma" => Ok(ExperimentKind::RealNetworkSweepSigma),
        "single-run" => Ok(ExperimentKind::SingleRun),
        _ => Err(format!("unknown experiment kind `{s}`")),
    }
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    match s {
        "paper" => Ok(Preset::Paper),
        "ci" => Ok(Preset::Ci),
        _ => Err(format!("unknown preset `{s}` (paper, ci)")),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load_network(args: &NetworkArgs) -> Result<(AttributedNetwork, Option<GroundTruth>)> {
    match (&args.dataset, &args.edges) {
        (Some(p), _) => Ok(io::parse_gml(&read(p)?).with_context(|| p.display().to_string())?),
        (None, Some(p)) => Ok((
            io::parse_edge_list(&read(p)?).with_context(|| p.display().to_string())?,
            None,
        )),
        (None, None) => bail!("one of --dataset or --edges is required"),
    }
}

fn load_labels(network: &AttributedNetwork, path: &Path) -> Result<GroundTruth> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    io::read_labels(network, f).with_context(|| path.display().to_string())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let (net, truth) = sample_four_group(args.z_out, derive_seed(args.seed, &[0]))?;
    let k = truth.n_communities();
    let mu: Vec<f64> = (0..k).map(|l| args.mean_spacing * l as f64).collect();
    let d = sample_attributes(&truth, &mu, &vec![args.sigma; k], derive_seed(args.seed, &[1]))?;
    let net = net.with_attributes(d)?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("edges.txt"), io::write_edge_list(&net))?;
    std::fs::write(args.out.join("network.gml"), io::write_gml(&net, Some(&truth)))?;
    io::write_attributes(&net, create(&args.out.join("attributes.csv"))?)?;
    io::write_labels(&net, &truth, create(&args.out.join("truth.csv"))?)?;
    println!(
        "{} vertices, {} edges, {} communities -> {}",
        net.n_vertices(),
        net.n_edges(),
        k,
        args.out.display()
    );
    Ok(())
}

fn run_detect(args: DetectArgs) -> Result<()> {
    let (net, gml_truth) = load_network(&args.network)?;
    let truth = match &args.truth {
        Some(p) => Some(load_labels(&net, p)?),
        None => gml_truth,
    };
    let net = match (&args.attributes, args.sigma) {
        (Some(p), _) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            let d = io::read_attributes(&net, f).with_context(|| p.display().to_string())?;
            net.with_attributes(d)?
        }
        (None, Some(sigma)) => {
            let Some(t) = &truth else {
                bail!("--sigma needs ground-truth labels to sample attributes from");
            };
            let k = t.n_communities();
            let mu: Vec<f64> = (0..k).map(|l| args.mean_spacing * l as f64).collect();
            let d = sample_attributes(t, &mu, &vec![sigma; k], derive_seed(args.seed, &[1]))?;
            net.with_attributes(d)?
        }
        (None, None) => bail!("attributes are required: pass --attributes or --sigma"),
    };
    let l_max = match (args.l_max, &truth) {
        (Some(l), _) => l,
        (None, Some(t)) => t.n_communities(),
        (None, None) => bail!("--l-max is required without ground truth"),
    };
    let cfg = match &args.config {
        Some(p) => load_solver_config(p)?,
        None => DetectConfig::default(),
    };

    let (labels, beliefs) = match args.method {
        Method::BpEm | Method::NaiveMf => {
            let r = if args.method == Method::BpEm {
                detect(&net, l_max, &cfg, args.seed)?
            } else {
                detect_naive_mf(&net, l_max, &cfg, args.seed)?
            };
            println!(
                "method={} iterations={} converged={} objective={:.6}",
                args.method.name(),
                r.iterations,
                r.converged,
                r.objective
            );
            println!("gamma={:?}", r.params.gamma);
            println!("mu={:?}", r.params.mu);
            println!("sigma={:?}", r.params.sigma);
            (r.labels, Some(r.beliefs))
        }
        Method::Kmeans => (detect_kmeans_only(net.attributes(), l_max, args.seed, &cfg)?, None),
    };
    if let Some(t) = &truth {
        let report = evaluate(&labels, t, &net)?;
        println!(
            "accuracy={:.6} modularity={:.6}",
            report.accuracy, report.modularity
        );
    } else {
        println!("modularity={:.6}", asbm::metrics::modularity(&labels, &net));
    }
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        io::write_labels(&net, &labels, create(&out.join("labels.csv"))?)?;
        if let Some(b) = &beliefs {
            io::write_beliefs(&net, b, create(&out.join("beliefs.csv"))?)?;
        }
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = match (&args.config, args.kind) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(kind)) => ExperimentConfig::preset(kind, args.preset),
        (None, None) => unreachable!("clap requires --config or --kind"),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if !args.method.is_empty() {
        cfg.methods = args.method;
    }
    if args.dataset.is_some() {
        cfg.dataset = args.dataset;
    }
    let results = run_experiment(&cfg)?;
    let files = emit_report(&results, &args.out)?;
    for row in summarize(&results) {
        println!(
            "{:<9} {}={:<6} acc={:.4}±{:.4} Q={:.4}±{:.4} failures={}",
            row.method,
            row.sweep_axis,
            row.sweep_value,
            row.accuracy_mean,
            row.accuracy_se,
            row.modularity_mean,
            row.modularity_se,
            row.failures
        );
    }
    println!("wrote {}", files.summary.display());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let (net, gml_truth) = load_network(&args.network)?;
    let labels = load_labels(&net, &args.labels)?;
    let truth = match (&args.truth, gml_truth) {
        (Some(p), _) => load_labels(&net, p)?,
        (None, Some(t)) => t,
        (None, None) => bail!("no ground truth: pass --truth or a labeled --dataset"),
    };
    let report = evaluate(&labels, &truth, &net)?;
    println!("accuracy={:.6}", report.accuracy);
    println!("modularity={:.6}", report.modularity);
    println!("permutation={:?}", report.best_permutation);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Detect(a) => run_detect(a),
        Command::Sweep(a) => sweep(a),
        Command::Eval(a) => eval(a),
    }
}

fn main() -> Result<()> {
    run(Cli::parse())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn invoke(args: &[&str]) -> Result<()> {
        let cli = Cli::try_parse_from(std::iter::once("asbm").chain(args.iter().copied()))?;
        run(cli)
    }

    fn s(p: &Path) -> &str {
        p.to_str().unwrap()
    }

    fn karate() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/karate.gml")
    }

    #[test]
    fn generate_detect_eval_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        invoke(&["generate", "--z-out", "2", "--seed", "4", "--out", s(&data)]).unwrap();
        for f in ["edges.txt", "network.gml", "attributes.csv", "truth.csv"] {
            assert!(data.join(f).exists(), "{f}");
        }

        let out = dir.path().join("fit");
        let (edges, truth) = (data.join("edges.txt"), data.join("truth.csv"));
        invoke(&[
            "detect", "--edges", s(&edges), "--attributes", s(&data.join("attributes.csv")),
            "--truth", s(&truth), "--l-max", "4", "--seed", "4", "--out", s(&out),
        ])
        .unwrap();
        let beliefs = std::fs::read_to_string(out.join("beliefs.csv")).unwrap();
        assert!(beliefs.starts_with("vertex_id,p0,p1,p2,p3"));
        invoke(&["eval", "--edges", s(&edges), "--labels", s(&out.join("labels.csv")), "--truth", s(&truth)]).unwrap();

        let net = io::parse_edge_list(&read(&edges).unwrap()).unwrap();
        let predicted = load_labels(&net, &out.join("labels.csv")).unwrap();
        let truth = load_labels(&net, &truth).unwrap();
        assert_eq!(predicted.labels().len(), 128);
        assert!(evaluate(&predicted, &truth, &net).unwrap().accuracy >= 0.95);
    }

    #[test]
    fn detect_every_method_on_dataset() {
        let dir = tempfile::tempdir().unwrap();
        for method in ["bp-em", "naive-mf", "kmeans"] {
            let out = dir.path().join(method);
            invoke(&[
                "detect", "--dataset", s(&karate()), "--sigma", "1", "--l-max", "2", "--method", method,
                "--out", s(&out),
            ])
            .unwrap();
            assert!(out.join("labels.csv").exists());
        }
    }

    #[test]
    fn sweep_is_repeatable() {
        let dir = tempfile::tempdir().unwrap();
        let sweep = |name: &str| {
            let out = dir.path().join(name);
            invoke(&[
                "sweep", "--kind", "four-group-sweep-zout", "--trials", "2", "--method", "kmeans", "--seed",
                "9", "--out", s(&out),
            ])
            .unwrap();
            out
        };
        let (a, b) = (sweep("a"), sweep("b"));
        for f in ["summary.csv", "long.csv", "trials.csv"] {
            let x = std::fs::read(a.join(f)).unwrap();
            assert!(!x.is_empty());
            assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn bad_invocations_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (missing, karate, out) = (dir.path().join("missing.gml"), karate(), dir.path().join("out"));
        let bad = dir.path().join("bad.toml");
        std::fs::write(&bad, "[solver]\nno_such_field = 1\n").unwrap();
        let cases: Vec<Vec<&str>> = vec![
            vec!["detect", "--dataset", s(&missing), "--sigma", "1", "--out", s(&out)],
            vec!["detect", "--dataset", s(&karate), "--sigma", "1", "--l-max", "0", "--out", s(&out)],
            vec!["detect", "--dataset", s(&karate), "--sigma", "1", "--config", s(&bad), "--out", s(&out)],
            vec!["eval", "--edges", s(&missing), "--labels", s(&missing)],
            vec!["sweep", "--kind", "no-such-kind", "--out", s(&out)],
            vec!["generate", "--z-out", "-1", "--out", s(&out)],
            vec!["frobnicate"],
        ];
        for args in cases {
            assert!(invoke(&args).is_err(), "{args:?} should fail");
        }
    }
}
