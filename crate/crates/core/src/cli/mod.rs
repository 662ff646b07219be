//! Command-line front end. Every command returns its output as text so the
//! binary stays a thin wrapper: lines starting with `#` echo the resolved
//! configuration, then comes a human-readable table, then one JSON record
//! per result.

pub mod ingest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::competitors::{bs_test, cq_test, sd_test};
use crate::error::{Error, Result};
use crate::hotelling::{choose_k, critical_value_curve, power_given_delta_via, PowerInputs, PowerRoute};
use crate::linstat::{summarize, DataMatrix, SufficientStats};
use crate::procedure::{
    average_pvalue_keyed, calibrate_null, raptt_test_stats, CalibrationKey, KChoice, NullCalibration,
    RapttConfig,
};
use crate::projections::ProjectionKind;
use crate::randsrc::{random_permutation, StreamKey};
use crate::report::TestReport;
use crate::simharness::{k_ratio_experiment, run_power_experiment, ExperimentConfig, ExperimentKind};

use ingest::{ingest_csv, ingest_two_files, load_colon, IngestOptions, LabelColumn, Transform};

#[derive(Debug, Parser)]
#[command(name = "raptt", version, about = "Random-projection Hotelling two-sample tests")]
pub struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Master seed for every random stream.
    #[arg(long, global = true, env = "RAPTT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Projected dimension minimizing the critical value, with the curve.
    ChooseK {
        #[arg(long)]
        n1: usize,
        #[arg(long)]
        n2: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Simulate the null distribution of the averaged p-value and save it.
    Calibrate {
        #[arg(long)]
        n1: usize,
        #[arg(long)]
        n2: usize,
        /// Data dimension the calibration will be used with.
        #[arg(long)]
        p: usize,
        #[arg(long, default_value = "auto")]
        k: KChoice,
        #[arg(long, default_value_t = 1000)]
        m: usize,
        #[arg(long = "K", default_value_t = 2000)]
        big_k: usize,
        #[arg(long, value_enum, default_value_t = KindArg::Haar)]
        projection: KindArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrated random-projection test on two samples.
    Test {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        raptt: RapttArgs,
        #[arg(long, value_enum, default_value_t = KindArg::Haar)]
        projection: KindArg,
    },
    /// Random-projection tests next to the BS, CQ and SD tests.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        raptt: RapttArgs,
        #[arg(long, value_enum, default_value_t = KindArg::Both)]
        projection: KindArg,
    },
    /// Exact power of one random-projection test given the noncentrality.
    Power {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n1: usize,
        #[arg(long)]
        n2: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Projected noncentrality Δ_R.
        #[arg(long)]
        delta: f64,
        /// Also evaluate the incomplete-beta series and report the difference.
        #[arg(long)]
        series: bool,
    },
    /// Run a simulation experiment described by a key = value file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Write the CSV table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Median p-values over random subsamples of both groups.
    Subsample {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        raptt: RapttArgs,
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
        #[arg(long, default_value_t = 100)]
        repeats: usize,
    },
    /// Show where to get the colon tissue data and check a download.
    FetchColon {
        /// Directory holding I2000 and tissues.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Haar,
    Block,
    Both,
}

impl KindArg {
    fn kinds(self) -> Vec<ProjectionKind> {
        match self {
            KindArg::Haar => vec![ProjectionKind::Haar],
            KindArg::Block => vec![ProjectionKind::Block],
            KindArg::Both => ProjectionKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// First sample, or the labelled file when --labels is given.
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Second sample (two-file mode).
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Label column (index or header name) of a single labelled file.
    #[arg(long)]
    pub labels: Option<String>,
    /// Label of the first group; defaults to the first label seen.
    #[arg(long)]
    pub x_label: Option<String>,
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Natural-log transform every value.
    #[arg(long)]
    pub log: bool,
    /// Directory with the colon tissue files (log transform applied).
    #[arg(long)]
    pub colon: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RapttArgs {
    #[arg(long, default_value_t = 1000)]
    pub m: usize,
    #[arg(long, default_value = "auto")]
    pub k: KChoice,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Null draws when a calibration has to be simulated.
    #[arg(long = "K", default_value_t = 2000)]
    pub big_k: usize,
    /// Saved calibration files; one per projection kind.
    #[arg(long)]
    pub calibration: Vec<PathBuf>,
    /// Directory of calibrations keyed by their parameters; filled on a miss.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> Result<(DataMatrix, DataMatrix)> {
        if let Some(dir) = &self.colon {
            return load_colon(dir);
        }
        let opts = IngestOptions {
            delimiter: self.delimiter.map(|c| c as u8),
            has_header: self.header,
            label_column: self.labels.as_deref().map(|s| s.parse()).transpose()?,
            x_label: self.x_label.clone(),
            transform: if self.log { Transform::Log } else { Transform::None },
        };
        match (&self.x, &self.y, &opts.label_column) {
            (Some(x), Some(y), None) => ingest_two_files(x, y, &opts),
            (Some(x), None, Some(LabelColumn::Index(_) | LabelColumn::Name(_))) => ingest_csv(x, &opts),
            _ => Err(Error::Config(
                "give --x and --y, or --x with --labels, or --colon".into(),
            )),
        }
    }

    fn describe(&self) -> String {
        if let Some(dir) = &self.colon {
            return format!("colon:{}", dir.display());
        }
        let mut s = self.x.as_ref().map_or(String::new(), |p| p.display().to_string());
        if let Some(y) = &self.y {
            let _ = write!(s, " + {}", y.display());
        }
        if let Some(l) = &self.labels {
            let _ = write!(s, " (labels: {l})");
        }
        if self.log {
            s.push_str(" [log]");
        }
        s
    }
}

impl RapttArgs {
    fn config(&self, kind: ProjectionKind, seed: u64) -> RapttConfig {
        RapttConfig {
            m: self.m,
            k: self.k,
            kind,
            alpha: self.alpha,
            seed,
        }
    }
}

fn cache_name(key: &CalibrationKey, big_k: usize, seed: u64) -> String {
    format!(
        "cal_n1-{}_n2-{}_p-{}_k-{}_m-{}_{}_K-{}_seed-{}.json",
        key.n1, key.n2, key.p, key.k, key.m, key.kind, big_k, seed
    )
}

/// A calibration from a file, the cache, or a fresh simulation.
pub fn obtain_calibration(
    key: &CalibrationKey,
    cfg: &RapttConfig,
    big_k: usize,
    files: &[PathBuf],
    cache_dir: Option<&Path>,
) -> Result<(NullCalibration, String)> {
    if !files.is_empty() {
        let mut tried = Vec::new();
        for f in files {
            let cal = NullCalibration::load(f)?;
            if cal.kind == key.kind {
                cal.check_matches(key)?;
                return Ok((cal, f.display().to_string()));
            }
            tried.push(f.display().to_string());
        }
        return Err(Error::CalibrationMismatch(format!(
            "none of {tried:?} is a {} calibration",
            key.kind
        )));
    }
    if let Some(dir) = cache_dir {
        let path = dir.join(cache_name(key, big_k, cfg.seed));
        if path.exists() {
            let cal = NullCalibration::load(&path)?;
            cal.check_matches(key)?;
            return Ok((cal, path.display().to_string()));
        }
        let cal = calibrate_null(key.n1, key.n2, key.p, cfg, big_k)?;
        std::fs::create_dir_all(dir)?;
        cal.save(&path)?;
        return Ok((cal, format!("simulated, cached at {}", path.display())));
    }
    let cal = calibrate_null(key.n1, key.n2, key.p, cfg, big_k)?;
    Ok((cal, "simulated".into()))
}

fn calibration_for(
    stats: &SufficientStats,
    args: &RapttArgs,
    cfg: &RapttConfig,
) -> Result<(NullCalibration, String)> {
    let key = CalibrationKey {
        n1: stats.n1(),
        n2: stats.n2(),
        k: cfg.resolve_k(stats.n1(), stats.n2())?,
        m: cfg.m,
        kind: cfg.kind,
        p: stats.p(),
    };
    obtain_calibration(&key, cfg, args.big_k, &args.calibration, args.cache_dir.as_deref())
}

fn echo(out: &mut String, pairs: &[(&str, String)]) {
    for (k, v) in pairs {
        let _ = writeln!(out, "# {k}: {v}");
    }
}

fn report_table(out: &mut String, reports: &[TestReport]) {
    let _ = writeln!(
        out,
        "{:<12} {:>12} {:>12} {:>10} {:>7}",
        "method", "statistic", "threshold", "p-value", "reject"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<12} {:>12.6} {:>12} {:>10.4} {:>7}",
            r.method,
            r.statistic,
            r.threshold.map_or("-".to_string(), |t| format!("{t:.6}")),
            r.pvalue,
            if r.reject { "yes" } else { "no" }
        );
    }
    for r in reports {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
}

/// Parses arguments and runs the command.
pub fn run_from<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    run(&cli)
}

/// Runs a parsed command, returning everything it prints.
pub fn run(cli: &Cli) -> Result<String> {
    if cli.threads > 0 {
        // Only the first request in a process can size the global pool.
        if rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .is_err()
        {
            log::debug!("global thread pool already initialized");
        }
    }
    let seed = cli.seed;
    let mut out = String::new();
    match &cli.command {
        Command::ChooseK { n1, n2, alpha } => {
            let k = choose_k(*n1, *n2, *alpha)?;
            let curve = critical_value_curve(*n1, *n2, *alpha)?;
            echo(&mut out, &[("command", "choose-k".into()), ("n1", n1.to_string()), ("n2", n2.to_string()), ("alpha", alpha.to_string())]);
            let _ = writeln!(out, "k = {k}");
            let _ = writeln!(out, "{:>5} {:>14}", "k", "c_alpha");
            for (kk, c) in &curve {
                let mark = if *kk == k { " *" } else { "" };
                let _ = writeln!(out, "{kk:>5} {c:>14.8}{mark}");
            }
            let curve_json: Vec<_> = curve.iter().map(|(k, c)| json!([k, c])).collect();
            let _ = writeln!(out, "{}", json!({"k": k, "n1": n1, "n2": n2, "alpha": alpha, "curve": curve_json}));
        }
        Command::Calibrate { n1, n2, p, k, m, big_k, projection, alpha, out: path } => {
            let kinds = projection.kinds();
            if kinds.len() != 1 {
                return Err(Error::Config("calibrate takes one projection kind".into()));
            }
            let cfg = RapttConfig { m: *m, k: *k, kind: kinds[0], alpha: *alpha, seed };
            let resolved = cfg.resolve_k(*n1, *n2)?;
            echo(&mut out, &[
                ("command", "calibrate".into()),
                ("n1", n1.to_string()),
                ("n2", n2.to_string()),
                ("p", p.to_string()),
                ("k", resolved.to_string()),
                ("m", m.to_string()),
                ("K", big_k.to_string()),
                ("projection", kinds[0].to_string()),
                ("seed", seed.to_string()),
            ]);
            let cal = calibrate_null(*n1, *n2, *p, &cfg, *big_k)?;
            cal.save(path)?;
            let u = cal.cutoff(*alpha)?;
            let _ = writeln!(out, "wrote {} draws to {}", cal.big_k, path.display());
            let _ = writeln!(out, "u_alpha({alpha}) = {u:.6}");
            let _ = writeln!(out, "{}", json!({"out": path, "K": cal.big_k, "k": resolved, "u_alpha": u, "alpha": alpha}));
        }
        Command::Test { data, raptt, projection } => {
            let kinds = projection.kinds();
            if kinds.len() != 1 {
                return Err(Error::Config("test takes one projection kind; use compare for both".into()));
            }
            let (x, y) = data.load()?;
            let stats = summarize(&x, &y)?;
            let cfg = raptt.config(kinds[0], seed);
            let (cal, source) = calibration_for(&stats, raptt, &cfg)?;
            echo(&mut out, &[
                ("command", "test".into()),
                ("data", data.describe()),
                ("n1", stats.n1().to_string()),
                ("n2", stats.n2().to_string()),
                ("p", stats.p().to_string()),
                ("k", cfg.resolve_k(stats.n1(), stats.n2())?.to_string()),
                ("m", cfg.m.to_string()),
                ("projection", cfg.kind.to_string()),
                ("alpha", cfg.alpha.to_string()),
                ("seed", seed.to_string()),
                ("calibration", source),
            ]);
            let report = raptt_test_stats(&stats, &cfg, &cal)?;
            report_table(&mut out, &[report]);
        }
        Command::Compare { data, raptt, projection } => {
            let (x, y) = data.load()?;
            let stats = summarize(&x, &y)?;
            let mut reports = Vec::new();
            let mut sources = Vec::new();
            for kind in projection.kinds() {
                let cfg = raptt.config(kind, seed);
                let (cal, source) = calibration_for(&stats, raptt, &cfg)?;
                sources.push(format!("{kind}: {source}"));
                reports.push(raptt_test_stats(&stats, &cfg, &cal)?);
            }
            reports.push(bs_test(&stats)?.to_report("BS", raptt.alpha)?);
            reports.push(cq_test(&x, &y)?.to_report("CQ", raptt.alpha)?);
            reports.push(sd_test(&stats)?.to_report("SD", raptt.alpha)?);
            echo(&mut out, &[
                ("command", "compare".into()),
                ("data", data.describe()),
                ("n1", stats.n1().to_string()),
                ("n2", stats.n2().to_string()),
                ("p", stats.p().to_string()),
                ("m", raptt.m.to_string()),
                ("k", raptt.k.to_string()),
                ("alpha", raptt.alpha.to_string()),
                ("seed", seed.to_string()),
                ("calibration", sources.join("; ")),
            ]);
            report_table(&mut out, &reports);
        }
        Command::Power { k, n1, n2, alpha, delta, series } => {
            let inputs = PowerInputs { delta_r: *delta, k: *k, n1: *n1, n2: *n2, alpha: *alpha };
            let power = power_given_delta_via(&inputs, PowerRoute::NoncentralF)?;
            echo(&mut out, &[
                ("command", "power".into()),
                ("k", k.to_string()),
                ("n1", n1.to_string()),
                ("n2", n2.to_string()),
                ("alpha", alpha.to_string()),
                ("delta_r", delta.to_string()),
            ]);
            let _ = writeln!(out, "power = {power:.12}");
            let mut rec = json!({"power": power, "k": k, "n1": n1, "n2": n2, "alpha": alpha, "delta_r": delta});
            if *series {
                let alt = power_given_delta_via(&inputs, PowerRoute::PoissonBeta)?;
                let _ = writeln!(out, "series power = {alt:.12} (difference {:.3e})", (alt - power).abs());
                rec["series_power"] = json!(alt);
            }
            let _ = writeln!(out, "{rec}");
        }
        Command::Simulate { config, out: csv_path } => {
            let text = std::fs::read_to_string(config)?;
            let mut cfg = ExperimentConfig::parse(&text)?;
            if !text.lines().any(|l| l.split('#').next().unwrap_or("").trim_start().starts_with("seed")) {
                cfg.seed = seed;
            }
            for line in cfg.to_string().lines() {
                let _ = writeln!(out, "# {line}");
            }
            let (text_table, csv) = match cfg.experiment {
                ExperimentKind::Power => {
                    let t = run_power_experiment(&cfg)?;
                    (t.render_text(), t.to_csv()?)
                }
                ExperimentKind::KRatio => {
                    let t = k_ratio_experiment(&cfg)?;
                    (t.render_text(), t.to_csv()?)
                }
            };
            out.push_str(&text_table);
            match csv_path {
                Some(p) => {
                    std::fs::write(p, &csv)?;
                    let _ = writeln!(out, "{}", json!({"csv": p}));
                }
                None => out.push_str(&csv),
            }
        }
        Command::Subsample { data, raptt, fraction, repeats } => {
            let (x, y) = data.load()?;
            out.push_str(&subsample(&x, &y, raptt, *fraction, *repeats, seed, &data.describe())?);
        }
        Command::FetchColon { dir } => {
            let _ = writeln!(out, "source: {}", ingest::COLON_URL);
            let _ = writeln!(
                out,
                "download the expression matrix ({}) and tissue labels ({}) into one directory",
                ingest::COLON_MATRIX_FILE,
                ingest::COLON_TISSUES_FILE
            );
            if let Some(dir) = dir {
                let (t, n) = load_colon(dir)?;
                let _ = writeln!(out, "ok: {} tumor and {} normal samples, {} genes", t.n(), n.n(), t.p());
                let _ = writeln!(out, "{}", json!({"dir": dir, "tumor": t.n(), "normal": n.n(), "genes": t.p()}));
            }
        }
    }
    Ok(out)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median p-values over random subsamples holding `fraction` of each group.
pub fn subsample(
    x: &DataMatrix,
    y: &DataMatrix,
    raptt: &RapttArgs,
    fraction: f64,
    repeats: usize,
    seed: u64,
    source: &str,
) -> Result<String> {
    if !(fraction > 0.0 && fraction <= 1.0) || repeats == 0 {
        return Err(Error::Config("need 0 < fraction <= 1 and repeats >= 1".into()));
    }
    let size = |n: usize| ((fraction * n as f64).round() as usize).max(2);
    let (s1, s2) = (size(x.n()), size(y.n()));
    let p = x.p();
    let mut names: Vec<String> = ProjectionKind::ALL.iter().map(|k| format!("raptt-{k}")).collect();
    names.extend(["BS", "CQ", "SD"].map(String::from));
    let mut cals = Vec::new();
    let mut sources = Vec::new();
    for kind in ProjectionKind::ALL {
        let cfg = raptt.config(kind, seed);
        let key = CalibrationKey { n1: s1, n2: s2, k: cfg.resolve_k(s1, s2)?, m: cfg.m, kind, p };
        let (cal, src) = obtain_calibration(&key, &cfg, raptt.big_k, &raptt.calibration, raptt.cache_dir.as_deref())?;
        sources.push(format!("{kind}: {src}"));
        cals.push((cfg, key.k, cal));
    }
    let root = StreamKey::new(seed).child("subsample", 0);
    let mut pvals = vec![Vec::with_capacity(repeats); names.len()];
    for r in 0..repeats {
        let key = root.child("repeat", r as u64);
        let pick = |d: &DataMatrix, s: usize, label: &str| {
            let mut rows = random_permutation(d.n(), &key.child(label, 0));
            rows.truncate(s);
            rows.sort_unstable();
            d.select_rows(&rows)
        };
        let (xs, ys) = (pick(x, s1, "x")?, pick(y, s2, "y")?);
        let stats = summarize(&xs, &ys)?;
        for (j, (cfg, k, cal)) in cals.iter().enumerate() {
            let theta = average_pvalue_keyed(&stats, *k, cfg.m, cfg.kind, &key.child("raptt", j as u64), true)?;
            pvals[j].push(cal.empirical_pvalue(theta));
        }
        let j = cals.len();
        pvals[j].push(bs_test(&stats)?.pvalue);
        pvals[j + 1].push(cq_test(&xs, &ys).map_or(f64::NAN, |r| r.pvalue));
        pvals[j + 2].push(sd_test(&stats)?.pvalue);
    }
    let mut out = String::new();
    echo(&mut out, &[
        ("command", "subsample".into()),
        ("data", source.to_string()),
        ("fraction", fraction.to_string()),
        ("repeats", repeats.to_string()),
        ("subsample sizes", format!("{s1}, {s2}")),
        ("p", p.to_string()),
        ("m", raptt.m.to_string()),
        ("K", raptt.big_k.to_string()),
        ("seed", seed.to_string()),
        ("calibration", sources.join("; ")),
    ]);
    let _ = writeln!(out, "{:<12} {:>14}", "method", "median p-value");
    let mut rec = serde_json::Map::new();
    for (name, v) in names.iter().zip(pvals.iter_mut()) {
        let finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
        let med = if finite.is_empty() { f64::NAN } else { median(&mut finite.clone()) };
        let _ = writeln!(out, "{name:<12} {med:>14.4}");
        rec.insert(name.clone(), json!(med));
    }
    let _ = writeln!(out, "{}", json!({"median_pvalues": rec, "fraction": fraction, "repeats": repeats}));
    Ok(out)
}
