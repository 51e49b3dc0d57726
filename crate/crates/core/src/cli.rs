//! Command-line front end: each subcommand is one pipeline stage writing
//! into a pinned output layout.
//!
//! ```text
//! <out>/profiles/  profile.txt, profile.json
//! <out>/data/      dataset.csv, schema.json, injected.csv, injected_audit.json
//! <out>/models/    <kind>.json, <kind>.prep.json, <kind>.tree.txt
//! <out>/rules/     <kind>.json, <kind>.txt
//! <out>/reports/   comparison.{txt,csv,json}, config.json, run_meta.json
//! ```

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::classifiers::{train, ModelKind, TrainedModel};
use crate::config::{DatasetSource, RunConfig};
use crate::dataset::{load_delimited, profile, render_profile, save_delimited, Dataset, LoadOptions};
use crate::error::{Error, ErrorCategory, Result};
use crate::evaluate::{compare, split_indices, SortKey};
use crate::faultgen::{inject_faults, InjectionMode, InjectionSpec};
use crate::preprocess::{fit_pipeline, FittedTransform, OutlierKind, OutlierMethod};
use crate::rules::{apply_rules, extract_rules, simplify, RuleSet};

#[derive(Debug, Parser)]
#[command(name = "faultbench", version, about = "Fault-detection benchmarking for tabular part data")]
pub struct Cli {
    /// JSON run config; the built-in reference config when absent.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Run seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long = "out", value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured reference dataset and its schema.
    Generate {
        #[arg(long)]
        n: Option<usize>,
        /// Defective fraction.
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Per-field min/max, outlier and null counts.
    Profile {
        #[arg(long = "in", value_name = "PATH")]
        input: Option<PathBuf>,
        /// iqr or zscore.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        k: Option<f64>,
    },
    /// Replace a fraction of records with defective ones.
    Inject {
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// rule_region or field_distortion.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long = "in", value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(long = "out", value_name = "PATH")]
        output: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        audit: Option<PathBuf>,
    },
    /// Train models on the whole dataset and save them.
    Train {
        /// Comma-separated kinds; the config's list when absent.
        #[arg(long = "algorithms", value_delimiter = ',')]
        algorithms: Vec<ModelKind>,
        #[arg(long = "in", value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Extract rules from a saved tree model.
    Rules {
        #[arg(long)]
        kind: Option<ModelKind>,
        #[arg(long = "in", value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Evaluate every configured algorithm and write the comparison report.
    Compare {
        #[arg(long = "algorithms", value_delimiter = ',')]
        algorithms: Vec<ModelKind>,
        /// input, accuracy, time or auc.
        #[arg(long)]
        sort: Option<SortKey>,
        #[arg(long = "in", value_name = "PATH")]
        input: Option<PathBuf>,
    },
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err.category() {
        ErrorCategory::Config => 1,
        ErrorCategory::Data => 2,
        ErrorCategory::Training => 3,
    }
}

/// Output locations under an output directory.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn profiles(&self) -> PathBuf {
        self.root.join("profiles")
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn rules(&self) -> PathBuf {
        self.root.join("rules")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

fn save_csv(ds: &Dataset, path: &Path, options: &LoadOptions) -> Result<()> {
    ensure_parent(path)?;
    save_delimited(ds, path, options)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_mode(s: &str) -> Result<InjectionMode> {
    match s {
        "rule_region" => Ok(InjectionMode::RuleRegion),
        "field_distortion" => Ok(InjectionMode::FieldDistortion),
        _ => Err(Error::invalid(format!("unknown injection mode \"{s}\""))),
    }
}

fn parse_method(s: &str) -> Result<OutlierKind> {
    match s {
        "iqr" => Ok(OutlierKind::Iqr),
        "zscore" => Ok(OutlierKind::Zscore),
        _ => Err(Error::invalid(format!("unknown outlier method \"{s}\""))),
    }
}

/// Effective config after applying global flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::reference(),
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

struct Pipeline {
    config: RunConfig,
    layout: Layout,
}

impl Pipeline {
    fn base(&self, input: Option<&Path>) -> Result<Dataset> {
        match input {
            Some(path) => load_delimited(path, &self.config.schema()?, &self.config.load_options()),
            None => self.config.base_dataset(),
        }
    }

    /// Base dataset with the configured injection applied.
    fn dataset(&self, input: Option<&Path>) -> Result<Dataset> {
        let base = self.base(input)?;
        match &self.config.injection {
            Some(spec) => Ok(inject_faults(&base, spec)?.0),
            None => Ok(base),
        }
    }

    fn generate(&self, n: Option<usize>, fraction: Option<f64>) -> Result<()> {
        let DatasetSource::Generate {
            n: cn,
            defect_fraction: cf,
        } = self.config.dataset
        else {
            return Err(Error::Config {
                key: "dataset.source".into(),
                message: "generate needs a generator source".into(),
            });
        };
        let mut config = self.config.clone();
        config.dataset = DatasetSource::Generate {
            n: n.unwrap_or(cn),
            defect_fraction: fraction.unwrap_or(cf),
        };
        let ds = config.base_dataset()?;
        let data = self.layout.data();
        save_csv(&ds, &data.join("dataset.csv"), &LoadOptions::default())?;
        write(&data.join("schema.json"), &ds.schema().to_json())?;
        let [d, nrm] = ds.class_counts();
        println!("generated {} records ({d} defective, {nrm} normal)", ds.len());
        Ok(())
    }

    fn profile(&self, input: Option<&Path>, method: Option<&str>, k: Option<f64>) -> Result<()> {
        let configured = self.config.preprocess.outlier.method;
        let kind = method.map(parse_method).transpose()?.unwrap_or(configured.kind);
        let k = k.unwrap_or(if kind == configured.kind {
            configured.k
        } else {
            match kind {
                OutlierKind::Iqr => 1.5,
                OutlierKind::Zscore => 3.0,
            }
        });
        let method = OutlierMethod::new(kind, k)?;
        let ds = self.base(input)?;
        let profiles = profile(&ds, &method)?;
        let table = render_profile(&profiles);
        let dir = self.layout.profiles();
        write(&dir.join("profile.txt"), &table)?;
        write(
            &dir.join("profile.json"),
            &serde_json::to_string_pretty(&profiles).expect("profile serializes"),
        )?;
        print!("{table}");
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn inject(
        &self,
        fraction: Option<f64>,
        seed: Option<u64>,
        mode: Option<&str>,
        scale: Option<f64>,
        input: Option<&Path>,
        output: Option<&Path>,
        audit: Option<&Path>,
    ) -> Result<()> {
        let mut spec = self
            .config
            .injection
            .clone()
            .unwrap_or_else(|| InjectionSpec::new(0.10, self.config.seed, InjectionMode::RuleRegion));
        if let Some(f) = fraction {
            spec.fraction = f;
        }
        if let Some(s) = seed {
            spec.seed = s;
        }
        if let Some(m) = mode {
            spec.mode = parse_mode(m)?;
        }
        if let Some(s) = scale {
            spec.distortion_scale = s;
        }
        spec.validate()?;
        let ds = self.base(input)?;
        let (out, indices) = inject_faults(&ds, &spec)?;
        let data = self.layout.data();
        let output = output.map_or_else(|| data.join("injected.csv"), Path::to_path_buf);
        let audit = audit.map_or_else(|| data.join("injected_audit.json"), Path::to_path_buf);
        save_csv(&out, &output, &self.config.load_options())?;
        #[derive(Serialize)]
        struct Audit<'a> {
            spec: &'a InjectionSpec,
            count: usize,
            indices: &'a [usize],
        }
        let record = Audit {
            spec: &spec,
            count: indices.len(),
            indices: &indices,
        };
        write(&audit, &serde_json::to_string_pretty(&record).expect("audit serializes"))?;
        println!("injected {} of {} records", indices.len(), out.len());
        Ok(())
    }

    fn kinds(&self, flag: &[ModelKind]) -> Result<Vec<ModelKind>> {
        let kinds = if flag.is_empty() {
            self.config.algorithms.clone()
        } else {
            flag.to_vec()
        };
        if kinds.is_empty() {
            return Err(Error::Config {
                key: "algorithms".into(),
                message: "at least one algorithm is required".into(),
            });
        }
        Ok(kinds)
    }

    fn train(&self, flag: &[ModelKind], input: Option<&Path>) -> Result<()> {
        let kinds = self.kinds(flag)?;
        let ds = self.dataset(input)?;
        let dir = self.layout.models();
        for kind in kinds {
            let (prepared, fitted) = fit_pipeline(&ds, &self.config.preprocess, kind.representation())?;
            let model = train(kind, &prepared, &self.config.train)?;
            write(&dir.join(format!("{kind}.json")), &model.to_json())?;
            write(
                &dir.join(format!("{kind}.prep.json")),
                &serde_json::to_string_pretty(&fitted).expect("transform serializes"),
            )?;
            if let Some(text) = model.render_tree() {
                write(&dir.join(format!("{kind}.tree.txt")), &text)?;
            }
            println!(
                "{kind}: {} of {} fields used",
                model.used_fields.len(),
                model.fields.len()
            );
        }
        Ok(())
    }

    fn write_rules(&self, kind: ModelKind, rules: &RuleSet, note: Option<String>) -> Result<()> {
        let dir = self.layout.rules();
        write(&dir.join(format!("{kind}.json")), &rules.to_json())?;
        let mut prose = rules.to_prose();
        if let Some(note) = note {
            prose.push_str(&note);
            prose.push('\n');
        }
        write(&dir.join(format!("{kind}.txt")), &prose)?;
        print!("{prose}");
        Ok(())
    }

    fn rules(&self, kind: Option<ModelKind>, input: Option<&Path>) -> Result<()> {
        let kind = kind.unwrap_or(self.config.rules_from);
        if !kind.is_tree() {
            return Err(Error::invalid(format!("{kind} is not a tree kind")));
        }
        let dir = self.layout.models();
        let model = TrainedModel::from_json(&read(&dir.join(format!("{kind}.json")))?)?;
        let fitted: FittedTransform = serde_json::from_str(&read(&dir.join(format!("{kind}.prep.json")))?)?;
        let ds = fitted.apply(&self.dataset(input)?)?;
        let rules = simplify(&extract_rules(&model, &ds)?);
        self.write_rules(kind, &rules, None)
    }

    fn compare(&self, flag: &[ModelKind], sort: Option<SortKey>, input: Option<&Path>) -> Result<()> {
        let kinds = self.kinds(flag)?;
        let ds = self.dataset(input)?;
        let c = &self.config;
        let report = compare(&kinds, &ds, &c.preprocess, &c.train, &c.split)?.sorted(sort.unwrap_or(c.sort));

        // Rules from the configured tree, trained on the first training split.
        let (train_idx, test_idx) = split_indices(&ds, &c.split)?.swap_remove(0);
        let (prepared, fitted) = fit_pipeline(&ds.subset(&train_idx), &c.preprocess, c.rules_from.representation())?;
        let model = train(c.rules_from, &prepared, &c.train)?;
        let rules = simplify(&extract_rules(&model, &prepared)?);
        let test = fitted.apply(&ds.subset(&test_idx))?;
        let mut correct = 0;
        for r in test.records() {
            if Some(apply_rules(&rules, r)?.0) == r.label {
                correct += 1;
            }
        }
        let note = format!(
            "Held-out accuracy: {:.2}% on {} records",
            100.0 * correct as f64 / test.len() as f64,
            test.len()
        );

        let dir = self.layout.reports();
        let text = report.render_text();
        write(&dir.join("comparison.txt"), &text)?;
        write(&dir.join("comparison.csv"), &report.render_delimited())?;
        write(&dir.join("comparison.json"), &report.render_json())?;
        let mut effective = c.clone();
        effective.out_dir = PathBuf::from(".");
        write(&dir.join("config.json"), &effective.to_json())?;
        #[derive(Serialize)]
        struct Timing {
            kind: ModelKind,
            train_seconds: f64,
        }
        #[derive(Serialize)]
        struct RunMeta {
            timestamp: u64,
            version: &'static str,
            timings: Vec<Timing>,
        }
        let meta = RunMeta {
            timestamp: report.timestamp,
            version: env!("CARGO_PKG_VERSION"),
            timings: report
                .results
                .iter()
                .map(|r| Timing {
                    kind: r.kind,
                    train_seconds: r.train_seconds,
                })
                .collect(),
        };
        write(&dir.join("run_meta.json"), &serde_json::to_string_pretty(&meta).expect("meta serializes"))?;
        print!("{text}");
        self.write_rules(c.rules_from, &rules, Some(note))
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let config = resolve_config(&cli)?;
    let layout = Layout::new(config.out_dir.clone());
    let p = Pipeline { config, layout };
    match &cli.command {
        Command::Generate { n, fraction } => p.generate(*n, *fraction),
        Command::Profile { input, method, k } => p.profile(input.as_deref(), method.as_deref(), *k),
        Command::Inject {
            fraction,
            seed,
            mode,
            scale,
            input,
            output,
            audit,
        } => p.inject(
            *fraction,
            seed.or(cli.seed),
            mode.as_deref(),
            *scale,
            input.as_deref(),
            output.as_deref(),
            audit.as_deref(),
        ),
        Command::Train { algorithms, input } => p.train(algorithms, input.as_deref()),
        Command::Rules { kind, input } => p.rules(*kind, input.as_deref()),
        Command::Compare {
            algorithms,
            sort,
            input,
        } => p.compare(algorithms, *sort, input.as_deref()),
    }
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
