//! Command-line front end: one subcommand per pipeline stage.
//!
//! Inputs default to the file names earlier stages write into `--out-dir`, so a
//! full run is `synth pairs`, `fit-subspace`, `synth labeled`, `fit-policy`,
//! `project --selective`. Every run also writes `<command>.config.json` holding
//! all effective settings.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use crate::calibration::{calibrate_direction, Direction, PairPooling};
use crate::constraints::{audit_captioning, audit_generation, audit_generation_report, ConstraintBudget};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::io::{
    read_embeddings, read_policy, read_projector, read_subspace, write_atomic, write_embeddings,
    write_policy, write_projector, write_scores, write_subspace, Dtype,
};
use crate::metrics::{
    read_caption_flags, read_generation_counts, semantic_distance, skew, BiasReport, DistanceKind, SkewUnit,
};
use crate::prompts::{expand, validate_catalog, write_expansion, Mode, Split, TemplateCatalog};
use crate::reference::ReferenceConfig;
use crate::selection::{fit_policy, selective_project, LambdaSide, SkewNormalParams};
use crate::subspace::{difference_matrix, fit_subspace, orthogonal_projector, BiasSubspace, CounterfactualPairSet, ProjectorKind};
use crate::synthgen::{
    generate_attribute_set, generate_counterfactual_pairs, generate_labeled_set, SynthConfig,
};

#[derive(Debug, Parser, Serialize)]
#[command(name = "biopro", version, about = "Training-free embedding debiasing toolkit")]
pub struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// On-disk precision for embedding files.
    #[arg(long, global = true, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,

    /// Directory for outputs and default inputs.
    #[arg(long, global = true, env = "BIOPRO_OUT_DIR")]
    pub out_dir: Option<PathBuf>,

    #[arg(long, global = true, default_value = "warn")]
    #[serde(serialize_with = "display")]
    pub log_level: log::LevelFilter,

    #[command(subcommand)]
    pub command: Command,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl From<Precision> for Dtype {
    fn from(p: Precision) -> Self {
        match p {
            Precision::F32 => Dtype::F32,
            Precision::F64 => Dtype::F64,
        }
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate synthetic embeddings with planted bias directions.
    Synth(SynthArgs),
    /// Fit the bias subspace from counterfactual pairs and build its orthogonal projector.
    FitSubspace(FitSubspaceArgs),
    /// Apply the orthogonal projector, globally or selectively.
    Project(ProjectArgs),
    /// Fit score distributions and solve for the selection threshold.
    FitPolicy(FitPolicyArgs),
    /// Build a calibrated projector in closed form.
    Calibrate(CalibrateArgs),
    /// Compute fairness metrics and optionally audit them against a budget.
    Eval(EvalArgs),
    /// Expand prompt templates into paired prompts.
    ExpandPrompts(ExpandArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::FitSubspace(_) => "fit-subspace",
            Command::Project(_) => "project",
            Command::FitPolicy(_) => "fit-policy",
            Command::Calibrate(_) => "calibrate",
            Command::Eval(_) => "eval",
            Command::ExpandPrompts(_) => "expand-prompts",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Pairs,
    Labeled,
    Attribute,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 64)]
    pub d: usize,
    /// Number of pairs (pairs) or samples (attribute).
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub n_neutral: usize,
    #[arg(long, default_value_t = 500)]
    pub n_explicit: usize,
    /// Gap per planted direction, strictly decreasing.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    pub gap: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub gap_jitter: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 1.0)]
    pub base_scale: f64,
    /// Neutral score distribution as location,scale,shape.
    #[arg(long, value_delimiter = ',', num_args = 3, default_value = "0.2,1.2,3")]
    pub neutral_dist: Vec<f64>,
    /// Explicit score distribution as location,scale,shape.
    #[arg(long, value_delimiter = ',', num_args = 3, default_value = "6.5,2,2")]
    pub explicit_dist: Vec<f64>,
    /// Attribute range lo,hi; the attribute varies along the first planted direction.
    #[arg(long, value_delimiter = ',', num_args = 2, default_value = "0,1")]
    pub attr_range: Vec<f64>,
    /// Output file stem (defaults to the kind).
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitSubspaceArgs {
    /// Side-a embeddings [default: <out-dir>/pairs_a.emb].
    #[arg(long)]
    pub a: Option<PathBuf>,
    /// Side-b embeddings [default: <out-dir>/pairs_b.emb].
    #[arg(long)]
    pub b: Option<PathBuf>,
    #[arg(short = 'k', long, default_value_t = 2)]
    pub k: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ProjectArgs {
    /// Embeddings to project [default: <out-dir>/labeled.emb].
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// [default: <out-dir>/subspace.sub]
    #[arg(long)]
    pub subspace: Option<PathBuf>,
    /// Project only columns whose score is below the policy threshold.
    #[arg(long)]
    pub selective: bool,
    /// [default: <out-dir>/policy.pol]
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Output stem.
    #[arg(long, default_value = "projected")]
    pub name: String,
}

#[derive(Debug, Args, Serialize)]
pub struct FitPolicyArgs {
    /// Labeled embeddings [default: <out-dir>/labeled.emb].
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// [default: <out-dir>/subspace.sub]
    #[arg(long)]
    pub subspace: Option<PathBuf>,
    #[arg(long, default_value_t = 3.0)]
    pub lambda_c: f64,
    #[arg(long, default_value = "weights_explicit")]
    pub lambda_side: String,
    #[arg(long, default_value_t = 0)]
    pub score_dim: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    /// Group-a embeddings [default: <out-dir>/pairs_a.emb].
    #[arg(long)]
    pub a: Option<PathBuf>,
    /// Group-b embeddings [default: <out-dir>/pairs_b.emb].
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Orthogonal projector [default: <out-dir>/projector.prj].
    #[arg(long)]
    pub projector: Option<PathBuf>,
    /// Calibration weight; alternatively use --category with the reference table.
    #[arg(long)]
    pub lambda_g: Option<f64>,
    /// Look up λ_g for this category in the reference config.
    #[arg(long)]
    pub category: Option<String>,
    /// Reference column to read λ_g from.
    #[arg(long, default_value = "LLaVA-1.5")]
    pub model: String,
    /// a2b pulls group a toward group b; b2a the reverse.
    #[arg(long)]
    pub direction: String,
    /// Use group centroids instead of every pair.
    #[arg(long)]
    pub pool_pairs: bool,
    /// Also apply the calibrated projector to these embeddings.
    #[arg(long)]
    pub apply: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Caption flag file (captioning metrics).
    #[arg(long)]
    pub flags: Option<PathBuf>,
    /// Base-model BR_e, for CBR.
    #[arg(long)]
    pub br_e_base: Option<f64>,
    /// Generation count file (generation metrics).
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// Categories for skew over group a stereotypes [default: reference male list].
    #[arg(long, value_delimiter = ',')]
    pub stereotypes_a: Option<Vec<String>>,
    /// Categories for skew over group b stereotypes [default: reference female list].
    #[arg(long, value_delimiter = ',')]
    pub stereotypes_b: Option<Vec<String>>,
    /// Report skew as a fraction instead of percent.
    #[arg(long)]
    pub skew_fraction: bool,
    /// Embeddings before debiasing, for the semantic distance.
    #[arg(long, requires = "debiased")]
    pub original: Option<PathBuf>,
    #[arg(long, requires = "original")]
    pub debiased: Option<PathBuf>,
    #[arg(long, default_value = "frobenius_rel")]
    pub distance: String,
    /// Constraint budget file; `default` uses the built-in budget.
    #[arg(long)]
    pub budget: Option<String>,
    /// Exit with a validation error when the audit fails.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ExpandArgs {
    #[arg(long)]
    pub mode: String,
    #[arg(long)]
    pub split: String,
    /// Catalog file [default: shipped catalog].
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new().filter_level(cli.log_level).try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            e.class().exit_code()
        }
    }
}

struct Ctx<'a> {
    out: PathBuf,
    cli: &'a Cli,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn input(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.path(default))
    }

    fn dtype(&self) -> Dtype {
        self.cli.precision.into()
    }

    fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.path(name);
        write_atomic(&p, text.as_bytes())?;
        Ok(p)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let out = cli
        .out_dir
        .clone()
        .ok_or_else(|| Error::InvalidArgument("--out-dir is required (or set BIOPRO_OUT_DIR)".into()))?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let ctx = Ctx { out, cli };
    let echo = serde_json::to_string_pretty(cli).expect("config serializes");
    ctx.write_text(&format!("{}.config.json", cli.command.name()), &(echo + "\n"))?;

    match &cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::FitSubspace(a) => cmd_fit_subspace(&ctx, a),
        Command::Project(a) => cmd_project(&ctx, a),
        Command::FitPolicy(a) => cmd_fit_policy(&ctx, a),
        Command::Calibrate(a) => cmd_calibrate(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::ExpandPrompts(a) => cmd_expand(&ctx, a),
    }
}

fn synth_config(ctx: &Ctx<'_>, a: &SynthArgs) -> Result<SynthConfig> {
    let mut cfg = SynthConfig::planted(a.d, &a.gap, ctx.cli.seed)?;
    cfg.n_pairs = a.n;
    cfg.n_attribute = a.n;
    cfg.n_neutral = a.n_neutral;
    cfg.n_explicit = a.n_explicit;
    cfg.gap_jitter = a.gap_jitter;
    cfg.noise_sigma = a.noise;
    cfg.base_scale = a.base_scale;
    cfg.neutral_scores = SkewNormalParams::new(a.neutral_dist[0], a.neutral_dist[1], a.neutral_dist[2])?;
    cfg.explicit_scores = SkewNormalParams::new(a.explicit_dist[0], a.explicit_dist[1], a.explicit_dist[2])?;
    let dir = cfg.bias_dirs[0].direction.clone();
    cfg = cfg.with_attribute(dir, (a.attr_range[0], a.attr_range[1]));
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_synth(ctx: &Ctx<'_>, a: &SynthArgs) -> Result<()> {
    let cfg = synth_config(ctx, a)?;
    let planted = BiasSubspace::from_basis(cfg.directions(), cfg.bias_dirs.iter().map(|b| b.gap).collect())?;
    write_subspace(&planted, &ctx.path("planted.sub"))?;
    let dtype = ctx.dtype();
    match a.kind {
        SynthKind::Pairs => {
            let stem = a.name.as_deref().unwrap_or("pairs");
            let s = generate_counterfactual_pairs(&cfg)?;
            write_embeddings(s.data.side_a(), &ctx.path(&format!("{stem}_a.emb")), dtype)?;
            write_embeddings(s.data.side_b(), &ctx.path(&format!("{stem}_b.emb")), dtype)?;
            s.log.write(&ctx.path(&format!("{stem}.log.tsv")))?;
            info!("wrote {} pairs of dimension {}", s.data.len(), s.data.dim());
        }
        SynthKind::Labeled => {
            let stem = a.name.as_deref().unwrap_or("labeled");
            let s = generate_labeled_set(&cfg)?;
            write_embeddings(&s.data, &ctx.path(&format!("{stem}.emb")), dtype)?;
            s.log.write(&ctx.path(&format!("{stem}.log.tsv")))?;
        }
        SynthKind::Attribute => {
            let stem = a.name.as_deref().unwrap_or("attribute");
            let s = generate_attribute_set(&cfg)?;
            write_embeddings(&s.data, &ctx.path(&format!("{stem}.emb")), dtype)?;
            s.log.write(&ctx.path(&format!("{stem}.log.tsv")))?;
        }
    }
    Ok(())
}

fn cmd_fit_subspace(ctx: &Ctx<'_>, a: &FitSubspaceArgs) -> Result<()> {
    let side_a = read_embeddings(&ctx.input(&a.a, "pairs_a.emb"))?;
    let side_b = read_embeddings(&ctx.input(&a.b, "pairs_b.emb"))?;
    let pairs = CounterfactualPairSet::new(side_a, side_b)?;
    let s = fit_subspace(&difference_matrix(&pairs), a.k)?;
    if !s.degenerate().is_empty() {
        warn!("singular values at indices {:?} are numerically zero", s.degenerate());
    }
    let p = orthogonal_projector(&s)?;
    write_subspace(&s, &ctx.path("subspace.sub"))?;
    write_projector(&p, &ctx.path("projector.prj"))?;

    let mut report = format!(
        "d={}\nk={}\npairs={}\nchecksum={:016x}\northonormality_residual={:e}\n",
        s.dim(),
        s.k(),
        pairs.len(),
        s.checksum(),
        s.orthonormality_residual()
    );
    for (i, sv) in s.singular_values().iter().enumerate() {
        report.push_str(&format!("sigma_{}={sv}\n", i + 1));
    }
    let degenerate: Vec<String> = s.degenerate().iter().map(usize::to_string).collect();
    report.push_str(&format!("degenerate={}\n", degenerate.join(",")));
    ctx.write_text("subspace.txt", &report)?;
    print!("{report}");
    Ok(())
}

fn cmd_project(ctx: &Ctx<'_>, a: &ProjectArgs) -> Result<()> {
    let h = read_embeddings(&ctx.input(&a.input, "labeled.emb"))?;
    let s = read_subspace(&ctx.input(&a.subspace, "subspace.sub"))?;
    let p = orthogonal_projector(&s)?;
    let out = ctx.path(&format!("{}.emb", a.name));
    if a.selective {
        let policy = read_policy(&ctx.input(&a.policy, "policy.pol"))?;
        let r = selective_project(&h, &p, &policy, &s)?;
        write_embeddings(&r.embeddings, &out, ctx.dtype())?;
        let mask: String = r.projected.iter().map(|m| if *m { "1\n" } else { "0\n" }).collect();
        ctx.write_text(&format!("{}.mask.txt", a.name), &mask)?;
        write_scores(&r.scores, &ctx.path(&format!("{}.scores.txt", a.name)))?;
        println!("projected={}\nretained={}\ndelta_c={}", r.projected_count(), h.len() - r.projected_count(), policy.delta_c);
    } else {
        write_embeddings(&p.apply(&h)?, &out, ctx.dtype())?;
        println!("projected={}", h.len());
    }
    Ok(())
}

fn cmd_fit_policy(ctx: &Ctx<'_>, a: &FitPolicyArgs) -> Result<()> {
    let h = read_embeddings(&ctx.input(&a.input, "labeled.emb"))?;
    let s = read_subspace(&ctx.input(&a.subspace, "subspace.sub"))?;
    let side: LambdaSide = a.lambda_side.parse()?;
    let policy = fit_policy(&h, &s, a.score_dim, a.lambda_c, side)?;
    write_policy(&policy, &ctx.path("policy.pol"))?;
    let scores = crate::selection::projection_scores(&h, &s, a.score_dim)?;
    write_scores(&scores, &ctx.path("policy.scores.txt"))?;
    let report = format!(
        "delta_c={}\nlambda_c={}\nlambda_side={}\nscore_dim={}\nmethod={}\nneutral={},{},{}\nexplicit={},{},{}\nstationarity_residual={:e}\n",
        policy.delta_c,
        policy.lambda_c,
        policy.lambda_side,
        policy.score_dim,
        policy.method.as_str(),
        policy.neutral.location,
        policy.neutral.scale,
        policy.neutral.shape,
        policy.explicit.location,
        policy.explicit.scale,
        policy.explicit.shape,
        policy.stationarity_residual()?
    );
    ctx.write_text("policy.txt", &report)?;
    print!("{report}");
    Ok(())
}

fn cmd_calibrate(ctx: &Ctx<'_>, a: &CalibrateArgs) -> Result<()> {
    let direction: Direction = a.direction.parse()?;
    let lambda_g = match (a.lambda_g, &a.category) {
        (Some(l), None) => l,
        (None, Some(cat)) => {
            let r = ReferenceConfig::shipped();
            let m = r.model_index(&a.model)?;
            r.lambda_g(cat, m)
                .ok_or_else(|| Error::InvalidArgument(format!("no reference λ_g for category {cat:?}")))?
        }
        (Some(_), Some(_)) => return Err(Error::InvalidArgument("give either --lambda-g or --category, not both".into())),
        (None, None) => return Err(Error::InvalidArgument("one of --lambda-g or --category is required".into())),
    };
    let p_perp = read_projector(&ctx.input(&a.projector, "projector.prj"))?;
    if p_perp.kind() != ProjectorKind::Orthogonal {
        return Err(Error::InvalidArgument("--projector must be an orthogonal projector".into()));
    }
    let z_a = read_embeddings(&ctx.input(&a.a, "pairs_a.emb"))?;
    let z_b = read_embeddings(&ctx.input(&a.b, "pairs_b.emb"))?;
    let pooling = if a.pool_pairs { PairPooling::Centroid } else { PairPooling::Raw };
    let c = calibrate_direction(&p_perp, &z_a, &z_b, lambda_g, direction, pooling)?;
    write_projector(&c.projector, &ctx.path(&format!("calibrated_{direction}.prj")))?;
    let mut report = c.report.to_kv();
    report.push_str(&format!("direction={direction}\npooling={}\n", if a.pool_pairs { "centroid" } else { "raw" }));
    if let Some(input) = &a.apply {
        let h = read_embeddings(input)?;
        let moved = crate::calibration::apply_calibrated(&c.projector, &h)?;
        write_embeddings(&moved, &ctx.path(&format!("calibrated_{direction}.emb")), ctx.dtype())?;
    }
    ctx.write_text("calibration.txt", &report)?;
    print!("{report}");
    Ok(())
}

fn load_embedding_pair(a: &Path, b: &Path) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    Ok((read_embeddings(a)?, read_embeddings(b)?))
}

fn cmd_eval(ctx: &Ctx<'_>, a: &EvalArgs) -> Result<()> {
    if a.flags.is_none() && a.counts.is_none() && a.original.is_none() {
        return Err(Error::InvalidArgument("eval needs --flags, --counts or --original/--debiased".into()));
    }
    let kind: DistanceKind = a.distance.parse()?;
    let budget = match a.budget.as_deref() {
        None => None,
        Some("default") => Some(ConstraintBudget {
            distance_kind: kind,
            ..ConstraintBudget::default()
        }),
        Some(path) => Some(ConstraintBudget::load(Path::new(path))?),
    };
    let distance_kind = budget.map(|b| b.distance_kind).unwrap_or(kind);

    let mut report = BiasReport::default();
    if let Some(f) = &a.flags {
        let r = BiasReport::from_captions(&read_caption_flags(f)?, a.br_e_base)?;
        report.br_n = r.br_n;
        report.br_e = r.br_e;
        report.br_e_base = r.br_e_base;
        report.cbr = r.cbr;
    }
    let counts = a.counts.as_deref().map(read_generation_counts).transpose()?;
    if let Some(c) = &counts {
        let reference = ReferenceConfig::shipped();
        let list = |given: &Option<Vec<String>>, fallback: &[String]| -> Vec<String> {
            given.clone().unwrap_or_else(|| fallback.to_vec())
        };
        let sa = list(&a.stereotypes_a, &reference.stereotypes.male);
        let sb = list(&a.stereotypes_b, &reference.stereotypes.female);
        let sa: Vec<&str> = sa.iter().map(String::as_str).collect();
        let sb: Vec<&str> = sb.iter().map(String::as_str).collect();
        let r = BiasReport::from_generation(c, &sa, &sb)?;
        report.skew = r.skew;
        report.skew_a = r.skew_a;
        report.skew_b = r.skew_b;
        report.mr = r.mr;
        let unit = if a.skew_fraction { SkewUnit::Fraction } else { SkewUnit::Percent };
        let per: String = skew(c, unit)?
            .per_category
            .iter()
            .map(|(k, v)| format!("{k}\t{v}\n"))
            .collect();
        ctx.write_text("skew_per_category.tsv", &format!("category\tskew\n{per}"))?;
    }
    if let (Some(o), Some(d)) = (&a.original, &a.debiased) {
        let (h, ht) = load_embedding_pair(o, d)?;
        report.semantic_distance = Some(semantic_distance(&h, &ht, distance_kind)?);
    }
    report.check()?;
    let kv = report.to_kv();
    ctx.write_text("report.txt", &kv)?;
    ctx.write_text("report.json", &(report.to_json_line() + "\n"))?;
    print!("{kv}");

    if let Some(budget) = budget {
        let dist = report.semantic_distance.unwrap_or(0.0);
        if report.semantic_distance.is_none() {
            warn!("no embeddings given; semantic constraint audited at distance 0");
        }
        let outcome = if a.flags.is_some() {
            audit_captioning(&report, dist, &budget)?
        } else if let Some(c) = &counts {
            audit_generation(c, dist, &budget)?
        } else {
            audit_generation_report(&report, dist, &budget)?
        };
        ctx.write_text("audit.txt", &outcome.to_text())?;
        ctx.write_text("audit.json", &(outcome.to_json_line() + "\n"))?;
        print!("{}", outcome.to_text());
        if a.strict && !outcome.verdict {
            return Err(Error::Validation("constraint audit failed".into()));
        }
    }
    Ok(())
}

fn cmd_expand(ctx: &Ctx<'_>, a: &ExpandArgs) -> Result<()> {
    let mode: Mode = a.mode.parse()?;
    let split: Split = a.split.parse()?;
    let catalog = match &a.catalog {
        Some(p) => TemplateCatalog::load(p)?,
        None => TemplateCatalog::shipped(),
    };
    let violations = validate_catalog(&catalog);
    for v in &violations {
        warn!("catalog: {v}");
    }
    let text: String = violations.iter().map(|v| format!("{v}\n")).collect();
    ctx.write_text("catalog_violations.txt", &text)?;
    let prompts = expand(&catalog, mode, split)?;
    write_expansion(&prompts, &ctx.path(&format!("prompts_{mode}_{split}.tsv")))?;
    println!("prompts={}\nviolations={}", prompts.len(), violations.len());
    Ok(())
}
