//! The `polarsec` command line.
//!
//! Exit status: 0 when every hard invariant holds, 1 when one fails, 2 for
//! usage errors, malformed experiment files, missing caches and IO errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use polarsec_core::metrics::{
    check_lemma_bounds, leakage_exact, residual_exact, BoundReport, EncoderLayer, MeanEstimate,
    Proportion, ZSummary,
};
use polarsec_core::sets::{build_sets_unchecked, difference, intersection, rate_report};
use polarsec_core::source::{identity_channel, product_channel};
use polarsec_core::{
    BroadcastChannel, ChainConfig, IndexSetFamily, JointSource, Method, MetricsError, ProfileSet, SessionMessages,
};

use crate::cache::{self, CacheKey, CachedFamily};
use crate::error::HarnessError;
use crate::parallel;
use crate::report::{num, positions, Table};
use crate::spec::{method_tag, parse_method, ExperimentSpec, Overrides};
use crate::transcript;

/// Two-sided 95% normal quantile for the Wilson intervals in `errors.csv`.
const WILSON_Z: f64 = 1.959963984540054;

#[derive(Debug, Parser)]
#[command(name = "polarsec", version, about = "Chained polar coding experiments for the broadcast channel with confidential messages")]
pub struct Cli {
    /// Experiment description (TOML).
    #[arg(long, global = true, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Output directory for CSV files, transcripts and the set-family cache.
    #[arg(long, global = true, value_name = "DIR", default_value = "polarsec-out")]
    pub out: PathBuf,
    /// Seed for every random stream (overrides the file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Comma-separated block lengths (overrides the file).
    #[arg(long, global = true, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Comma-separated block counts (overrides the file).
    #[arg(long, global = true, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Exponent β of the threshold δ_N = 2^(-N^β) (overrides the file).
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Monte-Carlo samples per profile.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Sessions per (N, k) in `run` and `roundtrip`.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Profile method: `exact` or `monte-carlo`.
    #[arg(long, global = true, value_parser = method_arg)]
    pub method: Option<Method>,
    #[command(subcommand)]
    pub command: Command,
}

fn method_arg(s: &str) -> Result<Method, String> {
    parse_method(s).ok_or_else(|| format!("unknown method `{s}` (exact, monte-carlo)"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Estimate the eight entropy profiles and write profiles.csv.
    Profile,
    /// Build and cache the index-set families; write sets.csv and sets_summary.csv.
    Sets,
    /// Rate sweep over N and k from cached families; write rates.csv.
    Rates,
    /// End-to-end sessions from cached families; write errors.csv, leakage.csv and residual.csv.
    Run,
    /// Exact small-N oracle checks; write bounds.csv and residual_exact.csv.
    Verify,
    /// Noiseless self-test with transcript files; write roundtrip.csv.
    Roundtrip,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("polarsec: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), HarnessError> {
    let path = cli.spec.as_ref().ok_or_else(|| HarnessError::Usage("--spec <FILE> is required".into()))?;
    let overrides = Overrides {
        n: cli.n.clone(),
        k: cli.k.clone(),
        beta: cli.beta,
        method: cli.method,
        samples: cli.samples,
        trials: cli.trials,
        seed: cli.seed,
    };
    let spec = ExperimentSpec::load(path, &overrides)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(HarnessError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| HarnessError::Usage(format!("thread pool: {e}")))?;
    let ctx = Ctx { out: &cli.out, hash: spec.hash(), spec: &spec };
    pool.install(|| match cli.command {
        Command::Profile => profile(&ctx),
        Command::Sets => sets(&ctx),
        Command::Rates => rates(&ctx),
        Command::Run => run_sessions(&ctx),
        Command::Verify => verify(&ctx),
        Command::Roundtrip => roundtrip(&ctx),
    })
}

struct Ctx<'a> {
    out: &'a Path,
    hash: String,
    spec: &'a ExperimentSpec,
}

impl Ctx<'_> {
    fn write(&self, t: &Table) -> Result<(), HarnessError> {
        let path = t.write(self.out, &self.hash, self.spec.seed)?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }

    fn family(&self, n: usize) -> Result<CachedFamily, HarnessError> {
        let s = self.spec;
        let (entry, hit) = cache::load_or_build(self.out, &s.source, n, s.beta, s.method, s.samples, s.seed)?;
        if !hit {
            eprintln!("built set family for N = {n}");
        }
        Ok(entry)
    }

    fn cached(&self, n: usize) -> Result<CachedFamily, HarnessError> {
        let s = self.spec;
        cache::load(self.out, &CacheKey::new(&s.source, n, s.beta, s.method, s.samples, s.seed))
    }
}

fn b(x: bool) -> String {
    x.to_string()
}

fn feasibility(f: &IndexSetFamily) -> String {
    match f.check_feasible() {
        Ok(()) => String::new(),
        Err(e) => e.to_string(),
    }
}

fn invariant_result(failures: usize) -> Result<(), HarnessError> {
    if failures == 0 {
        Ok(())
    } else {
        Err(HarnessError::Invariant(failures))
    }
}

fn profile(ctx: &Ctx) -> Result<(), HarnessError> {
    let mut t = Table::new("profiles", &["n", "layer", "index", "entropy", "std_error", "samples", "method"]);
    for &n in &ctx.spec.n {
        let entry = ctx.family(n)?;
        for p in &entry.profiles.profiles {
            for j in 0..n {
                t.push(vec![
                    n.to_string(),
                    p.layer.tag().into(),
                    j.to_string(),
                    num(p.entropies[j]),
                    num(p.std_errors[j]),
                    p.samples.to_string(),
                    method_tag(p.method).into(),
                ]);
            }
        }
    }
    ctx.write(&t)
}

fn named_sets(f: &IndexSetFamily) -> [(&'static str, &[usize]); 18] {
    [
        ("H_U", &f.h_u),
        ("V_U", &f.v_u),
        ("H_U|Y", &f.h_u_y),
        ("H_U|Z", &f.h_u_z),
        ("V_V|U", &f.v_v_u),
        ("V_V|UZ", &f.v_v_uz),
        ("H_V|UY", &f.h_v_uy),
        ("V_V|UY", &f.v_v_uy),
        ("M_UVZ", &f.m_uvz),
        ("V_X|V", &f.v_x_v),
        ("V_X|VZ", &f.v_x_vz),
        ("I_UY", &f.i_uy),
        ("I_UZ", &f.i_uz),
        ("A_UYZ", &f.a_uyz),
        ("B_V|UY", &f.b_v_uy),
        ("Psi_V|U", &f.psi_vu),
        ("Phi_V|U", &f.phi_vu),
        ("Phi_U", &f.phi_u),
    ]
}

fn sets(ctx: &Ctx) -> Result<(), HarnessError> {
    let mut t = Table::new("sets", &["n", "set", "size", "positions"]);
    let mut s = Table::new(
        "sets_summary",
        &["n", "beta", "delta", "method", "samples", "feasible", "infeasibility", "invariant_violations", "cache_file"],
    );
    let mut failures = 0;
    for &n in &ctx.spec.n {
        let entry = ctx.family(n)?;
        let f = &entry.family;
        for (name, set) in named_sets(f) {
            t.push(vec![n.to_string(), name.into(), set.len().to_string(), positions(set)]);
        }
        let bad = f.invariant_violations();
        failures += bad.len();
        let reason = feasibility(f);
        s.push(vec![
            n.to_string(),
            num(f.beta),
            num(f.delta),
            entry.key.method.clone(),
            entry.key.samples.to_string(),
            b(reason.is_empty()),
            reason,
            bad.join(" "),
            entry.key.file_name(),
        ]);
    }
    ctx.write(&t)?;
    ctx.write(&s)?;
    invariant_result(failures)
}

/// Recomputes the session counts of a k-block run from the set sizes and
/// lists the quantities that disagree with `rate_report`.
pub fn rate_accounting_violations(f: &IndexSetFamily, k: usize) -> Vec<&'static str> {
    let r = rate_report(f, k);
    let c = &r.counts;
    let n = f.n_len;
    let both = intersection(&f.i_uy, &f.i_uz).len();
    let denom = (k * n) as f64;
    let mut bad = Vec::new();
    let mut check = |ok: bool, name| {
        if !ok {
            bad.push(name);
        }
    };
    check(c.common == (k - 1) * f.i_uy.len() + both, "common_count");
    check(c.secret == f.v_v_uz.len() + (k - 1) * difference(&f.v_v_uz, &f.b_v_uy).len(), "secret_count");
    check(c.private == k * f.m_uvz.len(), "private_count");
    check(
        c.randomization == f.v_x_v.len() + (k - 1) * difference(&f.v_x_v, &f.v_x_vz).len(),
        "randomization_count",
    );
    check(c.seed_psi == f.psi_vu.len() && c.seed_phi == k * f.phi_vu.len(), "seed_count");
    check(r.r_s == c.secret as f64 / denom, "secret_rate");
    check(r.r_m == f.m_uvz.len() as f64 / n as f64, "private_rate");
    check(r.seed_rate == r.seed_psi_term + r.seed_phi_term || (r.seed_rate - r.seed_psi_term - r.seed_phi_term).abs() < 1e-15, "seed_split");
    bad
}

fn rates(ctx: &Ctx) -> Result<(), HarnessError> {
    let corner = ctx.spec.source.theorem1_corner();
    let mut t = Table::new(
        "rates",
        &[
            "n",
            "k",
            "feasible",
            "r_o",
            "r_s",
            "r_m",
            "r_r",
            "common_codebook_rate",
            "secret_codebook_rate",
            "seed_rate",
            "seed_psi_term",
            "seed_phi_term",
            "public_rate",
            "target_r_o",
            "target_r_s",
            "target_r_m",
            "target_r_r",
            "accounting_violations",
        ],
    );
    let mut failures = 0;
    for &n in &ctx.spec.n {
        let entry = ctx.cached(n)?;
        let f = &entry.family;
        let feasible = f.check_feasible().is_ok();
        for &k in &ctx.spec.k {
            let r = rate_report(f, k);
            let bad = rate_accounting_violations(f, k);
            failures += bad.len();
            t.push(vec![
                n.to_string(),
                k.to_string(),
                b(feasible),
                num(r.r_o),
                num(r.r_s),
                num(r.r_m),
                num(r.r_r),
                num(r.common_codebook_rate),
                num(r.secret_codebook_rate),
                num(r.seed_rate),
                num(r.seed_psi_term),
                num(r.seed_phi_term),
                num(r.public_rate),
                num(corner.r_o),
                num(corner.r_s),
                num(corner.r_m),
                num(corner.r_r),
                bad.join(" "),
            ]);
        }
    }
    ctx.write(&t)?;
    invariant_result(failures)
}

fn run_sessions(ctx: &Ctx) -> Result<(), HarnessError> {
    let s = ctx.spec;
    let channel = BroadcastChannel::from_source(&s.source)?;
    let mut errors =
        Table::new("errors", &["n", "k", "seed", "trials", "statistic", "errors", "rate", "ci_low", "ci_high"]);
    let mut leakage = Table::new(
        "leakage",
        &["n", "k", "seed", "trials", "summary", "secret_bits", "plugin", "bias", "corrected", "per_coordinate"],
    );
    let mut residual = Table::new("residual", &["n", "k", "block", "layer", "mean", "std_error", "sessions"]);
    let mut failures = 0;
    // Load every family first so a missing cache fails before any work.
    let families: Vec<(usize, CachedFamily)> =
        s.n.iter().map(|&n| ctx.cached(n).map(|e| (n, e))).collect::<Result<_, _>>()?;
    for (n, entry) in families {
        if let Err(e) = entry.family.check_feasible() {
            eprintln!("skipping N = {n}: {e}");
            continue;
        }
        for &k in &s.k {
            let cfg = ChainConfig::new(s.source.clone(), entry.family.clone(), k)?;
            let stats = parallel::error_stats(&cfg, &channel, s.trials, s.seed)?;
            let rows: [(&str, &Proportion); 6] = [
                ("bob_common", &stats.bob_common),
                ("eve_common", &stats.eve_common),
                ("bob_secret", &stats.bob_secret),
                ("bob_secret_private", &stats.bob_secret_private),
                ("bob_flagged", &stats.bob_flagged),
                ("eve_flagged", &stats.eve_flagged),
            ];
            for (name, p) in rows {
                let (lo, hi) = p.wilson(WILSON_Z);
                errors.push(vec![
                    n.to_string(),
                    k.to_string(),
                    s.seed.to_string(),
                    p.trials.to_string(),
                    name.into(),
                    p.errors.to_string(),
                    num(p.rate()),
                    num(lo),
                    num(hi),
                ]);
            }
            let summary = ZSummary::for_config(&cfg);
            let est = parallel::leakage(&cfg, &channel, s.trials, summary, s.seed)?;
            let secret_bits: usize = (1..=k).map(|i| cfg.message_lengths(i).map(|l| l[1])).sum::<Result<_, _>>()?;
            if !(est.plugin >= 0.0 && est.corrected <= secret_bits as f64 + 1e-9) {
                failures += 1;
            }
            leakage.push(vec![
                n.to_string(),
                k.to_string(),
                s.seed.to_string(),
                est.trials.to_string(),
                match summary {
                    ZSummary::Full => "full",
                    ZSummary::Projection => "projection",
                }
                .into(),
                secret_bits.to_string(),
                num(est.plugin),
                num(est.bias),
                num(est.corrected),
                b(est.per_coordinate),
            ]);
            let samples = parallel::residual_samples(&cfg, s.trials, s.seed)?;
            for block in 1..=k {
                for layer in EncoderLayer::ALL {
                    let values: Vec<f64> = samples.iter().map(|v| v[block - 1][layer as usize]).collect();
                    let m = MeanEstimate::from_values(&values)?;
                    residual.push(vec![
                        n.to_string(),
                        k.to_string(),
                        block.to_string(),
                        layer.tag().into(),
                        num(m.mean),
                        num(m.std_error),
                        m.samples.to_string(),
                    ]);
                }
            }
        }
    }
    ctx.write(&errors)?;
    ctx.write(&leakage)?;
    ctx.write(&residual)?;
    invariant_result(failures)
}

fn verify(ctx: &Ctx) -> Result<(), HarnessError> {
    let s = ctx.spec;
    let channel = BroadcastChannel::from_source(&s.source)?;
    let mut bounds =
        Table::new("bounds", &["name", "block", "lhs", "rhs", "satisfied", "hard", "n", "k", "seed", "trials"]);
    let mut resid = Table::new("residual_exact", &["n", "k", "block", "layer", "residual"]);
    let mut failures = 0;
    let mut push = |t: &mut Table, r: &BoundReport, n: usize, k: usize| {
        if !r.passes() {
            failures += 1;
        }
        t.push(vec![
            r.name.clone(),
            r.block.to_string(),
            num(r.lhs),
            num(r.rhs),
            b(r.satisfied),
            b(r.hard),
            n.to_string(),
            k.to_string(),
            s.seed.to_string(),
            "0".into(),
        ]);
    };
    for &n in &s.n {
        let mut rng = parallel::stream(s.seed, "verify", n, 0, 0);
        let profiles = ProfileSet::estimate(&s.source, n, Method::Exact, 0, &mut rng)?;
        let family = build_sets_unchecked(&profiles, s.beta)?;
        if let Err(e) = family.check_feasible() {
            eprintln!("skipping N = {n}: {e}");
            continue;
        }
        for &k in &s.k {
            let cfg = ChainConfig::new(s.source.clone(), family.clone(), k)?;
            for r in check_lemma_bounds(&cfg)? {
                push(&mut bounds, &r, n, k);
            }
            match leakage_exact(&cfg, &channel) {
                Ok(rep) => {
                    for r in rep.bound_rows() {
                        push(&mut bounds, &r, n, k);
                    }
                }
                Err(e @ MetricsError::DomainTooLarge { .. }) => eprintln!("exact leakage skipped at N = {n}, k = {k}: {e}"),
                Err(e) => return Err(e.into()),
            }
            for block in 1..=k {
                for layer in EncoderLayer::ALL {
                    let v = residual_exact(&cfg, layer, block)?;
                    resid.push(vec![n.to_string(), k.to_string(), block.to_string(), layer.tag().into(), num(v)]);
                }
            }
        }
    }
    ctx.write(&bounds)?;
    ctx.write(&resid)?;
    invariant_result(failures)
}

/// The source with both receivers replaced by noiseless copies of `X`.
pub fn noiseless_variant(source: &JointSource) -> Result<JointSource, HarnessError> {
    let table = product_channel(&identity_channel(), 2, &identity_channel(), 2);
    source.with_channel(&table, 2, 2).map_err(|e| HarnessError::Usage(e.to_string()))
}

fn gather(bits: &[u8], pos: &[usize]) -> Vec<u8> {
    pos.iter().map(|&p| bits[p]).collect()
}

/// True when every position Bob decodes has zero conditional entropy, so
/// successive cancellation cannot err.
fn decoding_is_deterministic(profiles: &ProfileSet, f: &IndexSetFamily) -> bool {
    use polarsec_core::Layer;
    let zero_outside = |layer: Layer, frozen: &[usize]| {
        profiles.get(layer).is_ok_and(|p| {
            let all: Vec<usize> = (0..f.n_len).collect();
            difference(&all, frozen).iter().all(|&j| p.entropies[j] == 0.0)
        })
    };
    zero_outside(Layer::UGivenY, &f.h_u_y) && zero_outside(Layer::VGivenUY, &f.h_v_uy)
}

fn roundtrip(ctx: &Ctx) -> Result<(), HarnessError> {
    let s = ctx.spec;
    let source = noiseless_variant(&s.source)?;
    let channel = BroadcastChannel::from_source(&source)?;
    let mut t = Table::new(
        "roundtrip",
        &[
            "n",
            "k",
            "sessions",
            "placement_ok",
            "channel_ok",
            "transcript_ok",
            "deterministic",
            "bob_exact",
            "transcript_file",
        ],
    );
    let dir = ctx.out.join("transcripts");
    std::fs::create_dir_all(&dir)?;
    let mut failures = 0;
    for &n in &s.n {
        let (entry, _) = cache::load_or_build(ctx.out, &source, n, s.beta, s.method, s.samples, s.seed)?;
        let f = &entry.family;
        let deterministic = decoding_is_deterministic(&entry.profiles, f);
        let feasible = f.check_feasible();
        for &k in &s.k {
            // A single block never reads carried state, so it runs on any family.
            if let (Err(e), true) = (&feasible, k > 1) {
                eprintln!("skipping N = {n}, k = {k}: {e}");
                continue;
            }
            let cfg = ChainConfig::new_unchecked(source.clone(), f.clone(), k)?;
            let mut rng = parallel::stream(s.seed, "roundtrip", n, k, 0);
            let (mut placement, mut through, mut files, mut exact) = (0usize, 0usize, 0usize, 0usize);
            let mut first_file = String::new();
            for session in 0..s.trials {
                let msgs = SessionMessages::random(&cfg, &mut rng);
                let mut tr = cfg.encode_session(&msgs, &mut rng)?;
                cfg.transmit(&mut tr, &channel, &mut rng)?;
                let placed = (1..=k).all(|i| {
                    let blk = &tr.blocks[i - 1];
                    let (cp, sp) = (cfg.common_plan(i).expect("in range"), cfg.secret_plan(i).expect("in range"));
                    gather(&blk.a, &cp.message) == msgs.o[i - 1]
                        && gather(&blk.b, &sp.secret) == msgs.s[i - 1]
                        && gather(&blk.b, &sp.private) == msgs.m[i - 1]
                        && gather(&blk.t, &cfg.prefix_plan().random) == msgs.r[i - 1]
                        && blk.u == polarsec_core::polar::transform(&blk.a).expect("power of two")
                        && blk.x == polarsec_core::polar::transform(&blk.t).expect("power of two")
                });
                placement += usize::from(placed);
                let clean = tr.blocks.iter().all(|blk| {
                    let x: Vec<u32> = blk.x.iter().map(|&v| u32::from(v)).collect();
                    blk.y == x && blk.z == x
                });
                through += usize::from(clean);
                let bytes = transcript::encode(&tr, f);
                let same = transcript::decode(&bytes, Some(f)).is_ok_and(|(back, _)| transcript::same_content(&tr, &back));
                files += usize::from(same);
                if session == 0 {
                    let name = format!("roundtrip-n{n}-k{k}.bin");
                    std::fs::write(dir.join(&name), &bytes)?;
                    first_file = format!("transcripts/{name}");
                }
                let ys: Vec<Vec<u32>> = tr.blocks.iter().map(|blk| blk.y.clone()).collect();
                let est = cfg.bob_decode(&ys, &tr.public, &tr.seed)?;
                exact += usize::from(est.o == msgs.o && est.s == msgs.s && est.m == msgs.m);
            }
            let all = s.trials;
            failures += usize::from(placement != all) + usize::from(through != all) + usize::from(files != all);
            if deterministic && exact != all {
                failures += 1;
            }
            t.push(vec![
                n.to_string(),
                k.to_string(),
                all.to_string(),
                b(placement == all),
                b(through == all),
                b(files == all),
                b(deterministic),
                num(exact as f64 / all as f64),
                first_file,
            ]);
        }
    }
    ctx.write(&t)?;
    invariant_result(failures)
}
