//! Command-line front end.
//!
//! Settings for a subcommand are resolved from, in increasing precedence:
//! built-in defaults, the subcommand's table in the `--config` TOML file,
//! `--set key=value` overrides and explicit flags. The seed follows the
//! same order through the top-level `seed` key.
//!
//! Every file written starts with a header naming the tool version, the
//! seed and a hash of the resolved settings; CSV files carry it as a `#`
//! comment line and JSON files as a `_header` field. Existing files are
//! only replaced with `--force`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembler::{assemble, rate_sweep, sweep_grid, ApproximantConfig};
use crate::complexity::{
    empirical_shatter_probe, generalization_bound, pdim_upper, vc_recursion_bound, vcdim_upper_d, ArchSpec,
};
use crate::error::{Error, Result};
use crate::gadgets::{
    make_algebra_gadget, make_bump_chain, make_monomial, make_partition_network, make_point_fitter, make_polynomial,
    make_step, AlgebraGadget, MultiIndex, PartitionSpec, Shift, StepSpec,
};
use crate::metrics::{sobolev_norms, Difference, Domain, GridSpec};
use crate::net::{deserialize, serialize, validate_dsrn, Activation, Network};
use crate::pinn::{adam_train, evaluate_solution, PoissonProblem, ResNet, ResNetMode, ResNetSpec, TrainConfig};
use crate::target::TargetFunction;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DSRN_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "dsrn", version, about = "Deep super ReLU network experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: $DSRN_OUT_DIR or `out`].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML file with a top-level `seed` and one table per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a setting of the subcommand, e.g. `--set width=20`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Replace existing output files.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the algebra gadgets against closed forms at random points.
    Gadgets(GadgetsFlags),
    /// Build the global approximant of a target and measure its error.
    Approximate(ApproximateFlags),
    /// Error rates of the approximant over a sequence of budgets.
    RateSweep(RateSweepFlags),
    /// Sobolev norms of a target or of a target minus a stored network.
    Norm(NormFlags),
    /// Counting bounds for second-derivative classes.
    Complexity(ComplexityFlags),
    /// Train a residual network on the Poisson problem.
    Pinn(PinnFlags),
    /// Store or inspect networks.
    Net {
        #[command(subcommand)]
        action: NetAction,
    },
}

#[derive(Subcommand, Debug)]
enum NetAction {
    /// Write a gadget network as JSON.
    Serialize(SerializeFlags),
    /// Print the structure of a stored network.
    Inspect(InspectFlags),
}

macro_rules! settings {
    (
        $(#[$meta:meta])*
        $flags:ident => $settings:ident {
            $($(#[$fmeta:meta])* $field:ident : $ty:ty = $default:expr),* $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Args, Debug, Default, Serialize)]
        struct $flags {
            $(
                $(#[$fmeta])*
                #[arg(long)]
                #[serde(skip_serializing_if = "Option::is_none")]
                $field: Option<$ty>,
            )*
        }

        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $settings {
            $(pub $field: $ty,)*
        }

        impl Default for $settings {
            fn default() -> $settings {
                $settings { $($field: $default,)* }
            }
        }
    };
}

settings! {
    GadgetsFlags => GadgetsSettings {
        /// Random points per gadget.
        points: usize = 10_000,
    }
}

settings! {
    ApproximateFlags => ApproximateSettings {
        /// Target name, e.g. `sin_pi`, `poly(1,0,2)`.
        target: String = "sin_pi".into(),
        /// Input dimension.
        d: usize = 1,
        /// Smoothness order.
        n: usize = 4,
        /// Exponents for the error norms, e.g. `2,inf`.
        p: String = "2,inf".into(),
        /// Width and depth budget `NxL`.
        budget: String = String::new(),
        /// Cells per axis, used when no budget is given.
        k: usize = 8,
    }
}

settings! {
    RateSweepFlags => RateSweepSettings {
        /// Target name.
        target: String = "sin_pi".into(),
        /// Input dimension.
        d: usize = 1,
        /// Smoothness order.
        n: usize = 4,
        /// Exponents, e.g. `2,inf`.
        p: String = "2,inf".into(),
        /// Budgets `NxL` separated by commas.
        configs: String = String::new(),
        /// Cells per axis separated by commas, used when no budgets are given.
        ks: String = "4,8,16,32".into(),
    }
}

settings! {
    NormFlags => NormSettings {
        /// Target name.
        target: String = "sin_pi".into(),
        /// Input dimension.
        d: usize = 1,
        /// Sobolev order.
        order: usize = 2,
        /// Exponents, e.g. `2,inf`.
        p: String = "2,inf".into(),
        /// Samples per unit length and axis.
        per_unit: usize = 256,
        /// Lower edge of the cube.
        lo: f64 = 0.0,
        /// Upper edge of the cube.
        hi: f64 = 1.0,
        /// Stored network subtracted from the target.
        net: String = String::new(),
    }
}

settings! {
    ComplexityFlags => ComplexitySettings {
        /// Widths separated by commas.
        widths: String = "2,4,8,16".into(),
        /// Depths separated by commas.
        depths: String = "2,4,8,16".into(),
        /// Constant of the squared-ReLU depth allowance.
        c: f64 = 1.0,
        /// Input dimension.
        d: usize = 1,
        /// Sample sizes for the generalization bound.
        samples: String = "100,400,1600".into(),
        /// Constant of the generalization bound.
        c5: f64 = 1.0,
        /// Parameter draws of the shattering probe; 0 skips it.
        probe_draws: usize = 0,
        /// Points of the shattering probe.
        probe_points: usize = 12,
    }
}

settings! {
    PinnFlags => PinnSettings {
        /// `dsrn`, `all_relu2` or `all_relu`.
        mode: String = "dsrn".into(),
        /// Hidden width.
        width: usize = 40,
        /// Residual blocks.
        blocks: usize = 6,
        /// Trailing squared-ReLU blocks in `dsrn` mode.
        squared_blocks: usize = 2,
        /// Adam iterations.
        iterations: usize = 5_000,
        /// Adam learning rate.
        lr: f64 = 1e-3,
        /// Boundary penalty weight.
        beta: f64 = 100.0,
        /// Interior collocation points.
        collocation: usize = 256,
        /// Iterations between loss records.
        log_every: usize = 100,
        /// Intervals of the evaluation grid.
        grid: usize = 1000,
    }
}

settings! {
    SerializeFlags => SerializeSettings {
        /// `square`, `product`, `monomial`, `step`, `fitter`, `bump` or `partition`.
        gadget: String = "product".into(),
        /// Cells per axis for `step`, `bump` and `partition`.
        k: usize = 4,
        /// Exponents of the monomial, e.g. `2,1`.
        alpha: String = "2,1".into(),
    }
}

settings! {
    InspectFlags => InspectSettings {
        /// Stored network.
        path: String = String::new(),
        /// Constant used for the DSRN check.
        c: f64 = crate::assembler::DSRN_C,
    }
}

/// Resolved settings and output location of one invocation.
struct Context {
    seed: u64,
    out: PathBuf,
    force: bool,
    header: String,
    hash: String,
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies file, `--set` and flag layers and returns the settings with the
/// seed.
fn resolve<S: DeserializeOwned + Serialize>(
    common: &Common,
    section: &str,
    flags: &impl Serialize,
) -> Result<(S, u64)> {
    let mut file = toml::Table::new();
    if let Some(path) = &common.config {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        file = text
            .parse::<toml::Table>()
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    }
    let mut seed = match file.remove("seed") {
        Some(toml::Value::Integer(s)) if s >= 0 => s as u64,
        Some(other) => {
            return Err(Error::Config(format!(
                "seed must be a nonnegative integer, got {other}"
            )))
        }
        None => 0,
    };
    let mut table = match file.remove(section) {
        Some(toml::Value::Table(t)) => t,
        Some(_) => return Err(Error::Config(format!("[{section}] must be a table"))),
        None => toml::Table::new(),
    };
    for item in &common.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {item:?}")))?;
        let key = k.trim().replace('-', "_");
        if key == "seed" {
            seed = v
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad seed {v:?}: {e}")))?;
        } else {
            table.insert(key, parse_value(v.trim()));
        }
    }
    let explicit = toml::Table::try_from(flags).map_err(|e| Error::Internal(e.to_string()))?;
    table.extend(explicit);
    if let Some(s) = common.seed {
        seed = s;
    }
    let settings = toml::Value::Table(table)
        .try_into::<S>()
        .map_err(|e| Error::Config(format!("[{section}]: {}", e.message())))?;
    Ok((settings, seed))
}

fn context<S: Serialize>(common: &Common, command: &str, settings: &S, seed: u64) -> Result<Context> {
    let canonical = serde_json::json!({ "command": command, "seed": seed, "settings": settings });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    let hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    let out = common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Context {
        seed,
        out,
        force: common.force,
        header: format!("# dsrn {} seed={seed} config={hash}", env!("CARGO_PKG_VERSION")),
        hash,
    })
}

impl Context {
    /// Fails before any work if an output would be overwritten.
    fn claim(&self, names: &[&str]) -> Result<()> {
        if self.force {
            return Ok(());
        }
        for name in names {
            let path = self.out.join(name);
            if path.exists() {
                return Err(Error::Config(format!(
                    "{} exists; pass --force to replace it",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    fn write(&self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        std::fs::write(&path, contents)?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn write_csv(&self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut s = String::new();
        writeln!(s, "{}", self.header).expect("string write");
        writeln!(s, "{}", columns.join(",")).expect("string write");
        for r in rows {
            writeln!(s, "{}", r.join(",")).expect("string write");
        }
        self.write(name, s.as_bytes())
    }

    fn write_json(&self, name: &str, payload: &impl Serialize) -> Result<PathBuf> {
        let header = serde_json::json!({
            "tool": "dsrn",
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "config": self.hash,
        });
        let body = serde_json::to_value(payload).map_err(|e| Error::Internal(e.to_string()))?;
        let mut map = serde_json::Map::new();
        map.insert("_header".into(), header);
        match body {
            serde_json::Value::Object(o) => map.extend(o),
            other => {
                map.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(map))
            .map_err(|e| Error::Internal(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x}")
    }
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad {what} {t:?}: {e}")))
        })
        .collect()
}

fn parse_budget(s: &str) -> Result<(usize, usize)> {
    let (n, l) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Config(format!("budget {s:?} is not of the form NxL")))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|e| Error::Config(format!("bad budget {s:?}: {e}")))
    };
    Ok((parse(n)?, parse(l)?))
}

fn gadgets(ctx: &Context, s: &GadgetsSettings) -> Result<()> {
    ctx.claim(&["gadgets.csv"])?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    type Oracle = Box<dyn Fn(&[f64]) -> f64>;
    let cases: Vec<(&str, usize, Network, Oracle)> = vec![
        (
            "square",
            1,
            make_algebra_gadget(AlgebraGadget::Square)?,
            Box::new(|x| x[0] * x[0]),
        ),
        (
            "product",
            2,
            make_algebra_gadget(AlgebraGadget::Product)?,
            Box::new(|x| x[0] * x[1]),
        ),
        (
            "monomial_x^3",
            1,
            make_monomial(&MultiIndex(vec![3]), 1)?,
            Box::new(|x| x[0].powi(3)),
        ),
        (
            "monomial_x^2y",
            2,
            make_monomial(&MultiIndex(vec![2, 1]), 2)?,
            Box::new(|x| x[0] * x[0] * x[1]),
        ),
        (
            "polynomial_1d",
            1,
            make_polynomial(
                &[
                    (1.0, MultiIndex(vec![0])),
                    (-2.0, MultiIndex(vec![1])),
                    (0.5, MultiIndex(vec![3])),
                ],
                1,
            )?,
            Box::new(|x| 1.0 - 2.0 * x[0] + 0.5 * x[0].powi(3)),
        ),
        (
            "polynomial_2d",
            2,
            make_polynomial(
                &[
                    (1.0, MultiIndex(vec![1, 1])),
                    (3.0, MultiIndex(vec![0, 2])),
                    (-1.0, MultiIndex(vec![0, 0])),
                ],
                2,
            )?,
            Box::new(|x| x[0] * x[1] + 3.0 * x[1] * x[1] - 1.0),
        ),
    ];
    let mut rows = Vec::new();
    for (name, d, net, oracle) in &cases {
        let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
        for _ in 0..s.points {
            let x: Vec<f64> = (0..*d).map(|_| rng.random_range(-2.0..=2.0)).collect();
            let got = net.evaluate_scalar(&x)?;
            let want = oracle(&x);
            max_abs = max_abs.max((got - want).abs());
            max_rel = max_rel.max((got - want).abs() / want.abs().max(1.0));
        }
        rows.push(vec![
            name.to_string(),
            d.to_string(),
            s.points.to_string(),
            num(max_abs),
            num(max_rel),
            net.width().to_string(),
            net.depth().to_string(),
        ]);
    }
    ctx.write_csv(
        "gadgets.csv",
        &["gadget", "d", "points", "max_abs_err", "max_rel_err", "width", "depth"],
        &rows,
    )?;
    Ok(())
}

fn approximate(ctx: &Context, s: &ApproximateSettings) -> Result<()> {
    ctx.claim(&["approximate.json", "approximant.json"])?;
    let f = TargetFunction::parse(&s.target, s.d)?;
    let ps: Vec<f64> = parse_list(&s.p, "exponent")?;
    let cfg = if s.budget.is_empty() {
        ApproximantConfig::with_cells(s.k, s.n, ps.first().copied().unwrap_or(f64::INFINITY), s.d)?
    } else {
        let (nb, lb) = parse_budget(&s.budget)?;
        ApproximantConfig::from_budget(nb, lb, s.n, ps.first().copied().unwrap_or(f64::INFINITY), s.d)?
    };
    let a = assemble(&f, &cfg)?;
    let grid = sweep_grid(cfg.k, cfg.d, ctx.seed);
    let norms = sobolev_norms(&Difference(&f, &a.gamma), 2, &ps, &Domain::unit_cube(cfg.d), &grid)?;
    #[derive(Serialize)]
    struct Out<'a> {
        target: &'a str,
        config: &'a ApproximantConfig,
        report: &'a crate::assembler::BudgetReport,
        errors: &'a [crate::metrics::NormReport],
    }
    ctx.write_json(
        "approximate.json",
        &Out {
            target: &f.name,
            config: &cfg,
            report: &a.report,
            errors: &norms,
        },
    )?;
    ctx.write("approximant.json", &serialize(&a.gamma))?;
    for r in &norms {
        println!(
            "K = {}, p = {}: L {:.3e}, W1 {:.3e}, W2 {:.3e}",
            cfg.k,
            num(r.p),
            r.norm_of_order(0),
            r.norm_of_order(1),
            r.norm_of_order(2)
        );
    }
    Ok(())
}

fn rate_sweep_cmd(ctx: &Context, s: &RateSweepSettings) -> Result<()> {
    ctx.claim(&["rate_sweep.csv", "rate_slopes.json"])?;
    let f = TargetFunction::parse(&s.target, s.d)?;
    let ps: Vec<f64> = parse_list(&s.p, "exponent")?;
    let p0 = ps.first().copied().unwrap_or(f64::INFINITY);
    let configs = if s.configs.trim().is_empty() {
        parse_list::<usize>(&s.ks, "cell count")?
            .into_iter()
            .map(|k| ApproximantConfig::with_cells(k, s.n, p0, s.d))
            .collect::<Result<Vec<_>>>()?
    } else {
        s.configs
            .split(',')
            .map(|c| {
                let (nb, lb) = parse_budget(c)?;
                ApproximantConfig::from_budget(nb, lb, s.n, p0, s.d)
            })
            .collect::<Result<Vec<_>>>()?
    };
    let (rows, slopes) = rate_sweep(&f, &configs, &ps, ctx.seed)?;
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                opt(r.budget.map(|b| b.0)),
                opt(r.budget.map(|b| b.1)),
                r.k.to_string(),
                num(r.p),
                num(r.err_l),
                num(r.err_w1),
                num(r.err_w2),
                r.width_realized.to_string(),
                r.depth_realized.to_string(),
                opt(r.width_budget),
                opt(r.depth_budget),
                opt(r.over_budget),
                r.kink_hits.to_string(),
                num(r.discrepancy),
            ]
        })
        .collect();
    ctx.write_csv(
        "rate_sweep.csv",
        &[
            "n_budget",
            "l_budget",
            "k",
            "p",
            "err_l",
            "err_w1",
            "err_w2",
            "width",
            "depth",
            "width_budget",
            "depth_budget",
            "over_budget",
            "kink_hits",
            "discrepancy",
        ],
        &csv,
    )?;
    #[derive(Serialize)]
    struct Slope {
        p: String,
        slope_l: f64,
        slope_w1: f64,
        slope_w2: f64,
    }
    let out: Vec<Slope> = slopes
        .iter()
        .map(|s| Slope {
            p: num(s.p),
            slope_l: s.slope_l,
            slope_w1: s.slope_w1,
            slope_w2: s.slope_w2,
        })
        .collect();
    for s in &out {
        println!(
            "p = {}: slopes L {:.3}, W1 {:.3}, W2 {:.3}",
            s.p, s.slope_l, s.slope_w1, s.slope_w2
        );
    }
    ctx.write_json(
        "rate_slopes.json",
        &serde_json::json!({ "target": f.name, "slopes": out }),
    )?;
    Ok(())
}

fn norm(ctx: &Context, s: &NormSettings) -> Result<()> {
    ctx.claim(&["norm.json"])?;
    let f = TargetFunction::parse(&s.target, s.d)?;
    let ps: Vec<f64> = parse_list(&s.p, "exponent")?;
    let domain = Domain::cube(s.d, s.lo, s.hi);
    let grid = GridSpec::new(s.per_unit, ctx.seed);
    let reports = if s.net.is_empty() {
        sobolev_norms(&f, s.order, &ps, &domain, &grid)?
    } else {
        let net = deserialize(&std::fs::read(&s.net)?)?;
        if net.input_dim() != s.d {
            return Err(Error::Dimension(format!(
                "network takes {} inputs, target {}",
                net.input_dim(),
                s.d
            )));
        }
        sobolev_norms(&Difference(&f, &net), s.order, &ps, &domain, &grid)?
    };
    for r in &reports {
        println!("p = {}: norm {:.6e}, seminorm {:.6e}", num(r.p), r.norm, r.seminorm);
    }
    ctx.write_json(
        "norm.json",
        &serde_json::json!({ "target": f.name, "reports": reports }),
    )?;
    Ok(())
}

fn complexity(ctx: &Context, s: &ComplexitySettings) -> Result<()> {
    let mut files = vec!["complexity.csv", "generalization.csv"];
    if s.probe_draws > 0 {
        files.push("complexity_probe.json");
    }
    ctx.claim(&files)?;
    let widths: Vec<usize> = parse_list(&s.widths, "width")?;
    let depths: Vec<usize> = parse_list(&s.depths, "depth")?;
    let samples: Vec<usize> = parse_list(&s.samples, "sample size")?;
    let mut rows = Vec::new();
    let mut gen = Vec::new();
    for &n in &widths {
        for &l in &depths {
            let vc = vcdim_upper_d(n, l, s.c, s.d)?;
            let pd = pdim_upper(n, l, s.c, s.d)?;
            rows.push(vec![
                n.to_string(),
                l.to_string(),
                num(s.c),
                s.d.to_string(),
                vc.u.to_string(),
                num(vc.bound),
                num(vc.normalized),
                num(pd.bound),
            ]);
            for &m in &samples {
                gen.push(vec![
                    n.to_string(),
                    l.to_string(),
                    m.to_string(),
                    num(generalization_bound(n as f64, l as f64, m as f64, s.c5)),
                ]);
            }
        }
    }
    ctx.write_csv(
        "complexity.csv",
        &["n", "l", "c", "d", "u", "vcdim_bound", "normalized", "pdim_bound"],
        &rows,
    )?;
    ctx.write_csv("generalization.csv", &["n", "l", "m", "bound"], &gen)?;
    if s.probe_draws > 0 {
        let arch = ArchSpec::new(1, vec![2], vec![Activation::ReluSquared])?;
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let mut points: Vec<Vec<f64>> = (0..s.probe_points).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        points.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let probe = empirical_shatter_probe(&arch, &points, (0, 0), s.probe_draws, ctx.seed)?;
        let bound = vc_recursion_bound(&arch, s.c, points.len() as f64)?;
        println!(
            "probe: {} patterns over {} draws, shattered {}, bound {:.3e}",
            probe.distinct_patterns,
            probe.draws,
            probe.shattered,
            bound.bound.value().unwrap_or(f64::INFINITY)
        );
        ctx.write_json(
            "complexity_probe.json",
            &serde_json::json!({ "arch": arch, "points": points, "probe": probe, "bound": bound }),
        )?;
    }
    Ok(())
}

fn pinn(ctx: &Context, s: &PinnSettings) -> Result<()> {
    ctx.claim(&[
        "pinn_loss.csv",
        "pinn_solution.csv",
        "pinn_summary.json",
        "pinn_model.json",
    ])?;
    let mode: ResNetMode = s.mode.parse()?;
    let spec = ResNetSpec {
        blocks: s.blocks,
        layers_per_block: 2,
        width: s.width,
        mode,
        squared_blocks: s.squared_blocks,
    };
    let problem = PoissonProblem::default();
    let cfg = TrainConfig {
        adam: crate::optim::AdamConfig {
            lr: s.lr,
            ..Default::default()
        },
        iterations: s.iterations,
        collocation: s.collocation,
        beta: s.beta,
        seed: ctx.seed,
        log_every: s.log_every,
    };
    let model = ResNet::init(spec, ctx.seed)?;
    let res = adam_train(&model, &problem, &cfg)?;
    let rep = evaluate_solution(&res.model, &problem, s.grid)?;
    let loss_rows: Vec<Vec<String>> = res
        .history
        .iter()
        .map(|(it, l)| vec![it.to_string(), num(l.total), num(l.residual), num(l.boundary)])
        .collect();
    ctx.write_csv(
        "pinn_loss.csv",
        &["iteration", "loss", "residual", "boundary"],
        &loss_rows,
    )?;
    let sol_rows: Vec<Vec<String>> = rep.plot.iter().map(|r| r.iter().map(|v| num(*v)).collect()).collect();
    ctx.write_csv("pinn_solution.csv", &["x", "u", "u_exact", "du", "du_exact"], &sol_rows)?;
    ctx.write_json(
        "pinn_summary.json",
        &serde_json::json!({
            "settings": s,
            "initial_loss": res.initial_loss(),
            "final_loss": res.final_loss(),
            "max_err": rep.max_err,
            "l2_err": rep.l2_err,
            "max_deriv_err": rep.max_deriv_err,
            "l2_deriv_err": rep.l2_deriv_err,
        }),
    )?;
    ctx.write("pinn_model.json", &serialize(&res.model.to_network()?))?;
    println!(
        "loss {:.3e} -> {:.3e}; max |u - u*| {:.3e}, max |u' - u*'| {:.3e}",
        res.initial_loss(),
        res.final_loss(),
        rep.max_err,
        rep.max_deriv_err
    );
    Ok(())
}

fn net_serialize(ctx: &Context, s: &SerializeSettings) -> Result<()> {
    let name = format!("net_{}.json", s.gadget);
    ctx.claim(&[&name])?;
    let net = match s.gadget.as_str() {
        "square" => make_algebra_gadget(AlgebraGadget::Square)?,
        "product" => make_algebra_gadget(AlgebraGadget::Product)?,
        "monomial" => {
            let alpha = MultiIndex(parse_list(&s.alpha, "exponent")?);
            let d = alpha.dim();
            make_monomial(&alpha, d)?
        }
        "step" => make_step(&StepSpec::new(s.k, 1.0 / (4.0 * s.k as f64)))?,
        "fitter" => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            let xs: Vec<f64> = (0..s.k).map(|_| rng.random_range(0.0..=1.0)).collect();
            make_point_fitter(&xs)?
        }
        "bump" => make_bump_chain(s.k, Shift::S1)?,
        "partition" => make_partition_network(&PartitionSpec { k: s.k, m: vec![1] })?,
        other => return Err(Error::Config(format!("unknown gadget {other:?}"))),
    };
    ctx.write(&name, &serialize(&net))?;
    Ok(())
}

/// Structure summary of a stored network.
#[derive(Debug, Serialize)]
struct Inspection {
    input_dim: usize,
    output_dim: usize,
    depth: usize,
    width: usize,
    params: usize,
    schedule: Vec<Activation>,
    dsrn: std::result::Result<crate::net::DsrnProfile, String>,
}

fn net_inspect(s: &InspectSettings) -> Result<()> {
    if s.path.is_empty() {
        return Err(Error::Config("net inspect needs --path".into()));
    }
    let net = deserialize(&std::fs::read(Path::new(&s.path))?)?;
    let info = Inspection {
        input_dim: net.input_dim(),
        output_dim: net.output_dim(),
        depth: net.depth(),
        width: net.width(),
        params: net.num_params(),
        schedule: net.schedule(),
        dsrn: validate_dsrn(&net, s.c).map_err(|e| e.to_string()),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&info).map_err(|e| Error::Internal(e.to_string()))?
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let common = &cli.common;
    macro_rules! run_with {
        ($section:literal, $flags:expr, $settings:ty, $f:expr) => {{
            let (s, seed): ($settings, u64) = resolve(common, $section, $flags)?;
            let ctx = context(common, $section, &s, seed)?;
            $f(&ctx, &s)
        }};
    }
    match &cli.command {
        Command::Gadgets(f) => run_with!("gadgets", f, GadgetsSettings, gadgets),
        Command::Approximate(f) => run_with!("approximate", f, ApproximateSettings, approximate),
        Command::RateSweep(f) => run_with!("rate_sweep", f, RateSweepSettings, rate_sweep_cmd),
        Command::Norm(f) => run_with!("norm", f, NormSettings, norm),
        Command::Complexity(f) => run_with!("complexity", f, ComplexitySettings, complexity),
        Command::Pinn(f) => run_with!("pinn", f, PinnSettings, pinn),
        Command::Net {
            action: NetAction::Serialize(f),
        } => run_with!("net_serialize", f, SerializeSettings, net_serialize),
        Command::Net {
            action: NetAction::Inspect(f),
        } => {
            let (s, _): (InspectSettings, u64) = resolve(common, "net_inspect", f)?;
            net_inspect(&s)
        }
    }
}

/// Exit status for an error: 2 for configuration and usage problems, 1
/// otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}

fn report_error(category: &str, message: &str, code: i32) {
    let v = serde_json::json!({ "error": { "category": category, "message": message, "exit_code": code } });
    eprintln!("{v}");
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{}", e.render());
            report_error("usage", &e.kind().to_string(), 2);
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            report_error(e.category(), &e.to_string(), code);
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(args: &[&str], dir: &Path) -> Vec<String> {
        let mut v = vec!["dsrn".to_string()];
        v.extend(args.iter().map(|s| s.to_string()));
        v.push("--out".into());
        v.push(dir.display().to_string());
        v
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run(["dsrn", "frobnicate"]), 2);
        assert_eq!(run(["dsrn", "gadgets", "--bogus"]), 2);
    }

    #[test]
    fn precedence_of_layers() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        std::fs::write(&cfg, "seed = 3\n[pinn]\nwidth = 7\niterations = 5\nlr = 0.5\n").unwrap();
        let cli = Cli::try_parse_from([
            "dsrn",
            "pinn",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "width=9",
            "--set",
            "lr=0.25",
            "--lr",
            "0.125",
        ])
        .unwrap();
        let Command::Pinn(f) = &cli.command else { panic!() };
        let (s, seed): (PinnSettings, u64) = resolve(&cli.common, "pinn", f).unwrap();
        assert_eq!((s.width, s.iterations, s.lr, seed), (9, 5, 0.125, 3));
        assert_eq!(s.beta, 100.0);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let cli = Cli::try_parse_from(["dsrn", "pinn", "--set", "widht=3"]).unwrap();
        let Command::Pinn(f) = &cli.command else { panic!() };
        let r: Result<(PinnSettings, u64)> = resolve(&cli.common, "pinn", f);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn refuses_to_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let args = base(&["gadgets", "--points", "10"], dir.path());
        assert_eq!(run(&args), 0);
        assert_eq!(run(&args), 2);
        let mut forced = args.clone();
        forced.push("--force".into());
        assert_eq!(run(&forced), 0);
    }

    #[test]
    fn csv_header_carries_seed_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run(base(&["gadgets", "--points", "10", "--seed", "4"], dir.path())), 0);
        let text = std::fs::read_to_string(dir.path().join("gadgets.csv")).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with(&format!("# dsrn {} seed=4 config=", env!("CARGO_PKG_VERSION"))));
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "gadget,d,points,max_abs_err,max_rel_err,width,depth"
        );
    }
}
