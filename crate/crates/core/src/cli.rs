//! Command-line interface: structure analysis, basin classification, Green
//! fields, equilibrium-measure sampling, topological degree, growth-exponent
//! estimates, and dimension bounds.
//!
//! Exit codes: 0 on success, 2 on usage or input parse errors, 3 when a
//! computation is dominated by indeterminate or non-convergent results.

use crate::corpus;
use crate::dynamics::{Basin, DynParams, lojasiewicz_estimate};
use crate::measures::{basin_grid, green_field, laplacian_density, dimension_report, SliceSpec, MeasureError};
use crate::parser::{format_map, parse_map};
use crate::poly::{block_structure, PolynomialMap};
use crate::preimage::{equilibrium_sample, topological_degree, map_id};
use crate::regularity::analyze;
use crate::scaled::ScaledEvaluator;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;
use std::fs;
use std::io::Write as _;

#[derive(Parser)]
#[command(
    name = "semireg",
    about = "Analysis of proper polynomial skew-product dynamics",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Block structure, stability, regularity levels, and rate spectrum.
    Analyze(AnalyzeArgs),
    /// Color pixels of a complex slice by escape basin.
    Classify(ClassifyArgs),
    /// Green function values on a complex slice, plus its Laplacian mass.
    Green(GreenArgs),
    /// Sample the equilibrium measure by backward iteration.
    Measure(MeasureArgs),
    /// Topological degree by counting fibers over random targets.
    Degree(DegreeArgs),
    /// Minimum of log|F(z)|/log|z| on a large sphere.
    Loja(LojaArgs),
    /// Norm growth rate on an equilibrium cloud and dimension bound.
    Dimension(DimensionArgs),
}

#[derive(Args)]
struct MapArg {
    /// Bundled map name (e.g. `squaring`) or inline source, `@file` to read
    /// from a file, `-` for stdin. Syntax: `z1^2 + i*z2, z2^2 - 1/2`.
    map: String,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    map: MapArg,
    /// Emit the full report as JSON instead of a text summary.
    #[arg(long)]
    json: bool,
    /// Write output to a file instead of stdout.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SliceArgs {
    /// 1-based index of the varying complex coordinate.
    #[arg(long, default_value_t = 1)]
    coord: usize,
    /// Center of the window, as `re,im`.
    #[arg(long, default_value = "0,0")]
    center: String,
    #[arg(long, default_value_t = 4.0)]
    width: f64,
    /// Window height; defaults to the width.
    #[arg(long)]
    height: Option<f64>,
    /// Pixels per side.
    #[arg(long, default_value_t = 256)]
    res: usize,
    /// Value for each non-varying coordinate, as `re,im` (repeatable).
    #[arg(long)]
    fix: Vec<String>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    map: MapArg,
    #[command(flatten)]
    slice: SliceArgs,
    #[arg(long, default_value_t = 200)]
    max_n: usize,
    #[arg(long, default_value_t = 1024)]
    precision_cap: u32,
    /// Write a PPM image of the basin labels.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GreenArgs {
    #[command(flatten)]
    map: MapArg,
    #[command(flatten)]
    slice: SliceArgs,
    /// Convergence tolerance for the escape-rate normalization.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// 1-based block whose rate normalizes the Green function
    /// (default: the slowest block).
    #[arg(long)]
    index: Option<usize>,
    #[arg(long, default_value_t = 1024)]
    precision_cap: u32,
    /// Write the field to `.pgm` (8-bit grayscale) or `.csv`.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MeasureArgs {
    #[command(flatten)]
    map: MapArg,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Backward-iteration steps discarded before recording.
    #[arg(long, default_value_t = 30)]
    burn: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the cloud as CSV (`re1,im1,re2,im2` per line).
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DegreeArgs {
    #[command(flatten)]
    map: MapArg,
    #[arg(long, default_value_t = 12)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct LojaArgs {
    #[command(flatten)]
    map: MapArg,
    /// Natural log of the sphere radius.
    #[arg(long, default_value_t = 13.815510557964274)]
    radius_log: f64,
    /// Random starting points on the sphere.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Compass-descent sweeps per retained start.
    #[arg(long, default_value_t = 200)]
    descent: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1024)]
    precision_cap: u32,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DimensionArgs {
    #[command(flatten)]
    map: MapArg,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 30)]
    burn: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Iterations in each derivative product.
    #[arg(long, default_value_t = 25)]
    max_n: usize,
    #[arg(long)]
    json: bool,
}

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 2;
const EXIT_INDETERMINATE: i32 = 3;

pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match cli.command {
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Classify(a) => cmd_classify(&a),
        Command::Green(a) => cmd_green(&a),
        Command::Measure(a) => cmd_measure(&a),
        Command::Degree(a) => cmd_degree(&a),
        Command::Loja(a) => cmd_loja(&a),
        Command::Dimension(a) => cmd_dimension(&a),
    }
}

fn load_map(arg: &str) -> Result<PolynomialMap, String> {
    for (name, map) in corpus::all() {
        if name == arg {
            return Ok(map);
        }
    }
    let src = if arg == "-" {
        let mut buf = String::new();
        use std::io::Read;
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| format!("reading stdin: {e}"))?;
        buf
    } else if let Some(path) = arg.strip_prefix('@') {
        fs::read_to_string(path).map_err(|e| format!("reading {path}: {e}"))?
    } else {
        arg.to_string()
    };
    parse_map(&src).map_err(|e| format!("parse error: {e}"))
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let err = |_| format!("expected `re` or `re,im`, got `{s}`");
    match parts.as_slice() {
        [re] => Ok(Complex64::new(re.trim().parse::<f64>().map_err(err)?, 0.0)),
        [re, im] => Ok(Complex64::new(
            re.trim().parse::<f64>().map_err(err)?,
            im.trim().parse::<f64>().map_err(err)?,
        )),
        _ => Err(format!("expected `re` or `re,im`, got `{s}`")),
    }
}

fn build_slice(map: &PolynomialMap, args: &SliceArgs) -> Result<SliceSpec, String> {
    let k = map.k();
    if args.coord == 0 || args.coord > k {
        return Err(format!("--coord must be in 1..={k}"));
    }
    if args.fix.len() != k - 1 {
        return Err(format!("expected {} --fix values, got {}", k - 1, args.fix.len()));
    }
    let fixed = args
        .fix
        .iter()
        .map(|s| parse_complex(s))
        .collect::<Result<Vec<_>, _>>()?;
    if args.res == 0 {
        return Err("--res must be positive".into());
    }
    Ok(SliceSpec {
        coord: args.coord - 1,
        center: parse_complex(&args.center)?,
        width: args.width,
        height: args.height.unwrap_or(args.width),
        res_x: args.res,
        res_y: args.res,
        fixed,
    })
}

fn emit(out: &Option<String>, text: &str) -> i32 {
    match out {
        Some(path) => match fs::write(path, text) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: writing {path}: {e}");
                EXIT_USAGE
            }
        },
        None => {
            println!("{text}");
            EXIT_OK
        }
    }
}

fn usage_err(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    EXIT_USAGE
}

fn cmd_analyze(args: &AnalyzeArgs) -> i32 {
    let map = match load_map(&args.map.map) {
        Ok(m) => m,
        Err(e) => return usage_err(&e),
    };
    let report = match analyze(&map) {
        Ok(r) => r,
        Err(e) => return usage_err(&format!("analysis failed: {e}")),
    };
    let text = if args.json {
        serde_json::to_string_pretty(&report).unwrap()
    } else {
        let mut s = format!("map: {}\n", format_map(&map));
        s.push_str(&format!(
            "k = {}, blocks m = {}, degrees = {:?}, cuts = {:?}\n",
            report.k, report.blocks.m, report.blocks.d, report.blocks.l
        ));
        s.push_str(&format!("algebraically stable: {}\n", report.alg_stable));
        s.push_str(&format!("regularity level s_max = {}\n", report.s_max));
        if let Some(sr) = report.semi_regular {
            s.push_str(&format!("semi-regular: {sr}\n"));
        }
        if let Some(pi) = &report.pi {
            s.push_str(&format!("certifying monomial exponents: {pi:?}\n"));
        }
        if let Some(nt) = &report.newton {
            s.push_str(&format!(
                "support lines: {}m+{}n={} and {}m+{}n={}\n",
                nt.d1.p, nt.d1.q, nt.d1.r, nt.d2.p, nt.d2.q, nt.d2.r
            ));
        }
        if let Some(reason) = &report.reason {
            s.push_str(&format!("obstruction: {reason}\n"));
        }
        s.push_str(&format!("rates alpha = {:?}\n", report.alpha));
        if let Some(dt) = report.d_t {
            s.push_str(&format!("total dynamical degree d_t = {dt}\n"));
        }
        s.push_str(&format!("slowest rate lambda = {}", report.lambda));
        s
    };
    emit(&args.out, &text)
}

/// Distinct colors for escape basins; bounded orbits are black and
/// indeterminate pixels white.
const PALETTE: [[u8; 3]; 8] = [
    [230, 70, 60],
    [60, 120, 230],
    [70, 190, 90],
    [240, 180, 40],
    [170, 80, 200],
    [60, 200, 200],
    [240, 120, 180],
    [150, 150, 70],
];

fn cmd_classify(args: &ClassifyArgs) -> i32 {
    let map = match load_map(&args.map.map) {
        Ok(m) => m,
        Err(e) => return usage_err(&e),
    };
    let spec = match build_slice(&map, &args.slice) {
        Ok(s) => s,
        Err(e) => return usage_err(&e),
    };
    let report = match analyze(&map) {
        Ok(r) => r,
        Err(e) => return usage_err(&format!("analysis failed: {e}")),
    };
    let params = DynParams {
        max_n: args.max_n,
        precision_cap: args.precision_cap,
        ..DynParams::default()
    };
    let eval = ScaledEvaluator::new(&map);
    let labels = basin_grid(&eval, &report.alpha, &spec, &params);
    let n = labels.len();
    let mut counts: std::collections::BTreeMap<String, usize> = Default::default();
    for b in &labels {
        let key = match b {
            Basin::U(i) => format!("U{i}"),
            Basin::K => "K".to_string(),
            Basin::Indeterminate => "indeterminate".to_string(),
        };
        *counts.entry(key).or_insert(0) += 1;
    }
    let indet = *counts.get("indeterminate").unwrap_or(&0);
    if let Some(path) = &args.out {
        let mut bytes = format!("P6\n{} {}\n255\n", spec.res_x, spec.res_y).into_bytes();
        for b in &labels {
            let rgb = match b {
                Basin::U(i) => PALETTE[(i - 1) % PALETTE.len()],
                Basin::K => [0, 0, 0],
                Basin::Indeterminate => [255, 255, 255],
            };
            bytes.extend_from_slice(&rgb);
        }
        if let Err(e) = fs::write(path, &bytes) {
            return usage_err(&format!("writing {path}: {e}"));
        }
    }
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "res": [spec.res_x, spec.res_y],
                "counts": counts,
                "indeterminate_fraction": indet as f64 / n as f64,
            }))
            .unwrap()
        );
    } else {
        for (key, c) in &counts {
            println!("{key}: {c} pixels ({:.2}%)", 100.0 * *c as f64 / n as f64);
        }
    }
    if indet as f64 > 0.05 * n as f64 {
        eprintln!("warning: more than 5% of pixels are indeterminate");
        return EXIT_INDETERMINATE;
    }
    EXIT_OK
}

fn cmd_green(args: &GreenArgs) -> i32 {
    let map = match load_map(&args.map.map) {
        Ok(m) => m,
        Err(e) => return usage_err(&e),
    };
    let spec = match build_slice(&map, &args.slice) {
        Ok(s) => s,
        Err(e) => return usage_err(&e),
    };
    let report = match analyze(&map) {
        Ok(r) => r,
        Err(e) => return usage_err(&format!("analysis failed: {e}")),
    };
    let alpha = match args.index {
        Some(i) => {
            if i == 0 || i > report.alpha.len() {
                return usage_err(&format!("--index must be in 1..={}", report.alpha.len()));
            }
            report.alpha[i - 1]
        }
        None => report.lambda,
    };
    if alpha <= 1.0 {
        return usage_err(&format!("normalizing rate {alpha} is not greater than one"));
    }
    let params = DynParams { precision_cap: args.precision_cap, ..DynParams::default() };
    let eval = ScaledEvaluator::new(&map);
    let field = green_field(&eval, alpha, &spec, args.tol, &params);
    let indet = field.indeterminate_fraction();
    if let Some(path) = &args.out {
        let res = if path.ends_with(".pgm") {
            write_pgm(path, &field)
        } else {
            write_field_csv(path, &field)
        };
        if let Err(e) = res {
            return usage_err(&format!("writing {path}: {e}"));
        }
    }
    let finite: Vec<f64> = field
        .values
        .iter()
        .filter_map(|v| v.filter(|x| x.is_finite()))
        .collect();
    let (min, max) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mass = laplacian_density(&field).ok().map(|d| d.total_mass);
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "alpha": alpha,
                "res": [spec.res_x, spec.res_y],
                "indeterminate_fraction": indet,
                "min": if finite.is_empty() { None } else { Some(min) },
                "max": if finite.is_empty() { None } else { Some(max) },
                "laplacian_mass": mass,
            }))
            .unwrap()
        );
    } else {
        println!("normalizing rate alpha = {alpha}");
        println!("indeterminate fraction = {indet:.4}");
        if !finite.is_empty() {
            println!("value range = [{min:.6}, {max:.6}]");
        }
        if let Some(m) = mass {
            println!("Laplacian mass on window = {m:.6}");
        }
    }
    if indet > 0.05 {
        eprintln!("warning: more than 5% of pixels are indeterminate");
        return EXIT_INDETERMINATE;
    }
    EXIT_OK
}

fn write_pgm(path: &str, field: &crate::measures::GreenField) -> std::io::Result<()> {
    let finite: Vec<f64> = field
        .values
        .iter()
        .filter_map(|v| v.filter(|x| x.is_finite()))
        .collect();
    let (lo, hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = (hi - lo).max(1e-300);
    let mut bytes = format!("P5\n{} {}\n255\n", field.spec.res_x, field.spec.res_y).into_bytes();
    for v in &field.values {
        bytes.push(match v {
            Some(x) if x.is_finite() => (((x - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8,
            Some(_) => 255,
            None => 0,
        });
    }
    fs::write(path, &bytes)
}

fn write_field_csv(path: &str, field: &crate::measures::GreenField) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "i,j,re,im,green")?;
    for j in 0..field.spec.res_y {
        for i in 0..field.spec.res_x {
            let z = field.spec.point(i, j)[field.spec.coord];
            let val = match field.get(i, j) {
                Some(x) if x.is_finite() => format!("{x:.17e}"),
                Some(_) => "inf".to_string(),
                None => "nan".to_string(),
            };
            writeln!(f, "{i},{j},{:.17e},{:.17e},{val}", z.re, z.im)?;
        }
    }
    Ok(())
}

fn cmd_measure(args: &MeasureArgs) -> i32 {
    let map = match load_map(&args.map.map) {
        Ok(m) => m,
        Err(e) => return usage_err(&e),
    };
    let cloud = match equilibrium_sample(&map, args.samples, args.burn, args.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: sampling failed: {e}");
            return EXIT_INDETERMINATE;
        }
    };
    if let Some(path) = &args.out {
        let write = || -> std::io::Result<()> {
            let mut f = std::io::BufWriter::new(fs::File::create(path)?);
            let header: Vec<String> = (1..=map.k())
                .flat_map(|i| [format!("re{i}"), format!("im{i}")])
                .collect();
            writeln!(f, "{}", header.join(","))?;
            for p in &cloud.points {
                let row: Vec<String> = p
                    .iter()
                    .flat_map(|c| [format!("{:.17e}", c.re), format!("{:.17e}", c.im)])
                    .collect();
                writeln!(f, "{}", row.join(","))?;
            }
            Ok(())
        };
        if let Err(e) = write() {
            return usage_err(&format!("writing {path}: {e}"));
        }
    }
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "points": cloud.points.len(),
                "chains": cloud.chains,
                "burn_in": cloud.burn_in,
                "seed": cloud.seed,
                "map_id": format!("{:016x}", cloud.map_id),
            }))
            .unwrap()
        );
    } else {
        println!(
            "sampled {} points ({} chains, burn-in {}, seed {}, map {:016x})",
            cloud.points.len(),
            cloud.chains,
            cloud.burn_in,
            cloud.seed,
            cloud.map_id
        );
    }
    EXIT_OK
}

fn cmd_degree(args: &DegreeArgs) -> i32 {
    let map = match load_map(&args.map.map) {
        Ok(m) => m,
        Err(e) => return usage_err(&e),
    };
    match topological_degree(&map, args.trials, args.seed) {
        Ok(d) => {
            if args.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&json!({
                        "degree": d,
                        "trials": args.trials,
                        "map_id": format!("{:016x}", map_id(&map)),
                    }))
                    .unwrap()
                );
            } else {
                println!("topological degree = {d} (from {} random fibers)", args.trials);
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: degree estimation failed: {e}");
            EXIT_INDETERMINATE
        }
    }
}

fn cmd_loja(args: &LojaArgs) -> i32 {
    let map = match load_map(&args.map.map) {
        Ok(m) => m,
        Err(e) => return usage_err(&e),
    };
    let params = DynParams { precision_cap: args.precision_cap, ..DynParams::default() };
    let eval = ScaledEvaluator::new(&map);
    let est = lojasiewicz_estimate(
        &eval,
        args.radius_log,
        args.samples,
        args.descent,
        args.seed,
        &params,
    );
    if !est.is_finite() {
        eprintln!("error: no sample point produced a usable value");
        return EXIT_INDETERMINATE;
    }
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "estimate": est,
                "radius_log": args.radius_log,
                "samples": args.samples,
                "seed": args.seed,
            }))
            .unwrap()
        );
    } else {
        println!(
            "min log|F(z)|/log|z| on ln|z| = {} is about {est:.6}",
            args.radius_log
        );
    }
    EXIT_OK
}

fn cmd_dimension(args: &DimensionArgs) -> i32 {
    let map = match load_map(&args.map.map) {
        Ok(m) => m,
        Err(e) => return usage_err(&e),
    };
    let report = match analyze(&map) {
        Ok(r) => r,
        Err(e) => return usage_err(&format!("analysis failed: {e}")),
    };
    let (blocks, _) = match block_structure(&map) {
        Ok(b) => b,
        Err(e) => return usage_err(&format!("malformed map: {e}")),
    };
    let cloud = match equilibrium_sample(&map, args.samples, args.burn, args.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: sampling failed: {e}");
            return EXIT_INDETERMINATE;
        }
    };
    let m_hat = match crate::measures::lyapunov_norm(&map, &cloud.points, args.max_n) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: norm growth estimation failed: {e}");
            return EXIT_INDETERMINATE;
        }
    };
    match dimension_report(&blocks, &report.alpha, m_hat) {
        Ok(rep) => {
            if args.json {
                println!("{}", serde_json::to_string_pretty(&rep).unwrap());
            } else {
                println!("norm growth rate M = {:.6}", rep.m_hat);
                println!("per-block exponents a = {:?}", rep.a);
                println!("size-weighted sum = {:.6}", rep.weighted_sum);
                println!("dimension bound log d_t / log M = {:.6}", rep.mu_bound);
            }
            EXIT_OK
        }
        Err(e @ MeasureError::MBelowOne) => {
            eprintln!("error: {e}");
            EXIT_INDETERMINATE
        }
        Err(e) => usage_err(&format!("{e}")),
    }
}
