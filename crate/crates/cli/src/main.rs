//! `ncerg` — experiment driver for the ergodic-inequality laboratory.
//!
//! Every subcommand writes a CSV table (headed by `# ncerg-report v1`)
//! plus a JSON summary holding each realized constant next to the bound it
//! is compared against (or `"empirical"` when there is none). Exit code 0
//! means every hard inequality held, 1 flags a violated inequality, 2 a
//! usage error. Identical configuration and seed produce byte-identical
//! output; floats are printed with 17 significant digits.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use ncerg_core::algebra::{random_positive, AlgebraElement};
use ncerg_core::dyadic::{cover_ball, mei_bound_log2, BallMetric, DyadicSystem};
use ncerg_core::ergodic::{
    au_witness_table, coboundary_report, convergence_report, transference_check,
    weak_transference_check, ActionModel,
};
use ncerg_core::groups::{folner_ratio, growth_exponent};
use ncerg_core::maximal::{strong_type_estimate, PositiveMap};
use ncerg_core::walks::{domination_constant, domination_constant_exact, Density};

mod spec;
use spec::GroupSpec;

const REPORT_HEADER: &str = "# ncerg-report v1";

#[derive(Parser)]
#[command(name = "ncerg", version, about = "ergodic-inequality experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for every random test element.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Exact rational arithmetic where supported.
    #[arg(long, global = true)]
    exact: bool,

    /// Output directory (CSV + JSON files); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Element cap for enumerations (NCERG_CAP overrides).
    #[arg(long, global = true)]
    cap: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Ball sizes |B_r| of a group model.
    Balls {
        #[arg(long)]
        group: GroupSpec,
        #[arg(long)]
        rmax: u32,
    },
    /// Polynomial growth exponent fit.
    Growth {
        #[arg(long)]
        group: GroupSpec,
        #[arg(long)]
        rmax: u32,
    },
    /// Følner ratios of balls against each generator.
    Folner {
        #[arg(long)]
        group: GroupSpec,
        #[arg(long)]
        rmax: u32,
    },
    /// Covering-ratio sweep of the adjacent dyadic systems.
    Dyadic {
        #[arg(long)]
        d: usize,
        /// Window side length (a power of two).
        #[arg(long)]
        window: u64,
        #[arg(long)]
        rmax: u32,
        /// Use the ℓ¹ metric for balls instead of ℓ∞.
        #[arg(long)]
        l1: bool,
    },
    /// Ball-indicator domination by Cesàro sums of walk powers.
    WalkDominate {
        #[arg(long)]
        group: GroupSpec,
        #[arg(long)]
        n: u32,
    },
    /// Empirical strong-type constant of shift averages A_1..A_n.
    Maximal {
        #[arg(long)]
        group: GroupSpec,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 32)]
        sites: usize,
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
    /// Convergence diagnostics ‖A_r x − Px‖_p along a lacunary schedule.
    ErgodicConverge {
        #[arg(long)]
        group: GroupSpec,
        #[arg(long, default_value_t = 64)]
        sites: usize,
        #[arg(long)]
        rmax: u32,
        #[arg(long = "p")]
        p_values: Vec<f64>,
        #[arg(long = "lambda")]
        lambdas: Vec<f64>,
    },
    /// Transference comparison on Z-shift instances.
    Transference {
        #[arg(long)]
        group: GroupSpec,
        /// Largest measure radius N (μ_n uniform on B_n, n ≤ N).
        #[arg(long)]
        n: u32,
        /// Følner radius L (default 20·N).
        #[arg(long)]
        l: Option<u32>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 32)]
        sites: usize,
        #[arg(long, default_value_t = 5)]
        count: usize,
        /// Levels for the weak-type witness pullback.
        #[arg(long = "lambda")]
        lambdas: Vec<f64>,
    },
    /// Iterated one-parameter averages on the Heisenberg translation model.
    Iterated {
        #[arg(long, default_value_t = 5)]
        q: usize,
        #[arg(long)]
        n: u32,
    },
    /// Subgroup averages of the locally finite chain: tower property.
    Subgroup {
        #[arg(long, default_value_t = 6)]
        levels: u32,
        #[arg(long)]
        n: u32,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cap = std::env::var("NCERG_CAP")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(cli.cap)
        .unwrap_or(ncerg_core::groups::DEFAULT_ELEMENT_CAP);
    match run(&cli, cap) {
        Ok(Outcome { csv, summary, violation }) => {
            if let Err(e) = emit(&cli, &csv, &summary) {
                eprintln!("ncerg: cannot write output: {e}");
                return ExitCode::from(2);
            }
            if let Some(msg) = violation {
                eprintln!("ncerg: inequality violated: {msg}");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(msg) => {
            eprintln!("ncerg: {msg}");
            ExitCode::from(2)
        }
    }
}

struct Outcome {
    csv: String,
    summary: serde_json::Value,
    violation: Option<String>,
}

/// 17 significant digits, locale-independent.
fn g17(x: f64) -> String {
    format!("{:.16e}", x)
}

fn elem_str(e: &ncerg_core::groups::Elem) -> String {
    e.iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn csv_head(columns: &str) -> String {
    format!("{REPORT_HEADER}\n{columns}\n")
}

fn constant(name: &str, value: f64, bound: Option<f64>, satisfied: bool) -> serde_json::Value {
    json!({
        "name": name,
        "value": value,
        "paper_bound": bound.map(serde_json::Value::from).unwrap_or_else(|| "empirical".into()),
        "satisfied": satisfied,
    })
}

fn emit(cli: &Cli, csv: &str, summary: &serde_json::Value) -> std::io::Result<()> {
    let name = match &cli.command {
        Command::Balls { .. } => "balls",
        Command::Growth { .. } => "growth",
        Command::Folner { .. } => "folner",
        Command::Dyadic { .. } => "dyadic",
        Command::WalkDominate { .. } => "walk-dominate",
        Command::Maximal { .. } => "maximal",
        Command::ErgodicConverge { .. } => "ergodic-converge",
        Command::Transference { .. } => "transference",
        Command::Iterated { .. } => "iterated",
        Command::Subgroup { .. } => "subgroup",
    };
    let pretty = serde_json::to_string_pretty(summary).expect("serializable summary");
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{name}.csv")), csv)?;
            std::fs::write(dir.join(format!("{name}.json")), pretty + "\n")?;
        }
        None => {
            print!("{csv}");
            println!("{pretty}");
        }
    }
    Ok(())
}

fn base_summary(cli: &Cli, subcommand: &str) -> serde_json::Value {
    json!({
        "report": "ncerg-report v1",
        "subcommand": subcommand,
        "seed": cli.seed,
        "exact": cli.exact,
    })
}

fn run(cli: &Cli, cap: usize) -> Result<Outcome, String> {
    match &cli.command {
        Command::Balls { group, rmax } => balls(cli, group, *rmax, cap),
        Command::Growth { group, rmax } => growth(cli, group, *rmax),
        Command::Folner { group, rmax } => folner(cli, group, *rmax, cap),
        Command::Dyadic { d, window, rmax, l1 } => dyadic(cli, *d, *window, *rmax, *l1),
        Command::WalkDominate { group, n } => walk_dominate(cli, group, *n, cap),
        Command::Maximal {
            group,
            n,
            p,
            sites,
            count,
        } => maximal(cli, group, *n, *p, *sites, *count),
        Command::ErgodicConverge {
            group,
            sites,
            rmax,
            p_values,
            lambdas,
        } => ergodic_converge(cli, group, *sites, *rmax, p_values, lambdas),
        Command::Transference {
            group,
            n,
            l,
            p,
            sites,
            count,
            lambdas,
        } => transference(cli, group, *n, *l, *p, *sites, *count, lambdas),
        Command::Iterated { q, n } => iterated(cli, *q, *n),
        Command::Subgroup { levels, n } => subgroup(cli, *levels, *n),
    }
}

fn balls(cli: &Cli, spec: &GroupSpec, rmax: u32, cap: usize) -> Result<Outcome, String> {
    let group = spec.build()?;
    let ball = group
        .ball_with_cap(rmax, cap)
        .map_err(|e| e.to_string())?;
    let sizes = ball.size_profile();
    let mut csv = csv_head("r,size,boundary");
    for (r, w) in sizes.windows(2).enumerate() {
        if r == 0 {
            writeln!(csv, "0,{},1", sizes[0]).unwrap();
        }
        writeln!(csv, "{},{},{}", r + 1, w[1], w[1] - w[0]).unwrap();
    }
    if sizes.len() == 1 {
        writeln!(csv, "0,{},1", sizes[0]).unwrap();
    }
    let mut summary = base_summary(cli, "balls");
    summary["group"] = json!(spec.to_string());
    summary["constants"] = json!([constant(
        "ball_size_rmax",
        *sizes.last().unwrap() as f64,
        None,
        true
    )]);
    Ok(Outcome {
        csv,
        summary,
        violation: None,
    })
}

fn growth(cli: &Cli, spec: &GroupSpec, rmax: u32) -> Result<Outcome, String> {
    if rmax < 4 {
        return Err("growth needs --rmax at least 4".into());
    }
    let group = spec.build()?;
    let ball = group.ball(rmax).map_err(|e| e.to_string())?;
    let sizes = ball.size_profile();
    let fit = growth_exponent(&group, rmax).map_err(|e| e.to_string())?;
    let mut csv = csv_head("r,size");
    for (r, s) in sizes.iter().enumerate() {
        writeln!(csv, "{r},{s}").unwrap();
    }
    let mut summary = base_summary(cli, "growth");
    summary["group"] = json!(spec.to_string());
    summary["degenerate"] = json!(fit.degenerate);
    summary["constants"] = json!([constant("growth_exponent", fit.exponent, None, true)]);
    Ok(Outcome {
        csv,
        summary,
        violation: None,
    })
}

fn folner(cli: &Cli, spec: &GroupSpec, rmax: u32, cap: usize) -> Result<Outcome, String> {
    if rmax < 1 {
        return Err("folner needs --rmax at least 1".into());
    }
    let group = spec.build()?;
    let mut csv = csv_head("r,generator,num,den,ratio");
    let mut last: f64 = 1.0;
    for r in 1..=rmax {
        let ball = group.ball_with_cap(r, cap).map_err(|e| e.to_string())?;
        for g in group.generators() {
            let ratio = folner_ratio(&group, ball.elements(), g);
            let value = *ratio.numer() as f64 / *ratio.denom() as f64;
            writeln!(
                csv,
                "{r},{},{},{},{}",
                elem_str(g),
                ratio.numer(),
                ratio.denom(),
                g17(value)
            )
            .unwrap();
            if r == rmax {
                last = last.max(value);
            }
        }
    }
    let mut summary = base_summary(cli, "folner");
    summary["group"] = json!(spec.to_string());
    summary["constants"] = json!([constant("folner_ratio_rmax", last, None, true)]);
    Ok(Outcome {
        csv,
        summary,
        violation: None,
    })
}

fn dyadic(cli: &Cli, d: usize, window: u64, rmax: u32, l1: bool) -> Result<Outcome, String> {
    if d == 0 || d > 3 {
        return Err("dyadic supports dimensions 1..=3".into());
    }
    if !window.is_power_of_two() {
        return Err("--window must be a power of two".into());
    }
    let w_log2 = window.trailing_zeros();
    if rmax == 0 || (rmax as u64) * 4 > window {
        return Err("need 0 < rmax ≤ window/4".into());
    }
    let systems = DyadicSystem::family(d, w_log2, false).map_err(|e| e.to_string())?;
    let metric = if l1 { BallMetric::L1 } else { BallMetric::Linf };
    let bound = (mei_bound_log2(d) as f64).exp2();
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    // exhaustive over centers at d = 1, sampled (10^4) otherwise
    let mut centers: Vec<(Vec<i64>, u32)> = Vec::new();
    if d == 1 {
        for r in 1..=rmax {
            for x in (r as i64)..(window as i64 - r as i64) {
                centers.push((vec![x], r));
            }
        }
    } else {
        use rand::Rng;
        for _ in 0..10_000 {
            let r = rng.random_range(1..=rmax);
            let x = (0..d)
                .map(|_| rng.random_range(r as i64..window as i64 - r as i64))
                .collect();
            centers.push((x, r));
        }
    }
    let mut csv = csv_head("d,x,r,i,k,ratio");
    let mut worst = 0.0f64;
    let mut violation = None;
    for (x, r) in &centers {
        let cover = cover_ball(&systems, x, *r, metric).map_err(|e| e.to_string())?;
        let ratio = *cover.ratio.numer() as f64 / *cover.ratio.denom() as f64;
        worst = worst.max(ratio);
        // paper scale: cell size 2^level is scale k = -level
        writeln!(
            csv,
            "{d},{},{r},{},{},{}",
            x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";"),
            cover.system_index,
            -(cover.level as i64),
            g17(ratio)
        )
        .unwrap();
        if ratio > bound && violation.is_none() {
            violation = Some(format!(
                "covering ratio {ratio} exceeds 2^{} at x={x:?}, r={r}",
                mei_bound_log2(d)
            ));
        }
    }
    let mut summary = base_summary(cli, "dyadic");
    summary["dimension"] = json!(d);
    summary["window"] = json!(window);
    summary["metric"] = json!(if l1 { "l1" } else { "linf" });
    summary["balls"] = json!(centers.len());
    summary["constants"] = json!([constant(
        "max_cover_ratio",
        worst,
        Some(bound),
        violation.is_none()
    )]);
    Ok(Outcome {
        csv,
        summary,
        violation,
    })
}

fn walk_dominate(cli: &Cli, spec: &GroupSpec, n: u32, cap: usize) -> Result<Outcome, String> {
    if n == 0 {
        return Err("walk-dominate needs --n at least 1".into());
    }
    let group = spec.build()?;
    let mut csv = csv_head("g,lhs,rhs,ratio");
    let mut summary = base_summary(cli, "walk-dominate");
    summary["group"] = json!(spec.to_string());
    summary["n"] = json!(n);
    let c_value;
    if cli.exact {
        let (c, rows) = domination_constant_exact(&group, n, cap).map_err(|e| e.to_string())?;
        let ball = group.ball_with_cap(n, cap).map_err(|e| e.to_string())?;
        let lhs = 1.0 / ball.len() as f64;
        for (g, s) in &rows {
            let s_f64 = rational_to_f64(s);
            writeln!(csv, "{},{},{},{}", elem_str(g), g17(lhs), g17(s_f64), g17(lhs / s_f64))
                .unwrap();
        }
        summary["c_exact"] = json!(format!("{}/{}", c.numer(), c.denom()));
        c_value = rational_to_f64(&c);
    } else {
        let report = domination_constant(&group, n, cap).map_err(|e| e.to_string())?;
        for row in &report.rows {
            writeln!(
                csv,
                "{},{},{},{}",
                elem_str(&row.element),
                g17(row.ball_density),
                g17(row.cesaro_density),
                g17(row.ball_density / row.cesaro_density)
            )
            .unwrap();
        }
        c_value = report.c;
    }
    summary["constants"] = json!([constant("walk_domination_c", c_value, None, true)]);
    Ok(Outcome {
        csv,
        summary,
        violation: None,
    })
}

fn rational_to_f64(r: &num_rational::BigRational) -> f64 {
    let numer = r.numer().to_string().parse::<f64>().unwrap_or(f64::NAN);
    let denom = r.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
    numer / denom
}

fn maximal(
    cli: &Cli,
    spec: &GroupSpec,
    n: u32,
    p: f64,
    sites: usize,
    count: usize,
) -> Result<Outcome, String> {
    if !matches!(spec, GroupSpec::Z) {
        return Err("maximal currently drives the Z-shift family; use --group Z".into());
    }
    if n == 0 || count == 0 {
        return Err("maximal needs --n ≥ 1 and --count ≥ 1".into());
    }
    let action = ActionModel::shift_on_cycle(sites);
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let testset: Vec<AlgebraElement> = (0..count)
        .map(|_| random_positive(action.algebra(), &mut rng))
        .collect();
    type BoxedMap = Box<dyn Fn(&AlgebraElement) -> AlgebraElement>;
    let averages: Vec<BoxedMap> = (1..=n)
        .map(|r| {
            let action = action.clone();
            Box::new(move |x: &AlgebraElement| action.ball_average(r, x).expect("ball average"))
                as BoxedMap
        })
        .collect();
    let family: Vec<&PositiveMap> = averages.iter().map(|b| b.as_ref() as &PositiveMap).collect();
    let mut csv = csv_head("element,norm,ratio");
    let mut worst: f64 = 0.0;
    for (i, x) in testset.iter().enumerate() {
        let c = strong_type_estimate(&family, p, std::slice::from_ref(x))
            .map_err(|e| e.to_string())?;
        worst = worst.max(c);
        writeln!(csv, "{i},{},{}", g17(x.lp_norm(p).unwrap()), g17(c)).unwrap();
    }
    let mut summary = base_summary(cli, "maximal");
    summary["p"] = json!(p);
    summary["family_size"] = json!(n);
    summary["sites"] = json!(sites);
    summary["constants"] = json!([constant("strong_type_estimate", worst, None, true)]);
    Ok(Outcome {
        csv,
        summary,
        violation: None,
    })
}

fn ergodic_converge(
    cli: &Cli,
    spec: &GroupSpec,
    sites: usize,
    rmax: u32,
    p_values: &[f64],
    lambdas: &[f64],
) -> Result<Outcome, String> {
    if rmax == 0 {
        return Err("ergodic-converge needs a nonempty schedule (--rmax ≥ 1)".into());
    }
    if p_values.is_empty() {
        return Err("ergodic-converge needs at least one --p value".into());
    }
    let action = match spec {
        GroupSpec::Z => ActionModel::shift_on_cycle(sites),
        GroupSpec::LocallyFinite => {
            let levels = (sites as f64).log2().ceil() as u32;
            ActionModel::locally_finite_flips(levels.max(1))
        }
        _ => return Err("ergodic-converge supports --group Z or locfin".into()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let x = random_positive(action.algebra(), &mut rng);
    let mut schedule: Vec<u32> = Vec::new();
    let mut r = 1u32;
    while r <= rmax {
        schedule.push(r);
        r *= 2;
    }
    let report = convergence_report(&action, &x, p_values, &schedule, lambdas)
        .map_err(|e| e.to_string())?;
    let mut columns = String::from("r");
    for p in p_values {
        write!(columns, ",norm_p{p}").unwrap();
    }
    for p in p_values {
        write!(columns, ",tail_sup_p{p}").unwrap();
    }
    let mut csv = csv_head(&columns);
    for (k, &radius) in report.schedule.iter().enumerate() {
        let mut line = radius.to_string();
        for v in &report.norms[k] {
            write!(line, ",{}", g17(*v)).unwrap();
        }
        for v in &report.tail_sup[k] {
            match v {
                Some(t) => write!(line, ",{}", g17(*t)).unwrap(),
                None => write!(line, ",").unwrap(),
            }
        }
        writeln!(csv, "{line}").unwrap();
    }
    let final_norms: Vec<f64> = report.norms.last().cloned().unwrap_or_default();
    let mut constants = Vec::new();
    for (j, p) in p_values.iter().enumerate() {
        constants.push(constant(
            &format!("final_deviation_p{p}"),
            final_norms[j],
            None,
            true,
        ));
    }
    let au_rows = au_witness_table(&action, &x, &schedule, &[0.1, 0.01])
        .map_err(|e| e.to_string())?;
    // Følner-bound check on a coboundary built from the same random data
    let y = random_positive(action.algebra(), &mut rng);
    let g0 = action.group().generators()[0].clone();
    let coboundary = coboundary_report(&action, &y, &g0, &schedule).map_err(|e| e.to_string())?;
    let coboundary_ok = coboundary
        .iter()
        .all(|row| row.sup_norm <= row.bound + 1e-12);
    let mut summary = base_summary(cli, "ergodic-converge");
    summary["coboundary"] = json!(coboundary
        .iter()
        .map(|row| json!({
            "radius": row.radius,
            "sup_norm": row.sup_norm,
            "folner_bound": row.bound,
            "folner_ratio": format!("{}/{}", row.folner_ratio.numer(), row.folner_ratio.denom()),
        }))
        .collect::<Vec<_>>());
    summary["coboundary_bound_satisfied"] = json!(coboundary_ok);
    summary["au_witness_table"] = json!(au_rows
        .iter()
        .map(|r| json!({
            "epsilon": r.epsilon,
            "tail_start": r.tail_start,
            "threshold": r.threshold,
            "bilateral_norm": r.bilateral_norm,
            "one_sided_norm": r.one_sided_norm,
        }))
        .collect::<Vec<_>>());
    summary["sites"] = json!(sites);
    summary["schedule"] = json!(report.schedule);
    summary["weak_defects"] = json!(report
        .weak_defects
        .iter()
        .map(|(l, d)| json!({"lambda": l, "defect": d}))
        .collect::<Vec<_>>());
    summary["constants"] = json!(constants);
    let violation =
        (!coboundary_ok).then(|| "coboundary average exceeds its Følner bound".to_string());
    Ok(Outcome {
        csv,
        summary,
        violation,
    })
}

#[allow(clippy::too_many_arguments)]
fn transference(
    cli: &Cli,
    spec: &GroupSpec,
    n: u32,
    l: Option<u32>,
    p: f64,
    sites: usize,
    count: usize,
    lambdas: &[f64],
) -> Result<Outcome, String> {
    if !matches!(spec, GroupSpec::Z) {
        return Err("transference drives Z-shift instances; use --group Z".into());
    }
    if n == 0 || count == 0 {
        return Err("transference needs --n ≥ 1 and --count ≥ 1".into());
    }
    let l = l.unwrap_or(20 * n);
    let action = ActionModel::shift_on_cycle(sites);
    let group = action.group().clone();
    let measures: Vec<Density> = (1..=n)
        .map(|r| {
            let ball = group.ball(r).expect("small ball");
            Density::uniform_on(&group, ball.elements()).expect("symmetric ball")
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let testset: Vec<AlgebraElement> = (0..count)
        .map(|_| random_positive(action.algebra(), &mut rng))
        .collect();
    let report = transference_check(&action, &measures, p, l, &testset, 0.1)
        .map_err(|e| e.to_string())?;
    let mut csv = csv_head("c_direct,c_transferred,folner_factor,bound,holds");
    let bound = report.c_transferred * report.folner_factor;
    writeln!(
        csv,
        "{},{},{},{},{}",
        g17(report.c_direct),
        g17(report.c_transferred),
        g17(report.folner_factor),
        g17(bound),
        report.holds
    )
    .unwrap();
    let violation = if report.holds {
        None
    } else {
        Some(format!(
            "C_direct {} exceeds C_transferred·factor {}",
            report.c_direct, bound
        ))
    };
    let mut weak_rows = Vec::new();
    for &lambda in lambdas {
        let weak = weak_transference_check(&action, &measures, p, l, &testset[0], lambda)
            .map_err(|e| e.to_string())?;
        weak_rows.push(json!({
            "lambda": lambda,
            "translation_defect": weak.translation_defect,
            "pulled_defect": weak.pulled_defect,
            "defect_bound": weak.defect_bound,
            "compression_norm": weak.compression_norm,
            "realized_constant": weak.realized_constant,
        }));
    }
    let mut summary = base_summary(cli, "transference");
    if !weak_rows.is_empty() {
        summary["weak_type"] = json!(weak_rows);
    }
    summary["folner_radius"] = json!(l);
    summary["window_size"] = json!(report.window_size);
    summary["folner_size"] = json!(report.folner_size);
    summary["small_folner_warning"] = json!(report.small_folner_warning);
    summary["constants"] = json!([
        constant("c_direct", report.c_direct, Some(bound), report.holds),
        constant("c_transferred", report.c_transferred, None, true),
        constant("folner_factor", report.folner_factor, None, true),
    ]);
    Ok(Outcome {
        csv,
        summary,
        violation,
    })
}

fn iterated(cli: &Cli, q: usize, n: u32) -> Result<Outcome, String> {
    if !(2..=9).contains(&q) {
        return Err("iterated needs 2 ≤ q ≤ 9".into());
    }
    if n == 0 {
        return Err("iterated needs --n ≥ 1".into());
    }
    let action = ActionModel::heisenberg_translation(q, true);
    let x = AlgebraElement::site_indicator(action.algebra(), 0).map_err(|e| e.to_string())?;
    let mut csv = csv_head("n,c_double_prime,window_x,window_y,window_z,psd_margin");
    let mut violation = None;
    let mut worst_c: f64 = 0.0;
    for radius in 1..=n {
        let rep = action.iterated_z_average(radius, &x).map_err(|e| e.to_string())?;
        let margin = rep
            .iterated
            .scale(rep.c_double_prime * (1.0 + 1e-9))
            .sub(&rep.ball_average)
            .min_eigenvalue()
            .map_err(|e| e.to_string())?;
        writeln!(
            csv,
            "{radius},{},{},{},{},{}",
            g17(rep.c_double_prime),
            rep.windows.0,
            rep.windows.1,
            rep.windows.2,
            g17(margin)
        )
        .unwrap();
        worst_c = worst_c.max(rep.c_double_prime);
        if margin < -1e-9 && violation.is_none() {
            violation = Some(format!("PSD domination fails by {margin} at n={radius}"));
        }
    }
    let mut summary = base_summary(cli, "iterated");
    summary["q"] = json!(q);
    summary["constants"] = json!([constant(
        "iterated_c_double_prime",
        worst_c,
        None,
        violation.is_none()
    )]);
    Ok(Outcome {
        csv,
        summary,
        violation,
    })
}

fn subgroup(cli: &Cli, levels: u32, n: u32) -> Result<Outcome, String> {
    if n >= levels {
        return Err("subgroup needs --n below --levels".into());
    }
    let action = ActionModel::locally_finite_flips(levels);
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let x = random_positive(action.algebra(), &mut rng);
    let mut csv = csv_head("n,tower_defect,idempotency_defect");
    let mut worst: f64 = 0.0;
    for k in 0..=n {
        let a_k = action.subgroup_average(k, &x).map_err(|e| e.to_string())?;
        let a_next = action.subgroup_average(k + 1, &x).map_err(|e| e.to_string())?;
        let tower = action
            .subgroup_average(k + 1, &a_k)
            .map_err(|e| e.to_string())?
            .sub(&a_next)
            .sup_norm();
        let idem = action
            .subgroup_average(k, &a_k)
            .map_err(|e| e.to_string())?
            .sub(&a_k)
            .sup_norm();
        worst = worst.max(tower).max(idem);
        writeln!(csv, "{k},{},{}", g17(tower), g17(idem)).unwrap();
    }
    let violation = (worst > 1e-12).then(|| format!("tower/idempotency defect {worst}"));
    let mut summary = base_summary(cli, "subgroup");
    summary["levels"] = json!(levels);
    summary["constants"] = json!([constant(
        "max_tower_defect",
        worst,
        Some(1e-12),
        violation.is_none()
    )]);
    Ok(Outcome {
        csv,
        summary,
        violation,
    })
}
