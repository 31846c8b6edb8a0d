//! The `privseg` command line.
//!
//! Every subcommand reads one problem document, computes, and prints either
//! CSV (point lists) or JSON (reports). Nothing is printed until the whole
//! computation has succeeded. A failed command exits with 2 for bad input or
//! usage and with 3 when a solver gives up.

use std::ffi::OsString;
use std::io::{self, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::analysis::{diagnostics, extrema_curves_with, parse_beta_grid};
use crate::document::{Problem, ProblemDocument, SegmentEntry, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::geometry::{build_polytope, project_polygon_with, surplus_set_with, Solver};
use crate::measure::{shift_vector, DEFAULT_SAMPLES};
use crate::model::{total_surplus, uniform_monopoly, Segmentation, SurplusPoint};
use crate::oracle::{containment_report, enumerate_cloud};
use crate::polygon::SurplusPolygon;
use crate::pricing::{optimal_prices_for, pricing_regions, threshold_tstar, threshold_tstar_clamped, FULL_MASK};
use crate::render::{format_sig, points_csv, svg, Style};
use crate::segmentation::{merge_priced, segmentation_for_target, PricedPart};
use crate::simulation::{simulate, TieBreak, DEFAULT_TRIALS};

#[derive(Debug, Parser)]
#[command(name = "privseg", version, about = "Attainable surplus sets under randomized-response market privacy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Problem document, or `-` for stdin.
    #[arg(long, default_value = "-")]
    input: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo samples for the shift vector.
    #[arg(long)]
    samples: Option<usize>,
    /// Solve linear programs in exact rational arithmetic.
    #[arg(long)]
    exact: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pricing-region thresholds and feasibility.
    Regions(Common),
    /// The shift vector and region probabilities.
    Shift(Common),
    /// Vertices of the attainable set as CSV.
    Polygon {
        #[command(flatten)]
        common: Common,
        /// Print the set before the shift instead.
        #[arg(long)]
        prime: bool,
        /// Also write an SVG rendering.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// A segmentation attaining a given utility pair.
    Segment {
        #[command(flatten)]
        common: Common,
        /// Target as `consumer,producer`.
        #[arg(long, allow_hyphen_values = true)]
        target: String,
    },
    /// Privacy and comparative-statics diagnostics.
    Analyze(Common),
    /// Extremes of the attainable set along a grid of masking levels, as CSV.
    Curves {
        #[command(flatten)]
        common: Common,
        /// `start:stop:step`, inclusive.
        #[arg(long)]
        beta_grid: Option<String>,
    },
    /// Monte Carlo run of the mechanism on the document's segmentation.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum, default_value_t = TieArg::UniformRandom)]
        tie: TieArg,
    },
    /// Brute-force lattice check of the attainable set.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Lattice denominator.
        #[arg(long)]
        lattice: u32,
        /// Write the cloud of lattice points here as CSV.
        #[arg(long)]
        cloud: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TieArg {
    Lowest,
    Highest,
    UniformRandom,
    Assigned,
}

impl From<TieArg> for TieBreak {
    fn from(t: TieArg) -> Self {
        match t {
            TieArg::Lowest => TieBreak::Lowest,
            TieArg::Highest => TieBreak::Highest,
            TieArg::UniformRandom => TieBreak::UniformRandom,
            TieArg::Assigned => TieBreak::Assigned,
        }
    }
}

/// What a successful command produces.
#[derive(Debug, Default)]
struct Output {
    stdout: String,
    files: Vec<(PathBuf, String)>,
}

/// Runs the command line against the process's standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdin = io::stdin();
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(args, &mut stdin.lock(), &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, input: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    let result = execute(&cli.command, input).and_then(|o| {
        for (path, body) in &o.files {
            std::fs::write(path, body).map_err(|e| Error::Invalid(format!("writing {}: {e}", path.display())))?;
        }
        Ok(o)
    });
    match result {
        Ok(o) => {
            if out.write_all(o.stdout.as_bytes()).and_then(|_| out.flush()).is_err() {
                return 3;
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                2
            } else {
                3
            }
        }
    }
}

struct Context {
    doc: ProblemDocument,
    problem: Problem,
    seed: u64,
    samples: usize,
    solver: Solver,
}

impl Context {
    fn load(common: &Common, input: &mut dyn Read) -> Result<Self> {
        let mut text = String::new();
        if common.input == "-" {
            input.read_to_string(&mut text).map_err(|e| Error::Invalid(format!("reading stdin: {e}")))?;
        } else {
            text = std::fs::read_to_string(&common.input)
                .map_err(|e| Error::Invalid(format!("reading {}: {e}", common.input)))?;
        }
        let doc = ProblemDocument::from_json(&text)?;
        let problem = doc.problem()?;
        let samples = common.samples.or(doc.samples).unwrap_or(DEFAULT_SAMPLES);
        if samples == 0 {
            return Err(Error::Invalid("samples must be positive".into()));
        }
        Ok(Context {
            seed: common.seed.or(doc.seed).unwrap_or(0),
            samples,
            solver: if common.exact { Solver::Exact } else { Solver::Float },
            doc,
            problem,
        })
    }

    /// JSON object echoing the problem, with `body`'s fields merged in.
    fn report<T: Serialize>(&self, body: &T) -> Result<String> {
        let mut map = Map::new();
        map.insert("schema".into(), SCHEMA_VERSION.into());
        map.insert("values".into(), self.doc.values.clone().into());
        map.insert("aggregate".into(), self.doc.aggregate.clone().into());
        map.insert("beta".into(), self.doc.beta.into());
        let body = serde_json::to_value(body).map_err(|e| Error::Numerical(e.to_string()))?;
        match body {
            Value::Object(fields) => map.extend(fields),
            other => {
                map.insert("result".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(map)).map_err(|e| Error::Numerical(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }
}

fn execute(command: &Command, input: &mut dyn Read) -> Result<Output> {
    match command {
        Command::Regions(common) => regions(&Context::load(common, input)?),
        Command::Shift(common) => {
            let cx = Context::load(common, input)?;
            let p = &cx.problem;
            let shift = shift_vector(p.beta, &p.x_star, &p.grid, cx.samples, cx.seed)?;
            Ok(Output { stdout: cx.report(&shift)?, ..Default::default() })
        }
        Command::Polygon { common, prime, svg } => polygon(&Context::load(common, input)?, *prime, svg.clone()),
        Command::Segment { common, target } => segment(&Context::load(common, input)?, target),
        Command::Analyze(common) => {
            let cx = Context::load(common, input)?;
            let p = &cx.problem;
            let shift = shift_vector(p.beta, &p.x_star, &p.grid, cx.samples, cx.seed)?;
            let d = diagnostics(&p.grid, &p.x_star, p.beta, &shift)?;
            Ok(Output { stdout: cx.report(&d)?, ..Default::default() })
        }
        Command::Curves { common, beta_grid } => curves(&Context::load(common, input)?, beta_grid.as_deref()),
        Command::Simulate { common, trials, tie } => simulate_cmd(&Context::load(common, input)?, *trials, (*tie).into()),
        Command::Oracle { common, lattice, cloud } => oracle(&Context::load(common, input)?, *lattice, cloud.clone()),
    }
}

fn regions(cx: &Context) -> Result<Output> {
    #[derive(Serialize)]
    struct Body {
        bar_beta: Vec<f64>,
        feasible: Vec<bool>,
        /// Two values only; absent at full masking.
        threshold: Option<f64>,
        threshold_clamped: Option<f64>,
    }
    let p = &cx.problem;
    let r = pricing_regions(&p.grid, p.beta)?;
    let eta = p.grid.eta();
    let body = Body {
        bar_beta: r.bar_beta,
        feasible: r.feasible,
        threshold: eta.and_then(|e| threshold_tstar(e, p.beta).ok()),
        threshold_clamped: eta.map(|e| threshold_tstar_clamped(e, p.beta)).transpose()?,
    };
    Ok(Output { stdout: cx.report(&body)?, ..Default::default() })
}

/// The non-private set for the same aggregate.
fn reference_triangle(p: &Problem) -> Result<SurplusPolygon> {
    let (_, uniform) = uniform_monopoly(&p.x_star, &p.grid)?;
    let total = total_surplus(&p.x_star, &p.grid)?;
    Ok(SurplusPolygon::from_points(&[
        SurplusPoint::new(0.0, uniform),
        SurplusPoint::new(0.0, total),
        SurplusPoint::new(total - uniform, uniform),
    ]))
}

fn polygon(cx: &Context, prime: bool, svg_path: Option<PathBuf>) -> Result<Output> {
    let p = &cx.problem;
    let shift = shift_vector(p.beta, &p.x_star, &p.grid, cx.samples, cx.seed)?;
    let s = surplus_set_with(&p.grid, &p.x_star, p.beta, &shift, cx.solver)?;
    let s_prime = if p.beta < FULL_MASK {
        Some(project_polygon_with(&build_polytope(&p.grid, &p.x_star, p.beta)?, cx.solver)?)
    } else {
        None
    };
    let printed = if prime {
        s_prime.as_ref().ok_or_else(|| Error::Invalid("the unshifted set is undefined at full masking".into()))?
    } else {
        &s
    };
    let mut out = Output { stdout: points_csv(printed.vertices()), ..Default::default() };
    if let Some(path) = svg_path {
        let reference = reference_triangle(p)?;
        let mut layers = vec![(&reference, Style::Dashed, "no privacy")];
        if let Some(sp) = &s_prime {
            layers.push((sp, Style::Faint, "before shift"));
        }
        layers.push((&s, Style::Solid, "attainable"));
        out.files.push((path, svg(&layers)));
    }
    Ok(out)
}

fn parse_target(text: &str) -> Result<SurplusPoint> {
    let parts: Vec<&str> = text.split(',').collect();
    let [c, p] = parts.as_slice() else {
        return Err(Error::Invalid(format!("target '{text}' is not consumer,producer")));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Invalid(format!("bad number '{s}' in target")))
    };
    Ok(SurplusPoint::new(num(c)?, num(p)?))
}

fn segment(cx: &Context, target: &str) -> Result<Output> {
    #[derive(Serialize)]
    struct Body {
        target: SurplusPoint,
        achieved: SurplusPoint,
        segmentation: Vec<SegmentEntry>,
    }
    let target = parse_target(target)?;
    let p = &cx.problem;
    let shift = shift_vector(p.beta, &p.x_star, &p.grid, cx.samples, cx.seed)?;
    let (seg, achieved) = segmentation_for_target(&p.grid, &p.x_star, p.beta, &shift, target, cx.solver)?;
    let body = Body { target, achieved, segmentation: seg.parts.iter().map(SegmentEntry::from).collect() };
    Ok(Output { stdout: cx.report(&body)?, ..Default::default() })
}

fn curves(cx: &Context, flag: Option<&str>) -> Result<Output> {
    let spec = flag
        .or(cx.doc.beta_grid.as_deref())
        .ok_or_else(|| Error::Invalid("curves needs --beta-grid or a beta_grid field".into()))?;
    let betas = parse_beta_grid(spec)?;
    let p = &cx.problem;
    let rows = extrema_curves_with(&p.grid, &p.x_star, &betas, cx.samples, cx.seed, cx.solver)?;
    let opt = |v: Option<f64>| v.map(format_sig).unwrap_or_default();
    let mut text = String::from(
        "beta,max_producer,min_producer,max_consumer,min_consumer,closed_max_producer,closed_min_consumer\n",
    );
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            format_sig(r.beta),
            format_sig(r.max_producer),
            format_sig(r.min_producer),
            format_sig(r.max_consumer),
            format_sig(r.min_consumer),
            opt(r.closed_max_producer),
            opt(r.closed_min_consumer),
        ));
    }
    Ok(Output { stdout: text, ..Default::default() })
}

fn simulate_cmd(cx: &Context, trials: Option<usize>, tie: TieBreak) -> Result<Output> {
    let p = &cx.problem;
    let segments = cx
        .doc
        .segments(&p.grid)?
        .ok_or_else(|| Error::Invalid("simulate needs a segmentation in the document".into()))?;
    // checks the parts average back to the aggregate
    Segmentation::new(segments.iter().map(|(g, m, _)| (*g, m.clone())).collect(), &p.x_star)?;
    let parts = segments
        .into_iter()
        .map(|(weight, market, price)| {
            let price = price.unwrap_or_else(|| optimal_prices_for(market.mass(), p.beta, &p.grid)[0]);
            PricedPart { weight, market, price }
        })
        .collect();
    let seg = merge_priced(parts, p.beta, &p.grid)?;
    let trials = trials.or(cx.doc.trials).unwrap_or(DEFAULT_TRIALS);
    let shift = shift_vector(p.beta, &p.x_star, &p.grid, cx.samples, cx.seed)?;
    let report = simulate(&seg, p.beta, &p.grid, trials, cx.seed, tie, &shift)?;
    Ok(Output { stdout: cx.report(&report)?, ..Default::default() })
}

fn oracle(cx: &Context, lattice: u32, cloud_path: Option<PathBuf>) -> Result<Output> {
    #[derive(Serialize)]
    struct Body {
        denominator: u32,
        candidates: u64,
        capped: bool,
        points: usize,
        violations: usize,
        max_excess: Option<f64>,
    }
    let p = &cx.problem;
    let shift = shift_vector(p.beta, &p.x_star, &p.grid, cx.samples, cx.seed)?;
    let cloud = enumerate_cloud(&p.grid, &p.x_star, p.beta, lattice, &shift)?;
    let s = surplus_set_with(&p.grid, &p.x_star, p.beta, &shift, cx.solver)?;
    let r = containment_report(&cloud, &s);
    let body = Body {
        denominator: cloud.denominator,
        candidates: cloud.candidates,
        capped: cloud.capped,
        points: r.points,
        violations: r.violations,
        max_excess: r.max_excess,
    };
    let mut out = Output { stdout: cx.report(&body)?, ..Default::default() };
    if let Some(path) = cloud_path {
        out.files.push((path, points_csv(&cloud.points)));
    }
    Ok(out)
}
