use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};

use islm_core::dynamics::{attribute_jumps, detect_cycle, JumpEvent, Mode, Trajectory};
use islm_core::geometry::{equilibria_on, lm_roots, trace_lm_isocline, Equilibrium, FoldKind, LmIsocline};
use islm_core::io::config::{Format, RunConfig};
use islm_core::io::output::{emit_outputs, Provenance, ResultDoc};
use islm_core::io::svg::{render, Portrait};
use islm_core::policy::{
    apply_scenario, plan_stabilization, probe_run, run_with_controller, RunSettings, Scenario, ScenarioRun,
};
use islm_core::validate::validate_properties;
use islm_core::{presets, Error, ModelSpec};

#[derive(Parser, Debug)]
#[command(name = "islm", version, about = "IS-LM slow-fast dynamics with liquidity traps")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML). Defaults to the built-in reference economy.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Comma-separated output formats: csv, json, svg.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Option<Vec<Format>>,

    /// Simulation mode: full or reduced.
    #[arg(long, global = true)]
    mode: Option<Mode>,

    /// Override the time-scale ratio of the model.
    #[arg(long, global = true, allow_negative_numbers = true)]
    epsilon: Option<f64>,

    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Check the sign conditions of the behavioural functions on a grid.
    Validate,
    /// Trace the LM isocline: branches, stability and folds.
    Isocline,
    /// Locate and classify the equilibria.
    Equilibria,
    /// Integrate the system (full) or follow the isocline with jumps (reduced).
    Simulate,
    /// Run the configured intervention schedule.
    Scenario,
    /// Plan a monetary step that suppresses the jump on a fiscal ramp.
    Stabilize,
    /// Phase portrait with the configured scenario or simulation overlaid.
    Portrait,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Isocline => "isocline",
            Command::Equilibria => "equilibria",
            Command::Simulate => "simulate",
            Command::Scenario => "scenario",
            Command::Stabilize => "stabilize",
            Command::Portrait => "portrait",
        }
    }
}

/// What a command produced.
struct Outcome {
    doc: ResultDoc,
    trajectory: Option<Trajectory>,
    svg: Option<String>,
    /// Validation failed, but the report is still written.
    failed: bool,
}

struct Ctx {
    cfg: RunConfig,
    spec: ModelSpec,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn settings(&self, mode: Mode) -> RunSettings {
        let mut set = RunSettings::new(mode, self.cfg.domain);
        set.integrate = self.cfg.simulate.solver;
        set.detect = self.cfg.detect;
        set
    }

    fn isocline(&self) -> Result<LmIsocline, Error> {
        trace_lm_isocline(&self.spec, &self.cfg.domain, &self.cfg.isocline)
    }

    fn portrait(
        &self,
        iso: Option<&LmIsocline>,
        eq: &[Equilibrium],
        traj: Option<&Trajectory>,
        jumps: &[JumpEvent],
        title: &str,
    ) -> Option<String> {
        self.cfg.output.formats.contains(&Format::Svg).then(|| {
            render(&Portrait {
                spec: &self.spec,
                domain: self.cfg.domain,
                isocline: iso,
                equilibria: eq,
                trajectory: traj,
                jumps,
                title,
            })
        })
    }
}

fn load(cli: &Cli) -> Result<Ctx, Error> {
    let (mut cfg, base) = match &cli.config {
        Some(path) => {
            let cfg = islm_core::io::config::parse_config(path)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (cfg, base)
        }
        None => (RunConfig::from_toml(presets::REFERENCE_TOML, "built-in reference")?, PathBuf::new()),
    };
    let mut spec = cfg.resolve_model(&base)?;
    if let Some(eps) = cli.epsilon {
        spec.params.epsilon = eps;
        spec.validate().map_err(|e| match e {
            Error::InvalidParameter { reason, .. } => Error::Config {
                path: "--epsilon".into(),
                message: reason,
            },
            other => other,
        })?;
    }
    if let Some(mode) = cli.mode {
        cfg.simulate.mode = mode;
        cfg.stabilize.mode = mode;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.display().to_string();
    }
    if let Some(formats) = &cli.format {
        cfg.output.formats = formats.clone();
    }
    // echo the economy actually used, overrides included
    cfg.model = Some(spec.clone());
    cfg.model_path = None;
    cfg.validate()?;
    Ok(Ctx {
        cfg,
        spec,
        quiet: cli.quiet,
    })
}

fn validate(ctx: &Ctx) -> Result<Outcome, Error> {
    let report = validate_properties(&ctx.spec, &ctx.cfg.domain, ctx.cfg.validate.grid_n);
    for c in &report.checks {
        let status = if c.passed { "ok  " } else { "FAIL" };
        ctx.say(format!("{status} {} ({} violations, {} degenerate)", c.name, c.violations, c.degenerate));
    }
    let failed = !report.passed;
    let mut doc = ResultDoc::new("validate");
    doc.validation = Some(report);
    Ok(Outcome {
        doc,
        trajectory: None,
        svg: None,
        failed,
    })
}

fn isocline(ctx: &Ctx, with_equilibria: bool) -> Result<Outcome, Error> {
    let iso = ctx.isocline()?;
    ctx.say(format!(
        "{} branches, {} folds, at most {} rates per income",
        iso.branches.len(),
        iso.folds.len(),
        iso.max_branch_count
    ));
    for f in &iso.folds {
        ctx.say(format!("  fold {:?} at Y = {:.9}, R = {:.9}", f.kind, f.y, f.r));
    }
    let eq = if with_equilibria {
        let eq = equilibria_on(&ctx.spec, &iso, &ctx.cfg.isocline);
        for e in &eq {
            ctx.say(format!("  equilibrium Y = {:.9}, R = {:.9}: {:?}", e.y, e.r, e.classification));
        }
        eq
    } else {
        Vec::new()
    };
    let (command, title) = if with_equilibria {
        ("equilibria", "Equilibria")
    } else {
        ("isocline", "LM isocline")
    };
    let svg = ctx.portrait(Some(&iso), &eq, None, &[], title);
    let mut doc = ResultDoc::new(command);
    doc.isocline = Some(iso);
    if with_equilibria {
        doc.equilibria = Some(eq);
    }
    Ok(Outcome {
        doc,
        trajectory: None,
        svg,
        failed: false,
    })
}

/// Starting rate: the configured one, else the lowest LM root at `y0`.
fn start_rate(ctx: &Ctx) -> Result<f64, Error> {
    if let Some(r) = ctx.cfg.simulate.r0 {
        return Ok(r);
    }
    let y0 = ctx.cfg.simulate.y0;
    lm_roots(y0, &ctx.spec, ctx.cfg.domain.r_range(), ctx.cfg.isocline.scan_n)?
        .first()
        .copied()
        .ok_or_else(|| Error::NoSolution(format!("no LM root at Y = {y0} inside the rate domain")))
}

fn run(ctx: &Ctx, scenario: &Scenario) -> Result<(ScenarioRun, LmIsocline), Error> {
    let iso = ctx.isocline()?;
    let r0 = start_rate(ctx)?;
    let set = ctx.settings(ctx.cfg.simulate.mode);
    info!("{:?} run from Y = {}, R = {r0} to t = {}", set.mode, ctx.cfg.simulate.y0, scenario.horizon);
    let mut run = apply_scenario(&ctx.spec, scenario, ctx.cfg.simulate.y0, r0, &set)?;
    attribute_jumps(&ctx.spec, &iso, &mut run.jumps);
    Ok((run, iso))
}

fn report_jumps(ctx: &Ctx, jumps: &[JumpEvent]) {
    ctx.say(format!("{} jumps", jumps.len()));
    for j in jumps {
        ctx.say(format!(
            "  {:?} at Y = {:.6}: R {:.6} -> {:.6}{}",
            j.direction,
            j.y_at_jump,
            j.r_from,
            j.r_to,
            j.arcs.map_or(String::new(), |[a, b]| format!(" (arc {a} -> {b})"))
        ));
    }
}

fn simulate(ctx: &Ctx, command: Command) -> Result<Outcome, Error> {
    let scenario = match (command, &ctx.cfg.scenario) {
        (Command::Scenario, None) => {
            return Err(Error::Config {
                path: "config".into(),
                message: "`scenario` needs a [scenario] table".into(),
            })
        }
        (Command::Scenario | Command::Portrait, Some(s)) => s.clone(),
        _ => Scenario {
            horizon: ctx.cfg.simulate.t_end,
            steps: Vec::new(),
        },
    };
    let (run, iso) = run(ctx, &scenario)?;
    let cycle = detect_cycle(&run.trajectory, &ctx.cfg.detect);
    ctx.say(format!("{} samples", run.trajectory.len()));
    report_jumps(ctx, &run.jumps);
    if let Some(c) = &cycle {
        ctx.say(format!(
            "cycle: period {:.6}, {:?}, R in [{:.6}, {:.6}]",
            c.period, c.orientation, c.r_min, c.r_max
        ));
    }
    let eq = if command == Command::Portrait {
        equilibria_on(&ctx.spec, &iso, &ctx.cfg.isocline)
    } else {
        Vec::new()
    };
    let svg = ctx.portrait(Some(&iso), &eq, Some(&run.trajectory), &run.jumps, command.name());
    let mut doc = ResultDoc::new(command.name());
    doc.spec_id = Some(run.trajectory.spec_id.clone());
    doc.cycle = cycle;
    if command != Command::Simulate {
        let probe = probe_run(&run, &ctx.cfg.detect);
        if !probe.crossings.is_empty() {
            ctx.say(format!("{} jumps cross R = 0", probe.crossings.len()));
        }
        doc.probe = Some(probe);
        doc.log = Some(run.log);
    }
    if command == Command::Portrait {
        doc.isocline = Some(iso);
        doc.equilibria = Some(eq);
    }
    doc.jumps = Some(run.jumps);
    Ok(Outcome {
        doc,
        trajectory: Some(run.trajectory),
        svg,
        failed: false,
    })
}

fn stabilize(ctx: &Ctx) -> Result<Outcome, Error> {
    let opts = &ctx.cfg.stabilize;
    let iso = ctx.isocline()?;
    let fold = match opts.fold_y {
        Some(y) => iso
            .folds
            .iter()
            .min_by(|a, b| (a.y - y).abs().total_cmp(&(b.y - y).abs()))
            .copied(),
        None => iso.folds.iter().find(|f| f.kind == FoldKind::LowerKnee).copied(),
    }
    .ok_or_else(|| Error::NoSolution("the isocline has no fold to guard".into()))?;
    ctx.say(format!("guarding fold {:?} at Y = {:.6}, R = {:.6}", fold.kind, fold.y, fold.r));
    let plan = plan_stabilization(&ctx.spec, &ctx.cfg.domain, &fold, opts.instrument, opts.margin)?;
    ctx.say(format!("{:?} step {:.9} lands the jump target {:.6}", plan.instrument, plan.delta, plan.target_rate));
    let set = ctx.settings(opts.mode);
    let rep = run_with_controller(&ctx.spec, &opts.ramp, &plan, &set)?;
    ctx.say(format!(
        "jumps without control {}, with control {}; max |R - R_pre| = {:.6}{}",
        rep.uncontrolled.jump_count,
        rep.controlled.jump_count,
        rep.max_deviation,
        if rep.late { " (fired late)" } else { "" }
    ));
    if rep.late {
        warn!("controller fired after the fold was reached");
    }
    let svg = ctx.portrait(
        Some(&iso),
        &[],
        Some(&rep.controlled.trajectory),
        &rep.controlled.jumps,
        "Stabilized fiscal ramp",
    );
    let mut doc = ResultDoc::new("stabilize");
    doc.spec_id = Some(rep.controlled.trajectory.spec_id.clone());
    doc.plan = Some(rep.plan.clone());
    doc.jumps = Some(rep.controlled.jumps.clone());
    let trajectory = rep.controlled.trajectory.clone();
    doc.controller = Some(rep);
    Ok(Outcome {
        doc,
        trajectory: Some(trajectory),
        svg,
        failed: false,
    })
}

fn execute(cli: &Cli) -> Result<bool, Error> {
    let ctx = load(cli)?;
    let out = match cli.command {
        Command::Validate => validate(&ctx)?,
        Command::Isocline => isocline(&ctx, false)?,
        Command::Equilibria => isocline(&ctx, true)?,
        Command::Simulate | Command::Scenario | Command::Portrait => simulate(&ctx, cli.command)?,
        Command::Stabilize => stabilize(&ctx)?,
    };
    let prov = Provenance::new(cli.command.name(), &ctx.cfg);
    let dir = PathBuf::from(&ctx.cfg.output.dir);
    let written = emit_outputs(
        &dir,
        &ctx.cfg.output.formats,
        &out.doc,
        out.trajectory.as_ref(),
        out.svg.as_deref(),
        &prov,
    )?;
    for p in written {
        info!("wrote {}", p.display());
    }
    Ok(!out.failed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let default_level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ISLM_LOG", default_level))
        .format_timestamp(None)
        .init();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
