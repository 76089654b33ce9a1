//! Command-line front end: parses problem files, dispatches subcommands,
//! and writes profiles, coefficients, solutions, and sweep reports to disk.
//!
//! Exit codes: 0 on success / all checks passing; `verify` exits with the
//! number of failed checks; hard errors exit 1 (2 for usage).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use layerlab::asymptotics;
use layerlab::geometry::DomainGeometry;
use layerlab::grid::{RadialGrid, DEFAULT_GRID_N};
use layerlab::nonlinearity::NonlocalProblem;
use layerlab::problem_file;
use layerlab::profiles::{LayerProfiles, ProfileOptions};
use layerlab::solver;
use layerlab::verification::{self, DEFAULT_EPS_GRID};

#[derive(Parser)]
#[command(
    name = "layerlab",
    version,
    about = "Boundary-layer laboratory for nonlocally diffusive elliptic problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a problem file and print the validation report.
    Validate(CommonArgs),
    /// Build the layer profiles and write them as CSV.
    Profiles(CommonArgs),
    /// Compute the expansion coefficients and write them as JSON.
    Expand(CommonArgs),
    /// Solve the nonlocal problem at one eps; write field and summary.
    Solve(CommonArgs),
    /// Solve over an eps list; write per-eps solutions and residuals.
    Sweep(CommonArgs),
    /// Run the full verification suite; exit code = failed checks.
    Verify(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Problem file (flat key-value format).
    #[arg(long)]
    problem: PathBuf,
    /// Perturbation parameter for `solve`.
    #[arg(long)]
    eps: Option<f64>,
    /// Comma-separated eps list for `sweep`/`verify` (default
    /// 0.1,0.05,0.025,0.0125).
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    /// Radial grid size (default 2049).
    #[arg(long)]
    grid_n: Option<usize>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Field-data format for `solve`/`sweep`.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

struct Loaded {
    problem: NonlocalProblem,
    domain: DomainGeometry,
    fixture: String,
    eps: Option<f64>,
    eps_list: Vec<f64>,
    grid_n: usize,
    out: PathBuf,
    format: Format,
}

fn load(args: &CommonArgs) -> Result<Loaded, String> {
    let text = fs::read_to_string(&args.problem)
        .map_err(|e| format!("cannot read {}: {e}", args.problem.display()))?;
    let (problem, domain) = problem_file::parse(&text).map_err(|e| e.to_string())?;
    let fixture = args
        .problem
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "problem".into());
    let eps_list = args
        .eps_list
        .clone()
        .unwrap_or_else(|| DEFAULT_EPS_GRID.to_vec());
    if eps_list.iter().any(|&e| e <= 0.0) {
        return Err("eps values must be positive".into());
    }
    if let Some(e) = args.eps {
        if e <= 0.0 {
            return Err("eps must be positive".into());
        }
    }
    Ok(Loaded {
        problem,
        domain,
        fixture,
        eps: args.eps,
        eps_list,
        grid_n: args.grid_n.unwrap_or(DEFAULT_GRID_N),
        out: args.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        format: args.format,
    })
}

fn write(out_dir: &PathBuf, name: &str, contents: &str) -> Result<PathBuf, String> {
    fs::create_dir_all(out_dir).map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    let path = out_dir.join(name);
    fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Validate(args) => {
            // Parse without the implicit validation short-circuit so the
            // report is printed even for rejected problems.
            let text = fs::read_to_string(&args.problem)
                .map_err(|e| format!("cannot read {}: {e}", args.problem.display()))?;
            match problem_file::parse(&text) {
                Ok((problem, domain)) => {
                    let report = problem.validate();
                    println!("problem: {}", args.problem.display());
                    println!("domain:  {} (N = {})", domain.kind_name(), domain.dim);
                    println!("ok: {}", report.ok);
                    println!("inf f' on [0, b0]: {:.6e}", report.inf_fprime);
                    println!(
                        "A range on q-range: [{:.6e}, {:.6e}]",
                        report.a_range.0, report.a_range.1
                    );
                    println!(
                        "monotone uniqueness case: {:?}",
                        report.monotone_uniqueness_case
                    );
                    for msg in &report.messages {
                        println!("note: {msg}");
                    }
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    println!("rejected: {e}");
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Profiles(args) => {
            let cfg = load(&args)?;
            let profiles = LayerProfiles::build(&cfg.problem, &ProfileOptions::default())
                .map_err(|e| e.to_string())?;
            let path = write(&cfg.out, "profiles.csv", &profiles.to_csv())?;
            println!(
                "b* = {:.12}, A0 = {:.12}, M0 = {:.6}, M~ = {:.6}, tail rate = {:.6}",
                profiles.b_star,
                profiles.a0,
                profiles.rates.m0,
                profiles.rates.m_tilde,
                profiles.tail_rate
            );
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Expand(args) => {
            let cfg = load(&args)?;
            let profiles = LayerProfiles::build(&cfg.problem, &ProfileOptions::default())
                .map_err(|e| e.to_string())?;
            let coeffs = asymptotics::b_coefficients(&cfg.problem, &profiles, &cfg.domain);
            let json = coeffs.to_json();
            let path = write(&cfg.out, "coefficients.json", &json)?;
            println!("{json}");
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve(args) => {
            let cfg = load(&args)?;
            let eps = cfg.eps.ok_or("solve requires --eps")?;
            let profiles = LayerProfiles::build(&cfg.problem, &ProfileOptions::default())
                .map_err(|e| e.to_string())?;
            let grid = RadialGrid::for_domain(&cfg.domain, cfg.grid_n, eps);
            let sol = solver::solve_nonlocal(&cfg.problem, &cfg.domain, eps, &grid, &profiles)
                .map_err(|e| e.to_string())?;
            let field_path = match cfg.format {
                Format::Csv => write(&cfg.out, "solution.csv", &sol.field_csv())?,
                Format::Json => write(&cfg.out, "solution_field.json", &field_json(&sol))?,
            };
            let summary = sol.summary_json();
            let summary_path = write(&cfg.out, "solution.json", &summary)?;
            println!("{summary}");
            println!(
                "wrote {} and {}",
                field_path.display(),
                summary_path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(args) => {
            let cfg = load(&args)?;
            let profiles = LayerProfiles::build(&cfg.problem, &ProfileOptions::default())
                .map_err(|e| e.to_string())?;
            let coeffs = asymptotics::b_coefficients(&cfg.problem, &profiles, &cfg.domain);
            let q0 = cfg.problem.q.value(0.0);
            let mut rows = String::from(
                "eps,theta_of_eps,B_eps,dnu_boundary,res_B1,res_B2,res_boundary_dnu\n",
            );
            for (i, &eps) in cfg.eps_list.iter().enumerate() {
                let grid = RadialGrid::for_domain(&cfg.domain, cfg.grid_n, eps);
                let sol = solver::solve_nonlocal(&cfg.problem, &cfg.domain, eps, &grid, &profiles)
                    .map_err(|e| e.to_string())?;
                let (_, dnu_pred, _) = asymptotics::predict_boundary(
                    &cfg.problem,
                    &profiles,
                    &coeffs,
                    eps,
                    layerlab::geometry::BoundaryComponent::Outer,
                );
                let res_b1 = (sol.b_eps - q0 - eps * coeffs.b1).abs();
                let res_b2 = (sol.b_eps - q0 - eps * coeffs.b1 - eps * eps * coeffs.b2).abs();
                let res_dnu = (sol.dnu_boundary - dnu_pred).abs();
                rows.push_str(&format!(
                    "{eps:.17e},{:.17e},{:.17e},{:.17e},{res_b1:.17e},{res_b2:.17e},{res_dnu:.17e}\n",
                    sol.theta_of_eps, sol.b_eps, sol.dnu_boundary
                ));
                let field_name = match cfg.format {
                    Format::Csv => format!("solution-{i}.csv"),
                    Format::Json => format!("solution-{i}.json"),
                };
                let contents = match cfg.format {
                    Format::Csv => sol.field_csv(),
                    Format::Json => field_json(&sol),
                };
                write(&cfg.out, &field_name, &contents)?;
            }
            let path = write(&cfg.out, "sweep.csv", &rows)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            let cfg = load(&args)?;
            let report = verification::verify_all(
                &cfg.fixture,
                &cfg.problem,
                &cfg.domain,
                &cfg.eps_list,
                cfg.grid_n,
            );
            print!("{}", report.to_table());
            write(&cfg.out, "report.json", &report.to_json())?;
            write(&cfg.out, "residuals.csv", &report.residuals_csv())?;
            let failed = report.failed();
            println!(
                "{} checks, {} failed; wrote {}/report.json",
                report.results.len(),
                failed,
                cfg.out.display()
            );
            Ok(ExitCode::from(failed.min(255) as u8))
        }
    }
}

fn field_json(sol: &layerlab::solver::NonlocalSolution) -> String {
    let rs: Vec<String> = sol.r.iter().map(|x| format!("{x:.17e}")).collect();
    let us: Vec<String> = sol.u.iter().map(|x| format!("{x:.17e}")).collect();
    format!(
        "{{\n  \"r\": [{}],\n  \"u\": [{}]\n}}\n",
        rs.join(", "),
        us.join(", ")
    )
}
