use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use polyvem::harness::{parse_switch, run_convergence_with, solve_case, CaseKind, ConvConfig, ConvergenceRow};
use polyvem::mesh::{gen_quad, gen_tria, gen_voronoi, read_mesh, write_mesh};
use polyvem::{ConvectionForm, Discretization, PolyMesh64, StabKind};

/// Exit status for invalid flags or configuration.
const EXIT_USAGE: u8 = 1;
/// Exit status for I/O, mesh, or solver failures.
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "polyvem", version, about = "SUPG-stabilized virtual elements for advection-diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        action: MeshAction,
    },
    /// Solve the model problem on one mesh and report errors.
    Solve(SolveArgs),
    /// Run convergence studies from a key = value configuration file.
    Conv(ConvArgs),
}

#[derive(Subcommand, Debug)]
enum MeshAction {
    /// Generate a mesh of the unit square.
    Gen(MeshGenArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MeshType {
    Quad,
    Tria,
    Voro,
    Rand,
}

#[derive(Args, Debug)]
struct MeshGenArgs {
    #[arg(long = "type", value_enum)]
    kind: MeshType,
    /// Cells per side (quad, tria).
    #[arg(long)]
    n: Option<usize>,
    /// Number of Voronoi seeds (voro, rand).
    #[arg(long)]
    seeds: Option<usize>,
    /// Lloyd iterations (voro).
    #[arg(long, default_value_t = 100)]
    lloyd: usize,
    #[arg(long, default_value_t = 1)]
    rng: u64,
    /// Random vertex perturbation as a fraction of the grid spacing (tria).
    #[arg(long, default_value_t = 0.0)]
    perturb: f64,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

fn switch(s: &str) -> Result<bool, String> {
    parse_switch("supg", s).map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value = "bounSkew")]
    form: ConvectionForm,
    #[arg(long, default_value = "on", value_parser = switch, action = ArgAction::Set)]
    supg: bool,
    #[arg(long, default_value = "dofiDofi")]
    stab: StabKind,
    #[arg(long = "tau-safety", default_value_t = 0.5)]
    tau_safety: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value = "paper")]
    case: CaseKind,
    /// Write the DoF vector, one value per line.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConvArgs {
    config: PathBuf,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    form: Option<String>,
    #[arg(long)]
    supg: Option<String>,
    #[arg(long)]
    stab: Option<String>,
    #[arg(long = "tau-safety")]
    tau_safety: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    rng: Option<String>,
    #[arg(long)]
    lloyd: Option<String>,
    #[arg(long)]
    case: Option<String>,
    #[arg(long = "out-dir")]
    out_dir: Option<String>,
    #[arg(long)]
    svg: Option<String>,
    /// Extra `key=value` overrides.
    overrides: Vec<String>,
}

impl ConvArgs {
    fn flag_overrides(&self) -> Vec<(&'static str, &str)> {
        [
            ("family", &self.family),
            ("levels", &self.levels),
            ("k", &self.k),
            ("eps", &self.eps),
            ("form", &self.form),
            ("supg", &self.supg),
            ("stab", &self.stab),
            ("tau_safety", &self.tau_safety),
            ("tol", &self.tol),
            ("rng", &self.rng),
            ("lloyd", &self.lloyd),
            ("case", &self.case),
            ("out_dir", &self.out_dir),
            ("svg", &self.svg),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn runtime(e: impl std::fmt::Display) -> Self {
        Self::Runtime(e.to_string())
    }

    fn usage(e: impl std::fmt::Display) -> Self {
        Self::Usage(e.to_string())
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("POLYVEM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("POLYVEM_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(Failure::runtime)
}

fn mesh_gen(a: &MeshGenArgs) -> Result<(), Failure> {
    let need = |v: Option<usize>, flag: &str| match v {
        Some(0) => Err(Failure::Usage(format!("--{flag} must be at least 1"))),
        Some(v) => Ok(v),
        None => Err(Failure::Usage(format!("--{flag} is required for this mesh type"))),
    };
    let mesh: PolyMesh64 = match a.kind {
        MeshType::Quad => gen_quad(need(a.n, "n")?),
        MeshType::Tria => {
            if !(0.0..0.3).contains(&a.perturb) {
                return Err(Failure::usage("--perturb must lie in [0, 0.3)"));
            }
            gen_tria(need(a.n, "n")?, a.perturb, a.rng)
        }
        MeshType::Voro => gen_voronoi(need(a.seeds, "seeds")?, a.lloyd, a.rng),
        MeshType::Rand => gen_voronoi(need(a.seeds, "seeds")?, 0, a.rng),
    }
    .map_err(Failure::runtime)?;
    fs::write(&a.output, write_mesh(&mesh)).map_err(|e| Failure::Runtime(format!("{}: {e}", a.output.display())))?;
    println!("wrote {} ({} cells, {} vertices)", a.output.display(), mesh.n_cells(), mesh.n_vertices());
    Ok(())
}

fn solve(a: &SolveArgs) -> Result<(), Failure> {
    if a.k == 0 {
        return Err(Failure::usage("--k must be at least 1"));
    }
    if !(a.eps > 0.0) {
        return Err(Failure::usage("--eps must be positive"));
    }
    if !(a.tau_safety > 0.0 && a.tau_safety <= 1.0) {
        return Err(Failure::usage("--tau-safety must lie in (0, 1]"));
    }
    if !(a.tol > 0.0) {
        return Err(Failure::usage("--tol must be positive"));
    }
    let text = fs::read_to_string(&a.mesh).map_err(|e| Failure::Runtime(format!("{}: {e}", a.mesh.display())))?;
    let mesh: PolyMesh64 = read_mesh(&text).map_err(Failure::runtime)?;
    let disc = Discretization::new(&mesh, a.k).map_err(Failure::runtime)?;
    let case = a.case.build::<f64>(a.k, a.eps);
    let spec = case.spec().with_form(a.form).with_supg(a.supg).with_stab(a.stab).with_tau_safety(a.tau_safety);
    let out = solve_case(&disc, &case, &spec, a.tol).map_err(Failure::runtime)?;
    println!("ndofs {}", disc.n_dofs());
    println!("eH1 {:.6e}", out.e_h1);
    println!("eC {:.6e}", out.e_c);
    println!("residual {:.3e}", out.residual);
    if let Some(path) = &a.dump {
        let mut s = String::with_capacity(out.solution.len() * 25);
        for v in &out.solution {
            s.push_str(&format!("{v:.17e}\n"));
        }
        fs::write(path, s).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn conv(a: &ConvArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&a.config).map_err(|e| Failure::Runtime(format!("{}: {e}", a.config.display())))?;
    let mut cfg = ConvConfig::parse(&text).map_err(Failure::usage)?;
    for (k, v) in a.flag_overrides() {
        cfg.set(k, v).map_err(Failure::usage)?;
    }
    for o in &a.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| Failure::Usage(format!("override '{o}' is not key=value")))?;
        cfg.set(k.trim(), v.trim()).map_err(Failure::usage)?;
    }
    let studies = cfg.studies().map_err(Failure::usage)?;
    let svg = cfg.svg().map_err(Failure::usage)?;
    let dir = Path::new(cfg.out_dir());
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;

    let mut failures = 0usize;
    for study in &studies {
        let path = dir.join(format!("{}.csv", study.name()));
        let file = File::create(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        let io_err = |e: std::io::Error| Failure::Runtime(format!("{}: {e}", path.display()));
        writeln!(w, "{}", ConvergenceRow::csv_header()).map_err(io_err)?;
        w.flush().map_err(io_err)?;
        let mut write_err = None;
        let result = run_convergence_with::<f64>(study, |row| {
            if let Some(msg) = &row.failure {
                eprintln!("{} level {}: {msg}", study.name(), row.level);
            }
            let r = writeln!(w, "{}", row.csv_line()).and_then(|_| w.flush());
            if let Err(e) = r {
                write_err.get_or_insert(e);
            }
        });
        if let Some(e) = write_err {
            return Err(io_err(e));
        }
        failures += result.rows.iter().filter(|r| r.failure.is_some()).count();
        if svg {
            let svg_path = dir.join(format!("{}.svg", study.name()));
            fs::write(&svg_path, result.to_svg())
                .map_err(|e| Failure::Runtime(format!("{}: {e}", svg_path.display())))?;
        }
        println!("{}", result.summary());
    }
    if failures > 0 {
        return Err(Failure::Runtime(format!("{failures} level(s) failed; see the CSV files for partial results")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let run = init_threads().and_then(|_| match &cli.command {
        Command::Mesh { action: MeshAction::Gen(a) } => mesh_gen(a),
        Command::Solve(a) => solve(a),
        Command::Conv(a) => conv(a),
    });
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
