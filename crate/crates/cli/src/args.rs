use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use staticbound::{AmbientPoint, ModelKind, RadialProfile, SpaceForm};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "STATICBOUND_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "staticbound",
    version,
    about = "Boundary inequality and weighted Reilly identity checks on space forms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a surface or ball mesh and save it.
    Mesh(MeshArgs),
    /// Evaluate the boundary inequality across levels.
    Ineq(IneqArgs),
    /// Check the weighted Reilly identity on ball meshes.
    Reilly(ReillyArgs),
    /// Solve the extension problem on ball meshes.
    Pde(PdeArgs),
    /// Convergence study of a surface quantity with a closed-form target.
    Converge(ConvergeArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value = "euclidean")]
    pub kind: ModelKind,
    /// Curvature magnitude of curved models.
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Base point in ambient coordinates, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub base: Option<Vec<f64>>,
}

impl ModelArgs {
    pub fn space_form(&self) -> staticbound::Result<SpaceForm> {
        let sf = SpaceForm::new(self.kind, self.kappa, 3)?;
        match &self.base {
            Some(b) => sf.with_base_point(AmbientPoint::from_slice(b)),
            None => Ok(sf),
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutputArgs {
    /// Output directory; defaults to $STATICBOUND_OUT_DIR, then `.`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Report file name inside the output directory.
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

impl OutputArgs {
    pub fn dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// `output` if absolute, else joined to the output directory.
    pub fn path(&self, default_name: &str) -> PathBuf {
        let name = self.output.clone().unwrap_or_else(|| PathBuf::from(default_name));
        if name.is_absolute() {
            name
        } else {
            self.dir().join(name)
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MeshArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "sphere:1")]
    pub profile: RadialProfile,
    #[arg(long, default_value_t = 3)]
    pub level: usize,
    /// Tetrahedral ball instead of a surface (Euclidean sphere profiles).
    #[arg(long)]
    pub ball: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct IneqArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "sphere:1")]
    pub profile: RadialProfile,
    #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
    pub levels: Vec<usize>,
    /// Evaluate on a mesh file instead of generated levels.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// `basis:a0,..,a3`, `coord:i`, `poly:D`, `file:PATH` or a catalog name
    /// (`x1`, `x1sq`, `r2`, `const:c`, ...).
    #[arg(long, default_value = "basis:0,1,0,0")]
    pub field: String,
    /// `static` or `thm4`.
    #[arg(long, default_value = "static")]
    pub variant: String,
    /// Curvature bound of the sectional variant; defaults to --kappa.
    #[arg(long)]
    pub thm4_kappa: Option<f64>,
    /// Constant k of the static variant; defaults to the model curvature.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random fields for `poly:D`.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0.5)]
    pub tol_factor: f64,
    /// Continuum value of the deficit, for the error column.
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ReillyArgs {
    #[arg(long = "f", default_value = "x1")]
    pub f: String,
    #[arg(long = "V", default_value = "one")]
    pub v: String,
    #[arg(long = "K", default_value_t = 0.0, allow_hyphen_values = true)]
    pub big_k: f64,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub levels: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PdeArgs {
    #[arg(long, default_value = "x1")]
    pub eta: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub k: f64,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub levels: Vec<usize>,
    /// Exact solution for the error table; inferred for `x1`-type affine
    /// data and for `x1sq` when k = 0.
    #[arg(long)]
    pub exact: Option<String>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Geodesic radius of the sphere.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// `area`, `mean-curvature`, `laplacian` or `deficit-x1sq`.
    #[arg(long, default_value = "area")]
    pub quantity: String,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    pub levels: Vec<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// Levels must be nonempty and strictly increasing.
pub fn check_levels(levels: &[usize]) -> staticbound::Result<()> {
    if levels.is_empty() {
        return Err(staticbound::Error::Usage("at least one level is required".into()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(staticbound::Error::Usage(format!(
            "levels {levels:?} are not increasing"
        )));
    }
    Ok(())
}
