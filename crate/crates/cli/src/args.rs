use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "mtensor", version, about = "Minkowski tensor estimation from point samples")]
pub struct Cli {
    /// Base seed; rendition i uses seed + i.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Independent grid realisations averaged per estimate.
    #[arg(long, global = true, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub renditions: u64,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Write the result document here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub json_out: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit all Phi_k^{r,s} of point clouds by least squares over a radius schedule.
    Estimate(EstimateArgs),
    /// Direct single-radius estimate of the surface tensor Phi_{d-1}^{r,s}.
    Surface(SurfaceArgs),
    /// Exact values for the analytic test bodies.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Write sample point clouds to a file.
    #[command(subcommand)]
    Sample(SampleCommand),
    /// Surface tensors of a height map, read from a grid file or synthesised.
    Heightfield(HeightfieldArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum FormatArg {
    Csv,
    VoxelMask,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Point files; several inputs run as independent jobs.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,

    /// Rank of the position part.
    #[arg(long, default_value_t = 0)]
    pub r: usize,

    /// Rank of the normal part.
    #[arg(long, default_value_t = 0)]
    pub s: usize,

    /// Number of radii.
    #[arg(long, default_value_t = 50)]
    pub n: usize,

    /// Largest radius R_n.
    #[arg(long, group = "outer")]
    pub rmax: Option<f64>,

    /// Observation window a1,b1,a2,b2[,a3,b3]; R_n is the distance from the data to its boundary.
    #[arg(long, group = "outer", value_delimiter = ',', num_args = 1..)]
    pub window: Option<Vec<f64>>,

    /// R_n as a multiple of R_1.
    #[arg(long, group = "outer")]
    pub rn_factor: Option<f64>,

    /// Smallest radius (default: average nearest-neighbour distance).
    #[arg(long)]
    pub r1: Option<f64>,

    /// Grid spacing (default: average nearest-neighbour distance).
    #[arg(long)]
    pub a: Option<f64>,

    /// Randomly rotate the grid in each rendition.
    #[arg(long)]
    pub rotate: bool,

    /// Skip inputs with fewer points.
    #[arg(long, default_value_t = 0)]
    pub min_points: usize,

    /// Add the raw Voronoi tensors of the first rendition to the output (one extra grid pass).
    #[arg(long)]
    pub dump_voronoi_series: bool,
}

#[derive(Args, Debug)]
pub struct SurfaceArgs {
    /// Point file.
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,

    /// Rank of the position part.
    #[arg(long, default_value_t = 0)]
    pub r: usize,

    /// Rank of the normal part.
    #[arg(long, default_value_t = 2)]
    pub s: usize,

    /// Neighbourhood radius.
    #[arg(long)]
    pub eps: f64,

    /// Grid spacing.
    #[arg(long)]
    pub a: f64,

    /// Randomly rotate the grid in each rendition.
    #[arg(long)]
    pub rotate: bool,

    /// Use the eps / eps^2 difference quotient (required for s = 0; needs a <= eps^2).
    #[arg(long)]
    pub difference: bool,
}

#[derive(Subcommand, Debug)]
pub enum OracleCommand {
    /// Axis-parallel box.
    Box {
        #[arg(long, value_delimiter = ',', required = true)]
        sides: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        center: Option<Vec<f64>>,
        /// Degree; all degrees when omitted.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        r: usize,
        #[arg(long, default_value_t = 0)]
        s: usize,
    },
    /// Spherical shell rho1 <= |x| <= rho2.
    Shell {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long)]
        rho1: f64,
        #[arg(long)]
        rho2: f64,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        r: usize,
        #[arg(long, default_value_t = 0)]
        s: usize,
    },
    /// Surface tensor of an outer rectangle with a centred rectangular hole.
    CutBox {
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1.0, 2.0])]
        inner: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [3.0, 5.0])]
        outer: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        r: usize,
        #[arg(long, default_value_t = 2)]
        s: usize,
    },
    /// Parallel set of a rectangle.
    RoundedBox {
        #[arg(long)]
        a1: f64,
        #[arg(long)]
        a2: f64,
        #[arg(long)]
        r0: f64,
    },
    /// Expected intrinsic volume E V_k of a beta-polytope (k = d by Monte Carlo).
    BetaEv {
        /// Dimension.
        #[arg(long)]
        d: usize,
        /// Number of random points.
        #[arg(long)]
        l: usize,
        /// Shape parameter, > -1.
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        /// Default d - 1.
        #[arg(long)]
        k: Option<usize>,
        /// Hull samples for k = d.
        #[arg(long, default_value_t = 1000)]
        hulls: usize,
    },
    /// Expected Phi_k^{0,s} of a beta-polytope.
    BetaTensor {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long)]
        s: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum SampleCommand {
    /// Lattice points a Z^d inside a box.
    Box {
        #[arg(long, value_delimiter = ',', required = true)]
        sides: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        center: Option<Vec<f64>>,
        #[command(flatten)]
        out: LatticeOut,
    },
    /// Lattice points inside a spherical shell.
    Shell {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long)]
        rho1: f64,
        #[arg(long)]
        rho2: f64,
        #[command(flatten)]
        out: LatticeOut,
    },
    /// Lattice points inside a rectangle with a centred rectangular hole.
    CutBox {
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1.0, 2.0])]
        inner: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [3.0, 5.0])]
        outer: Vec<f64>,
        #[command(flatten)]
        out: LatticeOut,
    },
    /// Lattice points inside the parallel set of a rectangle.
    RoundedBox {
        #[arg(long)]
        a1: f64,
        #[arg(long)]
        a2: f64,
        #[arg(long)]
        r0: f64,
        #[command(flatten)]
        out: LatticeOut,
    },
    /// The l random points of a beta-polytope (seeded by --seed).
    Beta {
        /// Dimension.
        #[arg(long)]
        d: usize,
        /// Number of random points.
        #[arg(long)]
        l: usize,
        /// Shape parameter, > -1.
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
        /// Lattice spacing; when given, writes the lattice points inside the hull instead.
        #[arg(long)]
        a: Option<f64>,
    },
}

#[derive(Args, Debug)]
pub struct LatticeOut {
    /// Lattice spacing.
    #[arg(long)]
    pub a: f64,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["input", "plane_slope"])))]
pub struct HeightfieldArgs {
    /// Whitespace or comma separated grid of heights, one row per line.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Synthesise the plane z = c x instead of reading a file.
    #[arg(long, allow_hyphen_values = true)]
    pub plane_slope: Option<f64>,

    /// Pixels per side of the synthetic plane.
    #[arg(long, default_value_t = 512)]
    pub pixels: usize,

    /// Lateral pixel pitch.
    #[arg(long)]
    pub pitch: f64,

    /// Factor applied to the stored heights.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,

    /// Number of radii.
    #[arg(long, default_value_t = 50)]
    pub n: usize,

    /// R_n as a multiple of R_1.
    #[arg(long, default_value_t = 24.0)]
    pub rn_factor: f64,

    /// Randomly rotate the grid in each rendition.
    #[arg(long)]
    pub rotate: bool,
}
