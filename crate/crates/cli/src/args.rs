use biflab_core::io::parse_complex;
use biflab_core::C64;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::str::FromStr;

/// A complex flag value written `re,im`. Stored in manifests with the
/// shortest round-tripping decimal form so replays see the same bits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cx(pub C64);

impl FromStr for Cx {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_complex(s).map(Cx).map_err(|_| format!("expected re,im but got {s:?}"))
    }
}

impl Serialize for Cx {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{},{}", self.0.re, self.0.im))
    }
}

impl<'de> Deserialize<'de> for Cx {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Points of C^k written `re,im;re,im`.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(pub Vec<C64>);

impl FromStr for Point {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(';').map(|p| p.parse::<Cx>().map(|c| c.0)).collect::<Result<_, _>>().map(Point)
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let parts: Vec<String> = self.0.iter().map(|z| format!("{},{}", z.re, z.im)).collect();
        s.serialize_str(&parts.join(";"))
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Parser, Debug)]
#[command(name = "biflab", version, about = "Bifurcation laboratory for holomorphic families on P^1 and P^2")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Green function at one point
    Green(GreenArgs),
    /// Sample the equilibrium measure by a backward walk
    Cloud(CloudArgs),
    /// Lyapunov sum at one parameter
    Lyap(LyapArgs),
    /// Lyapunov sums over a parameter grid
    LyapMap(MapArgs),
    /// Bifurcation density, image and support mask over a grid
    BifMap(BifArgs),
    /// Critical mass growth over a parameter disc
    MassGrowth(MassArgs),
    /// Periodic cycles of one period
    Cycles(CyclesArgs),
    /// Continue a cycle along a segment and locate multiplier crossings
    Track(TrackArgs),
    /// Holomorphic motion of repelling cycles
    Motion(MotionArgs),
    /// Search for Misiurewicz parameters
    Misiurewicz(MisArgs),
    /// Contraction of inverse branches along a backward orbit
    Contraction(ContractionArgs),
    /// Run the built-in example suite
    Selftest,
    /// Rerun the command recorded in a manifest
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FamilyArg {
    /// Family file, or builtin:NAME
    #[arg(long)]
    pub family: String,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OutArg {
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct GreenArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArg,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub lambda: Cx,
    /// k chart coordinates or k+1 homogeneous ones, separated by ';'
    #[arg(long, allow_hyphen_values = true)]
    pub z: Point,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArg,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CloudArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArg,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub lambda: Cx,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    /// przytycki for polynomial families on P^1, backward otherwise
    Auto,
    Backward,
    Przytycki,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    /// Samples per parameter (backward)
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 40)]
    pub walks: usize,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    /// Green tolerance (przytycki)
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct LyapArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArg,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub lambda: Cx,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArg,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct GridArgs {
    #[arg(long, default_value = "-0.75,0", allow_hyphen_values = true)]
    pub center: Cx,
    #[arg(long, default_value_t = 3.0)]
    pub width: f64,
    #[arg(long, default_value_t = 3.0)]
    pub height: f64,
    #[arg(long, default_value_t = 64)]
    pub nx: usize,
    #[arg(long, default_value_t = 64)]
    pub ny: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct MapArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArg,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArg,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct BifArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Support threshold in noise floors
    #[arg(long, default_value_t = 5.0)]
    pub threshold_factor: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct MassArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArg,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub center: Cx,
    #[arg(long, default_value_t = 0.05)]
    pub radius: f64,
    #[arg(long, default_value_t = 20)]
    pub n_max: usize,
    #[arg(long, default_value_t = 100)]
    pub n_theta: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArg,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CyclesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArg,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub lambda: Cx,
    #[arg(long, default_value_t = 1)]
    pub period: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArg,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TrackArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArg,
    #[arg(long, allow_hyphen_values = true)]
    pub from: Cx,
    #[arg(long, allow_hyphen_values = true)]
    pub to: Cx,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub period: usize,
    /// Start from the cycle through the periodic point nearest to this one
    #[arg(long, allow_hyphen_values = true)]
    pub near: Option<Point>,
    /// Cloud size for Julia-membership flags at crossings (0 = off)
    #[arg(long, default_value_t = 0)]
    pub membership_samples: usize,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArg,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct MotionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArg,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Cx,
    #[arg(long, default_value_t = 1)]
    pub period: usize,
    /// Only the cycle through the periodic point nearest to this one
    #[arg(long, allow_hyphen_values = true)]
    pub near: Option<Point>,
    #[arg(long, default_value_t = 0.01)]
    pub rho: f64,
    #[arg(long, default_value_t = 7)]
    pub lattice_n: usize,
    #[arg(long, default_value_t = 40)]
    pub n_steps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArg,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct MisArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArg,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 3)]
    pub n0_max: usize,
    #[arg(long, default_value_t = 2)]
    pub p_max: usize,
    /// Also check each hit against the density support within this many cells
    #[arg(long)]
    pub support_radius: Option<usize>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArg,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ContractionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArg,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub center: Cx,
    #[arg(long, default_value_t = 0.01)]
    pub radius: f64,
    #[arg(long, default_value_t = 3)]
    pub lattice_n: usize,
    #[arg(long, default_value_t = 30)]
    pub depth: usize,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 50)]
    pub probes: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub probe_radius: f64,
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArg,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
