//! Numerical laboratory for holomorphic families of endomorphisms of P^1 and
//! P^2: Green functions, equilibrium-measure sampling, Lyapunov sums,
//! bifurcation-current densities, Misiurewicz parameters, critical-mass
//! growth, cycle tracking and holomorphic motions of hyperbolic sets.
//!
//! Every family has one complex parameter λ. Types are immutable after
//! construction and all operations are safe to call from many threads.

pub mod bifurcation;
pub mod cvec;
pub mod error;
pub mod family;
pub mod green;
pub mod grid;
pub mod io;
pub mod lyapunov;
pub mod motion;
pub mod poly;
pub mod roots;
pub mod sampler;
pub mod seeds;

pub use bifurcation::{BifurcationDensity, MassGrowthReport, MisiurewiczHit, SupportMask};
pub use cvec::{CMat, CVec, C64};
pub use error::{Error, Result};
pub use family::{FamilyKind, FamilySpec, Lift, ProjPoint};
pub use green::{GreenEvaluator, GreenValue};
pub use grid::ParameterGrid;
pub use lyapunov::{LyapunovEstimate, LyapunovField, Method};
pub use motion::{Cycle, CycleClass, CycleTrack, MotionRecord};
pub use sampler::MeasureCloud;
