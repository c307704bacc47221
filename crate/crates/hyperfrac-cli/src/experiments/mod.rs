//! One function per experiment kind. Each fills an [`Outputs`] with checks,
//! data files and a payload; writing the summary is left to the caller.

mod analysis;
mod inverse;
mod solver;

use hyperfrac::geometry::Dim;
use hyperfrac::solver::fem::FemBackend;
use hyperfrac::solver::radial::RadialBackend;
use hyperfrac::solver::{build_mesh, Discretization, MeshKind, Potential};

use crate::config::{BallPotential, Experiment, ExperimentConfig, MeshSection};
use crate::error::CliError;
use crate::output::Outputs;

pub fn run(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    match &cfg.experiment {
        Experiment::TransformCheck(c) => analysis::transform_check(c, out),
        Experiment::OperatorEquivalence(c) => analysis::operator_equivalence(c, out),
        Experiment::HeatkernelBounds(c) => analysis::heatkernel_bounds(c, out),
        Experiment::Entangle(c) => analysis::entangle(c, out),
        Experiment::Solve(c) => solver::solve(c, out),
        Experiment::Dn(c) => solver::dn(c, out),
        Experiment::IntegralIdentity(c) => solver::integral_identity(c, out),
        Experiment::Runge(c) => inverse::runge(c, cfg.seed, out),
        Experiment::Recover(c) => inverse::recover(c, cfg.seed, out),
    }
}

fn dim(n: usize) -> Result<Dim, CliError> {
    Ok(Dim::new(n)?)
}

/// The discretization selected by a mesh section.
enum Backend {
    Radial(RadialBackend),
    Fem(FemBackend),
}

impl Backend {
    fn build(section: &MeshSection) -> Result<Self, CliError> {
        let mesh = build_mesh(&section.resolve())?;
        Ok(match mesh.config.kind {
            MeshKind::Radial => Backend::Radial(RadialBackend::new(mesh)?),
            MeshKind::Disk => Backend::Fem(FemBackend::new(mesh)?),
        })
    }

    fn disc(&self) -> &dyn Discretization {
        match self {
            Backend::Radial(b) => b,
            Backend::Fem(b) => b,
        }
    }
}

fn potential(disc: &dyn Discretization, q: &BallPotential) -> Potential {
    if q.value == 0.0 {
        Potential::zero(disc)
    } else {
        Potential::ball_indicator(disc, q.radius, q.value)
    }
}
