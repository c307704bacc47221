//! Exterior-value problem for P + q on a computational ball and its
//! Dirichlet-to-Neumann map.
//!
//! A [`Discretization`] supplies basis functions split into interior (supported
//! in Ω̄) and exterior degrees of freedom, the energy matrix of P on all of them,
//! and per-cell mass data on Ω. Everything else (coercive solve, DN assembly,
//! potentials) is backend-independent.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HyperPoint;
use crate::operator::PolyharmonicSpec;

pub mod fem;
pub mod mesh;
pub mod radial;
mod touching;

pub use mesh::{build_mesh, Mesh, MeshConfig, MeshKind, Region};

/// Mass data of one Ω cell: local dofs, ∫ φ_a φ_b, ∫ φ_a, volume.
#[derive(Debug, Clone)]
pub struct CellMass {
    pub cell: usize,
    pub dofs: Vec<usize>,
    pub mass: DMatrix<f64>,
    pub moments: DVector<f64>,
    pub volume: f64,
    pub centroid: HyperPoint<f64>,
}

/// Which annulus an exterior mode lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    W1,
    W2,
}

/// A discretization of the exterior problem.
pub trait Discretization: Sync {
    fn mesh(&self) -> &Mesh;
    fn n_dofs(&self) -> usize;
    /// Dofs whose support lies in Ω̄.
    fn interior(&self) -> &[usize];
    /// All remaining dofs.
    fn exterior(&self) -> &[usize];
    /// Energy matrix of P on all dofs (no potential term).
    fn energy_matrix(&self, spec: &PolyharmonicSpec) -> Result<DMatrix<f64>>;
    /// Mass data of the Ω cells, in a fixed order shared with [`Potential`].
    fn omega_cells(&self) -> &[CellMass];
    /// L²-projection of the first `k` modes on a window onto the dofs supported
    /// there, returned as exterior coefficient vectors.
    fn window_modes(&self, window: Window, k: usize) -> Result<Vec<DVector<f64>>>;
    /// Value of a finite-element function (full coefficient vector) at a point.
    fn eval(&self, coeffs: &DVector<f64>, x: &HyperPoint<f64>) -> f64;
    /// DN entries ∫ (P u_i) g_j dV from the kernel form of P, for solutions
    /// (full vectors) and tests (exterior vectors) with disjoint supports.
    fn kernel_dn(
        &self,
        spec: &PolyharmonicSpec,
        solutions: &[DVector<f64>],
        tests: &[DVector<f64>],
    ) -> Result<DMatrix<f64>>;
}

/// Cellwise-constant potential on the Ω cells of a discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub values: Vec<f64>,
}

impl Potential {
    pub fn zero(disc: &dyn Discretization) -> Self {
        Self {
            values: vec![0.0; disc.omega_cells().len()],
        }
    }

    /// Samples `q` at cell centroids.
    pub fn from_fn(disc: &dyn Discretization, q: impl Fn(&HyperPoint<f64>) -> f64) -> Result<Self> {
        let values: Vec<f64> = disc.omega_cells().iter().map(|c| q(&c.centroid)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("potential sample".into()));
        }
        Ok(Self { values })
    }

    /// c·1_{B_a(e₀)}.
    pub fn ball_indicator(disc: &dyn Discretization, a: f64, c: f64) -> Self {
        Self::from_fn(disc, |x| {
            if crate::geometry::point_to_polar(x).r < a {
                c
            } else {
                0.0
            }
        })
        .expect("finite")
    }

    /// sup |q|.
    pub fn bound(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2_norm(&self, disc: &dyn Discretization) -> f64 {
        disc.omega_cells()
            .iter()
            .zip(&self.values)
            .map(|(c, v)| c.volume * v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &Potential) -> Potential {
        Potential {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Assembles Σ_c q_c ∫_c φ_a φ_b over the Ω cells.
pub fn potential_mass(disc: &dyn Discretization, q: &Potential) -> Result<DMatrix<f64>> {
    let cells = disc.omega_cells();
    if q.values.len() != cells.len() {
        return Err(Error::Domain(format!(
            "potential has {} values for {} Ω cells",
            q.values.len(),
            cells.len()
        )));
    }
    let n = disc.n_dofs();
    let mut m = DMatrix::zeros(n, n);
    for (c, qv) in cells.iter().zip(&q.values) {
        if *qv == 0.0 {
            continue;
        }
        for (a, &i) in c.dofs.iter().enumerate() {
            for (b, &j) in c.dofs.iter().enumerate() {
                m[(i, j)] += qv * c.mass[(a, b)];
            }
        }
    }
    Ok(m)
}

/// Discrete B_q on all dofs with a factorized interior block.
#[derive(Debug, Clone)]
pub struct StiffnessSystem {
    /// B_q on all dofs.
    pub matrix: DMatrix<f64>,
    pub interior: Vec<usize>,
    pub exterior: Vec<usize>,
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

/// Relative threshold below which the interior block counts as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

impl StiffnessSystem {
    /// Combines a precomputed energy matrix with the potential term.
    pub fn new(disc: &dyn Discretization, energy: &DMatrix<f64>, q: &Potential) -> Result<Self> {
        let mut matrix = energy + potential_mass(disc, q)?;
        // exact symmetry
        let n = matrix.nrows();
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
                matrix[(i, j)] = v;
                matrix[(j, i)] = v;
            }
        }
        let interior = disc.interior().to_vec();
        let exterior = disc.exterior().to_vec();
        let aii = matrix.select_rows(&interior).select_columns(&interior);
        let eig = SymmetricEigen::new(aii);
        let sigma_min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let sigma_max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(sigma_min > SINGULAR_TOL * sigma_max) {
            return Err(Error::SingularSystem { sigma_min });
        }
        Ok(Self {
            matrix,
            interior,
            exterior,
            eig,
            sigma_min,
            sigma_max,
        })
    }

    /// Smallest eigenvalue of the interior block (positive iff coercive).
    pub fn lambda_min(&self) -> f64 {
        self.eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn solve_interior(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let v = &self.eig.eigenvectors;
        let mut c = v.tr_mul(rhs);
        for (ci, e) in c.iter_mut().zip(self.eig.eigenvalues.iter()) {
            *ci /= e;
        }
        v * c
    }

    /// Embeds an exterior coefficient vector into the full dof vector.
    pub fn embed_exterior(&self, f: &DVector<f64>) -> DVector<f64> {
        let mut u = DVector::zeros(self.matrix.nrows());
        for (k, &i) in self.exterior.iter().enumerate() {
            u[i] = f[k];
        }
        u
    }
}

/// B_q assembled from scratch.
pub fn assemble_b_q(
    disc: &dyn Discretization,
    spec: &PolyharmonicSpec,
    q: &Potential,
) -> Result<StiffnessSystem> {
    spec.require_positive()?;
    let energy = disc.energy_matrix(spec)?;
    StiffnessSystem::new(disc, &energy, q)
}

/// Solution of the exterior problem.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    /// Full coefficient vector (exterior part equals the data).
    pub coeffs: DVector<f64>,
    /// Relative residual of the interior equations.
    pub residual: f64,
}

/// Solves B_q(u, w) = ⟨F, w⟩ for interior w with u = f on the exterior dofs.
/// `load` (interior-indexed) defaults to zero.
pub fn solve_exterior(
    sys: &StiffnessSystem,
    f: &DVector<f64>,
    load: Option<&DVector<f64>>,
) -> Result<DiscreteSolution> {
    if f.len() != sys.exterior.len() {
        return Err(Error::Domain(format!(
            "exterior data has {} entries, expected {}",
            f.len(),
            sys.exterior.len()
        )));
    }
    let aie = sys.matrix.select_rows(&sys.interior).select_columns(&sys.exterior);
    let mut rhs = -(&aie * f);
    if let Some(l) = load {
        rhs += l;
    }
    let v = sys.solve_interior(&rhs);
    let aii = sys.matrix.select_rows(&sys.interior).select_columns(&sys.interior);
    let res = (&aii * &v - &rhs).norm();
    let scale = rhs.norm().max(f64::MIN_POSITIVE);
    let residual = if rhs.norm() == 0.0 { res } else { res / scale };
    let mut coeffs = sys.embed_exterior(f);
    for (k, &i) in sys.interior.iter().enumerate() {
        coeffs[i] = v[k];
    }
    Ok(DiscreteSolution { coeffs, residual })
}

/// Discrete DN map Λ[j,i] = B_q(u_{f_i}, g_j).
#[derive(Debug, Clone, PartialEq)]
pub struct DnMatrix {
    pub values: DMatrix<f64>,
}

impl DnMatrix {
    pub fn asymmetry(&self) -> f64 {
        let m = &self.values;
        (m - m.transpose()).norm() / m.norm()
    }

    pub fn sub(&self, other: &DnMatrix) -> DnMatrix {
        DnMatrix {
            values: &self.values - &other.values,
        }
    }
}

/// Exterior solutions u_{f_i} for a family of data vectors.
pub fn solve_family(sys: &StiffnessSystem, data: &[DVector<f64>]) -> Result<Vec<DiscreteSolution>> {
    use rayon::prelude::*;
    data.par_iter().map(|f| solve_exterior(sys, f, None)).collect()
}

/// Λ[j,i] = B_q(u_{f_i}, g_j) over data `basis_w1` and tests `basis_w2`.
pub fn assemble_dn(
    sys: &StiffnessSystem,
    basis_w1: &[DVector<f64>],
    basis_w2: &[DVector<f64>],
) -> Result<DnMatrix> {
    let sols = solve_family(sys, basis_w1)?;
    Ok(dn_from_solutions(sys, &sols, basis_w2))
}

/// DN entries from precomputed solutions.
pub fn dn_from_solutions(sys: &StiffnessSystem, sols: &[DiscreteSolution], basis_w2: &[DVector<f64>]) -> DnMatrix {
    let mut values = DMatrix::zeros(basis_w2.len(), sols.len());
    for (j, g) in basis_w2.iter().enumerate() {
        let gf = sys.embed_exterior(g);
        let ag = &sys.matrix * gf;
        for (i, u) in sols.iter().enumerate() {
            values[(j, i)] = ag.dot(&u.coeffs);
        }
    }
    DnMatrix { values }
}

/// ∫_Ω q u v dV for full coefficient vectors.
pub fn omega_product(disc: &dyn Discretization, q: &Potential, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    disc.omega_cells()
        .iter()
        .zip(&q.values)
        .map(|(c, qv)| {
            if *qv == 0.0 {
                return 0.0;
            }
            let ul = DVector::from_iterator(c.dofs.len(), c.dofs.iter().map(|&i| u[i]));
            let vl = DVector::from_iterator(c.dofs.len(), c.dofs.iter().map(|&i| v[i]));
            qv * ul.dot(&(&c.mass * vl))
        })
        .sum()
}

/// Cellwise ∫_c u v dV over the Ω cells.
pub fn cell_products(disc: &dyn Discretization, u: &DVector<f64>, v: &DVector<f64>) -> Vec<f64> {
    disc.omega_cells()
        .iter()
        .map(|c| {
            let ul = DVector::from_iterator(c.dofs.len(), c.dofs.iter().map(|&i| u[i]));
            let vl = DVector::from_iterator(c.dofs.len(), c.dofs.iter().map(|&i| v[i]));
            ul.dot(&(&c.mass * vl))
        })
        .collect()
}

/// Mode k (1-based) on the annulus [a, b]: sin(kπ(r−a)/(b−a)).
pub fn radial_mode(k: usize, a: f64, b: f64, r: f64) -> f64 {
    if r <= a || r >= b {
        return 0.0;
    }
    (k as f64 * std::f64::consts::PI * (r - a) / (b - a)).sin()
}
