//! Synthetic data generation: a semi-implicit finite-difference solver for
//! the incompressible momentum system on `(-1,1)²` with homogeneous Dirichlet
//! velocity, recording lateral boundary traces at every time level.
//!
//! Each step solves a pressure Poisson problem
//! `Δp = -Σ_ij ∂_i u_j ∂_j u_i + div f` with Neumann data
//! `∂_ν p = ν·(μ Δu + f)` and zero mean, then advances the velocity with
//! explicit convection/pressure and implicit diffusion:
//! `(I - Δt μ Δ) u^{n+1} = u^n + Δt (-(u·∇)u - ∇p + f)`.
//!
//! Both elliptic operators are factorized once per run.

use crate::grid::{Grid2D, ScalarField, VectorField2};
use crate::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::io::{BufRead, Write};
use std::sync::Arc;

/// Forward run configuration.
#[derive(Debug, Clone)]
pub struct ForwardConfig {
    pub grid: Arc<Grid2D>,
    pub dt: f64,
    pub t_final: f64,
    pub viscosity: f64,
    pub force: VectorField2,
    pub u0: VectorField2,
    /// Acceptance bound for the discrete divergence of `u0`. Central
    /// differences of an analytically divergence-free field leave an
    /// `O(h² · curvature)` remainder, so callers evaluating smooth fields on
    /// the grid should scale this with `h²`; `None` applies the strict
    /// default `1e-8 · max(1, ‖u0‖∞)` suited to exactly discrete-divergence-
    /// free inputs.
    pub div_tol: Option<f64>,
    /// Times at which to retain full `(u, p)` snapshots.
    pub snapshot_times: Vec<f64>,
}

impl ForwardConfig {
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config(format!("invalid time step {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::config(format!("invalid final time {}", self.t_final)));
        }
        if !(self.viscosity.is_finite() && self.viscosity > 0.0) {
            return Err(Error::config(format!("invalid viscosity {}", self.viscosity)));
        }
        let ratio = self.t_final / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 || ratio.round() < 1.0 {
            return Err(Error::config(format!(
                "time step {} does not divide final time {}",
                self.dt, self.t_final
            )));
        }
        let div = self.u0.divergence().interior_linf();
        let tol = self
            .div_tol
            .unwrap_or_else(|| 1e-8 * self.u0.linf().max(1.0));
        if div > tol {
            return Err(Error::config(format!(
                "initial velocity is not divergence-free on the grid: |div u0| = {div:.3e} > {tol:.3e}"
            )));
        }
        Ok(())
    }
}

/// Time series of boundary traces: `g = ∂_ν u` (two components), the
/// pressure trace `h1` and its normal derivative `h2`, at every time level,
/// over the boundary nodes in grid trace order.
#[derive(Debug, Clone)]
pub struct BoundaryRecord {
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub t_final: f64,
    pub noise_level: f64,
    pub rng_seed: Option<u64>,
    pub times: Vec<f64>,
    pub g1: Vec<Vec<f64>>,
    pub g2: Vec<Vec<f64>>,
    pub h1: Vec<Vec<f64>>,
    pub h2: Vec<Vec<f64>>,
}

impl BoundaryRecord {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_boundary(&self) -> usize {
        2 * self.nx + 2 * self.ny - 4
    }

    /// Multiplicative uniform noise: every stored sample `y` becomes
    /// `y · (1 + δ (1 - 2r))` with `r` i.i.d. uniform on `(0, 1)` from a
    /// seeded generator. Draw order is g1, g2, h1, h2, time-major.
    pub fn add_noise(&self, delta: f64, seed: u64) -> Result<BoundaryRecord> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::config(format!("invalid noise level {delta}")));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for series in [&mut out.g1, &mut out.g2, &mut out.h1, &mut out.h2] {
            for row in series.iter_mut() {
                for y in row.iter_mut() {
                    let r: f64 = rng.random();
                    *y *= 1.0 + delta * (1.0 - 2.0 * r);
                }
            }
        }
        out.noise_level = delta;
        out.rng_seed = Some(seed);
        Ok(out)
    }

    /// Writes the record as a CSV container with a two-line header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let seed = match self.rng_seed {
            Some(s) => s.to_string(),
            None => "none".to_string(),
        };
        writeln!(
            w,
            "# boundary_record schema_version=1 nx={} ny={} dt={} t_final={} noise={} seed={}",
            self.nx, self.ny, self.dt, self.t_final, self.noise_level, seed
        )?;
        writeln!(
            w,
            "# ordering: bottom L-R, right B-T, top R-L, left T-B; columns: time_index,boundary_index,g1,g2,h1,h2"
        )?;
        for (ti, _) in self.times.iter().enumerate() {
            for b in 0..self.n_boundary() {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    ti, b, self.g1[ti][b], self.g2[ti][b], self.h1[ti][b], self.h2[ti][b]
                )?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<BoundaryRecord> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::data("empty boundary record"))??;
        if !header.starts_with("# boundary_record schema_version=1") {
            return Err(Error::data("unrecognized boundary record header"));
        }
        let mut nx = 0usize;
        let mut ny = 0usize;
        let mut dt = 0.0f64;
        let mut t_final = 0.0f64;
        let mut noise = 0.0f64;
        let mut seed = None;
        for tok in header.split_whitespace() {
            if let Some((k, v)) = tok.split_once('=') {
                match k {
                    "nx" => nx = v.parse().map_err(|_| Error::data("bad nx"))?,
                    "ny" => ny = v.parse().map_err(|_| Error::data("bad ny"))?,
                    "dt" => dt = v.parse().map_err(|_| Error::data("bad dt"))?,
                    "t_final" => t_final = v.parse().map_err(|_| Error::data("bad t_final"))?,
                    "noise" => noise = v.parse().map_err(|_| Error::data("bad noise"))?,
                    "seed" => seed = v.parse::<u64>().ok(),
                    _ => {}
                }
            }
        }
        if nx < 5 || ny < 5 || dt <= 0.0 || t_final <= 0.0 {
            return Err(Error::data("incomplete boundary record header"));
        }
        let nb = 2 * nx + 2 * ny - 4;
        let n_times = (t_final / dt).round() as usize + 1;
        let times: Vec<f64> = (0..n_times).map(|i| i as f64 * dt).collect();
        let zeros = || vec![vec![0.0; nb]; n_times];
        let (mut g1, mut g2, mut h1, mut h2) = (zeros(), zeros(), zeros(), zeros());
        for line in lines {
            let line = line?;
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let mut next = || -> Result<&str> {
                parts.next().ok_or_else(|| Error::data("short record row"))
            };
            let ti: usize = next()?.parse().map_err(|_| Error::data("bad time index"))?;
            let b: usize = next()?.parse().map_err(|_| Error::data("bad node index"))?;
            if ti >= n_times || b >= nb {
                return Err(Error::data("record row out of range"));
            }
            g1[ti][b] = next()?.parse().map_err(|_| Error::data("bad g1"))?;
            g2[ti][b] = next()?.parse().map_err(|_| Error::data("bad g2"))?;
            h1[ti][b] = next()?.parse().map_err(|_| Error::data("bad h1"))?;
            h2[ti][b] = next()?.parse().map_err(|_| Error::data("bad h2"))?;
        }
        Ok(BoundaryRecord {
            nx,
            ny,
            dt,
            t_final,
            noise_level: noise,
            rng_seed: seed,
            times,
            g1,
            g2,
            h1,
            h2,
        })
    }
}

/// Poisson solver with Neumann data and zero-mean normalization, via the
/// augmented system `[[A, 1], [1ᵀ, 0]]`; the multiplier absorbs the `O(h²)`
/// compatibility defect of the discrete data.
pub struct PoissonNeumannSolver {
    grid: Arc<Grid2D>,
    lu: Lu<usize, f64>,
}

impl PoissonNeumannSolver {
    pub fn new(grid: &Arc<Grid2D>) -> Result<Self> {
        faer::set_global_parallelism(faer::Par::Seq);
        let g = grid;
        let n = g.n_nodes();
        let ihx2 = 1.0 / (g.hx() * g.hx());
        let ihy2 = 1.0 / (g.hy() * g.hy());
        let mut t: Vec<Triplet<usize, usize, f64>> = Vec::new();
        for i in g.interior_indices() {
            let (ix, iy) = g.coords(i);
            t.push(Triplet::new(i, i, -2.0 * (ihx2 + ihy2)));
            t.push(Triplet::new(i, g.index(ix + 1, iy), ihx2));
            t.push(Triplet::new(i, g.index(ix - 1, iy), ihx2));
            t.push(Triplet::new(i, g.index(ix, iy + 1), ihy2));
            t.push(Triplet::new(i, g.index(ix, iy - 1), ihy2));
        }
        for b in 0..g.n_boundary() {
            let idx = g.boundary_indices()[b];
            let (i1, i2, h) = g.inward_pair(b);
            t.push(Triplet::new(idx, idx, 3.0 / (2.0 * h)));
            t.push(Triplet::new(idx, i1, -4.0 / (2.0 * h)));
            t.push(Triplet::new(idx, i2, 1.0 / (2.0 * h)));
        }
        for i in 0..n {
            t.push(Triplet::new(i, n, 1.0));
            t.push(Triplet::new(n, i, 1.0));
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n + 1, n + 1, &t)
            .map_err(|e| Error::solver(format!("poisson assembly: {e:?}")))?;
        let sym = SymbolicLu::try_new(a.symbolic())
            .map_err(|e| Error::solver(format!("poisson symbolic LU: {e:?}")))?;
        let lu = Lu::try_new_with_symbolic(sym, a.as_ref())
            .map_err(|e| Error::solver(format!("poisson numeric LU: {e:?}")))?;
        Ok(PoissonNeumannSolver {
            grid: Arc::clone(grid),
            lu,
        })
    }

    /// Solves `Δp = rhs` in the interior with `∂_ν p = neumann` on the
    /// boundary (trace order) and `Σ p = 0`.
    pub fn solve(&self, rhs: &ScalarField, neumann: &[f64]) -> Result<ScalarField> {
        let g = &self.grid;
        if neumann.len() != g.n_boundary() {
            return Err(Error::solver("neumann data length mismatch"));
        }
        let n = g.n_nodes();
        let mut b = faer::Mat::zeros(n + 1, 1);
        for i in g.interior_indices() {
            b[(i, 0)] = rhs.values[i];
        }
        for (bi, &idx) in g.boundary_indices().iter().enumerate() {
            b[(idx, 0)] = neumann[bi];
        }
        let x = self.lu.solve(&b);
        let mut p = ScalarField::zeros(g);
        for i in 0..n {
            let v = x[(i, 0)];
            if !v.is_finite() {
                return Err(Error::solver("poisson solution is not finite"));
            }
            p.values[i] = v;
        }
        Ok(p)
    }
}

/// Cached factorization of `(I - Δt μ Δ)` on interior nodes with homogeneous
/// Dirichlet boundary values.
pub struct HelmholtzSolver {
    grid: Arc<Grid2D>,
    interior: Vec<usize>,
    interior_id: Vec<usize>,
    llt: Llt<usize, f64>,
}

impl HelmholtzSolver {
    pub fn new(grid: &Arc<Grid2D>, dt: f64, viscosity: f64) -> Result<Self> {
        faer::set_global_parallelism(faer::Par::Seq);
        let g = grid;
        let interior: Vec<usize> = g.interior_indices().collect();
        let mut interior_id = vec![usize::MAX; g.n_nodes()];
        for (k, &i) in interior.iter().enumerate() {
            interior_id[i] = k;
        }
        let c = dt * viscosity;
        let cx = c / (g.hx() * g.hx());
        let cy = c / (g.hy() * g.hy());
        let mut t: Vec<Triplet<usize, usize, f64>> = Vec::new();
        for (k, &i) in interior.iter().enumerate() {
            let (ix, iy) = g.coords(i);
            t.push(Triplet::new(k, k, 1.0 + 2.0 * (cx + cy)));
            for (nbr, coef) in [
                (g.index(ix + 1, iy), cx),
                (g.index(ix - 1, iy), cx),
                (g.index(ix, iy + 1), cy),
                (g.index(ix, iy - 1), cy),
            ] {
                let kn = interior_id[nbr];
                if kn != usize::MAX {
                    t.push(Triplet::new(k, kn, -coef));
                }
            }
        }
        let m = interior.len();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(m, m, &t)
            .map_err(|e| Error::solver(format!("helmholtz assembly: {e:?}")))?;
        let sym = SymbolicLlt::try_new(a.symbolic(), faer::Side::Lower)
            .map_err(|e| Error::solver(format!("helmholtz symbolic: {e:?}")))?;
        let llt = Llt::try_new_with_symbolic(sym, a.as_ref(), faer::Side::Lower)
            .map_err(|e| Error::solver(format!("helmholtz factorization: {e:?}")))?;
        Ok(HelmholtzSolver {
            grid: Arc::clone(grid),
            interior,
            interior_id,
            llt,
        })
    }

    /// Solves `(I - Δt μ Δ) v = rhs` (interior values of `rhs`), `v = 0` on
    /// the boundary.
    fn solve_component(&self, rhs: &ScalarField) -> Result<ScalarField> {
        let m = self.interior.len();
        let mut b = faer::Mat::zeros(m, 1);
        for (k, &i) in self.interior.iter().enumerate() {
            b[(k, 0)] = rhs.values[i];
        }
        let x = self.llt.solve(&b);
        let mut out = ScalarField::zeros(&self.grid);
        for (k, &i) in self.interior.iter().enumerate() {
            let v = x[(k, 0)];
            if !v.is_finite() {
                return Err(Error::solver("helmholtz solution is not finite"));
            }
            out.values[i] = v;
        }
        let _ = &self.interior_id;
        Ok(out)
    }
}

/// Pressure Poisson solve for a velocity with homogeneous Dirichlet values:
/// `Δp = -[(∂x u1)² + (∂y u2)² + 2 ∂x u2 ∂y u1] + div f` with Neumann data
/// `∂_ν p = ν·(μ Δu + f)` and zero mean.
pub fn pressure_solve(
    u: &VectorField2,
    force: &VectorField2,
    viscosity: f64,
    solver: &PoissonNeumannSolver,
) -> Result<ScalarField> {
    let g = u.grid();
    let gu1 = u.x.gradient();
    let gu2 = u.y.gradient();
    let divf = force.divergence();
    let mut rhs = ScalarField::zeros(g);
    for i in g.interior_indices() {
        let sq = gu1.x.values[i] * gu1.x.values[i]
            + gu2.y.values[i] * gu2.y.values[i]
            + 2.0 * gu2.x.values[i] * gu1.y.values[i];
        rhs.values[i] = -sq + divf.values[i];
    }
    let lap1 = u.x.boundary_laplacian();
    let lap2 = u.y.boundary_laplacian();
    let neumann: Vec<f64> = (0..g.n_boundary())
        .map(|b| {
            let idx = g.boundary_indices()[b];
            let (nvx, nvy) = g.normal(b);
            nvx * (viscosity * lap1[b] + force.x.values[idx])
                + nvy * (viscosity * lap2[b] + force.y.values[idx])
        })
        .collect();
    solver.solve(&rhs, &neumann)
}

/// One semi-implicit velocity step; see the module docs.
pub fn step_velocity(
    u: &VectorField2,
    p: &ScalarField,
    force: &VectorField2,
    dt: f64,
    solver: &HelmholtzSolver,
) -> Result<VectorField2> {
    let g = u.grid();
    let gu1 = u.x.gradient();
    let gu2 = u.y.gradient();
    let gp = p.gradient();
    let mut rhs_x = ScalarField::zeros(g);
    let mut rhs_y = ScalarField::zeros(g);
    for i in g.interior_indices() {
        let conv_x = u.x.values[i] * gu1.x.values[i] + u.y.values[i] * gu1.y.values[i];
        let conv_y = u.x.values[i] * gu2.x.values[i] + u.y.values[i] * gu2.y.values[i];
        rhs_x.values[i] = u.x.values[i] + dt * (-conv_x - gp.x.values[i] + force.x.values[i]);
        rhs_y.values[i] = u.y.values[i] + dt * (-conv_y - gp.y.values[i] + force.y.values[i]);
    }
    Ok(VectorField2 {
        x: solver.solve_component(&rhs_x)?,
        y: solver.solve_component(&rhs_y)?,
    })
}

/// Full `(u, p)` state retained at a requested time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub u: VectorField2,
    pub p: ScalarField,
}

/// Divergence monitoring over a forward run.
#[derive(Debug, Clone, Copy)]
pub struct DivergenceStats {
    /// Interior max |div u| at t = 0.
    pub initial: f64,
    pub max_abs: f64,
    /// max over steps of |div u| / max(initial, tiny).
    pub max_vs_initial: f64,
    /// max over steps of |div u| / ‖u‖∞.
    pub max_vs_linf: f64,
}

/// Output of a forward run: the boundary record, the ground-truth initial
/// state (with `p0` defined by the pressure solve at `t = 0`), snapshots and
/// divergence statistics.
pub struct ForwardRun {
    pub record: BoundaryRecord,
    pub u0: VectorField2,
    pub p0: ScalarField,
    pub snapshots: Vec<Snapshot>,
    pub div_stats: DivergenceStats,
}

/// Ratio of interior |div u| to ‖u‖∞ at which the run aborts.
pub const DIV_WATCHDOG_ABORT: f64 = 1e-2;

pub fn run_forward(cfg: &ForwardConfig) -> Result<ForwardRun> {
    cfg.validate()?;
    let g = &cfg.grid;
    let poisson = PoissonNeumannSolver::new(g)?;
    let helmholtz = HelmholtzSolver::new(g, cfg.dt, cfg.viscosity)?;
    let n_steps = cfg.n_steps();

    let mut u = cfg.u0.clone();
    let mut p0 = None;
    let mut snapshots = Vec::new();
    let nb = g.n_boundary();
    let times: Vec<f64> = (0..=n_steps).map(|i| i as f64 * cfg.dt).collect();
    let mut g1 = Vec::with_capacity(n_steps + 1);
    let mut g2 = Vec::with_capacity(n_steps + 1);
    let mut h1 = Vec::with_capacity(n_steps + 1);
    let mut h2 = Vec::with_capacity(n_steps + 1);

    let initial_div = cfg.u0.divergence().interior_linf();
    let mut stats = DivergenceStats {
        initial: initial_div,
        max_abs: initial_div,
        max_vs_initial: 1.0,
        max_vs_linf: if cfg.u0.linf() > 0.0 {
            initial_div / cfg.u0.linf()
        } else {
            0.0
        },
    };

    for n in 0..=n_steps {
        let t = times[n];
        let p = pressure_solve(&u, &cfg.force, cfg.viscosity, &poisson)?;
        if n == 0 {
            p0 = Some(p.clone());
        }

        g1.push(u.x.normal_derivative());
        g2.push(u.y.normal_derivative());
        let mut trace = vec![0.0; nb];
        for (b, &idx) in g.boundary_indices().iter().enumerate() {
            trace[b] = p.values[idx];
        }
        h1.push(trace);
        h2.push(p.normal_derivative());

        if let Some(&snap_t) = cfg
            .snapshot_times
            .iter()
            .find(|&&st| (st - t).abs() <= 0.5 * cfg.dt)
        {
            snapshots.push(Snapshot {
                time: snap_t,
                u: u.clone(),
                p: p.clone(),
            });
        }

        if n < n_steps {
            u = step_velocity(&u, &p, &cfg.force, cfg.dt, &helmholtz)?;
            let div = u.divergence().interior_linf();
            let linf = u.linf();
            stats.max_abs = stats.max_abs.max(div);
            if initial_div > 0.0 {
                stats.max_vs_initial = stats.max_vs_initial.max(div / initial_div);
            }
            if linf > 0.0 {
                stats.max_vs_linf = stats.max_vs_linf.max(div / linf);
                if div > DIV_WATCHDOG_ABORT * linf {
                    return Err(Error::solver(format!(
                        "divergence watchdog tripped at step {}: |div u| = {div:.3e}, ‖u‖∞ = {linf:.3e}",
                        n + 1
                    )));
                }
            }
        }
    }

    Ok(ForwardRun {
        record: BoundaryRecord {
            nx: g.nx(),
            ny: g.ny(),
            dt: cfg.dt,
            t_final: cfg.t_final,
            noise_level: 0.0,
            rng_seed: None,
            times,
            g1,
            g2,
            h1,
            h2,
        },
        u0: cfg.u0.clone(),
        p0: p0.expect("at least one time level"),
        snapshots,
        div_stats: stats,
    })
}
