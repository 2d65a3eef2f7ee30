//! Monte Carlo oracle: correlated random walks in `z` with an absorbing
//! barrier at `z_d`.
//!
//! Each step adds `eta_i dt + sigma_i sqrt(dt) (L w)_i` with `L L^T = xi`,
//! which is exact for the arithmetic Brownian motion at the grid times.
//! Crossings between grid points are caught by the Brownian-bridge
//! probability `exp(-2 (z_a - z_d)(z_b - z_d) / (sigma^2 dt))`, applied per
//! firm independently; the cross-firm dependence of crossings inside one step
//! is ignored.
//!
//! Paths are split into blocks, each with its own [`RngStream`], and blocks
//! are reduced in index order, so results do not depend on the thread count.
//! Simulation is carried out in `f64` whatever the parameter type.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::firm_model::{CorrelationSpec, FirmParams, ValidatedCorrelation};
use crate::numerics::{QuadratureConfig, Real, RngStream, SquareMatrix};
use crate::perturbation::PairKernels;

/// Bridge exponents above this are treated as "no crossing".
const BRIDGE_CUTOFF: f64 = 40.0;
/// Offset separating the bridge-uniform streams from the normal streams.
const UNIFORM_STREAM_OFFSET: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub paths: usize,
    pub steps_per_year: usize,
    pub bridge_correction: bool,
    pub seed: u64,
    pub block_size: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            paths: 1_000_000,
            steps_per_year: 252,
            bridge_correction: true,
            seed: 20_240_917,
            block_size: 10_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 || self.paths == 0 || !self.paths.is_multiple_of(self.block_size) {
            return Err(Error::Config(format!(
                "paths ({}) must be a positive multiple of block_size ({})",
                self.paths, self.block_size
            )));
        }
        if self.steps_per_year == 0 {
            return Err(Error::Config("steps_per_year must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sample default correlation of one pair, with a batch-means standard error
/// over blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEstimate {
    pub pair: (usize, usize),
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub joint: f64,
    pub joint_stderr: f64,
    pub marginals: Vec<f64>,
    pub marginal_stderrs: Vec<f64>,
    pub default_correlations: Vec<PairEstimate>,
    pub paths: usize,
    pub steps: usize,
}

/// Per-block tallies for one correlation scenario.
#[derive(Debug, Clone, Default)]
struct Tally {
    joint: u64,
    survive: Vec<u64>,
    /// Row-major `n x n` counts of paths where both firms defaulted.
    both_default: Vec<u64>,
    /// Paths where this scenario's joint survival differs from scenario 0.
    flips_up: u64,
    flips_down: u64,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            survive: vec![0; n],
            both_default: vec![0; n * n],
            ..Default::default()
        }
    }

    fn add(&mut self, other: &Tally) {
        self.joint += other.joint;
        self.flips_up += other.flips_up;
        self.flips_down += other.flips_down;
        for (a, b) in self.survive.iter_mut().zip(&other.survive) {
            *a += b;
        }
        for (a, b) in self.both_default.iter_mut().zip(&other.both_default) {
            *a += b;
        }
    }
}

/// Cholesky factors for each step of one scenario.
enum Factors {
    Constant(Vec<f64>),
    PerStep(Vec<Vec<f64>>),
}

impl Factors {
    fn at(&self, step: usize) -> &[f64] {
        match self {
            Factors::Constant(l) => l,
            Factors::PerStep(ls) => &ls[step],
        }
    }
}

fn cholesky_flat<F: Real>(m: &SquareMatrix<F>) -> Result<Vec<f64>> {
    let n = m.dim();
    let l = m
        .cholesky_semidefinite(F::lit(1e-10) * F::from_usize_lossy(n))
        .ok_or_else(|| Error::Correlation("Cholesky factorisation failed".into()))?;
    Ok((0..n * n).map(|k| l[(k / n, k % n)].to_f64_lossy()).collect())
}

fn factors_for<F: Real>(corr: &ValidatedCorrelation<F>, n: usize, t: F, steps: usize) -> Result<Factors> {
    match corr.spec() {
        CorrelationSpec::TimeDependent(_) => {
            corr.check_horizon(t)?;
            let dt = t / F::from_usize_lossy(steps);
            (0..steps)
                .map(|k| {
                    let mid = dt * (F::from_usize_lossy(k) + F::half());
                    cholesky_flat(&corr.spec().matrix_at(n, mid))
                })
                .collect::<Result<Vec<_>>>()
                .map(Factors::PerStep)
        }
        spec => cholesky_flat(&spec.matrix_at(n, F::zero())).map(Factors::Constant),
    }
}

struct Walk {
    n: usize,
    steps: usize,
    drift: Vec<f64>,
    vol: Vec<f64>,
    zd: Vec<f64>,
    bridge: bool,
}

impl Walk {
    fn new<F: Real>(firms: &[FirmParams<F>], t: F, sim: &SimConfig) -> Result<Self> {
        let tf = t.to_f64_lossy();
        if !(tf > 0.0 && tf.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {t}")));
        }
        let steps = ((tf * sim.steps_per_year as f64).ceil() as usize).max(1);
        let dt = tf / steps as f64;
        Ok(Self {
            n: firms.len(),
            steps,
            drift: firms.iter().map(|f| f.eta().to_f64_lossy() * dt).collect(),
            vol: firms.iter().map(|f| f.sigma().to_f64_lossy() * dt.sqrt()).collect(),
            zd: firms.iter().map(|f| f.z_d().to_f64_lossy()).collect(),
            bridge: sim.bridge_correction,
        })
    }

    /// Simulates one block of paths for every scenario on common normals.
    fn block(&self, scenarios: &[Factors], sim: &SimConfig, block: usize) -> Vec<Tally> {
        let n = self.n;
        let k = scenarios.len();
        let mut normals = RngStream::new(sim.seed, block as u64);
        let mut uniforms = RngStream::new(sim.seed, UNIFORM_STREAM_OFFSET + block as u64);
        let mut tallies: Vec<Tally> = (0..k).map(|_| Tally::new(n)).collect();
        let mut z = vec![0.0; k * n];
        let mut alive = vec![true; k * n];
        let mut w = vec![0.0; n];
        let two_over_var: Vec<f64> = self.vol.iter().map(|v| 2.0 / (v * v)).collect();

        for _ in 0..sim.block_size {
            z.iter_mut().for_each(|v| *v = 0.0);
            alive.iter_mut().for_each(|v| *v = true);
            let mut live = k * n;
            for step in 0..self.steps {
                for v in w.iter_mut() {
                    *v = normals.normal();
                }
                for (s, fac) in scenarios.iter().enumerate() {
                    let l = fac.at(step);
                    for i in 0..n {
                        let idx = s * n + i;
                        if !alive[idx] {
                            continue;
                        }
                        let row = &l[i * n..i * n + i + 1];
                        let x: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
                        let za = z[idx];
                        let zb = za + self.drift[i] + self.vol[i] * x;
                        let dead = if zb <= self.zd[i] {
                            true
                        } else if self.bridge {
                            let e = (za - self.zd[i]) * (zb - self.zd[i]) * two_over_var[i];
                            e < BRIDGE_CUTOFF && uniforms.uniform() < (-e).exp()
                        } else {
                            false
                        };
                        if dead {
                            alive[idx] = false;
                            live -= 1;
                        }
                        z[idx] = zb;
                    }
                }
                if live == 0 {
                    break;
                }
            }
            let all0 = alive[..n].iter().all(|&a| a);
            for (s, tally) in tallies.iter_mut().enumerate() {
                let a = &alive[s * n..(s + 1) * n];
                let all = a.iter().all(|&x| x);
                tally.joint += all as u64;
                tally.flips_up += (all && !all0) as u64;
                tally.flips_down += (!all && all0) as u64;
                for i in 0..n {
                    tally.survive[i] += a[i] as u64;
                    if !a[i] {
                        for j in (i + 1)..n {
                            tally.both_default[i * n + j] += !a[j] as u64;
                        }
                    }
                }
            }
        }
        tallies
    }
}

fn proportion_stderr(p: f64, m: f64) -> f64 {
    (p * (1.0 - p) / m).sqrt()
}

fn default_correlation_of(t: &Tally, i: usize, j: usize, n: usize, m: f64) -> f64 {
    let qi = 1.0 - t.survive[i] as f64 / m;
    let qj = 1.0 - t.survive[j] as f64 / m;
    let qij = t.both_default[i * n + j] as f64 / m;
    let denom = (qi * (1.0 - qi) * qj * (1.0 - qj)).sqrt();
    if denom > 0.0 {
        (qij - qi * qj) / denom
    } else {
        0.0
    }
}

fn summarize(total: &Tally, blocks: &[Tally], n: usize, sim: &SimConfig, steps: usize) -> SimResult {
    let m = sim.paths as f64;
    let joint = total.joint as f64 / m;
    let marginals: Vec<f64> = total.survive.iter().map(|&s| s as f64 / m).collect();
    let mb = sim.block_size as f64;
    let nb = blocks.len() as f64;
    let mut default_correlations = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let value = default_correlation_of(total, i, j, n, m);
            let stderr = if blocks.len() > 1 {
                let est: Vec<f64> = blocks.iter().map(|b| default_correlation_of(b, i, j, n, mb)).collect();
                let mean = est.iter().sum::<f64>() / nb;
                let var = est.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (nb - 1.0);
                (var / nb).sqrt()
            } else {
                f64::NAN
            };
            default_correlations.push(PairEstimate {
                pair: (i, j),
                value,
                stderr,
            });
        }
    }
    SimResult {
        joint,
        joint_stderr: proportion_stderr(joint, m),
        marginal_stderrs: marginals.iter().map(|&p| proportion_stderr(p, m)).collect(),
        marginals,
        default_correlations,
        paths: sim.paths,
        steps,
    }
}

fn run<F: Real>(
    firms: &[FirmParams<F>],
    corrs: &[&ValidatedCorrelation<F>],
    t: F,
    sim: &SimConfig,
) -> Result<(Vec<SimResult>, Vec<Tally>)> {
    sim.validate()?;
    let n = firms.len();
    if n == 0 {
        return Err(Error::domain("need at least one firm"));
    }
    if let Some(c) = corrs.iter().find(|c| c.n() != n) {
        return Err(Error::Dimension {
            expected: n,
            got: c.n(),
        });
    }
    let walk = Walk::new(firms, t, sim)?;
    let scenarios = corrs
        .iter()
        .map(|c| factors_for(c, n, t, walk.steps))
        .collect::<Result<Vec<_>>>()?;
    let blocks = sim.paths / sim.block_size;
    let per_block: Vec<Vec<Tally>> = (0..blocks)
        .into_par_iter()
        .map(|b| walk.block(&scenarios, sim, b))
        .collect();
    let mut totals: Vec<Tally> = (0..corrs.len()).map(|_| Tally::new(n)).collect();
    for b in &per_block {
        for (t, x) in totals.iter_mut().zip(b) {
            t.add(x);
        }
    }
    let results = (0..corrs.len())
        .map(|s| {
            let column: Vec<Tally> = per_block.iter().map(|b| b[s].clone()).collect();
            summarize(&totals[s], &column, n, sim, walk.steps)
        })
        .collect();
    Ok((results, totals))
}

/// Joint and marginal survival of correlated firms by simulation.
pub fn simulate_joint_survival<F: Real>(
    firms: &[FirmParams<F>],
    corr: &ValidatedCorrelation<F>,
    t: F,
    sim: &SimConfig,
) -> Result<SimResult> {
    Ok(run(firms, &[corr], t, sim)?.0.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderRow {
    pub xi: f64,
    pub mc_joint: f64,
    pub mc_stderr: f64,
    pub perturbative: f64,
    /// `MC(xi) - perturbative(xi) - (MC(0) - P0)`: the discretisation bias
    /// seen by the zero-correlation control is removed.
    pub difference: f64,
    /// Standard error of `difference` from paths simulated on common numbers.
    pub difference_stderr: f64,
}

/// Weighted least-squares fit `difference = c xi + a xi^2 + b xi^3`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderFit {
    pub a: f64,
    pub b: f64,
    pub linear: f64,
    pub linear_stderr: f64,
    pub a_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderStudy {
    pub rows: Vec<LadderRow>,
    /// `None` with fewer than three non-zero grid points.
    pub fit: Option<LadderFit>,
}

/// Compares simulation with the first-order expansion over a grid of
/// equicorrelations, all on common random numbers, with a `xi = 0` control.
pub fn ladder_study<F: Real>(
    firms: &[FirmParams<F>],
    xi_grid: &[F],
    t: F,
    sim: &SimConfig,
    cfg: &QuadratureConfig<F>,
) -> Result<LadderStudy> {
    let n = firms.len();
    if n < 2 {
        return Err(Error::domain("a ladder study needs at least 2 firms"));
    }
    let mut specs = vec![crate::firm_model::validate_correlation(&CorrelationSpec::Equicorrelated(F::zero()), n)?];
    for &xi in xi_grid {
        specs.push(crate::firm_model::validate_correlation(&CorrelationSpec::Equicorrelated(xi), n)?);
    }
    let refs: Vec<&ValidatedCorrelation<F>> = specs.iter().collect();
    let (results, totals) = run(firms, &refs, t, sim)?;
    let kernels = PairKernels::compute(firms, t, cfg)?;
    let all: Vec<usize> = (0..n).collect();
    let p0 = kernels.singles().iter().fold(F::one(), |a, &b| a * b).to_f64_lossy();
    let bias = results[0].joint - p0;
    let m = sim.paths as f64;

    let rows: Vec<LadderRow> = xi_grid
        .iter()
        .enumerate()
        .map(|(k, &xi)| {
            let r = &results[k + 1];
            let tally = &totals[k + 1];
            let pert = kernels
                .joint_for_subset(&all, &CorrelationSpec::Equicorrelated(xi))
                .joint
                .to_f64_lossy();
            // Per-path difference Y_xi - Y_0 takes values in {-1, 0, 1}.
            let up = tally.flips_up as f64 / m;
            let down = tally.flips_down as f64 / m;
            let mean = up - down;
            let var = (up + down - mean * mean).max(0.0);
            LadderRow {
                xi: xi.to_f64_lossy(),
                mc_joint: r.joint,
                mc_stderr: r.joint_stderr,
                perturbative: pert,
                difference: r.joint - pert - bias,
                difference_stderr: (var / m).sqrt(),
            }
        })
        .collect();
    let fit = fit_ladder(&rows);
    Ok(LadderStudy { rows, fit })
}

fn fit_ladder(rows: &[LadderRow]) -> Option<LadderFit> {
    let pts: Vec<&LadderRow> = rows.iter().filter(|r| r.xi != 0.0).collect();
    if pts.len() < 3 {
        return None;
    }
    // Normal equations for the basis (xi, xi^2, xi^3) with weights 1/se^2.
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for r in &pts {
        let w = 1.0 / r.difference_stderr.max(1e-12).powi(2);
        let basis = [r.xi, r.xi * r.xi, r.xi.powi(3)];
        for i in 0..3 {
            atb[i] += w * basis[i] * r.difference;
            for j in 0..3 {
                ata[i][j] += w * basis[i] * basis[j];
            }
        }
    }
    let inv = invert3(&ata)?;
    let coef: Vec<f64> = (0..3).map(|i| (0..3).map(|j| inv[i][j] * atb[j]).sum()).collect();
    Some(LadderFit {
        linear: coef[0],
        a: coef[1],
        b: coef[2],
        linear_stderr: inv[0][0].sqrt(),
        a_stderr: inv[1][1].sqrt(),
    })
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let c = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    if det.abs() < f64::MIN_POSITIVE || !det.is_finite() {
        return None;
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = c(j, i) / det;
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_three_by_three() {
        let m = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let inv = invert3(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!(invert3(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]]).is_none());
    }

    #[test]
    fn config_validation() {
        let bad = SimConfig {
            paths: 15_000,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let zero = SimConfig {
            steps_per_year: 0,
            ..Default::default()
        };
        assert!(zero.validate().is_err());
        assert!(SimConfig::default().validate().is_ok());
    }
}
