//! Grids, covariance assembly and deterministic Gaussian sampling.
//!
//! Replicate `r` under seed `s` draws its standard normals from
//! `ChaCha8Rng::seed_from_u64(s)` on stream `r`, so every sample is a pure
//! function of `(s, r)` and independent of how replicates are scheduled.

use std::io::{Read, Write};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub use crate::domain::{DomainPair, Rect, RectUnion};
use crate::model::BivariateMaternModel;
use crate::specfun;
use crate::{Error, Result};

/// Replicates per parallel work unit. Fixed so that reductions happen in the
/// same order for every pool size.
pub const CHUNK: u64 = 1024;

/// Jitter levels tried in turn, relative to the mean diagonal.
pub const JITTER_LADDER: [f64; 6] = [0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10];

/// Maps `f` over consecutive replicate ranges of length [`CHUNK`] and returns
/// the per-chunk results in index order.
pub fn map_chunks<R, F>(count: u64, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(Range<u64>) -> R + Sync + Send,
{
    let chunks = count.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(count)))
        .collect()
}

pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Nodes of `A1` and `A2`. Each rectangle gets `points_per_axis` equally
/// spaced nodes per axis, corners included; degenerate sides get one node.
/// Nodes shared by several rectangles of a union appear once.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub points_per_axis: usize,
    nodes1: Vec<Vec<f64>>,
    nodes2: Vec<Vec<f64>>,
}

impl GridSpec {
    pub fn new(domain: &DomainPair, points_per_axis: usize) -> Result<Self> {
        Self::from_sets(&domain.a1, &domain.a2, points_per_axis)
    }

    /// Grid over an arbitrary pair of sets (they need not intersect).
    pub fn from_sets(a1: &RectUnion, a2: &RectUnion, points_per_axis: usize) -> Result<Self> {
        if a1.dim() > 2 || a2.dim() != a1.dim() {
            return Err(Error::Unsupported(format!(
                "simulation grids need N <= 2 and matching dimensions (got {} and {})",
                a1.dim(),
                a2.dim()
            )));
        }
        Ok(Self { points_per_axis, nodes1: union_nodes(a1, points_per_axis)?, nodes2: union_nodes(a2, points_per_axis)? })
    }

    pub fn nodes1(&self) -> &[Vec<f64>] {
        &self.nodes1
    }

    pub fn nodes2(&self) -> &[Vec<f64>] {
        &self.nodes2
    }

    pub fn n1(&self) -> usize {
        self.nodes1.len()
    }

    pub fn n2(&self) -> usize {
        self.nodes2.len()
    }

    pub fn total(&self) -> usize {
        self.n1() + self.n2()
    }
}

fn axis_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi == lo {
        return vec![lo];
    }
    let mut v: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    v[n - 1] = hi;
    v
}

fn union_nodes(u: &RectUnion, ppa: usize) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for r in u.rects() {
        let degenerate = r.lo().iter().zip(r.hi()).all(|(l, h)| l == h);
        if ppa < 2 && !degenerate {
            return Err(Error::domain("GridSpec", "points_per_axis must be >= 2 for sets with extent"));
        }
        let axes: Vec<Vec<f64>> = r.lo().iter().zip(r.hi()).map(|(l, h)| axis_nodes(*l, *h, ppa)).collect();
        match axes.len() {
            1 => out.extend(axes[0].iter().map(|x| vec![*x])),
            2 => {
                for x in &axes[0] {
                    for y in &axes[1] {
                        out.push(vec![*x, *y]);
                    }
                }
            }
            n => return Err(Error::Unsupported(format!("grids in dimension {n}"))),
        }
    }
    out.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    out.dedup();
    Ok(out)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds from the lower triangle `f(i, j)`, `j <= i`, mirrored exactly.
    pub fn from_lower<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, data }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn mean_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum::<f64>() / self.n as f64
    }
}

/// Joint covariance of `(X1 at A1 nodes, X2 at A2 nodes)`.
pub fn build_covariance(m: &BivariateMaternModel, g: &GridSpec) -> SymMatrix {
    let (p1, p2, p12) = (m.marginal1(), m.marginal2(), m.cross());
    let (v1, v2, v12) = (m.sigma1 * m.sigma1, m.sigma2 * m.sigma2, m.rho * m.sigma1 * m.sigma2);
    let n1 = g.n1();
    let node = |i: usize| if i < n1 { &g.nodes1[i] } else { &g.nodes2[i - n1] };
    SymMatrix::from_lower(g.total(), |i, j| {
        let h = dist(node(i), node(j));
        match (i < n1, j < n1) {
            (true, true) => v1 * specfun::matern(h, &p1),
            (false, false) => v2 * specfun::matern(h, &p2),
            _ => v12 * specfun::matern(h, &p12),
        }
    })
}

/// Lower Cholesky factor, stored column-packed.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    cols: Vec<f64>,
    col_start: Vec<usize>,
    jitter: f64,
}

impl CholeskyFactor {
    /// Row-by-row factorization with the jitter ladder `eps * mean(diag) * I`.
    /// Row `i` of the factor depends only on the leading `(i+1) x (i+1)`
    /// block, so leading blocks of a matrix give bit-identical factors.
    pub fn new(a: &SymMatrix) -> Result<Self> {
        let n = a.order();
        if n == 0 {
            return Err(Error::domain("cholesky", "empty matrix"));
        }
        let scale = a.mean_diagonal();
        let mut l = vec![0.0; n * n];
        let mut last = (0, 0.0);
        'ladder: for eps in JITTER_LADDER {
            let jitter = eps * scale;
            for i in 0..n {
                for j in 0..=i {
                    let mut s = a.get(i, j);
                    for k in 0..j {
                        s -= l[i * n + k] * l[j * n + k];
                    }
                    if i == j {
                        let d = s + jitter;
                        if !(d > 0.0 && d.is_finite()) {
                            last = (i, jitter);
                            continue 'ladder;
                        }
                        l[i * n + i] = d.sqrt();
                    } else {
                        l[i * n + j] = s / l[j * n + j];
                    }
                }
            }
            let mut cols = Vec::with_capacity(n * (n + 1) / 2);
            let mut col_start = Vec::with_capacity(n);
            for j in 0..n {
                col_start.push(cols.len());
                cols.extend((j..n).map(|i| l[i * n + j]));
            }
            return Ok(Self { n, cols, col_start, jitter });
        }
        Err(Error::NotPositiveDefinite { order: n, pivot: last.0, jitter: last.1 })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Absolute diagonal jitter that was needed (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.cols[self.col_start[j] + i - j]
        }
    }

    /// `x = L z`, accumulated column by column.
    pub fn mul_into(&self, z: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        for j in 0..self.n {
            let zj = z[j];
            let col = &self.cols[self.col_start[j]..self.col_start[j] + self.n - j];
            for (xi, lij) in x[j..].iter_mut().zip(col) {
                *xi += lij * zj;
            }
        }
    }
}

/// Zero-mean Gaussian vectors with a fixed covariance.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: CholeskyFactor,
}

impl GaussianSampler {
    pub fn new(cov: &SymMatrix) -> Result<Self> {
        Ok(Self { factor: CholeskyFactor::new(cov)? })
    }

    pub fn dim(&self) -> usize {
        self.factor.order()
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    /// Writes replicate `(seed, replicate)` into `out`; `z` is scratch.
    pub fn fill(&self, seed: u64, replicate: u64, z: &mut [f64], out: &mut [f64]) {
        let mut rng = replicate_rng(seed, replicate);
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        self.factor.mul_into(z, out);
    }

    pub fn sample(&self, seed: u64, replicate: u64) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        let mut out = vec![0.0; self.dim()];
        self.fill(seed, replicate, &mut z, &mut out);
        out
    }
}

/// Replicates `0..count` of a Gaussian vector with covariance `cov`.
pub fn cholesky_sample(cov: &SymMatrix, seed: u64, count: u64) -> Result<Vec<Vec<f64>>> {
    let s = GaussianSampler::new(cov)?;
    Ok(map_chunks(count, |r| r.map(|i| s.sample(seed, i)).collect::<Vec<_>>()).into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub seed: u64,
    pub replicate_index: u64,
}

/// Joint sampler for a model on a grid.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    sampler: GaussianSampler,
    n1: usize,
}

impl FieldSampler {
    pub fn new(m: &BivariateMaternModel, g: &GridSpec) -> Result<Self> {
        Ok(Self { sampler: GaussianSampler::new(&build_covariance(m, g))?, n1: g.n1() })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn gaussian(&self) -> &GaussianSampler {
        &self.sampler
    }

    pub fn sample(&self, seed: u64, replicate: u64) -> FieldSample {
        let mut x = self.sampler.sample(seed, replicate);
        let x2 = x.split_off(self.n1);
        FieldSample { x1: x, x2, seed, replicate_index: replicate }
    }
}

/// Paths of `chi` on `{0, eta, ..., T}` with covariance
/// `|t|^alpha + |s|^alpha - |t - s|^alpha`, i.e. `sqrt(2)` times a standard
/// fractional Brownian motion with Hurst index `alpha / 2`.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    alpha: f64,
    eta: f64,
    sampler: GaussianSampler,
}

impl FbmSampler {
    pub fn new(alpha: f64, horizon_t: f64, eta: f64) -> Result<Self> {
        let steps = fbm_steps(alpha, horizon_t, eta)?;
        let cov = SymMatrix::from_lower(steps, |i, j| {
            let (t, s) = ((i + 1) as f64 * eta, (j + 1) as f64 * eta);
            t.powf(alpha) + s.powf(alpha) - (t - s).abs().powf(alpha)
        });
        let sampler = GaussianSampler::new(&cov).map_err(|e| Error::numeric("sample_fbm", e.to_string()))?;
        Ok(Self { alpha, eta, sampler })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Number of grid points including `t = 0`.
    pub fn len(&self) -> usize {
        self.sampler.dim() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| k as f64 * self.eta).collect()
    }

    /// Writes path `(seed, replicate)` into `path` (length [`Self::len`]).
    pub fn fill(&self, seed: u64, replicate: u64, z: &mut [f64], path: &mut [f64]) {
        path[0] = 0.0;
        self.sampler.fill(seed, replicate, z, &mut path[1..]);
    }

    pub fn sample(&self, seed: u64, replicate: u64) -> Vec<f64> {
        let mut z = vec![0.0; self.len() - 1];
        let mut p = vec![0.0; self.len()];
        self.fill(seed, replicate, &mut z, &mut p);
        p
    }
}

fn fbm_steps(alpha: f64, horizon_t: f64, eta: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::domain("sample_fbm", format!("alpha = {alpha} must lie in (0, 2)")));
    }
    if !(horizon_t > 0.0 && eta > 0.0 && horizon_t.is_finite()) {
        return Err(Error::domain("sample_fbm", format!("need T > 0 and eta > 0 (got {horizon_t}, {eta})")));
    }
    let k = horizon_t / eta;
    let steps = k.round();
    if (k - steps).abs() > 1e-9 * k.max(1.0) || steps < 1.0 {
        return Err(Error::domain("sample_fbm", format!("eta = {eta} does not divide T = {horizon_t}")));
    }
    Ok(steps as usize)
}

/// `count` paths of `chi` on `{0, eta, ..., T}`.
pub fn sample_fbm(alpha: f64, horizon_t: f64, eta: f64, seed: u64, count: u64) -> Result<Vec<Vec<f64>>> {
    let s = FbmSampler::new(alpha, horizon_t, eta)?;
    Ok(map_chunks(count, |r| r.map(|i| s.sample(seed, i)).collect::<Vec<_>>()).into_iter().flatten().collect())
}

pub const DUMP_MAGIC: [u8; 4] = *b"BGRF";

/// Writes the binary sample dump: `BGRF`, u32 node count, u32 replicate
/// count, 4 zero bytes, then row-major little-endian `f64`.
pub fn write_dump<W: Write>(mut w: W, node_count: usize, rows: &[Vec<f64>]) -> Result<()> {
    let nodes = u32::try_from(node_count).map_err(|_| Error::Resource("node count exceeds u32".into()))?;
    let reps = u32::try_from(rows.len()).map_err(|_| Error::Resource("replicate count exceeds u32".into()))?;
    w.write_all(&DUMP_MAGIC)?;
    w.write_all(&nodes.to_le_bytes())?;
    w.write_all(&reps.to_le_bytes())?;
    w.write_all(&[0u8; 4])?;
    for (r, row) in rows.iter().enumerate() {
        if row.len() != node_count {
            return Err(Error::domain("write_dump", format!("row {r} has {} values, expected {node_count}", row.len())));
        }
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_dump<R: Read>(mut r: R) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if header[..4] != DUMP_MAGIC {
        return Err(Error::Io("bad magic, not a BGRF dump".into()));
    }
    let nodes = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let reps = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut rows = Vec::with_capacity(reps);
    let mut buf = [0u8; 8];
    for _ in 0..reps {
        let mut row = Vec::with_capacity(nodes);
        for _ in 0..nodes {
            r.read_exact(&mut buf)?;
            row.push(f64::from_le_bytes(buf));
        }
        rows.push(row);
    }
    Ok((nodes, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(rho: f64) -> BivariateMaternModel {
        BivariateMaternModel::standardized(0.5, 0.5, 2.0, rho, 1).unwrap()
    }

    fn points(a: f64, b: f64) -> DomainPair {
        let p = |x: f64| RectUnion::single(Rect::new(vec![x], vec![x]).unwrap());
        DomainPair { a1: p(a), a2: p(b), dim_n: 1, split_m: 1 }
    }

    #[test]
    fn grid_includes_corners() {
        let g = GridSpec::new(&DomainPair::unit_touching(1).unwrap(), 5).unwrap();
        assert_eq!(g.nodes1().first().unwrap(), &vec![0.0]);
        assert_eq!(g.nodes1().last().unwrap(), &vec![1.0]);
        assert_eq!(g.nodes2().first().unwrap(), &vec![1.0]);
        assert_eq!(g.nodes2().last().unwrap(), &vec![2.0]);
        let g2 = GridSpec::new(&DomainPair::unit_overlap(2).unwrap(), 4).unwrap();
        assert_eq!(g2.n1(), 16);
        let u = RectUnion::new(vec![Rect::new(vec![0.0], vec![1.0]).unwrap(), Rect::new(vec![1.0], vec![2.0]).unwrap()]).unwrap();
        assert_eq!(GridSpec::from_sets(&u, &u, 3).unwrap().n1(), 5);
    }

    #[test]
    fn colocated_single_nodes() {
        let g = GridSpec::new(&points(0.3, 0.3), 1).unwrap();
        let c = build_covariance(&model(0.5), &g);
        assert_eq!((c.get(0, 0), c.get(0, 1), c.get(1, 0), c.get(1, 1)), (1.0, 0.5, 0.5, 1.0));
    }

    #[test]
    fn covariance_entries() {
        let d = DomainPair::unit_touching(1).unwrap();
        let g = GridSpec::new(&d, 7).unwrap();
        let m = model(0.4);
        let c = build_covariance(&m, &g);
        for (i, s) in g.nodes1().iter().enumerate() {
            for (j, t) in g.nodes2().iter().enumerate() {
                let want = crate::model::cross_corr(&m, (t[0] - s[0]).abs());
                assert_eq!(c.get(i, g.n1() + j), want);
            }
        }
        for i in 0..g.total() {
            for j in 0..g.total() {
                assert_eq!(c.get(i, j).to_bits(), c.get(j, i).to_bits());
            }
        }
        let zero = build_covariance(&model(0.0), &g);
        for i in 0..g.n1() {
            for j in g.n1()..g.total() {
                assert_eq!(zero.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let g = GridSpec::new(&DomainPair::unit_overlap(1).unwrap(), 50).unwrap();
        let c = build_covariance(&model(0.4), &g);
        let f = CholeskyFactor::new(&c).unwrap();
        assert_eq!(f.jitter(), 0.0);
        let n = c.order();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| f.get(i, k) * f.get(j, k)).sum();
                worst = worst.max((s - c.get(i, j)).abs());
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let c = SymMatrix::from_lower(2, |i, j| if i == j { 1.0 } else { 1.5 });
        assert!(matches!(CholeskyFactor::new(&c), Err(Error::NotPositiveDefinite { order: 2, pivot: 1, .. })));
    }

    #[test]
    fn leading_blocks_factor_identically() {
        let big = FbmSampler::new(1.3, 4.0, 0.25).unwrap();
        let small = FbmSampler::new(1.3, 2.0, 0.25).unwrap();
        let (a, b) = (big.sample(9, 17), small.sample(9, 17));
        assert_eq!(&a[..b.len()], &b[..]);
    }

    #[test]
    fn correlated_pair_statistics() {
        let c = SymMatrix::from_lower(2, |i, j| if i == j { 1.0 } else { 0.5 });
        let xs = cholesky_sample(&c, 42, 100_000).unwrap();
        let n = xs.len() as f64;
        let r = xs.iter().map(|x| x[0] * x[1]).sum::<f64>() / n;
        // Var(x0 x1) = 1 + rho^2 for unit-variance normals.
        let se = ((1.0 + 0.25) / n).sqrt();
        assert!((r - 0.5).abs() < 3.0 * se, "{r}");
        for k in 0..2 {
            let v = xs.iter().map(|x| x[k] * x[k]).sum::<f64>() / n;
            assert!((v - 1.0).abs() < 3.0 * (2.0 / n).sqrt(), "{v}");
        }
    }

    #[test]
    fn white_noise_variance() {
        let c = SymMatrix::from_lower(3, |i, j| if i == j { 1.0 } else { 0.0 });
        let xs = cholesky_sample(&c, 7, 100_000).unwrap();
        let n = xs.len() as f64;
        for k in 0..3 {
            let v = xs.iter().map(|x| x[k] * x[k]).sum::<f64>() / n;
            assert!((v - 1.0).abs() < 3.0 * (2.0 / n).sqrt());
        }
    }

    #[test]
    fn fbm_moments() {
        let alpha = 1.0;
        let paths = sample_fbm(alpha, 1.0, 0.125, 3, 100_000).unwrap();
        let n = paths.len() as f64;
        let t = FbmSampler::new(alpha, 1.0, 0.125).unwrap().times();
        for p in &paths {
            assert_eq!(p[0], 0.0);
        }
        for k in 1..t.len() {
            let var = 2.0 * t[k].powf(alpha);
            let v = paths.iter().map(|p| p[k] * p[k]).sum::<f64>() / n;
            assert!((v - var).abs() < 3.0 * var * (2.0 / n).sqrt(), "t={} {v} vs {var}", t[k]);
        }
        // Scaled Brownian motion: Cov(chi(s), chi(t)) = 2 min(s, t).
        let (i, j) = (3, 7);
        let c = paths.iter().map(|p| p[i] * p[j]).sum::<f64>() / n;
        let (vi, vj, cij) = (2.0 * t[i], 2.0 * t[j], 2.0 * t[i]);
        let se = ((vi * vj + cij * cij) / n).sqrt();
        assert!((c - cij).abs() < 3.0 * se, "{c} vs {cij}");
    }

    #[test]
    fn fbm_rejects_bad_inputs() {
        assert!(FbmSampler::new(2.0, 1.0, 0.1).is_err());
        assert!(FbmSampler::new(1.0, 1.0, 0.3).is_err());
        assert!(FbmSampler::new(1.0, -1.0, 0.25).is_err());
    }

    #[test]
    fn samples_are_pure_in_seed_and_index() {
        let g = GridSpec::new(&DomainPair::unit_overlap(1).unwrap(), 10).unwrap();
        let s = FieldSampler::new(&model(0.4), &g).unwrap();
        let a = s.sample(5, 123);
        assert_eq!(a, s.sample(5, 123));
        assert_ne!(a.x1, s.sample(5, 124).x1);
        assert_ne!(a.x1, s.sample(6, 123).x1);
        assert_eq!(a.x1.len(), 10);
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let cov = build_covariance(&model(0.4), &g);
        let x1 = single.install(|| cholesky_sample(&cov, 11, 3000)).unwrap();
        let x3 = many.install(|| cholesky_sample(&cov, 11, 3000)).unwrap();
        assert_eq!(x1, x3);
    }

    #[test]
    fn dump_roundtrip_and_header() {
        let rows = vec![vec![1.0, -2.5, 3.25], vec![0.0, f64::MIN_POSITIVE, 7.0]];
        let mut buf = Vec::new();
        write_dump(&mut buf, 3, &rows).unwrap();
        assert_eq!(&buf[..4], b"BGRF");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(buf.len(), 16 + 6 * 8);
        assert_eq!(read_dump(&buf[..]).unwrap(), (3, rows));
        assert!(read_dump(&b"XXXX0000000000000000"[..]).is_err());
    }

    proptest! {
        #[test]
        fn factor_of_random_spd(vals in proptest::collection::vec(-1.0f64..1.0, 36)) {
            // B B^T + I is symmetric positive definite.
            let n = 6;
            let a = SymMatrix::from_lower(n, |i, j| {
                (0..n).map(|k| vals[i * n + k] * vals[j * n + k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 }
            });
            let f = CholeskyFactor::new(&a).unwrap();
            for i in 0..n {
                for j in 0..=i {
                    let s: f64 = (0..=j).map(|k| f.get(i, k) * f.get(j, k)).sum();
                    prop_assert!((s - a.get(i, j)).abs() < 1e-12);
                }
            }
        }
    }
}
