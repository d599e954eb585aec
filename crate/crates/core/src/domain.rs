//! Axis-aligned rectangles, finite unions of them, and the pair of
//! parameter sets `(A1, A2)` the two fields are maximized over.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Rect {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Rect {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::domain("Rect", format!("corner dimensions {} and {} differ or are zero", lo.len(), hi.len())));
        }
        for (j, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite()) || h < l {
                return Err(Error::domain("Rect", format!("axis {j}: [{l}, {h}] is not a finite interval")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    /// Closed intersection, possibly degenerate.
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for j in 0..self.dim() {
            let l = self.lo[j].max(other.lo[j]);
            let h = self.hi[j].min(other.hi[j]);
            if h < l {
                return None;
            }
            lo.push(l);
            hi.push(h);
        }
        Some(Rect { lo, hi })
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    /// First `m` coordinates.
    pub fn head(&self, m: usize) -> Rect {
        Rect { lo: self.lo[..m].to_vec(), hi: self.hi[..m].to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RectUnion {
    rects: Vec<Rect>,
}

impl RectUnion {
    pub fn new(rects: Vec<Rect>) -> Result<Self> {
        let Some(first) = rects.first() else {
            return Err(Error::domain("RectUnion", "at least one rectangle required"));
        };
        let n = first.dim();
        if let Some(r) = rects.iter().find(|r| r.dim() != n) {
            return Err(Error::domain("RectUnion", format!("mixed dimensions {n} and {}", r.dim())));
        }
        Ok(Self { rects })
    }

    pub fn single(r: Rect) -> Self {
        Self { rects: vec![r] }
    }

    pub fn rects(&self) -> &[Rect] {
        &self.rects
    }

    pub fn dim(&self) -> usize {
        self.rects[0].dim()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.rects.iter().any(|r| r.contains(p))
    }

    pub fn bounding_box(&self) -> Rect {
        let n = self.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for r in &self.rects {
            for j in 0..n {
                lo[j] = lo[j].min(r.lo[j]);
                hi[j] = hi[j].max(r.hi[j]);
            }
        }
        Rect { lo, hi }
    }

    /// Lebesgue measure, exact up to rounding (coordinate compression).
    pub fn measure(&self) -> f64 {
        union_measure(&self.rects)
    }

    pub fn intersection(&self, other: &RectUnion) -> Vec<Rect> {
        let mut out = Vec::new();
        for a in &self.rects {
            for b in &other.rects {
                if let Some(r) = a.intersect(b) {
                    out.push(r);
                }
            }
        }
        out
    }

    pub fn intersection_measure(&self, other: &RectUnion) -> f64 {
        union_measure(&self.intersection(other))
    }

    pub fn head(&self, m: usize) -> RectUnion {
        RectUnion { rects: self.rects.iter().map(|r| r.head(m)).collect() }
    }
}

fn union_measure(rects: &[Rect]) -> f64 {
    let rects: Vec<&Rect> = rects.iter().filter(|r| r.volume() > 0.0).collect();
    if rects.is_empty() {
        return 0.0;
    }
    let n = rects[0].dim();
    let mut cuts: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut c: Vec<f64> = rects.iter().flat_map(|r| [r.lo[j], r.hi[j]]).collect();
            c.sort_by(f64::total_cmp);
            c.dedup();
            c
        })
        .collect();
    for c in &mut cuts {
        if c.len() < 2 {
            return 0.0;
        }
    }
    let mut idx = vec![0usize; n];
    let mut total = 0.0;
    let mut mid = vec![0.0; n];
    loop {
        let mut vol = 1.0;
        for j in 0..n {
            let (a, b) = (cuts[j][idx[j]], cuts[j][idx[j] + 1]);
            mid[j] = 0.5 * (a + b);
            vol *= b - a;
        }
        if rects.iter().any(|r| r.contains(&mid)) {
            total += vol;
        }
        let mut j = 0;
        loop {
            if j == n {
                return total;
            }
            idx[j] += 1;
            if idx[j] + 1 < cuts[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// `(A1, A2)` in `R^N`. With `split_m < N` the sets factor as
/// `A1 = A1_M x prod [S_j, T_j]` and `A2 = A2_M x prod [T_j, R_j]` over the
/// trailing `N - M` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPair {
    pub a1: RectUnion,
    pub a2: RectUnion,
    pub dim_n: usize,
    pub split_m: usize,
}

impl DomainPair {
    pub fn new(a1: RectUnion, a2: RectUnion, split_m: usize) -> Result<Self> {
        let n = a1.dim();
        if a2.dim() != n {
            return Err(Error::domain("DomainPair", format!("A1 has dimension {n}, A2 has {}", a2.dim())));
        }
        if split_m > n {
            return Err(Error::domain("DomainPair", format!("split M = {split_m} exceeds N = {n}")));
        }
        let d = Self { a1, a2, dim_n: n, split_m };
        if d.a1.intersection(&d.a2).is_empty() {
            return Err(Error::domain("DomainPair", "A1 and A2 do not intersect"));
        }
        if split_m < n {
            d.check_product_structure()?;
            if d.mes_m() <= 0.0 {
                return Err(Error::domain("DomainPair", format!("mes_{split_m}(A1_M ∩ A2_M) is zero")));
            }
        }
        Ok(d)
    }

    /// `A1 = A2 = [0, 1]^N`.
    pub fn unit_overlap(n: usize) -> Result<Self> {
        let c = RectUnion::single(Rect::cube(n, 0.0, 1.0)?);
        Self::new(c.clone(), c, n)
    }

    /// `A1 = [0, 1]^N`, `A2 = [0, 1]^{N-1} x [1, 2]`, `M = N - 1`.
    pub fn unit_touching(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("DomainPair", "N must be >= 1"));
        }
        let a1 = RectUnion::single(Rect::cube(n, 0.0, 1.0)?);
        let mut lo = vec![0.0; n];
        let mut hi = vec![1.0; n];
        lo[n - 1] = 1.0;
        hi[n - 1] = 2.0;
        let a2 = RectUnion::single(Rect::new(lo, hi)?);
        Self::new(a1, a2, n - 1)
    }

    fn check_product_structure(&self) -> Result<()> {
        let m = self.split_m;
        let tail = |u: &RectUnion, which: &str| -> Result<Vec<(f64, f64)>> {
            let first = &u.rects()[0];
            let t: Vec<(f64, f64)> = (m..self.dim_n).map(|j| (first.lo[j], first.hi[j])).collect();
            for r in u.rects() {
                for (k, j) in (m..self.dim_n).enumerate() {
                    if r.lo[j] != t[k].0 || r.hi[j] != t[k].1 {
                        return Err(Error::domain(
                            "DomainPair",
                            format!("{which}: trailing axis {j} differs between rectangles, no product structure"),
                        ));
                    }
                }
            }
            Ok(t)
        };
        let t1 = tail(&self.a1, "A1")?;
        let t2 = tail(&self.a2, "A2")?;
        for (k, ((s, t), (t_, r))) in t1.iter().zip(&t2).enumerate() {
            if t != t_ || !(s <= t && t <= r) {
                return Err(Error::domain(
                    "DomainPair",
                    format!("axis {}: need [S, T] x [T, R] with S <= T <= R, got [{s}, {t}] and [{t_}, {r}]", m + k),
                ));
            }
        }
        Ok(())
    }

    pub fn mes_n(&self) -> f64 {
        self.a1.intersection_measure(&self.a2)
    }

    /// `mes_M(A1_M ∩ A2_M)` with `mes_0 = 1`.
    pub fn mes_m(&self) -> f64 {
        if self.split_m == 0 {
            return 1.0;
        }
        self.a1.head(self.split_m).intersection_measure(&self.a2.head(self.split_m))
    }

    /// True when the overlap has positive `N`-measure.
    pub fn overlaps(&self) -> bool {
        self.split_m == self.dim_n
    }
}
