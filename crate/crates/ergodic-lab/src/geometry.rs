//! Parallelepiped geometry: generated boxes, support functions, inscribed
//! balls, the greedy independent-subset decomposition, and the convolution
//! measure `mu_R` with its density bound.
//!
//! A parallelepiped here is the zonotope
//! `R = { t_1 u_1 + ... + t_n u_n : |t_j| <= r_j }` spanned by unit vectors
//! that may be linearly dependent. `decompose` extracts an independent
//! sub-parallelepiped `Q` with `Q < R < c* Q`; `mu_R` is the law of a sum of
//! independent uniform segments and is dominated by `|E|/|Q|` on every
//! measurable set.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Residual norm below which a vector counts as lying in a span.
pub const SPAN_TOL: f64 = 1e-9;
/// Gram determinants below this are treated as degenerate.
pub const GRAM_MIN_DET: f64 = 1e-12;

const SHARD_SIZE: u64 = 1 << 16;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
#[derive(Default)]
struct Orthonormal {
    basis: Vec<Vec<f64>>,
}

impl Orthonormal {
    fn residual(&self, v: &[f64]) -> Vec<f64> {
        let mut r = v.to_vec();
        for _ in 0..2 {
            for q in &self.basis {
                let c = dot(&r, q);
                for (ri, qi) in r.iter_mut().zip(q) {
                    *ri -= c * qi;
                }
            }
        }
        r
    }

    /// Residual norm of `v` against the current span.
    fn distance(&self, v: &[f64]) -> f64 {
        norm(&self.residual(v))
    }

    /// Extends the basis when `v` sticks out of the span by more than `tol`.
    fn add_if_independent(&mut self, v: &[f64], tol: f64) -> bool {
        let r = self.residual(v);
        let n = norm(&r);
        if n > tol {
            self.basis.push(r.iter().map(|x| x / n).collect());
            true
        } else {
            false
        }
    }
}

/// Unit spanning vectors `u_1..u_n` in `R^D` (dependencies allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVectorSet {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl UnitVectorSet {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::Domain("need at least one vector".into()));
        }
        let dim = vectors[0].len();
        if dim == 0 {
            return Err(Error::Domain("vectors must have dimension >= 1".into()));
        }
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::Mismatch("vectors have inconsistent dimensions".into()));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Domain("vector coordinates must be finite".into()));
            }
            if (norm(v) - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!(
                    "vector {v:?} is not unit length (|norm - 1| > 1e-12)"
                )));
            }
        }
        Ok(UnitVectorSet { dim, vectors })
    }

    /// Normalize arbitrary nonzero directions into a unit set.
    pub fn from_directions(directions: Vec<Vec<f64>>) -> Result<Self> {
        let mut vectors = Vec::with_capacity(directions.len());
        for v in directions {
            let n = norm(&v);
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::Domain("cannot normalize a zero direction".into()));
            }
            vectors.push(v.iter().map(|c| c / n).collect());
        }
        Self::new(vectors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Numerical rank with the span tolerance.
    pub fn rank(&self) -> usize {
        let mut basis = Orthonormal::default();
        self.vectors
            .iter()
            .filter(|v| basis.add_if_independent(v, SPAN_TOL))
            .count()
    }
}

#[derive(Serialize, Deserialize)]
struct ParallelepipedJson {
    vectors: Vec<Vec<f64>>,
    radii: Vec<f64>,
}

/// The symmetric box `R = { sum t_j u_j : |t_j| <= r_j }`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parallelepiped {
    vectors: UnitVectorSet,
    radii: Vec<f64>,
}

impl Parallelepiped {
    pub fn new(vectors: UnitVectorSet, radii: Vec<f64>) -> Result<Self> {
        if radii.len() != vectors.len() {
            return Err(Error::Mismatch("need one radius per vector".into()));
        }
        if radii.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::Domain("radii must be strictly positive".into()));
        }
        Ok(Parallelepiped { vectors, radii })
    }

    pub fn vectors(&self) -> &UnitVectorSet {
        &self.vectors
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    /// All `2^n` vertices `sum +-r_j u_j`.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        assert!(self.len() <= 20, "vertex enumeration limited to n <= 20");
        let n = self.len();
        let dim = self.dim();
        let mut out = Vec::with_capacity(1 << n);
        for mask in 0u32..(1 << n) {
            let mut x = vec![0.0; dim];
            for (j, (u, &r)) in self.vectors.vectors().iter().zip(&self.radii).enumerate() {
                let sign = if mask & (1 << j) != 0 { 1.0 } else { -1.0 };
                for i in 0..dim {
                    x[i] += sign * r * u[i];
                }
            }
            out.push(x);
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&ParallelepipedJson {
            vectors: self.vectors.vectors().to_vec(),
            radii: self.radii.clone(),
        })
        .expect("parallelepiped serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let dto: ParallelepipedJson = serde_json::from_str(text)
            .map_err(|e| Error::Domain(format!("bad parallelepiped JSON: {e}")))?;
        Parallelepiped::new(UnitVectorSet::new(dto.vectors)?, dto.radii)
    }
}

/// Support function of `R` in direction `phi`: `sum_j r_j |<phi, u_j>|`.
pub fn support(r: &Parallelepiped, phi: &[f64]) -> f64 {
    r.vectors()
        .vectors()
        .iter()
        .zip(r.radii())
        .map(|(u, &rad)| rad * dot(phi, u).abs())
        .sum()
}

/// Dual basis `w_k` of independent vectors: `<w_k, u_i> = delta_{ki}` within
/// the span. Built from the Gram matrix; degenerate Grams are rejected.
fn dual_basis(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let r = vectors.len();
    let dim = vectors[0].len();
    let mut gram = vec![vec![0.0f64; r]; r];
    for i in 0..r {
        for j in 0..r {
            gram[i][j] = dot(&vectors[i], &vectors[j]);
        }
    }
    let (inv, det) = invert_spd(&gram)?;
    if det < GRAM_MIN_DET {
        return Err(Error::Degenerate(format!(
            "Gram determinant {det:.3e} below {GRAM_MIN_DET:.0e}; dual basis undefined"
        )));
    }
    let mut dual = vec![vec![0.0f64; dim]; r];
    for k in 0..r {
        for i in 0..r {
            let c = inv[k][i];
            for d in 0..dim {
                dual[k][d] += c * vectors[i][d];
            }
        }
    }
    Ok(dual)
}

/// Invert a small symmetric positive-definite matrix by Gauss-Jordan with
/// partial pivoting; also returns the determinant.
fn invert_spd(m: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut det = 1.0f64;
    for col in 0..n {
        let (pivot, pval) = (col..n)
            .map(|i| (i, a[i][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty");
        if pval < GRAM_MIN_DET {
            return Err(Error::Degenerate("Gram matrix numerically singular".into()));
        }
        if pivot != col {
            a.swap(pivot, col);
            inv.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..n {
            if i != col && a[i][col] != 0.0 {
                let f = a[i][col];
                for j in 0..n {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    Ok((inv, det.abs()))
}

fn require_independent(r: &Parallelepiped) -> Result<()> {
    if r.vectors().rank() != r.len() {
        return Err(Error::Degenerate(
            "vectors are linearly dependent; dual basis undefined".into(),
        ));
    }
    Ok(())
}

/// Is `x` inside `c * R`? Requires independent vectors: the test projects
/// onto the span and checks every dual coordinate against `c * r_k`.
pub fn membership(r: &Parallelepiped, x: &[f64], c: f64) -> Result<bool> {
    if x.len() != r.dim() {
        return Err(Error::Mismatch("point has wrong dimension".into()));
    }
    if !(c > 0.0) {
        return Err(Error::Domain("scale must be positive".into()));
    }
    require_independent(r)?;
    let mut basis = Orthonormal::default();
    for u in r.vectors().vectors() {
        basis.add_if_independent(u, SPAN_TOL);
    }
    let out_of_span = basis.distance(x) > SPAN_TOL * norm(x).max(1.0);
    if out_of_span {
        return Ok(false);
    }
    let dual = dual_basis(r.vectors().vectors())?;
    for (w, &rad) in dual.iter().zip(r.radii()) {
        let t = dot(w, x);
        let limit = c * rad;
        if t.abs() > limit + SPAN_TOL * (1.0 + limit) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Facet distances and the inscribed ball of an independent parallelepiped.
#[derive(Debug, Clone, Serialize)]
pub struct InscribedBall {
    /// Distance of each facet pair from the origin: `h_j = r_j * c_j`.
    pub h: Vec<f64>,
    /// The inradius `rho = min_j h_j`.
    pub rho: f64,
    /// Shape constants `c_j = dist(u_j, span of the others)`.
    pub c: Vec<f64>,
    /// Index attaining the minimum.
    pub worst: usize,
    /// Unit normal of the minimizing facet.
    pub worst_normal: Vec<f64>,
}

/// The ball `{ |x| <= rho }` (within the span) is contained in `R`:
/// `h_j` is the distance from the origin to the facet slab `t_j = +-r_j`.
pub fn inscribed_ball(r: &Parallelepiped) -> Result<InscribedBall> {
    require_independent(r)?;
    let vs = r.vectors().vectors();
    let n = vs.len();
    let mut h = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut worst = 0usize;
    let mut worst_normal = Vec::new();
    for j in 0..n {
        let mut others = Orthonormal::default();
        for (i, u) in vs.iter().enumerate() {
            if i != j {
                others.add_if_independent(u, SPAN_TOL);
            }
        }
        let residual = others.residual(&vs[j]);
        let dist = norm(&residual);
        if dist <= SPAN_TOL {
            return Err(Error::Degenerate("vectors are linearly dependent".into()));
        }
        c.push(dist);
        h.push(r.radii()[j] * dist);
        if h[j] < h[worst] || j == 0 {
            worst = j;
            worst_normal = residual.iter().map(|x| x / dist).collect();
        }
    }
    let rho = h[worst];
    Ok(InscribedBall { h, rho, c, worst, worst_normal })
}

/// Output of the greedy radius-sorted decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    /// Original indices sorted by decreasing radius (stable on ties).
    pub order: Vec<usize>,
    /// Original indices of the independent subset `V`, in sorted order.
    pub independent: Vec<usize>,
    /// Block boundaries `0 = k_0 < k_1 < ... < k_s = n` over the sorted list;
    /// odd blocks are the independent runs.
    pub blocks: Vec<usize>,
    /// The inner parallelepiped `Q` built from `V`.
    #[serde(skip)]
    pub inner: Parallelepiped,
    /// Minimal `c*` with `R` contained in `c* Q`.
    pub containment: f64,
    /// Dual basis of `V` (one vector per independent generator).
    pub dual: Vec<Vec<f64>>,
    /// `det Gram(V)`; `sqrt` of this converts dual-coordinate volumes to
    /// Lebesgue measure on the span.
    pub gram_det: f64,
}

/// Sort by decreasing radius, select the greedy independent subset, cut the
/// sorted list into alternating independent/dependent blocks, and compute
/// the sharp containment constant `c* = max_k support(R, w_k) / r_k`.
pub fn decompose(r: &Parallelepiped) -> Result<Decomposition> {
    let n = r.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| r.radii()[b].total_cmp(&r.radii()[a]));

    let mut basis = Orthonormal::default();
    let mut selected_flags = Vec::with_capacity(n);
    let mut independent = Vec::new();
    for &idx in &order {
        // the greedy test doubles as the even-block span check: a rejected
        // vector is inside the span of the previously selected ones
        let taken = basis.add_if_independent(&r.vectors().vectors()[idx], SPAN_TOL);
        selected_flags.push(taken);
        if taken {
            independent.push(idx);
        }
    }
    if independent.is_empty() {
        return Err(Error::Degenerate("all vectors are numerically zero".into()));
    }

    let mut blocks = vec![0usize];
    for k in 1..n {
        if selected_flags[k] != selected_flags[k - 1] {
            blocks.push(k);
        }
    }
    blocks.push(n);

    let q_vectors: Vec<Vec<f64>> = independent
        .iter()
        .map(|&i| r.vectors().vectors()[i].clone())
        .collect();
    let q_radii: Vec<f64> = independent.iter().map(|&i| r.radii()[i]).collect();
    let dual = dual_basis(&q_vectors)?;

    let mut gram = vec![vec![0.0f64; q_vectors.len()]; q_vectors.len()];
    for i in 0..q_vectors.len() {
        for j in 0..q_vectors.len() {
            gram[i][j] = dot(&q_vectors[i], &q_vectors[j]);
        }
    }
    let (_, gram_det) = invert_spd(&gram)?;

    let containment = dual
        .iter()
        .zip(&q_radii)
        .map(|(w, &rad)| support(r, w) / rad)
        .fold(0.0f64, f64::max);

    let inner = Parallelepiped::new(UnitVectorSet::new(q_vectors)?, q_radii)?;
    Ok(Decomposition { order, independent, blocks, inner, containment, dual, gram_det })
}

/// Streamed sampling of `mu_R`: points `sum_j t_j u_j` with `t_j` uniform on
/// `[-r_j, r_j]`. Sampling is sharded with one RNG stream per shard so the
/// point set is identical no matter how shards are scheduled.
fn for_each_sample_shard<F>(r: &Parallelepiped, count: u64, seed: u64, shard_fn: F)
where
    F: Fn(u64, &mut dyn FnMut() -> Vec<f64>) + Sync,
{
    let shards: Vec<(u64, u64)> = (0..count.div_ceil(SHARD_SIZE))
        .map(|i| (i, SHARD_SIZE.min(count - i * SHARD_SIZE)))
        .collect();
    shards.par_iter().for_each(|&(shard, shard_count)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shard);
        let dists: Vec<Uniform<f64>> = r
            .radii()
            .iter()
            .map(|&rad| Uniform::new_inclusive(-rad, rad))
            .collect();
        let dim = r.dim();
        let mut remaining = shard_count;
        let mut draw = || {
            debug_assert!(remaining > 0);
            remaining -= 1;
            let mut x = vec![0.0f64; dim];
            for (u, dist) in r.vectors().vectors().iter().zip(&dists) {
                let t = dist.sample(&mut rng);
                for i in 0..dim {
                    x[i] += t * u[i];
                }
            }
            x
        };
        shard_fn(shard_count, &mut draw);
    });
}

/// `count` i.i.d. samples from `mu_R`, deterministic per seed. Draws the
/// same per-shard streams as [`verify_domination`], sequentially.
pub fn sample_mu_r(r: &Parallelepiped, count: u64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let mut out = Vec::with_capacity(count as usize);
    let dim = r.dim();
    for shard in 0..count.div_ceil(SHARD_SIZE) {
        let shard_count = SHARD_SIZE.min(count - shard * SHARD_SIZE);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shard);
        let dists: Vec<Uniform<f64>> = r
            .radii()
            .iter()
            .map(|&rad| Uniform::new_inclusive(-rad, rad))
            .collect();
        for _ in 0..shard_count {
            let mut x = vec![0.0f64; dim];
            for (u, dist) in r.vectors().vectors().iter().zip(&dists) {
                let t = dist.sample(&mut rng);
                for i in 0..dim {
                    x[i] += t * u[i];
                }
            }
            out.push(x);
        }
    }
    Ok(out)
}

/// An axis box in the dual coordinates of the independent subset `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DualBox {
    fn volume_in_dual_coords(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(&a, &b)| b - a).product()
    }

    fn contains(&self, t: &[f64]) -> bool {
        t.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&x, (&a, &b))| a <= x && x <= b)
    }
}

/// Monte-Carlo verification report for the density bound
/// `mu_R(E) <= |E| / |Q|`.
#[derive(Debug, Clone, Serialize)]
pub struct MeasureSampleReport {
    pub samples: u64,
    pub boxes: Vec<DualBox>,
    pub empirical: Vec<f64>,
    pub stderr: Vec<f64>,
    pub bound: Vec<f64>,
    pub pass: bool,
    /// Largest observed `empirical / |E|` against the reference `1 / |Q|`.
    pub max_density: f64,
    /// Largest observed `mu_R(E) / mu_{R'}(E)` with `R' = c* Q`.
    pub domination_constant: f64,
}

/// Estimate `mu_R(E)` for each test box by Monte Carlo and check the
/// `|E|/|Q|` bound at three binomial standard errors.
pub fn verify_domination(
    r: &Parallelepiped,
    boxes: &[DualBox],
    samples: u64,
    seed: u64,
) -> Result<MeasureSampleReport> {
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    if boxes.is_empty() {
        return Err(Error::Domain("need at least one test box".into()));
    }
    let decomp = decompose(r)?;
    let rank = decomp.independent.len();
    for b in boxes {
        if b.lo.len() != rank || b.hi.len() != rank {
            return Err(Error::Mismatch(format!(
                "test boxes must have {rank} dual coordinates"
            )));
        }
        if b.lo.iter().zip(&b.hi).any(|(a, b)| a > b) {
            return Err(Error::Domain("box lower corner exceeds upper corner".into()));
        }
    }
    if decomp.gram_det < GRAM_MIN_DET {
        return Err(Error::Degenerate("inner parallelepiped has zero volume".into()));
    }
    let sqrt_gram = decomp.gram_det.sqrt();
    // |Q| = 2^r * prod r_k * sqrt(det Gram(V)) on the span of V
    let q_volume = (2.0f64).powi(rank as i32)
        * decomp.inner.radii().iter().product::<f64>()
        * sqrt_gram;

    // per-shard hit counting; integer merges are order-independent
    let counts = std::sync::Mutex::new(vec![0u64; boxes.len()]);
    for_each_sample_shard(r, samples, seed, |shard_count, draw| {
        let mut local = vec![0u64; boxes.len()];
        let mut t = vec![0.0f64; rank];
        for _ in 0..shard_count {
            let x = draw();
            for (k, w) in decomp.dual.iter().enumerate() {
                t[k] = dot(w, &x);
            }
            for (b, c) in boxes.iter().zip(local.iter_mut()) {
                if b.contains(&t) {
                    *c += 1;
                }
            }
        }
        let mut guard = counts.lock().expect("no poisoning");
        for (total, add) in guard.iter_mut().zip(&local) {
            *total += add;
        }
    });
    let counts = counts.into_inner().expect("no poisoning");

    let c_star = decomp.containment;
    let r_prime_vol_dual: f64 = decomp
        .inner
        .radii()
        .iter()
        .map(|&rad| 2.0 * c_star * rad)
        .product();

    let mut empirical = Vec::with_capacity(boxes.len());
    let mut stderr = Vec::with_capacity(boxes.len());
    let mut bound = Vec::with_capacity(boxes.len());
    let mut pass = true;
    let mut max_density = 0.0f64;
    let mut domination = 0.0f64;
    for (b, &hits) in boxes.iter().zip(&counts) {
        let p = hits as f64 / samples as f64;
        let se = (p * (1.0 - p) / samples as f64).sqrt();
        let e_volume = b.volume_in_dual_coords() * sqrt_gram;
        let bnd = e_volume / q_volume;
        if p > bnd + 3.0 * se {
            pass = false;
        }
        if e_volume > 0.0 {
            max_density = max_density.max(p / e_volume * q_volume);
        }
        // overlap with R' = c* Q in dual coordinates
        let overlap: f64 = b
            .lo
            .iter()
            .zip(&b.hi)
            .zip(decomp.inner.radii())
            .map(|((&a, &bb), &rad)| (bb.min(c_star * rad) - a.max(-c_star * rad)).max(0.0))
            .product();
        let mu_r_prime = overlap / r_prime_vol_dual;
        if mu_r_prime > 0.0 {
            domination = domination.max(p / mu_r_prime);
        }
        empirical.push(p);
        stderr.push(se);
        bound.push(bnd);
    }
    Ok(MeasureSampleReport {
        samples,
        boxes: boxes.to_vec(),
        empirical,
        stderr,
        bound,
        pass,
        max_density,
        domination_constant: domination,
    })
}

/// Deterministic random test boxes in the dual coordinates of `V`,
/// spread over `[-scale * c* r_k, scale * c* r_k]`.
pub fn random_dual_boxes(
    decomp: &Decomposition,
    count: usize,
    seed: u64,
    scale: f64,
) -> Vec<DualBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let rank = decomp.independent.len();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut lo = Vec::with_capacity(rank);
        let mut hi = Vec::with_capacity(rank);
        for k in 0..rank {
            let limit = scale * decomp.containment * decomp.inner.radii()[k];
            let dist = Uniform::new_inclusive(-limit, limit);
            let a = dist.sample(&mut rng);
            let b = dist.sample(&mut rng);
            lo.push(a.min(b));
            hi.push(a.max(b));
        }
        out.push(DualBox { lo, hi });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Parallelepiped {
        Parallelepiped::new(
            UnitVectorSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    fn tilted_pair() -> Parallelepiped {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Parallelepiped::new(
            UnitVectorSet::new(vec![vec![1.0, 0.0], vec![s, s]]).unwrap(),
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn support_examples() {
        let sq = unit_square();
        assert!((support(&sq, &[1.0, 0.0]) - 1.0).abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((support(&sq, &[s, s]) - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(support(&sq, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn membership_examples() {
        let sq = unit_square();
        assert!(membership(&sq, &[0.5, 0.5], 1.0).unwrap());
        assert!(!membership(&sq, &[1.5, 0.0], 1.0).unwrap());
        assert!(membership(&sq, &[1.5, 0.0], 2.0).unwrap());

        // boundary point of the tilted pair: t = (-1/sqrt2, 1)
        let tp = tilted_pair();
        let x = vec![0.0, std::f64::consts::FRAC_1_SQRT_2];
        assert!(membership(&tp, &x, 1.0).unwrap());
        assert!(!membership(&tp, &x, 0.999).unwrap());

        // dependent vectors have no dual basis
        let dep = Parallelepiped::new(
            UnitVectorSet::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap(),
            vec![1.0, 1.0],
        )
        .unwrap();
        assert!(matches!(membership(&dep, &[0.0, 0.0], 1.0), Err(Error::Degenerate(_))));

        // out of span is outside
        let line = Parallelepiped::new(
            UnitVectorSet::new(vec![vec![1.0, 0.0]]).unwrap(),
            vec![2.0],
        )
        .unwrap();
        assert!(membership(&line, &[1.0, 0.0], 1.0).unwrap());
        assert!(!membership(&line, &[0.0, 0.5], 1.0).unwrap());
    }

    #[test]
    fn inscribed_ball_examples() {
        let ball = inscribed_ball(&unit_square()).unwrap();
        assert!((ball.rho - 1.0).abs() < 1e-12);
        assert!((ball.h[0] - 1.0).abs() < 1e-12);

        let ball = inscribed_ball(&tilted_pair()).unwrap();
        let expect = std::f64::consts::FRAC_1_SQRT_2;
        assert!((ball.h[0] - expect).abs() < 1e-12);
        assert!((ball.h[1] - expect).abs() < 1e-12);
        assert!((ball.rho - expect).abs() < 1e-12);

        // homogeneity: scaling radii scales h and rho
        let t = 3.5;
        let scaled = Parallelepiped::new(
            tilted_pair().vectors().clone(),
            tilted_pair().radii().iter().map(|r| r * t).collect(),
        )
        .unwrap();
        let sball = inscribed_ball(&scaled).unwrap();
        assert!((sball.rho - t * ball.rho).abs() < 1e-12);
        for (a, b) in sball.h.iter().zip(&ball.h) {
            assert!((a - t * b).abs() < 1e-12);
        }
    }

    #[test]
    fn inscribed_ball_direction_test() {
        let r = tilted_pair();
        let ball = inscribed_ball(&r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dist = Uniform::new_inclusive(-1.0, 1.0);
        for _ in 0..2_000 {
            let mut e = vec![dist.sample(&mut rng), dist.sample(&mut rng)];
            let n = norm(&e);
            if n < 1e-6 {
                continue;
            }
            e.iter_mut().for_each(|c| *c /= n);
            let inside: Vec<f64> =
                e.iter().map(|c| c * ball.rho * (1.0 - 1e-9)).collect();
            assert!(membership(&r, &inside, 1.0).unwrap());
        }
        let outside: Vec<f64> = ball
            .worst_normal
            .iter()
            .map(|c| c * ball.rho * (1.0 + 1e-3))
            .collect();
        assert!(!membership(&r, &outside, 1.0).unwrap());
    }

    #[test]
    fn decompose_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = Parallelepiped::new(
            UnitVectorSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s]]).unwrap(),
            vec![4.0, 2.0, 1.0],
        )
        .unwrap();
        let d = decompose(&r).unwrap();
        assert_eq!(d.order, vec![0, 1, 2]);
        assert_eq!(d.independent, vec![0, 1]);
        assert_eq!(d.blocks, vec![0, 2, 3]);
        let expect = (2.0 + std::f64::consts::SQRT_2 / 2.0) / 2.0;
        assert!((d.containment - expect).abs() < 1e-12);

        // independent input: Q = R, c* = 1
        let d = decompose(&unit_square()).unwrap();
        assert_eq!(d.independent.len(), 2);
        assert!((d.containment - 1.0).abs() < 1e-12);

        // duplicated vector: c* = 2
        let dup = Parallelepiped::new(
            UnitVectorSet::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap(),
            vec![1.0, 1.0],
        )
        .unwrap();
        let d = decompose(&dup).unwrap();
        assert_eq!(d.independent, vec![0]);
        assert!((d.containment - 2.0).abs() < 1e-12);
    }

    #[test]
    fn decompose_vertices_within_containment() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = Parallelepiped::new(
            UnitVectorSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s]]).unwrap(),
            vec![4.0, 2.0, 1.0],
        )
        .unwrap();
        let d = decompose(&r).unwrap();
        let mut touch = 0.0f64;
        for v in r.vertices() {
            assert!(membership(&d.inner, &v, d.containment * (1.0 + 1e-9)).unwrap());
            for (w, &rad) in d.dual.iter().zip(d.inner.radii()) {
                touch = touch.max(dot(w, &v).abs() / (d.containment * rad));
            }
        }
        assert!((touch - 1.0).abs() < 1e-9, "some vertex touches the boundary");
    }

    #[test]
    fn decompose_homogeneous() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let vectors =
            UnitVectorSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s]]).unwrap();
        let base = Parallelepiped::new(vectors.clone(), vec![4.0, 2.0, 1.0]).unwrap();
        let scaled =
            Parallelepiped::new(vectors, vec![4.0 * 7.0, 2.0 * 7.0, 7.0]).unwrap();
        let a = decompose(&base).unwrap();
        let b = decompose(&scaled).unwrap();
        assert_eq!(a.order, b.order);
        assert_eq!(a.independent, b.independent);
        assert_eq!(a.blocks, b.blocks);
        assert!((a.containment - b.containment).abs() < 1e-12);
    }

    #[test]
    fn sampler_statistics() {
        let seg = Parallelepiped::new(
            UnitVectorSet::new(vec![vec![1.0, 0.0]]).unwrap(),
            vec![2.0],
        )
        .unwrap();
        let pts = sample_mu_r(&seg, 40_000, 9).unwrap();
        let mean: f64 = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        assert!(mean.abs() < 4.0 / (pts.len() as f64).sqrt() * 3.0);
        assert!(pts.iter().all(|p| p[1] == 0.0 && p[0].abs() <= 2.0));

        // unit square: quadrant probability 1/4 within 3 sigma
        let sq = unit_square();
        let pts = sample_mu_r(&sq, 40_000, 11).unwrap();
        let hits = pts.iter().filter(|p| p[0] >= 0.0 && p[1] >= 0.0).count() as f64;
        let p = hits / pts.len() as f64;
        let sigma = (0.25 * 0.75 / pts.len() as f64).sqrt();
        assert!((p - 0.25).abs() < 3.0 * sigma, "p = {p}");
    }

    #[test]
    fn sampler_deterministic_and_in_containment() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = Parallelepiped::new(
            UnitVectorSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s]]).unwrap(),
            vec![4.0, 2.0, 1.0],
        )
        .unwrap();
        let a = sample_mu_r(&r, 70_000, 42).unwrap();
        let b = sample_mu_r(&r, 70_000, 42).unwrap();
        assert_eq!(a, b);
        let d = decompose(&r).unwrap();
        for p in a.iter().take(5_000) {
            assert!(membership(&d.inner, p, d.containment * (1.0 + 1e-9)).unwrap());
        }
    }

    #[test]
    fn sampler_marginal_ks() {
        // Kolmogorov-Smirnov on the first dual coordinate of an independent
        // parallelepiped; 0.1% critical value is 1.9494 / sqrt(N)
        let seg = Parallelepiped::new(
            UnitVectorSet::new(vec![vec![1.0], vec![-1.0]]).unwrap(),
            vec![1.5, 0.5],
        )
        .unwrap();
        let _ = seg;
        let sq = unit_square();
        let n = 100_000u64;
        let pts = sample_mu_r(&sq, n, 17).unwrap();
        let mut xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        let mut ks = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            let cdf = (x + 1.0) / 2.0; // uniform on [-1, 1]
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            ks = ks.max((emp_hi - cdf).abs()).max((cdf - emp_lo).abs());
        }
        assert!(ks < 1.9494 / (n as f64).sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn domination_reports() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = Parallelepiped::new(
            UnitVectorSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s]]).unwrap(),
            vec![4.0, 2.0, 1.0],
        )
        .unwrap();
        let d = decompose(&r).unwrap();
        let boxes = random_dual_boxes(&d, 25, 3, 1.2);
        let report = verify_domination(&r, &boxes, 200_000, 5).unwrap();
        assert!(report.pass);
        assert_eq!(report.empirical.len(), 25);

        // a box fully outside c* Q sees no mass
        let rank = d.independent.len();
        let far = DualBox {
            lo: vec![100.0; rank],
            hi: vec![101.0; rank],
        };
        let report = verify_domination(&r, &[far], 50_000, 5).unwrap();
        assert_eq!(report.empirical[0], 0.0);
        assert!(report.pass);

        // independent R: mu_R is exactly uniform, probabilities match volumes
        let sq = unit_square();
        let b = DualBox { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] };
        let report = verify_domination(&sq, &[b], 100_000, 7).unwrap();
        let sigma = (0.25 * 0.75f64 / 100_000.0).sqrt();
        assert!((report.empirical[0] - 0.25).abs() < 4.0 * sigma);
        assert!(report.pass);
    }

    #[test]
    fn parallelepiped_json() {
        let r = unit_square();
        let text = r.to_json_string();
        let back = Parallelepiped::from_json_str(&text).unwrap();
        assert_eq!(r, back);
        assert!(Parallelepiped::from_json_str("{\"vectors\":[[2,0]],\"radii\":[1]}").is_err());
        assert!(Parallelepiped::from_json_str("{\"vectors\":[[1,0]],\"radii\":[0]}").is_err());
        assert!(Parallelepiped::from_json_str("{\"vectors\":[],\"radii\":[]}").is_err());
    }
}
