//! Integer linear algebra over commuting shift families.
//!
//! A [`ShiftFamily`] is a list of integer vectors `v_1..v_n` acting on a
//! [`GridSpace`] by `x -> x + v_k mod N`. Dependence is modelled in the free
//! lattice `Z^D` (no modulus): a relation is an integer vector `p` with
//! `sum_k p_k v_k = 0`. All arithmetic here is exact; matrices live in
//! arbitrary-precision integers or rationals internally.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::space::GridSpace;
use crate::{Error, Result};

/// Commuting shifts `U_k : x -> x + v_k mod N` on a grid space.
///
/// Generators are stored exactly as given; they are reduced modulo the
/// moduli only when acting on points, never for the dependence analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftFamily {
    space: GridSpace,
    generators: Vec<Vec<i64>>,
    cyclic: bool,
}

/// An integer relation `sum_k coeffs[k] * v_k = 0` in the free lattice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationVector {
    pub coeffs: Vec<i64>,
}

/// The reduction `U_k^{l_k} = U_{b_1}^{a_{1,k}} o ... o U_{b_d}^{a_{d,k}}`
/// expressing every non-basis generator through the chosen basis.
///
/// `assembled()` returns the `d x n` matrix `[I_d | a]` in basis-first
/// column order. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionMatrix {
    pub basis: Vec<usize>,
    #[serde(default)]
    pub nonbasis: Vec<usize>,
    pub l: Vec<u64>,
    pub a: Vec<Vec<i64>>,
}

impl ReductionMatrix {
    /// `[I_d | a]` with columns ordered basis-first.
    pub fn assembled(&self) -> Vec<Vec<i64>> {
        let d = self.basis.len();
        let n = d + self.nonbasis.len();
        let mut m = vec![vec![0i64; n]; d];
        for (j, row) in m.iter_mut().enumerate() {
            row[j] = 1;
            for (c, col) in self.a.iter().enumerate() {
                row[d + c] = col[j];
            }
        }
        m
    }
}

#[derive(Serialize, Deserialize)]
struct FamilyJson {
    moduli: Vec<u64>,
    generators: Vec<Vec<i64>>,
}

impl ShiftFamily {
    pub fn new(space: GridSpace, generators: Vec<Vec<i64>>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::Domain("a shift family needs at least one generator".into()));
        }
        for g in &generators {
            if g.len() != space.dims() {
                return Err(Error::Mismatch(format!(
                    "generator has {} coordinates, space has {} axes",
                    g.len(),
                    space.dims()
                )));
            }
        }
        Ok(ShiftFamily { space, generators, cyclic: false })
    }

    pub fn space(&self) -> &GridSpace {
        &self.space
    }

    /// Number of generators `n`.
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn generators(&self) -> &[Vec<i64>] {
        &self.generators
    }

    pub fn generator(&self, k: usize) -> &[i64] {
        &self.generators[k]
    }

    /// `max_k ||v_k||_inf`.
    pub fn max_norm(&self) -> u64 {
        self.generators
            .iter()
            .flat_map(|g| g.iter().map(|&c| c.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    /// Whether windows may wrap the cycle freely. Set for rotation-built
    /// systems, whose shifts are genuinely periodic rather than truncations
    /// of a free `Z^D` action.
    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    /// Wrap-around guard: windows with sides up to `max_side` are exact
    /// truncations of the free `Z^D` action when
    /// `(max_side - 1) * max_k ||v_k||_inf * n < min_i N_i`,
    /// because any two window offsets then differ by less than a full period
    /// in every coordinate. Cyclic (rotation-conjugated) families are exempt:
    /// wrapping is their true dynamics.
    pub fn window_guard(&self, max_side: u64) -> Result<()> {
        if self.cyclic {
            return Ok(());
        }
        let reach = (max_side.saturating_sub(1) as i128)
            * self.max_norm() as i128
            * self.len() as i128;
        let modulus = self.space.min_modulus();
        if reach < modulus as i128 {
            Ok(())
        } else {
            Err(Error::Guard { reach, modulus })
        }
    }

    /// Exact check that `p` is a relation: `sum p_k v_k = 0` in `Z^D`.
    pub fn check_relation(&self, p: &[i64]) -> bool {
        if p.len() != self.len() {
            return false;
        }
        (0..self.space.dims()).all(|i| {
            self.generators
                .iter()
                .zip(p)
                .map(|(g, &c)| g[i] as i128 * c as i128)
                .sum::<i128>()
                == 0
        })
    }

    /// Rank over the rationals of the `D x n` generator matrix.
    pub fn rank(&self) -> usize {
        self.kernel_and_rank().0
    }

    /// A primitive basis of the integer kernel `{ p : sum p_k v_k = 0 }`.
    ///
    /// Vectors are normalized so their first nonzero coefficient is positive.
    pub fn relation_kernel(&self) -> Vec<RelationVector> {
        self.kernel_and_rank().1
    }

    fn kernel_and_rank(&self) -> (usize, Vec<RelationVector>) {
        let n = self.len();
        let rows = self.space.dims();
        let mut h: Vec<Vec<BigInt>> = self
            .generators
            .iter()
            .map(|g| g.iter().map(|&c| BigInt::from(c)).collect())
            .collect();
        let mut u: Vec<Vec<BigInt>> = (0..n)
            .map(|j| (0..n).map(|i| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
            .collect();

        // Column reduction: after handling row r, every column >= c is zero
        // in rows 0..=r, so the trailing columns of u span the kernel.
        let mut c = 0usize;
        for r in 0..rows {
            if c == n {
                break;
            }
            loop {
                let mut pivot: Option<usize> = None;
                for j in c..n {
                    if !h[j][r].is_zero() {
                        pivot = match pivot {
                            Some(p) if h[p][r].abs() <= h[j][r].abs() => Some(p),
                            _ => Some(j),
                        };
                    }
                }
                let Some(p) = pivot else { break };
                let mut clean = true;
                for j in c..n {
                    if j == p || h[j][r].is_zero() {
                        continue;
                    }
                    let q = &h[j][r] / &h[p][r];
                    if !q.is_zero() {
                        for i in 0..rows {
                            let t = &h[p][i] * &q;
                            h[j][i] -= t;
                        }
                        for i in 0..n {
                            let t = &u[p][i] * &q;
                            u[j][i] -= t;
                        }
                    }
                    if !h[j][r].is_zero() {
                        clean = false;
                    }
                }
                if clean {
                    h.swap(c, p);
                    u.swap(c, p);
                    c += 1;
                    break;
                }
            }
        }

        let mut kernel = Vec::new();
        for j in c..n {
            debug_assert!(h[j].iter().all(Zero::is_zero));
            kernel.push(RelationVector { coeffs: normalize_primitive(&u[j]) });
        }
        (c, kernel)
    }

    /// Greedy earliest-index independent subset: keep `v_k` when it is not
    /// in the rational span of `v_1..v_{k-1}`. Returns 0-based indices.
    pub fn select_independent(&self) -> Vec<usize> {
        let mut echelon = QEchelon::new(self.space.dims());
        let mut out = Vec::new();
        for (k, g) in self.generators.iter().enumerate() {
            let v: Vec<BigRational> =
                g.iter().map(|&c| BigRational::from(BigInt::from(c))).collect();
            if echelon.try_insert(v) {
                out.push(k);
            }
        }
        out
    }

    /// For every non-basis generator, the minimal exponent `l_k >= 1` with
    /// `l_k * v_k` in the integer lattice spanned by the basis columns,
    /// together with the exact coefficients.
    pub fn build_reduction(&self) -> Result<ReductionMatrix> {
        let basis = self.select_independent();
        let d = basis.len();
        if d == 0 {
            return Err(Error::Domain("no independent generator".into()));
        }
        let b_cols: Vec<&Vec<i64>> = basis.iter().map(|&k| &self.generators[k]).collect();
        let mut nonbasis = Vec::new();
        let mut l = Vec::new();
        let mut a: Vec<Vec<i64>> = Vec::new();
        for (k, g) in self.generators.iter().enumerate() {
            if basis.contains(&k) {
                continue;
            }
            let y = solve_rational(&b_cols, g)?;
            let mut lcm = BigInt::one();
            for c in &y {
                lcm = lcm.lcm(c.denom());
            }
            let lk = lcm
                .to_u64()
                .ok_or_else(|| Error::Degenerate("reduction exponent exceeds u64".into()))?;
            let coeffs: Vec<i64> = y
                .iter()
                .map(|c| {
                    let v = c * BigRational::from(lcm.clone());
                    debug_assert!(v.is_integer());
                    v.to_integer()
                        .to_i64()
                        .ok_or_else(|| Error::Degenerate("reduction coefficient exceeds i64".into()))
                })
                .collect::<Result<_>>()?;
            // l_k * v_k = sum_j a_{j,k} v_{b_j}, verified exactly
            for i in 0..self.space.dims() {
                let lhs = lk as i128 * g[i] as i128;
                let rhs: i128 = coeffs
                    .iter()
                    .zip(&b_cols)
                    .map(|(&c, b)| c as i128 * b[i] as i128)
                    .sum();
                if lhs != rhs {
                    return Err(Error::Degenerate("reduction identity failed to verify".into()));
                }
            }
            nonbasis.push(k);
            l.push(lk);
            a.push(coeffs);
        }
        Ok(ReductionMatrix { basis, nonbasis, l, a })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&FamilyJson {
            moduli: self.space.moduli().to_vec(),
            generators: self.generators.clone(),
        })
        .expect("family serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let dto: FamilyJson = serde_json::from_str(text)
            .map_err(|e| Error::Domain(format!("bad shift-family JSON: {e}")))?;
        let space = GridSpace::new(dto.moduli)?;
        ShiftFamily::new(space, dto.generators)
    }

    /// Family restricted to the given generator indices (same space).
    pub fn restrict(&self, indices: &[usize]) -> Result<ShiftFamily> {
        let gens = indices
            .iter()
            .map(|&k| {
                self.generators
                    .get(k)
                    .cloned()
                    .ok_or_else(|| Error::Domain(format!("generator index {k} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut family = ShiftFamily::new(self.space.clone(), gens)?;
        family.cyclic = self.cyclic;
        Ok(family)
    }
}

fn normalize_primitive(v: &[BigInt]) -> Vec<i64> {
    let mut content = BigInt::zero();
    for c in v {
        content = content.gcd(c);
    }
    if content.is_zero() {
        content = BigInt::one();
    }
    let mut out: Vec<BigInt> = v.iter().map(|c| c / &content).collect();
    if let Some(first) = out.iter().find(|c| !c.is_zero()) {
        if first.is_negative() {
            for c in &mut out {
                *c = -&*c;
            }
        }
    }
    out.iter()
        .map(|c| c.to_i64().expect("kernel coefficients fit in i64"))
        .collect()
}

/// Incremental exact row echelon over the rationals.
struct QEchelon {
    dims: usize,
    rows: Vec<Vec<BigRational>>,
    pivots: Vec<usize>,
}

impl QEchelon {
    fn new(dims: usize) -> Self {
        QEchelon { dims, rows: Vec::new(), pivots: Vec::new() }
    }

    /// Returns true (and absorbs `v`) when `v` extends the span.
    fn try_insert(&mut self, mut v: Vec<BigRational>) -> bool {
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if !v[p].is_zero() {
                let factor = &v[p] / &row[p];
                for i in 0..self.dims {
                    let t = &row[i] * &factor;
                    v[i] -= t;
                }
            }
        }
        match v.iter().position(|c| !c.is_zero()) {
            Some(p) => {
                self.rows.push(v);
                self.pivots.push(p);
                true
            }
            None => false,
        }
    }
}

/// Solve `B y = target` exactly over the rationals, where the columns of `B`
/// are independent and `target` lies in their span.
fn solve_rational(cols: &[&Vec<i64>], target: &[i64]) -> Result<Vec<BigRational>> {
    let d = cols.len();
    let rows = target.len();
    let mut m: Vec<Vec<BigRational>> = (0..rows)
        .map(|i| {
            let mut row: Vec<BigRational> = cols
                .iter()
                .map(|c| BigRational::from(BigInt::from(c[i])))
                .collect();
            row.push(BigRational::from(BigInt::from(target[i])));
            row
        })
        .collect();

    let mut pivot_rows = Vec::new();
    let mut r = 0usize;
    for c in 0..d {
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            return Err(Error::Degenerate("basis columns are not independent".into()));
        };
        m.swap(r, p);
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let factor = &m[i][c] / &m[r][c];
                for j in c..=d {
                    let t = &m[r][j] * &factor;
                    m[i][j] -= t;
                }
            }
        }
        pivot_rows.push(r);
        r += 1;
    }
    // rows below the pivots must have vanished, otherwise the target is
    // outside the span (cannot happen for greedy-selected bases)
    for i in r..rows {
        if !m[i][d].is_zero() {
            return Err(Error::Degenerate("target vector outside basis span".into()));
        }
    }
    Ok((0..d).map(|c| &m[pivot_rows[c]][d] / &m[pivot_rows[c]][c]).collect())
}

/// Exactly conjugate a rational rotation system to a shift family on a cycle.
///
/// `Q' = lcm(q_k) * guard`; frequency `p_k/q_k` becomes the integer shift
/// `p_k * Q'/q_k` on `Z_{Q'}`, so `theta_k = v_k / Q'` exactly.
pub fn rotation_to_shift(frequencies: &[Ratio<i64>], guard: u64) -> Result<ShiftFamily> {
    if frequencies.is_empty() {
        return Err(Error::Domain("need at least one rotation frequency".into()));
    }
    if guard == 0 {
        return Err(Error::Domain("guard must be a positive integer".into()));
    }
    let mut q: u64 = 1;
    for f in frequencies {
        let den = *f.denom();
        if den == 0 {
            return Err(Error::Domain("zero denominator in rotation frequency".into()));
        }
        if f.numer().unsigned_abs() >= den.unsigned_abs() {
            return Err(Error::Domain(format!(
                "rotation frequency {f} must be a proper fraction"
            )));
        }
        q = num_integer::lcm(q, den.unsigned_abs());
    }
    let total = q
        .checked_mul(guard)
        .ok_or_else(|| Error::Domain("lcm * guard overflows".into()))?;
    let space = GridSpace::new(vec![total])?;
    let generators = frequencies
        .iter()
        .map(|f| {
            let scale = (total / f.denom().unsigned_abs()) as i64;
            vec![f.numer() * scale]
        })
        .collect();
    let mut family = ShiftFamily::new(space, generators)?;
    family.cyclic = true;
    Ok(family)
}

/// Parse a rational written as `p/q` or a bare integer.
pub fn parse_rational(text: &str) -> Result<Ratio<i64>> {
    let text = text.trim();
    let (num_str, den_str) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let numer: i64 = num_str
        .parse()
        .map_err(|_| Error::Domain(format!("bad rational numerator '{num_str}'")))?;
    let denom: i64 = den_str
        .parse()
        .map_err(|_| Error::Domain(format!("bad rational denominator '{den_str}'")))?;
    if denom == 0 {
        return Err(Error::Domain("zero denominator".into()));
    }
    Ok(Ratio::new(numer, denom))
}

/// First `count` continued-fraction convergents of `x` in `(0,1)`, skipping
/// the trivial `0/1`. Denominators are strictly increasing; the expansion
/// stops early when it terminates or exceeds 64-bit precision.
pub fn convergents(x: f64, count: usize) -> Result<Vec<Ratio<i64>>> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("convergents need 0 < x < 1, got {x}")));
    }
    if count == 0 {
        return Err(Error::Domain("need at least one convergent".into()));
    }
    let mut out = Vec::with_capacity(count);
    let (mut p_prev, mut q_prev) = (1i64, 0i64); // p_{-1}/q_{-1}
    let (mut p_cur, mut q_cur) = (0i64, 1i64); // a_0 = 0
    let mut frac = x;
    while out.len() < count {
        if frac < 1e-13 {
            break;
        }
        let y = 1.0 / frac;
        if y > 1e15 {
            break;
        }
        let a = y.floor() as i64;
        let (Some(p), Some(q)) = (
            a.checked_mul(p_cur).and_then(|t| t.checked_add(p_prev)),
            a.checked_mul(q_cur).and_then(|t| t.checked_add(q_prev)),
        ) else {
            break;
        };
        out.push(Ratio::new(p, q));
        (p_prev, q_prev) = (p_cur, q_cur);
        (p_cur, q_cur) = (p, q);
        frac = y - a as f64;
    }
    if out.is_empty() {
        return Err(Error::Degenerate("continued fraction produced no convergents".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn family(moduli: &[u64], gens: &[&[i64]]) -> ShiftFamily {
        let space = GridSpace::new(moduli.to_vec()).unwrap();
        ShiftFamily::new(space, gens.iter().map(|g| g.to_vec()).collect()).unwrap()
    }

    /// Brute-force search for a relation with coefficients in `-bound..=bound`.
    fn brute_relation(gens: &[&[i64]], bound: i64) -> Option<Vec<i64>> {
        let n = gens.len();
        let mut p = vec![-bound; n];
        loop {
            if p.iter().any(|&c| c != 0) {
                let relation = (0..gens[0].len()).all(|i| {
                    gens.iter().zip(&p).map(|(g, &c)| g[i] * c).sum::<i64>() == 0
                });
                if relation {
                    return Some(p.clone());
                }
            }
            let mut k = 0;
            loop {
                if k == n {
                    return None;
                }
                p[k] += 1;
                if p[k] <= bound {
                    break;
                }
                p[k] = -bound;
                k += 1;
            }
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(family(&[7, 7], &[&[1, 0], &[0, 1]]).rank(), 2);
        assert_eq!(family(&[7, 7], &[&[1, 0], &[0, 1], &[1, 1]]).rank(), 2);
        assert_eq!(family(&[30], &[&[2], &[3]]).rank(), 1);
        assert_eq!(family(&[5], &[&[0]]).rank(), 0);
    }

    #[test]
    fn kernel_examples() {
        assert!(family(&[7, 7], &[&[1, 0], &[0, 1]]).relation_kernel().is_empty());

        let k = family(&[30], &[&[2], &[3]]).relation_kernel();
        assert_eq!(k.len(), 1);
        assert_eq!(k[0].coeffs, vec![3, -2]);
        // brute force confirms this is the minimal relation up to sign
        let found = brute_relation(&[&[2], &[3]], 5).unwrap();
        let g = num_integer::gcd(found[0], found[1]);
        assert_eq!((found[0] / g).abs(), 3);
        assert_eq!((found[1] / g).abs(), 2);

        let k = family(&[9, 9], &[&[1, 1], &[2, 2]]).relation_kernel();
        assert_eq!(k.len(), 1);
        assert_eq!(k[0].coeffs, vec![2, -1]);
    }

    #[test]
    fn select_independent_examples() {
        assert_eq!(family(&[7, 7], &[&[1, 0], &[0, 1], &[1, 1]]).select_independent(), vec![0, 1]);
        assert_eq!(family(&[7, 7], &[&[0, 0], &[1, 0]]).select_independent(), vec![1]);
        assert_eq!(family(&[30], &[&[2], &[3]]).select_independent(), vec![0]);
    }

    #[test]
    fn reduction_examples() {
        let r = family(&[7, 7], &[&[1, 0], &[0, 1], &[1, 1]]).build_reduction().unwrap();
        assert_eq!(r.basis, vec![0, 1]);
        assert_eq!(r.nonbasis, vec![2]);
        assert_eq!(r.l, vec![1]);
        assert_eq!(r.a, vec![vec![1, 1]]);
        assert_eq!(r.assembled(), vec![vec![1, 0, 1], vec![0, 1, 1]]);

        let r = family(&[30], &[&[2], &[3]]).build_reduction().unwrap();
        assert_eq!(r.basis, vec![0]);
        assert_eq!(r.l, vec![2]);
        assert_eq!(r.a, vec![vec![3]]);
        // brute-force minimality of l over 1..=10
        let minimal = (1..=10u64)
            .find(|l| (l * 3) % 2 == 0)
            .unwrap();
        assert_eq!(r.l[0], minimal);

        let r = family(&[7, 7], &[&[1, 0], &[0, 1]]).build_reduction().unwrap();
        assert!(r.nonbasis.is_empty());
        assert_eq!(r.assembled(), vec![vec![1, 0], vec![0, 1]]);

        assert!(family(&[5], &[&[0]]).build_reduction().is_err());
    }

    #[test]
    fn rotation_examples() {
        let f = rotation_to_shift(&[Ratio::new(1, 2), Ratio::new(1, 3)], 1).unwrap();
        assert_eq!(f.space().moduli(), &[6]);
        assert_eq!(f.generators(), &[vec![3], vec![2]]);

        let f = rotation_to_shift(&[Ratio::new(1, 5)], 1).unwrap();
        assert_eq!(f.space().moduli(), &[5]);
        assert_eq!(f.generators(), &[vec![1]]);

        let f = rotation_to_shift(&[Ratio::new(1, 2), Ratio::new(1, 4)], 2).unwrap();
        assert_eq!(f.space().moduli(), &[8]);
        assert_eq!(f.generators(), &[vec![4], vec![2]]);

        assert!(rotation_to_shift(&[Ratio::new(1, 2)], 0).is_err());
        assert!(rotation_to_shift(&[Ratio::new(3, 2)], 1).is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn convergents_examples() {
        let golden = 0.618_033_988_7f64;
        let c = convergents(golden, 4).unwrap();
        let expect = [(1, 1), (1, 2), (2, 3), (3, 5)];
        assert_eq!(c.len(), 4);
        for (got, (p, q)) in c.iter().zip(expect) {
            assert_eq!((got.numer(), got.denom()), (&p, &q));
        }

        let c = convergents(0.5, 1).unwrap();
        assert_eq!(c, vec![Ratio::new(1, 2)]);

        let c = convergents(1.0 / 3.0 + 1e-12, 2).unwrap();
        assert!(c.contains(&Ratio::new(1, 3)));

        assert!(convergents(0.0, 1).is_err());
        assert!(convergents(1.5, 1).is_err());
    }

    #[test]
    fn convergent_denominators_increase() {
        let c = convergents(std::f64::consts::PI - 3.0, 5).unwrap();
        for w in c.windows(2) {
            assert!(w[1].denom() > w[0].denom());
        }
        // pi - 3 = [0; 7, 15, 1, ...] so the first convergent is 1/7
        assert_eq!(c[0], Ratio::new(1, 7));
        assert_eq!(c[1], Ratio::new(15, 106));
    }

    #[test]
    fn rotation_rank_matches_brute_force_tuple_rank() {
        // exact-rational relation search with |r_i| <= 6 over all subsets
        let cases: Vec<Vec<Ratio<i64>>> = vec![
            vec![Ratio::new(1, 2), Ratio::new(1, 3)],
            vec![Ratio::new(1, 2), Ratio::new(1, 4), Ratio::new(1, 3)],
            vec![Ratio::new(2, 5)],
            vec![Ratio::new(1, 3), Ratio::new(2, 3)],
        ];
        for freqs in cases {
            let fam = rotation_to_shift(&freqs, 2).unwrap();
            let n = freqs.len();
            let mut best = 0usize;
            for mask in 1u32..(1 << n) {
                let subset: Vec<Ratio<i64>> = (0..n)
                    .filter(|k| mask & (1 << k) != 0)
                    .map(|k| freqs[k])
                    .collect();
                let mut dependent = false;
                let m = subset.len();
                let mut r = vec![-6i64; m];
                'search: loop {
                    if r.iter().any(|&c| c != 0) {
                        let total: Ratio<i64> = subset
                            .iter()
                            .zip(&r)
                            .map(|(f, &c)| *f * Ratio::new(c, 1))
                            .fold(Ratio::new(0, 1), |acc, t| acc + t);
                        if total == Ratio::new(0, 1) {
                            dependent = true;
                            break 'search;
                        }
                    }
                    let mut k = 0;
                    loop {
                        if k == m {
                            break 'search;
                        }
                        r[k] += 1;
                        if r[k] <= 6 {
                            break;
                        }
                        r[k] = -6;
                        k += 1;
                    }
                }
                if !dependent {
                    best = best.max(m);
                }
            }
            assert_eq!(fam.rank(), best, "freqs {freqs:?}");
        }
    }

    #[test]
    fn family_json_round_trip() {
        let f = family(&[6, 6], &[&[3, 0], &[2, -1]]);
        let text = f.to_json_string();
        let g = ShiftFamily::from_json_str(&text).unwrap();
        assert_eq!(f, g);
        assert!(ShiftFamily::from_json_str("{\"moduli\":[0],\"generators\":[[1]]}").is_err());
        assert!(ShiftFamily::from_json_str("{\"moduli\":[4],\"generators\":[]}").is_err());
        assert!(ShiftFamily::from_json_str("{\"moduli\":[4],\"generators\":[[1,2]]}").is_err());
    }

    #[test]
    fn guard_examples() {
        let f = family(&[8], &[&[1]]);
        assert!(f.window_guard(8).is_ok()); // reach 7 < 8
        assert!(f.window_guard(9).is_err()); // reach 8
        let f = family(&[5], &[&[1], &[2]]);
        assert!(f.window_guard(2).is_ok()); // reach (2-1)*2*2 = 4 < 5
        assert!(f.window_guard(3).is_err()); // reach 8
    }

    fn arb_generators() -> impl Strategy<Value = (Vec<u64>, Vec<Vec<i64>>)> {
        (1usize..=3, 1usize..=4).prop_flat_map(|(dims, n)| {
            let moduli = proptest::collection::vec(5u64..=16, dims);
            let gens = proptest::collection::vec(
                proptest::collection::vec(-2i64..=2, dims),
                n,
            );
            (moduli, gens)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn kernel_vectors_are_relations((moduli, gens) in arb_generators()) {
            let space = GridSpace::new(moduli).unwrap();
            let fam = ShiftFamily::new(space, gens).unwrap();
            for rel in fam.relation_kernel() {
                prop_assert!(fam.check_relation(&rel.coeffs));
                prop_assert!(rel.coeffs.iter().any(|&c| c != 0));
            }
        }

        #[test]
        fn rank_nullity((moduli, gens) in arb_generators()) {
            let space = GridSpace::new(moduli).unwrap();
            let fam = ShiftFamily::new(space, gens).unwrap();
            prop_assert_eq!(fam.rank() + fam.relation_kernel().len(), fam.len());
            prop_assert_eq!(fam.rank(), fam.select_independent().len());
        }

        #[test]
        fn independent_subset_has_empty_kernel((moduli, gens) in arb_generators()) {
            let space = GridSpace::new(moduli).unwrap();
            let fam = ShiftFamily::new(space, gens).unwrap();
            let picked = fam.select_independent();
            if !picked.is_empty() {
                let sub = fam.restrict(&picked).unwrap();
                prop_assert!(sub.relation_kernel().is_empty());
            }
        }

        #[test]
        fn reduction_round_trip((moduli, gens) in arb_generators(), pts in proptest::collection::vec(0usize..10_000, 5)) {
            let space = GridSpace::new(moduli).unwrap();
            let fam = ShiftFamily::new(space, gens).unwrap();
            if fam.rank() == 0 { return Ok(()); }
            let red = fam.build_reduction().unwrap();
            for (slot, &k) in red.nonbasis.iter().enumerate() {
                // l_k * v_k as one shift vs the basis combination, by action
                let dims = fam.space().dims();
                let mut lhs = vec![0i64; dims];
                let mut rhs = vec![0i64; dims];
                for i in 0..dims {
                    lhs[i] = red.l[slot] as i64 * fam.generator(k)[i];
                    rhs[i] = red.a[slot]
                        .iter()
                        .zip(&red.basis)
                        .map(|(&c, &b)| c * fam.generator(b)[i])
                        .sum();
                }
                for &p in &pts {
                    let p = p % fam.space().len();
                    prop_assert_eq!(
                        fam.space().shifted_index(p, &lhs),
                        fam.space().shifted_index(p, &rhs)
                    );
                }
            }
        }
    }
}
