//! Finite probability spaces and the functions living on them.
//!
//! A [`GridSpace`] is the product group `Z_{N_1} x ... x Z_{N_D}` carrying the
//! uniform probability measure. A [`GridFunction`] stores one real value per
//! point in lexicographic order and optionally keeps an exact representation
//! (integer numerators over one common denominator) so that averaging
//! experiments can run without any floating-point rounding.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Hard cap on the number of grid points; keeps index tables in `u32`.
pub const MAX_POINTS: usize = 1 << 27;

/// The product group `Z_{N_1} x ... x Z_{N_D}` with uniform measure.
///
/// Points are ordered lexicographically on their coordinates, the first
/// coordinate varying slowest; every serialized artifact uses this order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpace {
    moduli: Vec<u64>,
    strides: Vec<usize>,
    len: usize,
}

impl GridSpace {
    pub fn new(moduli: Vec<u64>) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::Domain("a grid space needs at least one axis".into()));
        }
        if moduli.contains(&0) {
            return Err(Error::Domain("all moduli must be >= 1".into()));
        }
        let mut len: usize = 1;
        for &m in &moduli {
            len = len
                .checked_mul(m as usize)
                .filter(|&l| l <= MAX_POINTS)
                .ok_or_else(|| {
                    Error::Domain(format!("grid too large: more than {MAX_POINTS} points"))
                })?;
        }
        let mut strides = vec![1usize; moduli.len()];
        for i in (0..moduli.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * moduli[i + 1] as usize;
        }
        Ok(GridSpace { moduli, strides, len })
    }

    /// The cube `Z_n^d`.
    pub fn cube(dims: usize, n: u64) -> Result<Self> {
        Self::new(vec![n; dims])
    }

    pub fn dims(&self) -> usize {
        self.moduli.len()
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    pub fn min_modulus(&self) -> u64 {
        *self.moduli.iter().min().expect("nonempty")
    }

    /// Number of points `|X|`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, coords: &[u64]) -> usize {
        debug_assert_eq!(coords.len(), self.moduli.len());
        coords
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| c as usize * s)
            .sum()
    }

    pub fn coords_of(&self, index: usize) -> Vec<u64> {
        let mut out = vec![0u64; self.moduli.len()];
        self.write_coords(index, &mut out);
        out
    }

    fn write_coords(&self, index: usize, out: &mut [u64]) {
        let mut rem = index;
        for (i, &s) in self.strides.iter().enumerate() {
            out[i] = (rem / s) as u64;
            rem %= s;
        }
    }

    /// Index of `x + v` with every coordinate reduced into `[0, N_i)`.
    pub fn shifted_index(&self, index: usize, v: &[i64]) -> usize {
        debug_assert_eq!(v.len(), self.moduli.len());
        let mut rem = index;
        let mut out = 0usize;
        for i in 0..self.moduli.len() {
            let c = (rem / self.strides[i]) as i64;
            rem %= self.strides[i];
            let m = self.moduli[i] as i64;
            let shifted = (c + v[i] % m).rem_euclid(m);
            out += shifted as usize * self.strides[i];
        }
        out
    }

    /// Permutation table for `x -> x + v`; `table[i]` is the image of point `i`.
    pub fn translation_table(&self, v: &[i64]) -> Vec<u32> {
        let mut t = vec![0u32; self.len];
        let mut coords = vec![0u64; self.dims()];
        for (idx, slot) in t.iter_mut().enumerate() {
            self.write_coords(idx, &mut coords);
            let mut out = 0usize;
            for i in 0..coords.len() {
                let m = self.moduli[i] as i64;
                let shifted = (coords[i] as i64 + v[i] % m).rem_euclid(m);
                out += shifted as usize * self.strides[i];
            }
            *slot = out as u32;
        }
        t
    }
}

/// Neumaier-compensated sum over a fixed iteration order.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Storage backing a grid function: plain floats, or exact integers over a
/// single positive common denominator.
#[derive(Debug, Clone, PartialEq)]
pub enum GridValues {
    Float(Vec<f64>),
    Exact { numer: Vec<i128>, denom: i128 },
}

/// A real-valued function on a [`GridSpace`], indexed in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    space: GridSpace,
    values: GridValues,
}

impl GridFunction {
    pub fn from_values(space: GridSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::Mismatch(format!(
                "expected {} values, got {}",
                space.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("grid values must be finite".into()));
        }
        Ok(GridFunction { space, values: GridValues::Float(values) })
    }

    /// Exact function with values `numer[i] / denom`.
    pub fn from_integers(space: GridSpace, numer: Vec<i128>, denom: i128) -> Result<Self> {
        if numer.len() != space.len() {
            return Err(Error::Mismatch(format!(
                "expected {} values, got {}",
                space.len(),
                numer.len()
            )));
        }
        if denom <= 0 {
            return Err(Error::Domain("denominator must be positive".into()));
        }
        Ok(GridFunction { space, values: GridValues::Exact { numer, denom } })
    }

    pub fn constant(space: GridSpace, c: f64) -> Result<Self> {
        if c.fract() == 0.0 && c.abs() < 9e15 {
            let n = space.len();
            Self::from_integers(space, vec![c as i128; n], 1)
        } else {
            let n = space.len();
            Self::from_values(space, vec![c; n])
        }
    }

    /// `height` at one point, zero elsewhere. Exact.
    pub fn spike(space: GridSpace, point: &[u64], height: i128) -> Result<Self> {
        if point.len() != space.dims() {
            return Err(Error::Mismatch("spike point has wrong dimension".into()));
        }
        if point.iter().zip(space.moduli()).any(|(&c, &m)| c >= m) {
            return Err(Error::Domain("spike point outside the grid".into()));
        }
        let idx = space.index_of(point);
        let mut numer = vec![0i128; space.len()];
        numer[idx] = height;
        Self::from_integers(space, numer, 1)
    }

    /// Random `+/-1` values; exact, deterministic per seed.
    pub fn random_pm1(space: GridSpace, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let numer = (0..space.len())
            .map(|_| if rng.gen::<bool>() { 1i128 } else { -1i128 })
            .collect();
        GridFunction { space, values: GridValues::Exact { numer, denom: 1 } }
    }

    /// Uniform floats in `[0, 1)`; deterministic per seed.
    pub fn random_uniform(space: GridSpace, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..space.len()).map(|_| rng.gen::<f64>()).collect();
        GridFunction { space, values: GridValues::Float(values) }
    }

    /// Random integers in `lo..=hi`; exact, deterministic per seed.
    pub fn random_ints(space: GridSpace, lo: i64, hi: i64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let numer = (0..space.len()).map(|_| rng.gen_range(lo..=hi) as i128).collect();
        GridFunction { space, values: GridValues::Exact { numer, denom: 1 } }
    }

    pub fn space(&self) -> &GridSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &GridValues {
        &self.values
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.values, GridValues::Exact { .. })
    }

    /// Numerators and common denominator when the function is exact.
    pub fn exact_parts(&self) -> Option<(&[i128], i128)> {
        match &self.values {
            GridValues::Exact { numer, denom } => Some((numer, *denom)),
            GridValues::Float(_) => None,
        }
    }

    /// Value at point `i` as a float (one rounding for exact functions).
    pub fn value(&self, i: usize) -> f64 {
        match &self.values {
            GridValues::Float(v) => v[i],
            GridValues::Exact { numer, denom } => numer[i] as f64 / *denom as f64,
        }
    }

    pub fn values_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }

    /// Pointwise absolute value (stays exact on the exact path).
    pub fn abs(&self) -> GridFunction {
        let values = match &self.values {
            GridValues::Float(v) => GridValues::Float(v.iter().map(|x| x.abs()).collect()),
            GridValues::Exact { numer, denom } => GridValues::Exact {
                numer: numer.iter().map(|x| x.abs()).collect(),
                denom: *denom,
            },
        };
        GridFunction { space: self.space.clone(), values }
    }

    /// Exact mean as a reduced-free rational `(sum, denom * |X|)`.
    pub fn mean_exact(&self) -> Option<(i128, i128)> {
        let (numer, denom) = self.exact_parts()?;
        let mut sum = 0i128;
        for &n in numer {
            sum = sum.checked_add(n)?;
        }
        Some((sum, denom.checked_mul(self.len() as i128)?))
    }

    /// `(1/|X|) * sum f(x)`.
    pub fn mean(&self) -> f64 {
        if let Some((num, den)) = self.mean_exact() {
            return num as f64 / den as f64;
        }
        match &self.values {
            GridValues::Float(v) => compensated_sum(v.iter().copied()) / self.len() as f64,
            GridValues::Exact { .. } => unreachable!(),
        }
    }

    /// `(1/|X|) * sum |f(x)|`.
    pub fn l1_norm(&self) -> f64 {
        match &self.values {
            GridValues::Float(v) => {
                compensated_sum(v.iter().map(|x| x.abs())) / self.len() as f64
            }
            GridValues::Exact { numer, denom } => {
                let mut sum = 0i128;
                for &n in numer {
                    sum = sum.saturating_add(n.abs());
                }
                sum as f64 / (*denom as f64 * self.len() as f64)
            }
        }
    }

    /// `max |f(x)|`.
    pub fn linf_norm(&self) -> f64 {
        (0..self.len()).map(|i| self.value(i).abs()).fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        (0..self.len()).map(|i| self.value(i)).fold(f64::INFINITY, f64::min)
    }

    /// `mu{ x : f(x) > lambda }` with strict inequality.
    pub fn level_set_measure(&self, lambda: f64) -> f64 {
        let count = (0..self.len()).filter(|&i| self.value(i) > lambda).count();
        count as f64 / self.len() as f64
    }

    /// `(1/|X|) * sum Log_m(|f(x)| / lambda)`.
    ///
    /// For an exact function and weight order 0 the numerator sum is
    /// accumulated in integer arithmetic and rounded once at the end, so the
    /// result is bit-for-bit reproducible.
    pub fn orlicz_integral(&self, weight: &OrliczWeight, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        if weight.order() == 0 {
            if let Some((numer, denom)) = self.exact_parts() {
                let mut sum = 0i128;
                for &n in numer {
                    sum = sum.checked_add(n.abs()).ok_or_else(|| {
                        Error::Degenerate("integer overflow in Orlicz accumulation".into())
                    })?;
                }
                return Ok(sum as f64 / (denom as f64 * self.len() as f64 * lambda));
            }
        }
        let total = compensated_sum(
            (0..self.len()).map(|i| weight.eval_unchecked(self.value(i).abs() / lambda)),
        );
        Ok(total / self.len() as f64)
    }

    /// Serialize as CSV: header `index,value`, one row per point in
    /// lexicographic order, values printed with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"index,value\n")?;
        for i in 0..self.len() {
            writeln!(w, "{},{}", i, fmt_float(self.value(i)))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::with_capacity(self.len() * 24 + 16);
        self.write_csv(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("csv is ascii")
    }

    /// Parse the `index,value` CSV produced by [`GridFunction::write_csv`].
    ///
    /// Rows must appear in order with dense indices `0..|X|`. When every
    /// value token parses as an integer the function is stored exactly.
    pub fn parse_csv<R: BufRead>(space: GridSpace, reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Domain("empty grid CSV".into()))?
            .map_err(|e| Error::Domain(format!("grid CSV read error: {e}")))?;
        if header.trim_end() != "index,value" {
            return Err(Error::Domain(format!(
                "grid CSV must start with 'index,value', got '{}'",
                header.trim_end()
            )));
        }
        let mut floats = Vec::with_capacity(space.len());
        let mut ints: Option<Vec<i128>> = Some(Vec::with_capacity(space.len()));
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Domain(format!("grid CSV read error: {e}")))?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let (idx_str, val_str) = line.split_once(',').ok_or_else(|| {
                Error::Domain(format!("grid CSV row {} is not 'index,value'", row + 1))
            })?;
            let idx: usize = idx_str
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("bad index '{idx_str}' in grid CSV")))?;
            if idx != row {
                return Err(Error::Domain(format!(
                    "grid CSV indices must be dense and ordered: expected {row}, got {idx}"
                )));
            }
            let val_str = val_str.trim();
            let value: f64 = val_str
                .parse()
                .map_err(|_| Error::Domain(format!("bad value '{val_str}' in grid CSV")))?;
            if !value.is_finite() {
                return Err(Error::Domain(format!("non-finite value '{val_str}' in grid CSV")));
            }
            if let Some(buf) = ints.as_mut() {
                match val_str.parse::<i128>() {
                    Ok(n) => buf.push(n),
                    Err(_) => ints = None,
                }
            }
            floats.push(value);
        }
        if floats.len() != space.len() {
            return Err(Error::Mismatch(format!(
                "grid CSV has {} rows, space has {} points",
                floats.len(),
                space.len()
            )));
        }
        match ints {
            Some(numer) => Self::from_integers(space, numer, 1),
            None => Self::from_values(space, floats),
        }
    }
}

/// Print a float with 17 significant digits (round-trip safe).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// The Orlicz weight `Log_m(t) = t * (1 + max{0, ln t}^m)` for `m >= 1`,
/// with the order-0 convention `Log_0(t) = t`.
///
/// Natural logarithm throughout; a different base only changes constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrliczWeight {
    order: u32,
}

impl OrliczWeight {
    pub fn new(order: u32) -> Self {
        OrliczWeight { order }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Evaluate the weight at `t >= 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("Orlicz weight needs t >= 0, got {t}")));
        }
        Ok(self.eval_unchecked(t))
    }

    fn eval_unchecked(&self, t: f64) -> f64 {
        if self.order == 0 || t == 0.0 {
            return t;
        }
        let log_plus = t.ln().max(0.0);
        t * (1.0 + log_plus.powi(self.order as i32))
    }
}
