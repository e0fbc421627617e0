//! Multi-parameter ergodic averages and the discrete strong maximal operator.
//!
//! The fast path composes one sliding-window sum per generator; each
//! directional sum walks the cyclic orbits of `x -> x + v` once and reads
//! windows off prefix sums, so a full box average costs `O(n |X|)` regardless
//! of the window sides. The maximal operator enumerates window shapes with an
//! incremental dynamic program that reuses partial sums. `brute_force_average`
//! and `brute_force_maximal` evaluate the defining formulas directly and act
//! as the independent oracle for everything above.
//!
//! Integer-valued functions run on an exact `i128` path end to end; floats
//! are accumulated in a fixed orbit order so results are reproducible.

use crate::lattice::ShiftFamily;
use crate::space::{GridFunction, GridSpace, GridValues};
use crate::{Error, Result};

/// The box `[0, s_1) x ... x [0, s_n)` of window sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSpec {
    sides: Vec<u64>,
}

impl WindowSpec {
    pub fn new(sides: Vec<u64>) -> Result<Self> {
        if sides.is_empty() {
            return Err(Error::Domain("window needs at least one side".into()));
        }
        if sides.contains(&0) {
            return Err(Error::Domain("window sides must be >= 1".into()));
        }
        Ok(WindowSpec { sides })
    }

    pub fn sides(&self) -> &[u64] {
        &self.sides
    }

    pub fn max_side(&self) -> u64 {
        *self.sides.iter().max().expect("nonempty")
    }

    pub fn volume(&self) -> Result<u64> {
        self.sides
            .iter()
            .try_fold(1u64, |acc, &s| acc.checked_mul(s))
            .ok_or_else(|| Error::Domain("window volume overflows".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaximalMode {
    /// All sides `1..=M`.
    Exact,
    /// Sides in `{1, 2, 4, ..., 2^floor(log2 M)}`.
    Dyadic,
}

/// Search space of the maximal operator: sides `1 <= s_j <= M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaximalSpec {
    pub cap: u64,
    pub mode: MaximalMode,
}

impl MaximalSpec {
    pub fn new(cap: u64, mode: MaximalMode) -> Result<Self> {
        if cap == 0 {
            return Err(Error::Domain("maximal cap must be >= 1".into()));
        }
        Ok(MaximalSpec { cap, mode })
    }

    fn side_values(&self) -> Vec<u64> {
        match self.mode {
            MaximalMode::Exact => (1..=self.cap).collect(),
            MaximalMode::Dyadic => {
                let mut v = vec![1u64];
                while v.last().unwrap() * 2 <= self.cap {
                    let next = v.last().unwrap() * 2;
                    v.push(next);
                }
                v
            }
        }
    }
}

/// Error-free transform: `a + b = s + e` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Unevaluated double-word float; prefix sums on the float path are kept in
/// this form so that window differences do not lose the trailing bits of
/// large orbit totals.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn add_f64(self, v: f64) -> Self {
        let (s, e) = two_sum(self.hi, v);
        let (hi, lo) = two_sum(s, self.lo + e);
        DoubleDouble { hi, lo }
    }

    fn sub(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, -o.hi);
        let (hi, lo) = two_sum(s, e + (self.lo - o.lo));
        DoubleDouble { hi, lo }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Scalar the windowing engine runs on: exact integers or floats.
pub(crate) trait Accum: Copy + Send + Sync {
    type Prefix: Copy;
    fn zero() -> Self;
    fn add(a: Self, b: Self) -> Result<Self>;
    fn mul_u64(a: Self, k: u64) -> Result<Self>;
    /// Prefix sums `[0, a_0, a_0+a_1, ...]` in the given order.
    fn prefix(values: &[Self]) -> Vec<Self::Prefix>;
    /// `pre[j] - pre[i]`, the sum over positions `[i, j)`.
    fn range_sum(pre: &[Self::Prefix], i: usize, j: usize) -> Result<Self>;
}

impl Accum for i128 {
    type Prefix = i128;
    fn zero() -> Self {
        0
    }
    fn add(a: Self, b: Self) -> Result<Self> {
        a.checked_add(b)
            .ok_or_else(|| Error::Degenerate("integer overflow in window sum".into()))
    }
    fn mul_u64(a: Self, k: u64) -> Result<Self> {
        a.checked_mul(k as i128)
            .ok_or_else(|| Error::Degenerate("integer overflow in window sum".into()))
    }
    fn prefix(values: &[Self]) -> Vec<Self> {
        let mut out = Vec::with_capacity(values.len() + 1);
        out.push(0);
        let mut acc = 0i128;
        for &v in values {
            acc = acc.checked_add(v).expect("orbit prefix overflow");
            out.push(acc);
        }
        out
    }
    fn range_sum(pre: &[Self], i: usize, j: usize) -> Result<Self> {
        pre[j]
            .checked_sub(pre[i])
            .ok_or_else(|| Error::Degenerate("integer overflow in window sum".into()))
    }
}

impl Accum for f64 {
    type Prefix = DoubleDouble;
    fn zero() -> Self {
        0.0
    }
    fn add(a: Self, b: Self) -> Result<Self> {
        Ok(a + b)
    }
    fn mul_u64(a: Self, k: u64) -> Result<Self> {
        Ok(a * k as f64)
    }
    fn prefix(values: &[Self]) -> Vec<DoubleDouble> {
        let mut out = Vec::with_capacity(values.len() + 1);
        let mut acc = DoubleDouble::default();
        out.push(acc);
        for &v in values {
            acc = acc.add_f64(v);
            out.push(acc);
        }
        out
    }
    fn range_sum(pre: &[DoubleDouble], i: usize, j: usize) -> Result<Self> {
        Ok(pre[j].sub(pre[i]).to_f64())
    }
}

/// Neumaier-compensated accumulator for the float oracle paths.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

fn gather<T: Copy>(src: &[T], perm: &[u32], dst: &mut [T]) {
    for (d, &p) in dst.iter_mut().zip(perm) {
        *d = src[p as usize];
    }
}

/// One directional sliding-window sum `h(x) = sum_{k<s} f(x + k v)`,
/// computed orbit by orbit in `O(|X|)`.
fn directional_raw<T: Accum>(space: &GridSpace, data: &[T], v: &[i64], s: u64) -> Result<Vec<T>> {
    let len = space.len();
    let succ = space.translation_table(v);
    let mut out = vec![T::zero(); len];
    let mut visited = vec![false; len];
    let mut orbit: Vec<u32> = Vec::new();
    let mut values: Vec<T> = Vec::new();
    for start in 0..len {
        if visited[start] {
            continue;
        }
        orbit.clear();
        values.clear();
        let mut i = start as u32;
        loop {
            visited[i as usize] = true;
            orbit.push(i);
            values.push(data[i as usize]);
            i = succ[i as usize];
            if i as usize == start {
                break;
            }
        }
        let l = orbit.len() as u64;
        let pre = T::prefix(&values);
        let total = T::range_sum(&pre, 0, orbit.len())?;
        let full = s / l;
        let rem = (s % l) as usize;
        let base = T::mul_u64(total, full)?;
        for (pos, &idx) in orbit.iter().enumerate() {
            let window = if pos + rem <= orbit.len() {
                T::range_sum(&pre, pos, pos + rem)?
            } else {
                // window wraps past the orbit end
                T::add(
                    T::range_sum(&pre, pos, orbit.len())?,
                    T::range_sum(&pre, 0, pos + rem - orbit.len())?,
                )?
            };
            out[idx as usize] = T::add(base, window)?;
        }
    }
    Ok(out)
}

fn check_space(f: &GridFunction, family: &ShiftFamily) -> Result<()> {
    if f.space() != family.space() {
        return Err(Error::Mismatch(
            "function and shift family live on different spaces".into(),
        ));
    }
    Ok(())
}

fn check_sides(family: &ShiftFamily, sides: &[u64]) -> Result<()> {
    if sides.len() != family.len() {
        return Err(Error::Mismatch(format!(
            "window has {} sides, family has {} generators",
            sides.len(),
            family.len()
        )));
    }
    Ok(())
}

/// Window sum along a single direction, `h(x) = sum_{k=0}^{s-1} f(x + k v)`.
pub fn directional_window_sum(f: &GridFunction, v: &[i64], s: u64) -> Result<GridFunction> {
    if v.len() != f.space().dims() {
        return Err(Error::Mismatch("direction has wrong dimension".into()));
    }
    if s == 0 {
        return Err(Error::Domain("window side must be >= 1".into()));
    }
    let norm = v.iter().map(|&c| c.unsigned_abs()).max().unwrap_or(0);
    let reach = (s - 1) as i128 * norm as i128;
    let modulus = f.space().min_modulus();
    if reach >= modulus as i128 {
        return Err(Error::Guard { reach, modulus });
    }
    match f.values() {
        GridValues::Exact { numer, denom } => {
            let out = directional_raw::<i128>(f.space(), numer, v, s)?;
            GridFunction::from_integers(f.space().clone(), out, *denom)
        }
        GridValues::Float(vals) => {
            let out = directional_raw::<f64>(f.space(), vals, v, s)?;
            GridFunction::from_values(f.space().clone(), out)
        }
    }
}

fn multi_average_impl(
    f: &GridFunction,
    family: &ShiftFamily,
    sides: &[u64],
    enforce_guard: bool,
) -> Result<GridFunction> {
    check_space(f, family)?;
    check_sides(family, sides)?;
    if sides.contains(&0) {
        return Err(Error::Domain("window sides must be >= 1".into()));
    }
    if enforce_guard {
        family.window_guard(*sides.iter().max().expect("nonempty"))?;
    }
    let volume = sides
        .iter()
        .try_fold(1u64, |acc, &s| acc.checked_mul(s))
        .ok_or_else(|| Error::Domain("window volume overflows".into()))?;
    match f.values() {
        GridValues::Exact { numer, denom } => {
            let mut data = numer.clone();
            for (v, &s) in family.generators().iter().zip(sides) {
                data = directional_raw::<i128>(f.space(), &data, v, s)?;
            }
            let denom = denom
                .checked_mul(volume as i128)
                .ok_or_else(|| Error::Degenerate("denominator overflow in multi_average".into()))?;
            GridFunction::from_integers(f.space().clone(), data, denom)
        }
        GridValues::Float(vals) => {
            let mut data = vals.clone();
            for (v, &s) in family.generators().iter().zip(sides) {
                data = directional_raw::<f64>(f.space(), &data, v, s)?;
            }
            let scale = volume as f64;
            for x in &mut data {
                *x /= scale;
            }
            GridFunction::from_values(f.space().clone(), data)
        }
    }
}

/// The box average
/// `A_s f(x) = (1/(s_1...s_n)) sum_{k in [0,s)} f(x + k_1 v_1 + ... + k_n v_n)`.
///
/// Rejects windows whose reach `(max_j s_j - 1) * max_k ||v_k||_inf * n`
/// touches the smallest modulus ("wrap-around aliasing"); inside that bound
/// the cyclic grid is an exact truncation of the free `Z^D` action.
pub fn multi_average(
    f: &GridFunction,
    family: &ShiftFamily,
    w: &WindowSpec,
) -> Result<GridFunction> {
    multi_average_impl(f, family, w.sides(), true)
}

/// Box average without the wrap-around guard. Full-period windows (the
/// Birkhoff case and exact-period rotation rungs) intentionally wrap.
pub fn multi_average_wrapping(
    f: &GridFunction,
    family: &ShiftFamily,
    w: &WindowSpec,
) -> Result<GridFunction> {
    multi_average_impl(f, family, w.sides(), false)
}

/// Incremental enumeration of window sums over all side combinations.
///
/// `leaf(volume, sums)` receives the window volume and the raw (undivided)
/// window sums for one side combination. `sides` must be increasing and, in
/// `Dyadic` mode, each side twice the previous one.
fn enumerate_window_sums<T: Accum>(
    space: &GridSpace,
    dirs: &[Vec<i64>],
    sides: &[u64],
    mode: MaximalMode,
    data: &[T],
    leaf: &mut dyn FnMut(u64, &[T]) -> Result<()>,
) -> Result<()> {
    struct Ctx<'a, T> {
        space: &'a GridSpace,
        dirs: &'a [Vec<i64>],
        sides: &'a [u64],
        mode: MaximalMode,
        leaf: &'a mut dyn FnMut(u64, &[T]) -> Result<()>,
    }

    fn rec<T: Accum>(ctx: &mut Ctx<'_, T>, level: usize, cur: &[T], volume: u64) -> Result<()> {
        if level == ctx.dirs.len() {
            return (ctx.leaf)(volume, cur);
        }
        let dir = &ctx.dirs[level];
        let len = cur.len();
        let mut w = cur.to_vec();
        let mut scratch = vec![T::zero(); len];
        // in contiguous mode: shifted copy of the base, advanced one step per side
        let succ = ctx.space.translation_table(dir);
        let mut trans = cur.to_vec();
        let mut prev_side = 1u64;
        for &s in ctx.sides {
            if s > 1 {
                match ctx.mode {
                    MaximalMode::Dyadic => {
                        // doubling: W_{2m}(x) = W_m(x) + W_m(x + m v)
                        debug_assert_eq!(s, prev_side * 2);
                        let perm = ctx.space.translation_table(&scaled(dir, prev_side));
                        gather(&w, &perm, &mut scratch);
                        for i in 0..len {
                            scratch[i] = T::add(scratch[i], w[i])?;
                        }
                        std::mem::swap(&mut w, &mut scratch);
                    }
                    MaximalMode::Exact => {
                        // contiguous: W_s(x) = W_{s-1}(x) + f(x + (s-1) v)
                        for _ in prev_side..s {
                            gather(&trans, &succ, &mut scratch);
                            std::mem::swap(&mut trans, &mut scratch);
                            for i in 0..len {
                                w[i] = T::add(w[i], trans[i])?;
                            }
                        }
                    }
                }
                prev_side = s;
            }
            let vol = volume
                .checked_mul(s)
                .ok_or_else(|| Error::Domain("window volume overflows".into()))?;
            rec(ctx, level + 1, &w, vol)?;
        }
        Ok(())
    }

    let mut ctx = Ctx { space, dirs, sides, mode, leaf };
    rec(&mut ctx, 0, data, 1)
}

fn scaled(v: &[i64], k: u64) -> Vec<i64> {
    v.iter().map(|&c| c * k as i64).collect()
}

/// The discrete maximal operator
/// `D f(x) = max over admissible windows of A_s |f| (x)`.
///
/// `Exact` mode searches all of `[1, M]^n`; `Dyadic` only doubling sides.
/// Window averages are maximized as exact rationals on the integer path and
/// converted to floats once at the end.
pub fn discrete_maximal(
    f: &GridFunction,
    family: &ShiftFamily,
    spec: &MaximalSpec,
) -> Result<GridFunction> {
    check_space(f, family)?;
    family.window_guard(spec.cap)?;
    let sides = spec.side_values();
    let g = f.abs();
    let len = g.len();
    match g.values() {
        GridValues::Exact { numer, denom } => {
            let mut best_num = vec![-1i128; len];
            let mut best_den = vec![1i128; len];
            let q = *denom;
            enumerate_window_sums::<i128>(
                f.space(),
                family.generators(),
                &sides,
                spec.mode,
                numer,
                &mut |volume, sums| {
                    let den = q.checked_mul(volume as i128).ok_or_else(|| {
                        Error::Degenerate("denominator overflow in discrete_maximal".into())
                    })?;
                    for i in 0..len {
                        if ratio_less(best_num[i], best_den[i], sums[i], den)? {
                            best_num[i] = sums[i];
                            best_den[i] = den;
                        }
                    }
                    Ok(())
                },
            )?;
            let values = best_num
                .iter()
                .zip(&best_den)
                .map(|(&n, &d)| n as f64 / d as f64)
                .collect();
            GridFunction::from_values(f.space().clone(), values)
        }
        GridValues::Float(vals) => {
            let mut best = vec![f64::NEG_INFINITY; len];
            enumerate_window_sums::<f64>(
                f.space(),
                family.generators(),
                &sides,
                spec.mode,
                vals,
                &mut |volume, sums| {
                    let den = volume as f64;
                    for i in 0..len {
                        let v = sums[i] / den;
                        if v > best[i] {
                            best[i] = v;
                        }
                    }
                    Ok(())
                },
            )?;
            GridFunction::from_values(f.space().clone(), best)
        }
    }
}

/// `a/b < c/d` for positive denominators, compared exactly.
fn ratio_less(a: i128, b: i128, c: i128, d: i128) -> Result<bool> {
    let lhs = a
        .checked_mul(d)
        .ok_or_else(|| Error::Degenerate("overflow comparing window averages".into()))?;
    let rhs = c
        .checked_mul(b)
        .ok_or_else(|| Error::Degenerate("overflow comparing window averages".into()))?;
    Ok(lhs < rhs)
}

fn for_each_multi_index(sides: &[u64], mut visit: impl FnMut(&[u64])) {
    let mut k = vec![0u64; sides.len()];
    loop {
        visit(&k);
        let mut j = 0;
        loop {
            if j == sides.len() {
                return;
            }
            k[j] += 1;
            if k[j] < sides[j] {
                break;
            }
            k[j] = 0;
            j += 1;
        }
    }
}

fn window_offsets(family: &ShiftFamily, sides: &[u64]) -> Vec<Vec<i64>> {
    let dims = family.space().dims();
    let mut offsets = Vec::new();
    for_each_multi_index(sides, |k| {
        let mut off = vec![0i64; dims];
        for (j, &kj) in k.iter().enumerate() {
            for i in 0..dims {
                off[i] += kj as i64 * family.generator(j)[i];
            }
        }
        offsets.push(off);
    });
    offsets
}

/// Direct nested-loop evaluation of the box average; the oracle for
/// [`multi_average`]. No prefix sums, no window reuse.
pub fn brute_force_average(
    f: &GridFunction,
    family: &ShiftFamily,
    w: &WindowSpec,
) -> Result<GridFunction> {
    check_space(f, family)?;
    check_sides(family, w.sides())?;
    let space = f.space();
    let volume = w.volume()?;
    let offsets = window_offsets(family, w.sides());
    match f.values() {
        GridValues::Exact { numer, denom } => {
            let mut out = vec![0i128; space.len()];
            for (x, slot) in out.iter_mut().enumerate() {
                let mut acc = 0i128;
                for off in &offsets {
                    acc += numer[space.shifted_index(x, off)];
                }
                *slot = acc;
            }
            GridFunction::from_integers(space.clone(), out, denom * volume as i128)
        }
        GridValues::Float(vals) => {
            let mut out = vec![0.0f64; space.len()];
            for (x, slot) in out.iter_mut().enumerate() {
                let mut acc = Compensated::default();
                for off in &offsets {
                    acc.add(vals[space.shifted_index(x, off)]);
                }
                *slot = acc.value() / volume as f64;
            }
            GridFunction::from_values(space.clone(), out)
        }
    }
}

/// Direct enumeration of the maximal operator over all admissible windows;
/// the oracle for [`discrete_maximal`].
pub fn brute_force_maximal(
    f: &GridFunction,
    family: &ShiftFamily,
    spec: &MaximalSpec,
) -> Result<GridFunction> {
    check_space(f, family)?;
    let g = f.abs();
    let space = f.space();
    let len = space.len();
    let side_values = spec.side_values();
    let n = family.len();

    let mut combos: Vec<Vec<u64>> = Vec::new();
    let radix = vec![side_values.len() as u64; n];
    for_each_multi_index(&radix, |digits| {
        combos.push(digits.iter().map(|&d| side_values[d as usize]).collect());
    });

    match g.values() {
        GridValues::Exact { numer, denom } => {
            let q = *denom;
            let mut best_num = vec![-1i128; len];
            let mut best_den = vec![1i128; len];
            for sides in &combos {
                let volume: u64 = sides.iter().product();
                let den = q * volume as i128;
                let offsets = window_offsets(family, sides);
                for x in 0..len {
                    let mut acc = 0i128;
                    for off in &offsets {
                        acc += numer[space.shifted_index(x, off)];
                    }
                    if ratio_less(best_num[x], best_den[x], acc, den)? {
                        best_num[x] = acc;
                        best_den[x] = den;
                    }
                }
            }
            let values = best_num
                .iter()
                .zip(&best_den)
                .map(|(&n, &d)| n as f64 / d as f64)
                .collect();
            GridFunction::from_values(space.clone(), values)
        }
        GridValues::Float(vals) => {
            let mut best = vec![f64::NEG_INFINITY; len];
            for sides in &combos {
                let volume: u64 = sides.iter().product();
                let offsets = window_offsets(family, sides);
                for x in 0..len {
                    let mut acc = Compensated::default();
                    for off in &offsets {
                        acc.add(vals[space.shifted_index(x, off)]);
                    }
                    let v = acc.value() / volume as f64;
                    if v > best[x] {
                        best[x] = v;
                    }
                }
            }
            GridFunction::from_values(space.clone(), best)
        }
    }
}
