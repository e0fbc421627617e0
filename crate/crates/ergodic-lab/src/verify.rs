//! The experiment layer: empirical weak-type sweeps, convergence probes,
//! the divergence-extension inequality, and sharpness ladders.
//!
//! The weak-type report compares the level sets of the discrete maximal
//! function against the Orlicz integral with weight order `d - 1`, where `d`
//! is always the rank of the shift family, never user input. Sweep cells are
//! independent and may run in parallel; reports are assembled in grid order,
//! so output is identical for any worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::averaging::{
    discrete_maximal, multi_average_wrapping, MaximalSpec, WindowSpec,
};
use crate::lattice::ShiftFamily;
use crate::space::{fmt_float, GridFunction, OrliczWeight};
use crate::{Error, Result};

/// Level-set / Orlicz-integral ratios of the maximal function over a
/// lambda grid.
#[derive(Debug, Clone, Serialize)]
pub struct WeakTypeReport {
    pub lambdas: Vec<f64>,
    pub level_set: Vec<f64>,
    pub orlicz_integral: Vec<f64>,
    pub ratio: Vec<f64>,
    pub sup_ratio: f64,
    /// Rank of the family; the weight order is `rank - 1`.
    pub rank: usize,
    pub generators: usize,
}

impl WeakTypeReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("parameter,level_set,orlicz_integral,ratio\n");
        for i in 0..self.lambdas.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_float(self.lambdas[i]),
                fmt_float(self.level_set[i]),
                fmt_float(self.orlicz_integral[i]),
                fmt_float(self.ratio[i]),
            ));
        }
        out
    }
}

/// 25 log-spaced lambdas from `0.5 ||f||_1` to `2 ||f||_inf`.
pub fn default_lambda_grid(f: &GridFunction) -> Result<Vec<f64>> {
    lambda_grid(f, 25)
}

fn lambda_grid(f: &GridFunction, count: usize) -> Result<Vec<f64>> {
    let lo = 0.5 * f.l1_norm();
    let hi = 2.0 * f.linf_norm();
    if !(lo > 0.0) {
        return Err(Error::Domain(
            "lambda grid undefined for the zero function".into(),
        ));
    }
    let ratio = hi / lo;
    Ok((0..count)
        .map(|i| lo * ratio.powf(i as f64 / (count - 1) as f64))
        .collect())
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::Domain("lambda grid must be nonempty".into()));
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Domain("lambda values must be positive".into()));
    }
    if lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("lambda grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Compute `D f` once, then for every lambda the ratio
/// `mu{D f > lambda} / int Log_{d-1}(|f| / lambda)`.
pub fn weak_type_sweep(
    f: &GridFunction,
    family: &ShiftFamily,
    spec: &MaximalSpec,
    lambdas: &[f64],
) -> Result<WeakTypeReport> {
    check_lambdas(lambdas)?;
    let d = family.rank();
    if d == 0 {
        return Err(Error::Domain(
            "weak-type sweep needs a family of rank >= 1".into(),
        ));
    }
    let weight = OrliczWeight::new((d - 1) as u32);
    let maximal = discrete_maximal(f, family, spec)?;
    let rows: Vec<(f64, f64, f64)> = lambdas
        .par_iter()
        .map(|&lambda| {
            let ls = maximal.level_set_measure(lambda);
            let oi = f.orlicz_integral(&weight, lambda)?;
            let ratio = if oi > 0.0 { ls / oi } else { 0.0 };
            Ok((ls, oi, ratio))
        })
        .collect::<Result<_>>()?;
    let sup_ratio = rows.iter().map(|r| r.2).fold(0.0f64, f64::max);
    Ok(WeakTypeReport {
        lambdas: lambdas.to_vec(),
        level_set: rows.iter().map(|r| r.0).collect(),
        orlicz_integral: rows.iter().map(|r| r.1).collect(),
        ratio: rows.iter().map(|r| r.2).collect(),
        sup_ratio,
        rank: d,
        generators: family.len(),
    })
}

/// Deviation of box averages from the exact mean along a window ladder.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub rungs: Vec<Vec<u64>>,
    pub sup_deviation: Vec<f64>,
    pub l1_deviation: Vec<f64>,
    pub mean: f64,
}

impl ConvergenceReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("parameter,sup_deviation,l1_deviation\n");
        for i in 0..self.rungs.len() {
            let min_side = self.rungs[i].iter().min().copied().unwrap_or(0);
            out.push_str(&format!(
                "{},{},{}\n",
                min_side,
                fmt_float(self.sup_deviation[i]),
                fmt_float(self.l1_deviation[i]),
            ));
        }
        out
    }
}

fn deviations(g: &GridFunction, f: &GridFunction) -> Result<(f64, f64)> {
    if let (Some((gn, gd)), Some((mn, md))) = (g.exact_parts(), f.mean_exact()) {
        // per point: gn/gd - mn/md = (gn*md - mn*gd) / (gd*md), exactly
        let common = gd
            .checked_mul(md)
            .ok_or_else(|| Error::Degenerate("overflow in exact deviation".into()))?;
        let mut max_abs = 0i128;
        let mut sum_abs = 0i128;
        for &a in gn {
            let diff = a
                .checked_mul(md)
                .and_then(|x| mn.checked_mul(gd).map(|y| x - y))
                .ok_or_else(|| Error::Degenerate("overflow in exact deviation".into()))?
                .abs();
            max_abs = max_abs.max(diff);
            sum_abs = sum_abs
                .checked_add(diff)
                .ok_or_else(|| Error::Degenerate("overflow in exact deviation".into()))?;
        }
        let sup = max_abs as f64 / common as f64;
        let l1 = sum_abs as f64 / (common as f64 * g.len() as f64);
        return Ok((sup, l1));
    }
    let mean = f.mean();
    let mut sup = 0.0f64;
    let mut sum = 0.0f64;
    for i in 0..g.len() {
        let diff = (g.value(i) - mean).abs();
        sup = sup.max(diff);
        sum += diff;
    }
    Ok((sup, sum / g.len() as f64))
}

/// Box-average deviations `||A_s f - mean f||` along a ladder of windows.
///
/// Rungs are evaluated with wrap-around allowed: exact-period windows of a
/// rational rotation system cover every residue equally only by wrapping,
/// and there the deviation vanishes exactly on the integer path.
pub fn convergence_probe(
    f: &GridFunction,
    family: &ShiftFamily,
    ladder: &[WindowSpec],
) -> Result<ConvergenceReport> {
    if ladder.is_empty() {
        return Err(Error::Domain("ladder must contain at least one window".into()));
    }
    let rows: Vec<(f64, f64)> = ladder
        .par_iter()
        .map(|w| {
            let g = multi_average_wrapping(f, family, w)?;
            deviations(&g, f)
        })
        .collect::<Result<_>>()?;
    Ok(ConvergenceReport {
        rungs: ladder.iter().map(|w| w.sides().to_vec()).collect(),
        sup_deviation: rows.iter().map(|r| r.0).collect(),
        l1_deviation: rows.iter().map(|r| r.1).collect(),
        mean: f.mean(),
    })
}

/// Witness of a failed extension inequality (must never occur).
#[derive(Debug, Clone, Serialize)]
pub struct ExtensionWitness {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Result of the pointwise check
/// `Abar_{(s,t)} f >= A_s f / (t_1 ... t_m)`.
#[derive(Debug, Clone, Serialize)]
pub struct ExtensionCheck {
    pub ok: bool,
    pub witness: Option<ExtensionWitness>,
    /// Smallest observed `lhs - rhs`.
    pub min_slack: f64,
    pub extension_volume: u64,
}

impl ExtensionCheck {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("index,lhs,rhs,slack\n");
        if let Some(w) = &self.witness {
            out.push_str(&format!(
                "{},{},{},{}\n",
                w.index,
                fmt_float(w.lhs),
                fmt_float(w.rhs),
                fmt_float(w.lhs - w.rhs),
            ));
        } else {
            out.push_str(&format!(",,,{}\n", fmt_float(self.min_slack)));
        }
        out
    }
}

/// Verify the divergence-extension inequality: averaging over the extended
/// window `(s, t)` dominates the base average divided by the extension
/// volume, pointwise, for nonnegative `f`. The base average runs over the
/// first `s.len()` generators.
pub fn divergence_extension_check(
    f: &GridFunction,
    family: &ShiftFamily,
    s: &WindowSpec,
    t: &[u64],
) -> Result<ExtensionCheck> {
    if f.min_value() < 0.0 {
        return Err(Error::Domain("extension check needs f >= 0".into()));
    }
    let split = s.sides().len();
    if split + t.len() != family.len() {
        return Err(Error::Mismatch(format!(
            "sides {} + extension {} must cover all {} generators",
            split,
            t.len(),
            family.len()
        )));
    }
    if t.contains(&0) {
        return Err(Error::Domain("extension sides must be >= 1".into()));
    }
    let base_family = family.restrict(&(0..split).collect::<Vec<_>>())?;
    let base = multi_average_wrapping(f, &base_family, s)?;
    let mut all_sides = s.sides().to_vec();
    all_sides.extend_from_slice(t);
    let extended = multi_average_wrapping(f, family, &WindowSpec::new(all_sides)?)?;
    let t_volume = t
        .iter()
        .try_fold(1u64, |acc, &x| acc.checked_mul(x))
        .ok_or_else(|| Error::Domain("extension volume overflows".into()))?;

    let mut min_slack = f64::INFINITY;
    let mut witness = None;
    if let (Some((en, ed)), Some((bn, bd))) = (extended.exact_parts(), base.exact_parts()) {
        // lhs = en/ed, rhs = bn/(bd * t_volume); compare exactly
        let rd = bd
            .checked_mul(t_volume as i128)
            .ok_or_else(|| Error::Degenerate("overflow in extension check".into()))?;
        for i in 0..f.len() {
            let lhs = en[i]
                .checked_mul(rd)
                .ok_or_else(|| Error::Degenerate("overflow in extension check".into()))?;
            let rhs = bn[i]
                .checked_mul(ed)
                .ok_or_else(|| Error::Degenerate("overflow in extension check".into()))?;
            let slack = (lhs - rhs) as f64 / (ed as f64 * rd as f64);
            if slack < min_slack {
                min_slack = slack;
            }
            if lhs < rhs && witness.is_none() {
                witness = Some(ExtensionWitness {
                    index: i,
                    lhs: en[i] as f64 / ed as f64,
                    rhs: bn[i] as f64 / rd as f64,
                });
            }
        }
    } else {
        for i in 0..f.len() {
            let lhs = extended.value(i);
            let rhs = base.value(i) / t_volume as f64;
            let slack = lhs - rhs;
            if slack < min_slack {
                min_slack = slack;
            }
            if slack < -1e-12 * rhs.abs().max(1.0) && witness.is_none() {
                witness = Some(ExtensionWitness { index: i, lhs, rhs });
            }
        }
    }
    Ok(ExtensionCheck {
        ok: witness.is_none(),
        witness,
        min_slack,
        extension_volume: t_volume,
    })
}

/// One sup-ratio cell of a sharpness ladder.
#[derive(Debug, Clone, Serialize)]
pub struct SharpnessRow {
    pub height: u64,
    pub weight_order: u32,
    pub lambda: f64,
    pub level_set: f64,
    pub orlicz_integral: f64,
    pub ratio: f64,
}

/// Growth diagnosis over the height ladder.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthDiagnosis {
    /// `sup ratio(H_last) / sup ratio(H_first)` for the lower weight order.
    pub low_growth_factor: f64,
    /// Whether the lower-order ratios increase along the whole ladder.
    pub low_monotone: bool,
    /// Least-squares slope of the lower-order ratio against `ln H`.
    pub low_log_slope: f64,
    /// `max/min - 1` of the higher-order ratios over the tail half.
    pub high_tail_spread: f64,
}

/// Sup ratios against the critical weight `Log_{d-1}` and the sub-critical
/// weight `Log_{d-2}` (or `Log_0`) along a spike-height ladder.
#[derive(Debug, Clone, Serialize)]
pub struct SharpnessReport {
    pub heights: Vec<u64>,
    pub order_high: u32,
    pub order_low: u32,
    pub ratio_high: Vec<f64>,
    pub ratio_low: Vec<f64>,
    pub detail: Vec<SharpnessRow>,
    pub growth: GrowthDiagnosis,
}

impl SharpnessReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("parameter,weight_order,level_set,orlicz_integral,ratio\n");
        for row in &self.detail {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.height,
                row.weight_order,
                fmt_float(row.level_set),
                fmt_float(row.orlicz_integral),
                fmt_float(row.ratio),
            ));
        }
        out
    }
}

/// Height-`H` spike function of unit mean: value `H` on `round(|X| / H)`
/// points taken from the prefix of one fixed seeded shuffle, so supports are
/// nested along the ladder.
fn spike_function(
    space: &crate::space::GridSpace,
    perm: &[u32],
    height: u64,
) -> Result<GridFunction> {
    let len = space.len();
    let count = ((len as f64 / height as f64).round() as usize).clamp(1, len);
    let mut numer = vec![0i128; len];
    for &idx in &perm[..count] {
        numer[idx as usize] = height as i128;
    }
    GridFunction::from_integers(space.clone(), numer, 1)
}

fn sup_cell(
    maximal: &GridFunction,
    f: &GridFunction,
    order: u32,
    lambdas: &[f64],
    height: u64,
) -> Result<SharpnessRow> {
    let weight = OrliczWeight::new(order);
    let mut best = SharpnessRow {
        height,
        weight_order: order,
        lambda: lambdas[0],
        level_set: 0.0,
        orlicz_integral: 0.0,
        ratio: 0.0,
    };
    for &lambda in lambdas {
        let ls = maximal.level_set_measure(lambda);
        let oi = f.orlicz_integral(&weight, lambda)?;
        let ratio = if oi > 0.0 { ls / oi } else { 0.0 };
        if ratio > best.ratio {
            best = SharpnessRow {
                height,
                weight_order: order,
                lambda,
                level_set: ls,
                orlicz_integral: oi,
                ratio,
            };
        }
    }
    Ok(best)
}

/// For each spike height `H`, build the unit-mean height-`H` spike function,
/// apply the maximal operator once, and record the sup ratio against both
/// weight orders. The contrast between a flat `Log_{d-1}` band and a growing
/// `Log_{d-2}` curve is the sharpness diagnosis.
pub fn sharpness_sweep(
    family: &ShiftFamily,
    heights: &[u64],
    spec: &MaximalSpec,
    seed: u64,
) -> Result<SharpnessReport> {
    if heights.is_empty() {
        return Err(Error::Domain("need at least one spike height".into()));
    }
    if heights.contains(&0) {
        return Err(Error::Domain("spike heights must be >= 1".into()));
    }
    if heights.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("spike heights must be strictly increasing".into()));
    }
    let d = family.rank();
    if d == 0 {
        return Err(Error::Domain("sharpness sweep needs a family of rank >= 1".into()));
    }
    family.window_guard(spec.cap)?;
    let order_high = (d - 1) as u32;
    let order_low = d.saturating_sub(2) as u32;

    // one fixed shuffle: the ladder thins the same point set
    let space = family.space().clone();
    let mut perm: Vec<u32> = (0..space.len() as u32).collect();
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);

    let cells: Vec<(SharpnessRow, SharpnessRow)> = heights
        .par_iter()
        .map(|&h| {
            let f = spike_function(&space, &perm, h)?;
            // a denser grid than the 25-point report default: the sup over
            // lambda is the quantity of interest here, and coarse sampling
            // aliases it across the ladder
            let lambdas = lambda_grid(&f, 201)?;
            let maximal = discrete_maximal(&f, family, spec)?;
            let hi = sup_cell(&maximal, &f, order_high, &lambdas, h)?;
            let lo = sup_cell(&maximal, &f, order_low, &lambdas, h)?;
            Ok((hi, lo))
        })
        .collect::<Result<_>>()?;

    let ratio_high: Vec<f64> = cells.iter().map(|c| c.0.ratio).collect();
    let ratio_low: Vec<f64> = cells.iter().map(|c| c.1.ratio).collect();

    let low_growth_factor = if ratio_low[0] > 0.0 {
        ratio_low[ratio_low.len() - 1] / ratio_low[0]
    } else {
        f64::INFINITY
    };
    let low_monotone = ratio_low.windows(2).all(|w| w[1] > w[0]);
    let tail_start = heights.len() / 2;
    let tail = &ratio_high[tail_start..];
    let tail_max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail_min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let high_tail_spread = if tail_min > 0.0 { tail_max / tail_min - 1.0 } else { f64::INFINITY };

    // least-squares slope of ratio_low against ln H
    let xs: Vec<f64> = heights.iter().map(|&h| (h as f64).ln()).collect();
    let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
    let ybar = ratio_low.iter().sum::<f64>() / ratio_low.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ratio_low)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let low_log_slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };

    let mut detail = Vec::with_capacity(cells.len() * 2);
    for (hi, lo) in cells {
        detail.push(hi);
        detail.push(lo);
    }

    Ok(SharpnessReport {
        heights: heights.to_vec(),
        order_high,
        order_low,
        ratio_high,
        ratio_low,
        detail,
        growth: GrowthDiagnosis {
            low_growth_factor,
            low_monotone,
            low_log_slope,
            high_tail_spread,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::MaximalMode;
    use crate::space::GridSpace;

    fn family(moduli: &[u64], gens: &[&[i64]]) -> ShiftFamily {
        let space = GridSpace::new(moduli.to_vec()).unwrap();
        ShiftFamily::new(space, gens.iter().map(|g| g.to_vec()).collect()).unwrap()
    }

    #[test]
    fn weak_type_hand_example() {
        // Z_8, v = (1), f = 8 * spike at 0, M = 8 exact:
        // Df(x) = 8 / (dist to 0 + 1), so {Df > 4} = {0}
        let fam = family(&[8], &[&[1]]);
        let f = GridFunction::spike(fam.space().clone(), &[0], 8).unwrap();
        let spec = MaximalSpec::new(8, MaximalMode::Exact).unwrap();
        let report = weak_type_sweep(&f, &fam, &spec, &[4.0]).unwrap();
        assert_eq!(report.rank, 1);
        assert_eq!(report.level_set[0], 0.125);
        assert_eq!(report.orlicz_integral[0], 0.25);
        assert_eq!(report.ratio[0], 0.5);
        assert_eq!(report.sup_ratio, 0.5);
    }

    #[test]
    fn weak_type_trivial_cases() {
        let fam = family(&[8], &[&[1]]);
        let one = GridFunction::constant(fam.space().clone(), 1.0).unwrap();
        let spec = MaximalSpec::new(4, MaximalMode::Exact).unwrap();
        let report = weak_type_sweep(&one, &fam, &spec, &[2.0]).unwrap();
        assert_eq!(report.ratio[0], 0.0); // empty level set

        // lambda beyond ||Df||_inf
        let f = GridFunction::spike(fam.space().clone(), &[0], 8).unwrap();
        let report = weak_type_sweep(&f, &fam, &spec, &[100.0]).unwrap();
        assert_eq!(report.ratio[0], 0.0);

        assert!(weak_type_sweep(&f, &fam, &spec, &[2.0, 1.0]).is_err());
        assert!(weak_type_sweep(&f, &fam, &spec, &[]).is_err());
        let rank0 = family(&[8], &[&[0]]);
        assert!(weak_type_sweep(&f, &rank0, &spec, &[1.0]).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let fam = family(&[16], &[&[1]]);
        let f = GridFunction::spike(fam.space().clone(), &[0], 16).unwrap();
        let grid = default_lambda_grid(&f).unwrap();
        assert_eq!(grid.len(), 25);
        assert!((grid[0] - 0.5).abs() < 1e-12); // 0.5 * ||f||_1 = 0.5 * 1
        assert!((grid[24] - 32.0).abs() < 1e-9); // 2 * ||f||_inf
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        let zero = GridFunction::constant(fam.space().clone(), 0.0).unwrap();
        assert!(default_lambda_grid(&zero).is_err());
    }

    #[test]
    fn convergence_full_orbit_is_exact() {
        // gcd(3, 7) = 1: the full window covers the whole orbit
        let fam = family(&[7], &[&[3]]);
        let f = GridFunction::random_ints(fam.space().clone(), -9, 9, 21);
        let report =
            convergence_probe(&f, &fam, &[WindowSpec::new(vec![7]).unwrap()]).unwrap();
        assert_eq!(report.sup_deviation[0], 0.0);
        assert_eq!(report.l1_deviation[0], 0.0);
    }

    #[test]
    fn convergence_rotation_period_window() {
        // theta = (1/2, 1/3) on Z_6: window (2, 3) hits every residue once
        let fam = crate::lattice::rotation_to_shift(
            &[num_rational::Ratio::new(1, 2), num_rational::Ratio::new(1, 3)],
            1,
        )
        .unwrap();
        let f = GridFunction::random_ints(fam.space().clone(), 0, 9, 4);
        let report =
            convergence_probe(&f, &fam, &[WindowSpec::new(vec![2, 3]).unwrap()]).unwrap();
        assert_eq!(report.sup_deviation[0], 0.0);

        let c = GridFunction::constant(fam.space().clone(), 5.0).unwrap();
        let ladder = vec![
            WindowSpec::new(vec![1, 1]).unwrap(),
            WindowSpec::new(vec![2, 2]).unwrap(),
        ];
        let report = convergence_probe(&c, &fam, &ladder).unwrap();
        assert!(report.sup_deviation.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn extension_hand_example() {
        // Z_5, v = (1), (2), f = spike, s = (2), t = (3)
        let fam = family(&[5], &[&[1], &[2]]);
        let f = GridFunction::spike(fam.space().clone(), &[0], 1).unwrap();
        let s = WindowSpec::new(vec![2]).unwrap();
        let check = divergence_extension_check(&f, &fam, &s, &[3]).unwrap();
        assert!(check.ok);
        // Abar(0) = 1/3 and A(0)/3 = 1/6 by direct enumeration
        let extended =
            multi_average_wrapping(&f, &fam, &WindowSpec::new(vec![2, 3]).unwrap()).unwrap();
        assert!((extended.value(0) - 1.0 / 3.0).abs() < 1e-15);

        // f == 1: lhs is 1 everywhere, rhs is 1/3
        let one = GridFunction::constant(fam.space().clone(), 1.0).unwrap();
        let check = divergence_extension_check(&one, &fam, &s, &[3]).unwrap();
        assert!(check.ok);
        assert!((check.min_slack - (1.0 - 1.0 / 3.0)).abs() < 1e-12);

        // trivial extension t = (1): equality
        let check = divergence_extension_check(&one, &fam, &s, &[1]).unwrap();
        assert!(check.ok);
        assert_eq!(check.min_slack, 0.0);

        // negative f rejected
        let neg = GridFunction::constant(fam.space().clone(), -1.0).unwrap();
        assert!(divergence_extension_check(&neg, &fam, &s, &[3]).is_err());
    }

    #[test]
    fn extension_randomized_never_fails() {
        for seed in 0..40u64 {
            let fam = family(&[7, 9], &[&[1, 0], &[0, 1], &[1, 1]]);
            let f = GridFunction::random_ints(fam.space().clone(), 0, 9, seed);
            let s = WindowSpec::new(vec![1 + seed % 3, 1 + (seed / 3) % 3]).unwrap();
            let t = [1 + (seed / 9) % 4];
            let check = divergence_extension_check(&f, &fam, &s, &t).unwrap();
            assert!(check.ok, "violation at seed {seed}: {:?}", check.witness);
            assert!(check.min_slack >= 0.0);
        }
    }

    #[test]
    fn sharpness_smoke() {
        let fam = family(&[61, 61], &[&[1, 0], &[0, 1], &[1, 1]]);
        let spec = MaximalSpec::new(8, MaximalMode::Dyadic).unwrap();
        let report = sharpness_sweep(&fam, &[8, 16, 32], &spec, 1).unwrap();
        assert_eq!(report.order_high, 1);
        assert_eq!(report.order_low, 0);
        assert_eq!(report.ratio_high.len(), 3);
        assert_eq!(report.detail.len(), 6);
        assert!(report.ratio_low.iter().all(|&r| r > 0.0));

        assert!(sharpness_sweep(&fam, &[8, 8], &spec, 1).is_err());
        assert!(sharpness_sweep(&fam, &[], &spec, 1).is_err());
        let rank0 = family(&[8], &[&[0]]);
        assert!(sharpness_sweep(&rank0, &[2, 4], &spec, 1).is_err());
    }

    /// Calibration constant: the largest sup ratio observed when running the
    /// standard battery below through `brute_force_maximal` in exact mode
    /// (d = 1, 2, 3 families, spikes / double spikes / random signs).
    const C_CAL: f64 = 1.184;

    #[test]
    fn weak_type_battery_stays_calibrated() {
        use crate::averaging::brute_force_maximal;

        let cases: Vec<(ShiftFamily, u64)> = vec![
            (family(&[64], &[&[1]]), 16),
            (family(&[17, 17], &[&[1, 0], &[0, 1]]), 8),
            (family(&[19, 19], &[&[1, 0], &[0, 1], &[1, 1]]), 4),
            (family(&[7, 7, 7], &[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]), 2),
        ];
        for (fam, m) in &cases {
            let space = fam.space().clone();
            let origin = vec![0u64; space.dims()];
            let mut two = vec![0i128; space.len()];
            two[0] = 16;
            two[space.len() / 2] = 16;
            let functions = vec![
                GridFunction::spike(space.clone(), &origin, 1).unwrap(),
                GridFunction::spike(space.clone(), &origin, 32).unwrap(),
                GridFunction::from_integers(space.clone(), two, 1).unwrap(),
                GridFunction::random_pm1(space.clone(), 5),
            ];
            for f in &functions {
                let grid = default_lambda_grid(f).unwrap();
                let spec = MaximalSpec::new(*m, MaximalMode::Dyadic).unwrap();
                let report = weak_type_sweep(f, fam, &spec, &grid).unwrap();
                assert!(
                    report.sup_ratio <= 2.0 * C_CAL,
                    "fast sup ratio {} exceeds 2 * C_cal on d={} n={}",
                    report.sup_ratio,
                    fam.rank(),
                    fam.len()
                );
            }
        }

        // independent oracle spot check on the smallest case: the dyadic
        // fast ratio never exceeds the exact brute-force ratio
        let (fam, m) = &cases[3];
        let f = GridFunction::spike(fam.space().clone(), &[0, 0, 0], 32).unwrap();
        let grid = default_lambda_grid(&f).unwrap();
        let brute = brute_force_maximal(&f, fam, &MaximalSpec::new(*m, MaximalMode::Exact).unwrap())
            .unwrap();
        let weight = OrliczWeight::new((fam.rank() - 1) as u32);
        let oracle_sup = grid
            .iter()
            .map(|&l| {
                let oi = f.orlicz_integral(&weight, l).unwrap();
                if oi > 0.0 { brute.level_set_measure(l) / oi } else { 0.0 }
            })
            .fold(0.0f64, f64::max);
        let fast = weak_type_sweep(&f, fam, &MaximalSpec::new(*m, MaximalMode::Dyadic).unwrap(), &grid)
            .unwrap();
        assert!(fast.sup_ratio <= oracle_sup + 1e-12);
        assert!(oracle_sup <= C_CAL + 1e-9);
    }

    #[test]
    fn rank_sensitivity_small_scale() {
        // dependent family of rank 2: the critical class is Log_1, one order
        // below the generator count; its sup ratios plateau while Log_0 grows
        let fam = family(&[127, 127], &[&[1, 0], &[0, 1], &[1, 1]]);
        assert_eq!(fam.rank(), 2);
        let spec = MaximalSpec::new(8, MaximalMode::Dyadic).unwrap();
        let report = sharpness_sweep(&fam, &[16, 64, 256, 1024], &spec, 0).unwrap();
        assert!(report.growth.low_monotone);
        assert!(report.growth.low_growth_factor >= 1.5);
        // plateau of the critical order over the tail of the ladder
        let tail = &report.ratio_high[1..];
        let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(hi / lo - 1.0 < 0.10, "critical ratios vary by {:.3}", hi / lo - 1.0);
    }

    #[test]
    fn report_csv_shapes() {
        let fam = family(&[8], &[&[1]]);
        let f = GridFunction::spike(fam.space().clone(), &[0], 8).unwrap();
        let spec = MaximalSpec::new(8, MaximalMode::Exact).unwrap();
        let report = weak_type_sweep(&f, &fam, &spec, &[2.0, 4.0]).unwrap();
        let csv = report.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("parameter,level_set,orlicz_integral,ratio"));
        assert_eq!(csv.lines().count(), 3);
        assert!(!csv.contains('\r'));
    }
}
