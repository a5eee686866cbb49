//! Least-squares residualization of one variable set against another.
//!
//! Removing a chosen variable from a set replaces every other column by its
//! residual after simple regression on the chosen column. Iterating this step
//! produces the noise realizations attached to a candidate causal order. The
//! result only depends on *which* variables were removed, not on the removal
//! order, so residual sets can be cached per subset bitmask.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::DataMatrix;

/// Subset of variable indices, one bit per variable.
pub type Mask = u64;

/// Largest supported variable count for lattice masks.
pub const MAX_VARIABLES: usize = 63;

/// Full set over `p` variables.
pub fn full_mask(p: usize) -> Mask {
    debug_assert!(p <= MAX_VARIABLES);
    (1u64 << p) - 1
}

/// Indices of the set bits, ascending.
pub fn mask_indices(mask: Mask) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask & (1 << i) != 0)
}

pub fn sample_mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with 1/n normalization, two-pass.
pub fn sample_variance(x: &[f64]) -> f64 {
    let m = sample_mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Sample covariance with 1/n normalization, two-pass.
pub fn sample_covariance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let mx = sample_mean(x);
    let my = sample_mean(y);
    let s: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(s / x.len() as f64)
}

// Variance below (16 eps)^2 times the mean square of the column is treated
// as zero: the column is constant up to rounding noise.
fn variance_is_zero(var: f64, mean_square: f64) -> bool {
    let eps = 16.0 * f64::EPSILON;
    var <= eps * eps * mean_square
}

fn mean_square(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Regression coefficient `a = c(x,y) / v(x)` chosen so that the residual
/// `y - a*x` has zero sample covariance with `x`.
pub fn fit_coefficient(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 samples to fit a coefficient, got {}",
            x.len()
        )));
    }
    let v = sample_variance(x);
    if variance_is_zero(v, mean_square(x)) {
        return Err(Error::ZeroVariance { column: None });
    }
    Ok(sample_covariance(x, y)? / v)
}

/// Residual columns attached to a lattice node.
///
/// Holds one mean-centered residual vector per member index. Construction
/// guarantees that each vector is orthogonal (zero sample covariance) to the
/// residuals of every variable removed so far.
#[derive(Debug, Clone)]
pub struct ResidualSet {
    members: Mask,
    residuals: BTreeMap<usize, Vec<f64>>,
    /// Variance threshold below which a residual counts as deterministic:
    /// 1e-12 times the mean column variance of the original data.
    variance_floor: f64,
    n: usize,
}

impl ResidualSet {
    /// Top-of-lattice residual set: every column of the data, mean-centered.
    pub fn from_data(data: &DataMatrix) -> Self {
        let n = data.n();
        let mut residuals = BTreeMap::new();
        let mut var_sum = 0.0;
        for (idx, col) in data.columns().iter().enumerate() {
            let m = sample_mean(col);
            let centered: Vec<f64> = col.iter().map(|v| v - m).collect();
            var_sum += sample_variance(&centered);
            residuals.insert(idx, centered);
        }
        let variance_floor = 1e-12 * var_sum / data.p() as f64;
        Self { members: full_mask(data.p()), residuals, variance_floor, n }
    }

    pub fn members(&self) -> Mask {
        self.members
    }

    pub fn member_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.residuals.keys().copied()
    }

    /// Number of member variables.
    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn residual(&self, index: usize) -> &[f64] {
        &self.residuals[&index]
    }

    /// Residual vectors in ascending index order.
    pub fn residual_columns(&self) -> Vec<&[f64]> {
        self.residuals.values().map(|v| v.as_slice()).collect()
    }

    /// Remove `chosen` from the set, replacing every remaining residual
    /// `r_j` by `r_j - (c(r_c, r_j) / v(r_c)) * r_c`, re-centered.
    pub fn regress_out(&self, chosen: usize) -> Result<ResidualSet> {
        if self.members & (1 << chosen) == 0 {
            return Err(Error::InvalidInput(format!(
                "variable {chosen} is not a member of this residual set"
            )));
        }
        if self.len() < 2 {
            return Err(Error::InvalidInput(
                "regress_out needs at least two member variables".into(),
            ));
        }
        let rc = &self.residuals[&chosen];
        let vc = sample_variance(rc);
        if vc <= self.variance_floor || variance_is_zero(vc, mean_square(rc)) {
            return Err(Error::ZeroVariance { column: Some(chosen) });
        }

        let mut residuals = BTreeMap::new();
        for (&j, rj) in &self.residuals {
            if j == chosen {
                continue;
            }
            let a = sample_covariance(rc, rj)? / vc;
            let mut out: Vec<f64> = rj.iter().zip(rc).map(|(y, x)| y - a * x).collect();
            let m = sample_mean(&out);
            for v in &mut out {
                *v -= m;
            }
            debug_assert!(centered_ok(&out));
            debug_assert!(orthogonal_ok(rc, &out));
            residuals.insert(j, out);
        }
        Ok(ResidualSet {
            members: self.members & !(1 << chosen),
            residuals,
            variance_floor: self.variance_floor,
            n: self.n,
        })
    }
}

fn centered_ok(v: &[f64]) -> bool {
    let mean = sample_mean(v);
    let sd = sample_variance(v).sqrt();
    mean.abs() <= 1e-9 * (sd + 1.0)
}

fn orthogonal_ok(a: &[f64], b: &[f64]) -> bool {
    let c = sample_covariance(a, b).expect("equal lengths");
    let scale = (sample_variance(a) * sample_variance(b)).sqrt();
    c.abs() <= 1e-8 * (scale + 1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(cols: &[(&str, Vec<f64>)]) -> DataMatrix {
        DataMatrix::new(cols.iter().map(|(n, v)| (n.to_string(), v.clone())).collect()).unwrap()
    }

    #[test]
    fn exact_linear_relation_gives_exact_coefficient() {
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 4.0, 6.0];
        let a = fit_coefficient(&x, &y).unwrap();
        assert_eq!(a, 2.0);
        let resid: Vec<f64> = y.iter().zip(&x).map(|(y, x)| y - a * x).collect();
        assert!(resid.iter().all(|r| r.abs() == 0.0));
    }

    #[test]
    fn identity_case() {
        let x = [0.3, -1.7, 2.2, 0.9];
        assert_eq!(fit_coefficient(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn constant_predictor_is_rejected() {
        let x = [5.0; 10];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert!(matches!(fit_coefficient(&x, &y), Err(Error::ZeroVariance { .. })));
        // A constant with rounding noise after centering is still constant.
        let x2 = vec![0.1; 7];
        let y2 = vec![1.0, 2.0, 1.5, 0.5, 2.5, 1.0, 2.0];
        assert!(matches!(fit_coefficient(&x2, &y2), Err(Error::ZeroVariance { .. })));
    }

    #[test]
    fn length_mismatch_is_reported() {
        assert_eq!(
            fit_coefficient(&[1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap_err(),
            Error::LengthMismatch { left: 2, right: 3 }
        );
    }

    /// Independent oracle for the coefficient: the pairwise double-loop
    /// identities c = (1/2n^2) sum_ij (x_i-x_j)(y_i-y_j), v likewise.
    fn double_loop_coefficient(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let mut c = 0.0;
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                c += (x[i] - x[j]) * (y[i] - y[j]);
                v += (x[i] - x[j]) * (x[i] - x[j]);
            }
        }
        c / v
    }

    #[test]
    fn random_coefficient_matches_double_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1000;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let a = fit_coefficient(&x, &y).unwrap();
        assert!(a.abs() < 0.1, "independent uniforms should give a small coefficient, got {a}");
        assert_relative_eq!(a, double_loop_coefficient(&x, &y), max_relative = 1e-10);
        // Residual decorrelates from the predictor.
        let resid: Vec<f64> = y.iter().zip(&x).map(|(y, x)| y - a * x).collect();
        let c = sample_covariance(&x, &resid).unwrap();
        let scale = (sample_variance(&x) * sample_variance(&y)).sqrt();
        assert!(c.abs() <= 1e-10 * scale);
    }

    #[test]
    fn duplicate_column_degenerates_to_zero() {
        let x = vec![1.0, -2.0, 0.5, 3.0, -1.5];
        let m = matrix(&[("a", x.clone()), ("b", x)]);
        let top = ResidualSet::from_data(&m);
        let reduced = top.regress_out(0).unwrap();
        assert!(reduced.residual(1).iter().all(|v| v.abs() < 1e-12));
        // The surviving all-zero residual is a deterministic relation.
        let m3 = matrix(&[
            ("a", vec![1.0, -2.0, 0.5, 3.0, -1.5]),
            ("b", vec![1.0, -2.0, 0.5, 3.0, -1.5]),
            ("c", vec![0.3, 0.1, -0.2, 0.9, 1.1]),
        ]);
        let reduced = ResidualSet::from_data(&m3).regress_out(0).unwrap();
        assert!(matches!(reduced.regress_out(1), Err(Error::ZeroVariance { column: Some(1) })));
    }

    #[test]
    fn three_variable_commutativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 40;
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let y: Vec<f64> = x.iter().map(|v| 0.8 * v + (rng.random::<f64>() - 0.5)).collect();
            let z: Vec<f64> = x
                .iter()
                .zip(&y)
                .map(|(x, y)| 0.5 * x - 1.2 * y + (rng.random::<f64>() - 0.5))
                .collect();
            let m = matrix(&[("x", x), ("y", y), ("z", z)]);
            let top = ResidualSet::from_data(&m);
            let via_xy = top.regress_out(0).unwrap().regress_out(1).unwrap();
            let via_yx = top.regress_out(1).unwrap().regress_out(0).unwrap();
            let a = via_xy.residual(2);
            let b = via_yx.residual(2);
            let scale = sample_variance(a).sqrt();
            for (u, v) in a.iter().zip(b) {
                assert!((u - v).abs() <= 1e-9 * (scale + 1.0), "{u} vs {v}");
            }
        }
    }

    /// Closed-form two-predictor residual:
    /// z_xy = z - [v(y)c(x,z) - c(x,y)c(y,z)] / D * x
    ///          - [v(x)c(y,z) - c(x,y)c(x,z)] / D * y,   D = v(x)v(y) - c(x,y)^2.
    fn two_predictor_residual(x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let vx = sample_variance(x);
        let vy = sample_variance(y);
        let cxy = sample_covariance(x, y).unwrap();
        let cxz = sample_covariance(x, z).unwrap();
        let cyz = sample_covariance(y, z).unwrap();
        let d = vx * vy - cxy * cxy;
        let bx = (vy * cxz - cxy * cyz) / d;
        let by = (vx * cyz - cxy * cxz) / d;
        z.iter()
            .enumerate()
            .map(|(i, zi)| zi - bx * x[i] - by * y[i])
            .collect()
    }

    #[test]
    fn cascade_matches_closed_form_two_predictor_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 200;
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let m = matrix(&[
            ("a", cols[0].clone()),
            ("b", cols[1].clone()),
            ("c", cols[2].clone()),
            ("d", cols[3].clone()),
        ]);
        let top = ResidualSet::from_data(&m);
        let after0 = top.regress_out(0).unwrap();
        let cascade = after0.regress_out(1).unwrap().regress_out(2).unwrap();
        let closed = two_predictor_residual(after0.residual(1), after0.residual(2), after0.residual(3));
        // The closed form is not re-centered; compare after centering.
        let mc = sample_mean(&closed);
        let scale = sample_variance(&closed).sqrt();
        for (u, v) in cascade.residual(3).iter().zip(&closed) {
            assert!((u - (v - mc)).abs() <= 1e-9 * (scale + 1.0));
        }
    }

    #[test]
    fn orthogonal_input_is_untouched() {
        let x = vec![1.0, -1.0, 1.0, -1.0];
        let y = vec![1.0, 1.0, -1.0, -1.0];
        assert_eq!(sample_covariance(&x, &y).unwrap(), 0.0);
        let m = matrix(&[("x", x), ("y", y.clone())]);
        let reduced = ResidualSet::from_data(&m).regress_out(0).unwrap();
        assert_eq!(reduced.residual(1), y.as_slice());
    }
}
