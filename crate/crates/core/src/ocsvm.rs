//! ν-one-class support vector machine.
//!
//! Solves the one-class dual
//!
//! ```text
//!   min_α ½ Σᵢⱼ αᵢ αⱼ K(xᵢ, xⱼ)   s.t.   0 ≤ αᵢ ≤ 1/(νN),  Σᵢ αᵢ = 1
//! ```
//!
//! with sequential minimal optimization over maximal KKT-violating pairs.
//! The offset ρ is the median of `Σⱼ αⱼ K(xᵢ, xⱼ)` over margin support
//! vectors; a point is an inlier when the decision value
//! `Σᵢ αᵢ K(x, xᵢ) − ρ` is non-negative.
//!
//! ν upper-bounds the fraction of training outliers and lower-bounds the
//! fraction of support vectors (both within 1/N). It is clamped below at
//! 1e-3: the selected "ν ≈ 0" configurations degenerate into an unbounded
//! box otherwise.

use crate::error::{Error, Result};

/// Smallest accepted ν; requested values below are clamped up.
pub const NU_MIN: f64 = 1e-3;

/// Default KKT tolerance of the solver.
pub const DEFAULT_TOL: f64 = 1e-6;

/// Pair-update budget before the solver reports non-convergence.
pub const MAX_PAIR_UPDATES: usize = 100_000;

/// Kernel function selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(−γ‖a−b‖²)`.
    Rbf { gamma: f64 },
    /// `(scale·⟨a,b⟩ + coef0)^order`.
    Polynomial { order: u32, coef0: f64, scale: f64 },
    /// `⟨a,b⟩`.
    Linear,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } => {
                if !(gamma > 0.0) {
                    return Err(Error::Config(format!("RBF γ must be positive, got {gamma}")));
                }
            }
            KernelSpec::Polynomial { order, .. } => {
                if !(2..=4).contains(&order) {
                    return Err(Error::Config(format!(
                        "polynomial order must lie in [2, 4], got {order}"
                    )));
                }
            }
            KernelSpec::Linear => {}
        }
        Ok(())
    }

    /// Conventional scale heuristic for RBF: `γ = 1/(d · mean feature
    /// variance)` over the training set.
    pub fn rbf_with_default_gamma(features: &[Vec<f64>]) -> Result<KernelSpec> {
        if features.is_empty() {
            return Err(Error::Data("cannot derive γ from zero features".to_string()));
        }
        let d = features[0].len();
        let n = features.len() as f64;
        let mut var_sum = 0.0;
        for dim in 0..d {
            let mean: f64 = features.iter().map(|f| f[dim]).sum::<f64>() / n;
            var_sum += features.iter().map(|f| (f[dim] - mean).powi(2)).sum::<f64>() / n;
        }
        let mean_var = (var_sum / d as f64).max(1e-12);
        Ok(KernelSpec::Rbf {
            gamma: 1.0 / (d as f64 * mean_var),
        })
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match *self {
            KernelSpec::Rbf { gamma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * sq).exp()
            }
            KernelSpec::Polynomial { order, coef0, scale } => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                (scale * dot + coef0).powi(order as i32)
            }
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

/// `K(a, b)` under the given kernel.
pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> f64 {
    spec.eval(a, b)
}

/// Fitted one-class SVM: support vectors, dual coefficients, offset.
#[derive(Debug, Clone, PartialEq)]
pub struct OcSvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub kernel: KernelSpec,
    /// Effective (clamped) ν the model was fitted with.
    pub nu: f64,
    /// Number of training points, N.
    pub training_size: usize,
    /// KKT tolerance the solver converged to. Decision values within this of
    /// zero are boundary points: the sign of a sub-tolerance value is solver
    /// noise, and margin support vectors sit at ±tol around ρ by
    /// construction.
    pub boundary_tol: f64,
}

/// Classification outcome of [`classify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Inlier,
    Outlier,
}

/// Fit the ν-one-class SVM by SMO.
///
/// ν is clamped into `[NU_MIN, 1]`; the box upper bound is `1/(νN)`. Returns
/// an error if the KKT violation has not dropped below `tol` within the
/// pair-update budget.
pub fn fit(features: &[Vec<f64>], nu: f64, kernel: KernelSpec, tol: f64) -> Result<OcSvmModel> {
    kernel.validate()?;
    if features.is_empty() {
        return Err(Error::Data("cannot fit on zero features".to_string()));
    }
    let dim = features[0].len();
    if dim == 0 || features.iter().any(|f| f.len() != dim) {
        return Err(Error::Data("features must share a positive dimension".to_string()));
    }
    if !nu.is_finite() || nu <= 0.0 || nu > 1.0 {
        return Err(Error::Config(format!("ν must lie in (0, 1], got {nu}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let nu = nu.clamp(NU_MIN, 1.0);
    let n = features.len();
    let c = 1.0 / (nu * n as f64);
    // Σα = 1 is feasible for every clamped ν: the box holds at least N·C = 1/ν ≥ 1.
    debug_assert!(c * n as f64 >= 1.0 - 1e-12);

    // Dense kernel matrix; training sets here are a few hundred points.
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| kernel.eval(&features[i], &features[j])).collect())
        .collect();

    // Feasible start: fill the first ⌊νN⌋ coefficients to the bound, put the
    // remainder on the next one.
    let mut alpha = vec![0.0; n];
    let full = ((nu * n as f64).floor() as usize).min(n);
    for a in alpha.iter_mut().take(full) {
        *a = c;
    }
    let assigned = c * full as f64;
    if full < n && assigned < 1.0 {
        alpha[full] = (1.0 - assigned).min(c);
    }

    // Gradient of the objective: g = Qα.
    let mut gradient = vec![0.0; n];
    for i in 0..n {
        gradient[i] = (0..n).map(|j| q[i][j] * alpha[j]).sum();
    }

    let lower_eps = 1e-12 * c;
    let mut converged = false;
    for _ in 0..MAX_PAIR_UPDATES {
        // Maximal violating pair: the best coefficient to grow (smallest
        // gradient, below the bound) against the best to shrink (largest
        // gradient, above zero).
        let mut up: Option<usize> = None;
        let mut down: Option<usize> = None;
        for i in 0..n {
            if alpha[i] < c - lower_eps && up.map_or(true, |u| gradient[i] < gradient[u]) {
                up = Some(i);
            }
            if alpha[i] > lower_eps && down.map_or(true, |d| gradient[i] > gradient[d]) {
                down = Some(i);
            }
        }
        let (i, j) = match (up, down) {
            (Some(i), Some(j)) => (i, j),
            // Box fully determines the solution (e.g. ν = 1).
            _ => {
                converged = true;
                break;
            }
        };
        let violation = gradient[j] - gradient[i];
        if violation < tol {
            converged = true;
            break;
        }
        let curvature = (q[i][i] + q[j][j] - 2.0 * q[i][j]).max(1e-12);
        let delta = (violation / curvature).min(c - alpha[i]).min(alpha[j]);
        alpha[i] += delta;
        alpha[j] -= delta;
        for k in 0..n {
            gradient[k] += delta * (q[k][i] - q[k][j]);
        }
    }
    if !converged {
        let max_violation = max_kkt_violation(&alpha, &gradient, c);
        return Err(Error::Numerical(format!(
            "SMO did not converge within {MAX_PAIR_UPDATES} pair updates; max KKT violation {max_violation:.3e}"
        )));
    }

    // ρ: median gradient over margin support vectors; if none are strictly
    // inside the box, fall back to the largest gradient among bound vectors.
    let margin: Vec<f64> = (0..n)
        .filter(|&i| alpha[i] > lower_eps && alpha[i] < c - lower_eps)
        .map(|i| gradient[i])
        .collect();
    let rho = if !margin.is_empty() {
        median(margin)
    } else {
        let bound_max = (0..n)
            .filter(|&i| alpha[i] >= c - lower_eps)
            .map(|i| gradient[i])
            .fold(f64::NEG_INFINITY, f64::max);
        if bound_max.is_finite() {
            bound_max
        } else {
            (0..n)
                .filter(|&i| alpha[i] > lower_eps)
                .map(|i| gradient[i])
                .fold(f64::NEG_INFINITY, f64::max)
        }
    };

    let mut support_vectors = Vec::new();
    let mut alphas = Vec::new();
    for i in 0..n {
        if alpha[i] > 1e-12 {
            support_vectors.push(features[i].clone());
            alphas.push(alpha[i]);
        }
    }
    Ok(OcSvmModel {
        support_vectors,
        alphas,
        rho,
        kernel,
        nu,
        training_size: n,
        boundary_tol: tol,
    })
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn max_kkt_violation(alpha: &[f64], gradient: &[f64], c: f64) -> f64 {
    let up = alpha
        .iter()
        .zip(gradient)
        .filter(|(&a, _)| a < c - 1e-12 * c)
        .map(|(_, &g)| g)
        .fold(f64::INFINITY, f64::min);
    let down = alpha
        .iter()
        .zip(gradient)
        .filter(|(&a, _)| a > 1e-12 * c)
        .map(|(_, &g)| g)
        .fold(f64::NEG_INFINITY, f64::max);
    (down - up).max(0.0)
}

/// Signed decision value `Σᵢ αᵢ K(x, xᵢ) − ρ`; negative means outlier.
pub fn decision(model: &OcSvmModel, x: &[f64]) -> f64 {
    assert_eq!(
        x.len(),
        model.support_vectors.first().map_or(x.len(), |sv| sv.len()),
        "probe dimension does not match the support vectors"
    );
    let sum: f64 = model
        .support_vectors
        .iter()
        .zip(&model.alphas)
        .map(|(sv, &a)| a * model.kernel.eval(x, sv))
        .sum();
    sum - model.rho
}

/// Inlier iff the decision value is non-negative; boundary points count as
/// inliers. A value within the solver tolerance of zero is a boundary point.
pub fn classify(model: &OcSvmModel, x: &[f64]) -> Classification {
    if decision(model, x) >= -model.boundary_tol {
        Classification::Inlier
    } else {
        Classification::Outlier
    }
}

/// Dual objective `½ Σᵢⱼ αᵢ αⱼ K(xᵢ, xⱼ)` for a coefficient vector over the
/// given points.
pub fn dual_objective(points: &[Vec<f64>], alphas: &[f64], kernel: &KernelSpec) -> f64 {
    let mut off_diagonal = 0.0;
    for (i, (pi, &ai)) in points.iter().zip(alphas).enumerate() {
        for (pj, &aj) in points.iter().zip(alphas).skip(i + 1) {
            off_diagonal += ai * aj * kernel.eval(pi, pj);
        }
    }
    let diagonal: f64 = points
        .iter()
        .zip(alphas)
        .map(|(p, &a)| a * a * kernel.eval(p, p))
        .sum();
    off_diagonal + 0.5 * diagonal
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Brute-force QP reference: projected gradient descent on the dual over
    //! the box-constrained simplex. Independent of the SMO path.

    use super::*;

    /// Euclidean projection of `v` onto `{α : 0 ≤ αᵢ ≤ c, Σαᵢ = 1}` by
    /// bisection on the shift τ in `αᵢ = clip(vᵢ − τ, 0, c)`.
    pub fn project_capped_simplex(v: &[f64], c: f64) -> Vec<f64> {
        let sum_at = |tau: f64| -> f64 {
            v.iter().map(|&vi| (vi - tau).clamp(0.0, c)).sum::<f64>()
        };
        let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - c - 1.0;
        let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sum_at(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);
        v.iter().map(|&vi| (vi - tau).clamp(0.0, c)).collect()
    }

    /// Minimize the dual by projected gradient with a conservative step.
    pub fn solve_qp(points: &[Vec<f64>], nu: f64, kernel: &KernelSpec, iterations: usize) -> Vec<f64> {
        let n = points.len();
        let c = 1.0 / (nu.clamp(NU_MIN, 1.0) * n as f64);
        let q: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| kernel.eval(&points[i], &points[j])).collect())
            .collect();
        // Gershgorin bound on the largest eigenvalue.
        let lipschitz = q
            .iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0f64, f64::max)
            .max(1e-12);
        let step = 1.0 / lipschitz;
        let mut alpha = project_capped_simplex(&vec![1.0 / n as f64; n], c);
        for _ in 0..iterations {
            let grad: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| q[i][j] * alpha[j]).sum())
                .collect();
            let moved: Vec<f64> = alpha.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
            alpha = project_capped_simplex(&moved, c);
        }
        alpha
    }
}

#[cfg(test)]
mod tests {
    use super::oracle;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_cloud(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    }

    #[test]
    fn kernel_closed_forms() {
        let rbf = KernelSpec::Rbf { gamma: 2.5 };
        assert_eq!(rbf.eval(&[1.0, -2.0], &[1.0, -2.0]), 1.0);

        let linear = KernelSpec::Linear;
        assert_eq!(linear.eval(&[1.0, 2.0], &[3.0, 4.0]), 11.0);

        let poly = KernelSpec::Polynomial {
            order: 2,
            coef0: 0.0,
            scale: 1.0,
        };
        assert_eq!(poly.eval(&[1.0, 1.0], &[1.0, 1.0]), 4.0);
    }

    #[test]
    fn kernel_validation() {
        assert!(KernelSpec::Rbf { gamma: 0.0 }.validate().is_err());
        assert!(KernelSpec::Polynomial { order: 5, coef0: 0.0, scale: 1.0 }.validate().is_err());
        assert!(KernelSpec::Linear.validate().is_ok());
    }

    #[test]
    fn default_gamma_on_standardized_features_is_half() {
        // Unit variance per component in 2-D → γ = 1/(2·1) = 0.5.
        let features = vec![
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![1.0, 1.0],
            vec![-1.0, -1.0],
        ];
        match KernelSpec::rbf_with_default_gamma(&features).unwrap() {
            KernelSpec::Rbf { gamma } => assert!((gamma - 0.5).abs() < 1e-12),
            other => panic!("unexpected kernel {other:?}"),
        }
    }

    #[test]
    fn two_points_nu_one_is_constraint_forced() {
        let features = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let model = fit(&features, 1.0, KernelSpec::Rbf { gamma: 1.0 }, 1e-8).unwrap();
        assert_eq!(model.alphas.len(), 2);
        for &a in &model.alphas {
            assert!((a - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn single_point_decision_is_zero_at_the_point() {
        let features = vec![vec![0.3, -0.7]];
        let model = fit(&features, 1.0, KernelSpec::Rbf { gamma: 0.5 }, 1e-8).unwrap();
        assert_eq!(model.alphas, vec![1.0]);
        assert!((model.rho - 1.0).abs() < 1e-12, "ρ = K(x,x) = 1 for RBF");
        assert!(decision(&model, &[0.3, -0.7]).abs() < 1e-12);
    }

    #[test]
    fn eight_point_cloud_matches_qp_oracle() {
        let features = gaussian_cloud(8, 2, 4);
        let kernel = KernelSpec::Rbf { gamma: 0.5 };
        let model = fit(&features, 0.25, kernel, 1e-8).unwrap();
        let smo_obj = dual_objective(&model.support_vectors, &model.alphas, &kernel);
        let oracle_alpha = oracle::solve_qp(&features, 0.25, &kernel, 300_000);
        let oracle_obj = dual_objective(&features, &oracle_alpha, &kernel);
        assert!(
            (smo_obj - oracle_obj).abs() < 1e-6,
            "SMO {smo_obj} vs oracle {oracle_obj}"
        );
        // The oracle's optimum is a certificate: SMO must not be above it.
        assert!(smo_obj <= oracle_obj + 1e-6);
    }

    #[test]
    fn cluster_center_is_inside() {
        let mut features = gaussian_cloud(24, 2, 9);
        for f in &mut features {
            f[0] = f[0] * 0.3 + 2.0;
            f[1] = f[1] * 0.3 - 1.0;
        }
        let kernel = KernelSpec::rbf_with_default_gamma(&features).unwrap();
        let model = fit(&features, 0.25, kernel, 1e-8).unwrap();
        assert!(decision(&model, &[2.0, -1.0]) > 0.0);
        assert_eq!(classify(&model, &[2.0, -1.0]), Classification::Inlier);
    }

    #[test]
    fn far_point_is_an_outlier_with_decision_near_minus_rho() {
        let features = gaussian_cloud(30, 2, 12);
        let model = fit(&features, 0.1, KernelSpec::Rbf { gamma: 0.5 }, 1e-8).unwrap();
        assert!(model.rho > 0.0);
        let far = [1e4, -1e4];
        let value = decision(&model, &far);
        assert!((value + model.rho).abs() < 1e-12, "kernel vanishes far away");
        assert_eq!(classify(&model, &far), Classification::Outlier);
    }

    #[test]
    fn margin_support_vectors_sit_on_the_boundary() {
        let features = gaussian_cloud(40, 2, 21);
        let tol = 1e-8;
        let model = fit(&features, 0.3, KernelSpec::Rbf { gamma: 0.7 }, tol).unwrap();
        let c = 1.0 / (model.nu * model.training_size as f64);
        let mut saw_margin = false;
        for (sv, &a) in model.support_vectors.iter().zip(&model.alphas) {
            if a > 1e-9 && a < c - 1e-9 {
                saw_margin = true;
                assert!(
                    decision(&model, sv).abs() < 10.0 * tol + 1e-9,
                    "margin SV decision {}",
                    decision(&model, sv)
                );
            }
        }
        assert!(saw_margin, "expected at least one margin support vector");
    }

    #[test]
    fn dual_feasibility_invariants() {
        for seed in [3u64, 14, 15] {
            let features = gaussian_cloud(60, 2, seed);
            for nu in [0.05, 0.25, 0.8] {
                let model = fit(&features, nu, KernelSpec::Rbf { gamma: 0.5 }, 1e-8).unwrap();
                let sum: f64 = model.alphas.iter().sum();
                assert!((sum - 1.0).abs() < 1e-8, "Σα = {sum}");
                let c = 1.0 / (model.nu * model.training_size as f64);
                assert!(model.alphas.iter().all(|&a| a > 0.0 && a <= c + 1e-12));
                assert!(!model.support_vectors.is_empty());
            }
        }
    }

    #[test]
    fn kkt_conditions_hold_at_tolerance() {
        let features = gaussian_cloud(50, 3, 33);
        let tol = 1e-8;
        let model = fit(&features, 0.2, KernelSpec::Rbf { gamma: 0.4 }, tol).unwrap();
        let c = 1.0 / (model.nu * model.training_size as f64);
        // Reconstruct per-point α (zero for non-SVs) and check
        // complementarity through the decision values.
        for point in &features {
            let alpha = model
                .support_vectors
                .iter()
                .zip(&model.alphas)
                .find(|(sv, _)| {
                    sv.iter().zip(point).all(|(a, b)| a == b)
                })
                .map(|(_, &a)| a)
                .unwrap_or(0.0);
            let value = decision(&model, point);
            let slack = 10.0 * tol + 1e-9;
            if alpha == 0.0 {
                assert!(value >= -slack, "α=0 point has decision {value}");
            } else if alpha >= c - 1e-9 {
                assert!(value <= slack, "bound point has decision {value}");
            } else {
                assert!(value.abs() <= slack, "margin point has decision {value}");
            }
        }
    }

    #[test]
    fn nu_property_on_random_data() {
        let n = 200;
        for (seed, nu) in [(1u64, 0.05), (2, 0.1), (3, 0.25), (4, 0.5)] {
            let features = gaussian_cloud(n, 2, seed);
            let model = fit(&features, nu, KernelSpec::Rbf { gamma: 0.5 }, 1e-8).unwrap();
            let outliers = features
                .iter()
                .filter(|f| classify(&model, f) == Classification::Outlier)
                .count();
            let slack = 1.0 / n as f64;
            assert!(
                outliers as f64 / n as f64 <= nu + slack,
                "ν={nu}: outlier fraction {}",
                outliers as f64 / n as f64
            );
            assert!(
                model.alphas.len() as f64 / n as f64 >= nu - slack,
                "ν={nu}: SV fraction {}",
                model.alphas.len() as f64 / n as f64
            );
        }
    }

    #[test]
    fn training_order_does_not_change_the_decision_function() {
        let features = gaussian_cloud(30, 2, 77);
        let mut shuffled = features.clone();
        shuffled.reverse();
        shuffled.swap(0, 7);
        shuffled.swap(3, 19);
        let kernel = KernelSpec::Rbf { gamma: 0.6 };
        let a = fit(&features, 0.2, kernel, 1e-10).unwrap();
        let b = fit(&shuffled, 0.2, kernel, 1e-10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let probe = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let da = decision(&a, &probe);
            let db = decision(&b, &probe);
            assert!((da - db).abs() < 1e-8, "probe {probe:?}: {da} vs {db}");
        }
    }

    #[test]
    fn rejects_invalid_nu_and_empty_input() {
        let features = gaussian_cloud(5, 2, 0);
        assert!(fit(&features, 0.0, KernelSpec::Linear, 1e-6).is_err());
        assert!(fit(&features, 1.5, KernelSpec::Linear, 1e-6).is_err());
        assert!(fit(&features, f64::NAN, KernelSpec::Linear, 1e-6).is_err());
        assert!(fit(&[], 0.5, KernelSpec::Linear, 1e-6).is_err());
    }

    #[test]
    fn tiny_nu_is_clamped_and_keeps_training_points_inside() {
        let features = gaussian_cloud(80, 2, 8);
        let model = fit(&features, 1e-9, KernelSpec::Rbf { gamma: 0.5 }, 1e-8).unwrap();
        assert_eq!(model.nu, NU_MIN);
        let outliers = features
            .iter()
            .filter(|f| classify(&model, f) == Classification::Outlier)
            .count();
        assert_eq!(outliers, 0, "ν≈0 must keep every training point inside");
    }

    #[test]
    fn boundary_decision_counts_as_inlier() {
        let model = OcSvmModel {
            support_vectors: vec![vec![0.0]],
            alphas: vec![1.0],
            rho: 1.0,
            kernel: KernelSpec::Rbf { gamma: 1.0 },
            nu: 1.0,
            training_size: 1,
            boundary_tol: 0.0,
        };
        // decision(0) = K(0,0) − 1 = 0 exactly.
        assert_eq!(classify(&model, &[0.0]), Classification::Inlier);
    }
}
