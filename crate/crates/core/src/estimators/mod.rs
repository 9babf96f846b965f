//! Cubature Kalman filtering.
//!
//! The forecast and filtering stages follow the third-degree spherical-radial
//! cubature rule: 2n equally weighted points at `x̂ ± √n·S·e_j` with
//! `S·Sᵀ = P`. The forecast propagates points through the discrete state map
//! (one RK4 step of the machine model with inputs held); the filtering stage
//! maps the regenerated points through the measurement function and applies
//! the standard gain/update equations. [`robust`] swaps the assumed
//! measurement covariance for a Huber-corrected one; [`identify`] implements
//! the forecast-vs-estimate attack identification rule.

pub mod identify;
pub mod robust;

use nalgebra::{Cholesky, Matrix3, Matrix4, Matrix4x3, SymmetricEigen, Vector3, Vector4};

use crate::dynamics::{rk4_step, ControlInput, GeneratorParams, GeneratorState};
use crate::error::{Error, Result};
use crate::measurement::measure;

pub use identify::{calibrate_dj, identify_attack, IdentificationState};
pub use robust::{huber_weights, rckf_update, rckf_update_with, HuberWeighting};

const STATE_DIM: usize = 4;
const NUM_POINTS: usize = 2 * STATE_DIM;
const POINT_WEIGHT: f64 = 1.0 / NUM_POINTS as f64;

/// Estimate, covariance, and process noise carried between stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub x_hat: Vector4<f64>,
    pub p: Matrix4<f64>,
    /// Constant diagonal process-noise covariance.
    pub q: Matrix4<f64>,
    /// Moment index.
    pub k: usize,
}

impl FilterState {
    pub fn new(x_hat: Vector4<f64>, p: Matrix4<f64>, q: Matrix4<f64>) -> Self {
        Self { x_hat, p, q, k: 0 }
    }
}

/// Diagonal-jitter repair applied when a covariance factorization failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqrtRepair {
    /// Jitter that made the factorization succeed.
    pub jitter: f64,
    /// Smallest eigenvalue of the symmetrized matrix before repair.
    pub min_eig: f64,
}

fn symmetrize4(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

fn max_asymmetry4(m: &Matrix4<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// Lower-triangular square-root factor of a symmetric PSD matrix.
///
/// The matrix is symmetrized first. If Cholesky fails, diagonal jitter is
/// added in decade steps from 1e-12 to 1e-6 and the repair is reported to
/// the caller; an unrepairable matrix is a hard error carrying its spectrum.
pub fn sqrt_factor(p: &Matrix4<f64>) -> Result<(Matrix4<f64>, Option<SqrtRepair>)> {
    let sym = symmetrize4(p);
    if let Some(chol) = Cholesky::new(sym) {
        return Ok((chol.l(), None));
    }
    let eig = SymmetricEigen::new(sym);
    let min_eig = eig.eigenvalues.min();
    let mut jitter = 1e-12;
    while jitter <= 1e-6 * (1.0 + 1e-9) {
        if let Some(chol) = Cholesky::new(sym + Matrix4::identity() * jitter) {
            return Ok((chol.l(), Some(SqrtRepair { jitter, min_eig })));
        }
        jitter *= 10.0;
    }
    Err(Error::CovarianceNotRepairable {
        min_eig,
        eigenvalues: eig.eigenvalues.iter().copied().collect(),
    })
}

/// The 2n cubature points of a Gaussian (x̂, P = S·Sᵀ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubatureSet {
    pub points: [Vector4<f64>; NUM_POINTS],
}

/// Points at `x̂ ± √n · S·e_j`, equal weights 1/(2n).
pub fn cubature_points(x_hat: &Vector4<f64>, s: &Matrix4<f64>) -> CubatureSet {
    let scale = (STATE_DIM as f64).sqrt();
    let mut points = [*x_hat; NUM_POINTS];
    for j in 0..STATE_DIM {
        let offset = s.column(j) * scale;
        points[j] += offset;
        points[STATE_DIM + j] -= offset;
    }
    CubatureSet { points }
}

/// Outcome of the forecasting stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forecast {
    pub x_pred: Vector4<f64>,
    pub p_pred: Matrix4<f64>,
    pub repair: Option<SqrtRepair>,
    /// Worst asymmetry of the predicted covariance before symmetrization.
    pub asymmetry: f64,
}

/// Forecast through an arbitrary discrete state map.
pub fn forecast_with<F>(fs: &FilterState, mut f: F) -> Result<Forecast>
where
    F: FnMut(&Vector4<f64>) -> Result<Vector4<f64>>,
{
    let (s, repair) = sqrt_factor(&fs.p)?;
    let set = cubature_points(&fs.x_hat, &s);
    let mut propagated = [Vector4::zeros(); NUM_POINTS];
    for (i, point) in set.points.iter().enumerate() {
        propagated[i] = f(point).map_err(|_| Error::PointDiverged { index: i })?;
        if propagated[i].iter().any(|v| !v.is_finite()) {
            return Err(Error::PointDiverged { index: i });
        }
    }
    let mut x_pred = Vector4::zeros();
    for p in &propagated {
        x_pred += p * POINT_WEIGHT;
    }
    let mut scatter = Matrix4::zeros();
    for p in &propagated {
        let d = p - x_pred;
        scatter += d * d.transpose() * POINT_WEIGHT;
    }
    let p_raw = scatter + fs.q;
    let asymmetry = max_asymmetry4(&p_raw);
    Ok(Forecast {
        x_pred,
        p_pred: symmetrize4(&p_raw),
        repair,
        asymmetry,
    })
}

/// Forecast through the generator state map: one RK4 step with the control
/// inputs held over the step.
pub fn forecast(
    fs: &FilterState,
    input: &ControlInput,
    params: &GeneratorParams,
    dt: f64,
) -> Result<Forecast> {
    forecast_with(fs, |x| {
        rk4_step(&GeneratorState::from_vector(x), input, params, dt).map(|s| s.as_vector())
    })
}

/// Cubature geometry of the filtering stage, shared by the plain and robust
/// updates: regenerated points, their measurement images, and the scatter
/// terms that do not depend on the measurement covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementGeometry {
    pub z_hat: Vector3<f64>,
    /// Measurement scatter without the noise term.
    pub scatter_zz: Matrix3<f64>,
    pub p_xz: Matrix4x3<f64>,
    pub repair: Option<SqrtRepair>,
}

/// Build the filtering-stage geometry through an arbitrary measurement map.
pub fn measurement_geometry_with<H>(
    x_pred: &Vector4<f64>,
    p_pred: &Matrix4<f64>,
    mut h: H,
) -> Result<MeasurementGeometry>
where
    H: FnMut(&Vector4<f64>) -> Vector3<f64>,
{
    let (s, repair) = sqrt_factor(p_pred)?;
    let set = cubature_points(x_pred, &s);
    let mut z_points = [Vector3::zeros(); NUM_POINTS];
    for (i, point) in set.points.iter().enumerate() {
        z_points[i] = h(point);
        if z_points[i].iter().any(|v| !v.is_finite()) {
            return Err(Error::PointDiverged { index: i });
        }
    }
    let mut z_hat = Vector3::zeros();
    for z in &z_points {
        z_hat += z * POINT_WEIGHT;
    }
    let mut scatter_zz = Matrix3::zeros();
    let mut p_xz = Matrix4x3::zeros();
    for (x, z) in set.points.iter().zip(z_points.iter()) {
        let dz = z - z_hat;
        scatter_zz += dz * dz.transpose() * POINT_WEIGHT;
        p_xz += (x - x_pred) * dz.transpose() * POINT_WEIGHT;
    }
    Ok(MeasurementGeometry {
        z_hat,
        scatter_zz,
        p_xz,
        repair,
    })
}

/// Geometry through the generator measurement function at a fixed terminal
/// phasor.
pub fn measurement_geometry(
    x_pred: &Vector4<f64>,
    p_pred: &Matrix4<f64>,
    u: f64,
    phi: f64,
    params: &GeneratorParams,
) -> Result<MeasurementGeometry> {
    measurement_geometry_with(x_pred, p_pred, |x| {
        measure(&GeneratorState::from_vector(x), u, phi, params)
    })
}

/// One completed filtering stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateResult {
    pub x_post: Vector4<f64>,
    pub p_post: Matrix4<f64>,
    pub innovation: Vector3<f64>,
    pub z_hat: Vector3<f64>,
    pub p_zz: Matrix3<f64>,
    pub gain: Matrix4x3<f64>,
    /// Measurement covariance actually used (corrected one for the robust
    /// update).
    pub r_used: Matrix3<f64>,
    /// Whether any channel tripped the Huber threshold.
    pub huber_triggered: bool,
    pub repair: Option<SqrtRepair>,
    /// Worst asymmetry of the posterior covariance before symmetrization.
    pub asymmetry: f64,
}

/// Finish the update from precomputed geometry and an effective measurement
/// covariance.
pub(crate) fn complete_update(
    geom: &MeasurementGeometry,
    x_pred: &Vector4<f64>,
    p_pred: &Matrix4<f64>,
    z: &Vector3<f64>,
    r_eff: &Matrix3<f64>,
) -> Result<UpdateResult> {
    let p_zz = geom.scatter_zz + r_eff;
    let chol = Cholesky::new(p_zz).ok_or(Error::SingularInnovation)?;
    // W = P_xz · P_zz⁻¹, via P_zz Wᵀ = P_xzᵀ.
    let gain = chol.solve(&geom.p_xz.transpose()).transpose();
    let innovation = z - geom.z_hat;
    let x_post = x_pred + gain * innovation;
    let p_raw = p_pred - gain * p_zz * gain.transpose();
    let asymmetry = max_asymmetry4(&p_raw);
    Ok(UpdateResult {
        x_post,
        p_post: symmetrize4(&p_raw),
        innovation,
        z_hat: geom.z_hat,
        p_zz,
        gain,
        r_used: *r_eff,
        huber_triggered: false,
        repair: geom.repair,
        asymmetry,
    })
}

/// Plain cubature measurement update through an arbitrary measurement map.
pub fn measurement_update_with<H>(
    x_pred: &Vector4<f64>,
    p_pred: &Matrix4<f64>,
    z: &Vector3<f64>,
    r: &Matrix3<f64>,
    h: H,
) -> Result<UpdateResult>
where
    H: FnMut(&Vector4<f64>) -> Vector3<f64>,
{
    let geom = measurement_geometry_with(x_pred, p_pred, h)?;
    complete_update(&geom, x_pred, p_pred, z, r)
}

/// Plain cubature measurement update with the generator measurement function.
pub fn measurement_update(
    x_pred: &Vector4<f64>,
    p_pred: &Matrix4<f64>,
    z: &Vector3<f64>,
    r: &Matrix3<f64>,
    u: f64,
    phi: f64,
    params: &GeneratorParams,
) -> Result<UpdateResult> {
    let geom = measurement_geometry(x_pred, p_pred, u, phi, params)?;
    complete_update(&geom, x_pred, p_pred, z, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng) -> Matrix4<f64> {
        let a = Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        a * a.transpose() + Matrix4::identity()
    }

    #[test]
    fn sqrt_factor_of_identity_is_identity() {
        let (s, repair) = sqrt_factor(&Matrix4::identity()).unwrap();
        assert_eq!(s, Matrix4::identity());
        assert!(repair.is_none());
    }

    #[test]
    fn sqrt_factor_of_diagonal_takes_roots() {
        let p = Matrix4::from_diagonal(&Vector4::new(4.0, 9.0, 1.0, 16.0));
        let (s, _) = sqrt_factor(&p).unwrap();
        assert_eq!(s, Matrix4::from_diagonal(&Vector4::new(2.0, 3.0, 1.0, 4.0)));
    }

    #[test]
    fn sqrt_factor_reconstructs_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let p = random_spd(&mut rng);
            let (s, repair) = sqrt_factor(&p).unwrap();
            assert!(repair.is_none());
            assert!((s * s.transpose() - p).amax() <= 1e-12);
            // Lower triangular.
            for r in 0..4 {
                for c in (r + 1)..4 {
                    assert_eq!(s[(r, c)], 0.0);
                }
            }
        }
    }

    #[test]
    fn tiny_negative_eigenvalue_is_repaired_and_reported() {
        let p = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, -1e-13));
        let (s, repair) = sqrt_factor(&p).unwrap();
        let repair = repair.expect("repair expected");
        assert!(repair.jitter <= 1e-6);
        assert!(repair.min_eig < 0.0 && repair.min_eig >= -1e-12);
        assert!((s * s.transpose() - p).amax() <= 1e-6);
    }

    #[test]
    fn strongly_indefinite_matrix_is_a_hard_error() {
        let p = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, -1.0));
        match sqrt_factor(&p) {
            Err(Error::CovarianceNotRepairable { min_eig, eigenvalues }) => {
                assert!((min_eig + 1.0).abs() < 1e-12);
                assert_eq!(eigenvalues.len(), 4);
            }
            other => panic!("expected hard error, got {other:?}"),
        }
    }

    #[test]
    fn unit_cubature_points_sit_at_twice_unit_axes() {
        let set = cubature_points(&Vector4::zeros(), &Matrix4::identity());
        for j in 0..4 {
            let mut expected = Vector4::zeros();
            expected[j] = 2.0;
            assert_eq!(set.points[j], expected);
            assert_eq!(set.points[4 + j], -expected);
        }
    }

    #[test]
    fn cubature_points_match_first_two_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = random_spd(&mut rng);
            let x = Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let (s, _) = sqrt_factor(&p).unwrap();
            let set = cubature_points(&x, &s);
            let mean: Vector4<f64> = set.points.iter().sum::<Vector4<f64>>() / 8.0;
            assert!((mean - x).amax() <= 1e-12);
            let mut scatter = Matrix4::zeros();
            for pt in &set.points {
                let d = pt - x;
                scatter += d * d.transpose() / 8.0;
            }
            assert!((scatter - p).amax() <= 1e-10);
        }
    }

    #[test]
    fn identity_map_with_zero_q_preserves_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_spd(&mut rng);
        let x = Vector4::new(0.1, -0.4, 0.9, 0.0);
        let fs = FilterState::new(x, p, Matrix4::zeros());
        let f = forecast_with(&fs, |v| Ok(*v)).unwrap();
        assert!((f.x_pred - x).amax() <= 1e-12);
        assert!((f.p_pred - p).amax() <= 1e-10);
    }

    #[test]
    fn forecast_is_exact_for_linear_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let p = random_spd(&mut rng);
        let q = Matrix4::from_diagonal(&Vector4::new(1e-3, 2e-3, 3e-3, 4e-3));
        let x = Vector4::new(0.3, -0.2, 0.5, 0.7);
        let fs = FilterState::new(x, p, q);
        let f = forecast_with(&fs, |v| Ok(a * v)).unwrap();
        assert!((f.x_pred - a * x).amax() <= 1e-10);
        assert!((f.p_pred - (a * p * a.transpose() + q)).amax() <= 1e-10);
    }

    #[test]
    fn process_noise_adds_verbatim() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_spd(&mut rng);
        let x = Vector4::new(0.3, -0.2, 0.5, 0.7);
        let q = 0.25;
        let with_q = forecast_with(
            &FilterState::new(x, p, Matrix4::identity() * q),
            |v| Ok(*v),
        )
        .unwrap();
        let without_q = forecast_with(&FilterState::new(x, p, Matrix4::zeros()), |v| Ok(*v)).unwrap();
        assert!((with_q.p_pred - without_q.p_pred - Matrix4::identity() * q).amax() <= 1e-12);
    }

    #[test]
    fn diverging_point_reports_its_index() {
        let fs = FilterState::new(Vector4::zeros(), Matrix4::identity(), Matrix4::zeros());
        let err = forecast_with(&fs, |v| {
            if v[1] < 0.0 {
                Ok(Vector4::repeat(f64::NAN))
            } else {
                Ok(*v)
            }
        })
        .unwrap_err();
        // Point 5 is x̂ − 2·e_1, the first with a negative second component.
        assert!(matches!(err, Error::PointDiverged { index: 5 }));
    }

    fn linear_h(m: &nalgebra::Matrix3x4<f64>) -> impl Fn(&Vector4<f64>) -> Vector3<f64> + '_ {
        move |x| m * x
    }

    #[test]
    fn zero_innovation_keeps_the_forecast() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_spd(&mut rng);
        let x = Vector4::new(0.2, 1.0, 1.1, 0.1);
        let hm = nalgebra::Matrix3x4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let r = Matrix3::identity() * 1e-3;
        let geom = measurement_geometry_with(&x, &p, linear_h(&hm)).unwrap();
        let res = measurement_update_with(&x, &p, &geom.z_hat.clone(), &r, linear_h(&hm)).unwrap();
        assert!((res.x_post - x).amax() <= 1e-12);
        assert_eq!(res.innovation, Vector3::zeros());
    }

    #[test]
    fn inflated_r_scales_the_correction_down() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_spd(&mut rng) * 1e-3;
        let x = Vector4::new(0.2, 1.0, 1.1, 0.1);
        let hm = nalgebra::Matrix3x4::new(
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.8, 0.0, 1.2, 0.4,
        );
        let r = Matrix3::identity() * 1e-2;
        let z = hm * x + Vector3::new(0.05, -0.02, 0.04);
        let nominal = measurement_update_with(&x, &p, &z, &r, linear_h(&hm)).unwrap();
        let huge = measurement_update_with(&x, &p, &z, &(r * 1e6), linear_h(&hm)).unwrap();
        let shrink = (nominal.x_post - x).norm() / (huge.x_post - x).norm();
        assert!(shrink >= 1e5, "correction shrank only {shrink}x");
    }

    #[test]
    fn single_step_matches_textbook_kalman_for_linear_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_spd(&mut rng) * 0.1;
        let x = Vector4::new(0.2, 1.0, 1.1, 0.1);
        let hm = nalgebra::Matrix3x4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let r = Matrix3::from_diagonal(&Vector3::new(1e-3, 2e-3, 3e-3));
        let z = hm * x + Vector3::new(0.02, -0.01, 0.03);
        let res = measurement_update_with(&x, &p, &z, &r, linear_h(&hm)).unwrap();
        // Direct Kalman equations.
        let s = hm * p * hm.transpose() + r;
        let k = p * hm.transpose() * s.try_inverse().unwrap();
        let x_kf = x + k * (z - hm * x);
        let p_kf = p - k * s * k.transpose();
        assert!((res.x_post - x_kf).amax() <= 1e-10);
        assert!((res.p_post - p_kf).amax() <= 1e-10);
    }

    #[test]
    fn posterior_covariance_stays_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let p = random_spd(&mut rng) * rng.random_range(1e-4..1.0);
            let x = Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let hm = nalgebra::Matrix3x4::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let r = Matrix3::from_diagonal(&Vector3::new(1e-3, 2e-3, 3e-3));
            let z = hm * x + Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05));
            let res = measurement_update_with(&x, &p, &z, &r, linear_h(&hm)).unwrap();
            assert!(res.asymmetry <= 1e-10);
            let eig = SymmetricEigen::new(res.p_post);
            assert!(eig.eigenvalues.min() >= -1e-10);
        }
    }
}
