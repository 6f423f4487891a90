//! Levenberg-Marquardt refinement of the reprojection cost over SE(3).
//!
//! Parameters are a 6-vector `[δρ; δφ]`: `δρ` shifts the translation and
//! `exp(δφ)` pre-multiplies the rotation. Residuals are `π(T X) − u`.

use nalgebra::{Matrix2x3, Matrix2x6, Matrix3, Matrix6, Vector2, Vector3, Vector6};

use super::{CorrespondenceSet, PoseError, PoseEstimate, SolverConfig};
use crate::geometry::{GeometryError, PinholeCamera, RigidTransform};
use crate::scalar::Real;

/// Damping beyond which no step can reduce the cost any more.
const MAX_DAMPING: f64 = 1e12;

/// `∂(π(T X) − u) / ∂[δρ; δφ]` at `pose`.
pub fn jacobian_reprojection<T: Real>(
    camera: &PinholeCamera<T>,
    point_ref: &Vector3<T>,
    pose: &RigidTransform<T>,
) -> Result<Matrix2x6<T>, GeometryError> {
    let rotated = pose.rotation() * point_ref;
    let p = rotated + pose.translation();
    if p.z <= T::zero() {
        return Err(GeometryError::NonPositiveDepth(p.z.as_f64()));
    }
    let iz = T::one() / p.z;
    let iz2 = iz * iz;
    let d_proj = Matrix2x3::new(
        camera.fx() * iz,
        T::zero(),
        -camera.fx() * p.x * iz2,
        T::zero(),
        camera.fy() * iz,
        -camera.fy() * p.y * iz2,
    );
    // d(exp(φ) R X)/dφ at φ = 0 is −[R X]×.
    let d_rot: Matrix3<T> = -rotated.cross_matrix();
    let mut j = Matrix2x6::zeros();
    j.fixed_view_mut::<2, 3>(0, 0).copy_from(&d_proj);
    j.fixed_view_mut::<2, 3>(0, 3).copy_from(&(d_proj * d_rot));
    Ok(j)
}

/// Sum of squared reprojection residuals.
pub fn reprojection_cost<T: Real>(
    camera: &PinholeCamera<T>,
    corrs: &CorrespondenceSet<T>,
    pose: &RigidTransform<T>,
) -> Result<T, GeometryError> {
    let mut cost = T::zero();
    for e in corrs.entries() {
        let uv = camera.project(&pose.transform_point(&e.point_ref))?;
        cost += (uv - e.point_img).norm_squared();
    }
    Ok(cost)
}

fn normal_equations<T: Real>(
    camera: &PinholeCamera<T>,
    corrs: &CorrespondenceSet<T>,
    pose: &RigidTransform<T>,
) -> Result<(Matrix6<T>, Vector6<T>), GeometryError> {
    let mut h = Matrix6::zeros();
    let mut g = Vector6::zeros();
    for e in corrs.entries() {
        let j = jacobian_reprojection(camera, &e.point_ref, pose)?;
        let r: Vector2<T> = camera.project(&pose.transform_point(&e.point_ref))? - e.point_img;
        h += j.transpose() * j;
        g += j.transpose() * r;
    }
    Ok((h, g))
}

/// Minimizes the reprojection cost starting from `init`.
///
/// Running out of iterations is not an error: the best pose found is
/// returned with `converged = false`.
pub fn refine_lm<T: Real>(
    camera: &PinholeCamera<T>,
    corrs: &CorrespondenceSet<T>,
    init: &RigidTransform<T>,
    config: &SolverConfig<T>,
) -> Result<PoseEstimate<T>, PoseError> {
    config.validate()?;
    if corrs.is_empty() {
        return Err(PoseError::TooFewCorrespondences { count: 0, required: 1 });
    }
    let mut pose = *init;
    let mut cost = reprojection_cost(camera, corrs, &pose)?;
    let mut history = vec![cost];
    let mut damping = config.initial_damping;
    let max_damping = T::lit(MAX_DAMPING);
    let mut converged = cost == T::zero();
    let mut iterations = 0;

    'outer: while !converged && iterations < config.max_iterations {
        iterations += 1;
        let (h, g) = normal_equations(camera, corrs, &pose)?;
        loop {
            let mut damped = h;
            for i in 0..6 {
                damped[(i, i)] += damping * h[(i, i)].max(T::default_epsilon());
            }
            let Some(chol) = damped.cholesky() else {
                damping *= config.damping_up;
                if damping > max_damping {
                    converged = true;
                    break 'outer;
                }
                continue;
            };
            let step = -chol.solve(&g);
            if step.norm() < config.step_tolerance {
                converged = true;
                break 'outer;
            }
            let candidate = pose.perturbed(
                &Vector3::new(step[0], step[1], step[2]),
                &Vector3::new(step[3], step[4], step[5]),
            );
            let new_cost = reprojection_cost(camera, corrs, &candidate).unwrap_or(T::max_value().unwrap());
            if new_cost < cost {
                let relative = (cost - new_cost) / cost;
                pose = candidate;
                cost = new_cost;
                history.push(cost);
                damping = (damping * config.damping_down).max(T::default_epsilon());
                if relative < config.cost_tolerance || cost == T::zero() {
                    converged = true;
                }
                break;
            }
            damping *= config.damping_up;
            if damping > max_damping {
                // No descent left at working precision.
                converged = true;
                break 'outer;
            }
        }
    }

    // Re-orthonormalize to remove drift accumulated by repeated products.
    let pose = RigidTransform::from_parts_unchecked(
        crate::geometry::nearest_rotation(pose.rotation()),
        *pose.translation(),
    );
    let cost_final = reprojection_cost(camera, corrs, &pose)?;
    let n = T::from_usize(2 * corrs.len()).unwrap();
    Ok(PoseEstimate {
        pose,
        rms_reprojection_error: (cost_final / n).sqrt(),
        iterations_used: iterations,
        converged,
        cost_history: history,
    })
}
