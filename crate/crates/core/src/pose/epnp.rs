//! Closed-form EPnP initialization.
//!
//! Reference points are written as barycentric combinations of control
//! points placed along their principal axes. Coplanar point sets (the usual
//! case for a tag plate) use three control points instead of four. The
//! camera-frame control points span the (approximate) null space of the
//! projection system; the combination weights are fixed by the pairwise
//! control-point distances, then refined by a few Gauss-Newton steps.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

use super::{CorrespondenceSet, PoseError};
use crate::geometry::{nearest_rotation, PinholeCamera, RigidTransform};
use crate::scalar::Real;

const BETA_GAUSS_NEWTON_STEPS: usize = 10;

pub fn epnp_initialize<T: Real>(
    camera: &PinholeCamera<T>,
    corrs: &CorrespondenceSet<T>,
) -> Result<RigidTransform<T>, PoseError> {
    let n = corrs.len();
    if n < 4 {
        return Err(PoseError::TooFewCorrespondences { count: n, required: 4 });
    }
    let refs: Vec<Vector3<T>> = corrs.entries().iter().map(|e| e.point_ref).collect();
    let nf = T::from_usize(n).unwrap();

    let centroid = refs.iter().fold(Vector3::zeros(), |acc, p| acc + p) / nf;
    let mut cov = Matrix3::zeros();
    for p in &refs {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= nf;
    let (axes, variances) = sorted_eigen3(cov);
    let rel = T::lit(1e-10);
    if !(variances[0] > T::zero()) || variances[1] <= rel * variances[0] {
        return Err(PoseError::DegenerateConfiguration);
    }
    let planar = variances[2] <= rel * variances[0];
    let n_axes = if planar { 2 } else { 3 };
    let nc = n_axes + 1;

    // Control points c0 = centroid, c_k = centroid + sigma_k * axis_k.
    let sigmas: Vec<T> = (0..n_axes).map(|k| variances[k].sqrt()).collect();
    let mut controls = vec![centroid];
    for k in 0..n_axes {
        controls.push(centroid + axes[k] * sigmas[k]);
    }

    // Barycentric coordinates.
    let alphas: Vec<Vec<T>> = refs
        .iter()
        .map(|p| {
            let d = p - centroid;
            let mut a = vec![T::zero(); nc];
            let mut sum = T::zero();
            for k in 0..n_axes {
                a[k + 1] = d.dot(&axes[k]) / sigmas[k];
                sum += a[k + 1];
            }
            a[0] = T::one() - sum;
            a
        })
        .collect();

    let (fx, fy, cx, cy) = (camera.fx(), camera.fy(), camera.cx(), camera.cy());
    let dim = 3 * nc;
    let mut mtm = DMatrix::<T>::zeros(dim, dim);
    let mut row_u = DVector::<T>::zeros(dim);
    let mut row_v = DVector::<T>::zeros(dim);
    for (e, a) in corrs.entries().iter().zip(&alphas) {
        let (u, v) = (e.point_img.x, e.point_img.y);
        for j in 0..nc {
            row_u[3 * j] = a[j] * fx;
            row_u[3 * j + 1] = T::zero();
            row_u[3 * j + 2] = a[j] * (cx - u);
            row_v[3 * j] = T::zero();
            row_v[3 * j + 1] = a[j] * fy;
            row_v[3 * j + 2] = a[j] * (cy - v);
        }
        mtm += &row_u * row_u.transpose();
        mtm += &row_v * row_v.transpose();
    }

    let eig = SymmetricEigen::new(mtm);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let null_vectors: Vec<DVector<T>> = order
        .iter()
        .take(4)
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();

    let pairs: Vec<(usize, usize)> = (0..nc)
        .flat_map(|a| ((a + 1)..nc).map(move |b| (a, b)))
        .collect();
    let target: Vec<T> = pairs
        .iter()
        .map(|&(a, b)| (controls[a] - controls[b]).norm_squared())
        .collect();

    let max_dims = if planar { 2 } else { 3 };
    let mut best: Option<(T, RigidTransform<T>)> = None;
    let mut any_in_front = false;
    for dims in 1..=max_dims {
        let Some(betas) = linearized_betas(&null_vectors[..dims], &pairs, &target) else {
            continue;
        };
        let betas = refine_betas(betas, &null_vectors[..dims], &pairs, &target);
        let Some(pose) = pose_from_betas(&betas, &null_vectors[..dims], &alphas, &refs) else {
            continue;
        };
        any_in_front = true;
        let err = reprojection_sq(camera, corrs, &pose);
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, pose));
        }
    }
    match best {
        Some((_, pose)) => Ok(pose),
        None if !any_in_front => Err(PoseError::BehindCamera),
        None => Err(PoseError::DegenerateConfiguration),
    }
}

/// Eigenvectors of a symmetric 3×3 matrix, ordered by decreasing eigenvalue.
fn sorted_eigen3<T: Real>(m: Matrix3<T>) -> ([Vector3<T>; 3], [T; 3]) {
    let eig = m.symmetric_eigen();
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let axes = idx.map(|i| eig.eigenvectors.column(i).into_owned());
    let vals = idx.map(|i| eig.eigenvalues[i].max(T::zero()));
    (axes, vals)
}

fn control_diff<T: Real>(v: &DVector<T>, a: usize, b: usize) -> Vector3<T> {
    Vector3::new(
        v[3 * a] - v[3 * b],
        v[3 * a + 1] - v[3 * b + 1],
        v[3 * a + 2] - v[3 * b + 2],
    )
}

/// Solves the distance constraints for products `beta_i beta_j` by linear
/// least squares and recovers the betas from the diagonal terms.
fn linearized_betas<T: Real>(
    null_vectors: &[DVector<T>],
    pairs: &[(usize, usize)],
    target: &[T],
) -> Option<Vec<T>> {
    let dims = null_vectors.len();
    let products: Vec<(usize, usize)> = (0..dims)
        .flat_map(|i| (i..dims).map(move |j| (i, j)))
        .collect();
    if products.len() > pairs.len() {
        return None;
    }
    let mut l = DMatrix::<T>::zeros(pairs.len(), products.len());
    for (r, &(a, b)) in pairs.iter().enumerate() {
        let diffs: Vec<Vector3<T>> = null_vectors.iter().map(|v| control_diff(v, a, b)).collect();
        for (c, &(i, j)) in products.iter().enumerate() {
            let factor = if i == j { T::one() } else { T::lit(2.0) };
            l[(r, c)] = factor * diffs[i].dot(&diffs[j]);
        }
    }
    let rhs = DVector::from_column_slice(target);
    let sol = l.svd(true, true).solve(&rhs, T::default_epsilon()).ok()?;

    let product = |i: usize, j: usize| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        sol[products.iter().position(|&p| p == (i, j)).unwrap()]
    };
    let b00 = product(0, 0);
    if !b00.is_finite() {
        return None;
    }
    let mut betas = vec![T::zero(); dims];
    betas[0] = b00.abs().sqrt();
    for (k, beta) in betas.iter_mut().enumerate().skip(1) {
        let mag = product(k, k).abs().sqrt();
        *beta = if product(0, k) < T::zero() { -mag } else { mag };
    }
    if b00 < T::zero() {
        // Overall sign is settled later by the depth vote.
        for b in &mut betas {
            *b = -*b;
        }
    }
    Some(betas)
}

fn refine_betas<T: Real>(
    mut betas: Vec<T>,
    null_vectors: &[DVector<T>],
    pairs: &[(usize, usize)],
    target: &[T],
) -> Vec<T> {
    let dims = betas.len();
    for _ in 0..BETA_GAUSS_NEWTON_STEPS {
        let mut jac = DMatrix::<T>::zeros(pairs.len(), dims);
        let mut res = DVector::<T>::zeros(pairs.len());
        for (r, &(a, b)) in pairs.iter().enumerate() {
            let diffs: Vec<Vector3<T>> = null_vectors.iter().map(|v| control_diff(v, a, b)).collect();
            let combined = diffs
                .iter()
                .zip(&betas)
                .fold(Vector3::zeros(), |acc, (d, &beta)| acc + d * beta);
            res[r] = combined.norm_squared() - target[r];
            for k in 0..dims {
                jac[(r, k)] = T::lit(2.0) * combined.dot(&diffs[k]);
            }
        }
        let Ok(step) = jac.svd(true, true).solve(&res, T::default_epsilon()) else {
            break;
        };
        if !step.iter().all(|s| s.is_finite()) {
            break;
        }
        for k in 0..dims {
            betas[k] -= step[k];
        }
    }
    betas
}

/// Camera-frame control points from the betas, sign chosen by depth vote,
/// then the rigid alignment of the reference points onto the reconstructed
/// camera-frame points.
fn pose_from_betas<T: Real>(
    betas: &[T],
    null_vectors: &[DVector<T>],
    alphas: &[Vec<T>],
    refs: &[Vector3<T>],
) -> Option<RigidTransform<T>> {
    let nc = alphas[0].len();
    let mut x = DVector::<T>::zeros(3 * nc);
    for (v, &b) in null_vectors.iter().zip(betas) {
        x += v * b;
    }
    let controls: Vec<Vector3<T>> = (0..nc)
        .map(|j| Vector3::new(x[3 * j], x[3 * j + 1], x[3 * j + 2]))
        .collect();
    let mut cam_pts: Vec<Vector3<T>> = alphas
        .iter()
        .map(|a| {
            a.iter()
                .zip(&controls)
                .fold(Vector3::zeros(), |acc, (&w, c)| acc + c * w)
        })
        .collect();
    let in_front = cam_pts.iter().filter(|p| p.z > T::zero()).count();
    if 2 * in_front < cam_pts.len() {
        for p in &mut cam_pts {
            *p = -*p;
        }
    }
    if !cam_pts.iter().any(|p| p.z > T::zero()) {
        return None;
    }
    let pose = absolute_orientation(refs, &cam_pts);
    pose.rotation().iter().all(|v| v.is_finite()).then_some(pose)
}

/// Rigid transform `T` minimizing `Σ |T src_i − dst_i|²`.
fn absolute_orientation<T: Real>(src: &[Vector3<T>], dst: &[Vector3<T>]) -> RigidTransform<T> {
    let n = T::from_usize(src.len()).unwrap();
    let cs = src.iter().fold(Vector3::zeros(), |acc, p| acc + p) / n;
    let cd = dst.iter().fold(Vector3::zeros(), |acc, p| acc + p) / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (d - cd) * (s - cs).transpose();
    }
    let r = nearest_rotation(&h);
    let t = cd - r * cs;
    RigidTransform::from_parts_unchecked(r, t)
}

fn reprojection_sq<T: Real>(
    camera: &PinholeCamera<T>,
    corrs: &CorrespondenceSet<T>,
    pose: &RigidTransform<T>,
) -> T {
    corrs.entries().iter().fold(T::zero(), |acc, e| {
        match camera.project(&pose.transform_point(&e.point_ref)) {
            Ok(uv) => acc + (uv - e.point_img).norm_squared(),
            Err(_) => T::max_value().unwrap(),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_delta, DeformationVector};
    use crate::layout::TagLayout;
    use crate::pose::tests::project_layout;
    use crate::pose::Correspondence;
    use nalgebra::Vector2;

    fn nominal() -> RigidTransform<f64> {
        RigidTransform::from_translation(Vector3::new(0.0, 0.0, 10.0))
    }

    #[test]
    fn recovers_planar_pose_without_noise() {
        let cam = PinholeCamera::default();
        let layout = TagLayout::default_layout();
        for d in [
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.5, -0.3, 0.8, 0.1, -0.12, 0.05],
            [-1.0, 1.0, -1.0, -0.15, 0.15, -0.15],
        ] {
            let truth = apply_delta(&nominal(), &DeformationVector::from_array(d).unwrap());
            let corrs = project_layout(&cam, &layout, &truth);
            let est = epnp_initialize(&cam, &corrs).unwrap();
            assert!((est.translation() - truth.translation()).norm() < 1e-6, "{d:?}");
            assert!(est.rotation_angle_to(&truth) < 1e-6, "{d:?}");
        }
    }

    #[test]
    fn recovers_non_planar_pose() {
        let cam = PinholeCamera::default();
        let truth = RigidTransform::from_scaled_axis(Vector3::new(0.1, -0.2, 0.3), Vector3::new(0.5, -0.4, 20.0));
        let pts = [
            Vector3::new(-3.0, -2.0, 0.5),
            Vector3::new(4.0, -1.0, -1.0),
            Vector3::new(2.0, 3.0, 2.0),
            Vector3::new(-2.0, 4.0, -0.5),
            Vector3::new(0.0, 0.0, 3.0),
            Vector3::new(1.0, -3.0, 1.5),
            Vector3::new(-4.0, 1.0, 0.0),
        ];
        let entries = pts
            .iter()
            .enumerate()
            .map(|(i, p)| Correspondence {
                tag_id: i as u32,
                corner: 0,
                point_ref: *p,
                point_img: cam.project(&truth.transform_point(p)).unwrap(),
            })
            .collect();
        let corrs = CorrespondenceSet::new(entries).unwrap();
        let est = epnp_initialize(&cam, &corrs).unwrap();
        assert!((est.translation() - truth.translation()).norm() < 1e-6);
        assert!(est.rotation_angle_to(&truth) < 1e-7);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let cam = PinholeCamera::<f64>::default();
        let entries = (0..6)
            .map(|i| Correspondence {
                tag_id: i,
                corner: 0,
                point_ref: Vector3::new(i as f64, 0.0, 0.0),
                point_img: Vector2::new(100.0 + i as f64, 100.0),
            })
            .collect();
        let corrs = CorrespondenceSet::new(entries).unwrap();
        assert_eq!(epnp_initialize(&cam, &corrs), Err(PoseError::DegenerateConfiguration));
    }

    #[test]
    fn too_few_points() {
        let cam = PinholeCamera::<f64>::default();
        assert!(matches!(
            epnp_initialize(&cam, &CorrespondenceSet::default()),
            Err(PoseError::TooFewCorrespondences { .. })
        ));
    }
}
