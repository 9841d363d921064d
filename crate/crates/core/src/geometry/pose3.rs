use rand::Rng;

use super::rot3::Rot3;
use super::scalar::{add3, neg3, sub3, Scalar, Vec3};

/// Rigid transform stored as `[qx, qy, qz, qw, tx, ty, tz]`.
///
/// The tangent space is `[rotation; translation]` with the decoupled
/// retraction `(R, t) + [w; u] = (R * exp(w), t + u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose3<S> {
    pub rotation: Rot3<S>,
    pub translation: Vec3<S>,
}

impl<S: Scalar> Pose3<S> {
    pub const STORAGE_DIM: usize = 7;
    pub const TANGENT_DIM: usize = 6;

    pub fn new(rotation: Rot3<S>, translation: Vec3<S>) -> Self {
        Pose3 { rotation, translation }
    }

    pub fn from_storage(s: &[S]) -> Self {
        assert_eq!(s.len(), 7, "Pose3 storage has 7 entries");
        Pose3 {
            rotation: Rot3::from_storage(&s[..4]),
            translation: [s[4].clone(), s[5].clone(), s[6].clone()],
        }
    }

    pub fn to_storage(&self) -> Vec<S> {
        let mut s = self.rotation.to_storage();
        s.extend(self.translation.iter().cloned());
        s
    }

    pub fn identity() -> Self {
        Pose3 {
            rotation: Rot3::identity(),
            translation: [S::zero(), S::zero(), S::zero()],
        }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Pose3 {
            rotation: self.rotation.compose(&other.rotation),
            translation: add3(&self.rotation.rotate(&other.translation), &self.translation),
        }
    }

    pub fn inverse(&self) -> Self {
        let r_inv = self.rotation.inverse();
        let t = neg3(&r_inv.rotate(&self.translation));
        Pose3 {
            rotation: r_inv,
            translation: t,
        }
    }

    /// `R * p + t`.
    pub fn transform_point(&self, p: &Vec3<S>) -> Vec3<S> {
        add3(&self.rotation.rotate(p), &self.translation)
    }

    /// `v = [w; u]` maps to `(exp(w), u)`.
    pub fn exp(v: &[S]) -> Self {
        assert_eq!(v.len(), 6, "Pose3 tangent has 6 entries");
        Pose3 {
            rotation: Rot3::exp(&[v[0].clone(), v[1].clone(), v[2].clone()]),
            translation: [v[3].clone(), v[4].clone(), v[5].clone()],
        }
    }

    pub fn log(&self) -> Vec<S> {
        let mut v = self.rotation.log().to_vec();
        v.extend(self.translation.iter().cloned());
        v
    }

    /// Product-manifold retraction: `(R * exp(w), t + u)`. The translation
    /// perturbation is not rotated into the local frame.
    pub fn retract(&self, v: &[S]) -> Self {
        let d = Pose3::exp(v);
        Pose3 {
            rotation: self.rotation.compose(&d.rotation),
            translation: add3(&self.translation, &d.translation),
        }
    }

    /// `[log(Ra^-1 * Rb); tb - ta]`.
    pub fn local_coordinates(&self, other: &Self) -> Vec<S> {
        let mut v = self.rotation.local_coordinates(&other.rotation).to_vec();
        v.extend(sub3(&other.translation, &self.translation));
        v
    }
}

impl Pose3<f64> {
    /// Random rotation and translation with entries uniform in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Self {
        Pose3 {
            rotation: Rot3::random(rng),
            translation: std::array::from_fn(|_| rng.gen_range(-scale..=scale)),
        }
    }
}
