use rand::Rng;
use rand_distr::StandardNormal;

use super::scalar::{dot3, Scalar, Vec3};

/// Rotation in 3D, stored as a unit quaternion `[x, y, z, w]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rot3<S> {
    q: [S; 4],
}

impl<S: Scalar> Rot3<S> {
    pub const STORAGE_DIM: usize = 4;
    pub const TANGENT_DIM: usize = 3;

    /// Wraps quaternion components without normalizing.
    pub fn from_quaternion(q: [S; 4]) -> Self {
        Rot3 { q }
    }

    pub fn quaternion(&self) -> &[S; 4] {
        &self.q
    }

    pub fn from_storage(s: &[S]) -> Self {
        assert_eq!(s.len(), 4, "Rot3 storage has 4 entries");
        Rot3 {
            q: [s[0].clone(), s[1].clone(), s[2].clone(), s[3].clone()],
        }
    }

    pub fn to_storage(&self) -> Vec<S> {
        self.q.to_vec()
    }

    pub fn identity() -> Self {
        Rot3 {
            q: [S::zero(), S::zero(), S::zero(), S::one()],
        }
    }

    /// Hamilton product `self * other`.
    pub fn compose(&self, other: &Self) -> Self {
        let [x1, y1, z1, w1] = self.q.clone();
        let [x2, y2, z2, w2] = other.q.clone();
        Rot3 {
            q: [
                w1.clone() * x2.clone() + x1.clone() * w2.clone() + y1.clone() * z2.clone() - z1.clone() * y2.clone(),
                w1.clone() * y2.clone() - x1.clone() * z2.clone() + y1.clone() * w2.clone() + z1.clone() * x2.clone(),
                w1.clone() * z2.clone() + x1.clone() * y2.clone() - y1.clone() * x2.clone() + z1.clone() * w2.clone(),
                w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            ],
        }
    }

    pub fn inverse(&self) -> Self {
        let [x, y, z, w] = self.q.clone();
        Rot3 { q: [-x, -y, -z, w] }
    }

    /// `[sin(t/2) * w / t, cos(t/2)]` with `t = sqrt(|w|^2 + epsilon^2)`, which
    /// stays finite at `w = 0`.
    pub fn exp(w: &Vec3<S>) -> Self {
        let theta = (dot3(w, w) + S::epsilon().square()).sqrt();
        let half = theta.clone() / S::from_f64(2.0);
        let k = half.clone().sin() / theta;
        Rot3 {
            q: [
                k.clone() * w[0].clone(),
                k.clone() * w[1].clone(),
                k * w[2].clone(),
                half.cos(),
            ],
        }
    }

    /// Rotation vector of the representative with `w >= 0`, so that the
    /// angle is at most pi.
    pub fn log(&self) -> Vec3<S> {
        let [x, y, z, w] = self.q.clone();
        let s = w.clone().sign_no_zero();
        let n = (x.clone().square() + y.clone().square() + z.clone().square() + S::epsilon().square()).sqrt();
        let k = S::from_f64(2.0) * n.clone().atan2(s.clone() * w) / n * s;
        [k.clone() * x, k.clone() * y, k * z]
    }

    pub fn retract(&self, v: &Vec3<S>) -> Self {
        self.compose(&Rot3::exp(v))
    }

    pub fn local_coordinates(&self, other: &Self) -> Vec3<S> {
        self.inverse().compose(other).log()
    }

    /// Rotation matrix, row-major.
    pub fn to_rotation_matrix(&self) -> [[S; 3]; 3] {
        let [x, y, z, w] = self.q.clone();
        let two = || S::from_f64(2.0);
        let one = || S::one();
        let (xx, yy, zz) = (x.clone().square(), y.clone().square(), z.clone().square());
        let (xy, xz, yz) = (x.clone() * y.clone(), x.clone() * z.clone(), y.clone() * z.clone());
        let (xw, yw, zw) = (x * w.clone(), y * w.clone(), z * w);
        [
            [
                one() - two() * (yy.clone() + zz.clone()),
                two() * (xy.clone() - zw.clone()),
                two() * (xz.clone() + yw.clone()),
            ],
            [
                two() * (xy + zw),
                one() - two() * (xx.clone() + zz),
                two() * (yz.clone() - xw.clone()),
            ],
            [two() * (xz - yw), two() * (yz + xw), one() - two() * (xx + yy)],
        ]
    }

    /// `R * p`, with the matrix entries expanded from the quaternion.
    pub fn rotate(&self, p: &Vec3<S>) -> Vec3<S> {
        let r = self.to_rotation_matrix();
        [dot3(&r[0], p), dot3(&r[1], p), dot3(&r[2], p)]
    }
}

impl Rot3<f64> {
    /// Uniformly distributed random rotation.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        q.iter_mut().for_each(|v| *v /= n);
        Rot3 { q }
    }

    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = dot3(&axis, &axis).sqrt();
        let (s, c) = (angle / 2.0).sin_cos();
        Rot3 {
            q: [s * axis[0] / n, s * axis[1] / n, s * axis[2] / n, c],
        }
    }

    pub fn norm(&self) -> f64 {
        self.q.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}
