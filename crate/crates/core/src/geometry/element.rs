//! Type-erased geometry values and the Storage / Group / LieGroup operations
//! available for each type.
//!
//! | type          | storage | group | Lie group |
//! |---------------|---------|-------|-----------|
//! | `Scalar`      | 1       | `+`   | tangent 1 |
//! | `Vector(n)`   | n       | `+`   | tangent n |
//! | `Matrix(r,c)` | r*c     | no    | no        |
//! | `Rot3`        | 4       | yes   | tangent 3 |
//! | `Pose3`       | 7       | yes   | tangent 6 |

use std::fmt;

use super::pose3::Pose3;
use super::rot3::Rot3;
use super::scalar::Scalar;
use crate::cse::Shape;
use crate::error::{Error, Result};
use crate::expr::Expr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementType {
    Scalar,
    Vector(usize),
    /// Storage-only matrix.
    Matrix(usize, usize),
    Rot3,
    Pose3,
}

impl ElementType {
    pub fn storage_dim(self) -> usize {
        match self {
            ElementType::Scalar => 1,
            ElementType::Vector(n) => n,
            ElementType::Matrix(r, c) => r * c,
            ElementType::Rot3 => 4,
            ElementType::Pose3 => 7,
        }
    }

    pub fn is_group(self) -> bool {
        !matches!(self, ElementType::Matrix(..))
    }

    pub fn is_lie_group(self) -> bool {
        self.is_group()
    }

    pub fn tangent_dim(self) -> Result<usize> {
        match self {
            ElementType::Scalar => Ok(1),
            ElementType::Vector(n) => Ok(n),
            ElementType::Rot3 => Ok(3),
            ElementType::Pose3 => Ok(6),
            ElementType::Matrix(..) => Err(Error::NotLieGroup(self.to_string())),
        }
    }

    pub fn shape(self) -> Shape {
        match self {
            ElementType::Scalar => Shape::Scalar,
            ElementType::Vector(n) => Shape::vector(n),
            ElementType::Matrix(rows, cols) => Shape::Matrix { rows, cols },
            ElementType::Rot3 => Shape::Element {
                type_name: "Rot3".into(),
                storage_dim: 4,
            },
            ElementType::Pose3 => Shape::Element {
                type_name: "Pose3".into(),
                storage_dim: 7,
            },
        }
    }
}

impl fmt::Display for ElementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementType::Scalar => f.write_str("Scalar"),
            ElementType::Vector(n) => write!(f, "Vector{n}"),
            ElementType::Matrix(r, c) => write!(f, "Matrix{r}x{c}"),
            ElementType::Rot3 => f.write_str("Rot3"),
            ElementType::Pose3 => f.write_str("Pose3"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Element<S> {
    Scalar(S),
    Vector(Vec<S>),
    Matrix { rows: usize, cols: usize, data: Vec<S> },
    Rot3(Rot3<S>),
    Pose3(Pose3<S>),
}

fn check_len(what: &str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what}: expected {expected} value(s), got {actual}"
        )))
    }
}

impl<S: Scalar> Element<S> {
    pub fn element_type(&self) -> ElementType {
        match self {
            Element::Scalar(_) => ElementType::Scalar,
            Element::Vector(v) => ElementType::Vector(v.len()),
            Element::Matrix { rows, cols, .. } => ElementType::Matrix(*rows, *cols),
            Element::Rot3(_) => ElementType::Rot3,
            Element::Pose3(_) => ElementType::Pose3,
        }
    }

    pub fn to_storage(&self) -> Vec<S> {
        match self {
            Element::Scalar(s) => vec![s.clone()],
            Element::Vector(v) => v.clone(),
            Element::Matrix { data, .. } => data.clone(),
            Element::Rot3(r) => r.to_storage(),
            Element::Pose3(p) => p.to_storage(),
        }
    }

    pub fn from_storage(ty: ElementType, s: &[S]) -> Result<Self> {
        check_len(&format!("{ty} storage"), ty.storage_dim(), s.len())?;
        Ok(match ty {
            ElementType::Scalar => Element::Scalar(s[0].clone()),
            ElementType::Vector(_) => Element::Vector(s.to_vec()),
            ElementType::Matrix(rows, cols) => Element::Matrix {
                rows,
                cols,
                data: s.to_vec(),
            },
            ElementType::Rot3 => Element::Rot3(Rot3::from_storage(s)),
            ElementType::Pose3 => Element::Pose3(Pose3::from_storage(s)),
        })
    }

    pub fn identity(ty: ElementType) -> Result<Self> {
        Ok(match ty {
            ElementType::Scalar => Element::Scalar(S::zero()),
            ElementType::Vector(n) => Element::Vector(vec![S::zero(); n]),
            ElementType::Rot3 => Element::Rot3(Rot3::identity()),
            ElementType::Pose3 => Element::Pose3(Pose3::identity()),
            ElementType::Matrix(..) => return Err(Error::NotLieGroup(ty.to_string())),
        })
    }

    fn same_type(&self, other: &Self) -> Result<()> {
        if self.element_type() == other.element_type() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "cannot combine {} with {}",
                self.element_type(),
                other.element_type()
            )))
        }
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.same_type(other)?;
        Ok(match (self, other) {
            (Element::Scalar(a), Element::Scalar(b)) => Element::Scalar(a.clone() + b.clone()),
            (Element::Vector(a), Element::Vector(b)) => {
                Element::Vector(a.iter().zip(b).map(|(x, y)| x.clone() + y.clone()).collect())
            }
            (Element::Rot3(a), Element::Rot3(b)) => Element::Rot3(a.compose(b)),
            (Element::Pose3(a), Element::Pose3(b)) => Element::Pose3(a.compose(b)),
            _ => return Err(Error::NotLieGroup(self.element_type().to_string())),
        })
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(match self {
            Element::Scalar(a) => Element::Scalar(-a.clone()),
            Element::Vector(a) => Element::Vector(a.iter().map(|x| -x.clone()).collect()),
            Element::Rot3(r) => Element::Rot3(r.inverse()),
            Element::Pose3(p) => Element::Pose3(p.inverse()),
            Element::Matrix { .. } => return Err(Error::NotLieGroup(self.element_type().to_string())),
        })
    }

    pub fn exp(ty: ElementType, v: &[S]) -> Result<Self> {
        check_len(&format!("{ty} tangent"), ty.tangent_dim()?, v.len())?;
        Ok(match ty {
            ElementType::Scalar => Element::Scalar(v[0].clone()),
            ElementType::Vector(_) => Element::Vector(v.to_vec()),
            ElementType::Rot3 => Element::Rot3(Rot3::exp(&[v[0].clone(), v[1].clone(), v[2].clone()])),
            ElementType::Pose3 => Element::Pose3(Pose3::exp(v)),
            ElementType::Matrix(..) => unreachable!("tangent_dim rejects matrices"),
        })
    }

    pub fn log(&self) -> Result<Vec<S>> {
        Ok(match self {
            Element::Scalar(a) => vec![a.clone()],
            Element::Vector(a) => a.clone(),
            Element::Rot3(r) => r.log().to_vec(),
            Element::Pose3(p) => p.log(),
            Element::Matrix { .. } => return Err(Error::NotLieGroup(self.element_type().to_string())),
        })
    }

    /// `compose(self, exp(v))`; for `Pose3` the rotation and translation
    /// parts are perturbed independently.
    pub fn retract(&self, v: &[S]) -> Result<Self> {
        let ty = self.element_type();
        check_len(&format!("{ty} tangent"), ty.tangent_dim()?, v.len())?;
        Ok(match self {
            Element::Rot3(r) => Element::Rot3(r.retract(&[v[0].clone(), v[1].clone(), v[2].clone()])),
            Element::Pose3(p) => Element::Pose3(p.retract(v)),
            _ => self.compose(&Element::exp(ty, v)?)?,
        })
    }

    /// Inverse of [`Element::retract`].
    pub fn local_coordinates(&self, other: &Self) -> Result<Vec<S>> {
        self.same_type(other)?;
        Ok(match (self, other) {
            (Element::Rot3(a), Element::Rot3(b)) => a.local_coordinates(b).to_vec(),
            (Element::Pose3(a), Element::Pose3(b)) => a.local_coordinates(b),
            _ => self.inverse()?.compose(other)?.log()?,
        })
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Element<T> {
        let ty = self.element_type();
        let storage: Vec<T> = self.to_storage().iter().map(f).collect();
        Element::from_storage(ty, &storage).expect("storage length preserved")
    }
}

impl Element<Expr> {
    /// Element whose storage entries are the symbols `name[i]` (or `name`
    /// for scalars).
    pub fn symbolic(ty: ElementType, name: &str) -> Self {
        let syms = ty.shape().symbols(name);
        Element::from_storage(ty, &syms).expect("symbol count matches storage")
    }

    pub fn constant(value: &Element<f64>) -> Self {
        value.map(|v| Expr::from_f64(*v))
    }
}
