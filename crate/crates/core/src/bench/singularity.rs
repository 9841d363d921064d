use crate::epsilon::{epsilon_symbol, epsilonize};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::Rot3;

pub const SINGULARITY_NAMES: &[&str] = &["sinc", "inv_x", "rot3_exp", "rot3_log", "sinc_bad_derivative"];

/// A guarded scalar function of `x` and `epsilon` with its singular point.
#[derive(Clone, Debug)]
pub struct SingularityCase {
    pub name: &'static str,
    pub f_safe: Expr,
    pub x: Expr,
    pub eps: Expr,
    pub x0: f64,
}

fn sinc_safe(x: &Expr, eps: &Expr) -> Expr {
    epsilonize(&(x.sin() / x), x, eps, 0.0)
}

pub fn singularity_case(name: &str) -> Result<SingularityCase> {
    let x = Expr::symbol("x");
    let eps = epsilon_symbol();
    let (name, f_safe) = match name {
        "sinc" => ("sinc", sinc_safe(&x, &eps)),
        "inv_x" => ("inv_x", epsilonize(&x.recip(), &x, &eps, 0.0)),
        // First quaternion component of exp([x, 0, 0]).
        "rot3_exp" => {
            let r = Rot3::exp(&[x.clone(), Expr::zero(), Expr::zero()]);
            ("rot3_exp", r.quaternion()[0].clone())
        }
        // First tangent component of log of a rotation by x about the first axis.
        "rot3_log" => {
            let half = &x / 2.0;
            let r = Rot3::from_quaternion([half.sin(), Expr::zero(), Expr::zero(), half.cos()]);
            ("rot3_log", r.log()[0].clone())
        }
        // Right value at 0 but a spurious unit slope there.
        "sinc_bad_derivative" => {
            let bump = &eps * &x / (&eps + x.powi(2));
            ("sinc_bad_derivative", sinc_safe(&x, &eps) + bump)
        }
        other => {
            return Err(Error::UnknownFunction {
                name: other.to_string(),
                valid: SINGULARITY_NAMES.join(", "),
            })
        }
    };
    Ok(SingularityCase {
        name,
        f_safe,
        x,
        eps,
        x0: 0.0,
    })
}
