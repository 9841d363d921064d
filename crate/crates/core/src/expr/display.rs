use std::fmt;

use super::node::{Expr, Kind};

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_POW: u8 = 3;
const PREC_ATOM: u8 = 4;

fn precedence(e: &Expr) -> u8 {
    match e.kind() {
        Kind::Add(_) => PREC_ADD,
        Kind::Mul(_) => PREC_MUL,
        Kind::Number(n) if n.is_negative() || !n.is_rational() || n.as_integer().is_none() => PREC_MUL,
        Kind::Pow(..) => PREC_POW,
        _ => PREC_ATOM,
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if precedence(e) < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Writes `|c| * factors` of a product; the caller handles the sign of `c`.
fn write_product(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    let (c, rest) = e.split_coefficient();
    let rest = rest.expect("product has non-numeric factors");
    let factors = match rest.kind() {
        Kind::Mul(fs) => fs.to_vec(),
        _ => vec![rest.clone()],
    };
    let mut first = true;
    if !c.abs().is_one() {
        write!(f, "{}", c.abs())?;
        first = false;
    }
    for factor in &factors {
        if !first {
            f.write_str("*")?;
        }
        first = false;
        write_wrapped(f, factor, PREC_POW)?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            Kind::Symbol(name) => f.write_str(name),
            Kind::Number(n) => write!(f, "{n}"),
            Kind::Add(terms) => {
                for (i, t) in terms.iter().enumerate() {
                    let (c, rest) = t.split_coefficient();
                    match (i, c.is_negative()) {
                        (0, true) => f.write_str("-")?,
                        (0, false) => {}
                        (_, true) => f.write_str(" - ")?,
                        (_, false) => f.write_str(" + ")?,
                    }
                    match rest {
                        None => write!(f, "{}", c.abs())?,
                        Some(_) if matches!(t.kind(), Kind::Mul(_)) => write_product(f, t)?,
                        Some(_) => write_wrapped(f, t, PREC_MUL)?,
                    }
                }
                Ok(())
            }
            Kind::Mul(_) => {
                let (c, _) = self.split_coefficient();
                if c.is_negative() {
                    f.write_str("-")?;
                }
                write_product(f, self)
            }
            Kind::Pow(base, exp) => {
                write_wrapped(f, base, PREC_ATOM)?;
                f.write_str("^")?;
                write_wrapped(f, exp, PREC_ATOM)
            }
            Kind::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
