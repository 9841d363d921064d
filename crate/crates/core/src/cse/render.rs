use std::collections::HashMap;
use std::fmt::Write;

use super::{InstructionProgram, Shape};
use crate::expr::{FnKind, NodeId, Op};

/// Emitted source flavor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dialect {
    /// C++-like function templated on the scalar type.
    ReadableC,
    Pseudocode,
}

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_ATOM: u8 = 4;

struct Renderer<'a> {
    p: &'a InstructionProgram,
    dialect: Dialect,
    /// Rendered form of each input slot.
    slots: Vec<String>,
    memo: HashMap<NodeId, (String, u8)>,
}

fn camel_case(name: &str) -> String {
    name.split(['_', '-'])
        .filter(|s| !s.is_empty())
        .map(|s| {
            let mut cs = s.chars();
            let first = cs.next().unwrap().to_ascii_uppercase();
            std::iter::once(first).chain(cs).collect::<String>()
        })
        .collect()
}

fn c_type(shape: &Shape) -> String {
    match shape {
        Shape::Scalar => "Scalar".into(),
        Shape::Matrix { rows, cols } => format!("Eigen::Matrix<Scalar, {rows}, {cols}>"),
        Shape::Element { type_name, .. } => format!("sym::{type_name}<Scalar>"),
    }
}

fn c_index(shape: &Shape, i: usize) -> String {
    match shape {
        Shape::Matrix { cols, .. } => format!("({}, {})", i / cols, i % cols),
        _ => format!("[{i}]"),
    }
}

fn format_constant(v: f64, dialect: Dialect) -> String {
    let text = if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    };
    match dialect {
        Dialect::ReadableC if text.contains(['.', 'e', 'N', 'i']) => format!("Scalar({text})"),
        _ => text,
    }
}

impl<'a> Renderer<'a> {
    fn new(p: &'a InstructionProgram, dialect: Dialect) -> Self {
        let mut slots = Vec::new();
        for (name, shape) in &p.signature.inputs {
            for i in 0..shape.size() {
                slots.push(match (dialect, shape) {
                    (_, Shape::Scalar) => name.clone(),
                    (Dialect::ReadableC, Shape::Element { .. }) => format!("_{name}[{i}]"),
                    (Dialect::ReadableC, _) => format!("{name}{}", c_index(shape, i)),
                    (Dialect::Pseudocode, _) => format!("{name}[{i}]"),
                });
            }
        }
        Renderer {
            p,
            dialect,
            slots,
            memo: HashMap::new(),
        }
    }

    fn temp_name(&self, k: usize) -> String {
        match self.dialect {
            Dialect::ReadableC => format!("_tmp{k}"),
            Dialect::Pseudocode => format!("t{k}"),
        }
    }

    /// Reference to a node from inside another expression.
    fn operand(&mut self, id: NodeId) -> (String, u8) {
        if let Some(&k) = self.p.temp_of.get(&id) {
            return (self.temp_name(k), PREC_ATOM);
        }
        self.inline(id)
    }

    fn wrapped(&mut self, id: NodeId, min_prec: u8) -> String {
        let (s, prec) = self.operand(id);
        if prec < min_prec {
            format!("({s})")
        } else {
            s
        }
    }

    /// Full right-hand side of a node.
    fn inline(&mut self, id: NodeId) -> (String, u8) {
        if let Some(r) = self.memo.get(&id) {
            return r.clone();
        }
        let c = self.dialect == Dialect::ReadableC;
        let out = match self.p.graph.op(id).clone() {
            Op::Input(slot) => (self.slots[slot as usize].clone(), PREC_ATOM),
            Op::Const(bits) => {
                let v = f64::from_bits(bits);
                let prec = if v < 0.0 { PREC_UNARY } else { PREC_ATOM };
                (format_constant(v, self.dialect), prec)
            }
            Op::Add(terms) => {
                let mut s = String::new();
                for (i, (t, neg)) in terms.iter().enumerate() {
                    let sep = match (i, neg) {
                        (0, true) => "-",
                        (0, false) => "",
                        (_, true) => " - ",
                        (_, false) => " + ",
                    };
                    s.push_str(sep);
                    let min = if *neg { PREC_PRODUCT } else { PREC_SUM };
                    s.push_str(&self.wrapped(*t, min));
                }
                (s, PREC_SUM)
            }
            Op::Neg(a) => (format!("-{}", self.wrapped(a, PREC_ATOM)), PREC_UNARY),
            Op::Mul { num, den } => {
                let nums: Vec<String> = num.iter().map(|&n| self.wrapped(n, PREC_PRODUCT)).collect();
                let mut s = if nums.is_empty() {
                    if c {
                        "Scalar(1)".to_string()
                    } else {
                        "1".to_string()
                    }
                } else {
                    nums.join(" * ")
                };
                match den.len() {
                    0 => {}
                    1 => {
                        s.push_str(" / ");
                        s.push_str(&self.wrapped(den[0], PREC_UNARY));
                    }
                    _ => {
                        let dens: Vec<String> = den.iter().map(|&d| self.wrapped(d, PREC_PRODUCT)).collect();
                        write!(s, " / ({})", dens.join(" * ")).unwrap();
                    }
                }
                (s, PREC_PRODUCT)
            }
            Op::PowI(a, k) => {
                if c {
                    let (base, _) = self.operand(a);
                    (format!("std::pow({base}, Scalar({k}))"), PREC_ATOM)
                } else {
                    (format!("{}^{k}", self.wrapped(a, PREC_ATOM)), PREC_UNARY)
                }
            }
            Op::PowF(a, b) => {
                let (base, _) = self.operand(a);
                let (exp, _) = self.operand(b);
                if c {
                    (format!("std::pow({base}, {exp})"), PREC_ATOM)
                } else {
                    (format!("pow({base}, {exp})"), PREC_ATOM)
                }
            }
            Op::Call(f, args) => {
                let args: Vec<String> = args.iter().map(|&a| self.operand(a).0).collect();
                (self.call(f, &args), PREC_ATOM)
            }
        };
        self.memo.insert(id, out.clone());
        out
    }

    fn call(&self, f: FnKind, args: &[String]) -> String {
        if self.dialect == Dialect::Pseudocode {
            return format!("{}({})", f.name(), args.join(", "));
        }
        match f {
            FnKind::Sign => format!("Scalar((Scalar(0) < {a}) - ({a} < Scalar(0)))", a = args[0]),
            FnKind::Min | FnKind::Max => format!("std::{}<Scalar>({}, {})", f.name(), args[0], args[1]),
            _ => format!("std::{}({})", f.name(), args.join(", ")),
        }
    }

    fn render(mut self) -> String {
        let p = self.p;
        let sig = &p.signature;
        let mut temps: Vec<(usize, NodeId)> = p.temp_of.iter().map(|(&id, &k)| (k, id)).collect();
        temps.sort_unstable();
        let mut out = String::new();
        match self.dialect {
            Dialect::ReadableC => {
                let single = sig.outputs.len() == 1;
                let ret = if single { c_type(&sig.outputs[0].1) } else { "void".into() };
                writeln!(out, "template <typename Scalar>").unwrap();
                writeln!(out, "{ret} {}(", camel_case(&sig.name)).unwrap();
                let mut params: Vec<String> = sig
                    .inputs
                    .iter()
                    .map(|(n, s)| match s {
                        Shape::Scalar => format!("const Scalar {n}"),
                        _ => format!("const {}& {n}", c_type(s)),
                    })
                    .collect();
                if !single {
                    params.extend(sig.outputs.iter().map(|(n, s)| format!("{}* const {n}", c_type(s))));
                }
                writeln!(out, "    {}) {{", params.join(",\n    ")).unwrap();
                writeln!(out, "  // Total ops: {}", p.op_count).unwrap();
                let elements: Vec<_> = sig
                    .inputs
                    .iter()
                    .filter_map(|(n, s)| match s {
                        Shape::Element { storage_dim, .. } => Some((n, storage_dim)),
                        _ => None,
                    })
                    .collect();
                if !elements.is_empty() {
                    out.push('\n');
                    for (n, dim) in elements {
                        writeln!(out, "  const Eigen::Matrix<Scalar, {dim}, 1>& _{n} = {n}.Data();").unwrap();
                    }
                }
                if !temps.is_empty() {
                    writeln!(out, "\n  // Common subexpressions ({})", temps.len()).unwrap();
                    for &(k, id) in &temps {
                        let (rhs, _) = self.inline(id);
                        writeln!(out, "  const Scalar _tmp{k} = {rhs};").unwrap();
                    }
                }
                writeln!(out, "\n  // Output terms ({})", sig.outputs.len()).unwrap();
                let mut r = 0;
                for (name, shape) in &sig.outputs {
                    let local = format!("_{name}");
                    match (single, shape) {
                        (true, Shape::Scalar) => {}
                        (true, _) => writeln!(out, "  {} {local};", c_type(shape)).unwrap(),
                        (false, _) => writeln!(out, "  {}& {local} = (*{name});", c_type(shape)).unwrap(),
                    }
                    for i in 0..shape.size() {
                        let (rhs, _) = self.operand(p.roots[r]);
                        r += 1;
                        match shape {
                            Shape::Scalar if single => writeln!(out, "  const Scalar {local} = {rhs};").unwrap(),
                            Shape::Scalar => writeln!(out, "  {local} = {rhs};").unwrap(),
                            _ => writeln!(out, "  {local}{} = {rhs};", c_index(shape, i)).unwrap(),
                        }
                    }
                }
                if single {
                    writeln!(out, "\n  return _{};", sig.outputs[0].0).unwrap();
                }
                out.push_str("}\n");
            }
            Dialect::Pseudocode => {
                let dims = |list: &[(String, Shape)]| -> String {
                    list.iter()
                        .map(|(n, s)| match s {
                            Shape::Scalar => n.clone(),
                            _ => format!("{n}[{}]", s.size()),
                        })
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                writeln!(
                    out,
                    "function {}({}) -> ({})",
                    sig.name,
                    dims(&sig.inputs),
                    dims(&sig.outputs)
                )
                .unwrap();
                writeln!(out, "  # total ops: {}", p.op_count).unwrap();
                for &(k, id) in &temps {
                    let (rhs, _) = self.inline(id);
                    writeln!(out, "  t{k} = {rhs}").unwrap();
                }
                let mut r = 0;
                for (name, shape) in &sig.outputs {
                    for i in 0..shape.size() {
                        let (rhs, _) = self.operand(p.roots[r]);
                        r += 1;
                        match shape {
                            Shape::Scalar => writeln!(out, "  {name} = {rhs}").unwrap(),
                            _ => writeln!(out, "  {name}[{i}] = {rhs}").unwrap(),
                        }
                    }
                }
                out.push_str("end\n");
            }
        }
        out
    }
}

pub(super) fn render(p: &InstructionProgram, dialect: Dialect) -> String {
    Renderer::new(p, dialect).render()
}
