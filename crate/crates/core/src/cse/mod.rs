//! Common subexpression elimination into flat, branchless kernels.
//!
//! Outputs are lowered into one shared [`OpGraph`]. Every node with cost at
//! least one that is referenced from two or more places becomes a temporary;
//! everything else is inlined into its single user. The same graph is turned
//! into a register-machine program for in-process execution.

mod render;

use std::collections::HashMap;
use std::fmt;

use crate::epsilon::{EpsilonPolicy, EPSILON_SYMBOL};
use crate::error::{Error, Result};
use crate::expr::{add, mul, pow, Expr, FnKind, NodeId, Number, Op, OpGraph};

pub use render::Dialect;

/// Shape of a kernel input or output.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Scalar,
    /// Row-major matrix; a column vector is `rows x 1`.
    Matrix { rows: usize, cols: usize },
    /// Flat storage of a geometry type.
    Element { type_name: String, storage_dim: usize },
}

impl Shape {
    pub fn vector(n: usize) -> Shape {
        Shape::Matrix { rows: n, cols: 1 }
    }

    pub fn size(&self) -> usize {
        match self {
            Shape::Scalar => 1,
            Shape::Matrix { rows, cols } => rows * cols,
            Shape::Element { storage_dim, .. } => *storage_dim,
        }
    }

    /// Name of the storage symbol for slot `i` of an argument called `name`:
    /// `name` for scalars, `name[i]` otherwise.
    pub fn slot_name(&self, name: &str, i: usize) -> String {
        match self {
            Shape::Scalar => name.to_string(),
            _ => format!("{name}[{i}]"),
        }
    }

    pub fn symbols(&self, name: &str) -> Vec<Expr> {
        (0..self.size()).map(|i| Expr::symbol(&self.slot_name(name, i))).collect()
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Scalar => f.write_str("scalar"),
            Shape::Matrix { rows, cols } => write!(f, "{rows}x{cols}"),
            Shape::Element { type_name, .. } => f.write_str(type_name),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelSignature {
    pub name: String,
    pub inputs: Vec<(String, Shape)>,
    pub outputs: Vec<(String, Shape)>,
}

impl KernelSignature {
    pub fn new(name: &str) -> Self {
        KernelSignature {
            name: name.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(mut self, name: &str, shape: Shape) -> Self {
        self.inputs.push((name.to_string(), shape));
        self
    }

    pub fn output(mut self, name: &str, shape: Shape) -> Self {
        self.outputs.push((name.to_string(), shape));
        self
    }

    pub fn input_size(&self) -> usize {
        self.inputs.iter().map(|(_, s)| s.size()).sum()
    }

    pub fn output_size(&self) -> usize {
        self.outputs.iter().map(|(_, s)| s.size()).sum()
    }

    /// Storage symbol name -> flat input slot.
    fn slot_table(&self) -> Result<HashMap<String, u32>> {
        let mut table = HashMap::new();
        let mut seen = std::collections::HashSet::new();
        for (name, shape) in &self.inputs {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateInput(name.clone()));
            }
            for i in 0..shape.size() {
                let slot = table.len() as u32;
                table.insert(shape.slot_name(name, i), slot);
            }
        }
        Ok(table)
    }
}

/// Result of [`eliminate`]: temporaries `_tmp0, _tmp1, ...` in dependency
/// order, and the outputs rewritten over them.
#[derive(Clone, Debug)]
pub struct Elimination {
    pub temps: Vec<Expr>,
    pub outputs: Vec<Expr>,
    pub op_count: usize,
}

pub fn temp_symbol(i: usize) -> Expr {
    Expr::symbol(&format!("_tmp{i}"))
}

/// Runs CSE over `outputs` without a signature; free symbols stay symbols.
pub fn eliminate(outputs: &[Expr]) -> Elimination {
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut resolve = |name: &str| -> Result<Op> {
        let next = index.len() as u32;
        let slot = *index.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            next
        });
        Ok(Op::Input(slot))
    };
    let mut graph = OpGraph::new();
    let roots: Vec<NodeId> = outputs
        .iter()
        .map(|e| graph.lower(e, &mut resolve).expect("infallible resolver"))
        .collect();
    graph.fold_negated_sums(&roots);
    let plan = Plan::new(&graph, &roots);
    let inputs: Vec<Expr> = names.iter().map(|n| Expr::symbol(n)).collect();
    let (temps, outputs) = plan.rebuild_exprs(&graph, &roots, &inputs);
    Elimination {
        temps,
        outputs,
        op_count: plan.op_count,
    }
}

/// Which graph nodes are reachable and which become temporaries.
#[derive(Clone, Debug)]
struct Plan {
    /// Reachable nodes in topological (creation) order.
    order: Vec<NodeId>,
    /// Temp index per node, if the node is a temporary.
    temp_of: HashMap<NodeId, usize>,
    op_count: usize,
}

impl Plan {
    fn new(graph: &OpGraph, roots: &[NodeId]) -> Plan {
        let n = graph.len();
        let mut reachable = vec![false; n];
        let mut stack = roots.to_vec();
        while let Some(id) = stack.pop() {
            if !std::mem::replace(&mut reachable[id as usize], true) {
                stack.extend(graph.op(id).children());
            }
        }
        let mut refs = vec![0usize; n];
        for &r in roots {
            refs[r as usize] += 1;
        }
        let mut op_count = 0;
        for id in (0..n).filter(|&i| reachable[i]) {
            let op = graph.op(id as NodeId);
            op_count += op.cost();
            for c in op.children() {
                refs[c as usize] += 1;
            }
        }
        let order: Vec<NodeId> = (0..n as NodeId).filter(|&i| reachable[i as usize]).collect();
        let mut temp_of = HashMap::new();
        for &id in &order {
            if refs[id as usize] >= 2 && graph.op(id).cost() >= 1 {
                let k = temp_of.len();
                temp_of.insert(id, k);
            }
        }
        Plan {
            order,
            temp_of,
            op_count,
        }
    }

    /// Temporaries and outputs as expressions over `inputs` and `_tmpN`.
    fn rebuild_exprs(&self, graph: &OpGraph, roots: &[NodeId], inputs: &[Expr]) -> (Vec<Expr>, Vec<Expr>) {
        let mut inline: HashMap<NodeId, Expr> = HashMap::new();
        let mut temps = Vec::new();
        for &id in &self.order {
            let e = node_expr(graph.op(id), &inline, inputs);
            match self.temp_of.get(&id) {
                Some(&k) => {
                    temps.push(e);
                    inline.insert(id, temp_symbol(k));
                }
                None => {
                    inline.insert(id, e);
                }
            }
        }
        let outputs = roots.iter().map(|r| inline[r].clone()).collect();
        (temps, outputs)
    }
}

fn node_expr(op: &Op, done: &HashMap<NodeId, Expr>, inputs: &[Expr]) -> Expr {
    let get = |id: &NodeId| done[id].clone();
    match op {
        Op::Input(slot) => inputs[*slot as usize].clone(),
        Op::Const(bits) => Expr::number(Number::from_f64(f64::from_bits(*bits))),
        Op::Add(terms) => add(terms.iter().map(|(id, neg)| if *neg { -get(id) } else { get(id) })),
        Op::Neg(a) => -get(a),
        Op::Mul { num, den } => mul(num.iter().map(get).chain(den.iter().map(|d| get(d).recip()))),
        Op::PowI(a, k) => get(a).powi(i64::from(*k)),
        Op::PowF(a, b) => pow(get(a), get(b)),
        Op::Call(f, args) => Expr::call(*f, args.iter().map(get).collect()).expect("arity preserved"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Instr {
    Load(u32),
    Const(f64),
    /// Terms `pool[start..start + len]`; a set high bit means subtract.
    Sum { start: u32, len: u32 },
    Neg(u32),
    Prod { start: u32, num: u32, den: u32 },
    PowI(u32, i32),
    PowF(u32, u32),
    Call1(FnKind, u32),
    Call2(FnKind, u32, u32),
}

const NEGATE: u32 = 1 << 31;

/// CSE'd kernel: a topologically ordered instruction list over a register
/// array with one register per reachable node.
#[derive(Clone, Debug)]
pub struct InstructionProgram {
    pub signature: KernelSignature,
    /// Temporary `_tmpN` right-hand sides over input symbols and earlier temps.
    pub temps: Vec<Expr>,
    /// Flattened outputs over input symbols and temps.
    pub outputs: Vec<Expr>,
    pub op_count: usize,
    graph: OpGraph,
    temp_of: HashMap<NodeId, usize>,
    roots: Vec<NodeId>,
    code: Vec<Instr>,
    pool: Vec<u32>,
    out_regs: Vec<u32>,
}

/// Register array reused across executions.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    regs: Vec<f64>,
}

/// Compiles flattened `outputs` (concatenated in signature output order)
/// into an executable program.
///
/// A free symbol named `epsilon` that is not a declared input is bound to
/// the default double-precision epsilon. Any other symbol that is not an
/// input storage slot is an error.
pub fn compile(signature: KernelSignature, outputs: &[Expr]) -> Result<InstructionProgram> {
    compile_with_epsilon(signature, outputs, EpsilonPolicy::default())
}

pub fn compile_with_epsilon(
    signature: KernelSignature,
    outputs: &[Expr],
    epsilon: EpsilonPolicy,
) -> Result<InstructionProgram> {
    if signature.output_size() != outputs.len() {
        return Err(Error::DimensionMismatch(format!(
            "kernel `{}` declares {} output value(s), got {} expression(s)",
            signature.name,
            signature.output_size(),
            outputs.len()
        )));
    }
    let slots = signature.slot_table()?;
    let mut resolve = |name: &str| -> Result<Op> {
        match slots.get(name) {
            Some(&s) => Ok(Op::Input(s)),
            None if name == EPSILON_SYMBOL => Ok(Op::Const(epsilon.value.to_bits())),
            None => Err(Error::SignatureMismatch {
                kernel: signature.name.clone(),
                symbol: name.to_string(),
            }),
        }
    };
    let mut graph = OpGraph::new();
    let mut roots = Vec::with_capacity(outputs.len());
    for e in outputs {
        roots.push(graph.lower(e, &mut resolve)?);
    }
    graph.fold_negated_sums(&roots);
    let plan = Plan::new(&graph, &roots);

    let mut slot_exprs = Vec::with_capacity(signature.input_size());
    for (name, shape) in &signature.inputs {
        slot_exprs.extend(shape.symbols(name));
    }
    let (temps, rewritten) = plan.rebuild_exprs(&graph, &roots, &slot_exprs);

    let reg: HashMap<NodeId, u32> = plan.order.iter().enumerate().map(|(r, &id)| (id, r as u32)).collect();
    let mut code = Vec::with_capacity(plan.order.len());
    let mut pool = Vec::new();
    for &id in &plan.order {
        let r = |c: &NodeId| reg[c];
        let instr = match graph.op(id) {
            Op::Input(slot) => Instr::Load(*slot),
            Op::Const(bits) => Instr::Const(f64::from_bits(*bits)),
            Op::Add(terms) => {
                let start = pool.len() as u32;
                pool.extend(terms.iter().map(|(c, neg)| r(c) | if *neg { NEGATE } else { 0 }));
                Instr::Sum {
                    start,
                    len: terms.len() as u32,
                }
            }
            Op::Neg(a) => Instr::Neg(r(a)),
            Op::Mul { num, den } => {
                let start = pool.len() as u32;
                pool.extend(num.iter().map(r));
                pool.extend(den.iter().map(r));
                Instr::Prod {
                    start,
                    num: num.len() as u32,
                    den: den.len() as u32,
                }
            }
            Op::PowI(a, k) => Instr::PowI(r(a), *k),
            Op::PowF(a, b) => Instr::PowF(r(a), r(b)),
            Op::Call(f, args) => match args.len() {
                1 => Instr::Call1(*f, r(&args[0])),
                _ => Instr::Call2(*f, r(&args[0]), r(&args[1])),
            },
        };
        code.push(instr);
    }
    let out_regs = roots.iter().map(|id| reg[id]).collect();
    Ok(InstructionProgram {
        signature,
        temps,
        outputs: rewritten,
        op_count: plan.op_count,
        graph,
        temp_of: plan.temp_of,
        roots,
        code,
        pool,
        out_regs,
    })
}

impl InstructionProgram {
    pub fn num_temps(&self) -> usize {
        self.temps.len()
    }

    pub fn num_instructions(&self) -> usize {
        self.code.len()
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            regs: vec![0.0; self.code.len()],
        }
    }

    /// Executes with one slice per signature input, returning one vector per
    /// signature output.
    pub fn execute(&self, inputs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let sig = &self.signature;
        if inputs.len() != sig.inputs.len() {
            return Err(Error::InputCount {
                expected: sig.inputs.len(),
                actual: inputs.len(),
            });
        }
        let mut flat = Vec::with_capacity(sig.input_size());
        for ((name, shape), values) in sig.inputs.iter().zip(inputs) {
            if values.len() != shape.size() {
                return Err(Error::ShapeMismatch {
                    name: name.clone(),
                    expected: shape.size(),
                    actual: values.len(),
                });
            }
            flat.extend_from_slice(values);
        }
        let mut out = vec![0.0; sig.output_size()];
        self.execute_flat(&flat, &mut self.workspace(), &mut out)?;
        let mut result = Vec::with_capacity(sig.outputs.len());
        let mut offset = 0;
        for (_, shape) in &sig.outputs {
            result.push(out[offset..offset + shape.size()].to_vec());
            offset += shape.size();
        }
        Ok(result)
    }

    /// Allocation-free execution over concatenated inputs and outputs.
    pub fn execute_flat(&self, inputs: &[f64], ws: &mut Workspace, out: &mut [f64]) -> Result<()> {
        let expected = self.signature.input_size();
        if inputs.len() != expected {
            return Err(Error::ShapeMismatch {
                name: "<all inputs>".into(),
                expected,
                actual: inputs.len(),
            });
        }
        if out.len() != self.out_regs.len() {
            return Err(Error::ShapeMismatch {
                name: "<all outputs>".into(),
                expected: self.out_regs.len(),
                actual: out.len(),
            });
        }
        if ws.regs.len() != self.code.len() {
            ws.regs.resize(self.code.len(), 0.0);
        }
        self.run(inputs, &mut ws.regs);
        for (o, &r) in out.iter_mut().zip(&self.out_regs) {
            *o = ws.regs[r as usize];
        }
        Ok(())
    }

    fn run(&self, inputs: &[f64], regs: &mut [f64]) {
        let pool = &self.pool;
        for (i, instr) in self.code.iter().enumerate() {
            let v = match *instr {
                Instr::Load(s) => inputs[s as usize],
                Instr::Const(c) => c,
                Instr::Sum { start, len } => {
                    let terms = &pool[start as usize..(start + len) as usize];
                    let mut acc = 0.0;
                    for (j, &t) in terms.iter().enumerate() {
                        let x = regs[(t & !NEGATE) as usize];
                        let neg = t & NEGATE != 0;
                        acc = match (j, neg) {
                            (0, false) => x,
                            (0, true) => -x,
                            (_, false) => acc + x,
                            (_, true) => acc - x,
                        };
                    }
                    acc
                }
                Instr::Neg(a) => -regs[a as usize],
                Instr::Prod { start, num, den } => {
                    let s = start as usize;
                    let nums = &pool[s..s + num as usize];
                    let dens = &pool[s + num as usize..s + (num + den) as usize];
                    let product = |ids: &[u32]| {
                        let mut it = ids.iter();
                        it.next()
                            .map(|&first| it.fold(regs[first as usize], |acc, &r| acc * regs[r as usize]))
                    };
                    match (product(nums), product(dens)) {
                        (Some(n), Some(d)) => n / d,
                        (Some(n), None) => n,
                        (None, Some(d)) => 1.0 / d,
                        (None, None) => 1.0,
                    }
                }
                Instr::PowI(a, k) => regs[a as usize].powi(k),
                Instr::PowF(a, b) => regs[a as usize].powf(regs[b as usize]),
                Instr::Call1(f, a) => crate::expr::apply_fn(f, regs[a as usize], 0.0),
                Instr::Call2(f, a, b) => crate::expr::apply_fn(f, regs[a as usize], regs[b as usize]),
            };
            regs[i] = v;
        }
    }

    pub fn render_source(&self, dialect: Dialect) -> String {
        render::render(self, dialect)
    }
}
