//! Verilog emission for the adder built around a prefix circuit, and a small
//! simulator for exactly the subset of Verilog the emitter produces.
//!
//! The emitted module has three stages: bitwise propagate/generate per input
//! node, one `prefix_cell` instance per prefix node, and the sum XOR stage.
//! Nets are named `g_<lo>_<hi>__<id>` / `p_<lo>_<hi>__<id>`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::circuit::{format_ranges, CircuitError, NodeKind, PrefixCircuit};

fn g_net(c: &PrefixCircuit, id: usize) -> String {
    let r = c.nodes()[id].range;
    format!("g_{}_{}__{}", r.lo, r.hi, id)
}

fn p_net(c: &PrefixCircuit, id: usize) -> String {
    let r = c.nodes()[id].range;
    format!("p_{}_{}__{}", r.lo, r.hi, id)
}

/// Name of the two-input prefix cell module emitted alongside `module_name`.
pub fn cell_module_name(module_name: &str) -> String {
    format!("{module_name}_prefix_cell")
}

/// Emits a synthesizable adder `module_name(a, b) -> (sum, cout)`.
pub fn emit_verilog(c: &PrefixCircuit, module_name: &str) -> Result<String, CircuitError> {
    let outputs = c
        .output_nodes()
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| CircuitError::NotValid(format_ranges(&c.missing_output_ranges())))?;
    let n = c.width();
    let m = c.metrics();
    let cell = cell_module_name(module_name);
    let mut v = String::new();
    let w = &mut v;
    let _ = writeln!(w, "// {n}-bit parallel prefix adder: {} prefix cells, {} logic levels", c.prefix_count(), m.delay);
    let _ = writeln!(w, "module {cell} (");
    let _ = writeln!(w, "  input  wire g_hi,");
    let _ = writeln!(w, "  input  wire p_hi,");
    let _ = writeln!(w, "  input  wire g_lo,");
    let _ = writeln!(w, "  input  wire p_lo,");
    let _ = writeln!(w, "  output wire g,");
    let _ = writeln!(w, "  output wire p");
    let _ = writeln!(w, ");");
    let _ = writeln!(w, "  assign g = g_hi | (p_hi & g_lo);");
    let _ = writeln!(w, "  assign p = p_hi & p_lo;");
    let _ = writeln!(w, "endmodule");
    let _ = writeln!(w);
    let _ = writeln!(w, "module {module_name} (");
    let _ = writeln!(w, "  input  wire [{}:0] a,", n - 1);
    let _ = writeln!(w, "  input  wire [{}:0] b,", n - 1);
    let _ = writeln!(w, "  output wire [{}:0] sum,", n - 1);
    let _ = writeln!(w, "  output wire cout");
    let _ = writeln!(w, ");");
    let _ = writeln!(w, "  // stage 1: bit propagate/generate");
    for node in c.nodes().iter().filter(|n| n.is_input()) {
        let (p, g, i) = (p_net(c, node.id), g_net(c, node.id), node.id);
        let _ = writeln!(w, "  wire {p}, {g};");
        let _ = writeln!(w, "  assign {p} = a[{i}] ^ b[{i}];");
        let _ = writeln!(w, "  assign {g} = a[{i}] & b[{i}];");
    }
    let _ = writeln!(w, "  // stage 2: prefix network");
    for node in c.nodes() {
        if let NodeKind::Prefix { left, right } = node.kind {
            let (p, g) = (p_net(c, node.id), g_net(c, node.id));
            let _ = writeln!(w, "  wire {p}, {g};");
            let _ = writeln!(
                w,
                "  {cell} u_node{} (.g_hi({}), .p_hi({}), .g_lo({}), .p_lo({}), .g({g}), .p({p}));",
                node.id,
                g_net(c, right),
                p_net(c, right),
                g_net(c, left),
                p_net(c, left),
            );
        }
    }
    let _ = writeln!(w, "  // stage 3: sum");
    let _ = writeln!(w, "  assign sum[0] = {};", p_net(c, 0));
    for i in 1..n {
        let _ = writeln!(w, "  assign sum[{i}] = {} ^ {};", p_net(c, i), g_net(c, outputs[i - 1]));
    }
    let _ = writeln!(w, "  assign cout = {};", g_net(c, outputs[n - 1]));
    let _ = writeln!(w, "endmodule");
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct SimError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
enum Expr {
    Net(usize),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Xor(Box<Expr>, Box<Expr>),
}

impl Expr {
    fn eval(&self, nets: &[bool]) -> bool {
        match self {
            Expr::Net(i) => nets[*i],
            Expr::Not(e) => !e.eval(nets),
            Expr::And(a, b) => a.eval(nets) & b.eval(nets),
            Expr::Or(a, b) => a.eval(nets) | b.eval(nets),
            Expr::Xor(a, b) => a.eval(nets) ^ b.eval(nets),
        }
    }
}

#[derive(Debug, Clone)]
enum Stmt {
    Assign(usize, Expr),
    Instance { module: String, ports: Vec<(String, usize)> },
    /// An instance after linking: nets feeding the callee's inputs and nets
    /// receiving its outputs, both in the callee's port order.
    Call { module: String, args: Vec<usize>, rets: Vec<Option<usize>> },
}

#[derive(Debug, Clone, Default)]
struct Module {
    nets: HashMap<String, usize>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    body: Vec<Stmt>,
}

impl Module {
    fn net(&mut self, name: &str) -> usize {
        let next = self.nets.len();
        *self.nets.entry(name.to_string()).or_insert(next)
    }
}

struct ExprParser<'a> {
    toks: Vec<&'a str>,
    pos: usize,
}

fn tokenize(s: &str) -> Vec<&str> {
    let mut toks = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        if ch.is_whitespace() {
            i += 1;
        } else if "&|^~()".contains(ch) {
            toks.push(&s[i..i + 1]);
            i += 1;
        } else {
            let start = i;
            while i < bytes.len() && !(bytes[i] as char).is_whitespace() && !"&|^~()".contains(bytes[i] as char) {
                i += 1;
            }
            toks.push(&s[start..i]);
        }
    }
    toks
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<&'a str> {
        let t = self.peek();
        self.pos += 1;
        t
    }

    // Verilog precedence: ~ > & > ^ > |
    fn or(&mut self, m: &mut Module) -> Result<Expr, String> {
        let mut e = self.xor(m)?;
        while self.peek() == Some("|") {
            self.bump();
            e = Expr::Or(Box::new(e), Box::new(self.xor(m)?));
        }
        Ok(e)
    }

    fn xor(&mut self, m: &mut Module) -> Result<Expr, String> {
        let mut e = self.and(m)?;
        while self.peek() == Some("^") {
            self.bump();
            e = Expr::Xor(Box::new(e), Box::new(self.and(m)?));
        }
        Ok(e)
    }

    fn and(&mut self, m: &mut Module) -> Result<Expr, String> {
        let mut e = self.unary(m)?;
        while self.peek() == Some("&") {
            self.bump();
            e = Expr::And(Box::new(e), Box::new(self.unary(m)?));
        }
        Ok(e)
    }

    fn unary(&mut self, m: &mut Module) -> Result<Expr, String> {
        match self.bump() {
            Some("~") => Ok(Expr::Not(Box::new(self.unary(m)?))),
            Some("(") => {
                let e = self.or(m)?;
                match self.bump() {
                    Some(")") => Ok(e),
                    other => Err(format!("expected ')', found {other:?}")),
                }
            }
            Some(name) if name.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_') => {
                Ok(Expr::Net(m.net(name)))
            }
            other => Err(format!("unexpected token {other:?}")),
        }
    }
}

/// A parsed design, ready to simulate.
#[derive(Debug, Clone)]
pub struct Netlist {
    modules: HashMap<String, Module>,
    top: String,
    width: usize,
}

fn bit_name(bus: &str, i: usize) -> String {
    format!("{bus}[{i}]")
}

fn parse_bit(name: &str) -> Option<(&str, usize)> {
    let (bus, rest) = name.split_once('[')?;
    Some((bus, rest.strip_suffix(']')?.parse().ok()?))
}

/// Resolves named port bindings against the instantiated modules.
fn link(modules: &mut HashMap<String, Module>) -> Result<(), SimError> {
    let ports: HashMap<String, (Vec<String>, Vec<String>)> = modules
        .iter()
        .map(|(name, m)| (name.clone(), (m.inputs.clone(), m.outputs.clone())))
        .collect();
    for (name, m) in modules.iter_mut() {
        for stmt in &mut m.body {
            let Stmt::Instance { module, ports: bound } = stmt else {
                continue;
            };
            let (ins, outs) = ports.get(module).ok_or_else(|| SimError {
                line: 0,
                message: format!("{name} instantiates unknown module {module}"),
            })?;
            let find = |p: &String| bound.iter().find(|(q, _)| q == p).map(|b| b.1);
            let args = ins
                .iter()
                .map(|p| {
                    find(p).ok_or_else(|| SimError {
                        line: 0,
                        message: format!("{name}: input {p} of {module} is unconnected"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let rets = outs.iter().map(find).collect();
            *stmt = Stmt::Call {
                module: module.clone(),
                args,
                rets,
            };
        }
    }
    Ok(())
}

impl Netlist {
    /// Parses the Verilog subset produced by [`emit_verilog`]: scalar and
    /// vector ports, `wire` declarations, continuous assigns over `& | ^ ~`
    /// and named-port instances.
    pub fn parse(text: &str, top: &str) -> Result<Self, SimError> {
        let mut modules = HashMap::new();
        let mut current: Option<(String, Module)> = None;
        let mut width = 0;
        let err = |line: usize, message: String| SimError { line, message };

        for (i, raw) in text.lines().enumerate() {
            let no = i + 1;
            let line = raw.split("//").next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("module ") {
                let name = rest.trim_end_matches('(').trim().to_string();
                current = Some((name, Module::default()));
                continue;
            }
            if line == "endmodule" {
                let (name, m) = current.take().ok_or_else(|| err(no, "endmodule outside module".into()))?;
                modules.insert(name, m);
                continue;
            }
            let Some((name, m)) = current.as_mut() else {
                return Err(err(no, format!("statement outside module: {line}")));
            };
            let decl = line.trim_end_matches([',', ';']);
            if let Some(rest) = decl.strip_prefix("input").or_else(|| decl.strip_prefix("output")) {
                let is_input = decl.starts_with("input");
                let rest = rest.trim().trim_start_matches("wire").trim();
                let bits = if let Some(r) = rest.strip_prefix('[') {
                    let (range, port) = r.split_once(']').ok_or_else(|| err(no, "bad range".into()))?;
                    let hi: usize = range
                        .split(':')
                        .next()
                        .and_then(|h| h.trim().parse().ok())
                        .ok_or_else(|| err(no, "bad range".into()))?;
                    if name == top {
                        width = hi + 1;
                    }
                    (0..=hi).map(|b| bit_name(port.trim(), b)).collect::<Vec<_>>()
                } else {
                    vec![rest.to_string()]
                };
                for b in bits {
                    m.net(&b);
                    if is_input {
                        m.inputs.push(b);
                    } else {
                        m.outputs.push(b);
                    }
                }
                continue;
            }
            if line == ");" || line.starts_with("wire ") {
                continue;
            }
            if let Some(rest) = line.strip_prefix("assign ") {
                let rest = rest.trim_end_matches(';');
                let (lhs, rhs) = rest.split_once('=').ok_or_else(|| err(no, "assign without '='".into()))?;
                let target = m.net(lhs.trim());
                let mut p = ExprParser {
                    toks: tokenize(rhs),
                    pos: 0,
                };
                let e = p.or(m).map_err(|e| err(no, e))?;
                if p.pos != p.toks.len() {
                    return Err(err(no, "trailing tokens in expression".into()));
                }
                m.body.push(Stmt::Assign(target, e));
                continue;
            }
            // <module> <instance> (.port(net), ...);
            let (head, ports) = line.split_once('(').ok_or_else(|| err(no, format!("unrecognized statement: {line}")))?;
            let module = head.split_whitespace().next().unwrap_or("").to_string();
            let mut bound = Vec::new();
            for part in ports.trim_end_matches(';').trim_end_matches(')').split(',') {
                let part = part.trim().trim_start_matches('.');
                let (port, net) = part
                    .split_once('(')
                    .ok_or_else(|| err(no, format!("bad port binding {part}")))?;
                let net = net.trim_end_matches(')').trim();
                bound.push((port.trim().to_string(), m.net(net)));
            }
            m.body.push(Stmt::Instance { module, ports: bound });
        }
        if !modules.contains_key(top) {
            return Err(err(0, format!("module {top} not found")));
        }
        link(&mut modules)?;
        Ok(Netlist {
            modules,
            top: top.to_string(),
            width,
        })
    }

    fn run(&self, name: &str, inputs: &[bool]) -> Vec<bool> {
        let m = &self.modules[name];
        let mut nets = vec![false; m.nets.len()];
        for (port, &v) in m.inputs.iter().zip(inputs) {
            nets[m.nets[port]] = v;
        }
        for stmt in &m.body {
            match stmt {
                Stmt::Assign(target, e) => nets[*target] = e.eval(&nets),
                Stmt::Call { module, args, rets } => {
                    let args: Vec<bool> = args.iter().map(|&n| nets[n]).collect();
                    for (ret, v) in rets.iter().zip(self.run(module, &args)) {
                        if let Some(n) = ret {
                            nets[*n] = v;
                        }
                    }
                }
                Stmt::Instance { .. } => unreachable!("linked at parse time"),
            }
        }
        m.outputs.iter().map(|o| nets[m.nets[o]]).collect()
    }

    /// Drives `a` and `b` into the top module and reads back `(sum, cout)`.
    pub fn add(&self, a: u128, b: u128) -> (u128, bool) {
        let m = &self.modules[&self.top];
        let inputs: Vec<bool> = m
            .inputs
            .iter()
            .map(|port| match parse_bit(port) {
                Some(("a", i)) => (a >> i) & 1 == 1,
                Some(("b", i)) => (b >> i) & 1 == 1,
                _ => false,
            })
            .collect();
        let mut sum = 0u128;
        let mut cout = false;
        for (port, v) in m.outputs.iter().zip(self.run(&self.top, &inputs)) {
            match parse_bit(port) {
                Some(("sum", i)) if v => sum |= 1 << i,
                None if port == "cout" => cout = v,
                _ => {}
            }
        }
        (sum, cout)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of instance statements in the top module.
    pub fn instance_count(&self) -> usize {
        self.modules[&self.top]
            .body
            .iter()
            .filter(|s| matches!(s, Stmt::Call { .. }))
            .count()
    }
}
