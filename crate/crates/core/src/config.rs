//! JSON configuration with an expression mini-language for coefficients.
//!
//! Coefficient entries are strings over the variables `z`, `zeta`, `eta`,
//! decimal literals and `pi`, the operators `+ - * / ^` (with unary minus)
//! and the functions `sin cos exp sqrt log`. Keeping coefficients as
//! expressions makes configs diff-able and reruns bit-exact.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::model::{
    Coeff1, Coeff2, LeftBc, PlantDescription, PlantModel, TargetSpec, validate_plant,
    DEFAULT_EPS_SEP,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("JSON parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expression error in `{expr}` at position {pos}: {msg}")]
    Parse {
        expr: String,
        pos: usize,
        msg: String,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("expression `{expr}` is not finite on its probe grid (first failure at {at})")]
    ExpressionDomain { expr: String, at: String },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

// ---------------------------------------------------------------------------
// Expression mini-language
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Z,
    Zeta,
    Eta,
}

#[derive(Debug, Clone)]
pub enum Expression {
    Num(f64),
    Var(Var),
    Neg(Box<Expression>),
    Add(Box<Expression>, Box<Expression>),
    Sub(Box<Expression>, Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
    Div(Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, Box<Expression>),
    Call(Func, Box<Expression>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Log,
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
        };
        write!(f, "{name}")
    }
}

/// Evaluation context: values for the three recognized variables.
#[derive(Debug, Clone, Copy, Default)]
pub struct Vars {
    pub z: f64,
    pub zeta: f64,
    pub eta: f64,
}

impl Expression {
    pub fn eval(&self, v: &Vars) -> f64 {
        match self {
            Expression::Num(c) => *c,
            Expression::Var(Var::Z) => v.z,
            Expression::Var(Var::Zeta) => v.zeta,
            Expression::Var(Var::Eta) => v.eta,
            Expression::Neg(e) => -e.eval(v),
            Expression::Add(a, b) => a.eval(v) + b.eval(v),
            Expression::Sub(a, b) => a.eval(v) - b.eval(v),
            Expression::Mul(a, b) => a.eval(v) * b.eval(v),
            Expression::Div(a, b) => a.eval(v) / b.eval(v),
            Expression::Pow(a, b) => a.eval(v).powf(b.eval(v)),
            Expression::Call(f, e) => {
                let x = e.eval(v);
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Sqrt => x.sqrt(),
                    Func::Log => x.ln(),
                }
            }
        }
    }

    /// Which variables the expression references.
    pub fn vars_used(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expression::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Expression::Neg(e) | Expression::Call(_, e) => e.collect_vars(out),
            Expression::Add(a, b)
            | Expression::Sub(a, b)
            | Expression::Mul(a, b)
            | Expression::Div(a, b)
            | Expression::Pow(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expression::Num(_) => {}
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, msg: impl Into<String>) -> ConfigError {
        ConfigError::Parse {
            expr: self.src.to_string(),
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expression, ConfigError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expression::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expression::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ConfigError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expression::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expression::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expression, ConfigError> {
        // unary minus binds looser than `^`: -z^2 is -(z^2)
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expression::Neg(Box::new(self.factor()?)));
        }
        let base = self.primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            // right-associative exponent, which may itself carry a sign
            let exp = self.factor()?;
            return Ok(Expression::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expression, ConfigError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => Err(self.error(format!("unexpected character `{}`", c as char))),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Expression, ConfigError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E')
                && self.pos > start
                && self
                    .bytes
                    .get(self.pos + 1)
                    .map_or(false, |&d| d.is_ascii_digit() || d == b'+' || d == b'-')
            {
                self.pos += 2;
            } else {
                break;
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(Expression::Num)
            .map_err(|e| self.error(format!("bad number: {e}")))
    }

    fn ident(&mut self) -> Result<Expression, ConfigError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        match name {
            "pi" => Ok(Expression::Num(std::f64::consts::PI)),
            "z" => Ok(Expression::Var(Var::Z)),
            "zeta" => Ok(Expression::Var(Var::Zeta)),
            "eta" => Ok(Expression::Var(Var::Eta)),
            "sin" | "cos" | "exp" | "sqrt" | "log" => {
                let f = match name {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "sqrt" => Func::Sqrt,
                    _ => Func::Log,
                };
                if self.peek() != Some(b'(') {
                    return Err(self.error(format!("function `{f}` needs parentheses")));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)` after function argument"));
                }
                self.pos += 1;
                Ok(Expression::Call(f, Box::new(arg)))
            }
            "" => Err(self.error("expected identifier")),
            other => Err(self.error(format!("unknown identifier `{other}`"))),
        }
    }
}

/// Parse one expression string.
pub fn parse_expression(src: &str) -> Result<Expression, ConfigError> {
    let mut p = Parser::new(src);
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

/// Parse, restrict the variable set, and probe-evaluate on a 101-point grid.
fn compile(src: &str, allowed: &[Var], slot: &str) -> Result<Expression, ConfigError> {
    let expr = parse_expression(src)?;
    for v in expr.vars_used() {
        if !allowed.contains(&v) {
            return Err(ConfigError::Parse {
                expr: src.to_string(),
                pos: 0,
                msg: format!("variable {v:?} is not available in {slot}"),
            });
        }
    }
    // probe for domain errors over the unit ranges
    for a in 0..101 {
        let pa = a as f64 / 100.0;
        let probe = if allowed.contains(&Var::Zeta) {
            // triangle probe for two-variable coefficients
            (0..=a).map(|b| (pa, b as f64 / 100.0)).collect::<Vec<_>>()
        } else {
            vec![(pa, 0.0)]
        };
        for (z, zeta) in probe {
            let v = expr.eval(&Vars { z, zeta, eta: z });
            if !v.is_finite() {
                return Err(ConfigError::ExpressionDomain {
                    expr: src.to_string(),
                    at: format!("z={z}, zeta={zeta}"),
                });
            }
        }
    }
    Ok(expr)
}

fn coeff1(src: &str, var: Var, slot: &str) -> Result<Coeff1, ConfigError> {
    let expr = compile(src, &[var], slot)?;
    Ok(Arc::new(move |x| {
        let mut vars = Vars::default();
        match var {
            Var::Z => vars.z = x,
            Var::Zeta => vars.zeta = x,
            Var::Eta => vars.eta = x,
        }
        expr.eval(&vars)
    }))
}

fn coeff2(src: &str, slot: &str) -> Result<Coeff2, ConfigError> {
    let expr = compile(src, &[Var::Z, Var::Zeta], slot)?;
    Ok(Arc::new(move |z, zeta| {
        expr.eval(&Vars { z, zeta, eta: 0.0 })
    }))
}

// ---------------------------------------------------------------------------
// Document schema
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub plant: PlantBlock,
    pub target: TargetBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub sim: SimBlock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantBlock {
    pub n: usize,
    pub m: usize,
    pub lambda: Vec<String>,
    #[serde(default)]
    pub lambda_d1: Option<Vec<String>>,
    #[serde(default)]
    pub lambda_d2: Option<Vec<String>>,
    #[serde(default)]
    pub phi_conv: Option<Vec<String>>,
    #[serde(rename = "A")]
    pub reaction: Vec<Vec<String>>,
    #[serde(rename = "A0")]
    pub local_term: Vec<Vec<String>>,
    #[serde(rename = "F")]
    pub nonlocal_kernel: Vec<Vec<String>>,
    #[serde(rename = "Q0")]
    pub q0: Vec<f64>,
    #[serde(rename = "B1_1")]
    pub b1_1: Vec<f64>,
    #[serde(rename = "B1_0")]
    pub b1_0: Vec<Vec<f64>>,
    #[serde(default)]
    pub eps_sep: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetBlock {
    pub mu_c: f64,
    #[serde(rename = "Bt1_1")]
    pub bt1_1: Vec<f64>,
    #[serde(rename = "Bt1_0")]
    pub bt1_0: Vec<f64>,
    /// Artificial boundary data per "i,j" pair (1-based indices), default 0.
    #[serde(default)]
    pub g_f: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self {
            grid_n: default_grid_n(),
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    #[serde(default = "default_n_z")]
    pub n_z: usize,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub x0: Vec<String>,
}

impl Default for SimBlock {
    fn default() -> Self {
        Self {
            n_z: default_n_z(),
            t_end: default_t_end(),
            dt: default_dt(),
            x0: Vec::new(),
        }
    }
}

fn default_grid_n() -> usize {
    51
}
fn default_tol() -> f64 {
    1e-3
}
fn default_max_iter() -> usize {
    50
}
fn default_n_z() -> usize {
    102
}
fn default_t_end() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    1e-3
}

/// Parse and fully validate a configuration file.
pub fn parse_config(path: &Path) -> Result<ConfigDocument, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let doc: ConfigDocument = serde_json::from_str(&text)?;
    doc.check_dimensions()?;
    // compile everything once so malformed expressions fail at load time
    let _ = doc.build_plant()?;
    let _ = doc.build_target()?;
    let _ = doc.build_x0()?;
    Ok(doc)
}

impl ConfigDocument {
    fn check_dimensions(&self) -> Result<(), ConfigError> {
        let n = self.plant.n;
        let m = self.plant.m;
        let want = |name: &str, got: usize, expect: usize| {
            if got != expect {
                Err(ConfigError::DimensionMismatch(format!(
                    "{name} has {got} entries, expected {expect}"
                )))
            } else {
                Ok(())
            }
        };
        if n == 0 || m > n {
            return Err(ConfigError::DimensionMismatch(format!(
                "need 1 <= m <= n, got n={n}, m={m}"
            )));
        }
        want("lambda", self.plant.lambda.len(), n)?;
        if let Some(d) = &self.plant.lambda_d1 {
            want("lambda_d1", d.len(), n)?;
        }
        if let Some(d) = &self.plant.lambda_d2 {
            want("lambda_d2", d.len(), n)?;
        }
        if let Some(p) = &self.plant.phi_conv {
            want("phi_conv", p.len(), n)?;
        }
        want("A rows", self.plant.reaction.len(), n)?;
        want("A0 rows", self.plant.local_term.len(), n)?;
        want("F rows", self.plant.nonlocal_kernel.len(), n)?;
        for (name, rows) in [
            ("A", &self.plant.reaction),
            ("A0", &self.plant.local_term),
            ("F", &self.plant.nonlocal_kernel),
        ] {
            for row in rows.iter() {
                want(&format!("{name} columns"), row.len(), n)?;
            }
        }
        want("Q0", self.plant.q0.len(), n - m)?;
        want("B1_1", self.plant.b1_1.len(), n)?;
        want("B1_0 rows", self.plant.b1_0.len(), n)?;
        for row in &self.plant.b1_0 {
            want("B1_0 columns", row.len(), n)?;
        }
        want("Bt1_1", self.target.bt1_1.len(), n)?;
        want("Bt1_0", self.target.bt1_0.len(), n)?;
        if !self.sim.x0.is_empty() {
            want("x0", self.sim.x0.len(), n)?;
        }
        Ok(())
    }

    /// Compile the plant block into a validated model.
    pub fn build_plant(&self) -> Result<PlantModel, ConfigError> {
        let n = self.plant.n;
        let m = self.plant.m;
        let lambda: Vec<Coeff1> = self
            .plant
            .lambda
            .iter()
            .map(|s| coeff1(s, Var::Z, "lambda"))
            .collect::<Result<_, _>>()?;
        let opt1 = |src: &Option<Vec<String>>, slot: &str| -> Result<Option<Vec<Coeff1>>, ConfigError> {
            src.as_ref()
                .map(|v| v.iter().map(|s| coeff1(s, Var::Z, slot)).collect())
                .transpose()
        };
        let lambda_d1 = opt1(&self.plant.lambda_d1, "lambda_d1")?;
        let lambda_d2 = opt1(&self.plant.lambda_d2, "lambda_d2")?;
        let phi_conv = match &self.plant.phi_conv {
            Some(v) => v
                .iter()
                .map(|s| coeff1(s, Var::Z, "phi_conv"))
                .collect::<Result<_, _>>()?,
            None => (0..n).map(|_| crate::model::constant(0.0)).collect(),
        };
        let matrix1 = |rows: &Vec<Vec<String>>, slot: &str| -> Result<Vec<Vec<Coeff1>>, ConfigError> {
            rows.iter()
                .map(|row| row.iter().map(|s| coeff1(s, Var::Z, slot)).collect())
                .collect()
        };
        let reaction = matrix1(&self.plant.reaction, "A")?;
        let local_term = matrix1(&self.plant.local_term, "A0")?;
        let nonlocal_kernel: Vec<Vec<Coeff2>> = self
            .plant
            .nonlocal_kernel
            .iter()
            .map(|row| row.iter().map(|s| coeff2(s, "F")).collect())
            .collect::<Result<_, _>>()?;
        let left_bc: Vec<LeftBc> = (0..n)
            .map(|i| {
                if i < m {
                    LeftBc::Dirichlet
                } else {
                    LeftBc::Robin {
                        q: self.plant.q0[i - m],
                    }
                }
            })
            .collect();
        let desc = PlantDescription {
            n,
            lambda,
            lambda_d1,
            lambda_d2,
            phi_conv,
            reaction,
            local_term,
            nonlocal_kernel,
            left_bc,
            actuation_slope: self.plant.b1_1.clone(),
            actuation_value: self.plant.b1_0.clone(),
        };
        Ok(validate_plant(
            desc,
            self.plant.eps_sep.unwrap_or(DEFAULT_EPS_SEP),
        )?)
    }

    pub fn build_target(&self) -> Result<TargetSpec, ConfigError> {
        let mut t = TargetSpec::new(
            self.target.mu_c,
            self.target.bt1_1.clone(),
            self.target.bt1_0.clone(),
        );
        for (key, src) in &self.target.g_f {
            let parts: Vec<_> = key.split(',').map(str::trim).collect();
            let pair: Option<(usize, usize)> = match parts.as_slice() {
                [a, b] => a
                    .parse::<usize>()
                    .ok()
                    .zip(b.parse::<usize>().ok())
                    .filter(|(i, j)| {
                        (1..=self.plant.n).contains(i) && (1..=self.plant.n).contains(j)
                    })
                    .map(|(i, j)| (i - 1, j - 1)),
                _ => None,
            };
            let (i, j) = pair.ok_or_else(|| {
                ConfigError::DimensionMismatch(format!(
                    "g_f key `{key}` is not an `i,j` pair in 1..={}",
                    self.plant.n
                ))
            })?;
            t.g_f.insert((i, j), coeff1(src, Var::Eta, "g_f")?);
        }
        Ok(t)
    }

    /// Initial profile closures (empty when the config does not set x0).
    pub fn build_x0(&self) -> Result<Vec<Coeff1>, ConfigError> {
        self.sim
            .x0
            .iter()
            .map(|s| coeff1(s, Var::Z, "x0"))
            .collect()
    }
}
