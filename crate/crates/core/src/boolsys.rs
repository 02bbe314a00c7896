//! Systems of Boolean NAND equations.
//!
//! A [`BooleanSystem`] is a list of named variables and equations of the form
//! `c = NAND(a, b)`. Variables are shared between equations by name. The
//! exhaustive [`enumerate_solutions`] sweep is the ground truth the constraint
//! machine is checked against.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

/// Default cap on the number of variables the exhaustive sweep accepts.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoolSysError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("problem file contains no equations")]
    Empty,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("assignment is missing variable `{0}`")]
    MissingVariable(String),
    #[error("system has {found} variables, enumeration cap is {cap}")]
    CapExceeded { found: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, BoolSysError>;

/// Position of a variable in its owning system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// `out = NAND(a, b)`. `a` and `b` may name the same variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NandEquation {
    pub a: VarId,
    pub b: VarId,
    pub out: VarId,
}

impl NandEquation {
    pub fn variables(&self) -> [VarId; 3] {
        [self.a, self.b, self.out]
    }

    pub fn holds(&self, bits: &[bool]) -> bool {
        eval_nand(bits[self.a.0], bits[self.b.0]) == bits[self.out.0]
    }

    fn same_as(&self, other: &NandEquation) -> bool {
        self.out == other.out
            && ((self.a == other.a && self.b == other.b) || (self.a == other.b && self.b == other.a))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BooleanSystem {
    variables: Vec<String>,
    equations: Vec<NandEquation>,
}

impl BooleanSystem {
    /// Builds a system with at least one equation.
    pub fn new(variables: Vec<String>, equations: Vec<NandEquation>) -> Result<Self> {
        if equations.is_empty() {
            return Err(BoolSysError::Empty);
        }
        Self::with_free_variables(variables, equations)
    }

    /// Like [`BooleanSystem::new`] but also accepts a system made only of
    /// unconstrained variables.
    pub fn with_free_variables(variables: Vec<String>, equations: Vec<NandEquation>) -> Result<Self> {
        if variables.is_empty() {
            return Err(BoolSysError::Empty);
        }
        let mut seen = HashMap::new();
        for (i, name) in variables.iter().enumerate() {
            if !is_identifier(name) {
                return Err(BoolSysError::Syntax {
                    line: 0,
                    message: format!("invalid identifier `{name}`"),
                });
            }
            if seen.insert(name.as_str(), i).is_some() {
                return Err(BoolSysError::DuplicateVariable(name.clone()));
            }
        }
        for eq in &equations {
            for v in eq.variables() {
                if v.0 >= variables.len() {
                    return Err(BoolSysError::UnknownVariable(format!("#{}", v.0)));
                }
            }
        }
        Ok(Self { variables, equations })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn equations(&self) -> &[NandEquation] {
        &self.equations
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.variables[id.0]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v == name).map(VarId)
    }

    /// Variables that appear in no equation at all.
    pub fn free_variables(&self) -> Vec<VarId> {
        let mut used = vec![false; self.variables.len()];
        for eq in &self.equations {
            for v in eq.variables() {
                used[v.0] = true;
            }
        }
        (0..self.variables.len()).filter(|&i| !used[i]).map(VarId).collect()
    }

    /// True iff every equation holds for `bits`, indexed by variable position.
    pub fn satisfied_by_bits(&self, bits: &[bool]) -> bool {
        self.equations.iter().all(|eq| eq.holds(bits))
    }

    /// Renders the system in the problem-file format. Parsing the result
    /// yields an equal system.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if self.first_appearance_order() != self.variables {
            out.push_str("free");
            for v in &self.variables {
                out.push(' ');
                out.push_str(v);
            }
            out.push('\n');
        }
        for eq in &self.equations {
            out.push_str(&format!(
                "{} = NAND({}, {})\n",
                self.name(eq.out),
                self.name(eq.a),
                self.name(eq.b)
            ));
        }
        out
    }

    fn first_appearance_order(&self) -> Vec<String> {
        let mut order: Vec<String> = Vec::new();
        for eq in &self.equations {
            for v in [eq.a, eq.b, eq.out] {
                let name = self.name(v);
                if !order.iter().any(|o| o == name) {
                    order.push(name.to_string());
                }
            }
        }
        order
    }
}

impl fmt::Display for BooleanSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// A (possibly partial) map from variable names to bits.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment(BTreeMap<String, bool>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assignment from bits indexed by `sys`'s variable order.
    pub fn from_bits(sys: &BooleanSystem, bits: &[bool]) -> Self {
        Self(sys.variables.iter().cloned().zip(bits.iter().copied()).collect())
    }

    /// Builds an assignment from `(name, bit)` pairs given as 0/1.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, u8)>) -> Self {
        Self(pairs.into_iter().map(|(k, v)| (k.to_string(), v != 0)).collect())
    }

    pub fn get(&self, name: &str) -> Option<bool> {
        self.0.get(name).copied()
    }

    /// Sets `name`, returning the previous value if any.
    pub fn insert(&mut self, name: impl Into<String>, value: bool) -> Option<bool> {
        self.0.insert(name.into(), value)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, bool)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Bits in `sys`'s variable order.
    pub fn to_bits(&self, sys: &BooleanSystem) -> Result<Vec<bool>> {
        sys.variables
            .iter()
            .map(|v| self.get(v).ok_or_else(|| BoolSysError::MissingVariable(v.clone())))
            .collect()
    }

    /// Compact `0`/`1` string in `sys`'s variable order.
    pub fn bit_string(&self, sys: &BooleanSystem) -> Result<String> {
        Ok(self.to_bits(sys)?.iter().map(|&b| if b { '1' } else { '0' }).collect())
    }
}

pub fn eval_nand(a: bool, b: bool) -> bool {
    !(a && b)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept a file that only declares `free` variables.
    pub allow_no_equations: bool,
}

/// Parses the line-oriented problem format, rejecting files without equations.
pub fn parse_system(text: &str) -> Result<BooleanSystem> {
    parse_system_with(text, ParseOptions::default())
}

pub fn parse_system_with(text: &str, opts: ParseOptions) -> Result<BooleanSystem> {
    let mut variables: Vec<String> = Vec::new();
    let mut index: HashMap<String, VarId> = HashMap::new();
    let mut equations: Vec<NandEquation> = Vec::new();

    let mut intern = |name: &str, variables: &mut Vec<String>| -> VarId {
        if let Some(&id) = index.get(name) {
            return id;
        }
        let id = VarId(variables.len());
        variables.push(name.to_string());
        index.insert(name.to_string(), id);
        id
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let syntax = |message: String| BoolSysError::Syntax { line, message };

        if let Some(rest) = strip_keyword(content, "free") {
            let names: Vec<&str> = rest.split_whitespace().collect();
            if names.is_empty() {
                return Err(syntax("`free` needs at least one variable name".into()));
            }
            for name in names {
                if !is_identifier(name) {
                    return Err(syntax(format!("invalid identifier `{name}`")));
                }
                intern(name, &mut variables);
            }
            continue;
        }

        let (lhs, rhs) = content
            .split_once('=')
            .ok_or_else(|| syntax("expected `OUT = NAND(IN1, IN2)`".into()))?;
        let out = lhs.trim();
        if !is_identifier(out) {
            return Err(syntax(format!("invalid output identifier `{out}`")));
        }
        let rhs = rhs.trim();
        let args = strip_keyword(rhs, "NAND")
            .map(str::trim_start)
            .and_then(|r| r.strip_prefix('('))
            .and_then(|r| r.trim_end().strip_suffix(')'))
            .ok_or_else(|| syntax(format!("expected `NAND(IN1, IN2)`, found `{rhs}`")))?;
        let inputs: Vec<&str> = args.split(',').map(str::trim).collect();
        if inputs.len() != 2 {
            return Err(syntax(format!("NAND takes 2 inputs, found {}", inputs.len())));
        }
        for name in &inputs {
            if !is_identifier(name) {
                return Err(syntax(format!("invalid input identifier `{name}`")));
            }
        }
        let a = intern(inputs[0], &mut variables);
        let b = intern(inputs[1], &mut variables);
        let out = intern(out, &mut variables);
        let eq = NandEquation { a, b, out };
        if !equations.iter().any(|e| e.same_as(&eq)) {
            equations.push(eq);
        }
    }

    if variables.is_empty() || (equations.is_empty() && !opts.allow_no_equations) {
        return Err(BoolSysError::Empty);
    }
    BooleanSystem::with_free_variables(variables, equations)
}

fn strip_keyword<'a>(s: &'a str, keyword: &str) -> Option<&'a str> {
    let rest = s.strip_prefix(keyword)?;
    match rest.chars().next() {
        None => Some(rest),
        Some(c) if c.is_whitespace() || c == '(' => Some(rest),
        _ => None,
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// True iff `asg` satisfies every equation of `sys`.
pub fn validate_assignment(sys: &BooleanSystem, asg: &Assignment) -> Result<bool> {
    let bits = asg.to_bits(sys)?;
    Ok(sys.satisfied_by_bits(&bits))
}

pub fn enumerate_solutions(sys: &BooleanSystem) -> Result<Vec<Assignment>> {
    enumerate_solutions_capped(sys, DEFAULT_ENUMERATION_CAP)
}

/// Exhaustive sweep over all `2^n` assignments. Results are ordered as binary
/// numbers with the first variable most significant.
pub fn enumerate_solutions_capped(sys: &BooleanSystem, cap: usize) -> Result<Vec<Assignment>> {
    let n = sys.num_variables();
    if n > cap {
        return Err(BoolSysError::CapExceeded { found: n, cap });
    }
    let mut bits = vec![false; n];
    let mut out = Vec::new();
    for row in 0u64..(1u64 << n) {
        for (i, bit) in bits.iter_mut().enumerate() {
            *bit = (row >> (n - 1 - i)) & 1 == 1;
        }
        if sys.satisfied_by_bits(&bits) {
            out.push(Assignment::from_bits(sys, &bits));
        }
    }
    Ok(out)
}
