use crate::error::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

/// One sparse constraint row `sum(coef * x[var]) rel rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Self {
            coeffs,
            relation,
            rhs,
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.relation {
            Relation::Le => (act - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - act).max(0.0),
            Relation::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A linear program over bounded variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(sense: Sense, num_vars: usize) -> Self {
        Self {
            sense,
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Appends a variable and returns its index.
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.rows.push(Row::new(coeffs, relation, rhs));
        self.rows.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .map(|r| r.violation(x))
            .fold(0.0_f64, f64::max);
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0))
            .fold(0.0_f64, f64::max);
        rows.max(bounds)
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(MilpError::Dimension(format!(
                "{} objective entries but {} lower / {} upper bounds",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(MilpError::NonFinite(format!("objective coefficient of x{j}")));
            }
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(MilpError::NonFinite(format!("bounds of x{j}")));
            }
            if l > u {
                return Err(MilpError::InvertedBounds { var: j, lower: l, upper: u });
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(MilpError::NonFinite(format!("rhs of row {i}")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(MilpError::Dimension(format!(
                        "row {i} references x{j} but there are {n} variables"
                    )));
                }
                if !a.is_finite() {
                    return Err(MilpError::NonFinite(format!("coefficient of x{j} in row {i}")));
                }
            }
        }
        Ok(())
    }
}

/// A linear program with integrality restrictions on some variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Milp {
    pub lp: LinearProgram,
    pub integer: Vec<bool>,
}

impl Milp {
    pub fn new(lp: LinearProgram) -> Self {
        let n = lp.num_vars();
        Self {
            lp,
            integer: vec![false; n],
        }
    }

    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64, integer: bool) -> usize {
        self.integer.push(integer);
        self.lp.add_var(lower, upper, cost)
    }

    pub fn add_binary(&mut self, cost: f64) -> usize {
        self.add_var(0.0, 1.0, cost, true)
    }

    pub fn num_integer(&self) -> usize {
        self.integer.iter().filter(|&&b| b).count()
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        self.lp.validate()?;
        if self.integer.len() != self.lp.num_vars() {
            return Err(MilpError::Dimension(format!(
                "{} integrality flags for {} variables",
                self.integer.len(),
                self.lp.num_vars()
            )));
        }
        for (j, &is_int) in self.integer.iter().enumerate() {
            if is_int && !(self.lp.lower[j].is_finite() && self.lp.upper[j].is_finite()) {
                return Err(MilpError::UnboundedInteger(j));
            }
        }
        Ok(())
    }
}
