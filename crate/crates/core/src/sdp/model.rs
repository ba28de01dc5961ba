//! Modeling layer: Hermitian matrix variables, affine expressions built from
//! partial transposes, partial traces and identity tensoring, and constraints
//! of the form `expr ⪰ 0` or `expr = 0`.

use crate::error::{Error, Result};
use crate::operators::{raw, CMatrix, HermitianOperator, SystemLayout, C64};

/// Cone constraint attached to a variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    HermitianPsd,
    HermitianFree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

#[derive(Clone, Debug)]
pub struct Variable {
    pub name: String,
    pub layout: SystemLayout,
    pub cone: Cone,
}

/// Linear maps that may be chained onto a variable.
#[derive(Clone, Debug)]
pub enum LinearMap {
    PartialTranspose(Vec<String>),
    PartialTrace(Vec<String>),
    /// `X ↦ X ⊗ I` with the identity on the appended factors.
    TensorIdentity(SystemLayout),
    /// Reorder factors.
    Permute(Vec<String>),
    /// `X ↦ Tr(W X)`, producing a scalar.
    TraceWith(CMatrix),
}

impl LinearMap {
    /// Layout after applying the map; validates labels.
    pub(crate) fn output_layout(&self, layout: &SystemLayout) -> Result<SystemLayout> {
        match self {
            LinearMap::PartialTranspose(labels) => {
                layout.mask(labels)?;
                Ok(layout.clone())
            }
            LinearMap::PartialTrace(labels) => layout.without(labels),
            LinearMap::TensorIdentity(extra) => layout.concat(extra),
            LinearMap::Permute(order) => layout.reordered(order),
            LinearMap::TraceWith(w) => {
                if w.nrows() != layout.dim() || w.ncols() != layout.dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "trace weight is {}x{}, operand is {}",
                        w.nrows(),
                        w.ncols(),
                        layout
                    )));
                }
                Ok(SystemLayout::scalar())
            }
        }
    }

    pub(crate) fn apply(&self, layout: &SystemLayout, m: &CMatrix) -> CMatrix {
        match self {
            LinearMap::PartialTranspose(labels) => {
                let mask = layout.mask(labels).expect("validated");
                raw::partial_transpose(m, &layout.dims(), &mask)
            }
            LinearMap::PartialTrace(labels) => {
                let mask = layout.mask(labels).expect("validated");
                raw::partial_trace(m, &layout.dims(), &mask)
            }
            LinearMap::TensorIdentity(extra) => {
                let d = extra.dim();
                m.kronecker(&CMatrix::identity(d, d))
            }
            LinearMap::Permute(order) => {
                let perm = layout.permutation_to(order).expect("validated");
                raw::permute(m, &layout.dims(), &perm)
            }
            LinearMap::TraceWith(w) => {
                let v: C64 = w.iter().zip(m.transpose().iter()).map(|(a, b)| a * b).sum();
                CMatrix::from_element(1, 1, v)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Term {
    pub var: VarId,
    pub var_layout: SystemLayout,
    pub coef: f64,
    pub ops: Vec<LinearMap>,
}

/// Affine Hermitian-valued expression in the problem variables.
#[derive(Clone, Debug)]
pub struct Expr {
    layout: SystemLayout,
    pub(crate) terms: Vec<Term>,
    pub(crate) constant: Option<CMatrix>,
}

impl Expr {
    pub fn constant(op: &HermitianOperator) -> Expr {
        Expr { layout: op.layout().clone(), terms: Vec::new(), constant: Some(op.matrix().clone()) }
    }

    /// Real scalar constant.
    pub fn scalar(v: f64) -> Expr {
        Expr {
            layout: SystemLayout::scalar(),
            terms: Vec::new(),
            constant: Some(CMatrix::from_element(1, 1, C64::new(v, 0.0))),
        }
    }

    /// Zero on `layout`.
    pub fn zero(layout: SystemLayout) -> Expr {
        Expr { layout, terms: Vec::new(), constant: None }
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    fn map(mut self, op: LinearMap) -> Result<Expr> {
        let out = op.output_layout(&self.layout)?;
        if let Some(c) = self.constant.take() {
            self.constant = Some(op.apply(&self.layout, &c));
        }
        for t in &mut self.terms {
            t.ops.push(op.clone());
        }
        self.layout = out;
        Ok(self)
    }

    pub fn pt<S: AsRef<str>>(self, on: &[S]) -> Result<Expr> {
        self.map(LinearMap::PartialTranspose(on.iter().map(|s| s.as_ref().to_string()).collect()))
    }

    /// Partial transpose on the expression's B side.
    pub fn pt_b(self) -> Result<Expr> {
        let b = self.layout.b_side().to_vec();
        self.pt(&b)
    }

    pub fn ptrace<S: AsRef<str>>(self, over: &[S]) -> Result<Expr> {
        self.map(LinearMap::PartialTrace(over.iter().map(|s| s.as_ref().to_string()).collect()))
    }

    pub fn tensor_identity(self, extra: &SystemLayout) -> Result<Expr> {
        self.map(LinearMap::TensorIdentity(extra.clone()))
    }

    pub fn permute<S: AsRef<str>>(self, order: &[S]) -> Result<Expr> {
        self.map(LinearMap::Permute(order.iter().map(|s| s.as_ref().to_string()).collect()))
    }

    pub fn trace(self) -> Result<Expr> {
        let n = self.layout.dim();
        self.map(LinearMap::TraceWith(CMatrix::identity(n, n)))
    }

    /// `Tr(W X)` for Hermitian `W` on the same factors.
    pub fn trace_with(self, w: &HermitianOperator) -> Result<Expr> {
        if !w.layout().same_factors(&self.layout) {
            return Err(Error::DimensionMismatch(format!("{} vs {}", w.layout(), self.layout)));
        }
        self.map(LinearMap::TraceWith(w.matrix().clone()))
    }

    pub fn scale(mut self, c: f64) -> Expr {
        if let Some(m) = self.constant.as_mut() {
            *m *= C64::new(c, 0.0);
        }
        for t in &mut self.terms {
            t.coef *= c;
        }
        self
    }

    pub fn neg(self) -> Expr {
        self.scale(-1.0)
    }

    pub fn add(mut self, other: Expr) -> Result<Expr> {
        if !self.layout.same_factors(&other.layout) {
            return Err(Error::DimensionMismatch(format!("cannot add {} and {}", self.layout, other.layout)));
        }
        self.constant = match (self.constant.take(), other.constant) {
            (Some(a), Some(b)) => Some(a + b),
            (a, b) => a.or(b),
        };
        self.terms.extend(other.terms);
        Ok(self)
    }

    pub fn sub(self, other: Expr) -> Result<Expr> {
        self.add(other.neg())
    }

    pub fn add_const(self, op: &HermitianOperator) -> Result<Expr> {
        self.add(Expr::constant(op))
    }

    pub fn sub_const(self, op: &HermitianOperator) -> Result<Expr> {
        self.sub(Expr::constant(op))
    }

    /// Evaluate at the given variable values.
    pub fn evaluate(&self, values: &[HermitianOperator]) -> CMatrix {
        let n = self.layout.dim();
        let mut out = self.constant.clone().unwrap_or_else(|| CMatrix::zeros(n, n));
        for t in &self.terms {
            let mut layout = t.var_layout.clone();
            let mut m = values[t.var.0].matrix().clone();
            for op in &t.ops {
                let next = op.output_layout(&layout).expect("validated");
                m = op.apply(&layout, &m);
                layout = next;
            }
            out += m * C64::new(t.coef, 0.0);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// `expr ⪰ 0`
    Psd,
    /// `expr = 0`
    Zero,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub name: String,
    pub expr: Expr,
    pub relation: Relation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// A Hermitian semidefinite program.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub(crate) variables: Vec<Variable>,
    pub(crate) constraints: Vec<Constraint>,
    pub(crate) objective: Option<(Sense, Expr)>,
}

impl Default for SdpProblem {
    fn default() -> Self {
        SdpProblem::new()
    }
}

impl SdpProblem {
    pub fn new() -> Self {
        SdpProblem { variables: Vec::new(), constraints: Vec::new(), objective: None }
    }

    /// Declare a variable and return it as an expression.
    pub fn var(&mut self, name: &str, layout: SystemLayout, cone: Cone) -> Result<Expr> {
        if self.variables.iter().any(|v| v.name == name) {
            return Err(Error::DuplicateLabel(name.to_string()));
        }
        let id = VarId(self.variables.len());
        self.variables.push(Variable { name: name.to_string(), layout: layout.clone(), cone });
        Ok(Expr {
            layout: layout.clone(),
            terms: vec![Term { var: id, var_layout: layout, coef: 1.0, ops: Vec::new() }],
            constant: None,
        })
    }

    /// Real scalar variable (a 1×1 Hermitian matrix).
    pub fn scalar_var(&mut self, name: &str, nonneg: bool) -> Result<Expr> {
        let cone = if nonneg { Cone::HermitianPsd } else { Cone::HermitianFree };
        self.var(name, SystemLayout::scalar(), cone)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    fn push(&mut self, name: &str, expr: Expr, relation: Relation) -> Result<()> {
        if expr.is_constant() {
            return Err(Error::MalformedProblem(format!("constraint `{name}` involves no variables")));
        }
        self.constraints.push(Constraint { name: name.to_string(), expr, relation });
        Ok(())
    }

    /// `expr ⪰ 0`
    pub fn psd(&mut self, name: &str, expr: Expr) -> Result<()> {
        self.push(name, expr, Relation::Psd)
    }

    /// `lhs ⪰ rhs`
    pub fn geq(&mut self, name: &str, lhs: Expr, rhs: Expr) -> Result<()> {
        let e = lhs.sub(rhs)?;
        self.push(name, e, Relation::Psd)
    }

    /// `lhs ⪯ rhs`
    pub fn leq(&mut self, name: &str, lhs: Expr, rhs: Expr) -> Result<()> {
        self.geq(name, rhs, lhs)
    }

    /// `lhs = rhs`
    pub fn equal(&mut self, name: &str, lhs: Expr, rhs: Expr) -> Result<()> {
        let e = lhs.sub(rhs)?;
        self.push(name, e, Relation::Zero)
    }

    fn set_objective(&mut self, sense: Sense, expr: Expr) -> Result<()> {
        if expr.layout().dim() != 1 {
            return Err(Error::MalformedProblem(format!("objective must be scalar, got {}", expr.layout())));
        }
        self.objective = Some((sense, expr));
        Ok(())
    }

    pub fn minimize(&mut self, expr: Expr) -> Result<()> {
        self.set_objective(Sense::Minimize, expr)
    }

    pub fn maximize(&mut self, expr: Expr) -> Result<()> {
        self.set_objective(Sense::Maximize, expr)
    }

    /// Adds a scalar `t` with `−tI ⪯ expr ⪯ tI` (only `expr ⪯ tI` when
    /// `expr_is_psd`) and returns `t`; minimizing it yields `‖expr‖_∞`.
    pub fn inf_norm_epigraph(&mut self, name: &str, expr: Expr, expr_is_psd: bool) -> Result<Expr> {
        let t = self.scalar_var(name, false)?;
        let layout = expr.layout().clone();
        let t_id = t.clone().tensor_identity(&layout)?;
        self.geq(&format!("{name}_upper"), t_id.clone(), expr.clone())?;
        if !expr_is_psd {
            self.psd(&format!("{name}_lower"), t_id.add(expr)?)?;
        }
        Ok(t)
    }
}

/// Hermitian basis of dimension `d`: `d` diagonal units, then for each
/// `i < j` the pair `E_ij + E_ji`, `i E_ij − i E_ji`.
pub(crate) fn hermitian_basis_len(d: usize) -> usize {
    d * d
}

pub(crate) fn basis_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(d * (d - 1) / 2);
    for i in 0..d {
        for j in i + 1..d {
            v.push((i, j));
        }
    }
    v
}

pub(crate) fn hermitian_basis_element(d: usize, p: usize, pairs: &[(usize, usize)]) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    if p < d {
        m[(p, p)] = C64::new(1.0, 0.0);
    } else {
        let q = p - d;
        let (i, j) = pairs[q / 2];
        if q.is_multiple_of(2) {
            m[(i, j)] = C64::new(1.0, 0.0);
            m[(j, i)] = C64::new(1.0, 0.0);
        } else {
            m[(i, j)] = C64::new(0.0, 1.0);
            m[(j, i)] = C64::new(0.0, -1.0);
        }
    }
    m
}

/// Inverse of the basis expansion: coordinates of a Hermitian matrix.
pub(crate) fn hermitian_coords(m: &CMatrix, pairs: &[(usize, usize)]) -> Vec<f64> {
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        v.push(m[(i, i)].re);
    }
    for &(i, j) in pairs {
        v.push(m[(i, j)].re);
        v.push(m[(i, j)].im);
    }
    v
}

pub(crate) fn hermitian_from_coords(x: &[f64], d: usize, pairs: &[(usize, usize)]) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(x[i], 0.0);
    }
    for (q, &(i, j)) in pairs.iter().enumerate() {
        let v = C64::new(x[d + 2 * q], x[d + 2 * q + 1]);
        m[(i, j)] = v;
        m[(j, i)] = v.conj();
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_round_trip() {
        let d = 3;
        let pairs = basis_pairs(d);
        let x: Vec<f64> = (0..9).map(|i| i as f64 * 0.7 - 2.0).collect();
        let m = hermitian_from_coords(&x, d, &pairs);
        assert_eq!(hermitian_coords(&m, &pairs), x);
        let mut sum = CMatrix::zeros(d, d);
        for (p, xp) in x.iter().enumerate() {
            sum += hermitian_basis_element(d, p, &pairs) * C64::new(*xp, 0.0);
        }
        assert!(raw::max_abs(&(sum - m)) < 1e-15);
    }

    #[test]
    fn expr_layout_tracking() {
        let mut p = SdpProblem::new();
        let l = SystemLayout::bipartite("A", 2, "B", 3).unwrap();
        let x = p.var("X", l.clone(), Cone::HermitianPsd).unwrap();
        let y = x.clone().ptrace(&["A"]).unwrap();
        assert_eq!(y.layout().dim(), 3);
        let z = x.clone().trace().unwrap();
        assert_eq!(z.layout().dim(), 1);
        assert!(x.clone().add(y).is_err());
        assert!(x.clone().pt(&["C"]).is_err());
        let extra = SystemLayout::new([("C".to_string(), 2)], Vec::<String>::new()).unwrap();
        let w = x.tensor_identity(&extra).unwrap().permute(&["C", "A", "B"]).unwrap();
        assert_eq!(w.layout().dims(), vec![2, 2, 3]);
        assert!(p.var("X", l, Cone::HermitianFree).is_err());
    }

    #[test]
    fn constant_folding_matches_operators() {
        let l = SystemLayout::bipartite("A", 2, "B", 2).unwrap();
        let phi = crate::operators::maximally_entangled(2);
        let e = Expr::constant(phi.op()).pt(&["B"]).unwrap();
        let expect = phi.pt_b();
        assert!(raw::max_abs(&(e.constant.unwrap() - expect.matrix())) < 1e-15);
        let t = Expr::constant(phi.op()).trace().unwrap();
        assert!((t.constant.unwrap()[(0, 0)].re - 1.0).abs() < 1e-15);
        let _ = l;
    }
}
