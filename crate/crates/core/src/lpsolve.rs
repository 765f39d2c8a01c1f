//! Dense two-phase simplex with Bland's rule.
//!
//! Problems are stated as
//!
//! ```text
//! maximize    cᵀx
//! subject to  A_eq x = b_eq,  A_ub x ≤ b_ub,  lower ≤ x ≤ upper
//! ```
//!
//! and rewritten internally to `max ĉᵀy, Ây = b̂, y ≥ 0`. After pivoting
//! finishes, the primal and dual values are recomputed from the original data
//! with a QR solve on the final basis, so tableau drift does not leak into the
//! reported solution.
//!
//! Norm objectives are compiled by the callers: `‖Mᵀv‖∞` becomes an auxiliary
//! `t` with `±row·v ≤ t`, and `‖c‖₁` becomes a split `c = c⁺ − c⁻`.

use crate::error::{Error, Result};
use crate::numkit::{least_squares, Matrix};
use crate::Real;

const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram<T> {
    /// Coefficients of the maximized objective.
    pub objective: Vec<T>,
    pub eq_matrix: Matrix<T>,
    pub eq_rhs: Vec<T>,
    pub ub_matrix: Matrix<T>,
    pub ub_rhs: Vec<T>,
    /// Per-variable lower bounds, `-∞` allowed.
    pub lower: Vec<T>,
    /// Per-variable upper bounds, `+∞` allowed.
    pub upper: Vec<T>,
}

impl<T: Real> LinearProgram<T> {
    /// `num_vars` variables with bounds `[0, +∞)` and a zero objective.
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![T::zero(); num_vars],
            eq_matrix: Matrix::zeros(0, num_vars),
            eq_rhs: Vec::new(),
            ub_matrix: Matrix::zeros(0, num_vars),
            ub_rhs: Vec::new(),
            lower: vec![T::zero(); num_vars],
            upper: vec![T::infinity(); num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn maximize(mut self, objective: Vec<T>) -> Self {
        self.objective = objective;
        self
    }

    pub fn add_eq(&mut self, row: &[T], rhs: T) {
        self.eq_matrix.push_row(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, row: &[T], rhs: T) {
        self.ub_matrix.push_row(row);
        self.ub_rhs.push(rhs);
    }

    pub fn add_ge(&mut self, row: &[T], rhs: T) {
        let neg: Vec<T> = row.iter().map(|&x| -x).collect();
        self.add_le(&neg, -rhs);
    }

    pub fn set_bounds(&mut self, var: usize, lower: T, upper: T) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_free(&mut self, var: usize) {
        self.set_bounds(var, T::neg_infinity(), T::infinity());
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let check = |context, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    context,
                    expected,
                    found,
                })
            }
        };
        check("equality width", n, self.eq_matrix.cols())?;
        check("inequality width", n, self.ub_matrix.cols())?;
        check("equality rhs", self.eq_matrix.rows(), self.eq_rhs.len())?;
        check("inequality rhs", self.ub_matrix.rows(), self.ub_rhs.len())?;
        check("lower bounds", n, self.lower.len())?;
        check("upper bounds", n, self.upper.len())?;
        let finite = self
            .objective
            .iter()
            .chain(&self.eq_rhs)
            .chain(&self.ub_rhs)
            .chain(self.eq_matrix.as_slice())
            .chain(self.ub_matrix.as_slice());
        if let Some(i) = finite.enumerate().find(|(_, x)| !x.is_finite()).map(|(i, _)| i) {
            return Err(Error::NonFinite(i));
        }
        for j in 0..n {
            if self.lower[j].is_nan()
                || self.upper[j].is_nan()
                || self.lower[j] == T::infinity()
                || self.upper[j] == T::neg_infinity()
                || self.lower[j] > self.upper[j]
            {
                return Err(Error::InvalidParameter(format!("bounds of variable {j}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Primal point (empty unless optimal).
    pub primal: Vec<T>,
    /// Objective value; `-∞` when infeasible and `+∞` when unbounded.
    pub objective: T,
    /// Multipliers of the equality rows.
    pub eq_duals: Vec<T>,
    /// Multipliers of the inequality rows (nonnegative at optimality).
    pub ub_duals: Vec<T>,
    /// `|primal objective − dual objective|`.
    pub duality_gap: T,
    /// Largest constraint or bound violation of `primal`.
    pub primal_residual: T,
    /// Largest positive reduced cost, i.e. dual infeasibility.
    pub dual_residual: T,
}

impl<T: Real> LpSolution<T> {
    fn with_status(status: LpStatus) -> Self {
        let objective = match status {
            LpStatus::Infeasible => T::neg_infinity(),
            _ => T::infinity(),
        };
        Self {
            status,
            primal: Vec::new(),
            objective,
            eq_duals: Vec::new(),
            ub_duals: Vec::new(),
            duality_gap: T::zero(),
            primal_residual: T::zero(),
            dual_residual: T::zero(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Converts a non-optimal status into the matching error.
    pub fn optimal(self) -> Result<Self> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::Infeasible => Err(Error::Infeasible),
            LpStatus::Unbounded => Err(Error::Unbounded),
        }
    }
}

/// Largest violation of the constraints and bounds of `lp` at `x`.
///
/// Evaluated directly on the problem data; it shares nothing with the
/// pivoting code.
pub fn primal_residual<T: Real>(lp: &LinearProgram<T>, x: &[T]) -> T {
    let mut worst = T::zero();
    for (i, &b) in lp.eq_rhs.iter().enumerate() {
        let ax: T = lp.eq_matrix.row(i).iter().zip(x).map(|(&a, &v)| a * v).sum();
        worst = worst.max((ax - b).abs());
    }
    for (i, &b) in lp.ub_rhs.iter().enumerate() {
        let ax: T = lp.ub_matrix.row(i).iter().zip(x).map(|(&a, &v)| a * v).sum();
        worst = worst.max(ax - b);
    }
    for (j, &v) in x.iter().enumerate() {
        worst = worst.max(lp.lower[j] - v).max(v - lp.upper[j]);
    }
    worst
}

#[derive(Clone, Copy, Debug)]
enum VarMap<T> {
    /// `x = lo + y[col]`
    Shift { col: usize, lo: T },
    /// `x = hi − y[col]`
    Flip { col: usize, hi: T },
    /// `x = y[pos] − y[neg]`
    Split { pos: usize, neg: usize },
}

#[derive(Clone, Copy, Debug)]
enum RowOrigin {
    Eq(usize),
    Ub(usize),
    Bound,
}

struct StandardForm<T> {
    a: Matrix<T>,
    b: Vec<T>,
    c: Vec<T>,
    offset: T,
    maps: Vec<VarMap<T>>,
    origins: Vec<RowOrigin>,
    signs: Vec<T>,
}

impl<T: Real> StandardForm<T> {
    fn build(lp: &LinearProgram<T>) -> Self {
        let n = lp.num_vars();
        let mut maps = Vec::with_capacity(n);
        let mut boxes = Vec::new();
        let mut cols = 0;
        for j in 0..n {
            let (lo, hi) = (lp.lower[j], lp.upper[j]);
            let map = if lo.is_finite() {
                if hi.is_finite() {
                    boxes.push((cols, hi - lo));
                }
                VarMap::Shift { col: cols, lo }
            } else if hi.is_finite() {
                VarMap::Flip { col: cols, hi }
            } else {
                cols += 1;
                VarMap::Split {
                    pos: cols - 1,
                    neg: cols,
                }
            };
            cols += 1;
            maps.push(map);
        }
        let n_slack = lp.ub_rhs.len() + boxes.len();
        let width = cols + n_slack;
        let m = lp.eq_rhs.len() + lp.ub_rhs.len() + boxes.len();
        let mut a = Matrix::zeros(m, width);
        let mut b = vec![T::zero(); m];
        let mut origins = Vec::with_capacity(m);

        let fill_row = |r: usize, row: &[T], rhs: T, a: &mut Matrix<T>, b: &mut [T]| {
            let mut rhs = rhs;
            for (j, &coef) in row.iter().enumerate() {
                if coef == T::zero() {
                    continue;
                }
                match maps[j] {
                    VarMap::Shift { col, lo } => {
                        a[(r, col)] += coef;
                        rhs -= coef * lo;
                    }
                    VarMap::Flip { col, hi } => {
                        a[(r, col)] -= coef;
                        rhs -= coef * hi;
                    }
                    VarMap::Split { pos, neg } => {
                        a[(r, pos)] += coef;
                        a[(r, neg)] -= coef;
                    }
                }
            }
            b[r] = rhs;
        };

        let mut r = 0;
        for i in 0..lp.eq_rhs.len() {
            fill_row(r, lp.eq_matrix.row(i), lp.eq_rhs[i], &mut a, &mut b);
            origins.push(RowOrigin::Eq(i));
            r += 1;
        }
        let mut slack = cols;
        for i in 0..lp.ub_rhs.len() {
            fill_row(r, lp.ub_matrix.row(i), lp.ub_rhs[i], &mut a, &mut b);
            a[(r, slack)] = T::one();
            slack += 1;
            origins.push(RowOrigin::Ub(i));
            r += 1;
        }
        for &(col, width) in &boxes {
            a[(r, col)] = T::one();
            a[(r, slack)] = T::one();
            b[r] = width;
            slack += 1;
            origins.push(RowOrigin::Bound);
            r += 1;
        }

        let mut c = vec![T::zero(); width];
        let mut offset = T::zero();
        for (j, &cj) in lp.objective.iter().enumerate() {
            match maps[j] {
                VarMap::Shift { col, lo } => {
                    c[col] += cj;
                    offset += cj * lo;
                }
                VarMap::Flip { col, hi } => {
                    c[col] -= cj;
                    offset += cj * hi;
                }
                VarMap::Split { pos, neg } => {
                    c[pos] += cj;
                    c[neg] -= cj;
                }
            }
        }

        let mut signs = vec![T::one(); m];
        for i in 0..m {
            if b[i] < T::zero() {
                signs[i] = -T::one();
                b[i] = -b[i];
                for j in 0..width {
                    a[(i, j)] = -a[(i, j)];
                }
            }
        }
        Self {
            a,
            b,
            c,
            offset,
            maps,
            origins,
            signs,
        }
    }

    fn recover_x(&self, y: &[T]) -> Vec<T> {
        self.maps
            .iter()
            .map(|m| match *m {
                VarMap::Shift { col, lo } => lo + y[col],
                VarMap::Flip { col, hi } => hi - y[col],
                VarMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }
}

/// Simplex tableau: `m` constraint rows plus a reduced-cost row.
///
/// Columns are the `n` standard variables, `m` artificials, and the
/// right-hand side. The reduced-cost row stores `d_j = c_j − c_Bᵀ t_j` and
/// `−z` in its last entry.
struct Tableau<T> {
    m: usize,
    width: usize,
    data: Vec<T>,
    basis: Vec<usize>,
    eps: T,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl<T: Real> Tableau<T> {
    fn new(sf: &StandardForm<T>) -> Self {
        let (m, n) = (sf.a.rows(), sf.a.cols());
        let width = n + m + 1;
        let mut data = vec![T::zero(); (m + 1) * width];
        for i in 0..m {
            for j in 0..n {
                data[i * width + j] = sf.a[(i, j)];
            }
            data[i * width + n + i] = T::one();
            data[i * width + width - 1] = sf.b[i];
        }
        Self {
            m,
            width,
            data,
            basis: (n..n + m).collect(),
            eps: T::feas_tol(),
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.width + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> T {
        self.at(i, self.width - 1)
    }

    fn set_costs(&mut self, costs: &[T]) {
        let obj = self.m * self.width;
        for j in 0..self.width {
            self.data[obj + j] = if j < costs.len() { costs[j] } else { T::zero() };
        }
        for i in 0..self.m {
            let cb = costs.get(self.basis[i]).copied().unwrap_or(T::zero());
            if cb == T::zero() {
                continue;
            }
            for j in 0..self.width {
                let t = self.data[i * self.width + j];
                self.data[obj + j] -= cb * t;
            }
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.width;
        let p = self.at(r, e);
        for j in 0..w {
            self.data[r * w + j] /= p;
        }
        let pivot_row: Vec<T> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..=self.m {
            if i == r {
                continue;
            }
            let f = self.data[i * w + e];
            if f == T::zero() {
                continue;
            }
            for (j, &p) in pivot_row.iter().enumerate() {
                self.data[i * w + j] -= f * p;
            }
            self.data[i * w + e] = T::zero();
        }
        self.basis[r] = e;
    }

    /// Bland's rule: lowest-index improving column, ratio ties to the lowest basic index.
    fn run(&mut self, allowed: usize, pivots: &mut usize) -> Result<Outcome> {
        let obj = self.m;
        loop {
            let Some(e) = (0..allowed).find(|&j| self.at(obj, j) > self.eps) else {
                return Ok(Outcome::Optimal);
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.m {
                let t = self.at(i, e);
                if t <= self.eps {
                    continue;
                }
                let ratio = self.rhs(i).max(T::zero()) / t;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= self.eps * (T::one() + br.abs());
                        if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            self.pivot(r, e);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::IterationLimit(MAX_PIVOTS));
            }
        }
    }
}

/// Solves `lp`. Malformed dimensions are errors; infeasibility and
/// unboundedness are reported through [`LpSolution::status`].
pub fn solve_lp<T: Real>(lp: &LinearProgram<T>) -> Result<LpSolution<T>> {
    lp.validate()?;
    let sf = StandardForm::build(lp);
    let (m, n) = (sf.a.rows(), sf.a.cols());
    let mut tab = Tableau::new(&sf);
    let mut pivots = 0;

    // phase I: maximize −Σ artificials
    let mut phase1 = vec![T::zero(); n + m];
    for c in phase1.iter_mut().skip(n) {
        *c = -T::one();
    }
    tab.set_costs(&phase1);
    tab.run(n, &mut pivots)?;
    let infeas: T = (0..m)
        .filter(|&i| tab.basis[i] >= n)
        .map(|i| tab.rhs(i).abs())
        .sum();
    let scale = T::one() + sf.b.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
    if infeas > tab.eps * scale {
        return Ok(LpSolution::with_status(LpStatus::Infeasible));
    }

    // drive remaining artificials out; rows that cannot be pivoted are redundant
    let mut redundant = vec![false; m];
    for (r, red) in redundant.iter_mut().enumerate() {
        if tab.basis[r] < n {
            continue;
        }
        let mut best: Option<(usize, T)> = None;
        for j in 0..n {
            let t = tab.at(r, j).abs();
            if t > tab.eps && best.is_none_or(|(_, bt)| t > bt) {
                best = Some((j, t));
            }
        }
        match best {
            Some((j, _)) => tab.pivot(r, j),
            None => *red = true,
        }
    }

    // phase II
    tab.set_costs(&sf.c);
    if let Outcome::Unbounded = tab.run(n, &mut pivots)? {
        return Ok(LpSolution::with_status(LpStatus::Unbounded));
    }

    // recompute primal and dual values from the original data on the final basis
    let rows: Vec<usize> = (0..m).filter(|&i| !redundant[i]).collect();
    let cols: Vec<usize> = rows.iter().map(|&i| tab.basis[i]).collect();
    let mut bmat = Matrix::zeros(rows.len(), cols.len());
    for (ri, &i) in rows.iter().enumerate() {
        for (ci, &j) in cols.iter().enumerate() {
            bmat[(ri, ci)] = sf.a[(i, j)];
        }
    }
    let brhs: Vec<T> = rows.iter().map(|&i| sf.b[i]).collect();
    let xb = least_squares(&bmat, &brhs)?;
    let mut y = vec![T::zero(); n];
    for (&j, &v) in cols.iter().zip(&xb) {
        y[j] = v;
    }
    let cb: Vec<T> = cols.iter().map(|&j| sf.c[j]).collect();
    let wb = least_squares(&bmat.transpose(), &cb)?;
    let mut w = vec![T::zero(); m];
    for (&i, &v) in rows.iter().zip(&wb) {
        w[i] = v;
    }

    let x = sf.recover_x(&y);
    let objective: T = lp.objective.iter().zip(&x).map(|(&c, &v)| c * v).sum();
    let dual_objective: T = sf.b.iter().zip(&w).map(|(&b, &wi)| b * wi).sum::<T>() + sf.offset;
    let mut dual_residual = T::zero();
    for j in 0..n {
        let aw: T = (0..m).map(|i| sf.a[(i, j)] * w[i]).sum();
        dual_residual = dual_residual.max(sf.c[j] - aw);
    }
    let mut eq_duals = vec![T::zero(); lp.eq_rhs.len()];
    let mut ub_duals = vec![T::zero(); lp.ub_rhs.len()];
    for (i, origin) in sf.origins.iter().enumerate() {
        match *origin {
            RowOrigin::Eq(k) => eq_duals[k] = sf.signs[i] * w[i],
            RowOrigin::Ub(k) => ub_duals[k] = sf.signs[i] * w[i],
            RowOrigin::Bound => {}
        }
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        primal_residual: primal_residual(lp, &x),
        primal: x,
        objective,
        eq_duals,
        ub_duals,
        duality_gap: (objective - dual_objective).abs(),
        dual_residual,
    })
}

/// Maximizes `secondary` over the optimal face of `lp`.
///
/// The face is expressed by adding `objectiveᵀx ≥ z* − 1e-9·(1 + |z*|)`.
pub fn lexicographic_optimal_face_point<T: Real>(
    lp: &LinearProgram<T>,
    secondary: &[T],
) -> Result<LpSolution<T>> {
    lexicographic_optimal_face_point_with_tol(lp, secondary, T::feas_tol())
}

/// [`lexicographic_optimal_face_point`] with an explicit relative face tolerance.
///
/// A zero tolerance pins the face with the equality `objectiveᵀx = z*`; the
/// returned basic solution then lies on the face up to rounding.
pub fn lexicographic_optimal_face_point_with_tol<T: Real>(
    lp: &LinearProgram<T>,
    secondary: &[T],
    rel_tol: T,
) -> Result<LpSolution<T>> {
    if secondary.len() != lp.num_vars() {
        return Err(Error::DimensionMismatch {
            context: "secondary objective",
            expected: lp.num_vars(),
            found: secondary.len(),
        });
    }
    let first = solve_lp(lp)?.optimal()?;
    let z = first.objective;
    let mut face = lp.clone();
    if rel_tol == T::zero() {
        face.add_eq(&lp.objective, z);
    } else {
        face.add_ge(&lp.objective, z - rel_tol * (T::one() + z.abs()));
    }
    face.objective = secondary.to_vec();
    solve_lp(&face)?.optimal()
}
