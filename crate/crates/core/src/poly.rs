//! Sparse multivariate polynomials, polynomial immersions `ℝ^d → ℝ^n`, and
//! exact jets.
//!
//! Differentiation is done on the coefficients, so the jet entries are exact
//! up to the rounding of a single evaluation.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::index::graded_monomials;

/// Exponent vector of a monomial.
///
/// Ordered graded-lexicographically: lower total degree first, and within a
/// degree the larger leading exponent first (`x² < xy < y²`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn unit(d: usize, i: usize) -> Self {
        let mut e = vec![0; d];
        e[i] = 1;
        Self(e)
    }

    /// Multi-index counting how often each coordinate direction occurs.
    pub fn from_directions(d: usize, directions: &[usize]) -> Self {
        let mut e = vec![0; d];
        for &i in directions {
            e[i] += 1;
        }
        Self(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// `α! = Π α_i!`.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&e| factorial(e as usize)).product()
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| a.checked_sub(b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// Cyclic shift `(α_2, …, α_d, α_1)`.
    pub fn rotate(&self) -> MultiIndex {
        let mut e = self.0.clone();
        if !e.is_empty() {
            e.rotate_left(1);
        }
        MultiIndex(e)
    }

    /// True when the monomial is `t_i^k` for a single variable.
    pub fn is_pure_power(&self) -> bool {
        self.0.iter().filter(|&&e| e > 0).count() <= 1
    }
}

impl Add for &MultiIndex {
    type Output = MultiIndex;
    fn add(self, rhs: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Falling factorial `a (a-1) ⋯ (a-b+1)`; zero when `b > a`.
fn falling(a: u32, b: u32) -> f64 {
    if b > a {
        return 0.0;
    }
    ((a - b + 1)..=a).map(|i| i as f64).product()
}

/// Sparse polynomial in `nvars` variables with real coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::monomial(MultiIndex::zeros(nvars), c)
    }

    pub fn monomial(alpha: MultiIndex, coef: f64) -> Self {
        let mut p = Self::zero(alpha.dim());
        p.add_term(alpha, coef);
        p
    }

    /// The coordinate function `t_i`.
    pub fn variable(nvars: usize, i: usize) -> Self {
        Self::monomial(MultiIndex::unit(nvars, i), 1.0)
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (MultiIndex, f64)>) -> Self {
        let mut p = Self::zero(nvars);
        for (alpha, c) in terms {
            assert_eq!(alpha.dim(), nvars, "exponent length must equal the variable count");
            p.add_term(alpha, c);
        }
        p
    }

    fn add_term(&mut self, alpha: MultiIndex, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let entry = self.terms.entry(alpha).or_insert(0.0);
        *entry += coef;
        if *entry == 0.0 {
            self.terms.retain(|_, c| *c != 0.0);
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Nonzero terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(a, &c)| (a, c))
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(MultiIndex::degree).max()
    }

    pub fn is_homogeneous(&self, k: usize) -> bool {
        self.terms.keys().all(|a| a.degree() == k)
    }

    pub fn evaluate(&self, t: &[f64]) -> f64 {
        debug_assert_eq!(t.len(), self.nvars);
        self.terms
            .iter()
            .map(|(a, &c)| {
                a.exponents()
                    .iter()
                    .zip(t)
                    .fold(c, |acc, (&e, &x)| acc * x.powi(e as i32))
            })
            .sum()
    }

    /// `∂/∂t_i`.
    pub fn partial(&self, i: usize) -> Polynomial {
        self.derivative(&MultiIndex::unit(self.nvars, i))
    }

    /// Exact `∂^α`.
    pub fn derivative(&self, alpha: &MultiIndex) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (beta, &c) in &self.terms {
            if let Some(rest) = beta.checked_sub(alpha) {
                let scale: f64 = beta
                    .exponents()
                    .iter()
                    .zip(alpha.exponents())
                    .map(|(&b, &a)| falling(b, a))
                    .product();
                out.add_term(rest, c * scale);
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::from_terms(self.nvars, self.terms.iter().map(|(a, &c)| (a.clone(), c * s)))
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        (0..k).fold(Polynomial::constant(self.nvars, 1.0), |acc, _| &acc * self)
    }

    /// Substitute `t ↦ L t`, i.e. return `t ↦ p(L t)`.
    pub fn compose_linear(&self, l: &DMatrix<f64>) -> Polynomial {
        let d = self.nvars;
        assert_eq!(l.nrows(), d);
        let m = l.ncols();
        let images: Vec<Polynomial> = (0..d)
            .map(|i| {
                Polynomial::from_terms(m, (0..m).map(|j| (MultiIndex::unit(m, j), l[(i, j)])))
            })
            .collect();
        let mut out = Polynomial::zero(m);
        for (alpha, &c) in &self.terms {
            let mut term = Polynomial::constant(m, c);
            for (i, &e) in alpha.exponents().iter().enumerate() {
                term = &term * &images[i].pow(e);
            }
            out = &out + &term;
        }
        out
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (a, &c) in &rhs.terms {
            out.add_term(a.clone(), c);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = Polynomial::zero(self.nvars);
        for (a, &c) in &self.terms {
            for (b, &e) in &rhs.terms {
                out.add_term(a + b, c * e);
            }
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (alpha, &c)) in self.terms.iter().enumerate() {
            let mag = if idx == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
                c.abs()
            } else {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
                c.abs()
            };
            write!(f, "{mag}")?;
            if alpha.degree() > 0 {
                write!(f, " *")?;
                for (i, &e) in alpha.exponents().iter().enumerate() {
                    match e {
                        0 => {}
                        1 => write!(f, " x{}", i + 1)?,
                        _ => write!(f, " x{}^{}", i + 1, e)?,
                    }
                }
            }
        }
        Ok(())
    }
}

/// Polynomial immersion `ℝ^d → ℝ^n`, one polynomial per output coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMap {
    d: usize,
    components: Vec<Polynomial>,
}

impl PolynomialMap {
    pub fn new(d: usize, components: Vec<Polynomial>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension("maps need at least one variable".into()));
        }
        if components.is_empty() {
            return Err(Error::InvalidDimension("maps need at least one component".into()));
        }
        if let Some(bad) = components.iter().find(|p| p.nvars() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.nvars() });
        }
        Ok(Self { d, components })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn evaluate(&self, t: &[f64]) -> Vec<f64> {
        self.components.iter().map(|p| p.evaluate(t)).collect()
    }

    /// `∂^α f`, componentwise.
    pub fn derivative(&self, alpha: &MultiIndex) -> PolynomialMap {
        PolynomialMap {
            d: self.d,
            components: self.components.iter().map(|p| p.derivative(alpha)).collect(),
        }
    }

    /// All `∂^α f(p)` with `1 ≤ |α| ≤ order`.
    pub fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        if p.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: p.len() });
        }
        if order == 0 {
            return Err(Error::InvalidDimension("jet order must be at least 1".into()));
        }
        let count = (crate::index::poly_space_dim(self.d, order) - 1) as usize;
        let entries = graded_monomials(self.d, count)
            .into_iter()
            .map(|alpha| {
                let v = self.components.iter().map(|c| c.derivative(&alpha).evaluate(p)).collect();
                (alpha, v)
            })
            .collect();
        Ok(Jet { point: p.to_vec(), order, n: self.n(), entries })
    }

    /// Source reparameterization `t ↦ f(L t)`.
    pub fn compose_linear(&self, l: &DMatrix<f64>) -> Result<PolynomialMap> {
        if l.nrows() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: l.nrows() });
        }
        PolynomialMap::new(l.ncols(), self.components.iter().map(|c| c.compose_linear(l)).collect())
    }

    /// Target transformation `t ↦ A f(t) + b`.
    pub fn affine_image(&self, a: &DMatrix<f64>, b: &[f64]) -> Result<PolynomialMap> {
        if a.ncols() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: a.ncols() });
        }
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
        }
        let components = (0..a.nrows())
            .map(|i| {
                self.components.iter().enumerate().fold(
                    Polynomial::constant(self.d, b[i]),
                    |acc, (j, c)| &acc + &c.scale(a[(i, j)]),
                )
            })
            .collect();
        PolynomialMap::new(self.d, components)
    }

    /// Render in the line-oriented text format read by [`PolynomialMap::parse`].
    pub fn to_text(&self) -> String {
        let mut s = format!("d = {}\n", self.d);
        for c in &self.components {
            s.push_str(&c.to_string());
            s.push('\n');
        }
        s
    }

    /// Parse the text format: optional `d = N` header, `#` comments, then one
    /// component per line with terms like `-1.5 * x1^2 x2 + 3 * x2`.
    ///
    /// Without a header the variable count is the largest index used (at
    /// least 1).
    pub fn parse(text: &str) -> Result<PolynomialMap> {
        let mut declared: Option<usize> = None;
        let mut rows: Vec<(usize, Vec<(MultiIndexSparse, f64)>)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('d') {
                let rest = rest.trim_start();
                if let Some(value) = rest.strip_prefix('=') {
                    if declared.is_some() || !rows.is_empty() {
                        return Err(Error::Parse {
                            line: lineno + 1,
                            message: "the `d = N` header must come first".into(),
                        });
                    }
                    let d = value.trim().parse::<usize>().map_err(|e| Error::Parse {
                        line: lineno + 1,
                        message: format!("bad dimension: {e}"),
                    })?;
                    declared = Some(d);
                    continue;
                }
            }
            let terms = parse_line(line).map_err(|message| Error::Parse { line: lineno + 1, message })?;
            rows.push((lineno + 1, terms));
        }
        if rows.is_empty() {
            return Err(Error::Parse { line: 0, message: "no components".into() });
        }
        let used = rows
            .iter()
            .flat_map(|(_, t)| t.iter().flat_map(|(m, _)| m.iter().map(|&(v, _)| v + 1)))
            .max()
            .unwrap_or(1);
        let d = match declared {
            Some(d) if d < used => {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("variable x{used} used but d = {d}"),
                })
            }
            Some(d) => d,
            None => used.max(1),
        };
        let components = rows
            .into_iter()
            .map(|(_, terms)| {
                Polynomial::from_terms(
                    d,
                    terms.into_iter().map(|(sparse, c)| {
                        let mut e = vec![0u32; d];
                        for (v, p) in sparse {
                            e[v] += p;
                        }
                        (MultiIndex::new(e), c)
                    }),
                )
            })
            .collect();
        PolynomialMap::new(d, components)
    }
}

type MultiIndexSparse = Vec<(usize, u32)>;

fn parse_line(line: &str) -> std::result::Result<Vec<(MultiIndexSparse, f64)>, String> {
    let chars: Vec<char> = line.chars().collect();
    let mut pos = 0;
    let mut terms = Vec::new();
    let skip_ws = |pos: &mut usize| {
        while *pos < chars.len() && chars[*pos].is_whitespace() {
            *pos += 1;
        }
    };
    let mut first = true;
    loop {
        skip_ws(&mut pos);
        if pos >= chars.len() {
            break;
        }
        let mut sign = 1.0;
        if chars[pos] == '+' || chars[pos] == '-' {
            if chars[pos] == '-' {
                sign = -1.0;
            }
            pos += 1;
            skip_ws(&mut pos);
        } else if !first {
            return Err(format!("expected '+' or '-' at column {}", pos + 1));
        }
        first = false;
        // coefficient
        let start = pos;
        while pos < chars.len()
            && (chars[pos].is_ascii_digit()
                || chars[pos] == '.'
                || ((chars[pos] == 'e' || chars[pos] == 'E') && pos > start)
                || ((chars[pos] == '+' || chars[pos] == '-')
                    && pos > start
                    && (chars[pos - 1] == 'e' || chars[pos - 1] == 'E')))
        {
            pos += 1;
        }
        let coef = if pos > start {
            let s: String = chars[start..pos].iter().collect();
            s.parse::<f64>().map_err(|e| format!("bad coefficient '{s}': {e}"))?
        } else {
            1.0
        };
        skip_ws(&mut pos);
        let had_coef = pos > start;
        if pos < chars.len() && chars[pos] == '*' {
            if !had_coef {
                return Err(format!("'*' without coefficient at column {}", pos + 1));
            }
            pos += 1;
        }
        let mut mono: MultiIndexSparse = Vec::new();
        loop {
            skip_ws(&mut pos);
            if pos < chars.len() && chars[pos] == '*' {
                pos += 1;
                skip_ws(&mut pos);
            }
            if pos >= chars.len() || chars[pos] != 'x' {
                break;
            }
            pos += 1;
            let vstart = pos;
            while pos < chars.len() && chars[pos].is_ascii_digit() {
                pos += 1;
            }
            if vstart == pos {
                return Err(format!("missing variable index at column {}", pos + 1));
            }
            let var: usize = chars[vstart..pos].iter().collect::<String>().parse().unwrap();
            if var == 0 {
                return Err("variables are numbered from x1".into());
            }
            let mut power = 1u32;
            skip_ws(&mut pos);
            if pos < chars.len() && chars[pos] == '^' {
                pos += 1;
                skip_ws(&mut pos);
                let pstart = pos;
                while pos < chars.len() && chars[pos].is_ascii_digit() {
                    pos += 1;
                }
                if pstart == pos {
                    return Err(format!("missing exponent at column {}", pos + 1));
                }
                power = chars[pstart..pos]
                    .iter()
                    .collect::<String>()
                    .parse()
                    .map_err(|e| format!("bad exponent: {e}"))?;
            }
            mono.push((var - 1, power));
        }
        if !had_coef && mono.is_empty() {
            return Err(format!("empty term at column {}", pos + 1));
        }
        terms.push((mono, sign * coef));
    }
    if terms.is_empty() {
        return Err("empty component".into());
    }
    Ok(terms)
}

/// Exact derivatives `∂^α f(p)` of a map at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    point: Vec<f64>,
    order: usize,
    n: usize,
    entries: BTreeMap<MultiIndex, Vec<f64>>,
}

impl Jet {
    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn d(&self) -> usize {
        self.point.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `∂^α f(p)`; `None` when `|α|` is zero or above the jet order.
    pub fn entry(&self, alpha: &MultiIndex) -> Option<&[f64]> {
        self.entries.get(alpha).map(Vec::as_slice)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&MultiIndex, &[f64])> {
        self.entries.iter().map(|(a, v)| (a, v.as_slice()))
    }

    /// Iterated directional derivative `D_{u_1} ⋯ D_{u_κ} f(p)` for constant
    /// directions.
    pub fn directional_column(&self, directions: &[Vec<f64>]) -> Result<Vec<f64>> {
        let k = directions.len();
        if k > self.order {
            return Err(Error::OrderExceeded { requested: k, available: self.order });
        }
        let d = self.d();
        if let Some(bad) = directions.iter().find(|u| u.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
        let mut out = vec![0.0; self.n];
        if k == 0 {
            return Ok(out);
        }
        let mut counts = vec![0u32; d];
        self.accumulate(directions, 0, 1.0, &mut counts, &mut out);
        Ok(out)
    }

    fn accumulate(&self, dirs: &[Vec<f64>], slot: usize, weight: f64, counts: &mut [u32], out: &mut [f64]) {
        if slot == dirs.len() {
            let alpha = MultiIndex::new(counts.to_vec());
            let col = &self.entries[&alpha];
            for (o, c) in out.iter_mut().zip(col) {
                *o += weight * c;
            }
            return;
        }
        for (i, &u) in dirs[slot].iter().enumerate() {
            if u == 0.0 {
                continue;
            }
            counts[i] += 1;
            self.accumulate(dirs, slot + 1, weight * u, counts, out);
            counts[i] -= 1;
        }
    }
}

/// Free-function form of [`Jet::directional_column`].
pub fn directional_column(jet: &Jet, directions: &[Vec<f64>]) -> Result<Vec<f64>> {
    jet.directional_column(directions)
}

/// Free-function form of [`Polynomial::derivative`].
pub fn partial_derivative(f: &Polynomial, alpha: &MultiIndex) -> Polynomial {
    f.derivative(alpha)
}

/// Graph `t ↦ (t_1, …, t_d, φ(t))`.
pub fn graph_embedding(phi: &Polynomial) -> PolynomialMap {
    let d = phi.nvars();
    let mut components: Vec<Polynomial> = (0..d).map(|i| Polynomial::variable(d, i)).collect();
    components.push(phi.clone());
    PolynomialMap::new(d, components).expect("graph components share the variable count")
}

/// Map whose components are the first `n` graded-lex nonconstant monomials.
pub fn model_embedding(d: usize, n: usize) -> Result<PolynomialMap> {
    crate::index::kappa_sequence(d, n)?;
    let components = graded_monomials(d, n).into_iter().map(|a| Polynomial::monomial(a, 1.0)).collect();
    PolynomialMap::new(d, components)
}
