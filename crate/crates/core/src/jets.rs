//! Truncated multivariate Taylor arithmetic (jets) up to order 3.
//!
//! A [`Jet`] stores the Taylor coefficients `c_m = (∂^m f)(p) / m!` of a
//! smooth function at a point for every multi-index `m` with `|m| <= order`.
//! Arithmetic is exact up to floating point rounding: there is no step size
//! and no truncation error in the retained coefficients.
//!
//! Coefficients live in a dense array indexed by a [`Layout`], which orders
//! monomials by total degree. Because of that ordering a jet of order `k`
//! uses a prefix of the order-3 layout, so one layout per variable count is
//! shared by jets of every order.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

/// Highest order supported by the engine.
pub const MAX_ORDER: u8 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jet shape mismatch: ({lhs_vars} vars, order {lhs_order}) vs ({rhs_vars} vars, order {rhs_order})")]
    Mismatch {
        lhs_vars: usize,
        lhs_order: u8,
        rhs_vars: usize,
        rhs_order: u8,
    },
    #[error("division by a jet with zero value")]
    DivisionByZero,
    #[error("{func} is undefined at {value}")]
    Domain { func: &'static str, value: f64 },
    #[error("multi-index {index:?} out of range for a jet with {nvars} vars and order {order}")]
    IndexOutOfRange {
        index: Vec<u8>,
        nvars: usize,
        order: u8,
    },
    #[error("requested order {0} exceeds the maximum of 3")]
    OrderTooHigh(u8),
    #[error("cannot differentiate an order-0 jet")]
    NoDerivative,
}

/// Monomial indexing shared by all jets with the same variable count.
#[derive(Debug)]
pub struct Layout {
    nvars: usize,
    monomials: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// Number of monomials with degree `<= k`, for `k = 0..=3`.
    count: [usize; 4],
    /// `(lhs, rhs, target)` coefficient products, sorted by target.
    products: Vec<(usize, usize, usize)>,
    /// `products[..product_end[k]]` covers every target of degree `<= k`.
    product_end: [usize; 4],
    /// For each variable, `(source, factor)` per target monomial of degree
    /// `<= 2`: `∂_i` maps `c[source] * factor` into the target slot.
    derivative: Vec<Vec<(usize, f64)>>,
}

impl Layout {
    fn build(nvars: usize) -> Layout {
        let mut monomials: Vec<Vec<u8>> = Vec::new();
        let mut count = [0usize; 4];
        for degree in 0..=MAX_ORDER {
            let mut current = Vec::new();
            push_monomials(nvars, degree, 0, &mut vec![0u8; nvars], &mut current);
            // graded reverse-lex keeps x1 first within a degree
            current.sort_by(|a, b| b.cmp(a));
            monomials.extend(current);
            count[degree as usize] = monomials.len();
        }
        let index: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();

        let mut products = Vec::new();
        for (a, ma) in monomials.iter().enumerate() {
            for (b, mb) in monomials.iter().enumerate() {
                let sum: Vec<u8> = ma.iter().zip(mb).map(|(x, y)| x + y).collect();
                if let Some(&t) = index.get(&sum) {
                    products.push((a, b, t));
                }
            }
        }
        products.sort_by_key(|&(a, b, t)| (t, a, b));
        let mut product_end = [0usize; 4];
        for (k, end) in product_end.iter_mut().enumerate() {
            *end = products.partition_point(|&(_, _, t)| t < count[k]);
        }

        let derivative = (0..nvars)
            .map(|var| {
                monomials[..count[2]]
                    .iter()
                    .map(|m| {
                        let mut up = m.clone();
                        up[var] += 1;
                        (index[&up], f64::from(up[var]))
                    })
                    .collect()
            })
            .collect();

        Layout {
            nvars,
            monomials,
            index,
            count,
            products,
            product_end,
            derivative,
        }
    }

    pub fn for_vars(nvars: usize) -> Arc<Layout> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Layout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("layout cache poisoned");
        guard
            .entry(nvars)
            .or_insert_with(|| Arc::new(Layout::build(nvars)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self, order: u8) -> usize {
        self.count[order as usize]
    }

    pub fn monomial(&self, i: usize) -> &[u8] {
        &self.monomials[i]
    }
}

fn push_monomials(nvars: usize, remaining: u8, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos + 1 == nvars || nvars == 0 {
        if nvars > 0 {
            cur[pos] = remaining;
            out.push(cur.clone());
            cur[pos] = 0;
        } else if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for k in (0..=remaining).rev() {
        cur[pos] = k;
        push_monomials(nvars, remaining - k, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// Elementary functions that jets can be composed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElemFn {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
}

impl ElemFn {
    pub const ALL: [ElemFn; 9] = [
        ElemFn::Sin,
        ElemFn::Cos,
        ElemFn::Tan,
        ElemFn::Exp,
        ElemFn::Log,
        ElemFn::Sqrt,
        ElemFn::Sinh,
        ElemFn::Cosh,
        ElemFn::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ElemFn::Sin => "sin",
            ElemFn::Cos => "cos",
            ElemFn::Tan => "tan",
            ElemFn::Exp => "exp",
            ElemFn::Log => "log",
            ElemFn::Sqrt => "sqrt",
            ElemFn::Sinh => "sinh",
            ElemFn::Cosh => "cosh",
            ElemFn::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<ElemFn> {
        ElemFn::ALL.iter().copied().find(|f| f.name() == name)
    }

    /// Value and first three derivatives at `x`.
    fn derivatives(self, x: f64, order: u8) -> Result<[f64; 4], JetError> {
        let domain = |ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(JetError::Domain {
                    func: self.name(),
                    value: x,
                })
            }
        };
        Ok(match self {
            ElemFn::Sin => {
                let (s, c) = x.sin_cos();
                [s, c, -s, -c]
            }
            ElemFn::Cos => {
                let (s, c) = x.sin_cos();
                [c, -s, -c, s]
            }
            ElemFn::Tan => {
                domain(x.cos().abs() > 1e-300)?;
                let t = x.tan();
                let sec2 = 1.0 + t * t;
                [t, sec2, 2.0 * t * sec2, sec2 * (2.0 + 6.0 * t * t)]
            }
            ElemFn::Exp => {
                let e = x.exp();
                [e; 4]
            }
            ElemFn::Log => {
                domain(x > 0.0)?;
                [x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)]
            }
            ElemFn::Sqrt => {
                domain(if order == 0 { x >= 0.0 } else { x > 0.0 })?;
                let r = x.sqrt();
                if order == 0 {
                    [r, 0.0, 0.0, 0.0]
                } else {
                    [
                        r,
                        0.5 / r,
                        -0.25 / (r * x),
                        0.375 / (r * x * x),
                    ]
                }
            }
            ElemFn::Sinh => {
                let (s, c) = (x.sinh(), x.cosh());
                [s, c, s, c]
            }
            ElemFn::Cosh => {
                let (s, c) = (x.sinh(), x.cosh());
                [c, s, c, s]
            }
            ElemFn::Tanh => {
                let t = x.tanh();
                let s = 1.0 - t * t;
                [t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0)]
            }
        })
    }
}

impl fmt::Display for ElemFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Arithmetic operation selector for [`Jet::arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Truncated Taylor expansion of a scalar function of `nvars` variables.
#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    order: u8,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.nvars())
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.nvars() == other.nvars() && self.order == other.order && self.coeffs == other.coeffs
    }
}

impl Jet {
    pub fn constant(value: f64, nvars: usize, order: u8) -> Jet {
        assert!(order <= MAX_ORDER, "jet order capped at 3");
        let layout = Layout::for_vars(nvars);
        let mut coeffs = vec![0.0; layout.len(order)];
        coeffs[0] = value;
        Jet {
            layout,
            order,
            coeffs,
        }
    }

    /// The coordinate function `x_var` expanded at `value`.
    pub fn variable(value: f64, var: usize, nvars: usize, order: u8) -> Jet {
        assert!(var < nvars, "variable index out of range");
        let mut jet = Jet::constant(value, nvars, order);
        if order >= 1 {
            jet.coeffs[1 + var] = 1.0;
        }
        jet
    }

    /// Jets for every coordinate at `point`.
    pub fn variables(point: &[f64], order: u8) -> Vec<Jet> {
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(v, i, point.len(), order))
            .collect()
    }

    /// A jet of the same shape as `self` holding the constant `value`.
    pub fn constant_like(&self, value: f64) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        coeffs[0] = value;
        Jet {
            layout: self.layout.clone(),
            order: self.order,
            coeffs,
        }
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Raw Taylor coefficients in layout order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// First partial derivative with respect to `var` at the expansion point.
    pub fn partial(&self, var: usize) -> f64 {
        if self.order == 0 {
            0.0
        } else {
            self.coeffs[1 + var]
        }
    }

    /// Gradient at the expansion point.
    pub fn gradient(&self) -> Vec<f64> {
        (0..self.nvars()).map(|i| self.partial(i)).collect()
    }

    /// The partial derivative `∂^|m| f / ∂x^m` (not the Taylor coefficient).
    pub fn extract(&self, multi_index: &[u8]) -> Result<f64, JetError> {
        let degree: u32 = multi_index.iter().map(|&k| u32::from(k)).sum();
        let out_of_range = || JetError::IndexOutOfRange {
            index: multi_index.to_vec(),
            nvars: self.nvars(),
            order: self.order,
        };
        if multi_index.len() != self.nvars() || degree > u32::from(self.order) {
            return Err(out_of_range());
        }
        let i = *self.layout.index.get(multi_index).ok_or_else(out_of_range)?;
        let factorial: f64 = multi_index
            .iter()
            .map(|&k| (1..=k).map(f64::from).product::<f64>())
            .product();
        Ok(self.coeffs[i] * factorial)
    }

    /// Second partial `∂²f/∂x_i∂x_j`.
    pub fn second(&self, i: usize, j: usize) -> f64 {
        if self.order < 2 {
            return 0.0;
        }
        let mut m = vec![0u8; self.nvars()];
        m[i] += 1;
        m[j] += 1;
        self.extract(&m).unwrap_or(0.0)
    }

    pub fn truncate(&self, order: u8) -> Jet {
        if order >= self.order {
            return self.clone();
        }
        Jet {
            layout: self.layout.clone(),
            order,
            coeffs: self.coeffs[..self.layout.len(order)].to_vec(),
        }
    }

    /// Derivative with respect to `var`, as a jet one order lower.
    pub fn diff(&self, var: usize) -> Result<Jet, JetError> {
        if self.order == 0 {
            return Err(JetError::NoDerivative);
        }
        let order = self.order - 1;
        let n = self.layout.len(order);
        let table = &self.layout.derivative[var];
        let coeffs = (0..n)
            .map(|t| {
                let (src, factor) = table[t];
                self.coeffs[src] * factor
            })
            .collect();
        Ok(Jet {
            layout: self.layout.clone(),
            order,
            coeffs,
        })
    }

    fn check_shape(&self, other: &Jet) -> Result<(), JetError> {
        if self.nvars() != other.nvars() || self.order != other.order {
            return Err(JetError::Mismatch {
                lhs_vars: self.nvars(),
                lhs_order: self.order,
                rhs_vars: other.nvars(),
                rhs_order: other.order,
            });
        }
        Ok(())
    }

    /// Strict binary arithmetic: both operands must share variable count and order.
    pub fn arith(&self, other: &Jet, op: ArithOp) -> Result<Jet, JetError> {
        self.check_shape(other)?;
        Ok(match op {
            ArithOp::Add => self + other,
            ArithOp::Sub => self - other,
            ArithOp::Mul => self * other,
            ArithOp::Div => self.div(other)?,
        })
    }

    pub fn div(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self * &other.recip()?)
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let x = self.value();
        if x == 0.0 {
            return Err(JetError::DivisionByZero);
        }
        let r = 1.0 / x;
        Ok(self.compose_with(&[r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]))
    }

    pub fn scale(&self, k: f64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    pub fn add_scalar(&self, k: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += k;
        out
    }

    /// Integer power; negative exponents go through the reciprocal.
    pub fn powi(&self, exp: i32) -> Result<Jet, JetError> {
        if exp < 0 {
            return self.recip()?.powi(-exp);
        }
        let mut result = self.constant_like(1.0);
        let mut base = self.clone();
        let mut e = exp as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Ok(result)
    }

    pub fn compose(&self, f: ElemFn) -> Result<Jet, JetError> {
        let d = f.derivatives(self.value(), self.order)?;
        Ok(self.compose_with(&d))
    }

    /// `φ(a0 + N) = Σ φ^(k)(a0)/k! · N^k` with `N` the non-constant part.
    fn compose_with(&self, derivs: &[f64; 4]) -> Jet {
        let mut nil = self.clone();
        nil.coeffs[0] = 0.0;
        let mut out = self.constant_like(derivs[0]);
        let mut power = self.constant_like(1.0);
        let mut factorial = 1.0;
        for (k, d) in derivs.iter().enumerate().take(self.order as usize + 1).skip(1) {
            power = &power * &nil;
            factorial *= k as f64;
            let c = d / factorial;
            for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                *o += c * p;
            }
        }
        out
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        assert_eq!(self.nvars(), other.nvars(), "jet variable count mismatch");
        let order = self.order.min(other.order);
        let n = self.layout.len(order);
        Jet {
            layout: self.layout.clone(),
            order,
            coeffs: (0..n).map(|i| f(self.coeffs[i], other.coeffs[i])).collect(),
        }
    }

    fn product(&self, other: &Jet) -> Jet {
        assert_eq!(self.nvars(), other.nvars(), "jet variable count mismatch");
        let order = self.order.min(other.order);
        let n = self.layout.len(order);
        let mut coeffs = vec![0.0; n];
        for &(a, b, t) in &self.layout.products[..self.layout.product_end[order as usize]] {
            coeffs[t] += self.coeffs[a] * other.coeffs[b];
        }
        Jet {
            layout: self.layout.clone(),
            order,
            coeffs,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }
}

// Operator forms truncate to the lower of the two orders; `arith` is the strict variant.
impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

/// Sum of jets; `None` for an empty iterator.
pub fn sum<'a>(jets: impl IntoIterator<Item = &'a Jet>) -> Option<Jet> {
    let mut it = jets.into_iter();
    let first = it.next()?.clone();
    Some(it.fold(first, |acc, j| &acc + j))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn layout_counts() {
        let l = Layout::for_vars(4);
        assert_eq!(l.len(0), 1);
        assert_eq!(l.len(1), 5);
        assert_eq!(l.len(2), 15);
        assert_eq!(l.len(3), 35);
        assert_eq!(l.monomial(1), &[1, 0, 0, 0]);
    }

    #[test]
    fn constant_product() {
        let a = Jet::constant(2.0, 2, 3);
        let b = Jet::constant(3.0, 2, 3);
        let p = a.arith(&b, ArithOp::Mul).unwrap();
        assert_eq!(p.value(), 6.0);
        assert!(p.coeffs()[1..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn square_derivatives() {
        let x = Jet::variable(5.0, 0, 1, 2);
        let sq = x.arith(&x, ArithOp::Mul).unwrap();
        assert_eq!(sq.value(), 25.0);
        assert_eq!(sq.extract(&[1]).unwrap(), 10.0);
        assert_eq!(sq.extract(&[2]).unwrap(), 2.0);
    }

    #[test]
    fn reciprocal_of_one_plus_square() {
        // f = (1+x²)⁻¹: f' = -2x f², f'' = (6x²-2) f³; at x=1: 0.5, -0.5, 0.5
        let x = Jet::variable(1.0, 0, 1, 2);
        let den = (&x * &x).add_scalar(1.0);
        let f = Jet::constant(1.0, 1, 2).arith(&den, ArithOp::Div).unwrap();
        assert!(close(f.value(), 0.5));
        assert!(close(f.extract(&[1]).unwrap(), -0.5));
        assert!(close(f.extract(&[2]).unwrap(), 0.5));
    }

    #[test]
    fn mismatch_and_zero_division() {
        let a = Jet::constant(1.0, 2, 3);
        let b = Jet::constant(1.0, 2, 2);
        assert!(matches!(a.arith(&b, ArithOp::Add), Err(JetError::Mismatch { .. })));
        let z = Jet::constant(0.0, 2, 3);
        assert_eq!(a.arith(&z, ArithOp::Div), Err(JetError::DivisionByZero));
    }

    #[test]
    fn exp_series() {
        let x = Jet::variable(0.0, 0, 1, 3);
        let e = x.compose(ElemFn::Exp).unwrap();
        for k in 0..=3u8 {
            assert!(close(e.extract(&[k]).unwrap(), 1.0));
        }
        let s = Jet::constant(0.0, 1, 3).compose(ElemFn::Sin).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn log_domain() {
        let x = Jet::variable(-1.0, 0, 1, 3);
        assert!(matches!(x.compose(ElemFn::Log), Err(JetError::Domain { func: "log", .. })));
    }

    #[test]
    fn extract_conventions() {
        let c = Jet::constant(3.0, 2, 2);
        assert_eq!(c.extract(&[1, 0]).unwrap(), 0.0);
        let x = Jet::variables(&[2.0, 3.0], 2);
        let p = &x[0] * &x[1];
        assert_eq!(p.extract(&[1, 1]).unwrap(), 1.0);
        let s = Jet::variable(std::f64::consts::FRAC_PI_2, 0, 2, 2)
            .compose(ElemFn::Sin)
            .unwrap();
        assert!(close(s.extract(&[2, 0]).unwrap(), -1.0));
        assert!(matches!(s.extract(&[2, 1]), Err(JetError::IndexOutOfRange { .. })));
        assert!(matches!(s.extract(&[1]), Err(JetError::IndexOutOfRange { .. })));
    }

    #[test]
    fn third_derivative_of_composite() {
        // d³/dx³ sin(x²) = -12x sin(x²) - 8x³ cos(x²)
        let x = Jet::variable(0.7, 0, 1, 3);
        let f = (&x * &x).compose(ElemFn::Sin).unwrap();
        let x0: f64 = 0.7;
        let want = -12.0 * x0 * (x0 * x0).sin() - 8.0 * x0.powi(3) * (x0 * x0).cos();
        assert!(close(f.extract(&[3]).unwrap(), want));
    }

    #[test]
    fn diff_lowers_order() {
        let x = Jet::variables(&[1.5, -0.5], 3);
        let f = &(&x[0] * &x[0]) * &x[1];
        let fx = f.diff(0).unwrap();
        assert_eq!(fx.order(), 2);
        assert!(close(fx.value(), 2.0 * 1.5 * -0.5));
        assert!(close(fx.second(0, 1), 2.0));
        assert_eq!(Jet::constant(1.0, 1, 0).diff(0), Err(JetError::NoDerivative));
    }

    #[test]
    fn powi_matches_repeated_product() {
        let x = Jet::variables(&[0.3, 1.2], 3);
        let base = &x[0] + &x[1];
        let p3 = base.powi(3).unwrap();
        let manual = &(&base * &base) * &base;
        for (a, b) in p3.coeffs().iter().zip(manual.coeffs()) {
            assert!(close(*a, *b));
        }
        let inv = base.powi(-2).unwrap();
        let one = &inv * &(&base * &base);
        assert!(close(one.value(), 1.0));
        assert!(one.coeffs()[1..].iter().all(|c| c.abs() < 1e-12));
    }
}
