//! Truncated formal-distribution calculus over the Block type Lie algebra.
//!
//! The Lie algebra has basis `L_{α,i}` with
//! `[L_{α,i}, L_{β,j}] = (β(i+1) − α(j+1)) L_{α+β,i+j}`.
//! Doubly infinite series in `z, w` are stored on the box `[−M, M]²` of
//! exponents, where `M` is the policy depth. Every operation that shifts
//! exponents (multiplying by `z − w`, differentiating, the terms of
//! `e^{λ(z−w)}`) shrinks the box of exactly-known coefficients and charges the
//! shift to the guard budget `K`. Assertions read only the trusted window
//! `[−M+K, M−K]`, which stays exact as long as the budget is not exceeded.
//!
//! Products of a w-series with a δ-derivative are exact only on a diagonal
//! band of `z`-exponent plus `w`-exponent; such results carry that band and
//! comparisons skip points outside it.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::ratpoly::{format_rational, rint, MPoly, Rational, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormalError {
    #[error("invalid truncation policy: depth {depth}, guard {guard} (need 0 <= guard < depth)")]
    InvalidPolicy { depth: u32, guard: u32 },
    #[error("operands use different truncation policies")]
    PolicyMismatch,
    #[error("guard exhausted: operation needs {needed} but the budget is {budget}")]
    GuardExhausted { needed: u32, budget: u32 },
    #[error("distribution is not local of order {order} on the trusted window")]
    NotLocal { order: u32 },
    #[error("delta expansion does not reproduce the distribution at z^{zexp} w^{wexp}")]
    ReconstructionMismatch { zexp: i64, wexp: i64 },
    #[error("series is not a ∂-polynomial combination of generators: {0}")]
    NotInGeneratorSpan(String),
    #[error("product of two Lie-algebra-valued coefficients is undefined")]
    NonScalarProduct,
    #[error("operation does not accept band-limited operands")]
    BandedOperand,
}

pub type Result<T> = std::result::Result<T, FormalError>;

/// Basis element `L_{α,i}` of the Block type Lie algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LBasisSymbol {
    pub alpha: i64,
    pub i: i64,
}

impl LBasisSymbol {
    pub fn new(alpha: i64, i: i64) -> Self {
        Self { alpha, i }
    }

    /// The defining bracket, returned as (structure constant, result symbol).
    pub fn bracket(self, other: LBasisSymbol) -> (i64, LBasisSymbol) {
        let c = other.alpha * (self.i + 1) - self.alpha * (other.i + 1);
        (
            c,
            LBasisSymbol::new(self.alpha + other.alpha, self.i + other.i),
        )
    }
}

/// A coefficient slot: either the scalar unit or a Lie algebra basis element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    One,
    L(LBasisSymbol),
}

/// Finite combination of symbols with polynomial (possibly λ-dependent)
/// coefficients. Equality is syntactic on the free span.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymbolCombo {
    terms: BTreeMap<Symbol, MPoly>,
}

impl SymbolCombo {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::scalar(MPoly::one())
    }

    pub fn scalar(c: MPoly) -> Self {
        Self::single(Symbol::One, c)
    }

    pub fn symbol(alpha: i64, i: i64) -> Self {
        Self::single(Symbol::L(LBasisSymbol::new(alpha, i)), MPoly::one())
    }

    pub fn single(sym: Symbol, c: MPoly) -> Self {
        let mut out = Self::zero();
        out.add_term(sym, &c);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Symbol, &MPoly)> {
        self.terms.iter()
    }

    pub fn coeff(&self, sym: &Symbol) -> MPoly {
        self.terms.get(sym).cloned().unwrap_or_default()
    }

    pub fn add_term(&mut self, sym: Symbol, c: &MPoly) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(sym).or_default();
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&sym);
        }
    }

    pub fn add(&mut self, other: &SymbolCombo) {
        for (s, c) in &other.terms {
            self.add_term(*s, c);
        }
    }

    pub fn scale(&self, c: &MPoly) -> SymbolCombo {
        let mut out = SymbolCombo::zero();
        for (s, a) in &self.terms {
            out.add_term(*s, &(a * c));
        }
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(&MPoly) -> MPoly) -> SymbolCombo {
        let mut out = SymbolCombo::zero();
        for (s, a) in &self.terms {
            out.add_term(*s, &f(a));
        }
        out
    }

    /// Bilinear extension of the Block bracket; scalars are central.
    pub fn bracket(&self, other: &SymbolCombo) -> SymbolCombo {
        let mut out = SymbolCombo::zero();
        for (sa, ca) in &self.terms {
            let Symbol::L(la) = sa else { continue };
            for (sb, cb) in &other.terms {
                let Symbol::L(lb) = sb else { continue };
                let (k, l) = la.bracket(*lb);
                if k != 0 {
                    out.add_term(Symbol::L(l), &(ca * cb).scale(&rint(k)));
                }
            }
        }
        out
    }

    /// Product where at least one factor is scalar.
    pub fn mul(&self, other: &SymbolCombo) -> Result<SymbolCombo> {
        let mut out = SymbolCombo::zero();
        for (sa, ca) in &self.terms {
            for (sb, cb) in &other.terms {
                let sym = match (sa, sb) {
                    (Symbol::One, s) | (s, Symbol::One) => *s,
                    _ => return Err(FormalError::NonScalarProduct),
                };
                out.add_term(sym, &(ca * cb));
            }
        }
        Ok(out)
    }
}

/// Exponent box depth `M` and guard budget `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TruncationPolicy {
    depth: u32,
    guard: u32,
}

impl TruncationPolicy {
    pub fn new(depth: u32, guard: u32) -> Result<Self> {
        if depth == 0 || guard >= depth {
            return Err(FormalError::InvalidPolicy { depth, guard });
        }
        Ok(Self { depth, guard })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn guard(&self) -> u32 {
        self.guard
    }

    /// Half-width of the trusted window.
    pub fn trusted_radius(&self) -> i64 {
        (self.depth - self.guard) as i64
    }

    pub fn trusted_range(&self) -> std::ops::RangeInclusive<i64> {
        -self.trusted_radius()..=self.trusted_radius()
    }

    fn charge(&self, consumed: u32, cost: u32) -> Result<u32> {
        let needed = consumed + cost;
        if needed > self.guard {
            Err(FormalError::GuardExhausted {
                needed,
                budget: self.guard,
            })
        } else {
            Ok(needed)
        }
    }
}

/// `n (n−1) ⋯ (n−k+1)`.
fn falling_factorial(n: i64, k: u32) -> i64 {
    (0..k as i64).map(|t| n - t).product()
}

fn binomial(n: u32, k: u32) -> i64 {
    (0..k as i64).fold(1, |acc, t| acc * (n as i64 - t) / (t + 1))
}

fn factorial(n: u32) -> BigInt {
    (1..=n as u64).map(BigInt::from).product()
}

fn in_band(band: Option<(i64, i64)>, x: i64) -> bool {
    band.is_none_or(|(lo, hi)| lo <= x && x <= hi)
}

fn shift_band(band: Option<(i64, i64)>, by: i64) -> Option<(i64, i64)> {
    band.map(|(lo, hi)| (lo + by, hi + by))
}

fn intersect_band(a: Option<(i64, i64)>, b: Option<(i64, i64)>) -> Option<(i64, i64)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some((l1, h1)), Some((l2, h2))) => Some((l1.max(l2), h1.min(h2))),
    }
}

/// One-variable truncated series `Σ_e c_e x^e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    coeffs: BTreeMap<i64, SymbolCombo>,
    policy: TruncationPolicy,
    consumed: u32,
    band: Option<(i64, i64)>,
}

impl Series {
    pub fn zero(policy: TruncationPolicy) -> Self {
        Self {
            coeffs: BTreeMap::new(),
            policy,
            consumed: 0,
            band: None,
        }
    }

    /// The constant series `1`.
    pub fn constant_one(policy: TruncationPolicy) -> Self {
        let mut s = Self::zero(policy);
        s.set(0, SymbolCombo::one());
        s
    }

    pub fn policy(&self) -> TruncationPolicy {
        self.policy
    }

    pub fn consumed(&self) -> u32 {
        self.consumed
    }

    fn radius(&self) -> i64 {
        (self.policy.depth - self.consumed) as i64
    }

    pub fn is_valid(&self, e: i64) -> bool {
        e.abs() <= self.radius() && in_band(self.band, e)
    }

    pub fn is_trusted(&self, e: i64) -> bool {
        e.abs() <= self.policy.trusted_radius() && in_band(self.band, e)
    }

    pub fn trusted_exponents(&self) -> impl Iterator<Item = i64> + '_ {
        self.policy.trusted_range().filter(|&e| self.is_trusted(e))
    }

    pub fn get(&self, e: i64) -> SymbolCombo {
        self.coeffs.get(&e).cloned().unwrap_or_default()
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, &SymbolCombo)> {
        self.coeffs.iter().map(|(e, c)| (*e, c))
    }

    fn set(&mut self, e: i64, c: SymbolCombo) {
        if c.is_zero() {
            self.coeffs.remove(&e);
        } else {
            self.coeffs.insert(e, c);
        }
    }

    fn accumulate(&mut self, e: i64, c: &SymbolCombo) {
        let mut slot = self.coeffs.remove(&e).unwrap_or_default();
        slot.add(c);
        self.set(e, slot);
    }

    fn prune(&mut self) {
        let r = self.radius();
        let band = self.band;
        self.coeffs
            .retain(|e, c| e.abs() <= r && in_band(band, *e) && !c.is_zero());
    }

    /// `L_α(x) = Σ_i L_{α,i−1} x^{−i−1}`: the coefficient of `x^e` is `L_{α,−e−2}`.
    pub fn generator(alpha: i64, policy: TruncationPolicy) -> Self {
        let mut s = Self::zero(policy);
        let m = policy.depth as i64;
        for e in -m..=m {
            s.set(e, SymbolCombo::symbol(alpha, -e - 2));
        }
        s
    }

    pub fn partial(&self) -> Result<Series> {
        let consumed = self.policy.charge(self.consumed, 1)?;
        let mut out = Series {
            coeffs: BTreeMap::new(),
            policy: self.policy,
            consumed,
            band: shift_band(self.band, -1),
        };
        for (&e, c) in &self.coeffs {
            if e != 0 {
                out.accumulate(e - 1, &c.scale(&MPoly::int(e)));
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn scale(&self, c: &MPoly) -> Series {
        let mut out = self.clone();
        out.coeffs = self
            .coeffs
            .iter()
            .map(|(e, s)| (*e, s.scale(c)))
            .filter(|(_, s)| !s.is_zero())
            .collect();
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(&MPoly) -> MPoly) -> Series {
        let mut out = self.clone();
        out.coeffs = self
            .coeffs
            .iter()
            .map(|(e, s)| (*e, s.map_coeffs(&f)))
            .filter(|(_, s)| !s.is_zero())
            .collect();
        out
    }

    pub fn add(&self, other: &Series) -> Result<Series> {
        if self.policy != other.policy {
            return Err(FormalError::PolicyMismatch);
        }
        let mut out = Series {
            coeffs: self.coeffs.clone(),
            policy: self.policy,
            consumed: self.consumed.max(other.consumed),
            band: intersect_band(self.band, other.band),
        };
        for (e, c) in &other.coeffs {
            out.accumulate(*e, c);
        }
        out.prune();
        Ok(out)
    }

    pub fn sub(&self, other: &Series) -> Result<Series> {
        self.add(&other.scale(&MPoly::int(-1)))
    }

    /// `c(w) · ∂_w^j δ(z,w)` (without the `1/j!`).
    ///
    /// At `z^a` the δ-derivative has the single term `ff(−a−1, j) w^{−a−1−j}`,
    /// so the product reads `c` at exponent `a+b+1+j`; the result is exact on
    /// the band where that exponent is valid.
    pub fn mul_delta_derivative(&self, j: u32) -> Result<Distribution> {
        let r = self.radius();
        let mut lo = -r;
        let mut hi = r;
        if let Some((bl, bh)) = self.band {
            lo = lo.max(bl);
            hi = hi.min(bh);
        }
        let shift = 1 + j as i64;
        let mut out = Distribution {
            coeffs: BTreeMap::new(),
            policy: self.policy,
            consumed: self.consumed,
            band: Some((lo - shift, hi - shift)),
        };
        for a in -r..=r {
            let ff = falling_factorial(-a - 1, j);
            if ff == 0 {
                continue;
            }
            for b in -r..=r {
                let idx = a + b + shift;
                if let Some(c) = self.coeffs.get(&idx) {
                    out.set((a, b), c.scale(&MPoly::int(ff)));
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// Exact equality on the trusted exponents valid for both operands.
    pub fn agrees_on_trusted(&self, other: &Series) -> bool {
        self.trusted_exponents()
            .filter(|&e| other.is_trusted(e))
            .all(|e| self.get(e) == other.get(e))
    }

    pub fn is_zero_on_trusted(&self) -> bool {
        self.trusted_exponents().all(|e| self.get(e).is_zero())
    }
}

/// Two-variable truncated distribution `Σ c_{a,b} z^a w^b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    coeffs: BTreeMap<(i64, i64), SymbolCombo>,
    policy: TruncationPolicy,
    consumed: u32,
    band: Option<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TermJson {
    pub alpha: Option<i64>,
    pub i: Option<i64>,
    pub coeff: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoeffJson {
    pub zexp: i64,
    pub wexp: i64,
    pub terms: Vec<TermJson>,
}

impl Distribution {
    pub fn zero(policy: TruncationPolicy) -> Self {
        Self {
            coeffs: BTreeMap::new(),
            policy,
            consumed: 0,
            band: None,
        }
    }

    /// The single term `c z^a w^b`.
    pub fn monomial(policy: TruncationPolicy, a: i64, b: i64, c: SymbolCombo) -> Self {
        let mut d = Self::zero(policy);
        d.set((a, b), c);
        d.prune();
        d
    }

    pub fn policy(&self) -> TruncationPolicy {
        self.policy
    }

    pub fn consumed(&self) -> u32 {
        self.consumed
    }

    fn radius(&self) -> i64 {
        (self.policy.depth - self.consumed) as i64
    }

    pub fn is_trusted(&self, a: i64, b: i64) -> bool {
        let t = self.policy.trusted_radius();
        a.abs() <= t && b.abs() <= t && in_band(self.band, a + b)
    }

    pub fn get(&self, a: i64, b: i64) -> SymbolCombo {
        self.coeffs.get(&(a, b)).cloned().unwrap_or_default()
    }

    pub fn entries(&self) -> impl Iterator<Item = ((i64, i64), &SymbolCombo)> {
        self.coeffs.iter().map(|(k, c)| (*k, c))
    }

    fn set(&mut self, key: (i64, i64), c: SymbolCombo) {
        if c.is_zero() {
            self.coeffs.remove(&key);
        } else {
            self.coeffs.insert(key, c);
        }
    }

    fn accumulate(&mut self, key: (i64, i64), c: &SymbolCombo) {
        let mut slot = self.coeffs.remove(&key).unwrap_or_default();
        slot.add(c);
        self.set(key, slot);
    }

    fn prune(&mut self) {
        let r = self.radius();
        let band = self.band;
        self.coeffs.retain(|(a, b), c| {
            a.abs() <= r && b.abs() <= r && in_band(band, a + b) && !c.is_zero()
        });
    }

    fn derived(&self, consumed: u32, band: Option<(i64, i64)>) -> Distribution {
        Distribution {
            coeffs: BTreeMap::new(),
            policy: self.policy,
            consumed,
            band,
        }
    }

    pub fn add(&self, other: &Distribution) -> Result<Distribution> {
        if self.policy != other.policy {
            return Err(FormalError::PolicyMismatch);
        }
        let mut out = self.derived(
            self.consumed.max(other.consumed),
            intersect_band(self.band, other.band),
        );
        out.coeffs = self.coeffs.clone();
        for (k, c) in &other.coeffs {
            out.accumulate(*k, c);
        }
        out.prune();
        Ok(out)
    }

    pub fn scale(&self, c: &MPoly) -> Distribution {
        let mut out = self.clone();
        out.coeffs = self
            .coeffs
            .iter()
            .map(|(k, s)| (*k, s.scale(c)))
            .filter(|(_, s)| !s.is_zero())
            .collect();
        out
    }

    pub fn partial_w(&self) -> Result<Distribution> {
        let consumed = self.policy.charge(self.consumed, 1)?;
        let mut out = self.derived(consumed, shift_band(self.band, -1));
        for (&(a, b), c) in &self.coeffs {
            if b != 0 {
                out.accumulate((a, b - 1), &c.scale(&MPoly::int(b)));
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn partial_z(&self) -> Result<Distribution> {
        let consumed = self.policy.charge(self.consumed, 1)?;
        let mut out = self.derived(consumed, shift_band(self.band, -1));
        for (&(a, b), c) in &self.coeffs {
            if a != 0 {
                out.accumulate((a - 1, b), &c.scale(&MPoly::int(a)));
            }
        }
        out.prune();
        Ok(out)
    }

    /// Multiplies by `(z−w)^m z^p w^q`; charges `m + |p| + |q|` to the guard.
    pub fn mul_zw_power(&self, m: u32, p: i64, q: i64) -> Result<Distribution> {
        let cost = m + p.unsigned_abs() as u32 + q.unsigned_abs() as u32;
        let consumed = self.policy.charge(self.consumed, cost)?;
        let mut out = self.derived(consumed, shift_band(self.band, m as i64 + p + q));
        let factors: Vec<(i64, i64, MPoly)> = (0..=m)
            .map(|k| {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                (
                    (m - k) as i64 + p,
                    k as i64 + q,
                    MPoly::int(sign * binomial(m, k)),
                )
            })
            .collect();
        for (&(a, b), c) in &self.coeffs {
            for (dz, dw, f) in &factors {
                out.accumulate((a + dz, b + dw), &c.scale(f));
            }
        }
        out.prune();
        Ok(out)
    }

    /// Coefficient of `z^{−1}`, as a series in `w`.
    pub fn residue_z(&self) -> Series {
        let mut out = Series {
            coeffs: BTreeMap::new(),
            policy: self.policy,
            consumed: self.consumed,
            band: shift_band(self.band, 1),
        };
        for (&(a, b), c) in &self.coeffs {
            if a == -1 {
                out.set(b, c.clone());
            }
        }
        out.prune();
        out
    }

    /// Coefficient of `w^{−1}`, as a series in `z`.
    pub fn residue_w(&self) -> Series {
        let mut out = Series {
            coeffs: BTreeMap::new(),
            policy: self.policy,
            consumed: self.consumed,
            band: shift_band(self.band, 1),
        };
        for (&(a, b), c) in &self.coeffs {
            if b == -1 {
                out.set(a, c.clone());
            }
        }
        out.prune();
        out
    }

    /// Exact equality on trusted points valid for both operands.
    pub fn agrees_on_trusted(&self, other: &Distribution) -> bool {
        self.first_disagreement(other).is_none()
    }

    pub fn first_disagreement(&self, other: &Distribution) -> Option<(i64, i64)> {
        let range = self.policy.trusted_range();
        for a in range.clone() {
            for b in range.clone() {
                if self.is_trusted(a, b)
                    && other.is_trusted(a, b)
                    && self.get(a, b) != other.get(a, b)
                {
                    return Some((a, b));
                }
            }
        }
        None
    }

    pub fn is_zero_on_trusted(&self) -> bool {
        self.coeffs
            .iter()
            .all(|(&(a, b), c)| !self.is_trusted(a, b) || c.is_zero())
    }

    /// Rendering as `[{zexp, wexp, terms: [{alpha, i, coeff}]}]`; scalar
    /// terms have null `alpha` and `i`.
    pub fn to_json(&self) -> Vec<CoeffJson> {
        self.coeffs
            .iter()
            .map(|(&(zexp, wexp), c)| CoeffJson {
                zexp,
                wexp,
                terms: c
                    .terms()
                    .map(|(s, k)| {
                        let (alpha, i) = match s {
                            Symbol::One => (None, None),
                            Symbol::L(l) => (Some(l.alpha), Some(l.i)),
                        };
                        TermJson {
                            alpha,
                            i,
                            coeff: k.to_string(),
                        }
                    })
                    .collect(),
            })
            .collect()
    }
}

/// `δ(z,w) = Σ_n z^{−n−1} w^n`, restricted to the exponent box.
pub fn dirac_delta(policy: TruncationPolicy) -> Distribution {
    let mut d = Distribution::zero(policy);
    let m = policy.depth as i64;
    for n in -m..m {
        d.set((-n - 1, n), SymbolCombo::one());
    }
    d
}

/// `L_α(x)` for the given policy.
pub fn generator_distribution(alpha: i64, policy: TruncationPolicy) -> Series {
    Series::generator(alpha, policy)
}

/// `[a(z), b(w)]` coefficient by coefficient through the Block bracket.
pub fn bracket_distributions(a: &Series, b: &Series) -> Result<Distribution> {
    if a.policy != b.policy {
        return Err(FormalError::PolicyMismatch);
    }
    if a.band.is_some() || b.band.is_some() {
        return Err(FormalError::BandedOperand);
    }
    let mut out = Distribution::zero(a.policy);
    out.consumed = a.consumed.max(b.consumed);
    for (&za, ca) in &a.coeffs {
        for (&wb, cb) in &b.coeffs {
            out.set((za, wb), ca.bracket(cb));
        }
    }
    out.prune();
    Ok(out)
}

/// `[L_α(z), L_β(w)]`.
pub fn generator_commutator(alpha: i64, beta: i64, policy: TruncationPolicy) -> Distribution {
    bracket_distributions(
        &Series::generator(alpha, policy),
        &Series::generator(beta, policy),
    )
    .expect("generator series share a policy and carry no band")
}

/// `Res_z (z−w)^j a(z,w)`.
pub fn residue_after_power(a: &Distribution, j: u32) -> Result<Series> {
    Ok(a.mul_zw_power(j, 0, 0)?.residue_z())
}

/// `L_α(w)_{(j)} L_β(w) = Res_z (z−w)^j [L_α(z), L_β(w)]`.
pub fn j_product(alpha: i64, beta: i64, j: u32, policy: TruncationPolicy) -> Result<Series> {
    residue_after_power(&generator_commutator(alpha, beta, policy), j)
}

/// `Φ^λ_{z,w} a = Res_z e^{λ(z−w)} a`, exponential truncated after `λ^cap`.
pub fn phi_lambda(a: &Distribution, cap: u32) -> Result<Series> {
    a.policy.charge(a.consumed, cap)?;
    let mut acc = Series::zero(a.policy);
    for j in 0..=cap {
        let weight = MPoly::lambda()
            .pow(j)
            .scale(&Rational::new(BigInt::one(), factorial(j)));
        acc = acc.add(&residue_after_power(a, j)?.scale(&weight))?;
    }
    Ok(acc)
}

/// `Res_w e^{μ(w−z)} a`, a series in `z` with μ-polynomial coefficients.
pub fn phi_transposed(a: &Distribution, cap: u32) -> Result<Series> {
    a.policy.charge(a.consumed, cap)?;
    let mut acc = Series::zero(a.policy);
    for j in 0..=cap {
        let sign = if j % 2 == 0 { 1 } else { -1 };
        let weight = MPoly::mu()
            .pow(j)
            .scale(&Rational::new(BigInt::from(sign), factorial(j)));
        let term = a.mul_zw_power(j, 0, 0)?.residue_w().scale(&weight);
        acc = acc.add(&term)?;
    }
    Ok(acc)
}

/// Replaces `μ^k` by `(−λ−∂)^k`, with `∂` differentiating the series.
pub fn substitute_mu_by_minus_lambda_minus_partial(s: &Series) -> Result<Series> {
    let max_k = s
        .coeffs
        .values()
        .flat_map(|c| c.terms().map(|(_, p)| p.degree_in(Var::Mu)))
        .max()
        .unwrap_or(-1);
    let mut acc = Series::zero(s.policy);
    acc.consumed = s.consumed;
    acc.band = s.band;
    for k in 0..=max_k.max(0) as u32 {
        let part = s.map_coeffs(|p| p.coeff_in(Var::Mu, k));
        let sign = if k % 2 == 0 { 1 } else { -1 };
        let mut deriv = part;
        for m in 0..=k {
            if m > 0 {
                deriv = deriv.partial()?;
            }
            let weight = MPoly::lambda()
                .pow(k - m)
                .scale(&rint(sign * binomial(k, m)));
            acc = acc.add(&deriv.scale(&weight))?;
        }
    }
    Ok(acc)
}

/// Reads a w-series as `Σ_γ p_γ(λ,∂) L_γ(w)`.
///
/// `∂^k L_γ(w)` has coefficient `ff(b+k, k) L_{γ,−b−k−2}` at `w^b`, so each
/// symbol determines its own `k`; the coefficient must be consistent across
/// the trusted window.
pub fn recognize_generators(s: &Series) -> Result<BTreeMap<i64, MPoly>> {
    let mut found: BTreeMap<(i64, u32), MPoly> = BTreeMap::new();
    let exps: Vec<i64> = s.trusted_exponents().collect();
    for &b in &exps {
        for (sym, c) in s.get(b).terms() {
            let Symbol::L(l) = sym else {
                return Err(FormalError::NotInGeneratorSpan(format!(
                    "scalar term at w^{b}"
                )));
            };
            let k = -b - 2 - l.i;
            if k < 0 {
                return Err(FormalError::NotInGeneratorSpan(format!(
                    "symbol L_{{{},{}}} at w^{b} would need a negative derivative order",
                    l.alpha, l.i
                )));
            }
            let k = k as u32;
            let ff = falling_factorial(b + k as i64, k);
            if ff == 0 {
                return Err(FormalError::NotInGeneratorSpan(format!(
                    "symbol L_{{{},{}}} at w^{b} where ∂^{k} L vanishes",
                    l.alpha, l.i
                )));
            }
            let a = c.scale(&Rational::new(BigInt::one(), BigInt::from(ff)));
            match found.get(&(l.alpha, k)) {
                Some(prev) if *prev != a => {
                    return Err(FormalError::NotInGeneratorSpan(format!(
                        "inconsistent coefficient of ∂^{k} L_{} at w^{b}",
                        l.alpha
                    )))
                }
                Some(_) => {}
                None => {
                    found.insert((l.alpha, k), a);
                }
            }
        }
    }
    for (&(gamma, k), a) in &found {
        for &b in &exps {
            let ff = falling_factorial(b + k as i64, k);
            let sym = Symbol::L(LBasisSymbol::new(gamma, -b - k as i64 - 2));
            if s.get(b).coeff(&sym) != a.scale(&rint(ff)) {
                return Err(FormalError::NotInGeneratorSpan(format!(
                    "∂^{k} L_{gamma} missing its coefficient at w^{b}"
                )));
            }
        }
    }
    let mut out: BTreeMap<i64, MPoly> = BTreeMap::new();
    for ((gamma, k), a) in found {
        let slot = out.entry(gamma).or_default();
        *slot += &(&a * &MPoly::del().pow(k));
    }
    out.retain(|_, p| !p.is_zero());
    Ok(out)
}

/// `[L_α(w)_λ L_β(w)]` through residues, read back in generator form.
pub fn lambda_product(
    alpha: i64,
    beta: i64,
    policy: TruncationPolicy,
    lambda_cap: u32,
) -> Result<BTreeMap<i64, MPoly>> {
    let series = phi_lambda(&generator_commutator(alpha, beta, policy), lambda_cap)?;
    recognize_generators(&series)
}

/// True iff `(z−w)^n a` vanishes on the trusted window.
pub fn is_local(a: &Distribution, n: u32) -> Result<bool> {
    Ok(a.mul_zw_power(n, 0, 0)?.is_zero_on_trusted())
}

/// Coefficients `c^j(w) = Res_z (z−w)^j a` for `j = 0..=maxj`, verified by
/// rebuilding `Σ_j c^j(w) ∂_w^j δ(z,w) / j!` on the checkable band.
pub fn delta_expansion(a: &Distribution, maxj: u32) -> Result<Vec<Series>> {
    if !is_local(a, maxj + 1)? {
        return Err(FormalError::NotLocal { order: maxj + 1 });
    }
    let coeffs = (0..=maxj)
        .map(|j| residue_after_power(a, j))
        .collect::<Result<Vec<_>>>()?;
    let rebuilt = rebuild_from_delta_expansion(&coeffs)?;
    if let Some((zexp, wexp)) = a.first_disagreement(&rebuilt) {
        return Err(FormalError::ReconstructionMismatch { zexp, wexp });
    }
    Ok(coeffs)
}

/// `Σ_j c^j(w) ∂_w^j δ(z,w) / j!`.
pub fn rebuild_from_delta_expansion(coeffs: &[Series]) -> Result<Distribution> {
    let Some(first) = coeffs.first() else {
        return Err(FormalError::NotInGeneratorSpan("empty expansion".into()));
    };
    let mut acc = Distribution::zero(first.policy);
    for (j, c) in coeffs.iter().enumerate() {
        let inv = MPoly::constant(Rational::new(BigInt::one(), factorial(j as u32)));
        acc = acc.add(&c.mul_delta_derivative(j as u32)?.scale(&inv))?;
    }
    Ok(acc)
}

/// `∂_w^n δ(z,w)`.
pub fn delta_derivative(policy: TruncationPolicy, n: u32) -> Result<Distribution> {
    let mut d = dirac_delta(policy);
    for _ in 0..n {
        d = d.partial_w()?;
    }
    Ok(d)
}

/// Renders a series coefficient for diagnostics.
pub fn describe_combo(c: &SymbolCombo) -> String {
    if c.is_zero() {
        return "0".into();
    }
    c.terms()
        .map(|(s, k)| match s {
            Symbol::One => format!("({k})"),
            Symbol::L(l) => format!("({k})*L[{},{}]", l.alpha, l.i),
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

#[allow(dead_code)]
fn rational_str(r: &Rational) -> String {
    if r.is_zero() {
        "0".into()
    } else {
        format_rational(r)
    }
}
