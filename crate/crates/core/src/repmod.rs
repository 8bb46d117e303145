//! Free intermediate series modules given by structure coefficients
//! `L_α(w)_λ v_γ = f_{α,γ}(λ,∂) v_{α+γ}`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::conformal::{BlockAlgebra, ConformalElement, StructureTable};
use crate::ratpoly::{format_rational, parse_rational, rint, Bindings, MPoly, Rational, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RepError {
    #[error("gauge vanishes at index {0}")]
    ZeroGauge(i64),
    #[error("table has no entry for (alpha, gamma) = ({0}, {1})")]
    MissingEntry(i64, i64),
    #[error("cannot parse module family '{0}'")]
    ParseFamily(String),
    #[error("cannot parse gauge '{0}'")]
    ParseGauge(String),
}

/// The three classified families and the trivial module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModuleFamily {
    Vcd { c: Rational, d: Rational },
    Vd { d: Rational },
    VdPrime { d: Rational },
    Trivial,
}

impl ModuleFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            ModuleFamily::Vcd { .. } => "vcd",
            ModuleFamily::Vd { .. } => "vd",
            ModuleFamily::VdPrime { .. } => "vdprime",
            ModuleFamily::Trivial => "trivial",
        }
    }

    pub fn c(&self) -> Option<&Rational> {
        match self {
            ModuleFamily::Vcd { c, .. } => Some(c),
            _ => None,
        }
    }

    pub fn d(&self) -> Option<&Rational> {
        match self {
            ModuleFamily::Vcd { d, .. } | ModuleFamily::Vd { d } | ModuleFamily::VdPrime { d } => {
                Some(d)
            }
            ModuleFamily::Trivial => None,
        }
    }

    /// `f_{α,γ}(λ,∂)` of the family.
    pub fn coeff(&self, alpha: i64, gamma: i64) -> MPoly {
        let a = rint(alpha);
        let lam = MPoly::lambda();
        let del = MPoly::del();
        let generic = |c: &Rational, d: &Rational| {
            let lin = &del + &MPoly::constant(d.clone());
            &lam.scale(&(rint(alpha + gamma) + c)) + &lin.scale(&a)
        };
        match self {
            ModuleFamily::Vcd { c, d } => generic(c, d),
            ModuleFamily::Vd { d } => {
                if gamma == 0 {
                    (&(&lam + &del) + &MPoly::constant(d.clone()))
                        .pow(2)
                        .scale(&a)
                } else if alpha + gamma == 0 {
                    MPoly::constant(a)
                } else {
                    generic(&Rational::zero(), d)
                }
            }
            ModuleFamily::VdPrime { d } => {
                if gamma == 0 {
                    MPoly::constant(a)
                } else if alpha + gamma == 0 {
                    (&del + &MPoly::constant(d.clone())).pow(2).scale(&a)
                } else {
                    generic(&Rational::zero(), d)
                }
            }
            ModuleFamily::Trivial => MPoly::zero(),
        }
    }
}

impl fmt::Display for ModuleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModuleFamily::Vcd { c, d } => {
                write!(f, "vcd:{}:{}", format_rational(c), format_rational(d))
            }
            ModuleFamily::Vd { d } => write!(f, "vd:{}", format_rational(d)),
            ModuleFamily::VdPrime { d } => write!(f, "vdprime:{}", format_rational(d)),
            ModuleFamily::Trivial => write!(f, "trivial"),
        }
    }
}

/// Parses `vcd:C:D`, `vd:D`, `vdprime:D` or `trivial`.
impl FromStr for ModuleFamily {
    type Err = RepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || RepError::ParseFamily(s.to_string());
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| parse_rational(t).map_err(|_| err());
        match parts.as_slice() {
            ["vcd", c, d] => Ok(ModuleFamily::Vcd {
                c: num(c)?,
                d: num(d)?,
            }),
            ["vd", d] => Ok(ModuleFamily::Vd { d: num(d)? }),
            ["vdprime", d] => Ok(ModuleFamily::VdPrime { d: num(d)? }),
            ["trivial"] => Ok(ModuleFamily::Trivial),
            _ => Err(err()),
        }
    }
}

impl Serialize for ModuleFamily {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            family: &'static str,
            #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
            c: Option<String>,
            #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
            d: Option<String>,
        }
        Repr {
            family: self.tag(),
            c: self.c().map(format_rational),
            d: self.d().map(format_rational),
        }
        .serialize(s)
    }
}

type CoeffFn = dyn Fn(i64, i64) -> Option<MPoly> + Send + Sync;

/// `(α, γ) ↦ f_{α,γ}(λ,∂)`, evaluated lazily.
///
/// Tables read from finite entry lists answer `None` outside their entries
/// unless they were built with a zero fallback.
#[derive(Clone)]
pub struct StructureCoeffTable {
    f: Arc<CoeffFn>,
    provenance: String,
}

impl fmt::Debug for StructureCoeffTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StructureCoeffTable({})", self.provenance)
    }
}

impl StructureCoeffTable {
    pub fn from_fn(
        provenance: impl Into<String>,
        f: impl Fn(i64, i64) -> Option<MPoly> + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            provenance: provenance.into(),
        }
    }

    pub fn from_family(family: &ModuleFamily) -> Self {
        let fam = family.clone();
        Self::from_fn(family.to_string(), move |a, g| Some(fam.coeff(a, g)))
    }

    pub fn zero() -> Self {
        Self::from_family(&ModuleFamily::Trivial)
    }

    pub fn from_entries(entries: BTreeMap<(i64, i64), MPoly>, default_zero: bool) -> Self {
        Self::from_fn("custom", move |a, g| match entries.get(&(a, g)) {
            Some(p) => Some(p.clone()),
            None if default_zero => Some(MPoly::zero()),
            None => None,
        })
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn try_coeff(&self, alpha: i64, gamma: i64) -> Result<MPoly, RepError> {
        (self.f)(alpha, gamma).ok_or(RepError::MissingEntry(alpha, gamma))
    }

    /// Coefficient, with missing entries read as zero.
    pub fn coeff(&self, alpha: i64, gamma: i64) -> MPoly {
        (self.f)(alpha, gamma).unwrap_or_default()
    }

    /// Replaces one entry.
    pub fn with_entry(&self, alpha: i64, gamma: i64, p: MPoly) -> Self {
        let base = self.f.clone();
        Self::from_fn(
            format!("{} with ({alpha},{gamma}) replaced", self.provenance),
            move |a, g| {
                if (a, g) == (alpha, gamma) {
                    Some(p.clone())
                } else {
                    base(a, g)
                }
            },
        )
    }

    /// Entries with `|α|, |γ| ≤ radius`.
    pub fn entries(&self, radius: i64) -> Result<BTreeMap<(i64, i64), MPoly>, RepError> {
        let mut out = BTreeMap::new();
        for a in -radius..=radius {
            for g in -radius..=radius {
                out.insert((a, g), self.try_coeff(a, g)?);
            }
        }
        Ok(out)
    }

    pub fn equal_on(&self, other: &Self, radius: i64) -> bool {
        self.first_difference(other, radius).is_none()
    }

    pub fn first_difference(&self, other: &Self, radius: i64) -> Option<(i64, i64)> {
        for a in -radius..=radius {
            for g in -radius..=radius {
                if self.try_coeff(a, g) != other.try_coeff(a, g) {
                    return Some((a, g));
                }
            }
        }
        None
    }
}

/// Finite sum `Σ_γ p_γ v_γ`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GradedVector {
    terms: BTreeMap<i64, MPoly>,
}

impl GradedVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn basis(gamma: i64) -> Self {
        Self::single(gamma, MPoly::one())
    }

    pub fn single(gamma: i64, p: MPoly) -> Self {
        let mut v = Self::zero();
        v.add_term(gamma, &p);
        v
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, gamma: i64) -> MPoly {
        self.terms.get(&gamma).cloned().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &MPoly)> {
        self.terms.iter().map(|(g, p)| (*g, p))
    }

    pub fn add_term(&mut self, gamma: i64, p: &MPoly) {
        if p.is_zero() {
            return;
        }
        let slot = self.terms.entry(gamma).or_default();
        *slot += p;
        if slot.is_zero() {
            self.terms.remove(&gamma);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (g, p) in &other.terms {
            out.add_term(*g, p);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (g, p) in &other.terms {
            out.add_term(*g, &-p);
        }
        out
    }
}

/// `a_ν v` for an algebra element `a` whose coefficients may involve
/// spectral variables: `p(∂)L_α` acting on `q(∂)v_γ` gives
/// `p(−ν) q(∂+ν) f_{α,γ}(ν,∂) v_{α+γ}`.
pub fn act_at(
    table: &StructureCoeffTable,
    a: &ConformalElement,
    v: &GradedVector,
    nu: &MPoly,
) -> Result<GradedVector, RepError> {
    let left = Bindings::new().bind(Var::Del, -nu);
    let right = Bindings::new().bind(Var::Del, &MPoly::del() + nu);
    let spectral = Bindings::new().bind(Var::Lambda, nu.clone());
    let mut out = GradedVector::zero();
    for (alpha, p) in a.terms() {
        let p_left = p.substitute(&left);
        for (gamma, q) in v.terms() {
            let f = table.try_coeff(alpha, gamma)?;
            let term = &(&p_left * &q.substitute(&right)) * &f.substitute(&spectral);
            out.add_term(alpha + gamma, &term);
        }
    }
    Ok(out)
}

/// `L_α(w)_λ v`.
pub fn lambda_action(
    table: &StructureCoeffTable,
    alpha: i64,
    v: &GradedVector,
) -> Result<GradedVector, RepError> {
    act_at(
        table,
        &ConformalElement::generator(alpha),
        v,
        &MPoly::lambda(),
    )
}

/// `LHS − RHS` of the functional equation
/// `(βλ−αμ) f_{α+β,γ}(λ+μ,∂) = f_{β,γ}(μ,∂+λ) f_{α,β+γ}(λ,∂) − f_{α,γ}(λ,∂+μ) f_{β,α+γ}(μ,∂)`.
pub fn module_equation_residual(
    table: &StructureCoeffTable,
    alpha: i64,
    beta: i64,
    gamma: i64,
) -> Result<MPoly, RepError> {
    let lam = MPoly::lambda();
    let mu = MPoly::mu();
    let del = MPoly::del();
    let weight = &lam.scale(&rint(beta)) - &mu.scale(&rint(alpha));
    let lhs = &weight
        * &table
            .try_coeff(alpha + beta, gamma)?
            .substitute(&Bindings::new().bind(Var::Lambda, &lam + &mu));
    let f_b = table.try_coeff(beta, gamma)?.substitute(
        &Bindings::new()
            .bind(Var::Lambda, mu.clone())
            .bind(Var::Del, &del + &lam),
    );
    let f_a_shift = table.try_coeff(alpha, beta + gamma)?;
    let f_a = table
        .try_coeff(alpha, gamma)?
        .substitute(&Bindings::new().bind(Var::Del, &del + &mu));
    let f_b_shift = table
        .try_coeff(beta, alpha + gamma)?
        .substitute(&Bindings::new().bind(Var::Lambda, mu.clone()));
    let rhs = &(&f_b * &f_a_shift) - &(&f_a * &f_b_shift);
    Ok(&lhs - &rhs)
}

pub fn check_module_equation(
    table: &StructureCoeffTable,
    alpha: i64,
    beta: i64,
    gamma: i64,
) -> Result<bool, RepError> {
    Ok(module_equation_residual(table, alpha, beta, gamma)?.is_zero())
}

/// Module Jacobi identity on `v_γ` computed from the action alone:
/// `[L_α λ L_β]_{λ+μ} v_γ − L_α λ (L_β μ v_γ) + L_β μ (L_α λ v_γ)`.
pub fn module_jacobi_residual(
    table: &StructureCoeffTable,
    alpha: i64,
    beta: i64,
    gamma: i64,
) -> Result<GradedVector, RepError> {
    let alg = BlockAlgebra;
    let lam = MPoly::lambda();
    let mu = MPoly::mu();
    let v = GradedVector::basis(gamma);
    let la = ConformalElement::generator(alpha);
    let lb = ConformalElement::generator(beta);
    let bracket = alg.generator_bracket(alpha, beta);
    let lhs = act_at(table, &bracket, &v, &(&lam + &mu))?;
    let first = act_at(table, &la, &act_at(table, &lb, &v, &mu)?, &lam)?;
    let second = act_at(table, &lb, &act_at(table, &la, &v, &lam)?, &mu)?;
    Ok(lhs.sub(&first).add(&second))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModuleFailure {
    pub alpha: i64,
    pub beta: i64,
    pub gamma: i64,
    pub residual: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModuleReport {
    pub table: String,
    pub window: u32,
    pub checked: usize,
    pub failures: Vec<ModuleFailure>,
    pub timing_ms: u128,
}

impl ModuleReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Functional equation on every triple `|α|,|β|,|γ| ≤ window`.
pub fn family_sweep(table: &StructureCoeffTable, window: u32) -> Result<ModuleReport, RepError> {
    let start = Instant::now();
    let n = window as i64;
    let triples: Vec<(i64, i64, i64)> = (-n..=n)
        .flat_map(|a| (-n..=n).flat_map(move |b| (-n..=n).map(move |g| (a, b, g))))
        .collect();
    let results: Vec<Option<ModuleFailure>> = triples
        .par_iter()
        .map(|&(a, b, g)| {
            let r = module_equation_residual(table, a, b, g)?;
            Ok((!r.is_zero()).then(|| ModuleFailure {
                alpha: a,
                beta: b,
                gamma: g,
                residual: r.to_string(),
            }))
        })
        .collect::<Result<_, RepError>>()?;
    Ok(ModuleReport {
        table: table.provenance().to_string(),
        window,
        checked: triples.len(),
        failures: results.into_iter().flatten().collect(),
        timing_ms: start.elapsed().as_millis(),
    })
}

/// Diagonal basis change `v'_γ = g(γ) v_γ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gauge {
    Identity,
    /// `g(γ) = base^γ`.
    Power(Rational),
    /// Listed values; `1` elsewhere.
    Explicit(BTreeMap<i64, Rational>),
    Inverse(Box<Gauge>),
}

impl Gauge {
    pub fn value(&self, gamma: i64) -> Rational {
        match self {
            Gauge::Identity => Rational::one(),
            Gauge::Power(b) => {
                if b.is_zero() {
                    return Rational::zero();
                }
                let p = num_traits::pow(b.clone(), gamma.unsigned_abs() as usize);
                if gamma < 0 {
                    p.recip()
                } else {
                    p
                }
            }
            Gauge::Explicit(m) => m.get(&gamma).cloned().unwrap_or_else(Rational::one),
            Gauge::Inverse(g) => {
                let v = g.value(gamma);
                if v.is_zero() {
                    v
                } else {
                    v.recip()
                }
            }
        }
    }

    pub fn inverse(&self) -> Gauge {
        match self {
            Gauge::Inverse(g) => (**g).clone(),
            g => Gauge::Inverse(Box::new(g.clone())),
        }
    }

    /// Fails on a vanishing value; explicit gauges are checked entirely,
    /// others on `|γ| ≤ radius`.
    pub fn validate(&self, radius: i64) -> Result<(), RepError> {
        match self {
            Gauge::Power(b) if b.is_zero() => Err(RepError::ZeroGauge(0)),
            Gauge::Explicit(m) => match m.iter().find(|(_, v)| v.is_zero()) {
                Some((g, _)) => Err(RepError::ZeroGauge(*g)),
                None => Ok(()),
            },
            Gauge::Inverse(g) => g.validate(radius),
            _ => (-radius..=radius)
                .find(|&g| self.value(g).is_zero())
                .map_or(Ok(()), |g| Err(RepError::ZeroGauge(g))),
        }
    }
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gauge::Identity => write!(f, "1"),
            Gauge::Power(b) => write!(f, "{}^g", format_rational(b)),
            Gauge::Explicit(m) => {
                let parts: Vec<String> = m
                    .iter()
                    .map(|(g, v)| format!("{g}:{}", format_rational(v)))
                    .collect();
                write!(f, "{{{}}}", parts.join(","))
            }
            Gauge::Inverse(g) => write!(f, "1/({g})"),
        }
    }
}

/// Parses `1`, `b^g` (meaning `b^γ` for a rational `b`, sign included).
impl FromStr for Gauge {
    type Err = RepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let err = || RepError::ParseGauge(s.to_string());
        if t == "1" {
            return Ok(Gauge::Identity);
        }
        let base = t
            .strip_suffix("^g")
            .or_else(|| t.strip_suffix("^gamma"))
            .ok_or_else(err)?;
        let base = base.trim().trim_start_matches('(').trim_end_matches(')');
        let b = parse_rational(base).map_err(|_| err())?;
        if b.is_zero() {
            return Err(RepError::ZeroGauge(0));
        }
        Ok(Gauge::Power(b))
    }
}

impl Serialize for Gauge {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// `f'_{α,γ} = g(γ)/g(α+γ) · f_{α,γ}`, the coefficients in the basis
/// `v'_γ = g(γ) v_γ`.
pub fn rescale_basis(
    table: &StructureCoeffTable,
    gauge: &Gauge,
) -> Result<StructureCoeffTable, RepError> {
    gauge.validate(8)?;
    let base = table.clone();
    let g = gauge.clone();
    Ok(StructureCoeffTable::from_fn(
        format!("rescale({}, {})", table.provenance(), gauge),
        move |a, c| {
            let ratio = g.value(c) / g.value(a + c);
            base.try_coeff(a, c).ok().map(|p| p.scale(&ratio))
        },
    ))
}

/// `f'_{α,γ} = f_{α,γ+n}`.
pub fn shift_basis(table: &StructureCoeffTable, n: i64) -> StructureCoeffTable {
    let base = table.clone();
    StructureCoeffTable::from_fn(
        format!("shift({}, {n})", table.provenance()),
        move |a, g| base.try_coeff(a, g + n).ok(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IsoWitness {
    pub shift: i64,
    pub gauge: Gauge,
}

/// Searches `rescale(shift(t1, n), g) = t2` on `|α|,|γ| ≤ window` over
/// `|n| ≤ window`, preferring the smallest `|n|`.
pub fn is_isomorphic_diagonal(
    t1: &StructureCoeffTable,
    t2: &StructureCoeffTable,
    window: u32,
) -> Option<IsoWitness> {
    let n = window as i64;
    let mut shifts: Vec<i64> = (-n..=n).collect();
    shifts.sort_by_key(|s| (s.abs(), *s < 0));
    let found: Vec<Option<IsoWitness>> = shifts
        .par_iter()
        .map(|&s| {
            let shifted = shift_basis(t1, s);
            let gauge = solve_diagonal_gauge(&shifted, t2, n)?;
            let check = rescale_basis(&shifted, &gauge).ok()?;
            check
                .equal_on(t2, n)
                .then_some(IsoWitness { shift: s, gauge })
        })
        .collect();
    found.into_iter().flatten().next()
}

/// A gauge with `g(γ)/g(α+γ) · t1 = t2` on the window, if one exists.
fn solve_diagonal_gauge(
    t1: &StructureCoeffTable,
    t2: &StructureCoeffTable,
    n: i64,
) -> Option<Gauge> {
    // Edge γ → α+γ carrying g(α+γ) = g(γ)/r where t2 = r·t1.
    let mut edges: BTreeMap<i64, Vec<(i64, Rational)>> = BTreeMap::new();
    for a in -n..=n {
        for g in -n..=n {
            let p = t1.try_coeff(a, g).ok()?;
            let q = t2.try_coeff(a, g).ok()?;
            match (p.is_zero(), q.is_zero()) {
                (true, true) => continue,
                (true, false) | (false, true) => return None,
                _ => {}
            }
            let r = scalar_ratio(&q, &p)?;
            edges.entry(g).or_default().push((a + g, r.clone()));
            edges.entry(a + g).or_default().push((g, r.recip()));
        }
    }
    let mut values: BTreeMap<i64, Rational> = BTreeMap::new();
    let mut roots: Vec<i64> = vec![0];
    roots.extend(edges.keys().copied());
    for root in roots {
        if values.contains_key(&root) {
            continue;
        }
        values.insert(root, Rational::one());
        let mut queue = VecDeque::from([root]);
        while let Some(node) = queue.pop_front() {
            let gv = values[&node].clone();
            for (next, r) in edges.get(&node).into_iter().flatten() {
                let want = &gv / r;
                match values.get(next) {
                    Some(v) if *v != want => return None,
                    Some(_) => {}
                    None => {
                        values.insert(*next, want);
                        queue.push_back(*next);
                    }
                }
            }
        }
    }
    values.retain(|_, v| !v.is_one());
    Some(if values.is_empty() {
        Gauge::Identity
    } else {
        Gauge::Explicit(values)
    })
}

/// The rational `r` with `q = r·p`, if any.
pub fn scalar_ratio(q: &MPoly, p: &MPoly) -> Option<Rational> {
    let (m, c) = p.leading()?;
    let r = q.coeff(m) / c;
    (p.scale(&r) == *q).then_some(r)
}

/// `true` iff `x ∈ ℤ`.
pub fn is_integral(x: &Rational) -> bool {
    x.is_integer()
}

/// Sign-aware floor of a rational.
pub fn floor_rational(x: &Rational) -> i64 {
    let f = x.floor().to_integer();
    i64::try_from(f).unwrap_or(if x.is_negative() { i64::MIN } else { i64::MAX })
}
