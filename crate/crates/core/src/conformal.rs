//! λ-brackets on table-driven Lie conformal algebras and exact axiom checks.
//!
//! An algebra is described by the brackets of its generators,
//! `[L_α λ L_β] = Σ_γ c_γ(λ,∂) L_γ`. Everything else (sesquilinearity,
//! skew symmetry, Jacobi) is derived by polynomial substitution.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::formal::{self, FormalError, TruncationPolicy};
use crate::ratpoly::{Bindings, MPoly, Var};

/// Finite sum `Σ_α p_α L_α` with polynomial coefficients.
///
/// Elements of the algebra have coefficients in `∂` only; bracket values
/// (`LambdaImage`) also carry the spectral variables `λ, μ`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(transparent)]
pub struct ConformalElement {
    #[serde(serialize_with = "serialize_terms")]
    terms: BTreeMap<i64, MPoly>,
}

/// Value of a λ-bracket: generator index to polynomial in `λ, μ, ∂`.
pub type LambdaImage = ConformalElement;

fn serialize_terms<S: serde::Serializer>(
    terms: &BTreeMap<i64, MPoly>,
    s: S,
) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    #[derive(Serialize)]
    struct Term {
        index: i64,
        poly: String,
    }
    let mut seq = s.serialize_seq(Some(terms.len()))?;
    for (index, p) in terms {
        seq.serialize_element(&Term {
            index: *index,
            poly: p.to_string(),
        })?;
    }
    seq.end()
}

impl ConformalElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn generator(alpha: i64) -> Self {
        Self::single(alpha, MPoly::one())
    }

    pub fn single(alpha: i64, p: MPoly) -> Self {
        let mut e = Self::zero();
        e.add_term(alpha, &p);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, alpha: i64) -> MPoly {
        self.terms.get(&alpha).cloned().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &MPoly)> {
        self.terms.iter().map(|(a, p)| (*a, p))
    }

    pub fn support(&self) -> Vec<i64> {
        self.terms.keys().copied().collect()
    }

    pub fn add_term(&mut self, alpha: i64, p: &MPoly) {
        if p.is_zero() {
            return;
        }
        let slot = self.terms.entry(alpha).or_default();
        *slot += p;
        if slot.is_zero() {
            self.terms.remove(&alpha);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, p) in &other.terms {
            out.add_term(*a, p);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&MPoly::int(-1)))
    }

    pub fn scale(&self, c: &MPoly) -> Self {
        let mut out = Self::zero();
        for (a, p) in &self.terms {
            out.add_term(*a, &(p * c));
        }
        out
    }

    pub fn substitute(&self, b: &Bindings) -> Self {
        let mut out = Self::zero();
        for (a, p) in &self.terms {
            out.add_term(*a, &p.substitute(b));
        }
        out
    }

    /// `∂` applied to the element.
    pub fn derivative(&self) -> Self {
        self.scale(&MPoly::del())
    }
}

impl fmt::Display for ConformalElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(a, p)| format!("({p})*L[{a}]"))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Generator brackets of a Lie conformal algebra.
pub trait StructureTable: Send + Sync {
    fn name(&self) -> String;

    /// `[L_α λ L_β]` as polynomials in `λ, ∂`.
    fn generator_bracket(&self, alpha: i64, beta: i64) -> LambdaImage;

    /// Generator indices exercised by a sweep of the given window.
    fn generators(&self, window: u32) -> Vec<i64> {
        let n = window as i64;
        (-n..=n).collect()
    }
}

/// The Block type algebra `[L_α λ L_β] = (α∂ + (α+β)λ) L_{α+β}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlockAlgebra;

impl StructureTable for BlockAlgebra {
    fn name(&self) -> String {
        "b".into()
    }

    fn generator_bracket(&self, alpha: i64, beta: i64) -> LambdaImage {
        basis_bracket(alpha, beta)
    }
}

/// One generator, `[L λ L] = (∂ + 2λ) L`.
#[derive(Debug, Clone, Copy, Default)]
pub struct VirasoroAlgebra;

impl StructureTable for VirasoroAlgebra {
    fn name(&self) -> String {
        "virasoro".into()
    }

    fn generator_bracket(&self, _alpha: i64, _beta: i64) -> LambdaImage {
        let p = &MPoly::del() + &MPoly::lambda().scale(&crate::ratpoly::rint(2));
        ConformalElement::single(0, p)
    }

    fn generators(&self, _window: u32) -> Vec<i64> {
        vec![0]
    }
}

/// Structure table given by an arbitrary function, used for perturbed
/// algebras in mutation tests.
#[derive(Clone)]
pub struct ClosureAlgebra {
    name: String,
    f: Arc<dyn Fn(i64, i64) -> LambdaImage + Send + Sync>,
}

impl ClosureAlgebra {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(i64, i64) -> LambdaImage + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }
}

impl StructureTable for ClosureAlgebra {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn generator_bracket(&self, alpha: i64, beta: i64) -> LambdaImage {
        (self.f)(alpha, beta)
    }
}

/// `(α∂ + (α+β)λ) L_{α+β}`.
pub fn basis_bracket(alpha: i64, beta: i64) -> LambdaImage {
    let p = &MPoly::del().scale(&crate::ratpoly::rint(alpha))
        + &MPoly::lambda().scale(&crate::ratpoly::rint(alpha + beta));
    ConformalElement::single(alpha + beta, p)
}

/// `[a_ν b]` for a spectral polynomial `ν`.
///
/// For `a = p(∂)L_α`, `b = q(∂)L_β`, sesquilinearity gives
/// `p(−ν) q(∂+ν) [L_α ν L_β]`. The coefficients of `a` and `b` may already
/// contain other spectral variables; only `∂` is rewritten in them.
pub fn bracket_at(
    alg: &dyn StructureTable,
    a: &ConformalElement,
    b: &ConformalElement,
    nu: &MPoly,
) -> LambdaImage {
    let left = Bindings::new().bind(Var::Del, -nu);
    let right = Bindings::new().bind(Var::Del, &MPoly::del() + nu);
    let spectral = Bindings::new().bind(Var::Lambda, nu.clone());
    let mut out = LambdaImage::zero();
    for (alpha, p) in a.terms() {
        let p_left = p.substitute(&left);
        for (beta, q) in b.terms() {
            let factor = &p_left * &q.substitute(&right);
            for (gamma, c) in alg.generator_bracket(alpha, beta).terms() {
                out.add_term(gamma, &(&factor * &c.substitute(&spectral)));
            }
        }
    }
    out
}

/// `[a_λ b]`.
pub fn lambda_bracket(
    alg: &dyn StructureTable,
    a: &ConformalElement,
    b: &ConformalElement,
) -> LambdaImage {
    bracket_at(alg, a, b, &MPoly::lambda())
}

/// `[b_λ a] + [a_{−λ−∂} b]`, zero iff skew symmetry holds for this pair.
pub fn skew_residual(
    alg: &dyn StructureTable,
    a: &ConformalElement,
    b: &ConformalElement,
) -> LambdaImage {
    let flip = Bindings::new().bind(Var::Lambda, -&(&MPoly::lambda() + &MPoly::del()));
    let ab = lambda_bracket(alg, a, b).substitute(&flip);
    lambda_bracket(alg, b, a).add(&ab)
}

pub fn check_skew(alg: &dyn StructureTable, alpha: i64, beta: i64) -> bool {
    skew_residual(
        alg,
        &ConformalElement::generator(alpha),
        &ConformalElement::generator(beta),
    )
    .is_zero()
}

/// `[[a_λ b]_{λ+μ} c] − [a_λ [b_μ c]] + [b_μ [a_λ c]]`.
pub fn jacobi_residual(
    alg: &dyn StructureTable,
    a: &ConformalElement,
    b: &ConformalElement,
    c: &ConformalElement,
) -> LambdaImage {
    let lam = MPoly::lambda();
    let mu = MPoly::mu();
    let lam_mu = &lam + &mu;
    let lhs = bracket_at(alg, &bracket_at(alg, a, b, &lam), c, &lam_mu);
    let first = bracket_at(alg, a, &bracket_at(alg, b, c, &mu), &lam);
    let second = bracket_at(alg, b, &bracket_at(alg, a, c, &lam), &mu);
    lhs.sub(&first).add(&second)
}

pub fn check_jacobi(alg: &dyn StructureTable, alpha: i64, beta: i64, gamma: i64) -> bool {
    jacobi_residual(
        alg,
        &ConformalElement::generator(alpha),
        &ConformalElement::generator(beta),
        &ConformalElement::generator(gamma),
    )
    .is_zero()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AxiomFailure {
    pub axiom: String,
    pub indices: Vec<i64>,
    pub residual: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub algebra: String,
    pub window: u32,
    pub skew_checked: usize,
    pub jacobi_checked: usize,
    pub failures: Vec<AxiomFailure>,
    pub timing_ms: u128,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Skew symmetry on all generator pairs and Jacobi on all triples of the window.
pub fn axiom_sweep(alg: &dyn StructureTable, window: u32) -> AxiomReport {
    let start = Instant::now();
    let gens = alg.generators(window);
    let pairs: Vec<(i64, i64)> = gens
        .iter()
        .flat_map(|&a| gens.iter().map(move |&b| (a, b)))
        .collect();
    let triples: Vec<(i64, i64, i64)> = pairs
        .iter()
        .flat_map(|&(a, b)| gens.iter().map(move |&c| (a, b, c)))
        .collect();

    let mut failures: Vec<AxiomFailure> = pairs
        .par_iter()
        .filter_map(|&(a, b)| {
            let r = skew_residual(
                alg,
                &ConformalElement::generator(a),
                &ConformalElement::generator(b),
            );
            (!r.is_zero()).then(|| AxiomFailure {
                axiom: "skew".into(),
                indices: vec![a, b],
                residual: r.to_string(),
            })
        })
        .collect();
    failures.extend(
        triples
            .par_iter()
            .filter_map(|&(a, b, c)| {
                let r = jacobi_residual(
                    alg,
                    &ConformalElement::generator(a),
                    &ConformalElement::generator(b),
                    &ConformalElement::generator(c),
                );
                (!r.is_zero()).then(|| AxiomFailure {
                    axiom: "jacobi".into(),
                    indices: vec![a, b, c],
                    residual: r.to_string(),
                })
            })
            .collect::<Vec<_>>(),
    );

    AxiomReport {
        algebra: alg.name(),
        window,
        skew_checked: pairs.len(),
        jacobi_checked: triples.len(),
        failures,
        timing_ms: start.elapsed().as_millis(),
    }
}

/// Closed form of `L_α(w)_{(j)} L_β(w)`: `α∂L_{α+β}` for `j = 0`,
/// `(α+β)L_{α+β}` for `j = 1`, zero otherwise.
pub fn j_product_closed_form(alpha: i64, beta: i64, j: u32) -> LambdaImage {
    let p = match j {
        0 => MPoly::del().scale(&crate::ratpoly::rint(alpha)),
        1 => MPoly::int(alpha + beta),
        _ => MPoly::zero(),
    };
    ConformalElement::single(alpha + beta, p)
}

fn from_map(m: BTreeMap<i64, MPoly>) -> LambdaImage {
    let mut out = LambdaImage::zero();
    for (g, p) in m {
        out.add_term(g, &p);
    }
    out
}

/// λ-product computed by residues, in generator form.
pub fn residue_lambda_bracket(
    alpha: i64,
    beta: i64,
    policy: TruncationPolicy,
) -> Result<LambdaImage, FormalError> {
    formal::lambda_product(alpha, beta, policy, 4).map(from_map)
}

/// j-product computed by residues, in generator form.
pub fn residue_j_product(
    alpha: i64,
    beta: i64,
    j: u32,
    policy: TruncationPolicy,
) -> Result<LambdaImage, FormalError> {
    let s = formal::j_product(alpha, beta, j, policy)?;
    formal::recognize_generators(&s).map(from_map)
}

/// Residue construction of the λ-product against the axiomatic bracket.
pub fn bridge_check(alpha: i64, beta: i64, policy: TruncationPolicy) -> Result<bool, FormalError> {
    Ok(residue_lambda_bracket(alpha, beta, policy)? == basis_bracket(alpha, beta))
}

#[derive(Debug, Clone, Serialize)]
pub struct BridgeFailure {
    pub alpha: i64,
    pub beta: i64,
    pub check: String,
    pub expected: String,
    pub got: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct BridgeReport {
    pub window: u32,
    pub depth: u32,
    pub guard: u32,
    pub lambda_checked: usize,
    pub j_checked: usize,
    pub locality_checked: usize,
    pub failures: Vec<BridgeFailure>,
    pub timing_ms: u128,
}

/// All pairs `|α|,|β| ≤ window`: λ-product vs bracket, j-products for
/// `j = 0..=guard` vs closed form, locality of order 2 and the δ-expansion.
pub fn bridge_sweep(window: u32, policy: TruncationPolicy) -> Result<BridgeReport, FormalError> {
    let start = Instant::now();
    let n = window as i64;
    let pairs: Vec<(i64, i64)> = (-n..=n)
        .flat_map(|a| (-n..=n).map(move |b| (a, b)))
        .collect();
    let max_j = policy.guard();
    let per_pair: Vec<Vec<BridgeFailure>> = pairs
        .par_iter()
        .map(|&(a, b)| bridge_pair(a, b, policy, max_j))
        .collect::<Result<_, _>>()?;
    Ok(BridgeReport {
        window,
        depth: policy.depth(),
        guard: policy.guard(),
        lambda_checked: pairs.len(),
        j_checked: pairs.len() * (max_j as usize + 1),
        locality_checked: pairs.len(),
        failures: per_pair.into_iter().flatten().collect(),
        timing_ms: start.elapsed().as_millis(),
    })
}

fn bridge_pair(
    a: i64,
    b: i64,
    policy: TruncationPolicy,
    max_j: u32,
) -> Result<Vec<BridgeFailure>, FormalError> {
    let mut out = Vec::new();
    let mut record = |check: String, expected: String, got: String| {
        out.push(BridgeFailure {
            alpha: a,
            beta: b,
            check,
            expected,
            got,
        })
    };
    let expected = basis_bracket(a, b);
    match residue_lambda_bracket(a, b, policy) {
        Ok(got) if got == expected => {}
        Ok(got) => record("lambda".into(), expected.to_string(), got.to_string()),
        Err(e) => record("lambda".into(), expected.to_string(), e.to_string()),
    }
    for j in 0..=max_j {
        let want = j_product_closed_form(a, b, j);
        match residue_j_product(a, b, j, policy) {
            Ok(got) if got == want => {}
            Ok(got) => record(format!("j={j}"), want.to_string(), got.to_string()),
            Err(e) => record(format!("j={j}"), want.to_string(), e.to_string()),
        }
    }
    let comm = formal::generator_commutator(a, b, policy);
    if !formal::is_local(&comm, 2)? {
        record("local(2)".into(), "true".into(), "false".into());
    }
    match formal::delta_expansion(&comm, 1) {
        Ok(c) => {
            for (j, series) in c.iter().enumerate() {
                let want = j_product_closed_form(a, b, j as u32);
                match formal::recognize_generators(series).map(from_map) {
                    Ok(got) if got == want => {}
                    Ok(got) => record(format!("c^{j}"), want.to_string(), got.to_string()),
                    Err(e) => record(format!("c^{j}"), want.to_string(), e.to_string()),
                }
            }
        }
        Err(e) => record("delta_expansion".into(), "expansion".into(), e.to_string()),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratpoly::rint;

    fn p(s: &str) -> MPoly {
        s.parse().unwrap()
    }

    #[test]
    fn basis_bracket_examples() {
        assert_eq!(
            basis_bracket(1, 2),
            ConformalElement::single(3, p("del + 3*lam"))
        );
        assert!(basis_bracket(0, 0).is_zero());
        assert_eq!(
            basis_bracket(2, -2),
            ConformalElement::single(0, p("2*del"))
        );
    }

    #[test]
    fn sesquilinearity_examples() {
        let alg = BlockAlgebra;
        let l1 = ConformalElement::generator(1);
        let l2 = ConformalElement::generator(2);
        assert_eq!(
            lambda_bracket(&alg, &l1.derivative(), &l2),
            ConformalElement::single(3, p("-lam*(del + 3*lam)"))
        );
        assert_eq!(
            lambda_bracket(&alg, &l1, &l2.derivative()),
            ConformalElement::single(3, p("(del + lam)*(del + 3*lam)"))
        );
        let a = l1.add(&ConformalElement::single(0, p("del^2")));
        assert_eq!(
            lambda_bracket(&alg, &a, &ConformalElement::generator(0)),
            ConformalElement::single(1, p("del + lam"))
        );
    }

    #[test]
    fn skew_and_jacobi_examples() {
        let alg = BlockAlgebra;
        for (a, b) in [(1, 2), (0, 0), (-3, 3)] {
            assert!(check_skew(&alg, a, b));
        }
        for (a, b, c) in [(1, 1, 1), (0, 0, 0), (2, -1, 3)] {
            assert!(check_jacobi(&alg, a, b, c));
        }
    }

    #[test]
    fn jacobi_terms_for_ones_match_hand_expansion() {
        // α = β = γ = 1: the three nested brackets written out by hand.
        let alg = BlockAlgebra;
        let l1 = ConformalElement::generator(1);
        let lhs = bracket_at(
            &alg,
            &bracket_at(&alg, &l1, &l1, &MPoly::lambda()),
            &l1,
            &p("lam + mu"),
        );
        assert_eq!(
            lhs,
            ConformalElement::single(3, p("(lam - mu)*(2*del + 3*lam + 3*mu)"))
        );
        let first = bracket_at(
            &alg,
            &l1,
            &bracket_at(&alg, &l1, &l1, &MPoly::mu()),
            &MPoly::lambda(),
        );
        assert_eq!(
            first,
            ConformalElement::single(3, p("(del + lam + 2*mu)*(del + 3*lam)"))
        );
    }

    #[test]
    fn sweep_counts() {
        let r = axiom_sweep(&BlockAlgebra, 1);
        assert_eq!((r.skew_checked, r.jacobi_checked), (9, 27));
        assert!(r.passed());
        let r = axiom_sweep(&BlockAlgebra, 3);
        assert_eq!((r.skew_checked, r.jacobi_checked), (49, 343));
        assert!(r.passed());
    }

    #[test]
    fn virasoro_passes() {
        assert!(axiom_sweep(&VirasoroAlgebra, 1).passed());
    }

    #[test]
    fn sabotaged_bracket_fails_jacobi() {
        let alg = ClosureAlgebra::new("sabotaged", |a, b| {
            let c = &(&MPoly::del().scale(&rint(a)) + &MPoly::one())
                + &MPoly::lambda().scale(&rint(a + b));
            ConformalElement::single(a + b, c)
        });
        let r = axiom_sweep(&alg, 1);
        assert!(r.failures.iter().any(|f| f.axiom == "jacobi"));
    }

    #[test]
    fn bridge_examples() {
        let pol = TruncationPolicy::new(10, 4).unwrap();
        for (a, b) in [(1, 2), (0, 0), (-2, 5)] {
            assert!(bridge_check(a, b, pol).unwrap());
        }
        let small = TruncationPolicy::new(10, 3).unwrap();
        assert!(bridge_check(1, 2, small).is_err());
    }

    #[test]
    fn residue_lambda_products() {
        let pol = TruncationPolicy::new(10, 4).unwrap();
        assert_eq!(
            residue_lambda_bracket(-1, 1, pol).unwrap(),
            ConformalElement::single(0, p("-del"))
        );
        assert!(residue_lambda_bracket(0, 0, pol).unwrap().is_zero());
    }
}
