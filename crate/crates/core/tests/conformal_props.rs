use conformal_workbench::conformal::{
    jacobi_residual, lambda_bracket, skew_residual, BlockAlgebra, ConformalElement,
};
use conformal_workbench::ratpoly::{rat, MPoly, Monomial, Var};
use proptest::prelude::*;

fn del_poly() -> impl Strategy<Value = MPoly> {
    prop::collection::vec((0u32..3, -4i64..=4, 1i64..=3), 1..3).prop_map(|terms| {
        MPoly::from_terms(
            terms
                .into_iter()
                .map(|(k, n, d)| (Monomial::var_pow(Var::Del, k), rat(n, d))),
        )
    })
}

fn element() -> impl Strategy<Value = ConformalElement> {
    prop::collection::vec((-3i64..=3, del_poly()), 1..3).prop_map(|terms| {
        let mut e = ConformalElement::zero();
        for (alpha, p) in terms {
            e.add_term(alpha, &p);
        }
        e
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sesquilinearity(a in element(), b in element()) {
        let alg = BlockAlgebra;
        let base = lambda_bracket(&alg, &a, &b);
        let left = lambda_bracket(&alg, &a.derivative(), &b);
        prop_assert_eq!(left, base.scale(&(-MPoly::lambda())));
        let right = lambda_bracket(&alg, &a, &b.derivative());
        prop_assert_eq!(right, base.scale(&(&MPoly::del() + &MPoly::lambda())));
    }

    #[test]
    fn skew_symmetry_on_combinations(a in element(), b in element()) {
        prop_assert!(skew_residual(&BlockAlgebra, &a, &b).is_zero());
    }

    #[test]
    fn jacobi_on_combinations(a in element(), b in element(), c in element()) {
        prop_assert!(jacobi_residual(&BlockAlgebra, &a, &b, &c).is_zero());
    }
}
