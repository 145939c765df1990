//! Closed forms against independent evaluations on random parameters.

use apptsched::dist::excess_moment_by_quadrature;
use apptsched::engine::excess_moments;
use apptsched::fit::fit;
use apptsched::{Channel, MomentPair, SojournFit};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn channel() -> impl Strategy<Value = Channel> {
    prop_oneof![Just(Channel::Ph), Just(Channel::W), Just(Channel::Ln)]
}

// threshold as a multiple of the mean, kept where the excess is not negligible
fn case() -> impl Strategy<Value = (Channel, f64, f64, f64)> {
    (channel(), 0.1f64..10.0, 0.05f64..5.0, 0.0f64..2.5)
}

fn fitted(c: Channel, mean: f64, scv: f64) -> SojournFit {
    fit(MomentPair::new(mean, scv * mean * mean).unwrap(), c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn excess_mean_matches_quadrature((c, mean, scv, t) in case()) {
        let f = fitted(c, mean, scv);
        let x = t * mean;
        let closed = f.excess_mean(x).unwrap();
        let quad = excess_moment_by_quadrature(&f, x, 1);
        prop_assert!(rel(closed, quad) <= 1e-8, "{c} mean={mean} scv={scv} x={x}: {closed} vs {quad}");
    }

    #[test]
    fn excess_second_moment_matches_quadrature((c, mean, scv, t) in case()) {
        let f = fitted(c, mean, scv);
        let x = t * mean;
        let closed = f.excess_second_moment(x).unwrap();
        let quad = excess_moment_by_quadrature(&f, x, 2);
        prop_assert!(rel(closed, quad) <= 1e-8, "{c} mean={mean} scv={scv} x={x}: {closed} vs {quad}");
    }

    #[test]
    fn mixed_erlang_two_second_moment_forms_agree(mean in 0.1f64..10.0, scv in 0.05f64..0.999, t in 0.0f64..2.5) {
        let SojournFit::Me(d) = fitted(Channel::Ph, mean, scv) else {
            return Err(TestCaseError::fail("expected a mixed Erlang fit"));
        };
        let x = t * mean;
        let s_form = d.excess_second_moment(x).unwrap();
        let phases = d.excess_second_moment_by_phases(x).unwrap();
        prop_assert!(rel(s_form, phases) <= 1e-10, "{s_form} vs {phases}");
    }

    #[test]
    fn per_family_updates_match_generic_composition((c, mean, scv, t) in case(), beta in 0.1f64..10.0, scv_next in 0.05f64..5.0) {
        let f = fitted(c, mean, scv);
        let x = t * mean;
        let sigma2 = scv_next * beta * beta;
        let (first, second) = excess_moments(&f, x).unwrap();
        let g1 = f.excess_mean(x).unwrap();
        let g2 = f.excess_second_moment(x).unwrap();
        // r_{i+1} and v_{i+1} as the engine forms them
        let (r_fam, r_gen) = (first + beta, g1 + beta);
        let (v_fam, v_gen) = (second - first * first + sigma2, g2 - g1 * g1 + sigma2);
        prop_assert!(rel(r_fam, r_gen) <= 1e-10, "r {r_fam} vs {r_gen}");
        prop_assert!(rel(v_fam, v_gen) <= 1e-10, "v {v_fam} vs {v_gen}");
    }
}
