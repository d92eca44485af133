use hybridlin::ballbeam::PlantParams;
use hybridlin::controllers::LawDescriptor;
use hybridlin::coverage::{
    coverage_check, factor_check, necessity_witness, pure_part_sample, SingularityFactor, StateBox, WITNESS_TOL,
};
use hybridlin::expr::parse;
use proptest::prelude::*;

fn factor(t: &str) -> SingularityFactor {
    SingularityFactor::new(parse(t, 4).unwrap(), t)
}

fn subsets<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    (1..(1u32 << items.len()))
        .map(|mask| items.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, t)| t.clone()).collect())
        .collect()
}

#[test]
fn law1_coefficient_factors_to_constant() {
    let p = PlantParams::benchmark().bindings();
    let a = LawDescriptor::law1().coefficient;
    let fc = factor_check(&a, &[factor("x1"), factor("x4")], &p, &StateBox::symmetric(4, 1.0), 10_000, 17).unwrap();
    assert!(fc.max_relative_residual < 1e-10);
    assert!(((fc.constant - 10.0 / 7.0) / (10.0 / 7.0)).abs() < 1e-10);
}

#[test]
fn every_nonempty_subset_of_the_defeatable_laws_has_a_witness() {
    let p = PlantParams::benchmark().bindings();
    let laws = [LawDescriptor::law1(), LawDescriptor::law2(), LawDescriptor::law3_alternate()];
    for subset in subsets(&laws) {
        let w = necessity_witness(&subset, &p).unwrap();
        let labels: Vec<&str> = subset.iter().map(|l| l.label.as_str()).collect();
        let w = w.unwrap_or_else(|| panic!("no witness for {labels:?}"));
        for law in &subset {
            let a = law.coefficient.eval_at(&p, &w).unwrap();
            assert!(a.abs() < WITNESS_TOL, "{labels:?} at {w:?}: {} = {a}", law.label);
        }
    }
}

#[test]
fn alternate_pair_witness_zeroes_both_coefficients() {
    let p = PlantParams::benchmark().bindings();
    let laws = [LawDescriptor::law1(), LawDescriptor::law3_alternate()];
    let w = necessity_witness(&laws, &p).unwrap().unwrap();
    assert!(w[0] == 0.0 || w[3] == 0.0);
    assert!((2.0 * 5.0 / 7.0 * w[1] * w[3] - 5.0 / 7.0 * 9.81 * w[2].cos()).abs() < WITNESS_TOL);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn table_laws_always_cover(n in 0usize..5000, seed in any::<u64>(), half in 0.5f64..4.0) {
        let p = PlantParams::benchmark().bindings();
        let report = coverage_check(&LawDescriptor::table(), &p, &StateBox::symmetric(4, half), n, 0.0, seed).unwrap();
        prop_assert!(report.is_complete());
        prop_assert_eq!(report.samples, n);
        let total: f64 = report.coverage_fractions[2];
        prop_assert!(n == 0 || total == 1.0);
    }

    #[test]
    fn pure_parts_keep_other_factors_away(seed in any::<u64>(), which in 0usize..3) {
        let p = PlantParams::benchmark().bindings();
        let factors = [factor("x1"), factor("x4"), factor("cos(x3)")];
        let bx = StateBox::symmetric(4, 2.0);
        let pts = pure_part_sample(which, &factors, &p, &bx, 50, seed).unwrap();
        prop_assert_eq!(pts.len(), 50);
        for x in &pts {
            prop_assert!(factors[which].eval(&p, x).unwrap().abs() < 1e-12);
            for (j, f) in factors.iter().enumerate() {
                if j != which {
                    prop_assert!(f.eval(&p, x).unwrap().abs() > 0.1);
                }
            }
        }
    }
}
