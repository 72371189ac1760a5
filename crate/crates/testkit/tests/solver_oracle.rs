use bnncert::check::{check_xlrup, Outcome};
use bnncert::elaborate::elaborate;
use bnncert::solver::solve_formula;
use bnncert::{SolverConfig, Verdict};
use bnncert_testkit::{brute_force_sat, gen_adversarial_bnn, gen_formula, GenParams};

fn checked() -> SolverConfig {
    SolverConfig { check_counters: true, ..SolverConfig::default() }
}

fn cross_check(f: &bnncert::Formula, what: &str) -> bool {
    let expected = brute_force_sat(f).unwrap();
    let mut frat = Vec::new();
    let got = solve_formula(f, checked(), Some(&mut frat)).unwrap();
    match &got {
        Verdict::Sat(m) => {
            assert!(expected.is_sat(), "{what}: solver SAT, oracle UNSAT");
            assert_eq!(f.evaluate(&m.truncated(f.num_vars())), Ok(true), "{what}: bad model");
        }
        Verdict::Unsat => {
            assert!(!expected.is_sat(), "{what}: solver UNSAT, oracle SAT");
            let frat = String::from_utf8(frat).unwrap();
            let xlrup = elaborate(f, &frat).unwrap_or_else(|e| panic!("{what}: {e}\n{frat}"));
            let outcome = check_xlrup(f, &xlrup).unwrap();
            assert_eq!(outcome, Outcome::Verified, "{what}:\n{frat}\n---\n{xlrup}");
        }
    }
    got.is_sat()
}

fn run(n: u64, gen: impl Fn(u64) -> bnncert::Formula, name: &str) {
    let sat = (0..n).filter(|&seed| cross_check(&gen(seed), &format!("{name} seed {seed}"))).count() as u64;
    eprintln!("{name}: {sat}/{n} satisfiable");
    assert!(sat > n / 10 && sat < n - n / 10, "{name}: unbalanced corpus, {sat}/{n} satisfiable");
}

#[test]
fn random_formulas_agree_with_oracle() {
    let p = GenParams::default();
    run(300, |seed| gen_formula(&p, seed), "gen_formula");
}

#[test]
fn adversarial_bnn_formulas_agree_with_oracle() {
    run(200, gen_adversarial_bnn, "gen_adversarial_bnn");
}

#[test]
fn small_dense_formulas() {
    let p = GenParams { max_vars: 6, max_clauses: 12, max_bnns: 3, max_bnn_len: 5, max_xors: 2, max_xor_len: 4 };
    run(500, |seed| gen_formula(&p, seed), "small");
}
