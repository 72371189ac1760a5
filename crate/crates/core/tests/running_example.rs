//! The four-variable running example: a clause pair, an XOR, a unit and one
//! BNN constraint, unsatisfiable only through their interaction.

use bnncert::certify::{check_certificate, CertOutcome};
use bnncert::check::{check_xlrup, Outcome};
use bnncert::count::{approx_count, CountParams};
use bnncert::elaborate::elaborate;
use bnncert::formula::{parse_formula, write_formula};
use bnncert::solver::solve_formula;
use bnncert::{Assignment, Formula, Lit, Solver, SolverConfig, Var, Verdict};

const EXAMPLE: &str = "p cnf 4 5\n1 -2 0\n-1 3 0\nx 1 -2 -3 0\n-4 0\nb 1 -2 3 0 2 4 0\n";

const FRAT: &str = "o 1 1 -2 0\no 2 -1 3 0\no x 1 1 -2 -3 0\no 3 -4 0\no b 1 1 -2 3 0 k 2 4 0\n\
                    i 4 -1 -3 0 b l 1 0 u 3 0\ni 5 2 -3 0 b l 1 0 u 3 0\na 6 -3 0\na 7 -1 0\na 8 -2 0\n\
                    i 9 1 2 3 0 l 1 0\na 10 0\n";

const XLRUP: &str = "o x 1 1 -2 -3 0\ni cb 4 -1 -3 0 1 u 3 0\ni cb 5 2 -3 0 1 u 3 0\n5 d 3 0\n\
                     6 -3 0 4 1 5 0\n6 d 5 4 0\n7 -1 0 6 2 0\n7 d 2 0\n8 -2 0 7 1 0\n8 d 1 0\n\
                     i cx 9 1 2 3 0 1 0\n10 0 7 6 9 8 0\n";

fn example() -> Formula {
    parse_formula(EXAMPLE.as_bytes()).unwrap()
}

#[test]
fn parses_and_round_trips() {
    let f = example();
    assert_eq!(f.num_vars(), 4);
    assert_eq!((f.clauses().len(), f.xors().len(), f.bnns().len()), (3, 1, 1));
    assert_eq!(parse_formula(write_formula(&f).as_bytes()).unwrap(), f);
}

#[test]
fn every_assignment_is_rejected() {
    let f = example();
    for bits in 0..16 {
        assert_eq!(f.evaluate(&Assignment::from_bits(4, bits)), Ok(false), "{bits:04b}");
    }
}

#[test]
fn bnn_propagation_after_unit_and_decision() {
    // With x4 false, assuming x3 forces x1 false and x2 true.
    let f = example();
    let mut s = Solver::new(&f, SolverConfig { check_counters: true, ..SolverConfig::default() });
    let p = s.probe(&[Lit::from_dimacs(3)]).unwrap();
    let mut implied: Vec<i64> = p.implied.iter().map(|(l, _)| l.to_dimacs()).collect();
    implied.sort();
    assert!(implied.contains(&-1) && implied.contains(&2), "{implied:?}");
}

#[test]
fn reference_frat_elaborates_to_a_checked_proof() {
    let f = example();
    let x = elaborate(&f, FRAT).unwrap();
    assert_eq!(check_xlrup(&f, &x).unwrap(), Outcome::Verified);
}

#[test]
fn reference_xlrup_is_verified() {
    assert_eq!(check_xlrup(&example(), XLRUP).unwrap(), Outcome::Verified);
}

#[test]
fn reference_xlrup_with_wrong_cutoff_is_rejected() {
    let weaker = parse_formula(EXAMPLE.replace("0 2 4 0", "0 3 4 0").as_bytes()).unwrap();
    assert!(matches!(check_xlrup(&weaker, XLRUP).unwrap(), Outcome::Rejected { .. }));
}

#[test]
fn solver_proof_pipeline() {
    let f = example();
    let mut frat = Vec::new();
    let v = solve_formula(&f, SolverConfig::default(), Some(&mut frat)).unwrap();
    assert_eq!(v, Verdict::Unsat);
    let frat = String::from_utf8(frat).unwrap();
    assert!(frat.lines().any(|l| l == "o b 1 1 -2 3 0 k 2 4 0"));
    assert!(frat.lines().any(|l| l.starts_with("i ") && l.contains(" b l 1 0")));
    let x = elaborate(&f, &frat).unwrap();
    assert_eq!(check_xlrup(&f, &x).unwrap(), Outcome::Verified);
}

#[test]
fn without_the_xor_one_model_remains() {
    let f = parse_formula(b"p cnf 4 4\n1 -2 0\n-1 3 0\n-4 0\nb 1 -2 3 0 2 4 0\n").unwrap();
    let Verdict::Sat(m) = Solver::new(&f, SolverConfig::default()).solve(&[]).unwrap() else { panic!() };
    let m = m.truncated(4);
    assert_eq!([1, 2, 3, 4].map(|v| m.value(Var::new(v)).unwrap()), [false, false, false, false]);
}

#[test]
fn count_of_clausal_form_is_certified_zero() {
    // The XOR x1 ^ ~x2 ^ ~x3 written as the four clauses it excludes.
    let f = parse_formula(
        b"p cnf 4 8\n1 -2 0\n-1 3 0\n-4 0\nb 1 -2 3 0 2 4 0\n1 2 3 0\n1 -2 -3 0\n-1 2 -3 0\n-1 -2 3 0\n",
    )
    .unwrap();
    let (est, cert) = approx_count(&f, &CountParams::default(), SolverConfig::default()).unwrap();
    assert_eq!(est, 0u32.into());
    assert_eq!(check_certificate(&f, &cert, SolverConfig::default()), CertOutcome::Certified(0u32.into()));
}
