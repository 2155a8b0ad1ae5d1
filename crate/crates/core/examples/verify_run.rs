fn main() {
    let results = ltebm::verify::run_oracle_suite(&ltebm::verify::VerifyOptions::default());
    for r in &results {
        println!("{} {:>9} measured {:+.3e} expected {:+.3e} tol {:.1e}", r.name, if r.pass {"PASS"} else {"FAIL"}, r.measured, r.expected, r.tolerance);
    }
}
