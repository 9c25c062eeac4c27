//! Worked examples against values frozen from an independent table computation.

use cosetmac::model::builtin_example;
use cosetmac::regions::{alpha_rate, computation_lambda, lcc_rate, separation_lambda, separation_outer_lambda};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn alpha_of(id: u32) -> f64 {
    let inst = builtin_example(id).unwrap();
    alpha_rate(&inst.source, &inst.mac, inst.test_channel.as_ref().unwrap()).unwrap()
}

#[test]
fn example_one() {
    let inst = builtin_example(1).unwrap();
    assert!(close(alpha_of(1), 1.0, 1e-12));
    let lcc = lcc_rate(&inst.mac, 5).bits().unwrap();
    let l = computation_lambda(&inst.source, lcc).value().unwrap();
    assert!(close(l, 0.6 * 3f64.log2() / 5f64.log2(), 1e-9), "{l}");
    let sep = separation_lambda(&inst.source, &inst.mac, 16).unwrap().value().unwrap();
    assert!(close(sep, 0.5 * 3f64.log2() / 5f64.log2(), 1e-6), "{sep}");
}

#[test]
fn example_two() {
    let inst = builtin_example(2).unwrap();
    let a = alpha_of(2);
    assert!(close(a, 0.454_200_285_453_529, 1e-9), "{a}");
    let lcc = lcc_rate(&inst.mac, 5).bits().unwrap();
    assert!(close(lcc, 0.609_580_144_279_125, 1e-9), "{lcc}");
    let outer = separation_outer_lambda(&inst.source, &inst.mac).value().unwrap();
    assert!(close(outer, 0.5 * 3f64.log2() / 5f64.log2(), 1e-12));
    let sep = separation_lambda(&inst.source, &inst.mac, 16).unwrap().value().unwrap();
    let oracle = (3f64.log2() - entropy(&[0.9, 0.05, 0.05])) / (2.0 * 5f64.log2());
    assert!(close(sep, oracle, 1e-6), "{sep} vs {oracle}");
}

#[test]
fn example_three() {
    let inst = builtin_example(3).unwrap();
    let a = alpha_of(3);
    assert!(close(a, 0.479_082_650_004_624, 1e-9), "{a}");
    let l = computation_lambda(&inst.source, a).value().unwrap();
    assert!(close(l, 0.302_267_498_307_778, 1e-9), "{l}");
    // 1 - h(0.1) over 2 log2 3
    let sep = separation_lambda(&inst.source, &inst.mac, 16).unwrap().value().unwrap();
    assert!(close(sep, 0.167_513_239_641_036, 1e-6), "{sep}");
}

#[test]
fn example_four() {
    assert!(close(alpha_of(4), 0.458_777_929_889_969, 1e-9));
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.log2()).sum::<f64>()
}
