//! Fixed workloads for the `normalize` benchmark.

use ilal::translate::term_to_net;
use ilal::workloads::{self, Workload};
use ilal::{Net, PolySpec};

/// A spread of sizes: a long linear chain, duplication-heavy arithmetic,
/// and polynomial encodings of degree 1 and 2.
pub fn selected() -> Vec<Workload> {
    vec![
        workloads::succ_chain(20),
        workloads::arithmetic_suite(0, 6).into_iter().find(|w| w.name == "mult 6 !6").expect("in table"),
        workloads::arithmetic_suite(0, 6).into_iter().find(|w| w.name == "pred 6").expect("in table"),
        workloads::poly_application(&PolySpec::new(&[2, 3]), 4),
        workloads::poly_application(&PolySpec::new(&[1, 0, 1]), 2),
        workloads::poly_application(&PolySpec::new(&[3, 3, 3]), 4),
    ]
}

pub fn nets(ws: &[Workload]) -> Vec<(String, Net)> {
    ws.iter().map(|w| (w.name.clone(), term_to_net(&w.term).expect("stdlib terms translate"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_selected_workload_translates() {
        let ws = selected();
        assert_eq!(nets(&ws).len(), ws.len());
    }
}
