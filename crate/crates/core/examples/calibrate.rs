// scratch calibration (deleted before ship)
use sched_core::experiments::*;
use sched_core::generators::AMode;

fn main() {
    let t0 = std::time::Instant::now();
    for (label, a) in [("a1", AMode::FixedOne), ("rand", AMode::Uniform)] {
        for (decay, pmf) in FIGURE_PANELS {
            let curve = run_figure_large(decay, pmf, a, 200, 0xACCE97).unwrap();
            print!("{label} {:30}", curve.name);
            for p in &curve.points {
                let g = p.result("greedy").value.mean;
                let rg = p.result("rate-greedy").value.mean;
                let e = p.result("edf").value.mean;
                print!(" J{}[g{:.2} r{:.2} e{:.2}]", p.spec.jobs, g, rg, e);
            }
            println!();
        }
    }
    println!("figures took {:?}", t0.elapsed());

    let t0 = std::time::Instant::now();
    let patient = run_patient(100, 0xACCE97).unwrap();
    for p in &patient.points {
        println!(
            "J={:3} greedy v={:8.3} sf={:.3}  rate v={:8.3} sf={:.3}  edf v={:8.3} sf={:.3}",
            p.spec.jobs,
            p.result("greedy").value.mean, p.result("greedy").served_fraction.mean,
            p.result("rate-greedy").value.mean, p.result("rate-greedy").served_fraction.mean,
            p.result("edf").value.mean, p.result("edf").served_fraction.mean,
        );
    }
    println!("patient took {:?}", t0.elapsed());
}
