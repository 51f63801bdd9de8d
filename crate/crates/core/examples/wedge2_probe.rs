//! Scratch probe: stencil values at the pair-(0,1) residual argmax.

use pide_backstep::cli::{build_pipeline, RunOptions};

fn main() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/wide_gap_probe.json");
    let mut run = RunOptions::new(data);
    run.grid = Some(201);
    let pipe = build_pipeline(&run).unwrap();
    let mut run4 = run.clone();
    run4.grid = Some(401);
    run4.tol = Some(5e-4);
    let fine = build_pipeline(&run4).unwrap();
    let sol = &pipe.sol;
    let fsol = &fine.sol;
    let pair = 1usize;
    let mm = sol.grid_n;
    let fm = fsol.grid_n;
    let stride = (fm - 1) / (mm - 1);
    let z = &sol.z_nodes;
    let h = 1.0 / (mm - 1) as f64;
    let table = &sol.k[pair];
    let ftable = &fsol.k[pair];

    // argmax node from the probe: z=0.58, zeta=0.025
    let iz = (0.58 / h).round() as usize;
    let ic = (0.025 / h).round() as usize;
    println!("node (z={}, zeta={}), curve201={:+.5} curve401={:+.5}",
        z[iz], z[ic], table.curve[iz], ftable.curve[iz * stride]);
    for (a, b, label) in [
        (iz - 1, ic, "z-h"),
        (iz, ic, "ctr"),
        (iz + 1, ic, "z+h"),
        (iz, ic - 1, "c-h"),
        (iz, ic + 1, "c+h"),
    ] {
        let side_pos = z[b] <= table.curve[a];
        let v201p = table.sheet_pos.at(a, b);
        let v201n = table.sheet_neg.as_ref().unwrap().at(a, b);
        let v401p = ftable.sheet_pos.at(a * stride, b * stride);
        let v401n = ftable.sheet_neg.as_ref().unwrap().at(a * stride, b * stride);
        println!(
            "  {label}: side={} pos 201/401 = {v201p:+.6}/{v401p:+.6}  neg 201/401 = {v201n:+.6}/{v401n:+.6}",
            if side_pos { "pos" } else { "neg" }
        );
    }
}
