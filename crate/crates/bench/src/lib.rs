//! Shared fixtures for the criterion benches.

use std::fmt::Write as _;
use std::path::Path;

use eraser_core::elab::elaborate;
use eraser_core::frontend::parse_design_named;
use eraser_core::kernel::Design;
use eraser_core::stimulus::{parse_stimulus, Stimulus};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Elaborate `corpus/<name>/design.v`.
pub fn corpus_design(name: &str) -> Design {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
        .join("design.v");
    let text = std::fs::read_to_string(&path).expect("corpus design");
    let unit = parse_design_named(&path.display().to_string(), &text).expect("corpus design parses");
    Design::new(elaborate(&[unit], None).expect("corpus design elaborates"))
}

/// `cycles` clock cycles of deep_branch traffic: fixed branch selects, fresh
/// random lane data every cycle.
pub fn deep_branch_stimulus(d: &Design, cycles: u64, seed: u64) -> Stimulus {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut s = String::from("clock clk period 10\n@0\nmode = 2'd2\nsub = 2'd1\n");
    for c in 0..cycles {
        if c > 0 {
            writeln!(s, "@{}", c * 10 + 3).unwrap();
        }
        for lane in ["a", "b", "c", "d"] {
            writeln!(s, "din_{lane} = 16'h{:04x}", rng.random::<u16>()).unwrap();
        }
    }
    writeln!(s, "end {}", cycles * 10 + 10).unwrap();
    parse_stimulus(&s).unwrap().resolve(&d.graph).unwrap()
}
