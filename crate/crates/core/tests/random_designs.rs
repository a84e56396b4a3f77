//! Random designs and stimuli: the concurrent kernel in every mode must
//! reproduce the serial oracle exactly and never skip unsoundly.

use eraser_core::elab::elaborate;
use eraser_core::fault::{enumerate_faults, Counters};
use eraser_core::frontend::parse_design;
use eraser_core::kernel::{simulate, Design, Mode, Options};
use eraser_core::oracle::run_oracle;
use eraser_core::stimulus::parse_stimulus;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Gen {
    rng: StdRng,
}

#[derive(Clone)]
struct Sig {
    name: String,
    width: u32,
}

impl Gen {
    fn pick<'a, T>(&mut self, v: &'a [T]) -> &'a T {
        &v[self.rng.random_range(0..v.len())]
    }

    fn konst(&mut self, w: u32) -> String {
        let v = self.rng.random_range(0..(1u64 << w));
        format!("{w}'d{v}")
    }

    fn leaf(&mut self, pool: &[Sig]) -> String {
        let s = self.pick(pool).clone();
        match self.rng.random_range(0..6) {
            0 => {
                let w = self.rng.random_range(1..=4);
                self.konst(w)
            }
            1 if s.width > 1 => format!("{}[{}]", s.name, self.rng.random_range(0..s.width)),
            _ => s.name,
        }
    }

    fn expr(&mut self, pool: &[Sig], depth: u32) -> String {
        if depth == 0 || self.rng.random_bool(0.3) {
            return self.leaf(pool);
        }
        let a = self.expr(pool, depth - 1);
        let b = self.expr(pool, depth - 1);
        match self.rng.random_range(0..12) {
            0 => format!("(~{a})"),
            1 => format!("({a} & {b})"),
            2 => format!("({a} | {b})"),
            3 => format!("({a} ^ {b})"),
            4 => format!("({a} + {b})"),
            5 => format!("({a} - {b})"),
            6 => format!("({a} == {b})"),
            7 => format!("({a} < {b})"),
            8 => {
                let c = self.expr(pool, depth - 1);
                format!("({c} ? {a} : {b})")
            }
            9 => format!("{{{}, {}}}", self.leaf(pool), self.leaf(pool)),
            10 => format!("({a} << 1)"),
            _ => format!("({a} != {b})"),
        }
    }

    fn stmts(&mut self, pool: &[Sig], targets: &[Sig], op: &str, depth: u32, out: &mut String) {
        let n = self.rng.random_range(1..=2);
        for _ in 0..n {
            match self.rng.random_range(0..4) {
                0 if depth > 0 => {
                    let c = self.expr(pool, 2);
                    out.push_str(&format!("if ({c}) begin\n"));
                    self.stmts(pool, targets, op, depth - 1, out);
                    out.push_str("end else begin\n");
                    self.stmts(pool, targets, op, depth - 1, out);
                    out.push_str("end\n");
                }
                1 if depth > 0 => {
                    let subj = self.leaf(pool);
                    out.push_str(&format!("case ({subj})\n"));
                    for k in 0..self.rng.random_range(1..=3u32) {
                        out.push_str(&format!("{}'d{k}: begin\n", 2));
                        self.stmts(pool, targets, op, depth - 1, out);
                        out.push_str("end\n");
                    }
                    if self.rng.random_bool(0.5) {
                        out.push_str("default: begin\n");
                        self.stmts(pool, targets, op, depth - 1, out);
                        out.push_str("end\n");
                    }
                    out.push_str("endcase\n");
                }
                _ => {
                    let t = self.pick(targets).clone();
                    let e = self.expr(pool, 3);
                    if t.width > 1 && self.rng.random_bool(0.2) {
                        let b = self.rng.random_range(0..t.width);
                        out.push_str(&format!("{}[{b}] {op} {e};\n", t.name));
                    } else {
                        out.push_str(&format!("{} {op} {e};\n", t.name));
                    }
                }
            }
        }
    }

    fn design(&mut self) -> (String, Vec<Sig>) {
        let w = |g: &mut Gen| g.rng.random_range(1..=4u32);
        let decl = |s: &Sig| {
            if s.width == 1 {
                String::new()
            } else {
                format!("[{}:0] ", s.width - 1)
            }
        };
        let inputs: Vec<Sig> = (0..self.rng.random_range(2..=4))
            .map(|i| Sig {
                name: format!("in{i}"),
                width: w(self),
            })
            .collect();
        let regs: Vec<Sig> = (0..self.rng.random_range(1..=3))
            .map(|i| Sig {
                name: format!("r{i}"),
                width: w(self),
            })
            .collect();
        let wires: Vec<Sig> = (0..self.rng.random_range(0..=2))
            .map(|i| Sig {
                name: format!("w{i}"),
                width: w(self),
            })
            .collect();
        let combs: Vec<Sig> = (0..self.rng.random_range(0..=2))
            .map(|i| Sig {
                name: format!("c{i}"),
                width: w(self),
            })
            .collect();
        let outputs: Vec<Sig> = (0..self.rng.random_range(1..=3))
            .map(|i| Sig {
                name: format!("o{i}"),
                width: w(self),
            })
            .collect();

        let mut ports = vec!["input clk".to_string()];
        ports.extend(inputs.iter().map(|s| format!("input {}{}", decl(s), s.name)));
        ports.extend(outputs.iter().map(|s| format!("output {}{}", decl(s), s.name)));
        let mut v = format!("module top({});\n", ports.join(", "));
        for s in &regs {
            v.push_str(&format!("reg {}{};\n", decl(s), s.name));
        }
        for s in &combs {
            v.push_str(&format!("reg {}{};\n", decl(s), s.name));
        }
        let temp = Sig {
            name: "t0".into(),
            width: w(self),
        };
        v.push_str(&format!("reg {}t0;\n", decl(&temp)));

        let mut pool: Vec<Sig> = inputs.iter().chain(&regs).cloned().collect();
        for s in &wires {
            let e = self.expr(&pool, 3);
            v.push_str(&format!("wire {}{} = {e};\n", decl(s), s.name));
            pool.push(s.clone());
        }
        if !combs.is_empty() {
            v.push_str("always @(*) begin\n");
            for c in &combs {
                let e = self.expr(&pool, 2);
                v.push_str(&format!("{} = {e};\n", c.name));
            }
            self.stmts(&pool, &combs, "=", 2, &mut v);
            v.push_str("end\n");
            pool.extend(combs.iter().cloned());
        }
        // split the registers over one or two clocked blocks
        let split = if regs.len() > 1 && self.rng.random_bool(0.5) {
            1
        } else {
            regs.len()
        };
        for (i, group) in [&regs[..split], &regs[split..]].into_iter().enumerate() {
            if group.is_empty() {
                continue;
            }
            let edge = if self.rng.random_bool(0.8) {
                "posedge"
            } else {
                "negedge"
            };
            v.push_str(&format!("always @({edge} clk) begin\n"));
            if i == 0 && self.rng.random_bool(0.5) {
                let e = self.expr(&pool, 2);
                v.push_str(&format!("t0 = {e};\n"));
                let mut p = pool.clone();
                p.push(temp.clone());
                self.stmts(&p, group, "<=", 3, &mut v);
            } else {
                self.stmts(&pool, group, "<=", 3, &mut v);
            }
            v.push_str("end\n");
        }
        for o in &outputs {
            let e = self.expr(&pool, 2);
            v.push_str(&format!("assign {} = {e};\n", o.name));
        }
        v.push_str("endmodule\n");
        (v, inputs)
    }

    fn stimulus(&mut self, inputs: &[Sig]) -> String {
        let mut s = String::from("clock clk period 4\n");
        let mut t = 0;
        while t < 80 {
            s.push_str(&format!("@{t}\n"));
            for i in inputs {
                if t == 0 || self.rng.random_bool(0.4) {
                    s.push_str(&format!("{} = {}\n", i.name, self.konst(i.width)));
                }
            }
            t += self.rng.random_range(1..=7);
        }
        s.push_str("end 90\n");
        s
    }
}

/// Returns the full-mode counter totals and the number of verified skips.
fn check(seed: u64, observe_on_bad: bool, drop: bool) -> Result<(Counters, u64), TestCaseError> {
    let mut g = Gen {
        rng: StdRng::seed_from_u64(seed),
    };
    let (src, inputs) = g.design();
    let unit = parse_design(&src).map_err(|e| TestCaseError::fail(format!("{e}\n{src}")))?;
    let graph = match elaborate(&[unit], None) {
        Ok(g) => g,
        // random blocks can legitimately fail elaboration checks
        Err(e) if e.rule() == "comb-self-read" => return Ok((Counters::default(), 0)),
        Err(e) => return Err(TestCaseError::fail(format!("{e}\n{src}"))),
    };
    let d = Design::new(graph);
    let stim = parse_stimulus(&g.stimulus(&inputs)).unwrap().resolve(&d.graph).unwrap();
    let faults = enumerate_faults(&d.graph);
    let expect = run_oracle(&d, &faults, &stim, observe_on_bad, 1000, 1).unwrap();
    let mut execs = Vec::new();
    let mut full = (Counters::default(), 0);
    for mode in [Mode::None, Mode::Explicit, Mode::Full] {
        let opts = Options {
            mode,
            verify: true,
            observe_on_bad,
            drop,
            ..Options::default()
        };
        let r = simulate(&d, faults.clone(), &stim, &opts, None).unwrap();
        for i in 0..faults.len() {
            prop_assert_eq!(
                r.db.status[i],
                expect[i],
                "mode {} fault {}\n{}",
                mode,
                faults[i].name(&d.graph),
                src
            );
            prop_assert!(r.db.counters[i].identity_holds());
        }
        prop_assert_eq!(r.verify.violations, 0, "mode {}\n{}", mode, src);
        execs.push((r.db.totals().executions, r.db.totals().activations));
        full = (r.db.totals(), r.verify.checked);
    }
    prop_assert!(execs[2].0 <= execs[1].0 && execs[1].0 <= execs[0].0, "{:?}", execs);
    prop_assert_eq!(execs[0].0, execs[0].1);
    prop_assert!(execs.iter().all(|e| e.1 == execs[0].1), "{:?}", execs);
    Ok(full)
}

#[test]
fn random_corpus_exercises_both_skip_kinds() {
    let mut total = Counters::default();
    let mut checked = 0;
    for seed in 0..60 {
        let (c, v) = check(seed, false, true).unwrap();
        total.add(&c);
        checked += v;
    }
    assert!(total.explicit_skips > 0, "{total:?}");
    assert!(total.implicit_skips > 0, "{total:?}");
    assert_eq!(checked, total.explicit_skips + total.implicit_skips);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kernel_matches_oracle(seed in any::<u64>()) {
        check(seed, false, true)?;
    }

    #[test]
    fn kernel_matches_oracle_observing_bad_events(seed in any::<u64>()) {
        check(seed, true, false)?;
    }
}
