//! Visibility dependency graphs: the CFG with each straight-line segment
//! reduced to the signals it reads and each branch to its condition.

use std::collections::{BTreeSet, HashMap};

use serde_json::{json, Value};

use crate::cfg::{execute, Cfg, Cond, Terminator, Trace};
use crate::elab::{RtlGraph, Signal, SignalId};
use crate::logic::LogicVec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VdgNode {
    Dependency {
        cfg_block: usize,
        reads: Vec<SignalId>,
        next: Option<usize>,
    },
    Decision {
        cfg_block: usize,
        cond: Cond,
        reads: Vec<SignalId>,
        /// Successor per arm; `None` is the exit.
        arms: Vec<Option<usize>>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vdg {
    pub nodes: Vec<VdgNode>,
    pub entry: Option<usize>,
}

pub fn build_vdg(cfg: &Cfg) -> Vdg {
    // Walk blocks from the exit backwards so successors exist first.
    let n = cfg.blocks.len();
    let mut first: Vec<Option<usize>> = vec![None; n];
    let mut nodes: Vec<VdgNode> = Vec::new();
    for b in (0..n).rev() {
        let bb = &cfg.blocks[b];
        let after = match &bb.term {
            Terminator::Exit => None,
            Terminator::Goto(t) => first[*t],
            Terminator::Branch { cond, targets } => {
                nodes.push(VdgNode::Decision {
                    cfg_block: b,
                    cond: cond.clone(),
                    reads: bb.cond_reads.iter().copied().collect(),
                    arms: targets.iter().map(|t| first[*t]).collect(),
                });
                Some(nodes.len() - 1)
            }
        };
        first[b] = if bb.dep_reads.is_empty() {
            after
        } else {
            nodes.push(VdgNode::Dependency {
                cfg_block: b,
                reads: bb.dep_reads.iter().copied().collect(),
                next: after,
            });
            Some(nodes.len() - 1)
        };
    }
    // renumber so the entry comes first and indices follow execution order
    let count = nodes.len();
    let remap = |i: usize| count - 1 - i;
    let mut out: Vec<VdgNode> = nodes
        .into_iter()
        .rev()
        .map(|node| match node {
            VdgNode::Dependency { cfg_block, reads, next } => VdgNode::Dependency {
                cfg_block,
                reads,
                next: next.map(remap),
            },
            VdgNode::Decision {
                cfg_block,
                cond,
                reads,
                arms,
            } => VdgNode::Decision {
                cfg_block,
                cond,
                reads,
                arms: arms.into_iter().map(|a| a.map(remap)).collect(),
            },
        })
        .collect();
    out.shrink_to_fit();
    Vdg {
        nodes: out,
        entry: first[0].map(remap),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("decision input '{0}' has no value in the assignment")]
pub struct MissingInput(pub String);

/// Signals that can influence the block's results under `assignment`:
/// every read set on the path its decisions select.
pub fn dominated_inputs(
    cfg: &Cfg,
    vdg: &Vdg,
    signals: &[Signal],
    assignment: &HashMap<SignalId, LogicVec>,
) -> Result<BTreeSet<SignalId>, MissingInput> {
    let mut missing = None;
    let mut trace = Trace::default();
    execute(
        cfg,
        signals,
        &mut |s| match assignment.get(&s) {
            Some(v) => *v,
            None => LogicVec::all_x(signals[s.idx()].width),
        },
        Some(&mut trace),
        None,
    );
    let mut out = BTreeSet::new();
    let mut at = vdg.entry;
    let mut step = 0;
    while let Some(i) = at {
        match &vdg.nodes[i] {
            VdgNode::Dependency { reads, next, .. } => {
                out.extend(reads.iter().copied());
                at = *next;
            }
            VdgNode::Decision { reads, arms, .. } => {
                for r in reads {
                    if !assignment.contains_key(r) && missing.is_none() {
                        missing = Some(signals[r.idx()].name.clone());
                    }
                }
                out.extend(reads.iter().copied());
                at = arms[trace.steps[step].arm as usize];
                step += 1;
            }
        }
    }
    match missing {
        Some(m) => Err(MissingInput(m)),
        None => Ok(out),
    }
}

/// Brute-force check of the path agreement property: every two input
/// assignments that take the same path and agree on the signals the VDG
/// reads along it must produce identical writes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Soundness {
    /// Number of assignments enumerated.
    Holds(u64),
    /// More input bits than the enumeration bound.
    TooWide(u32),
    Counterexample(String),
}

pub fn brute_force_soundness(cfg: &Cfg, vdg: &Vdg, signals: &[Signal], max_bits: u32) -> Soundness {
    let inputs: Vec<SignalId> = cfg
        .blocks
        .iter()
        .flat_map(|b| b.dep_reads.iter().chain(&b.cond_reads))
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let bits: u32 = inputs.iter().map(|s| u32::from(signals[s.idx()].width)).sum();
    if bits > max_bits {
        return Soundness::TooWide(bits);
    }
    type Key = (Vec<u32>, Vec<(SignalId, LogicVec)>);
    type Writes = Vec<(SignalId, u64, LogicVec)>;
    let mut seen: HashMap<Key, (u64, Writes)> = HashMap::new();
    for code in 0..1u64 << bits {
        let mut assignment = HashMap::new();
        let mut shift = 0;
        for s in &inputs {
            let w = signals[s.idx()].width;
            assignment.insert(*s, LogicVec::from_u64(w, code >> shift));
            shift += u32::from(w);
        }
        let mut trace = Trace::default();
        let fx = execute(
            cfg,
            signals,
            &mut |s| {
                assignment
                    .get(&s)
                    .copied()
                    .unwrap_or_else(|| LogicVec::all_x(signals[s.idx()].width))
            },
            Some(&mut trace),
            None,
        );
        let dom = dominated_inputs(cfg, vdg, signals, &assignment).expect("every input is assigned");
        let key = (trace.path, dom.iter().map(|s| (*s, assignment[s])).collect());
        let writes: Vec<(SignalId, u64, LogicVec)> = fx
            .all()
            .map(|w| {
                let width = signals[w.signal.idx()].width;
                (w.signal, w.mask, LogicVec::all_x(width).merge(w.mask, &w.value))
            })
            .collect();
        match seen.get(&key) {
            Some((other, prev)) if *prev != writes => {
                return Soundness::Counterexample(format!(
                    "assignments {other:#x} and {code:#x} share a path and its reads but write differently"
                ));
            }
            Some(_) => {}
            None => {
                seen.insert(key, (code, writes));
            }
        }
    }
    Soundness::Holds(1 << bits)
}

impl Vdg {
    pub fn to_json(&self, g: &RtlGraph, block_name: &str, cfg: &Cfg) -> Value {
        let name = |s: &SignalId| g.signal(*s).name.clone();
        let nodes: Vec<Value> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| match n {
                VdgNode::Dependency { cfg_block, reads, next } => json!({
                    "id": i,
                    "kind": "dependency",
                    "cfg_block": cfg_block,
                    "reads": reads.iter().map(name).collect::<Vec<_>>(),
                    "next": next,
                }),
                VdgNode::Decision {
                    cfg_block,
                    cond,
                    reads,
                    arms,
                } => {
                    let (text, labels): (String, Vec<String>) = match cond {
                        Cond::If(e) => (g.expr_string(e), vec!["1".into(), "0".into()]),
                        Cond::Case { subject, labels } => (
                            g.expr_string(subject),
                            labels
                                .iter()
                                .map(|ls| ls.iter().map(|l| l.bits().to_string()).collect::<Vec<_>>().join(","))
                                .chain(std::iter::once("default".to_string()))
                                .collect(),
                        ),
                    };
                    json!({
                        "id": i,
                        "kind": "decision",
                        "cfg_block": cfg_block,
                        "condition": text,
                        "reads": reads.iter().map(name).collect::<Vec<_>>(),
                        "arms": labels.iter().zip(arms).map(|(l, a)| json!({"when": l, "next": a})).collect::<Vec<_>>(),
                    })
                }
            })
            .collect();
        json!({
            "block": block_name,
            "cfg_blocks": cfg.blocks.len(),
            "entry": self.entry,
            "nodes": nodes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::build_cfg;
    use crate::elab::elaborate;
    use crate::frontend::parse_design;

    fn setup(src: &str) -> (RtlGraph, Cfg, Vdg) {
        let g = elaborate(&[parse_design(src).unwrap()], None).unwrap();
        let cfg = build_cfg(&g.blocks[0], &g.signals);
        let vdg = build_vdg(&cfg);
        (g, cfg, vdg)
    }

    fn names(g: &RtlGraph, s: &BTreeSet<SignalId>) -> Vec<String> {
        s.iter()
            .map(|i| g.signal(*i).name.rsplit('.').next().unwrap().to_string())
            .collect()
    }

    #[test]
    fn brute_force_on_small_blocks() {
        for src in [
            "module top(input clk, input s, input a, input b, output reg q);
               always @(posedge clk) if (s) q <= a; else q <= b;
             endmodule",
            "module top(input clk, input [1:0] s, input a, input b, input c, output reg q, output reg r);
               reg t;
               always @(posedge clk) begin
                 t = a ^ b;
                 case (s)
                   2'd0: q <= t;
                   2'd1: begin if (t) q <= c; r <= q; end
                   default: r <= ~c;
                 endcase
               end
             endmodule",
        ] {
            let (g, cfg, vdg) = setup(src);
            assert!(matches!(
                brute_force_soundness(&cfg, &vdg, &g.signals, 12),
                Soundness::Holds(_)
            ));
        }
    }

    #[test]
    fn brute_force_reports_width_bound() {
        let (g, cfg, vdg) = setup(
            "module top(input clk, input [7:0] a, input [7:0] b, output reg [7:0] q);
               always @(posedge clk) q <= a + b;
             endmodule",
        );
        assert_eq!(
            brute_force_soundness(&cfg, &vdg, &g.signals, 12),
            Soundness::TooWide(16)
        );
    }

    #[test]
    fn mux_ff_shape() {
        let (g, _, vdg) = setup(
            "module t(input clk, input s, input a, input b, output reg q);
               always @(posedge clk) if (s) q <= a; else q <= b;
             endmodule",
        );
        assert_eq!(vdg.nodes.len(), 3);
        let VdgNode::Decision { reads, arms, .. } = &vdg.nodes[vdg.entry.unwrap()] else {
            panic!("entry should be the decision");
        };
        assert_eq!(reads, &vec![g.signal_by_name("t.s").unwrap()]);
        let dep = |a: Option<usize>| match &vdg.nodes[a.unwrap()] {
            VdgNode::Dependency { reads, next, .. } => {
                assert_eq!(*next, None);
                g.signal(reads[0]).name.clone()
            }
            _ => panic!(),
        };
        assert_eq!(dep(arms[0]), "t.a");
        assert_eq!(dep(arms[1]), "t.b");
    }

    #[test]
    fn empty_then_branch_points_at_join() {
        let (_, cfg, vdg) = setup(
            "module t(input clk, input s, input b, input c, output reg q, output reg p);
               always @(posedge clk) begin
                 if (s) ; else q <= b;
                 p <= c;
               end
             endmodule",
        );
        assert_eq!(cfg.blocks.len(), 4);
        let VdgNode::Decision { arms, .. } = &vdg.nodes[0] else {
            panic!()
        };
        let VdgNode::Dependency { cfg_block, .. } = &vdg.nodes[arms[0].unwrap()] else {
            panic!()
        };
        assert_eq!(*cfg_block, 3, "then arm skips to the join");
        assert!(vdg.nodes.len() <= cfg.blocks.len() + cfg.branch_count());
    }

    #[test]
    fn nested_branch_dominated_set() {
        let (g, cfg, vdg) = setup(
            "module t(input clk, input s, input a, input c, input g, input k, input r,
                      output reg q, output reg z);
               always @(posedge clk)
                 if (s) begin q <= c & g; z <= k; end
                 else begin
                   if (a) q <= r; else q <= 1'b0;
                   z <= r;
                 end
             endmodule",
        );
        let mut asg = HashMap::new();
        for n in ["s", "a", "c", "g", "k", "r"] {
            asg.insert(g.signal_by_name(&format!("t.{n}")).unwrap(), LogicVec::bit(false));
        }
        asg.insert(g.signal_by_name("t.s").unwrap(), LogicVec::bit(true));
        let d = dominated_inputs(&cfg, &vdg, &g.signals, &asg).unwrap();
        assert_eq!(names(&g, &d), vec!["s", "c", "g", "k"]);

        asg.insert(g.signal_by_name("t.s").unwrap(), LogicVec::bit(false));
        let d = dominated_inputs(&cfg, &vdg, &g.signals, &asg).unwrap();
        assert_eq!(names(&g, &d), vec!["s", "a", "r"]);
    }

    #[test]
    fn missing_decision_input() {
        let (g, cfg, vdg) = setup(
            "module t(input clk, input s, input a, input b, output reg q);
               always @(posedge clk) if (s) q <= a; else q <= b;
             endmodule",
        );
        let asg = HashMap::from([(g.signal_by_name("t.a").unwrap(), LogicVec::bit(true))]);
        let e = dominated_inputs(&cfg, &vdg, &g.signals, &asg).unwrap_err();
        assert_eq!(e.0, "t.s");
    }

    #[test]
    fn straight_line_reads_everything() {
        let (g, cfg, vdg) = setup(
            "module t(input clk, input a, input b, output reg q);
               always @(posedge clk) q <= a ^ b;
             endmodule",
        );
        let d = dominated_inputs(&cfg, &vdg, &g.signals, &HashMap::new()).unwrap();
        assert_eq!(names(&g, &d), vec!["a", "b"]);
    }
}
