//! Plain-text dump of a lowered program for cross-checking with external
//! solvers.
//!
//! Format, one record per line:
//!
//! ```text
//! conic-program v1
//! sense minimize|maximize          # of the original problem; c is for minimization
//! nvars <n>
//! neqs <m>
//! blocks <k> <size_1> ... <size_k>
//! offset <objective constant>
//! var <name> <psd|free> <first column> <count> <label>=<dim>,...
//! con <name> <psd|zero> <block index or first row> <size>
//! c <col> <value>                  # nonzeros of c
//! A <row> <col> <value>            # nonzeros of A
//! b <row> <value>                  # nonzeros of b
//! G <col> <block> <row> <col> <value>
//! h <block> <row> <col> <value>    # nonzeros of h
//! end
//! ```
//!
//! The program is `minimize cᵀx s.t. Gx + s = h, Ax = b`, with `s` block
//! diagonal positive semi-definite. All indices are zero based and both
//! triangles of symmetric blocks are listed.

use std::fmt::Write;

use super::embed::{embed_real, BlockOrigin};
use super::model::{Cone, Relation, SdpProblem};
use crate::error::Result;

pub fn dump_text(problem: &SdpProblem) -> Result<String> {
    let p = embed_real(problem)?;
    let mut out = String::new();
    let w = &mut out;
    // Writing to a String cannot fail.
    let _ = writeln!(w, "conic-program v1");
    let _ = writeln!(w, "sense {}", if p.negated { "maximize" } else { "minimize" });
    let _ = writeln!(w, "nvars {}", p.num_vars());
    let _ = writeln!(w, "neqs {}", p.num_eqs());
    let sizes: Vec<String> = p.blocks.iter().map(|b| b.to_string()).collect();
    let _ = writeln!(w, "blocks {} {}", p.blocks.len(), sizes.join(" "));
    let _ = writeln!(w, "offset {}", p.objective_offset);
    for (k, v) in problem.variables().iter().enumerate() {
        let cone = match v.cone {
            Cone::HermitianPsd => "psd",
            Cone::HermitianFree => "free",
        };
        let dims: Vec<String> = v.layout.factors().iter().map(|(l, d)| format!("{l}={d}")).collect();
        let d = v.layout.dim();
        let _ = writeln!(w, "var {} {} {} {} {}", v.name, cone, p.var_offsets[k], d * d, dims.join(","));
    }
    for (bi, origin) in p.block_origin.iter().enumerate() {
        if let BlockOrigin::Constraint(ci) = origin {
            let _ = writeln!(w, "con {} psd {} {}", problem.constraints()[*ci].name, bi, p.blocks[bi]);
        }
    }
    for (ci, rows) in &p.eq_rows {
        let c = &problem.constraints()[*ci];
        debug_assert_eq!(c.relation, Relation::Zero);
        let _ = writeln!(w, "con {} zero {} {}", c.name, rows.start, rows.len());
    }
    for (j, v) in p.c.iter().enumerate() {
        if *v != 0.0 {
            let _ = writeln!(w, "c {j} {v}");
        }
    }
    for i in 0..p.a.nrows() {
        for j in 0..p.a.ncols() {
            let v = p.a[(i, j)];
            if v != 0.0 {
                let _ = writeln!(w, "A {i} {j} {v}");
            }
        }
    }
    for (i, v) in p.b.iter().enumerate() {
        if *v != 0.0 {
            let _ = writeln!(w, "b {i} {v}");
        }
    }
    for (j, col) in p.g_cols.iter().enumerate() {
        for e in col {
            let _ = writeln!(w, "G {} {} {} {} {}", j, e.block, e.r, e.c, e.v);
        }
    }
    for (bi, hb) in p.h.iter().enumerate() {
        for c in 0..hb.ncols() {
            for r in 0..hb.nrows() {
                let v = hb[(r, c)];
                if v != 0.0 {
                    let _ = writeln!(w, "h {bi} {r} {c} {v}");
                }
            }
        }
    }
    let _ = writeln!(w, "end");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{HermitianOperator, SystemLayout};
    use crate::sdp::Expr;

    #[test]
    fn dump_lists_every_section() {
        let l = SystemLayout::new([("A".to_string(), 2)], Vec::<String>::new()).unwrap();
        let mut p = SdpProblem::new();
        let s = p.var("S", l.clone(), Cone::HermitianPsd).unwrap();
        p.geq("dom", s.clone(), Expr::constant(&HermitianOperator::identity(l))).unwrap();
        p.equal("tr", s.clone().trace().unwrap(), Expr::scalar(3.0)).unwrap();
        p.minimize(s.trace().unwrap()).unwrap();
        let text = dump_text(&p).unwrap();
        assert!(text.starts_with("conic-program v1\nsense minimize\nnvars 4\nneqs 1\nblocks 2 4 4\n"));
        assert!(text.contains("var S psd 0 4 A=2"));
        assert!(text.contains("con dom psd 1 4"));
        assert!(text.contains("con tr zero 0 1"));
        assert!(text.contains("b 0 3"));
        assert!(text.trim_end().ends_with("end"));
    }
}
