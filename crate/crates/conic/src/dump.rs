use std::io::{self, Write};

use crate::program::{ConicProgram, Constraint, VarKind};

/// Writes `program` as plain-text sparse triplets.
///
/// ```text
/// conic-program vars <n> rows <m>
/// var <index> <kind> <name>
/// objective <const>
/// c <index> <coef>
/// cone zero|nonneg|soc <row-start> <dim> [group]
/// a <row> <col> <coef>
/// b <row> <value>
/// ```
///
/// Rows read `b - A x ∈ K`, one cone per constraint in program order.
/// Coefficients are printed with round-trip precision.
pub fn write_triplets<W: Write>(program: &ConicProgram, out: &mut W) -> io::Result<()> {
    let m: usize = program.rows().iter().map(|r| r.constraint.rows()).sum();
    writeln!(out, "conic-program vars {} rows {}", program.num_vars(), m)?;
    for (i, v) in program.vars().iter().enumerate() {
        let kind = match v.kind {
            VarKind::Real => "real",
            VarKind::ComplexRe => "re",
            VarKind::ComplexIm => "im",
            VarKind::Auxiliary => "aux",
        };
        writeln!(out, "var {i} {kind} {}", v.name)?;
    }
    writeln!(out, "objective {:e}", program.objective().constant)?;
    for (j, c) in program.objective().compacted() {
        writeln!(out, "c {j} {c:e}")?;
    }
    let mut row = 0;
    for r in program.rows() {
        let (kind, exprs): (&str, Vec<_>) = match &r.constraint {
            Constraint::Eq(e) => ("zero", vec![e]),
            Constraint::Ge(e) => ("nonneg", vec![e]),
            Constraint::Soc { t, x } => ("soc", std::iter::once(t).chain(x.iter()).collect()),
        };
        match r.group {
            Some(g) => writeln!(
                out,
                "cone {kind} {row} {} {}",
                exprs.len(),
                program.group_names()[g.0]
            )?,
            None => writeln!(out, "cone {kind} {row} {}", exprs.len())?,
        }
        for e in exprs {
            for (j, c) in e.compacted() {
                writeln!(out, "a {row} {j} {:e}", -c)?;
            }
            if e.constant != 0.0 {
                writeln!(out, "b {row} {:e}", e.constant)?;
            }
            row += 1;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Affine, ConicProgram};

    #[test]
    fn dump_lists_every_row() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x", VarKind::Real);
        let g = p.add_group("cap");
        p.add_soc(Affine::constant(2.0), vec![Affine::var(x)], Some(g));
        p.add_ge(Affine::var(x), None);
        p.set_objective(Affine::var(x));
        let mut buf = Vec::new();
        write_triplets(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("conic-program vars 1 rows 3\n"));
        assert!(text.contains("cone soc 0 2 cap\n"));
        assert!(text.contains("b 0 2e0\n"));
        assert!(text.contains("a 1 0 -1e0\n"));
        assert!(text.contains("cone nonneg 2 1\n"));
    }
}
