//! CSV export of trajectories.

use std::io::{self, Write};

use super::{Termination, Trajectory};

pub const CSV_HEADER: &str = "t,x,y,z,px,py,pz,r,theta,p_r,E,lx,ly,lz";

/// Writes one row per sample with 17 significant digits. A run that did not
/// complete ends with a `# terminated: ...` line.
pub fn write_csv<W: Write>(traj: &Trajectory, mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for s in &traj.samples {
        let e = traj.model.energy(&s.phase).unwrap_or(f64::NAN);
        let l = traj.model.angular_momentum(&s.phase);
        let row = [
            s.t,
            s.phase.r.x,
            s.phase.r.y,
            s.phase.r.z,
            s.phase.p.x,
            s.phase.p.y,
            s.phase.p.z,
            s.polar.r,
            s.polar.theta,
            s.polar.p_r,
            e,
            l.x,
            l.y,
            l.z,
        ];
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    if let Termination::StepFailure(kind) = traj.termination {
        writeln!(out, "# terminated: StepFailure({kind:?})")?;
    }
    Ok(())
}
