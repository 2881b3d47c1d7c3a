use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::model::Trajectory;

/// Fixed 17-significant-digit rendering, round-trips every `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `<out>.json` next to a data file.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub const TRAJECTORY_HEADER: &str = "t,x1,x2,u,u_filt,d,region,in_ca,v_new,energy";

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in &traj.samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            num(s.t),
            num(s.state.x1),
            num(s.state.x2),
            num(s.u),
            num(s.u_filt),
            num(s.d),
            s.region.label(),
            u8::from(s.region.in_ca),
            num(s.v_new),
            num(s.energy),
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2_928.927_124_746_19, 1e-300, 0.0, -0.0] {
            let back: f64 = num(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn sidecar_appends_suffix() {
        assert_eq!(
            sidecar_path(Path::new("out/run.csv")),
            PathBuf::from("out/run.csv.json")
        );
    }
}
