//! On-disk formats: a binary configuration snapshot, CSV tables for the
//! estimator and solver outputs, and a JSON rendering of the piecewise
//! entropy solutions. Everything here is plain std I/O; the CLI layers its
//! config machinery on top.

use crate::burgers::{EntropySolution, FieldSamples};
use crate::dynamics::{Boundary, Configuration, DynError, MarginalField, Window};
use crate::measures::DensityProfile;
use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use thiserror::Error;

/// Leading magic of the snapshot format; the trailing digits version it.
pub const SNAPSHOT_MAGIC: &[u8; 8] = b"EXSNAP01";

/// Keeps malformed headers from asking for absurd allocations.
const MAX_SNAPSHOT_DIM: u32 = 16;
const MAX_SNAPSHOT_SITES: u128 = 1 << 32;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Dynamics(#[from] DynError),
}

/// A stored configuration: window corners, the clock time and stream seed it
/// was taken at, and row-major bit-packed occupancy (LSB first within each
/// 64-bit word).
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
    pub time: f64,
    pub seed: u64,
    pub words: Vec<u64>,
}

impl Snapshot {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn sites(&self) -> usize {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l + 1) as usize)
            .product()
    }

    pub fn occupied(&self, idx: usize) -> bool {
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    /// Rebuilds a live configuration; the boundary treatment is not part of
    /// the stored state and must be supplied.
    pub fn to_configuration(&self, b: Boundary) -> Result<Configuration, IoError> {
        let window = Window::boxed(self.lower.clone(), self.upper.clone(), b)?;
        let index = window.clone();
        Ok(Configuration::from_predicate(window, |z| {
            self.occupied(index.index_of(z).expect("site inside its own window"))
        }))
    }
}

pub fn write_snapshot(
    cfg: &Configuration,
    time: f64,
    seed: u64,
    w: &mut impl Write,
) -> Result<(), IoError> {
    let win = cfg.window();
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(win.dim() as u32).to_le_bytes())?;
    for i in 0..win.dim() {
        w.write_all(&win.lower()[i].to_le_bytes())?;
        w.write_all(&win.upper()[i].to_le_bytes())?;
    }
    w.write_all(&time.to_le_bytes())?;
    w.write_all(&seed.to_le_bytes())?;
    let words = cfg.occupancy_words();
    w.write_all(&(words.len() as u64).to_le_bytes())?;
    for word in words {
        w.write_all(&word.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot(r: &mut impl Read) -> Result<Snapshot, IoError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(IoError::Format(format!("bad magic {magic:?}")));
    }
    let dim = read_u32(r)?;
    if dim == 0 || dim > MAX_SNAPSHOT_DIM {
        return Err(IoError::Format(format!("implausible dimension {dim}")));
    }
    let mut lower = Vec::with_capacity(dim as usize);
    let mut upper = Vec::with_capacity(dim as usize);
    let mut sites: u128 = 1;
    for axis in 0..dim {
        let l = read_i64(r)?;
        let u = read_i64(r)?;
        if l > u {
            return Err(IoError::Format(format!("axis {axis}: lower {l} above upper {u}")));
        }
        sites = sites.saturating_mul((u - l + 1) as u128);
        lower.push(l);
        upper.push(u);
    }
    if sites > MAX_SNAPSHOT_SITES {
        return Err(IoError::Format(format!("window of {sites} sites refused")));
    }
    let time = f64::from_le_bytes(read_array(r)?);
    if !time.is_finite() || time < 0.0 {
        return Err(IoError::Format(format!("bad time {time}")));
    }
    let seed = read_u64(r)?;
    let nwords = read_u64(r)?;
    let expect = (sites as usize).div_ceil(64) as u64;
    if nwords != expect {
        return Err(IoError::Format(format!(
            "{nwords} occupancy words for {sites} sites; expected {expect}"
        )));
    }
    let mut words = Vec::with_capacity(nwords as usize);
    for _ in 0..nwords {
        words.push(read_u64(r)?);
    }
    Ok(Snapshot { lower, upper, time, seed, words })
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N], IoError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32, IoError> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64, IoError> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_i64(r: &mut impl Read) -> Result<i64, IoError> {
    Ok(i64::from_le_bytes(read_array(r)?))
}

fn coord_header(dim: usize) -> String {
    (1..=dim).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",")
}

/// Per-site estimate table: coordinates, mean, and the binomial confidence
/// interval.
pub fn write_density_csv(field: &MarginalField, w: &mut impl Write) -> Result<(), IoError> {
    let win = &field.window;
    writeln!(w, "{},mean,ci_lo,ci_hi", coord_header(win.dim()))?;
    for idx in 0..win.len() {
        let z = win.site_at(idx);
        let coords = z.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        writeln!(
            w,
            "{coords},{},{},{}",
            field.mean[idx], field.ci_lo[idx], field.ci_hi[idx]
        )?;
    }
    Ok(())
}

/// One row of the coupled-run discrepancy trace: how many sites each ordered
/// layer pair disagrees on, in each direction, at one sampled time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyRow {
    pub time: f64,
    pub pair: (usize, usize),
    pub count_10: u64,
    pub count_01: u64,
}

pub fn write_discrepancy_csv(
    rows: &[DiscrepancyRow],
    w: &mut impl Write,
) -> Result<(), IoError> {
    writeln!(w, "time,layer_a,layer_b,count_10,count_01")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.time, r.pair.0, r.pair.1, r.count_10, r.count_01)?;
    }
    Ok(())
}

/// Solver field on its sampling grid, one `(t, y, u)` row per node.
pub fn write_field_csv(field: &FieldSamples, w: &mut impl Write) -> Result<(), IoError> {
    writeln!(w, "t,y,u")?;
    for ti in 0..field.nt() {
        for yi in 0..field.ny() {
            writeln!(w, "{},{},{}", field.t_at(ti), field.y_at(yi), field.value(ti, yi))?;
        }
    }
    Ok(())
}

/// The breakpoint structure of a piecewise solution as a JSON object.
pub fn entropy_solution_json(sol: &EntropySolution) -> String {
    match sol {
        EntropySolution::Constant { value } => {
            format!("{{\"kind\":\"constant\",\"value\":{value}}}")
        }
        EntropySolution::Shock { left, right, drift, speed } => format!(
            "{{\"kind\":\"shock\",\"left\":{left},\"right\":{right},\"drift\":{drift},\
             \"speed\":{speed}}}"
        ),
        EntropySolution::Fan { left, right, drift } => format!(
            "{{\"kind\":\"fan\",\"left\":{left},\"right\":{right},\"drift\":{drift}}}"
        ),
        EntropySolution::Slab { left, right, c, x1, drift, mirrored } => {
            let t0 = sol.interaction_time().expect("slabs have an interaction time");
            format!(
                "{{\"kind\":\"slab\",\"left\":{left},\"right\":{right},\"c\":{c},\
                 \"x1\":{x1},\"drift\":{drift},\"mirrored\":{mirrored},\
                 \"interaction_time\":{t0}}}"
            )
        }
    }
}

/// Table profile as CSV: site coordinates and the density.
pub fn write_table_profile_csv(
    table: &BTreeMap<Vec<i64>, f64>,
    w: &mut impl Write,
) -> Result<(), IoError> {
    let dim = match table.keys().next() {
        Some(k) => k.len(),
        None => return Err(IoError::Format("empty table profile".into())),
    };
    writeln!(w, "{},alpha", coord_header(dim))?;
    for (z, a) in table {
        if z.len() != dim {
            return Err(IoError::Format("table rows have mixed dimensions".into()));
        }
        let coords = z.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        writeln!(w, "{coords},{a}")?;
    }
    Ok(())
}

/// Parses the CSV written by [`write_table_profile_csv`] back into a table
/// profile. The column count fixes the dimension.
pub fn read_table_profile_csv(r: &mut impl Read) -> Result<DensityProfile, IoError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| IoError::Format("missing header".into()))?;
    let cols = header.split(',').count();
    if cols < 2 || header.split(',').next_back() != Some("alpha") {
        return Err(IoError::Format(format!("unrecognized header {header:?}")));
    }
    let dim = cols - 1;
    let mut table = BTreeMap::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(IoError::Format(format!(
                "line {}: {} fields, expected {cols}",
                lineno + 1,
                fields.len()
            )));
        }
        let mut z = Vec::with_capacity(dim);
        for f in &fields[..dim] {
            z.push(f.trim().parse::<i64>().map_err(|e| {
                IoError::Format(format!("line {}: bad coordinate {f:?}: {e}", lineno + 1))
            })?);
        }
        let a = fields[dim].trim().parse::<f64>().map_err(|e| {
            IoError::Format(format!("line {}: bad density {:?}: {e}", lineno + 1, fields[dim]))
        })?;
        if !(0.0..=1.0).contains(&a) {
            return Err(IoError::Format(format!("line {}: density {a} outside [0, 1]", lineno + 1)));
        }
        if table.insert(z, a).is_some() {
            return Err(IoError::Format(format!("line {}: duplicate site", lineno + 1)));
        }
    }
    if table.is_empty() {
        return Err(IoError::Format("table profile has no rows".into()));
    }
    Ok(DensityProfile::Table(table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::burgers::riemann_description;
    use crate::dynamics::{estimate_marginals, sample_product, SimClock};
    use crate::kernels::asep_kernel;

    fn demo_configuration() -> Configuration {
        let window =
            Window::boxed(vec![-3, -2], vec![3, 2], Boundary::Closed).unwrap();
        let profile = DensityProfile::Constant(0.4);
        let mut clock = SimClock::new(77, 0);
        sample_product(&profile, &window, clock.rng()).unwrap()
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let cfg = demo_configuration();
        let mut buf = Vec::new();
        write_snapshot(&cfg, 12.5, 77, &mut buf).unwrap();
        let snap = read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(snap.lower, vec![-3, -2]);
        assert_eq!(snap.upper, vec![3, 2]);
        assert_eq!(snap.time, 12.5);
        assert_eq!(snap.seed, 77);
        assert_eq!(snap.sites(), 35);
        let back = snap.to_configuration(Boundary::Closed).unwrap();
        assert_eq!(back.occupancy_words(), cfg.occupancy_words());
        assert_eq!(back.particle_count(), cfg.particle_count());
    }

    #[test]
    fn snapshot_rejects_corruption() {
        let cfg = demo_configuration();
        let mut buf = Vec::new();
        write_snapshot(&cfg, 1.0, 1, &mut buf).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[7] = b'9';
        assert!(matches!(
            read_snapshot(&mut bad_magic.as_slice()),
            Err(IoError::Format(_))
        ));

        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(read_snapshot(&mut &truncated[..]), Err(IoError::Io(_))));

        // Word count inconsistent with the advertised window.
        let mut short = buf.clone();
        let wc_at = buf.len() - 8 * cfg.occupancy_words().len() - 8;
        short[wc_at] = 9;
        assert!(matches!(read_snapshot(&mut short.as_slice()), Err(IoError::Format(_))));
    }

    #[test]
    fn density_csv_layout() {
        let profile = DensityProfile::Constant(1.0);
        let k = asep_kernel(0.7);
        let window = Window::boxed(vec![0], vec![1], Boundary::Closed).unwrap();
        let field = estimate_marginals(&profile, &k, &window, 0.0, 4, 5).unwrap();
        let mut out = Vec::new();
        write_density_csv(&field, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,mean,ci_lo,ci_hi");
        assert_eq!(lines.len(), 3);
        // Full window at density 1: mean exactly 1 on both sites.
        assert!(lines[1].starts_with("0,1,"));
        assert!(lines[2].starts_with("1,1,"));
    }

    #[test]
    fn discrepancy_csv_layout() {
        let rows = vec![
            DiscrepancyRow { time: 0.0, pair: (0, 1), count_10: 3, count_01: 1 },
            DiscrepancyRow { time: 2.5, pair: (0, 1), count_10: 1, count_01: 1 },
        ];
        let mut out = Vec::new();
        write_discrepancy_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "time,layer_a,layer_b,count_10,count_01\n0,0,1,3,1\n2.5,0,1,1,1\n"
        );
    }

    #[test]
    fn field_csv_covers_grid() {
        let field =
            FieldSamples::sample(|t, y| if y < t { 1.0 } else { 0.0 }, (0.0, 1.0), 2, (-1.0, 1.0), 3)
                .unwrap();
        let mut out = Vec::new();
        write_field_csv(&field, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,y,u");
        assert_eq!(lines.len(), 1 + 2 * 3);
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 3);
        }
    }

    #[test]
    fn entropy_json_shapes() {
        let shock = riemann_description(0.2, 0.8, 1.0);
        assert_eq!(
            entropy_solution_json(&shock),
            "{\"kind\":\"shock\",\"left\":0.2,\"right\":0.8,\"drift\":1,\"speed\":0}"
        );
        let fan = riemann_description(0.8, 0.2, 1.0);
        assert_eq!(
            entropy_solution_json(&fan),
            "{\"kind\":\"fan\",\"left\":0.8,\"right\":0.2,\"drift\":1}"
        );
        let constant = EntropySolution::Constant { value: 0.5 };
        assert_eq!(
            entropy_solution_json(&constant),
            "{\"kind\":\"constant\",\"value\":0.5}"
        );
    }

    #[test]
    fn table_profile_round_trip() {
        let mut table = BTreeMap::new();
        table.insert(vec![0, 0], 0.3);
        table.insert(vec![1, -2], 0.75);
        let mut out = Vec::new();
        write_table_profile_csv(&table, &mut out).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        assert!(text.starts_with("x1,x2,alpha\n"));
        match read_table_profile_csv(&mut out.as_slice()).unwrap() {
            DensityProfile::Table(back) => assert_eq!(back, table),
            other => panic!("expected a table, got {other:?}"),
        }
    }

    #[test]
    fn table_profile_rejects_malformed_rows() {
        let cases = [
            "x1,alpha\n",
            "x1,alpha\n1,1.5\n",
            "x1,alpha\n1,0.5\n1,0.6\n",
            "x1,alpha\nfoo,0.5\n",
            "x1,beta\n1,0.5\n",
        ];
        for text in cases {
            assert!(
                read_table_profile_csv(&mut text.as_bytes()).is_err(),
                "accepted {text:?}"
            );
        }
    }
}
