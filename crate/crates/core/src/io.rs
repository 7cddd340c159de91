//! CSV layouts for configurations, probes, trajectories and energy ledgers.
//!
//! Every file may start with `# key: value` comment lines (provenance such as
//! parameters and the config hash), followed by one header row. Floats are
//! written in shortest round-trip form, so reading a file back reproduces the
//! values bit for bit.

use std::io::{Read, Write};

use crate::dynamics::{EnergyRecord, Trajectory};
use crate::{Error, ParticleConfiguration, PotentialProbe, Result, Vec3};

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// A CSV table with a provenance comment block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub comments: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table { comments: Vec::new(), columns: columns.iter().map(|c| c.as_ref().to_owned()).collect(), rows: Vec::new() }
    }

    pub fn comment(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.comments.push((key.into(), value.into()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Structure(format!(
                "row has {} fields, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.comments {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_string_lossy(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8_lossy(&buf).into_owned()
    }

    /// Parses a table written by [`Table::write_to`].
    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut text = String::new();
        let mut input = input;
        input.read_to_string(&mut text)?;
        let mut comments = Vec::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim_start();
            let (k, v) = body.split_once(':').unwrap_or((body, ""));
            comments.push((k.trim().to_owned(), v.trim().to_owned()));
        }
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let columns = reader.headers()?.iter().map(str::to_owned).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_owned).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Table { comments, columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Structure(format!("missing column '{name}'")))
    }
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Structure(format!("cannot parse {what} '{field}' as a number")))
}

/// Columns `kind,x,y,z`; `kind` is empty for unlabelled configurations.
pub fn configuration_table(config: &ParticleConfiguration) -> Table {
    let mut t = Table::new(&["kind", "x", "y", "z"]);
    for (i, p) in config.positions().iter().enumerate() {
        let kind = config.kinds().map(|k| k[i].to_string()).unwrap_or_default();
        t.rows.push(vec![kind, fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z)]);
    }
    t
}

pub fn write_configuration<W: Write>(config: &ParticleConfiguration, comments: &[(String, String)], out: W) -> Result<()> {
    let mut t = configuration_table(config);
    t.comments = comments.to_vec();
    t.write_to(out)
}

/// Reads the `kind,x,y,z` layout. Either every kind is given or none is.
pub fn read_configuration<R: Read>(input: R) -> Result<ParticleConfiguration> {
    let t = Table::read_from(input)?;
    let (ck, cx, cy, cz) = (t.column("kind")?, t.column("x")?, t.column("y")?, t.column("z")?);
    let mut positions = Vec::with_capacity(t.rows.len());
    let mut kinds = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        positions.push(Vec3::new(parse_f64(&row[cx], "x")?, parse_f64(&row[cy], "y")?, parse_f64(&row[cz], "z")?));
        let k = row[ck].trim();
        if !k.is_empty() {
            kinds.push(k.parse::<u32>().map_err(|_| Error::Structure(format!("bad kind label '{k}'")))?);
        }
    }
    match kinds.len() {
        0 => ParticleConfiguration::new(positions),
        n if n == positions.len() => ParticleConfiguration::with_kinds(positions, kinds),
        _ => Err(Error::Structure("kind labels given for some particles only".into())),
    }
}

/// One row per probe; `u_series_k` columns for every partial sum.
pub fn probe_table(probes: &[PotentialProbe], extra: &[(&str, Vec<String>)]) -> Result<Table> {
    let order = probes.first().map(|p| p.u_series.len()).unwrap_or(0);
    let mut columns: Vec<String> = extra.iter().map(|(name, _)| (*name).to_owned()).collect();
    columns.extend(["x", "y", "z", "nearest_distance", "u_direct", "u_closed", "u_integral", "u_integral_error", "qp"].map(String::from));
    columns.extend((0..order).map(|k| format!("u_series_{k}")));
    let mut t = Table { columns, ..Table::default() };
    for (i, p) in probes.iter().enumerate() {
        let mut row: Vec<String> = extra.iter().map(|(_, values)| values[i].clone()).collect();
        let (ui, ue) = p.u_integral.map(|e| (fmt_f64(e.value), fmt_f64(e.error))).unwrap_or_default();
        row.extend([
            fmt_f64(p.x[0]),
            fmt_f64(p.x[1]),
            fmt_f64(p.x[2]),
            fmt_f64(p.nearest_particle_distance),
            fmt_f64(p.u_direct),
            fmt_f64(p.u_closed),
            ui,
            ue,
            fmt_f64(p.qp),
        ]);
        row.extend(p.u_series.iter().map(|v| fmt_f64(*v)));
        t.push(row)?;
    }
    Ok(t)
}

/// `step,particle,x,y,z,vx,vy,vz`.
pub fn trajectory_table(traj: &Trajectory) -> Table {
    let mut t = Table::new(&["step", "particle", "x", "y", "z", "vx", "vy", "vz"]);
    for k in 0..traj.len() {
        for (i, (p, v)) in traj.positions(k).iter().zip(traj.velocities(k)).enumerate() {
            t.rows.push(vec![
                k.to_string(),
                i.to_string(),
                fmt_f64(p.x),
                fmt_f64(p.y),
                fmt_f64(p.z),
                fmt_f64(v.x),
                fmt_f64(v.y),
                fmt_f64(v.z),
            ]);
        }
    }
    t
}

/// `step,t,kinetic,quantum,gravity,total`.
pub fn energy_table(ledger: &[EnergyRecord]) -> Table {
    let mut t = Table::new(&["step", "t", "kinetic", "quantum", "gravity", "total"]);
    for r in ledger {
        t.rows.push(vec![
            r.step.to_string(),
            fmt_f64(r.t),
            fmt_f64(r.kinetic),
            fmt_f64(r.quantum),
            fmt_f64(r.gravity),
            fmt_f64(r.total),
        ]);
    }
    t
}
