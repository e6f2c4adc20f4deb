//! Energy table and field snapshots (legacy VTK plus CSV).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::EnergyRecord;
use crate::error::{Error, Result};
use crate::mesh::StaggeredGrid;
use crate::scheme::FieldState;

pub const ENERGY_COLUMNS: [&str; 9] = [
    "step",
    "time_s",
    "E_kin_J",
    "F_grad_J",
    "H_sq_J",
    "F_modified_J",
    "F_original_J",
    "total_modified_J",
    "total_original_J",
];

/// Seventeen significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub struct EnergyWriter {
    out: csv::Writer<File>,
}

impl EnergyWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = csv::Writer::from_path(path).map_err(csv_err)?;
        out.write_record(ENERGY_COLUMNS).map_err(csv_err)?;
        Ok(Self { out })
    }

    pub fn write(&mut self, r: &EnergyRecord) -> Result<()> {
        let row = [
            r.step.to_string(),
            num(r.time),
            num(r.e_kin),
            num(r.f_grad),
            num(r.h_sq),
            num(r.f_modified),
            num(r.f_original),
            num(r.total_modified),
            num(r.total_original),
        ];
        self.out.write_record(&row).map_err(csv_err)?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_energies(path: &Path) -> Result<Vec<EnergyRecord>> {
    let table = read_table(path)?;
    if table.header != ENERGY_COLUMNS {
        return Err(Error::Shape(format!("unexpected energy columns {:?}", table.header)));
    }
    Ok(table
        .rows
        .iter()
        .map(|r| EnergyRecord {
            step: r[0] as usize,
            time: r[1],
            e_kin: r[2],
            f_grad: r[3],
            h_sq: r[4],
            f_modified: r[5],
            f_original: r[6],
            total_modified: r[7],
            total_original: r[8],
        })
        .collect())
}

/// Velocity interpolated to cell centers.
pub fn cell_velocity(state: &FieldState, grid: &StaggeredGrid) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(grid.n_cells());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let u = 0.5 * (state.u.x[grid.xface(i, j)] + state.u.x[grid.xface(i + 1, j)]);
            let v = 0.5 * (state.u.y[grid.yface(i, j)] + state.u.y[grid.yface(i, j + 1)]);
            out.push([u, v]);
        }
    }
    out
}

/// Writes `<stem>.vtk` and `<stem>.csv`; returns both paths.
pub fn write_snapshot(state: &FieldState, grid: &StaggeredGrid, names: &[String], stem: &Path) -> Result<[PathBuf; 2]> {
    if names.len() != state.n.len() {
        return Err(Error::Shape(format!("{} names for {} components", names.len(), state.n.len())));
    }
    let vel = cell_velocity(state, grid);
    let vtk = stem.with_extension("vtk");
    let mut f = BufWriter::new(File::create(&vtk)?);
    writeln!(f, "# vtk DataFile Version 3.0")?;
    writeln!(f, "molar densities and velocity at t = {} s", num(state.t))?;
    writeln!(f, "ASCII")?;
    writeln!(f, "DATASET STRUCTURED_POINTS")?;
    writeln!(f, "DIMENSIONS {} {} 1", grid.nx + 1, grid.ny + 1)?;
    writeln!(f, "ORIGIN 0 0 0")?;
    writeln!(f, "SPACING {} {} 1", num(grid.hx()), num(grid.hy()))?;
    writeln!(f, "CELL_DATA {}", grid.n_cells())?;
    for (name, field) in names.iter().zip(&state.n) {
        writeln!(f, "SCALARS n_{name} double 1")?;
        writeln!(f, "LOOKUP_TABLE default")?;
        for v in &field.data {
            writeln!(f, "{}", num(*v))?;
        }
    }
    writeln!(f, "VECTORS velocity double")?;
    for [u, v] in &vel {
        writeln!(f, "{} {} 0", num(*u), num(*v))?;
    }
    f.flush()?;

    let csv_path = stem.with_extension("csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
    let mut header = vec!["x_m".to_string(), "y_m".to_string()];
    header.extend(names.iter().map(|n| format!("n_{n}_mol_per_m3")));
    header.extend(["u_m_per_s".to_string(), "v_m_per_s".to_string()]);
    w.write_record(&header).map_err(csv_err)?;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let c = grid.cell(i, j);
            let (x, y) = grid.cell_center(i, j);
            let mut row = vec![num(x), num(y)];
            row.extend(state.n.iter().map(|f| num(f.data[c])));
            row.extend([num(vel[c][0]), num(vel[c][1])]);
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok([vtk, csv_path])
}

/// A numeric CSV table with its header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}
