use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_bytes(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(|e| Error::Output(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::Output(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Output(e.to_string()))
}

/// Time series in the fixed column order `t, mass, kinetic, potential, energy, S_accum,
/// M_R@R…, z_R@R…, N_t, tail@R…` (tail as a fraction of the kinetic energy).
pub fn timeseries_csv(records: &[DiagnosticsRecord], radii: &[f64]) -> Result<Vec<u8>> {
    let mut header: Vec<String> = ["t", "mass", "kinetic", "potential", "energy", "S_accum"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(radii.iter().map(|r| format!("M_R@{r}")));
    header.extend(radii.iter().map(|r| format!("z_R@{r}")));
    header.push("N_t".into());
    header.extend(radii.iter().map(|r| format!("tail@{r}")));
    let rows = records.iter().map(|rec| {
        let mut row = vec![
            num(rec.t),
            num(rec.mass),
            num(rec.kinetic),
            num(rec.potential),
            num(rec.energy),
            num(rec.s_accum),
        ];
        row.extend(rec.localized_mass.iter().map(|&x| num(x)));
        row.extend(rec.virial_z.iter().map(|&x| num(x)));
        row.push(num(rec.n_t));
        row.extend((0..radii.len()).map(|k| num(rec.tail_fraction(k))));
        row
    });
    csv_bytes(header, rows)
}

/// The quantities behind the virial and localized-mass checks.
pub fn virial_csv(records: &[DiagnosticsRecord], radii: &[f64]) -> Result<Vec<u8>> {
    let mut header = vec!["t".to_string()];
    for r in radii {
        header.push(format!("dM_R@{r}"));
        header.push(format!("virial_main@{r}"));
        header.push(format!("virial_budget@{r}"));
    }
    header.push("hardy_u".into());
    header.push("hardy_grad".into());
    let rows = records.iter().map(|rec| {
        let mut row = vec![num(rec.t)];
        for k in 0..radii.len() {
            row.push(num(rec.localized_mass_rate[k]));
            row.push(num(rec.virial_main[k]));
            row.push(num(rec.virial_budget[k]));
        }
        row.push(num(rec.hardy_u));
        row.push(num(rec.hardy_grad));
        row
    });
    csv_bytes(header, rows)
}

/// Generic table with a header row.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    csv_bytes(
        header.iter().map(|s| s.to_string()).collect(),
        rows.iter().map(|r| r.iter().map(|&x| num(x)).collect()),
    )
}

/// Table whose first column is a text label.
pub fn labelled_csv(header: &[&str], rows: &[(String, Vec<f64>)]) -> Result<Vec<u8>> {
    csv_bytes(
        header.iter().map(|s| s.to_string()).collect(),
        rows.iter().map(|(label, r)| {
            let mut row = vec![label.clone()];
            row.extend(r.iter().map(|&x| num(x)));
            row
        }),
    )
}

/// Collects written files relative to a run directory.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> Result<PathBuf> {
        let p = self.root.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(p)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.path(name)?, bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn line_chart(&mut self, name: &str, title: &str, x_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> Result<()> {
        let path = self.path(name)?;
        line_chart(&path, title, x_label, series)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

fn bounds(series: &[(String, Vec<(f64, f64)>)]) -> ((f64, f64), (f64, f64)) {
    let pts = series.iter().flat_map(|(_, p)| p.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = if y1 > y0 { 0.05 * (y1 - y0) } else { 0.5 * y0.abs().max(1e-12) };
    ((x0, x1), (y0 - pad, y1 + pad))
}

/// Writes an SVG line chart with one line per series.
pub fn line_chart(path: &Path, title: &str, x_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> Result<()> {
    let err = |e: String| Error::Output(format!("{}: {e}", path.display()));
    let root = SVGBackend::new(path, (900, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let ((x0, x1), (y0, y1)) = bounds(series);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(90)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| err(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_label_formatter(&|v| format!("{v:.4e}"))
        .draw()
        .map_err(|e| err(e.to_string()))?;
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()), color))
            .map_err(|e| err(e.to_string()))?
            .label(label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
    }
    if series.len() > 1 && series.len() <= 12 {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| err(e.to_string()))?;
    }
    root.present().map_err(|e| err(e.to_string()))?;
    Ok(())
}

/// One chart per diagnostic, one line per labelled trajectory. Per-radius quantities are
/// drawn at the radius with index `radius_index`.
pub fn diagnostic_charts(
    out: &mut OutputDir,
    prefix: &str,
    runs: &[(String, &[DiagnosticsRecord])],
    radii: &[f64],
    radius_index: usize,
) -> Result<()> {
    type Getter = fn(&DiagnosticsRecord, usize) -> f64;
    let items: [(&str, Getter); 9] = [
        ("mass", |r, _| r.mass),
        ("kinetic", |r, _| r.kinetic),
        ("potential", |r, _| r.potential),
        ("energy", |r, _| r.energy),
        ("S_accum", |r, _| r.s_accum),
        ("N_t", |r, _| r.n_t),
        ("M_R", |r, k| r.localized_mass[k]),
        ("z_R", |r, k| r.virial_z[k]),
        ("tail", |r, k| r.tail_fraction(k)),
    ];
    let k = radius_index.min(radii.len().saturating_sub(1));
    for (name, get) in items {
        if radii.is_empty() && matches!(name, "M_R" | "z_R" | "tail") {
            continue;
        }
        let series: Vec<(String, Vec<(f64, f64)>)> = runs
            .iter()
            .map(|(label, recs)| (label.clone(), recs.iter().map(|r| (r.t, get(r, k))).collect()))
            .collect();
        let title = if matches!(name, "M_R" | "z_R" | "tail") { format!("{name} at R = {}", radii[k]) } else { name.to_string() };
        out.line_chart(&format!("{prefix}{name}.svg"), &title, "t", &series)?;
    }
    Ok(())
}
