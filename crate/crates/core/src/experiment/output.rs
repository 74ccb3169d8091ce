//! CSV and SVG output of aggregated curves.
//!
//! CSV columns: `controller,case,cost,gap_lo,gap_med,gap_hi`, one row per grid
//! point, cells in key order, floats in `{:.16e}` (17 significant digits).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use super::{AggregateCurve, CellKey};
use crate::error::{Error, Result};
use crate::sgd::ControllerKind;

pub const CSV_HEADER: [&str; 6] = ["controller", "case", "cost", "gap_lo", "gap_med", "gap_hi"];

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_string(curves: &BTreeMap<CellKey, AggregateCurve>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for ((kind, case), c) in curves {
        for j in 0..c.len() {
            w.write_record([
                kind.as_str().to_string(),
                case.to_string(),
                c.cost_grid[j].to_string(),
                sci(c.lo95[j]),
                sci(c.median[j]),
                sci(c.hi95[j]),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

pub fn parse_csv<R: Read>(reader: R) -> Result<BTreeMap<CellKey, AggregateCurve>> {
    let mut r = csv::Reader::from_reader(reader);
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::InvalidConfig(format!(
            "unexpected CSV header, want `{}`",
            CSV_HEADER.join(",")
        )));
    }
    let mut curves: BTreeMap<CellKey, AggregateCurve> = BTreeMap::new();
    for record in r.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad number `{}`", field(i))))
        };
        let kind = ControllerKind::parse(field(0))?;
        let case: u32 = field(1)
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad case `{}`", field(1))))?;
        let cost: u64 = field(2)
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad cost `{}`", field(2))))?;
        let c = curves
            .entry((kind, case))
            .or_insert_with(|| AggregateCurve {
                cost_grid: Vec::new(),
                median: Vec::new(),
                lo95: Vec::new(),
                hi95: Vec::new(),
            });
        if c.cost_grid.last().is_some_and(|&last| last >= cost) {
            return Err(Error::InvalidConfig(format!(
                "cost grid of ({}, {case}) is not strictly increasing at {cost}",
                kind.as_str()
            )));
        }
        c.cost_grid.push(cost);
        c.lo95.push(num(3)?);
        c.median.push(num(4)?);
        c.hi95.push(num(5)?);
    }
    Ok(curves)
}

pub fn read_csv(path: &Path) -> Result<BTreeMap<CellKey, AggregateCurve>> {
    parse_csv(std::fs::File::open(path)?)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_csv(curves: &BTreeMap<CellKey, AggregateCurve>, path: &Path) -> Result<()> {
    write_atomic(path, csv_string(curves)?.as_bytes())
}

pub fn write_svg(curves: &BTreeMap<CellKey, AggregateCurve>, path: &Path) -> Result<()> {
    write_atomic(path, render_svg(curves).as_bytes())
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 200.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, cost: f64) -> f64 {
        let t = (cost.log10() - self.x.0) / (self.x.1 - self.x.0);
        MARGIN_L + t * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, gap: f64) -> f64 {
        let t = (gap.log10() - self.y.0) / (self.y.1 - self.y.0);
        HEIGHT - MARGIN_B - t * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

/// Log-log plot of gap against cost: one median line and a shaded 95% band
/// per cell. Non-positive gaps are clipped to the smallest positive value.
/// The output is a pure function of the curves.
pub fn render_svg(curves: &BTreeMap<CellKey, AggregateCurve>) -> String {
    let positive = curves
        .values()
        .flat_map(|c| c.lo95.iter().chain(&c.hi95).chain(&c.median))
        .copied()
        .filter(|g| *g > 0.0 && g.is_finite());
    let (mut ymin, mut ymax) = positive.fold((f64::INFINITY, 0.0f64), |(lo, hi), g| {
        (lo.min(g), hi.max(g))
    });
    if !ymin.is_finite() {
        (ymin, ymax) = (1e-16, 1.0);
    }
    let costs = curves.values().flat_map(|c| c.cost_grid.iter().copied());
    let (xmin, xmax) = costs.fold((u64::MAX, 0), |(lo, hi), c| (lo.min(c), hi.max(c)));
    let (xmin, xmax) = if xmin > xmax {
        (1, 10)
    } else {
        (xmin.max(1), xmax.max(xmin + 1))
    };
    let axes = Axes {
        x: ((xmin as f64).log10().floor(), (xmax as f64).log10().ceil()),
        y: (
            ymin.log10().floor(),
            ymax.log10().ceil().max(ymin.log10().floor() + 1.0),
        ),
    };
    let clip = |g: f64| if g > 0.0 && g.is_finite() { g } else { ymin };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let (x0, x1) = (MARGIN_L, WIDTH - MARGIN_R);
    let (y0, y1) = (HEIGHT - MARGIN_B, MARGIN_T);
    let _ = writeln!(
        s,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for e in axes.x.0 as i32..=axes.x.1 as i32 {
        let x = axes.px(10f64.powi(e));
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{y1}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{e}</text>"#,
            y0 + 16.0
        );
    }
    for e in axes.y.0 as i32..=axes.y.1 as i32 {
        let y = axes.py(10f64.powi(e));
        let _ = writeln!(
            s,
            r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"#,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">gradient evaluations</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">optimality gap</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    for (i, ((kind, case), c)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut band = String::new();
        for j in 0..c.len() {
            let _ = write!(
                band,
                "{:.2},{:.2} ",
                axes.px(c.cost_grid[j] as f64),
                axes.py(clip(c.hi95[j]))
            );
        }
        for j in (0..c.len()).rev() {
            let _ = write!(
                band,
                "{:.2},{:.2} ",
                axes.px(c.cost_grid[j] as f64),
                axes.py(clip(c.lo95[j]))
            );
        }
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = (0..c.len())
            .map(|j| {
                format!(
                    "{:.2},{:.2}",
                    axes.px(c.cost_grid[j] as f64),
                    axes.py(clip(c.median[j]))
                )
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = MARGIN_T + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#,
            x1 + 12.0,
            x1 + 32.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{} #{case}</text>"#,
            x1 + 38.0,
            ly + 4.0,
            kind.as_str()
        );
    }
    s.push_str("</svg>\n");
    s
}
