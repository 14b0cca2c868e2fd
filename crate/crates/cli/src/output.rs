//! Files written by the commands. Every file goes to a temporary name in the
//! target directory first and is renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use seqstab::sig12;

pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, &target)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map(|()| target)
}

/// CSV text with a versioned schema line and fixed-precision numbers.
pub struct Csv {
    text: String,
}

pub enum Cell<'a> {
    Num(f64),
    Text(&'a str),
}

impl Csv {
    pub fn new(schema: &str, columns: &[&str]) -> Csv {
        Csv { text: format!("# schema=seqgrid/{schema}/1\n{}\n", columns.join(",")) }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        let line: Vec<String> = cells
            .iter()
            .map(|c| match c {
                Cell::Num(x) => sig12(*x),
                Cell::Text(t) => t.to_string(),
            })
            .collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn nums(&mut self, xs: &[f64]) {
        let cells: Vec<Cell> = xs.iter().map(|x| Cell::Num(*x)).collect();
        self.row(&cells);
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// One curve of a plot.
pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
}

pub struct Panel<'a> {
    pub title: String,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_x: bool,
    pub series: Vec<Series<'a>>,
    /// Plot limits; `None` fits the data.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    /// Cross marker, data coordinates.
    pub marker: Option<(f64, f64, &'a str)>,
}

const W: f64 = 720.0;
const H: f64 = 360.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 30.0, 45.0); // left, right, top, bottom

fn fit(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Static SVG with one panel per entry, stacked vertically.
pub fn svg(panels: &[Panel]) -> String {
    let total_h = H * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{total_h}" viewBox="0 0 {W} {total_h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{total_h}" fill="white"/>"#);
    for (k, p) in panels.iter().enumerate() {
        panel(&mut out, p, k, H * k as f64);
    }
    out.push_str("</svg>\n");
    out
}

fn panel(out: &mut String, p: &Panel, index: usize, y0: f64) {
    let tx = |x: f64| if p.log_x { x.log10() } else { x };
    let xs = p.series.iter().flat_map(|s| s.points.iter().map(|q| tx(q.0)));
    let (x_lo, x_hi) = p.x_range.map(|(a, b)| (tx(a), tx(b))).unwrap_or_else(|| fit(xs));
    let ys = p.series.iter().flat_map(|s| s.points.iter().map(|q| q.1));
    let (y_lo, y_hi) = p.y_range.unwrap_or_else(|| fit(ys));
    let (l, r, t, b) = MARGIN;
    let (pw, ph) = (W - l - r, H - t - b);
    let sx = |x: f64| l + (tx(x) - x_lo) / (x_hi - x_lo) * pw;
    let sy = |y: f64| y0 + t + (y_hi - y) / (y_hi - y_lo) * ph;

    let clip = format!("clip{index}");
    let _ = writeln!(out, r#"<clipPath id="{clip}"><rect x="{l}" y="{}" width="{pw}" height="{ph}"/></clipPath>"#, y0 + t);
    let _ = writeln!(out, r#"<rect x="{l}" y="{}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#, y0 + t);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, l + pw / 2.0, y0 + t - 10.0, escape(&p.title));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, l + pw / 2.0, y0 + H - 8.0, escape(p.x_label));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        y0 + t + ph / 2.0,
        y0 + t + ph / 2.0,
        escape(p.y_label)
    );

    // ticks
    let x_ticks: Vec<f64> = if p.log_x {
        (x_lo.ceil() as i32..=x_hi.floor() as i32).map(|e| 10f64.powi(e)).collect()
    } else {
        linear_ticks(x_lo, x_hi)
    };
    for x in x_ticks {
        let px = sx(x);
        let _ = writeln!(out, r##"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="#ddd"/>"##, y0 + t, y0 + t + ph);
        let _ = writeln!(out, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, y0 + t + ph + 14.0, tick_label(x));
    }
    for y in linear_ticks(y_lo, y_hi) {
        let py = sy(y);
        let _ = writeln!(out, r##"<line x1="{l}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#ddd"/>"##, l + pw);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, l - 4.0, py + 4.0, tick_label(y));
    }
    // axes through the origin when it is in view
    if !p.log_x && x_lo < 0.0 && x_hi > 0.0 {
        let px = sx(0.0);
        let _ = writeln!(out, r#"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="gray"/>"#, y0 + t, y0 + t + ph);
    }
    if y_lo < 0.0 && y_hi > 0.0 {
        let py = sy(0.0);
        let _ = writeln!(out, r#"<line x1="{l}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="gray"/>"#, l + pw);
    }

    for (k, s) in p.series.iter().enumerate() {
        // break the polyline at non-finite points
        let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for &(x, y) in &s.points {
            if x.is_finite() && y.is_finite() && (!p.log_x || x > 0.0) {
                runs.last_mut().unwrap().push((sx(x), sy(y)));
            } else if !runs.last().unwrap().is_empty() {
                runs.push(Vec::new());
            }
        }
        for run in runs.iter().filter(|r| r.len() > 1) {
            let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                out,
                r#"<polyline clip-path="url(#{clip})" fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
                s.color,
                pts.join(" ")
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{}">{}</text>"#,
            l + 8.0,
            y0 + t + 14.0 + 13.0 * k as f64,
            s.color,
            escape(s.label)
        );
    }
    if let Some((mx, my, label)) = p.marker {
        let (px, py) = (sx(mx), sy(my));
        let _ = writeln!(
            out,
            r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="red" stroke-width="2"/>"#,
            px - 5.0,
            py - 5.0,
            px + 5.0,
            py + 5.0,
            px - 5.0,
            py + 5.0,
            px + 5.0,
            py - 5.0
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" fill="red">{}</text>"#, px + 7.0, py - 7.0, escape(label));
    }
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.abs() >= 1e4 || x.abs() < 1e-3 {
        format!("{x:.0e}")
    } else {
        let s = format!("{x:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_schema_header() {
        let mut c = Csv::new("bode", &["f_hz", "re"]);
        c.nums(&[50.0, 1.0 / 3.0]);
        let s = String::from_utf8(c.into_bytes()).unwrap();
        assert_eq!(s, "# schema=seqgrid/bode/1\nf_hz,re\n50,0.333333333333\n");
    }

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.txt", b"one").unwrap();
        write_atomic(dir.path(), "a.txt", b"two").unwrap();
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
        assert_eq!(std::fs::read(dir.path().join("a.txt")).unwrap(), b"two");
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let s = svg(&[Panel {
            title: "L".into(),
            x_label: "Re",
            y_label: "Im",
            log_x: false,
            series: vec![Series { label: "L", color: "blue", points: vec![(0.0, 0.0), (1.0, f64::NAN), (2.0, 1.0), (3.0, 2.0)] }],
            x_range: None,
            y_range: None,
            marker: Some((-1.0, 0.0, "-1")),
        }]);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert_eq!(s.matches("<polyline").count(), 1);
        assert!(s.contains("stroke=\"red\""));
    }

    #[test]
    fn ticks_cover_range() {
        let t = linear_ticks(-3.2, 7.9);
        assert!(t.first().unwrap() >= &-3.2 && t.last().unwrap() <= &7.9);
        assert!(t.len() >= 4);
    }
}
