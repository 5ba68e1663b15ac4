//! Minimal SVG plots: dots, a fitted line, an optional shaded band and an
//! optional parametric overlay. Layout depends only on the data.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 48.0;

#[derive(Debug, Default)]
pub struct Plot {
    pub title: String,
    /// Each dot series gets its own class (`dots`, `dots-2`, ...).
    pub dots: Vec<Vec<(f64, f64)>>,
    pub line: Option<Vec<(f64, f64)>>,
    pub band: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    pub overlay: Option<Vec<(f64, f64)>>,
}

struct Scale {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Scale {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn polyline(out: &mut String, class: &str, pts: impl Iterator<Item = (f64, f64)>, sc: &Scale) {
    let coords: Vec<String> = pts.map(|(x, y)| format!("{:.2},{:.2}", sc.px(x), sc.py(y))).collect();
    let _ = writeln!(out, r#"<polyline class="{class}" fill="none" points="{}"/>"#, coords.join(" "));
}

impl Plot {
    fn scale(&self) -> Scale {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        let mut push = |pts: &[(f64, f64)]| {
            for &(x, y) in pts {
                xs.push(x);
                ys.push(y);
            }
        };
        for d in &self.dots {
            push(d);
        }
        if let Some(l) = &self.line {
            push(l);
        }
        if let Some(o) = &self.overlay {
            push(o);
        }
        if let Some((x, lo, hi)) = &self.band {
            xs.extend(x);
            ys.extend(lo);
            ys.extend(hi);
        }
        let finite = |v: &[f64]| {
            let f = v.iter().cloned().filter(|a| a.is_finite());
            let lo = f.clone().fold(f64::INFINITY, f64::min);
            let hi = f.fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = finite(&xs);
        let (y0, y1) = finite(&ys);
        Scale { x0, x1, y0, y1 }
    }

    pub fn render(&self) -> String {
        let sc = self.scale();
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        out.push_str(
            "<style>.dots{fill:#1f4e79}.dots-2{fill:#c0504d}.line{stroke:#1f4e79;stroke-width:2}\
             .band{fill:#1f4e79;fill-opacity:0.2;stroke:none}.band-edge{stroke:#1f4e79;stroke-width:0.8}\
             .model{stroke:#c0504d;stroke-width:1.5;stroke-dasharray:6 4}.axis{stroke:#444}text{font:12px sans-serif}</style>\n",
        );
        let _ = writeln!(out, r#"<text x="{MARGIN}" y="24">{}</text>"#, escape(&self.title));
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(out, r#"<path class="axis" fill="none" d="M{l},{t} L{l},{b} L{r},{b}"/>"#);
        for (v, anchor, x, y) in [
            (sc.x0, "start", l, b + 16.0),
            (sc.x1, "end", r, b + 16.0),
        ] {
            let _ = writeln!(out, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.3}</text>"#);
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, l - 4.0, b, sc.y0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, l - 4.0, t + 4.0, sc.y1);

        if let Some((x, lo, hi)) = &self.band {
            let ok: Vec<usize> = (0..x.len()).filter(|&i| lo[i].is_finite() && hi[i].is_finite()).collect();
            if !ok.is_empty() {
                let mut d = String::new();
                for (k, &i) in ok.iter().enumerate() {
                    let _ = write!(d, "{}{:.2},{:.2} ", if k == 0 { "M" } else { "L" }, sc.px(x[i]), sc.py(hi[i]));
                }
                for &i in ok.iter().rev() {
                    let _ = write!(d, "L{:.2},{:.2} ", sc.px(x[i]), sc.py(lo[i]));
                }
                d.push('Z');
                let _ = writeln!(out, r#"<path class="band" d="{d}"/>"#);
                polyline(&mut out, "band-edge", ok.iter().map(|&i| (x[i], hi[i])), &sc);
                polyline(&mut out, "band-edge", ok.iter().map(|&i| (x[i], lo[i])), &sc);
            }
        }
        if let Some(line) = &self.line {
            polyline(&mut out, "line", line.iter().copied(), &sc);
        }
        if let Some(o) = &self.overlay {
            polyline(&mut out, "model", o.iter().copied(), &sc);
        }
        for (k, series) in self.dots.iter().enumerate() {
            let class = if k == 0 { "dots".to_string() } else { format!("dots-{}", k + 1) };
            for &(x, y) in series {
                let _ = writeln!(out, r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="3.5"/>"#, sc.px(x), sc.py(y));
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
