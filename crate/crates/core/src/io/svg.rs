//! Hand-written SVG for precision-recall curves and confusion charts.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use crate::confusion::{ConfusionBreakdown, ErrorKind};
use crate::metrics::PrCurve;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn kind_color(k: ErrorKind) -> &'static str {
    match k {
        ErrorKind::Correct => "#2ca02c",
        ErrorKind::Nearby => "#ff7f0e",
        ErrorKind::Opposite => "#d62728",
        ErrorKind::Other => "#7f7f7f",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
}

/// Envelope curves of one or more series on a unit recall/precision plot.
pub fn pr_curves_svg(title: &str, series: &[(&str, &PrCurve)]) -> String {
    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT, title);
    let (x0, y0) = (MARGIN, HEIGHT - MARGIN);
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let px = |r: f64| x0 + r * pw;
    let py = |p: f64| y0 - p * ph;

    let _ = writeln!(
        out,
        r#"<path d="M{x0},{} L{x0},{y0} L{},{y0}" fill="none" stroke="black"/>"#,
        y0 - ph,
        x0 + pw
    );
    for i in 0..=5 {
        let t = f64::from(i) / 5.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{t:.1}</text>"#, px(t), y0 + 16.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{t:.1}</text>"#, x0 - 6.0, py(t) + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">recall</text>"#, px(0.5), HEIGHT - 12.0);
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">precision</text>"#,
        py(0.5),
        py(0.5)
    );

    for (idx, (label, curve)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let env = curve.envelope();
        // step plot of the envelope, starting at recall 0
        let mut pts = Vec::with_capacity(2 * env.len() + 1);
        let mut prev_r = 0.0;
        for (r, p) in curve.recall.iter().zip(&env) {
            pts.push(format!("{:.2},{:.2}", px(prev_r), py(*p)));
            pts.push(format!("{:.2},{:.2}", px(*r), py(*p)));
            prev_r = *r;
        }
        if !pts.is_empty() {
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
        }
        let ly = MARGIN + 16.0 * idx as f64;
        let lx = x0 + pw - 130.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(label));
    }
    out.push_str("</svg>\n");
    out
}

fn pie(out: &mut String, cx: f64, cy: f64, r: f64, fractions: &[(ErrorKind, f64)]) {
    let mut start = -TAU / 4.0;
    for (kind, f) in fractions {
        if *f <= 0.0 {
            continue;
        }
        let color = kind_color(*kind);
        if *f >= 1.0 - 1e-12 {
            let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="{r}" fill="{color}"/>"#);
            return;
        }
        let end = start + f * TAU;
        let large = if f * TAU > TAU / 2.0 { 1 } else { 0 };
        let _ = writeln!(
            out,
            r#"<path d="M{cx},{cy} L{:.2},{:.2} A{r},{r} 0 {large} 1 {:.2},{:.2} Z" fill="{color}"/>"#,
            cx + r * start.cos(),
            cy + r * start.sin(),
            cx + r * end.cos(),
            cy + r * end.sin()
        );
        start = end;
    }
}

/// Per class: a pie of the four error categories and a stacked bar per
/// ground-truth sector.
pub fn confusion_svg(bd: &ConfusionBreakdown) -> String {
    let row_h = 220.0;
    let n = bd.classes.len().max(1) as f64;
    let w = 640.0;
    let h = 60.0 + row_h * n;
    let mut out = String::new();
    header(&mut out, w, h, &format!("Viewpoint errors ({} views)", bd.views));
    for (i, k) in ErrorKind::ALL.iter().enumerate() {
        let x = 20.0 + 110.0 * i as f64;
        let _ = writeln!(out, r#"<rect x="{x}" y="32" width="12" height="12" fill="{}"/>"#, kind_color(*k));
        let _ = writeln!(out, r#"<text x="{}" y="43">{}</text>"#, x + 16.0, k.name());
    }
    for (row, (name, cls)) in bd.classes.iter().enumerate() {
        let top = 60.0 + row_h * row as f64;
        let _ = writeln!(out, r#"<text x="20" y="{}" font-size="13">{} (n={})</text>"#, top + 14.0, escape(name), cls.overall.total());
        let fr: Vec<(ErrorKind, f64)> = ErrorKind::ALL.iter().map(|k| (*k, cls.overall.fraction(*k))).collect();
        pie(&mut out, 100.0, top + 110.0, 70.0, &fr);

        let bx = 210.0;
        let bw = (w - bx - 20.0) / cls.sectors.len().max(1) as f64;
        let bh = 150.0;
        let base = top + 180.0;
        for (j, s) in cls.sectors.iter().enumerate() {
            let x = bx + bw * j as f64;
            let mut y = base;
            for k in ErrorKind::ALL {
                let seg = bh * s.counts.fraction(k);
                if seg > 0.0 {
                    y -= seg;
                    let _ = writeln!(
                        out,
                        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                        x + 2.0,
                        y,
                        bw - 4.0,
                        seg,
                        kind_color(k)
                    );
                }
            }
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
                x + bw / 2.0,
                base + 14.0,
                escape(&s.label)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confusion::{breakdown_all, CategoryCounts, ClassConfusion};
    use crate::geometry::ViewBinning;

    #[test]
    fn curve_svg_is_well_formed() {
        let c = PrCurve {
            recall: vec![0.5, 1.0],
            precision: vec![1.0, 0.5],
            scores: vec![0.9, 0.1],
        };
        let svg = pr_curves_svg("bus <AVP>", &[("Dis-AVP", &c), ("Cont-AVP", &c)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("bus &lt;AVP&gt;"));
    }

    #[test]
    fn confusion_svg_has_a_pie_per_class() {
        let mut bd = breakdown_all(std::iter::empty(), &ViewBinning::new(8).unwrap());
        let counts = CategoryCounts {
            correct: 3,
            opposite: 1,
            ..CategoryCounts::default()
        };
        bd.classes.insert(
            "car".into(),
            ClassConfusion {
                overall: counts,
                sectors: Vec::new(),
            },
        );
        let svg = confusion_svg(&bd);
        assert_eq!(svg.matches("<path d=\"M100").count(), 2);
        assert!(svg.contains("car (n=4)"));
    }
}
