//! Static SVG figures. Output depends only on the inputs, numbers are
//! printed at fixed precision.

use std::collections::BTreeMap;
use std::fmt::Write;

use decoupling_core::caps::{AxisTag, CapFamily};
use decoupling_core::harness::{median, seedless_label, GrowthFit, RatioRecord};

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="white"/>"#);
}

/// Caps projected on the first two axes (a strip of intervals when d = 1).
pub fn caps_svg(fam: &CapFamily) -> String {
    let size = 600.0;
    let pad = 40.0;
    let mut out = String::new();
    header(&mut out, size + 2.0 * pad, size + 2.0 * pad);
    let _ = writeln!(
        out,
        r#"<text x="{pad:.0}" y="24" font-family="sans-serif" font-size="14">{} R={} m={} d={} caps={}</text>"#,
        escape(&fam.kind().label()),
        fam.scale().value(),
        fam.m(),
        fam.dim(),
        fam.len()
    );
    let xs = fam.axis_intervals(0);
    let ys: Vec<_> = if fam.dim() >= 2 { fam.axis_intervals(1).to_vec() } else { Vec::new() };
    let flat = |t: AxisTag| matches!(t, AxisTag::Flat);
    // y grows downwards in SVG; put ξ₂ = 0 at the bottom
    let rect = |out: &mut String, x0: f64, x1: f64, y0: f64, y1: f64, fill: &str| {
        let _ = writeln!(
            out,
            r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{fill}" stroke="#333" stroke-width="0.5"/>"##,
            pad + x0 * size,
            pad + (1.0 - y1) * size,
            (x1 - x0) * size,
            (y1 - y0) * size
        );
    };
    if ys.is_empty() {
        for iv in xs {
            let [a, b] = iv.bounds_f64();
            rect(&mut out, a, b, 0.45, 0.55, if flat(iv.tag) { "#fdd" } else { "#eef" });
        }
    } else {
        for ix in xs {
            for iy in &ys {
                let [a, b] = ix.bounds_f64();
                let [c, d] = iy.bounds_f64();
                let fill = match (flat(ix.tag), flat(iy.tag)) {
                    (true, true) => "#fbb",
                    (true, false) | (false, true) => "#fdd",
                    _ => "#eef",
                };
                rect(&mut out, a, b, c, d, fill);
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// `log R` against `log ratio`: every record as a dot, the median over seeds
/// joined by a line, one colour per `(p, ensemble)`.
pub fn ratio_plot_svg(records: &[RatioRecord], fits: &[GrowthFit]) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (70.0, 220.0, 40.0, 50.0);
    let mut out = String::new();
    header(&mut out, w, h);
    let mut groups: BTreeMap<(u64, String), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in records {
        let ens = seedless_label(&r.ensemble);
        groups.entry((r.p.to_bits(), ens)).or_default().entry(r.r).or_default().push(r.ratio);
    }
    let lx: Vec<f64> = records.iter().map(|r| (r.r as f64).log2()).collect();
    let ly: Vec<f64> = records.iter().filter(|r| r.ratio > 0.0).map(|r| r.ratio.log2()).collect();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-9 {
            (lo - 1.0, hi + 1.0)
        } else {
            let m = 0.05 * (hi - lo);
            (lo - m, hi + m)
        }
    };
    let (x0, x1) = range(&lx);
    let (y0, y1) = range(&ly);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * ph;
    let _ = writeln!(
        out,
        r#"<text x="{left:.0}" y="24" font-family="sans-serif" font-size="14">decoupling ratio against R (log2-log2)</text>"#
    );
    let _ = writeln!(
        out,
        r##"<rect x="{left:.1}" y="{top:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#000"/>"##
    );
    // integer ticks in log2
    for t in (x0.ceil() as i64)..=(x1.floor() as i64) {
        let x = px(t as f64);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/><text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">2^{t}</text>"##,
            top + ph,
            top + ph + 5.0,
            top + ph + 18.0
        );
    }
    let step = ((y1 - y0) / 6.0).ceil().max(1.0) as i64;
    let mut t = (y0.ceil() as i64).div_euclid(step) * step;
    while (t as f64) <= y1 {
        if (t as f64) >= y0 {
            let y = py(t as f64);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="#000"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">2^{t}</text>"##,
                left - 5.0,
                left - 8.0,
                y + 4.0
            );
        }
        t += step;
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">R</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    for (i, ((pbits, ens), by_r)) in groups.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let p = f64::from_bits(*pbits);
        let mut pts = Vec::new();
        for (r, ratios) in by_r {
            let x = px((*r as f64).log2());
            for &v in ratios.iter().filter(|v| **v > 0.0) {
                let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{:.2}" r="2.5" fill="{colour}" fill-opacity="0.5"/>"#, py(v.log2()));
            }
            let mut v = ratios.clone();
            let m = median(&mut v);
            if m > 0.0 {
                pts.push(format!("{x:.2},{:.2}", py(m.log2())));
            }
        }
        if pts.len() > 1 {
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, pts.join(" "));
        }
        let eps = fits
            .iter()
            .find(|f| f.p.to_bits() == *pbits && &f.ensemble == ens)
            .map(|f| format!(" eps={:.3}", f.epsilon_hat))
            .unwrap_or_default();
        let ly = top + 14.0 + 16.0 * i as f64;
        let lx = w - right + 12.0;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{colour}"/><text x="{:.1}" y="{ly:.1}" font-family="sans-serif" font-size="11">p={} {}{}</text>"#,
            ly - 9.0,
            lx + 14.0,
            fmt_p(p),
            escape(ens),
            eps
        );
    }
    out.push_str("</svg>\n");
    out
}

fn fmt_p(p: f64) -> String {
    if (p - 10.0 / 3.0).abs() < 1e-12 {
        "10/3".into()
    } else {
        format!("{p}")
    }
}
