//! Tabular and SVG exports of PR curves.

use std::collections::BTreeMap;
use std::fmt::Write;

use pltune_core::combined::CombinedPoint;
use pltune_core::threshold::PrCurve;
use pltune_core::ClassId;

pub fn curves_tsv(curves: &BTreeMap<ClassId, PrCurve>) -> String {
    let mut out = String::from("class_id\tthreshold\ttp\tfp\tprecision\trecall\n");
    for curve in curves.values() {
        for p in curve.points() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                curve.class_id.0, p.threshold, p.tp_cum, p.fp_cum, p.precision, p.recall
            );
        }
    }
    out
}

pub fn combined_tsv(curves: &BTreeMap<ClassId, (f64, Vec<CombinedPoint>)>) -> String {
    let mut out = String::from("class_id\tx\tthreshold\tprecision\trecall\n");
    for (c, (x, points)) in curves {
        for p in points {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                c.0, x, p.threshold, p.p_ds, p.r_ds
            );
        }
    }
    out
}

const SIZE: f64 = 400.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Precision (vertical) against recall (horizontal), one polyline per class.
pub fn curves_svg(series: &BTreeMap<ClassId, Vec<(f64, f64)>>) -> String {
    let side = SIZE + 2.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}" height="{side}" viewBox="0 0 {side} {side}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">recall</text>"#,
        MARGIN + SIZE / 2.0,
        side - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text x="12" y="{}" font-size="12" transform="rotate(-90 12 {})" text-anchor="middle">precision</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0
    );
    for (i, (class, points)) in series.iter().enumerate() {
        let coords: Vec<String> = points
            .iter()
            .map(|&(p, r)| format!("{:.2},{:.2}", MARGIN + r * SIZE, MARGIN + (1.0 - p) * SIZE))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" points="{}"><title>class {}</title></polyline>"#,
            COLORS[i % COLORS.len()],
            coords.join(" "),
            class.0
        );
    }
    out.push_str("</svg>\n");
    out
}
