//! POVM report rendering: plain-text parameter tables and the
//! detector-sphere figure.
//!
//! Every element of a single-qubit detector is summarized by an arrow
//! inside the Bloch sphere: direction (a1, a2, a3)/a0, drawn with a stroke
//! width proportional to the weight a0.  Multi-qubit detectors are shown
//! per qubit after reduction.  An arrow longer than 1 signals a positivity
//! violation; it is clamped for drawing and reported as a warning rather
//! than an error.

use qdt_core::detector::{check_povm, reduce_detector, DetectorPovm, DEFAULT_VALIDITY_TOL};
use qdt_core::error::Result;

pub struct Arrow {
    pub qubit: usize,
    pub outcome: u8,
    /// (a1, a2, a3)/a0, clamped to unit length when necessary.
    pub direction: [f64; 3],
    /// Length before clamping.
    pub raw_length: f64,
    /// The element weight a0.
    pub width: f64,
    pub clamped: bool,
}

/// One arrow per (qubit, outcome) of the per-qubit reduced detectors.
pub fn arrows(povm: &DetectorPovm) -> Result<Vec<Arrow>> {
    let mut out = Vec::new();
    for q in 0..povm.num_qubits() {
        let single = if povm.num_qubits() == 1 {
            povm.clone()
        } else {
            reduce_detector(povm, &[q])?
        };
        for (outcome, bits) in ["0", "1"].iter().enumerate() {
            let c = single.element(bits)?.coeffs().to_vec();
            let (a0, a1, a2, a3) = (c[0], c[1], c[2], c[3]);
            let mut direction = if a0.abs() < 1e-12 {
                [0.0; 3]
            } else {
                [a1 / a0, a2 / a0, a3 / a0]
            };
            let raw_length =
                (direction[0].powi(2) + direction[1].powi(2) + direction[2].powi(2)).sqrt();
            let clamped = raw_length > 1.0;
            if clamped {
                for d in &mut direction {
                    *d /= raw_length;
                }
            }
            out.push(Arrow {
                qubit: q,
                outcome: outcome as u8,
                direction,
                raw_length,
                width: a0,
                clamped,
            });
        }
    }
    Ok(out)
}

pub fn render_text(povm: &DetectorPovm) -> Result<String> {
    let validity = check_povm(povm, DEFAULT_VALIDITY_TOL);
    let mut out = String::new();
    out.push_str(&format!(
        "POVM: {} qubit{}, {} outcomes\n",
        povm.num_qubits(),
        if povm.num_qubits() == 1 { "" } else { "s" },
        povm.outcomes().len()
    ));
    out.push_str(&format!(
        "completeness residual {:.3e}, min eigenvalue {:.3e} -> {}\n",
        validity.completeness_residual,
        validity.min_eigenvalue,
        if validity.is_valid { "valid" } else { "INVALID" }
    ));
    let all = arrows(povm)?;
    for q in 0..povm.num_qubits() {
        out.push_str(&format!("qubit {q}:\n"));
        for a in all.iter().filter(|a| a.qubit == q) {
            out.push_str(&format!(
                "  element {}: width {:.4}  arrow ({:+.4}, {:+.4}, {:+.4}) length {:.4}{}\n",
                a.outcome,
                a.width,
                a.direction[0],
                a.direction[1],
                a.direction[2],
                a.raw_length,
                if a.clamped { "  [clamped]" } else { "" }
            ));
        }
    }
    Ok(out)
}

const CELL: f64 = 180.0;
const HEIGHT: f64 = 200.0;
const RADIUS: f64 = 70.0;
/// Depth (sigma_y) axis folded into the drawing plane at 45 degrees.
const DEPTH: f64 = 0.35;

fn project(cx: f64, cy: f64, v: [f64; 3]) -> (f64, f64) {
    let px = cx + RADIUS * (v[0] + DEPTH * v[1]);
    let py = cy - RADIUS * (v[2] + DEPTH * v[1]);
    (px, py)
}

/// Renders the detector-sphere figure.  Returns the SVG text and any
/// overlength warnings; the output is well-formed for any input, including
/// completely depolarized (zero-arrow) detectors.
pub fn render_svg(povm: &DetectorPovm) -> Result<(String, Vec<String>)> {
    let n = povm.num_qubits();
    let all = arrows(povm)?;
    let mut warnings = Vec::new();
    let width = CELL * n as f64;
    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width:.0} {HEIGHT:.0}\" width=\"{width:.0}\" height=\"{HEIGHT:.0}\">\n"
    ));
    svg.push_str("  <defs>\n");
    for (name, color) in [("head0", "#2266cc"), ("head1", "#cc3322")] {
        svg.push_str(&format!(
            "    <marker id=\"{name}\" viewBox=\"0 0 10 10\" refX=\"8\" refY=\"5\" markerWidth=\"4\" markerHeight=\"4\" orient=\"auto-start-reverse\"><path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"{color}\"/></marker>\n"
        ));
    }
    svg.push_str("  </defs>\n");

    for q in 0..n {
        let cx = CELL * q as f64 + CELL / 2.0;
        let cy = HEIGHT / 2.0 + 5.0;
        svg.push_str(&format!(
            "  <circle cx=\"{cx:.1}\" cy=\"{cy:.1}\" r=\"{RADIUS:.1}\" fill=\"none\" stroke=\"#999999\" stroke-width=\"1\"/>\n"
        ));
        // Vertical sigma_z axis for orientation.
        svg.push_str(&format!(
            "  <line x1=\"{cx:.1}\" y1=\"{:.1}\" x2=\"{cx:.1}\" y2=\"{:.1}\" stroke=\"#cccccc\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n",
            cy - RADIUS,
            cy + RADIUS
        ));
        svg.push_str(&format!(
            "  <text x=\"{cx:.1}\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#333333\">qubit {q}</text>\n"
        ));
        for a in all.iter().filter(|a| a.qubit == q) {
            if a.clamped {
                warnings.push(format!(
                    "qubit {} element {}: arrow length {:.4} exceeds 1, clamped for drawing",
                    a.qubit, a.outcome, a.raw_length
                ));
            }
            let (x2, y2) = project(cx, cy, a.direction);
            let color = if a.outcome == 0 { "#2266cc" } else { "#cc3322" };
            let marker = if a.outcome == 0 { "head0" } else { "head1" };
            svg.push_str(&format!(
                "  <line x1=\"{cx:.2}\" y1=\"{cy:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{color}\" stroke-width=\"{:.3}\" marker-end=\"url(#{marker})\" data-qubit=\"{}\" data-outcome=\"{}\" data-ax=\"{:.6}\" data-ay=\"{:.6}\" data-az=\"{:.6}\" data-width=\"{:.6}\" data-length=\"{:.6}\" data-clamped=\"{}\"/>\n",
                8.0 * a.width,
                a.qubit,
                a.outcome,
                a.direction[0],
                a.direction[1],
                a.direction[2],
                a.width,
                a.raw_length,
                a.clamped
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok((svg, warnings))
}
