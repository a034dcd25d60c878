//! CSV, plain-text report and SVG outputs for the analysis results.
//! CSV uses a header row, '.' decimals and no locale dependence.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::correlation::{CorrelationCurve, G2FitContext, G2FitResult, G2Model};
use crate::stats::{IntensityHistogram, StatsFitResult};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("export I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV line {line}: {reason}")]
    BadCsv { line: usize, reason: String },
}

/// Histogram CSV: bin_center, density, and the fitted model and deconvolved
/// densities when a fit is supplied (empty fields otherwise).
pub fn histogram_csv(h: &IntensityHistogram, fit: Option<&StatsFitResult>) -> String {
    let mut out = String::from("bin_center,density,model_density,deconvolved_density\n");
    let centers = h.bin_centers();
    for (k, &c) in centers.iter().enumerate() {
        let model = fit
            .and_then(|f| f.model_density.get(k))
            .map(|&(_, v)| v.to_string())
            .unwrap_or_default();
        let deconv = fit
            .and_then(|f| f.deconvolved_density.iter().find(|(x, _)| *x == c))
            .map(|&(_, v)| v.to_string())
            .unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", c, h.density[k], model, deconv);
    }
    out
}

/// Curve CSV with the propagation geometry embedded as comments, so the fit
/// command can reconstruct the Bessel argument without the original config.
pub fn curve_csv(curve: &CorrelationCurve, ctx: &G2FitContext) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# wavelength_m = {}", ctx.wavelength);
    let _ = writeln!(out, "# distance_z_m = {}", ctx.distance_z);
    let _ = writeln!(out, "# x0_position = {}", curve.x0_position);
    let _ = writeln!(out, "# frames_used = {}", curve.frames_used);
    out.push_str("separation_m,g2,stderr\n");
    for ((s, g), e) in curve
        .separations
        .iter()
        .zip(&curve.g2_values)
        .zip(&curve.standard_errors)
    {
        let _ = writeln!(out, "{},{},{}", s, g, e);
    }
    out
}

/// Parses a curve CSV written by `curve_csv`, returning the curve and the
/// embedded geometry when present.
pub fn parse_curve_csv(text: &str) -> Result<(CorrelationCurve, Option<G2FitContext>), ExportError> {
    let mut wavelength = None;
    let mut distance_z = None;
    let mut x0_position = 0usize;
    let mut frames_used = 0usize;
    let mut separations = Vec::new();
    let mut g2_values = Vec::new();
    let mut standard_errors = Vec::new();
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let bad = |reason: String| ExportError::BadCsv { line, reason };
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                let value = value.trim();
                match key.trim() {
                    "wavelength_m" => wavelength = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                    "distance_z_m" => distance_z = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                    "x0_position" => x0_position = value.parse().map_err(|e| bad(format!("{e}")))?,
                    "frames_used" => frames_used = value.parse().map_err(|e| bad(format!("{e}")))?,
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            if trimmed != "separation_m,g2,stderr" {
                return Err(bad(format!("expected header `separation_m,g2,stderr`, got `{trimmed}`")));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 fields, got {}", fields.len())));
        }
        separations.push(fields[0].trim().parse().map_err(|e| bad(format!("separation: {e}")))?);
        g2_values.push(fields[1].trim().parse().map_err(|e| bad(format!("g2: {e}")))?);
        standard_errors.push(fields[2].trim().parse().map_err(|e| bad(format!("stderr: {e}")))?);
    }
    if separations.is_empty() {
        return Err(ExportError::BadCsv {
            line: text.lines().count(),
            reason: "no data rows".into(),
        });
    }
    let curve = CorrelationCurve {
        separations,
        g2_values,
        standard_errors,
        x0_position,
        frames_used,
    };
    let ctx = match (wavelength, distance_z) {
        (Some(wavelength), Some(distance_z)) => Some(G2FitContext {
            wavelength,
            distance_z,
        }),
        _ => None,
    };
    Ok((curve, ctx))
}

/// Plain-text key=value report of a g2 fit.
pub fn g2_fit_report(fit: &G2FitResult) -> String {
    let mut out = String::new();
    let model = match fit.model {
        G2Model::OneTLS => "one_tls",
        G2Model::TwoTLS => "two_tls",
    };
    let _ = writeln!(out, "model = {model}");
    let _ = writeln!(out, "aperture_radius_a_m = {}", fit.aperture_radius_a);
    if let Some(d) = fit.separation_d {
        let _ = writeln!(out, "separation_d_m = {}", d);
    }
    let _ = writeln!(out, "offset_c = {}", fit.offset_c);
    let _ = writeln!(out, "modulation_v = {}", fit.modulation_v);
    let _ = writeln!(out, "visibility = {}", fit.visibility);
    let _ = writeln!(out, "chi2_per_dof = {}", fit.chi2_per_dof);
    for (i, s) in fit.param_sigmas.iter().enumerate() {
        let _ = writeln!(out, "param_sigma_{i} = {}", s);
    }
    out
}

/// Plain-text key=value report of a noisy-exponential fit.
pub fn stats_fit_report(fit: &StatsFitResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mean_intensity_gray = {}", fit.mean_intensity);
    let _ = writeln!(out, "noise_sigma_gray = {}", fit.noise_sigma);
    let _ = writeln!(out, "noise_offset_gray = {}", fit.noise_offset);
    let _ = writeln!(out, "chi2_per_dof = {}", fit.chi2_per_dof);
    let _ = writeln!(out, "ks_distance = {}", fit.ks_distance);
    let _ = writeln!(out, "mean_sigma = {}", fit.param_sigmas[0]);
    let _ = writeln!(out, "sigma_sigma = {}", fit.param_sigmas[1]);
    let _ = writeln!(out, "offset_sigma = {}", fit.param_sigmas[2]);
    let _ = writeln!(out, "clipped_low_counts = {}", fit.clipped_low);
    let _ = writeln!(out, "clipped_high_counts = {}", fit.clipped_high);
    out
}

/// One plotted data series: points plus a display style.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
    /// SVG color, e.g. "#1f77b4".
    pub color: &'a str,
    /// Draw markers at the points instead of a connecting line.
    pub markers: bool,
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

/// Standalone SVG scatter/line plot; log_y plots log10 of the y values.
pub fn plot_svg(series: &[Series<'_>], x_label: &str, y_label: &str, log_y: bool) -> String {
    let map_y = |y: f64| if log_y { y.max(1e-300).log10() } else { y };
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in s.points {
            if log_y && y <= 0.0 {
                continue;
            }
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(map_y(y));
            y_max = y_max.max(map_y(y));
        }
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let sx = (PLOT_W - MARGIN_L - MARGIN_R) / (x_max - x_min);
    let sy = (PLOT_H - MARGIN_T - MARGIN_B) / (y_max - y_min);
    let px = |x: f64| MARGIN_L + (x - x_min) * sx;
    let py = |y: f64| PLOT_H - MARGIN_B - (map_y(y) - y_min) * sy;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\">"
    );
    let _ = writeln!(out, "<rect width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"white\"/>");
    // axes
    let _ = writeln!(
        out,
        "<line x1=\"{MARGIN_L}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>",
        PLOT_H - MARGIN_B,
        PLOT_W - MARGIN_R
    );
    let _ = writeln!(
        out,
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>",
        PLOT_H - MARGIN_B
    );
    // tick labels at the axis extremes
    let fmt_tick = |v: f64| format!("{v:.3e}");
    let _ = writeln!(
        out,
        "<text x=\"{MARGIN_L}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
        PLOT_H - MARGIN_B + 16.0,
        fmt_tick(x_min)
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
        PLOT_W - MARGIN_R,
        PLOT_H - MARGIN_B + 16.0,
        fmt_tick(x_max)
    );
    let y_lo_label = if log_y { format!("1e{y_min:.1}") } else { fmt_tick(y_min) };
    let y_hi_label = if log_y { format!("1e{y_max:.1}") } else { fmt_tick(y_max) };
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{y_lo_label}</text>",
        MARGIN_L - 6.0,
        PLOT_H - MARGIN_B
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{y_hi_label}</text>",
        MARGIN_L - 6.0,
        MARGIN_T + 8.0
    );
    // axis labels
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{x_label}</text>",
        (MARGIN_L + PLOT_W - MARGIN_R) / 2.0,
        PLOT_H - 12.0
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{y_label}</text>",
        (MARGIN_T + PLOT_H - MARGIN_B) / 2.0
    );

    for (si, s) in series.iter().enumerate() {
        if s.markers {
            for &(x, y) in s.points {
                if log_y && y <= 0.0 {
                    continue;
                }
                let _ = writeln!(
                    out,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\"/>",
                    px(x),
                    py(y),
                    s.color
                );
            }
        } else {
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|&&(_, y)| !log_y || y > 0.0)
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                out,
                "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
                s.color,
                pts.join(" ")
            );
        }
        // legend entry
        let ly = MARGIN_T + 16.0 * si as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"4\" fill=\"{}\"/>",
            PLOT_W - MARGIN_R - 150.0,
            ly,
            s.color
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>",
            PLOT_W - MARGIN_R - 132.0,
            ly + 5.0,
            s.label
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Fig. 2 style: measured histogram with the fitted model and deconvolved
/// exponential, log-scale density axis.
pub fn histogram_svg(h: &IntensityHistogram, fit: Option<&StatsFitResult>) -> String {
    let data: Vec<(f64, f64)> = h
        .bin_centers()
        .into_iter()
        .zip(h.density.iter().copied())
        .collect();
    let mut series = vec![Series {
        label: "measured",
        points: &data,
        color: "#333333",
        markers: true,
    }];
    if let Some(f) = fit {
        series.push(Series {
            label: "model fit",
            points: &f.model_density,
            color: "#1f77b4",
            markers: false,
        });
        series.push(Series {
            label: "deconvolved",
            points: &f.deconvolved_density,
            color: "#d62728",
            markers: false,
        });
    }
    plot_svg(&series, "gray level", "probability density", true)
}

/// Fig. 3 style: g2 data points with the fitted model overlay.
pub fn curve_svg(curve: &CorrelationCurve, model: Option<&[(f64, f64)]>) -> String {
    let data: Vec<(f64, f64)> = curve
        .separations
        .iter()
        .copied()
        .zip(curve.g2_values.iter().copied())
        .collect();
    let mut series = vec![Series {
        label: "estimated g2",
        points: &data,
        color: "#333333",
        markers: true,
    }];
    if let Some(m) = model {
        series.push(Series {
            label: "fit",
            points: m,
            color: "#1f77b4",
            markers: false,
        });
    }
    plot_svg(&series, "separation (m)", "g2", false)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ExportError> {
    Ok(std::fs::write(path, text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_curve() -> CorrelationCurve {
        CorrelationCurve {
            separations: vec![0.0, 1e-5, 2e-5, 3e-5],
            g2_values: vec![2.0, 1.8, 1.5, 1.2],
            standard_errors: vec![0.01, 0.012, 0.011, 0.013],
            x0_position: 5,
            frames_used: 100,
        }
    }

    #[test]
    fn curve_csv_round_trips() {
        let curve = sample_curve();
        let ctx = G2FitContext {
            wavelength: 633e-9,
            distance_z: 0.2,
        };
        let text = curve_csv(&curve, &ctx);
        let (parsed, parsed_ctx) = parse_curve_csv(&text).unwrap();
        assert_eq!(parsed, curve);
        let parsed_ctx = parsed_ctx.unwrap();
        assert_eq!(parsed_ctx.wavelength, 633e-9);
        assert_eq!(parsed_ctx.distance_z, 0.2);
    }

    #[test]
    fn curve_csv_rejects_malformed_rows() {
        assert!(matches!(
            parse_curve_csv("separation_m,g2,stderr\n1,2\n"),
            Err(ExportError::BadCsv { line: 2, .. })
        ));
        assert!(matches!(
            parse_curve_csv("wrong,header\n"),
            Err(ExportError::BadCsv { line: 1, .. })
        ));
        assert!(matches!(
            parse_curve_csv("separation_m,g2,stderr\n"),
            Err(ExportError::BadCsv { .. })
        ));
    }

    #[test]
    fn histogram_csv_has_header_and_rows() {
        let h = IntensityHistogram::from_gray_values(vec![1u16, 1, 2, 3], 3);
        let text = histogram_csv(&h, None);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bin_center,density,model_density,deconvolved_density");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,"));
    }

    #[test]
    fn svg_outputs_are_well_formed() {
        let curve = sample_curve();
        let svg = curve_svg(&curve, Some(&[(0.0, 2.0), (3e-5, 1.2)]));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("circle"));

        let h = IntensityHistogram::from_gray_values(vec![1u16, 1, 2, 3], 3);
        let svg = histogram_svg(&h, None);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn fit_reports_are_key_value() {
        let fit = G2FitResult {
            model: G2Model::TwoTLS,
            aperture_radius_a: 1e-4,
            separation_d: Some(1e-3),
            offset_c: 1.0,
            modulation_v: 1.0,
            visibility: 1.0 / 3.0,
            chi2_per_dof: 1.1,
            param_sigmas: vec![1e-6, 1e-5, 0.01, 0.01],
        };
        let text = g2_fit_report(&fit);
        assert!(text.contains("model = two_tls"));
        assert!(text.contains("separation_d_m = 0.001"));
        assert!(text.contains("visibility = 0.3333333333333333"));
        for line in text.lines() {
            assert!(line.contains(" = "), "line `{line}`");
        }
    }
}
