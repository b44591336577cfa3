//! gnuplot scripts that read the emitted CSV files.

use std::fmt::Write as _;

use eeopa_core::csvout::format_f64;
use eeopa_core::experiments::Algorithm;

const PREAMBLE: &str = "# Run with: gnuplot -persist <script>\nset datafile separator \",\"\nset key top right\nset grid\n";

/// Grid value closest to `target`.
fn nearest(grid: &[f64], target: f64) -> f64 {
    grid.iter()
        .copied()
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .unwrap_or(target)
}

/// `column == value` for a float column, tolerant to the 12-digit export.
fn column_is(col: usize, value: f64) -> String {
    format!("abs(${col} - {v}) <= 1e-9 * {v}", v = format_f64(value))
}

/// Plots of a sweep CSV: `eta` and `c_total` against `theta` at one
/// `p_bar`, `c_total` and `eta` against `p_bar` at one `theta`, and the
/// EEOPA thresholds per group against `theta`.
pub fn sweep_script(
    csv_name: &str,
    theta_grid: &[f64],
    p_bar_grid: &[f64],
    theta: f64,
    p_bar: f64,
    algorithms: &[Algorithm],
    groups: usize,
) -> String {
    let p = nearest(p_bar_grid, p_bar);
    let t = nearest(theta_grid, theta);
    let mut s = String::from(PREAMBLE);
    let curves = |y: usize, filter: &str, x: usize| {
        algorithms
            .iter()
            .map(|a| {
                format!(
                    "\"{csv_name}\" every ::1 using ($6 == 1 && strcol(11) eq \"{a}\" && {filter} ? ${x} : NaN):{y} with linespoints title \"{a}\""
                )
            })
            .collect::<Vec<_>>()
            .join(", \\\n     ")
    };
    let at_p = column_is(5, p);
    let at_t = column_is(4, t);
    for (y, label) in [(10, "eta"), (9, "c_total (bits/frame)")] {
        let _ = writeln!(
            s,
            "\nset logscale x\nset xlabel \"theta\"\nset ylabel \"{label}\"\nset title \"p_bar = {}\"\nplot {}\npause -1",
            format_f64(p),
            curves(y, &at_p, 4)
        );
    }
    for (y, label) in [(9, "c_total (bits/frame)"), (10, "eta")] {
        let _ = writeln!(
            s,
            "\nunset logscale x\nset xlabel \"p_bar\"\nset ylabel \"{label}\"\nset title \"theta = {}\"\nplot {}\npause -1",
            format_f64(t),
            curves(y, &at_t, 5)
        );
    }
    if algorithms.contains(&Algorithm::Eeopa) {
        let lines = (1..=groups)
            .map(|g| {
                format!(
                    "\"{csv_name}\" every ::1 using ($6 == {g} && strcol(11) eq \"EEOPA\" && {at_p} ? $4 : NaN):7 with linespoints title \"group {g}\""
                )
            })
            .collect::<Vec<_>>()
            .join(", \\\n     ");
        let _ = writeln!(
            s,
            "\nset logscale x\nset xlabel \"theta\"\nset ylabel \"lambda_n\"\nset title \"EEOPA thresholds, p_bar = {}\"\nplot {lines}\npause -1",
            format_f64(p)
        );
    }
    s
}

/// Density curves with their Monte-Carlo histograms.
pub fn marginals_script(density_files: &[String], histogram_files: &[String]) -> String {
    let mut s = String::from(PREAMBLE);
    let mut curves: Vec<String> = Vec::new();
    for (g, f) in density_files.iter().enumerate() {
        curves.push(format!(
            "\"{f}\" every ::1 using 1:2 with lines title \"group {}\"",
            g + 1
        ));
    }
    for (g, f) in histogram_files.iter().enumerate() {
        curves.push(format!(
            "\"{f}\" every ::1 using 1:4 with steps dashtype 2 title \"group {} histogram\"",
            g + 1
        ));
    }
    let _ = writeln!(
        s,
        "\nset xlabel \"lambda\"\nset ylabel \"density\"\nset xrange [0:*]\nplot {}\npause -1",
        curves.join(", \\\n     ")
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_script_references_csv_columns() {
        let s = sweep_script(
            "sweep_2x2.csv",
            &[1e-4, 1e-3],
            &[0.1, 0.2],
            1e-3,
            0.12,
            &[Algorithm::Eeopa, Algorithm::Apa],
            2,
        );
        assert!(s.contains("set datafile separator \",\""));
        assert!(s.contains("strcol(11) eq \"APA\""));
        assert!(s.contains("abs($5 - 0.1) <= 1e-9 * 0.1"));
        assert!(s.contains("title \"group 2\""));
        assert_eq!(s.matches("pause -1").count(), 5);
    }

    #[test]
    fn no_threshold_plot_without_eeopa() {
        let s = sweep_script("x.csv", &[1e-3], &[0.1], 1e-3, 0.1, &[Algorithm::Apa], 2);
        assert!(!s.contains("lambda_n"));
    }
}
