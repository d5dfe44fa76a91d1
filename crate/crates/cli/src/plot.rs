//! Gnuplot scripts for the emitted CSV files.

/// One curve of a plot: CSV file and the columns to draw.
pub struct Curve<'a> {
    pub file: &'a str,
    pub x: usize,
    pub y: usize,
    pub title: &'a str,
}

/// Script that draws `curves` into `<stem>.png`.
pub fn script(stem: &str, xlabel: &str, ylabel: &str, curves: &[Curve]) -> String {
    let mut s = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\nset output '{stem}.png'\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset grid\n"
    );
    let parts: Vec<String> = curves
        .iter()
        .map(|c| format!("'{}' using {}:{} with lines title '{}'", c.file, c.x, c.y, c.title))
        .collect();
    s.push_str("plot ");
    s.push_str(&parts.join(", \\\n     "));
    s.push('\n');
    s
}

/// Heat map of an `x,y,value` CSV.
pub fn heatmap(stem: &str, file: &str) -> String {
    format!(
        "set datafile separator ','\nset terminal pngcairo size 800,800\nset output '{stem}.png'\nset size ratio -1\nset view map\nunset key\nsplot '{file}' using 1:2:3 every ::1 with points pointtype 5 pointsize 0.3 palette\n"
    )
}
