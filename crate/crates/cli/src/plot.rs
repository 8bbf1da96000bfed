//! Ready-to-run gnuplot scripts for each command's column data.

use std::path::Path;

use crate::commands::Artifacts;

pub const PULSE: &str = r#"set datafile separator ","
set key autotitle columnhead
set multiplot layout 2,1
set xlabel "xi"
plot "pulse.csv" using 1:2 with lines, "" using 1:4 with lines
set xlabel "u"
set ylabel "v"
plot "pulse.csv" using 2:3 with lines
unset multiplot
"#;

pub const SPECTRUM: &str = r#"set datafile separator ","
set key autotitle columnhead
set xlabel "Re lambda"
set ylabel "Im lambda"
plot "essential.csv" using 2:3 with points pt 7 ps 0.3 title "essential", \
     "r1_scan.csv" using 1:2 with lines title "R1 contour"
"#;

pub const SIMULATE: &str = r#"set datafile separator ","
set key autotitle columnhead
set logscale y
set xlabel "t"
set ylabel "orbital distance"
plot "distance.csv" using 1:2 with linespoints
"#;

pub const SWEEP: &str = r#"set datafile separator ","
set key autotitle columnhead
set logscale x
set xlabel "eps"
plot "sweep.csv" using 1:5 with linespoints title "lambda1 (Evans)", \
     "" using 1:6 with linespoints title "lambda1 (Melnikov)"
"#;

pub fn write(dir: &Path, name: &str, body: &str, list: &mut Artifacts) -> fhn_rdm::Result<()> {
    std::fs::write(dir.join(name), body)?;
    list.push(name.to_string());
    Ok(())
}
