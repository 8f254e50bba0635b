use std::fmt::Write;

/// Scientific notation with six significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.5e}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub struct Csv {
    out: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut out = header.join(",");
        out.push('\n');
        Self { out }
    }

    pub fn row(&mut self, fields: impl IntoIterator<Item = String>) {
        let fields: Vec<String> = fields.into_iter().collect();
        writeln!(self.out, "{}", fields.join(",")).unwrap();
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// Grid from `a,b,c`, `lin:a:b:n` or `log:a:b:n`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let bad = || format!("invalid grid `{spec}` (expected a,b,c or lin:a:b:n or log:a:b:n)");
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        [kind @ ("lin" | "log"), a, b, n] => {
            let a: f64 = a.parse().map_err(|_| bad())?;
            let b: f64 = b.parse().map_err(|_| bad())?;
            let n: usize = n.parse().map_err(|_| bad())?;
            if n < 2 || !(a.is_finite() && b.is_finite()) {
                return Err(bad());
            }
            let frac = |i: usize| i as f64 / (n - 1) as f64;
            if *kind == "lin" {
                (0..n).map(|i| a + (b - a) * frac(i)).collect()
            } else {
                if !(a > 0.0 && b > 0.0) {
                    return Err(format!("log grid `{spec}` needs positive end points"));
                }
                (0..n).map(|i| a * (b / a).powf(frac(i))).collect()
            }
        }
        [list] => list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<f64>, String>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1,2.5,4").unwrap(), vec![1.0, 2.5, 4.0]);
        assert_eq!(parse_grid("lin:0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        let g = parse_grid("log:1:100:3").unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert!(parse_grid("log:0:1:3").is_err());
        assert!(parse_grid("lin:0:1").is_err());
        assert!(parse_grid("x").is_err());
    }

    #[test]
    fn number_format() {
        assert_eq!(num(0.0012283773), "1.22838e-3");
        assert_eq!(num(0.0), "0.00000e0");
        assert_eq!(opt(None), "");
    }
}
