use std::fs;
use std::path::Path;

use super::SysError;

/// Per-period net-demand quantiles (MW), one column per level.
#[derive(Debug, Clone, PartialEq)]
pub struct NetDemandQuantiles {
    pub levels: Vec<f64>,
    /// `values[t][i]` is the level-`i` quantile for period `t`.
    pub values: Vec<Vec<f64>>,
    /// Net demand that actually occurs, if recorded.
    pub realized: Option<Vec<f64>>,
}

impl NetDemandQuantiles {
    pub fn periods(&self) -> usize {
        self.values.len()
    }

    /// Index of the level closest to the median; ties go to the lower level.
    pub fn median_index(&self) -> usize {
        let mut best = 0;
        for (i, l) in self.levels.iter().enumerate() {
            if (l - 0.5).abs() < (self.levels[best] - 0.5).abs() {
                best = i;
            }
        }
        best
    }

    /// Realised net demand for period `t`: the recorded value, else the median column.
    pub fn realized_at(&self, t: usize) -> f64 {
        match &self.realized {
            Some(r) => r[t],
            None => self.values[t][self.median_index()],
        }
    }

    /// Rescales the wind component `demand − net` from `reference` to `capacity` MW of installed wind.
    /// The result covers the periods of `demand` only.
    pub fn rescale_wind(&self, demand: &[f64], reference: f64, capacity: f64) -> Self {
        let k = if reference > 0.0 { capacity / reference } else { 0.0 };
        let scale = |t: usize, v: f64| demand[t] - (demand[t] - v) * k;
        Self {
            levels: self.levels.clone(),
            values: self
                .values
                .iter()
                .take(demand.len())
                .enumerate()
                .map(|(t, row)| row.iter().map(|&v| scale(t, v)).collect())
                .collect(),
            realized: self
                .realized
                .as_ref()
                .map(|r| r.iter().take(demand.len()).enumerate().map(|(t, &v)| scale(t, v)).collect()),
        }
    }

    /// Parses the quantile table: a header of quantile levels (plus optional
    /// `period` and `realized` columns) followed by one row per period.
    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self, SysError> {
        let parse_err = |line: u64, message: String| SysError::Parse {
            path: origin.to_path_buf(),
            message: format!("line {line}: {message}"),
        };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        enum Col {
            Period,
            Realized,
            Level(usize),
        }
        let mut cols = Vec::new();
        let mut levels = Vec::new();
        for h in headers.iter() {
            match h.to_ascii_lowercase().as_str() {
                "period" => cols.push(Col::Period),
                "realized" | "realised" => cols.push(Col::Realized),
                _ => {
                    let l: f64 = h.parse().map_err(|_| parse_err(1, format!("header `{h}` is not a quantile level")))?;
                    cols.push(Col::Level(levels.len()));
                    levels.push(l);
                }
            }
        }
        check_levels(&levels)?;
        let has_realized = cols.iter().any(|c| matches!(c, Col::Realized));
        let mut values = Vec::new();
        let mut realized = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let mut row = vec![0.0; levels.len()];
            for (c, field) in cols.iter().zip(rec.iter()) {
                if matches!(c, Col::Period) {
                    continue;
                }
                let v: f64 = field
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("`{field}` is not a number")))?;
                match c {
                    Col::Level(i) => row[*i] = v,
                    Col::Realized => realized.push(v),
                    Col::Period => {}
                }
            }
            if row.windows(2).any(|w| w[1] < w[0]) {
                return Err(parse_err(line, "quantile values decrease with the level".into()));
            }
            values.push(row);
        }
        if values.is_empty() {
            return Err(parse_err(2, "no periods".into()));
        }
        Ok(Self { levels, values, realized: has_realized.then_some(realized) })
    }
}

pub fn load_scenarios(path: impl AsRef<Path>) -> Result<NetDemandQuantiles, SysError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SysError::Io { path: path.to_path_buf(), source })?;
    NetDemandQuantiles::from_csv_str(&text, path)
}

fn check_levels(levels: &[f64]) -> Result<(), SysError> {
    let bad = |m: &str| SysError::Validation { field: "quantile_levels".into(), message: m.into() };
    if levels.is_empty() {
        return Err(bad("no quantile levels"));
    }
    if levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
        return Err(bad("levels must lie strictly inside (0, 1)"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("levels must be strictly increasing"));
    }
    Ok(())
}

/// Branch weights from the midpoint rule: level `i` owns the probability
/// mass between the midpoints to its neighbours, the outer levels extending to
/// 0 and 1.
pub fn midpoint_probabilities(levels: &[f64]) -> Result<Vec<f64>, SysError> {
    check_levels(levels)?;
    let n = levels.len();
    let edge = |i: usize| -> f64 {
        if i == 0 {
            0.0
        } else if i == n {
            1.0
        } else {
            0.5 * (levels[i - 1] + levels[i])
        }
    };
    Ok((0..n).map(|i| edge(i + 1) - edge(i)).collect())
}

/// A tree that branches once, right after the root period.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    /// Net demand of the root period, MW.
    pub root: f64,
    pub levels: Vec<f64>,
    /// Each branch's series starts with the root value.
    pub branches: Vec<(Vec<f64>, f64)>,
}

impl ScenarioTree {
    pub fn periods(&self) -> usize {
        self.branches.first().map_or(0, |(s, _)| s.len())
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.branches.iter().map(|(_, p)| *p)
    }

    /// Net demand of branch `s` in period `t`.
    pub fn net_demand(&self, s: usize, t: usize) -> f64 {
        self.branches[s].0[t]
    }
}

/// One branch per quantile level. `net_demand[t][i]` gives the level-`i`
/// value for window period `t`; period 0 is replaced by `root`.
pub fn build_scenario_tree(levels: &[f64], net_demand: &[Vec<f64>], root: f64) -> Result<ScenarioTree, SysError> {
    let probs = midpoint_probabilities(levels)?;
    if net_demand.is_empty() {
        return Err(SysError::Validation { field: "net_demand".into(), message: "empty window".into() });
    }
    if let Some(t) = net_demand.iter().position(|row| row.len() != levels.len()) {
        return Err(SysError::Validation {
            field: format!("net_demand[{t}]"),
            message: format!("expected {} quantile values", levels.len()),
        });
    }
    let branches = probs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let series =
                net_demand.iter().enumerate().map(|(t, row)| if t == 0 { root } else { row[i] }).collect();
            (series, p)
        })
        .collect();
    Ok(ScenarioTree { root, levels: levels.to_vec(), branches })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GB_LEVELS: [f64; 7] = [0.005, 0.1, 0.3, 0.5, 0.7, 0.9, 0.995];

    #[test]
    fn seven_levels_sum_to_one() {
        let p = midpoint_probabilities(&GB_LEVELS).unwrap();
        assert_eq!(p.len(), 7);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x > 0.0));
        assert!((p[0] - 0.0525).abs() < 1e-12);
        assert!((p[3] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn single_level_is_certain() {
        assert_eq!(midpoint_probabilities(&[0.5]).unwrap(), vec![1.0]);
    }

    #[test]
    fn symmetric_pair() {
        assert_eq!(midpoint_probabilities(&[0.25, 0.75]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn bad_levels() {
        assert!(midpoint_probabilities(&[]).is_err());
        assert!(midpoint_probabilities(&[0.5, 0.3]).is_err());
        assert!(midpoint_probabilities(&[0.0, 0.5]).is_err());
    }

    #[test]
    fn tree_shares_root() {
        let window = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let t = build_scenario_tree(&[0.25, 0.75], &window, 1.5).unwrap();
        assert_eq!(t.branches.len(), 2);
        assert_eq!(t.net_demand(0, 0), 1.5);
        assert_eq!(t.net_demand(1, 0), 1.5);
        assert_eq!(t.net_demand(1, 1), 4.0);
    }

    #[test]
    fn csv_parsing() {
        let text = "period,0.1,0.5,0.9,realized\n0,90,100,110,101\n1,95,105,115,99\n";
        let q = NetDemandQuantiles::from_csv_str(text, Path::new("x.csv")).unwrap();
        assert_eq!(q.levels, vec![0.1, 0.5, 0.9]);
        assert_eq!(q.values[1], vec![95.0, 105.0, 115.0]);
        assert_eq!(q.realized_at(1), 99.0);
        let text = "0.1,0.5,0.9\n90,100,110\n";
        let q = NetDemandQuantiles::from_csv_str(text, Path::new("x.csv")).unwrap();
        assert_eq!(q.realized_at(0), 100.0);
    }

    #[test]
    fn csv_errors_have_line_numbers() {
        let text = "0.1,0.5\n1,2\n3,x\n";
        let err = NetDemandQuantiles::from_csv_str(text, Path::new("x.csv")).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        let text = "0.1,0.5\n3,2\n";
        assert!(NetDemandQuantiles::from_csv_str(text, Path::new("x.csv")).is_err());
    }

    #[test]
    fn wind_rescaling() {
        let q = NetDemandQuantiles { levels: vec![0.5], values: vec![vec![800.0]], realized: Some(vec![900.0]) };
        let r = q.rescale_wind(&[1000.0], 100.0, 200.0);
        assert_eq!(r.values[0][0], 600.0);
        assert_eq!(r.realized_at(0), 800.0);
    }
}
