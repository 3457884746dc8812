use nalgebra::{DMatrix, DVector};

use super::model::Generator;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    pub states: Vec<usize>,
    /// Full-length vector, zero outside the class.
    pub distribution: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    /// Stationary distribution of each closed (recurrent) class.
    pub closed_classes: Vec<ClassDistribution>,
    /// Set when the chain has a single closed class.
    pub unique: Option<Vec<f64>>,
    pub warning: Option<String>,
}

impl StationaryResult {
    pub fn expect_unique(&self) -> Result<&[f64]> {
        self.unique.as_deref().ok_or_else(|| {
            Error::domain(
                self.warning
                    .clone()
                    .unwrap_or_else(|| "stationary distribution is not unique".into()),
            )
        })
    }
}

fn reachability(g: &Generator) -> Vec<Vec<bool>> {
    let n = g.n();
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
        for (j, v) in row.iter_mut().enumerate() {
            if g.rate(i, j) > 0.0 && i != j {
                *v = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

/// Left null vector(s) of the generator, one per closed communicating class.
pub fn stationary_distribution(g: &Generator) -> Result<StationaryResult> {
    let n = g.n();
    let reach = reachability(g);
    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if class_of[i] != usize::MAX {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &m in &members {
            class_of[m] = classes.len();
        }
        classes.push(members);
    }
    let closed: Vec<&Vec<usize>> = classes
        .iter()
        .filter(|c| {
            c.iter()
                .all(|&i| (0..n).all(|j| !reach[i][j] || c.contains(&j)))
        })
        .collect();

    let mut out = Vec::with_capacity(closed.len());
    for class in &closed {
        let m = class.len();
        let mut a = DMatrix::<f64>::zeros(m, m);
        for (r, &i) in class.iter().enumerate() {
            for (c, &j) in class.iter().enumerate() {
                // (Q_Cᵀ)[c][r]
                a[(c, r)] = g.rate(i, j);
            }
        }
        for c in 0..m {
            a[(m - 1, c)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(m);
        b[m - 1] = 1.0;
        let pi = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Numerical("singular stationary system".into()))?;
        let mut dist = vec![0.0; n];
        let mut total = 0.0;
        for (r, &i) in class.iter().enumerate() {
            dist[i] = pi[r].max(0.0);
            total += dist[i];
        }
        for v in &mut dist {
            *v /= total;
        }
        out.push(ClassDistribution {
            states: (*class).clone(),
            distribution: dist,
        });
    }

    let warning = if classes.len() > 1 {
        Some(format!(
            "reducible chain: {} communicating classes, {} closed",
            classes.len(),
            closed.len()
        ))
    } else {
        None
    };
    let unique = if out.len() == 1 {
        Some(out[0].distribution.clone())
    } else {
        None
    };
    Ok(StationaryResult {
        closed_classes: out,
        unique,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_two_state() {
        let g = Generator::from_rates(&[vec![0.0, 7.0], vec![7.0, 0.0]]).unwrap();
        let s = stationary_distribution(&g).unwrap();
        let p = s.unique.unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        assert!(s.warning.is_none());
    }

    #[test]
    fn detailed_balance_two_state() {
        let g = Generator::from_rates(&[vec![0.0, 1.0], vec![3.0, 0.0]]).unwrap();
        let p = stationary_distribution(&g).unwrap().unique.unwrap();
        assert!((p[0] - 0.75).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn absorbing_middle_state() {
        let g = Generator::from_rates(&[
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 5.0, 0.0],
        ])
        .unwrap();
        let s = stationary_distribution(&g).unwrap();
        assert_eq!(s.unique.unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(s.warning.is_some());
    }

    #[test]
    fn zero_generator_has_one_class_per_state() {
        let s = stationary_distribution(&Generator::zeros(3)).unwrap();
        assert_eq!(s.closed_classes.len(), 3);
        assert!(s.unique.is_none());
        assert!(s.expect_unique().is_err());
    }
}
