#![allow(dead_code)]

use eigenpath::{Complex, Hermitian, Matrix, State};
use std::time::Duration;

pub fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

pub fn qubit(v: f64) -> Hermitian {
    Hermitian::from_real_rows(&[vec![0.0, v], vec![v, 1.0]]).unwrap()
}

type Dense = Vec<Vec<Complex>>;

fn dense(h: &Hermitian) -> Dense {
    let n = h.dim();
    (0..n).map(|i| (0..n).map(|j| h.as_operator().get(i, j)).collect()).collect()
}

fn mul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).fold(c(0.0, 0.0), |acc, k| acc + a[i][k] * b[k][j]))
                .collect()
        })
        .collect()
}

/// `exp(-i H t)` by scaling and squaring of a Taylor series.
pub fn expm(h: &Hermitian, t: f64) -> Matrix {
    let n = h.dim();
    let m = dense(h);
    let norm = m
        .iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
        * t.abs();
    let squarings = (norm.max(1e-300).log2().ceil().max(0.0) as u32) + 4;
    let scale = c(0.0, -t / f64::from(2u32.pow(squarings)));
    let x: Dense = m.iter().map(|r| r.iter().map(|z| z * scale).collect()).collect();
    let mut term: Dense = (0..n)
        .map(|i| (0..n).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect();
    let mut sum = term.clone();
    for k in 1..30 {
        term = mul(&term, &x);
        for row in term.iter_mut() {
            for z in row.iter_mut() {
                *z /= k as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = mul(&sum, &sum);
    }
    Matrix::from_rows(&sum).unwrap()
}

pub fn evolve(h: &Hermitian, t: f64, psi: &State) -> State {
    expm(h, t).apply(psi)
}

pub struct Check {
    label: String,
    value: f64,
    tol: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.value.is_finite() && self.value <= self.tol
    }
}

/// One acceptance criterion made of several numeric checks.
pub struct Criterion {
    id: String,
    name: String,
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Criterion {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn check(&mut self, label: impl Into<String>, value: f64, tol: f64) -> &mut Self {
        self.checks.push(Check {
            label: label.into(),
            value,
            tol,
        });
        self
    }

    pub fn time(&mut self, label: impl Into<String>, elapsed: Duration, limit: Duration) -> &mut Self {
        self.check(label, elapsed.as_secs_f64(), limit.as_secs_f64())
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(Check::pass)
    }

    pub fn line(&self) -> String {
        let detail: Vec<String> = self
            .checks
            .iter()
            .map(|c| {
                let mark = if c.pass() { "" } else { " !" };
                format!("{}={:.3e}/{:.1e}{mark}", c.label, c.value, c.tol)
            })
            .collect();
        let status = if self.pass() { "PASS" } else { "FAIL" };
        format!("{status} {:>3} {:<34} {}", self.id, self.name, detail.join(" "))
    }

    pub fn print(&self) {
        println!("{}", self.line());
        for n in &self.notes {
            println!("         note: {n}");
        }
    }
}
