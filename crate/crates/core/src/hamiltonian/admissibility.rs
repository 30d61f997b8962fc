//! Parameter inequalities on `(gamma, alpha, d)` under which the a priori bounds hold.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    /// Short identifier, e.g. `alpha_range`.
    pub name: &'static str,
    /// Human-readable inequality.
    pub inequality: String,
    pub satisfied: bool,
    /// `rhs - lhs` of the strict inequality; positive when satisfied.
    /// Infinite when the condition is vacuous.
    pub margin: f64,
}

impl fmt::Display for ConditionCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<18} {:<44} margin={:<12.6} {}",
            self.name,
            self.inequality,
            self.margin,
            if self.satisfied { "ok" } else { "VIOLATED" }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Admissibility {
    pub gamma: f64,
    pub alpha: f64,
    pub dim: usize,
    pub conditions: Vec<ConditionCheck>,
}

impl Admissibility {
    pub fn admissible(&self) -> bool {
        self.conditions.iter().all(|c| c.satisfied)
    }

    pub fn violations(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.conditions.iter().filter(|c| !c.satisfied)
    }
}

fn strict(name: &'static str, inequality: String, lhs: f64, rhs: f64) -> ConditionCheck {
    ConditionCheck { name, inequality, satisfied: lhs < rhs, margin: rhs - lhs }
}

/// Evaluates every inequality; the verdict is their conjunction.
pub fn check_parameter_admissibility(gamma: f64, alpha: f64, dim: usize) -> Admissibility {
    let d = dim as f64;
    let mut conditions = vec![
        ConditionCheck {
            name: "alpha_range",
            inequality: format!("0 < alpha = {alpha} < 2"),
            satisfied: alpha > 0.0 && alpha < 2.0,
            margin: alpha.min(2.0 - alpha),
        },
        strict("dimension", format!("d = {dim} < 4 + 2/alpha = {}", 4.0 + 2.0 / alpha), d, 4.0 + 2.0 / alpha),
        ConditionCheck {
            name: "gamma_range",
            inequality: format!("1 < gamma = {gamma} < 1 + 1/(1+2 alpha) = {}", 1.0 + 1.0 / (1.0 + 2.0 * alpha)),
            satisfied: gamma > 1.0 && gamma < 1.0 + 1.0 / (1.0 + 2.0 * alpha),
            margin: (gamma - 1.0).min(1.0 + 1.0 / (1.0 + 2.0 * alpha) - gamma),
        },
        strict(
            "inverse_moments",
            format!("alpha < (2-gamma)/(2(gamma-1)) = {}", (2.0 - gamma) / (2.0 * (gamma - 1.0))),
            alpha,
            (2.0 - gamma) / (2.0 * (gamma - 1.0)),
        ),
    ];
    // The gradient bound needs 2(alpha+1)/((gamma-1) alpha (d-2)) > 1, which is vacuous for d <= 2.
    if dim <= 2 {
        conditions.push(ConditionCheck {
            name: "gradient_bound",
            inequality: "2(alpha+1)/((gamma-1) alpha (d-2)) > 1 (vacuous, d <= 2)".into(),
            satisfied: true,
            margin: f64::INFINITY,
        });
    } else {
        let lhs = 2.0 * (alpha + 1.0) / ((gamma - 1.0) * alpha * (d - 2.0));
        conditions.push(strict("gradient_bound", format!("1 < 2(alpha+1)/((gamma-1) alpha (d-2)) = {lhs}"), 1.0, lhs));
    }
    Admissibility { gamma, alpha, dim, conditions }
}

/// Supremum of admissible `alpha` for a given `gamma` and dimension (0 when none).
pub fn alpha_frontier(gamma: f64, dim: usize) -> f64 {
    if !(gamma > 1.0 && gamma < 2.0) {
        return 0.0;
    }
    let d = dim as f64;
    let mut sup = 2.0f64;
    sup = sup.min(0.5 * (1.0 / (gamma - 1.0) - 1.0));
    sup = sup.min((2.0 - gamma) / (2.0 * (gamma - 1.0)));
    if d > 4.0 {
        sup = sup.min(2.0 / (d - 4.0));
    }
    if dim > 2 {
        let k = (gamma - 1.0) * (d - 2.0) - 2.0;
        if k > 0.0 {
            sup = sup.min(2.0 / k);
        }
    }
    sup.max(0.0)
}
