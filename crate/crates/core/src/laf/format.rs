use crate::laf::LafParams;

/// Renders a unit as a readable formula with two-decimal values:
/// `(α(Σx^b)^a + β(Σ(1−x)^d)^c) / (γ(Σx^f)^e + δ(Σ(1−x)^h)^g)`.
pub fn format_unit(p: &LafParams) -> String {
    format!(
        "({:.2}(Σx^{:.2})^{:.2} + {:.2}(Σ(1−x)^{:.2})^{:.2}) / ({:.2}(Σx^{:.2})^{:.2} + {:.2}(Σ(1−x)^{:.2})^{:.2})",
        p.alpha, p.b, p.a, p.beta, p.d, p.c, p.gamma, p.f, p.e, p.delta, p.h, p.g
    )
}

/// Renders a linear read-out over unit outputs, e.g.
/// `0.02 + (-0.13*unit1) + (0.50*unit2)`.
pub fn format_linear(bias: f64, weights: &[f64], label: &str) -> String {
    let mut s = format!("{:.2}", bias);
    for (i, w) in weights.iter().enumerate() {
        s.push_str(&format!(" + ({:.2}*{}{})", w, label, i + 1));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laf::{preset_params, Preset};

    /// Pulls out every decimal number (`-?digits.digits`) in order.
    fn numbers(s: &str) -> Vec<f64> {
        let mut out = Vec::new();
        let chars: Vec<char> = s.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let start = i;
            if chars[i] == '-' {
                i += 1;
            }
            let digits_start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i > digits_start && i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                out.push(text.parse().unwrap());
            } else {
                i = start + 1;
            }
        }
        out
    }

    #[test]
    fn sum_preset_rendering() {
        let s = format_unit(&preset_params(Preset::Sum).unwrap());
        assert_eq!(
            s,
            "(1.00(Σx^1.00)^1.00 + 0.00(Σ(1−x)^1.00)^0.00) / (1.00(Σx^1.00)^0.00 + 0.00(Σ(1−x)^1.00)^0.00)"
        );
    }

    #[test]
    fn rendered_numbers_parse_back() {
        let p = LafParams::from_array([
            0.371, 0.874, 0.721, 0.744, 0.719, 0.186, 0.621, 0.004, 0.812, -0.803, 1.194, 1.176,
        ]);
        let n = numbers(&format_unit(&p));
        // α b a β d c γ f e δ h g
        let expected = [
            p.alpha, p.b, p.a, p.beta, p.d, p.c, p.gamma, p.f, p.e, p.delta, p.h, p.g,
        ];
        assert_eq!(n.len(), 12);
        for (got, want) in n.iter().zip(expected) {
            assert!((got - want).abs() <= 0.005 + 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn learned_mean_solution_rendering() {
        // Single-unit mean solution with numerator and denominator scaled by 1.51.
        let p = LafParams::from_array([
            1.00, 1.00, 0.00, 0.62, 0.00, 0.30, 1.00, 0.00, 1.51, 0.00, 0.00, 1.51,
        ]);
        let s = format_unit(&p);
        assert!(s.starts_with("(1.51(Σx^1.00)^1.00"), "{s}");
        assert!(s.ends_with("1.51(Σ(1−x)^0.00)^1.00)"), "{s}");
    }

    #[test]
    fn linear_rendering() {
        assert_eq!(
            format_linear(0.02, &[-0.13, 0.5, -0.07], "unit"),
            "0.02 + (-0.13*unit1) + (0.50*unit2) + (-0.07*unit3)"
        );
    }
}
