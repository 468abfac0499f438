//! Sample maps shared by the benchmarks.

use affinv::PolynomialMap;

/// `(t, t², t³)`, `(s, t, (s² + t²)/2)`, the graph of `s t`, and a generic
/// embedding of ℝ² in ℝ⁵.
pub fn sample_maps() -> Vec<(&'static str, PolynomialMap)> {
    [
        ("moment-curve", "d = 1\nx1\nx1^2\nx1^3\n"),
        ("paraboloid", "d = 2\nx1\nx2\n0.5 * x1^2 + 0.5 * x2^2\n"),
        ("saddle", "d = 2\nx1\nx2\nx1 x2\n"),
        ("surface-r5", "d = 2\nx1\nx2\nx1^2\nx1 x2 + 0.3 * x2^3\nx2^2 - x1^3\n"),
    ]
    .into_iter()
    .map(|(name, text)| (name, PolynomialMap::parse(text).expect("sample map parses")))
    .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn maps_parse() {
        let maps = super::sample_maps();
        assert_eq!(maps.iter().map(|(_, f)| f.n()).collect::<Vec<_>>(), [3, 3, 3, 5]);
    }
}
