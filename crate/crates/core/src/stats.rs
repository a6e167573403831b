//! Small shared statistics helpers used by tests and the acceptance suite.

/// Upper 0.99 quantiles of the chi-square distribution for 1..=40 degrees of
/// freedom (precomputed; index df-1).
const CHI2_Q99: [f64; 40] = [
    6.6348966010212145,
    9.21034037197618,
    11.344866730144373,
    13.276704135987622,
    15.08627246938899,
    16.811893829770927,
    18.475306906582357,
    20.090235029663233,
    21.665994333461924,
    23.209251158954356,
    24.724970311318277,
    26.216967305535853,
    27.68824961045705,
    29.141237740672796,
    30.57791416689249,
    31.999926908815176,
    33.40866360500461,
    34.805305734705065,
    36.19086912927004,
    37.56623478662507,
    38.93217268351607,
    40.289360437593864,
    41.638398118858476,
    42.97982013935165,
    44.31410489621915,
    45.64168266628317,
    46.962942124751436,
    48.27823577031548,
    49.58788447289881,
    50.89218131151707,
    52.19139483319193,
    53.48577183623535,
    54.77553976011035,
    56.06090874778906,
    57.3420734338592,
    58.61921450168706,
    59.89250004508689,
    61.1620867636897,
    62.4281210161849,
    63.690739751564465,
];

/// Chi-square goodness-of-fit statistic against a uniform expectation.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}

/// True when the uniformity hypothesis is NOT rejected at significance 0.01
/// (i.e. the goodness-of-fit p-value exceeds 0.01).
pub fn chi_square_uniform_ok(counts: &[u64]) -> bool {
    let df = counts.len() - 1;
    assert!(
        (1..=CHI2_Q99.len()).contains(&df),
        "no critical value tabulated for df={df}"
    );
    chi_square_uniform(counts) < CHI2_Q99[df - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfectly_uniform_passes() {
        assert!(chi_square_uniform_ok(&[100, 100, 100]));
        assert_eq!(chi_square_uniform(&[100, 100, 100]), 0.0);
    }

    #[test]
    fn grossly_skewed_fails() {
        assert!(!chi_square_uniform_ok(&[300, 0, 0]));
    }
}
