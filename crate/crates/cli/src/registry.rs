use nsdde_core::{
    make_additive_jump, make_additive_noise, make_example_a, make_example_b, make_jump_example,
    CoefficientSet, Result,
};

/// `(id, summary)` for every model the CLI can build.
pub const MODELS: [(&str, &str); 5] = [
    (
        "example-a",
        "D(y) = -a y, b = s - s^3, sigma = |s|^1.5 with s = x + a y (--a, |a| < 1)",
    ),
    (
        "example-b",
        "D(y) = sin(y)/2, b = x - x^3 + cos y, sigma = |x|^1.5",
    ),
    ("additive", "D = 0, b = 0, sigma = 1"),
    ("jump-additive", "D = 0, b = 0, h(x, y, u) = u"),
    (
        "jump-neutral",
        "D(y) = sin(y)/4, b = x - x^3 + cos y, h = u (1 ∧ |x|)",
    ),
];

pub fn build(id: &str, a: f64) -> Result<CoefficientSet, String> {
    let set: Result<CoefficientSet> = match id {
        "example-a" => make_example_a(a),
        "example-b" => Ok(make_example_b()),
        "additive" => Ok(make_additive_noise()),
        "jump-additive" => Ok(make_additive_jump()),
        "jump-neutral" => Ok(make_jump_example()),
        _ => {
            let known: Vec<&str> = MODELS.iter().map(|(m, _)| *m).collect();
            return Err(format!(
                "unknown model `{id}` (known: {})",
                known.join(", ")
            ));
        }
    };
    set.map_err(|e| e.to_string())
}
