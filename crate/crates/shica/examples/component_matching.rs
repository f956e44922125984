//! Matching estimated component rows to a reference: optimal assignment
//! over permutations and signs of unit-normalized rows.

use shica::{apply_unmixing, fit_shica_j, generate, match_components, JOptions, NoiseScheme,
    ScenarioSpec, SourceKind, SourceSpec};

fn main() -> shica::Result<()> {
    let spec = ScenarioSpec {
        m: 4,
        p: 3,
        n: 20_000,
        sources: SourceSpec::Uniform(SourceKind::Gaussian),
        noise: NoiseScheme::DiverseUniform,
        seed: 33,
    };
    let generated = generate(&spec)?;
    let fit = fit_shica_j(&generated.data, &JOptions::default())?;

    // average the unmixed views into one estimate of the shared components
    let unmixed = apply_unmixing(&fit.unmixing, &generated.data)?;
    let mut pooled = unmixed.view(0).clone();
    for i in 1..unmixed.m() {
        pooled += unmixed.view(i);
    }
    pooled /= unmixed.m() as f64;

    let matched = match_components(&pooled, &generated.sources)?;
    println!("permutation: {:?}", matched.permutation);
    println!("signs:       {:?}", matched.signs);
    for (a, d) in matched.distances.iter().enumerate() {
        println!("component {a}: matched distance {d:.4}");
    }
    println!("total: {:.4}", matched.total);
    Ok(())
}
