// Trees, scale labels, self-energy clusters and the counting inequalities.

use kamtori::model::bundled;
use kamtori::trees::{counting_sweep, detect_self_energy_clusters, enumerate_trees, scale_assignments, CountingMode, Tree, TREE_BUDGET};
use kamtori::{make_profile, ProfileKind, RotationVector};

pub fn run_example() -> kamtori::Result<()> {
    let model = bundled::maximal();
    let omega = RotationVector::parse("1,phi")?;
    let trees = enumerate_trees(&model, 3, &[1, 1], TREE_BUDGET)?;
    println!("{} trees of order 3 with momentum (1,1)", trees.len());
    if let Some(t) = trees.first() {
        println!("  first: {}", t.to_line());
    }

    let profile = make_profile(&omega, 0.2, &ProfileKind::Identity, 10)?;
    let rep = counting_sweep(&model, &omega, &profile, 4, CountingMode::Theorem1, TREE_BUDGET)?;
    println!(
        "identity profile: {} trees, {} assignments, {} clusters, {} failures",
        rep.trees, rep.assignments, rep.clusters, rep.failures
    );

    let inflated = profile.scaled(16.0);
    let rep = counting_sweep(&model, &omega, &inflated, 4, CountingMode::Theorem1, TREE_BUDGET)?;
    println!(
        "16x profile: {} assignments, {} clusters ({} renormalized), {} failures",
        rep.assignments, rep.clusters, rep.renormalized_clusters, rep.failures
    );
    if let Some(w) = &rep.witness {
        println!("  witness {}: {} [{}]", w.check, w.detail, w.tree);
    }

    let cantor = bundled::cantor();
    let golden = RotationVector::golden();
    let p = make_profile(&golden, 0.2, &ProfileKind::Identity, 10)?.scaled(16.0);
    let mut clusters = 0;
    let sample = enumerate_trees(&cantor, 3, &[1, 1], TREE_BUDGET)?;
    for tree in &sample {
        for scales in scale_assignments(tree, &golden, &p)? {
            let labelled = Tree { scales, ..tree.clone() };
            clusters += detect_self_energy_clusters(&labelled).len();
        }
    }
    println!("cantor model, order 3, ν=(1,1): {} trees, {clusters} clusters over all labellings", sample.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> kamtori::Result<()> {
    run_example()
}
