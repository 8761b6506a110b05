//! Parameter and sensor sampling.

use crate::error::{Error, Result};
use crate::fem::mesh::SIDE_TOP;
use crate::fem::{Problem, StructuredTriMesh, Variant};
use crate::rng::SplitMix64;

/// Independent uniform draws from the parameter box.
pub fn sample_parameters(
    param_box: &[(f64, f64)],
    count: usize,
    rng: &mut SplitMix64,
) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            param_box
                .iter()
                .map(|(lo, hi)| rng.uniform(*lo, *hi))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSet {
    pub input_nodes: Vec<usize>,
    pub output_nodes: Vec<usize>,
    pub input_coords: Vec<[f64; 2]>,
    pub output_coords: Vec<[f64; 2]>,
}

fn choose_without_replacement(
    eligible: &[usize],
    count: usize,
    rng: &mut SplitMix64,
    what: &str,
) -> Result<Vec<usize>> {
    if eligible.len() < count {
        return Err(Error::InvalidArgument {
            op: "sample_sensors",
            detail: format!(
                "{what}: requested {count} sensors, only {} eligible nodes",
                eligible.len()
            ),
        });
    }
    let mut pool = eligible.to_vec();
    // partial Fisher-Yates: the first `count` entries are the draw
    for i in 0..count {
        let j = i + rng.below(pool.len() - i);
        pool.swap(i, j);
    }
    pool.truncate(count);
    Ok(pool)
}

/// Samples sensor locations among mesh nodes, restricted to the per-variant
/// regions and never on a Dirichlet boundary.
pub fn sample_sensors(
    mesh: &StructuredTriMesh,
    problem: &Problem,
    n_in: usize,
    n_out: usize,
    autoencoder: bool,
    rng: &mut SplitMix64,
) -> Result<SensorSet> {
    let dirichlet = problem.dirichlet_mask(mesh);
    let eligible = |region: &dyn Fn(usize) -> bool| -> Vec<usize> {
        (0..mesh.n_nodes())
            .filter(|&n| !dirichlet[n] && region(n))
            .collect()
    };
    let (input_pool, output_pool): (Vec<usize>, Vec<usize>) = match problem.variant {
        Variant::AffineAdvectionDiffusion => {
            let input = eligible(&|n: usize| mesh.coord(n)[1] <= 0.5);
            let output = eligible(&|n: usize| mesh.coord(n)[1] > 0.5);
            (input, output)
        }
        Variant::NonaffineDiffusion => {
            // inputs on the Neumann boundary (top side), outputs in the
            // top-left quadrant
            let input = eligible(&|n: usize| mesh.boundary_mask(n) & SIDE_TOP != 0);
            let output = eligible(&|n: usize| {
                let [x, y] = mesh.coord(n);
                x <= 0.5 && y >= 0.5
            });
            (input, output)
        }
    };
    let input_nodes = choose_without_replacement(&input_pool, n_in, rng, "input region")?;
    let output_nodes = if autoencoder {
        input_nodes.clone()
    } else {
        choose_without_replacement(&output_pool, n_out, rng, "output region")?
    };
    let coords = |nodes: &[usize]| nodes.iter().map(|&n| mesh.coord(n)).collect();
    Ok(SensorSet {
        input_coords: coords(&input_nodes),
        output_coords: coords(&output_nodes),
        input_nodes,
        output_nodes,
    })
}
