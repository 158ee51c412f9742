mod common;

use common::{offset_disk, sqrt_disk};
use qlab_core::domains::Mesh;
use qlab_core::topology::{
    build_sheet_graph, default_s_min, has_global_selection, locate_essential_singularity, loop_monodromy,
    mesh_boundary_loop, ForcedStatus, SheetGraph,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Boundary of the lattice square with lower-left corner `(i, j)`, if all
/// four vertices exist.
fn cell_loop(mesh: &Mesh, i: i32, j: i32) -> Option<Vec<usize>> {
    [[i, j, 0], [i + 1, j, 0], [i + 1, j + 1, 0], [i, j + 1, 0]].iter().map(|&l| mesh.vertex_at(l)).collect()
}

/// A closed walk from `base` through cover edges.
fn random_loop<R: Rng>(g: &SheetGraph, base: usize, rng: &mut R) -> Vec<usize> {
    let nb = |v: usize| -> Vec<usize> {
        g.mesh().neighbors(v).iter().map(|e| e.0).filter(|&w| g.transport(v, w).is_ok()).collect()
    };
    let mut walk = vec![base];
    for _ in 0..rng.gen_range(2..40) {
        let options = nb(*walk.last().unwrap());
        walk.push(options[rng.gen_range(0..options.len())]);
    }
    let back: Vec<usize> = walk[..walk.len() - 1].iter().rev().copied().collect();
    // Retracing is trivial; splice in a detour so the loop is not a pure backtrack.
    let mut tail = Vec::new();
    let end = *walk.last().unwrap();
    let detour = nb(end);
    let w = detour[rng.gen_range(0..detour.len())];
    tail.push(w);
    tail.push(end);
    walk.extend(tail);
    walk.extend(back);
    walk
}

#[test]
fn sqrt_fixture_monodromy() {
    let f = sqrt_disk(1.0 / 16.0);
    let s = default_s_min(&f).unwrap();
    let g = build_sheet_graph(&f, s).unwrap();
    assert!(loop_monodromy(&g, &mesh_boundary_loop(g.mesh())).unwrap().is_transposition());
    let mut contractible = 0;
    for i in -16..16 {
        for j in -16..16 {
            if let Some(c) = cell_loop(g.mesh(), i, j) {
                if let Ok(p) = loop_monodromy(&g, &c) {
                    assert!(p.is_identity(), "cell ({i},{j})");
                    contractible += 1;
                }
            }
        }
    }
    assert!(contractible > 100);
    assert!(!has_global_selection(&g).exists());
}

#[test]
fn offset_fixture_is_trivial() {
    let f = offset_disk(1.0 / 16.0);
    let g = build_sheet_graph(&f, 0.5).unwrap();
    assert_eq!(g.region_size(), g.mesh().num_vertices());
    assert!(loop_monodromy(&g, &mesh_boundary_loop(g.mesh())).unwrap().is_identity());
    assert!(has_global_selection(&g).exists());
    let rep = locate_essential_singularity(&f, 0.5).unwrap();
    assert_eq!(rep.status, ForcedStatus::NotForced);
}

#[test]
fn composition_and_inverse_laws() {
    let f = sqrt_disk(1.0 / 16.0);
    let s = default_s_min(&f).unwrap();
    let g = build_sheet_graph(&f, s).unwrap();
    let base = mesh_boundary_loop(g.mesh())[0];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let a = random_loop(&g, base, &mut rng);
        let b = random_loop(&g, base, &mut rng);
        let (pa, pb) = (loop_monodromy(&g, &a).unwrap(), loop_monodromy(&g, &b).unwrap());
        let mut ab = a.clone();
        ab.extend(&b[1..]);
        assert_eq!(loop_monodromy(&g, &ab).unwrap(), pa.then(&pb));
        let rev: Vec<usize> = a.iter().rev().copied().collect();
        assert_eq!(loop_monodromy(&g, &rev).unwrap(), pa.inverse());
    }
}

#[test]
fn sqrt_singularity_is_forced_at_origin() {
    let f = sqrt_disk(1.0 / 16.0);
    let rep = locate_essential_singularity(&f, default_s_min(&f).unwrap()).unwrap();
    assert_eq!(rep.status, ForcedStatus::Forced);
    let origin = f.mesh().vertex_at([0, 0, 0]).unwrap();
    assert!(rep.components.iter().any(|c| c.contains_vertex(origin)));
}
