//! Cell-level relation checks written against box coordinates only.

use std::collections::HashSet;

use dualgrain::datagen::{RelationKind, Scene};
use dualgrain::grid::BBox;

/// Cell indices covered by a box, as (row, col) pairs.
fn cells(b: &BBox) -> Vec<(usize, usize)> {
    (b.r0..b.r1)
        .flat_map(|r| (b.c0..b.c1).map(move |c| (r, c)))
        .collect()
}

fn rows_of(b: &BBox) -> HashSet<usize> {
    cells(b).into_iter().map(|(r, _)| r).collect()
}

fn cols_of(b: &BBox) -> HashSet<usize> {
    cells(b).into_iter().map(|(_, c)| c).collect()
}

fn all_before(a: &HashSet<usize>, b: &HashSet<usize>) -> bool {
    a.iter().all(|x| b.iter().all(|y| x < y))
}

/// Brute-force cell-level check of one relation.
pub fn oracle_holds(kind: RelationKind, s: &BBox, others: &[BBox]) -> bool {
    let shares = |f: fn(&BBox) -> HashSet<usize>, boxes: &[&BBox]| {
        let mut common = f(boxes[0]);
        for b in &boxes[1..] {
            common = common.intersection(&f(b)).copied().collect();
        }
        !common.is_empty()
    };
    match (kind, others) {
        (RelationKind::LeftOf, [o]) => {
            all_before(&cols_of(s), &cols_of(o)) && shares(rows_of, &[s, o])
        }
        (RelationKind::RightOf, [o]) => {
            all_before(&cols_of(o), &cols_of(s)) && shares(rows_of, &[s, o])
        }
        (RelationKind::Above, [o]) => {
            all_before(&rows_of(s), &rows_of(o)) && shares(cols_of, &[s, o])
        }
        (RelationKind::Below, [o]) => {
            all_before(&rows_of(o), &rows_of(s)) && shares(cols_of, &[s, o])
        }
        (RelationKind::SurroundedBy, [o]) => cells(s).iter().all(|&(r, c)| {
            // Every 8-neighbour of a subject cell lies inside the surrounding box.
            (r as i64 - 1..=r as i64 + 1).all(|rr| {
                (c as i64 - 1..=c as i64 + 1).all(|cc| {
                    rr >= o.r0 as i64 && rr < o.r1 as i64 && cc >= o.c0 as i64 && cc < o.c1 as i64
                })
            })
        }),
        (RelationKind::Between, [a, b]) => {
            let along = |f: fn(&BBox) -> HashSet<usize>, g: fn(&BBox) -> HashSet<usize>| {
                shares(g, &[s, a, b])
                    && ((all_before(&f(a), &f(s)) && all_before(&f(s), &f(b)))
                        || (all_before(&f(b), &f(s)) && all_before(&f(s), &f(a))))
            };
            along(cols_of, rows_of) || along(rows_of, cols_of)
        }
        _ => false,
    }
}

pub fn scene_violations(scene: &Scene) -> Vec<String> {
    let mut bad = Vec::new();
    let (h, w) = (scene.grid.height(), scene.grid.width());
    for rel in &scene.relations {
        let s = scene.objects[rel.subject].bbox;
        let others: Vec<BBox> = rel.objects.iter().map(|&i| scene.objects[i].bbox).collect();
        if rel.objects.contains(&rel.subject) || !oracle_holds(rel.kind, &s, &others) {
            bad.push(format!("{rel:?}"));
        }
    }
    // Each cell shows the smallest object box covering it, else the background.
    for r in 0..h {
        for c in 0..w {
            let owner = scene
                .objects
                .iter()
                .filter(|o| o.bbox.contains_cell(r, c))
                .min_by_key(|o| o.bbox.area());
            let want = owner.map_or(scene.background as u16, |o| o.code());
            if scene.grid.get(r, c) != want {
                bad.push(format!("cell ({r},{c})"));
            }
        }
    }
    bad
}
