use cubeflag_core::midlayers::*;
use cubeflag_core::*;

fn main() {
    let p4 = mid_poset(4).unwrap();
    let group = MidGroup::Perms;
    let fams = enumerate_q2free(4, group).unwrap();
    let shapes = default_m4_shapes(&p4).unwrap();
    let families: Vec<MidFlagFamily> = shapes.iter().map(|s| MidFlagFamily::all_colorings(s.clone())).collect();
    let tables = mid_density_table(&families, &p4, group, &fams).unwrap();
    let problem = build_program(&tables).unwrap();
    std::fs::write("/tmp/m4.dat-s", emit_sdpa(&problem)).unwrap();
    println!("wrote /tmp/m4.dat-s: m={} blocks={:?}", problem.constraint_count(), problem.block_sizes());
}
