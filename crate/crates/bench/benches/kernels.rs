use criterion::{criterion_group, criterion_main};

criterion_group!(benches, trtlbm_bench::collide_stream, trtlbm_bench::godunov);
criterion_main!(benches);
