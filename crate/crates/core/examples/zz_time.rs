use std::time::Instant;
use dofsplat::gradcheck::random_problem;
use dofsplat::losses::view_loss;
use dofsplat::rasterizer::render;
use dofsplat::scene::materialize_scene;
fn main() -> dofsplat::Result<()> {
    let p = random_problem(0, 32, 50)?;
    let n = 2000;
    let t = Instant::now();
    for _ in 0..n { std::hint::black_box(materialize_scene(&p.scene)); }
    println!("materialize {:.1} us", t.elapsed().as_secs_f64() / n as f64 * 1e6);
    let g = materialize_scene(&p.scene);
    let t = Instant::now();
    for _ in 0..n { std::hint::black_box(render(&g, &p.scene.views[0].camera, &p.render)?); }
    println!("render {:.1} us", t.elapsed().as_secs_f64() / n as f64 * 1e6);
    let out = render(&g, &p.scene.views[0].camera, &p.render)?;
    let d = p.scene.views[0].params.depth_map();
    let t = Instant::now();
    for _ in 0..n { std::hint::black_box(view_loss(&out, &p.targets[0], &d, &p.weights)?); }
    println!("view_loss {:.1} us", t.elapsed().as_secs_f64() / n as f64 * 1e6);
    let t = Instant::now();
    for _ in 0..n { std::hint::black_box(p.loss(&p.scene)?); }
    println!("loss {:.1} us", t.elapsed().as_secs_f64() / n as f64 * 1e6);
    let t = Instant::now();
    for _ in 0..n { std::hint::black_box(p.scene.clone()); }
    println!("clone {:.1} us", t.elapsed().as_secs_f64() / n as f64 * 1e6);
    Ok(())
}
