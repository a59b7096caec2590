//! Regenerates the files under `assets/`: the demo walk clip as BVH and a
//! few procedural background images.
//!
//! ```text
//! cargo run --example make_demo_assets
//! ```

use std::path::Path;

use mocaproom::anim::bvh::format_bvh;
use mocaproom::demo::demo_clip;
use mocaproom::render::Image;

fn gradient(w: u32, h: u32, top: [u8; 3], bottom: [u8; 3]) -> Image {
    let mut img = Image::new(w, h);
    for y in 0..h {
        let t = f64::from(y) / f64::from(h - 1);
        let mix = |a: u8, b: u8| (f64::from(a) + t * (f64::from(b) - f64::from(a))).round() as u8;
        let color = [mix(top[0], bottom[0]), mix(top[1], bottom[1]), mix(top[2], bottom[2]), 255];
        for x in 0..w {
            img.put(x, y, color);
        }
    }
    img
}

fn speckle(w: u32, h: u32, base: [u8; 3], seed: u64) -> Image {
    let mut img = Image::new(w, h);
    let mut rng = mocaproom::rng::StreamRng::from_key(seed);
    for y in 0..h {
        for x in 0..w {
            let n = rng.uniform_in(-28.0, 28.0);
            let c = |v: u8| (f64::from(v) + n).clamp(0.0, 255.0) as u8;
            img.put(x, y, [c(base[0]), c(base[1]), c(base[2]), 255]);
        }
    }
    img
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets");
    std::fs::create_dir_all(&root).expect("create assets dir");

    let clip = demo_clip(120, 1.0 / 30.0);
    std::fs::write(root.join("demo_walk.bvh"), format_bvh(&clip)).expect("write demo_walk.bvh");
    println!("wrote assets/demo_walk.bvh ({} frames, {} joints)", clip.frame_count(), clip.skeleton().joint_count());

    let bg_dir = root.join("backgrounds");
    std::fs::create_dir_all(&bg_dir).expect("create backgrounds dir");
    gradient(96, 96, [94, 129, 66], [34, 51, 30]).save_png(&bg_dir.join("forest.png")).unwrap();
    gradient(96, 96, [168, 205, 228], [219, 196, 158]).save_png(&bg_dir.join("savanna.png")).unwrap();
    speckle(96, 96, [126, 114, 98], 7).save_png(&bg_dir.join("scree.png")).unwrap();
    println!("wrote 3 backgrounds to assets/backgrounds/");
}
