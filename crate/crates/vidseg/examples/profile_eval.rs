// temporary profiling harness
use std::time::Instant;
use vidseg::synth::{self, BackgroundBand, CorruptionSpec, SceneConfig, SceneObject, Shape};
use vidseg::data::io;
use vidseg::metrics::panoptic::{vpq_multi, stq_parts, StqOptions};
use vidseg::metrics::semantic::{confusion, vc_stats, VcMode};
use vidseg::data::video::pan_to_sem;

fn main() {
    let config = SceneConfig {
        width: 640, height: 360, frame_count: 40, seed: 7, embed_dim: 16,
        background: vec![BackgroundBand { class_id: 20 }, BackgroundBand { class_id: 21 }],
        objects: vec![
            SceneObject { class_id: 1, shape: Shape::Rect { width: 60, height: 40 }, start: (10, 30), velocity: (6, 2) },
            SceneObject { class_id: 2, shape: Shape::Disk { radius: 20 }, start: (320, 120), velocity: (2, 3) },
        ],
    };
    let t = Instant::now();
    let video = synth::gen_scene(&config).unwrap();
    println!("gen_scene: {:?}", t.elapsed());
    let cats = synth::derive_categories(&config, None).unwrap();

    let tmp = std::env::temp_dir().join("vidseg-prof");
    let _ = std::fs::remove_dir_all(&tmp);
    let t = Instant::now();
    io::write_video(&video, &tmp).unwrap();
    println!("write_video (40 png): {:?}", t.elapsed());
    let t = Instant::now();
    let loaded = io::load_video(&tmp, &cats).unwrap();
    println!("load_video (40 png): {:?}", t.elapsed());

    let t = Instant::now();
    let per_k = vpq_multi(&loaded, &video, &[1,2,4,6], &cats).unwrap();
    println!("vpq_multi 4 windows: {:?} ({} classes)", t.elapsed(), per_k.len());

    let t = Instant::now();
    let parts = stq_parts(&loaded, &video, &cats, StqOptions::default()).unwrap();
    println!("stq_parts: {:?} ({} tracks)", t.elapsed(), parts.aq_tracks);

    let t = Instant::now();
    let sem_a = pan_to_sem(&video, &cats).unwrap();
    let sem_b = pan_to_sem(&loaded, &cats).unwrap();
    println!("pan_to_sem x2: {:?}", t.elapsed());
    let t = Instant::now();
    let acc = confusion(&sem_b, &sem_a).unwrap();
    println!("confusion: {:?} ({} px)", t.elapsed(), acc.total_gt_pixels());
    let t = Instant::now();
    let v8 = vc_stats(&sem_b, &sem_a, 8, VcMode::Strict).unwrap();
    let v16 = vc_stats(&sem_b, &sem_a, 16, VcMode::Strict).unwrap();
    println!("vc 8+16: {:?} ({} {} windows)", t.elapsed(), v8.window_count, v16.window_count);
}
