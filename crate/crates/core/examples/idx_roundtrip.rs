//! Write a dataset as IDX files, read it back and split it into tasks.
//!
//! With a path argument, loads `<dir>/train-images-idx3-ubyte` and
//! `<dir>/train-labels-idx1-ubyte` instead (e.g. an MNIST download).

use std::path::Path;

use regime_lab::data::idx::{encode_images, encode_labels};
use regime_lab::data::{load_idx, split_tasks, synth_gaussian_tasks};

fn main() -> regime_lab::Result<()> {
    let dir = match std::env::args().nth(1) {
        Some(d) => d.into(),
        None => {
            let dir = std::env::temp_dir().join("regime-lab-idx-example");
            std::fs::create_dir_all(&dir)?;
            let ds = synth_gaussian_tasks(5, 2, 16, 50, 3.0, 9)?;
            let pixels = ds.inputs.mapv(|v| (0.5 + v / 8.0).clamp(0.0, 1.0));
            std::fs::write(dir.join("train-images-idx3-ubyte"), encode_images(&pixels, 4, 4))?;
            std::fs::write(dir.join("train-labels-idx1-ubyte"), encode_labels(&ds.labels))?;
            dir
        }
    };
    let dir: &Path = &dir;
    let ds = load_idx(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?;
    println!("{} samples, {} features, {} classes", ds.len(), ds.input_dim(), ds.num_classes());
    let split = split_tasks(&ds, ds.num_classes() / 2, 2, 0.2, 0)?;
    for (t, idx) in split.tasks.iter().enumerate() {
        println!("task {t}: classes {:?}, {} train / {} test", split.classes_of(t), idx.train.len(), idx.test.len());
    }
    Ok(())
}
