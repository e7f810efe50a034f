//! Writes a tiny IDX image/label pair, reads it back as an autoencoder
//! dataset, and prints the first image.
//!
//! cargo run --example idx_files -- [images.idx3-ubyte [labels.idx1-ubyte]]
//!
//! With arguments, loads the given files instead (for example the
//! Fashion-MNIST training set).

use snlls::data::{encode_idx_images, encode_idx_labels, load_idx, IdxImages};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = std::env::temp_dir().join("snlls-idx-example");
    let (images, labels) = if let Some(images) = args.first() {
        (images.into(), args.get(1).map(Into::into))
    } else {
        std::fs::create_dir_all(&dir)?;
        let side = 5;
        let pixels = (0..2 * side * side).map(|i| ((i * 37) % 256) as u8).collect();
        let img = dir.join("images.idx3-ubyte");
        let lab = dir.join("labels.idx1-ubyte");
        let raw = IdxImages {
            count: 2,
            rows: side,
            cols: side,
            pixels,
        };
        std::fs::write(&img, encode_idx_images(&raw))?;
        std::fs::write(&lab, encode_idx_labels(&[3, 8]))?;
        (img, Some(lab))
    };

    let ds = load_idx(&images, labels.as_deref())?;
    println!(
        "{} images of {} pixels, labels {:?}",
        ds.len(),
        ds.features.cols(),
        ds.labels.as_ref().map(|l| &l[..l.len().min(10)])
    );
    let side = (ds.features.cols() as f64).sqrt() as usize;
    for row in ds.features.row(0).chunks(side) {
        let line: String = row
            .iter()
            .map(|&p| {
                if p > 0.66 {
                    '#'
                } else if p > 0.33 {
                    '+'
                } else {
                    '.'
                }
            })
            .collect();
        println!("{line}");
    }
    Ok(())
}
