//! Graymap round trip and the quantization rule used on write.
//!
//!     cargo run --release --example graymap_io

use tvis::degrade::shepp_logan;
use tvis::pnm::{decode, encode, quantize, read_image, write_image, Encoding};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = shepp_logan(64, 64)?;
    let dir = std::env::temp_dir().join("tvis-graymap-example");
    std::fs::create_dir_all(&dir)?;
    for (enc, name) in [(Encoding::Binary, "phantom_p5.pgm"), (Encoding::Ascii, "phantom_p2.pgm")] {
        let path = dir.join(name);
        write_image(&path, &f, enc)?;
        let back = read_image(&path)?;
        let bytes = std::fs::metadata(&path)?.len();
        let max_err = back.as_slice().iter().zip(f.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{name}: {bytes} bytes, max |read - original| = {max_err:.3}");
    }
    for v in [-4.0, 2.5, 2.49, 127.5, 255.7] {
        println!("quantize({v}) = {}", quantize(v));
    }
    let small = decode(b"P2\n# comment\n3 2\n255\n0 128 255\n1 2 3\n")?;
    println!("decoded {:?}: {:?}", small.shape(), small.as_slice());
    println!("re-encoded as P2:\n{}", String::from_utf8(encode(&small, Encoding::Ascii))?);
    Ok(())
}
