//! Binary field files: magic "GCHF", format version, dimensions, then the
//! row-major f64 payload, all little-endian. Binary keeps round trips
//! bit-exact; CSV is reserved for human-facing output.

use gch_core::{Error, LatentField, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"GCHF";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_field(path: &Path, field: &LatentField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(field.height() as u32).to_le_bytes())?;
    w.write_all(&(field.width() as u32).to_le_bytes())?;
    for &v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<LatentField> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Domain(format!("{}: not a GCHF field file", path.display())));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(Error::Domain(format!("unsupported field file version {version}")));
    }
    r.read_exact(&mut word)?;
    let height = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let width = u32::from_le_bytes(word) as usize;
    let mut values = Vec::with_capacity(height * width);
    let mut buf = [0u8; 8];
    for _ in 0..height * width {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Domain("trailing bytes after field payload".into()));
    }
    LatentField::new(height, width, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gch_core::RandomStream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = RandomStream::new(99, 0).rng();
        for k in 0..100 {
            let h = 1 + rng.gen_range(0..5);
            let w = 1 + rng.gen_range(0..5);
            let field = LatentField::new(
                h,
                w,
                (0..h * w).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
            )
            .unwrap();
            let path = dir.path().join(format!("f{k}.gchf"));
            write_field(&path, &field).unwrap();
            let back = read_field(&path).unwrap();
            assert_eq!(field.height(), back.height());
            assert_eq!(field.width(), back.width());
            for (a, b) in field.values().iter().zip(back.values()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.gchf");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
        assert!(read_field(&path).is_err());

        let field = LatentField::constant(2, 2, 1.0);
        let good = dir.path().join("good.gchf");
        write_field(&good, &field).unwrap();
        let mut bytes = std::fs::read(&good).unwrap();
        bytes[4] = 9; // future version
        std::fs::write(&path, &bytes).unwrap();
        assert!(read_field(&path).is_err());

        // truncated payload
        let mut short = std::fs::read(&good).unwrap();
        short.truncate(short.len() - 3);
        std::fs::write(&path, &short).unwrap();
        assert!(read_field(&path).is_err());
    }
}
