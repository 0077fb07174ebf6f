//! OZTD files as written by the Python exporter, built byte by byte here.

use ozmac::profiler::{load_tensor, TensorFile};
use ozmac::{BitWidth, Error, Signedness};

fn header(dtype: u8, signed: u8, dims: &[u64]) -> Vec<u8> {
    let mut b = b"OZTD".to_vec();
    b.extend_from_slice(&1u16.to_le_bytes());
    b.push(dtype);
    b.push(signed);
    b.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for d in dims {
        b.extend_from_slice(&d.to_le_bytes());
    }
    b
}

#[test]
fn int8_matrix() {
    let mut b = header(8, 1, &[2, 3]);
    b.extend([0x05, 0xFF, 0x80, 0x7F, 0x00, 0xFE]);
    let t = TensorFile::from_bytes(&b).unwrap();
    assert_eq!(t.dtype_bits, BitWidth::W8);
    assert_eq!(t.signedness, Signedness::TwosComplement);
    assert_eq!(t.dims, vec![2, 3]);
    assert_eq!(t.values, vec![5, -1, -128, 127, 0, -2]);
    assert_eq!(t.to_bytes(), b);
}

#[test]
fn int16_little_endian() {
    let mut b = header(16, 1, &[3]);
    b.extend([0x34, 0x12, 0x00, 0x80, 0xFF, 0x7F]);
    let t = TensorFile::from_bytes(&b).unwrap();
    assert_eq!(t.values, vec![0x1234, -32768, 32767]);
}

#[test]
fn uint4_low_nibble() {
    let mut b = header(4, 0, &[4]);
    b.extend([0x0F, 0x00, 0x05, 0x0A]);
    assert_eq!(
        TensorFile::from_bytes(&b).unwrap().values,
        vec![15, 0, 5, 10]
    );
}

#[test]
fn int4_sign_extends_low_nibble() {
    let mut b = header(4, 1, &[3]);
    b.extend([0x08, 0x0F, 0x07]);
    assert_eq!(TensorFile::from_bytes(&b).unwrap().values, vec![-8, -1, 7]);
}

#[test]
fn int4_high_nibble_rejected() {
    let mut b = header(4, 1, &[2]);
    b.extend([0x01, 0x13]);
    assert!(matches!(
        TensorFile::from_bytes(&b),
        Err(Error::ValueOutOfRange { index: 1, .. })
    ));
}

#[test]
fn bad_magic() {
    let mut b = header(8, 1, &[1]);
    b[0] = b'X';
    b.push(0);
    assert!(matches!(
        TensorFile::from_bytes(&b),
        Err(Error::BadMagic(_))
    ));
}

#[test]
fn unsupported_version() {
    let mut b = header(8, 1, &[1]);
    b[4] = 2;
    b.push(0);
    assert!(matches!(
        TensorFile::from_bytes(&b),
        Err(Error::UnsupportedVersion(2))
    ));
}

#[test]
fn unsupported_dtype() {
    let mut b = header(12, 1, &[1]);
    b.extend([0, 0]);
    assert!(matches!(
        TensorFile::from_bytes(&b),
        Err(Error::UnsupportedWidth(12))
    ));
}

#[test]
fn short_payload() {
    let mut b = header(8, 1, &[4]);
    b.extend([1, 2, 3]);
    assert!(matches!(
        TensorFile::from_bytes(&b),
        Err(Error::DimMismatch { .. })
    ));
}

#[test]
fn trailing_bytes() {
    let mut b = header(8, 1, &[2]);
    b.extend([1, 2, 3]);
    assert!(matches!(
        TensorFile::from_bytes(&b),
        Err(Error::TrailingBytes(1))
    ));
}

#[test]
fn truncated_header() {
    assert!(matches!(
        TensorFile::from_bytes(b"OZTD\x01\x00\x08"),
        Err(Error::BadHeader(_))
    ));
}

#[test]
fn scalar_has_one_element() {
    let mut b = header(8, 1, &[]);
    b.push(0x03);
    assert_eq!(TensorFile::from_bytes(&b).unwrap().values, vec![3]);
}

#[test]
fn load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("conv1.oztd");
    let mut b = header(8, 1, &[2]);
    b.extend([0x01, 0xFF]);
    std::fs::write(&path, &b).unwrap();
    assert_eq!(load_tensor(&path).unwrap().values, vec![1, -1]);
    assert!(matches!(
        load_tensor(dir.path().join("missing.oztd")),
        Err(Error::Io { .. })
    ));
}
