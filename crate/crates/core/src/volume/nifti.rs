//! Minimal NIfTI-1 single-file (`.nii` / `.nii.gz`) reader and writer.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian, ReadBytesExt, WriteBytesExt};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use nalgebra::Matrix3;

use super::{labels, GridGeometry, LabelMask, VoxelGrid};
use crate::error::{Error, Result};

const HEADER_SIZE: usize = 348;
const DATA_OFFSET: usize = 352;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_INT32: i16 = 8;
const DT_FLOAT32: i16 = 16;
const DT_FLOAT64: i16 = 64;
const DT_INT8: i16 = 256;
const DT_UINT16: i16 = 512;
const DT_UINT32: i16 = 768;

/// On-disk voxel type used when writing scalar volumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageType {
    UInt8,
    Int16,
    Float32,
    Float64,
}

impl StorageType {
    fn code(self) -> i16 {
        match self {
            StorageType::UInt8 => DT_UINT8,
            StorageType::Int16 => DT_INT16,
            StorageType::Float32 => DT_FLOAT32,
            StorageType::Float64 => DT_FLOAT64,
        }
    }

    fn bits(self) -> i16 {
        match self {
            StorageType::UInt8 => 8,
            StorageType::Int16 => 16,
            StorageType::Float32 => 32,
            StorageType::Float64 => 64,
        }
    }
}

struct Header {
    dims: [usize; 3],
    datatype: i16,
    vox_offset: usize,
    slope: f64,
    inter: f64,
    geometry: GridGeometry,
    big_endian: bool,
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    if is_gz(path) {
        GzDecoder::new(BufReader::new(file))
            .read_to_end(&mut buf)
            .map_err(|e| Error::io(path, e))?;
    } else {
        BufReader::new(file)
            .read_to_end(&mut buf)
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(buf)
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::Format(format!("file too short ({} bytes)", bytes.len())));
    }
    let big_endian = match (LittleEndian::read_i32(&bytes[0..4]), BigEndian::read_i32(&bytes[0..4])) {
        (348, _) => false,
        (_, 348) => true,
        _ => return Err(Error::Format("sizeof_hdr is not 348".into())),
    };
    if &bytes[344..347] != b"n+1" && &bytes[344..347] != b"ni1" {
        return Err(Error::Format("missing NIfTI-1 magic".into()));
    }
    if &bytes[344..347] == b"ni1" {
        return Err(Error::Format("two-file (.hdr/.img) NIfTI is not supported".into()));
    }
    let i16_at = |o: usize| {
        if big_endian {
            BigEndian::read_i16(&bytes[o..o + 2])
        } else {
            LittleEndian::read_i16(&bytes[o..o + 2])
        }
    };
    let f32_at = |o: usize| {
        f64::from(if big_endian {
            BigEndian::read_f32(&bytes[o..o + 4])
        } else {
            LittleEndian::read_f32(&bytes[o..o + 4])
        })
    };

    let dim: Vec<i16> = (0..8).map(|i| i16_at(40 + 2 * i)).collect();
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(Error::Format(format!("invalid dim[0] = {ndim}")));
    }
    let ndim = ndim as usize;
    if ndim < 3 {
        return Err(Error::Dimensionality(ndim));
    }
    if (4..=ndim).any(|i| dim[i] > 1) {
        return Err(Error::Dimensionality(ndim));
    }
    if dim[1..4].iter().any(|&d| d < 1) {
        return Err(Error::Format(format!("non-positive dims {:?}", &dim[1..4])));
    }
    let dims = [dim[1] as usize, dim[2] as usize, dim[3] as usize];

    let datatype = i16_at(70);
    let pixdim: Vec<f64> = (0..8).map(|i| f32_at(76 + 4 * i)).collect();
    let vox_offset = f32_at(108);
    if !(vox_offset >= HEADER_SIZE as f64) {
        return Err(Error::Format(format!("vox_offset {vox_offset} is invalid")));
    }
    let slope = f32_at(112);
    let inter = f32_at(116);
    let qform_code = i16_at(252);
    let sform_code = i16_at(254);

    let geometry = if sform_code > 0 {
        let mut m = Matrix3::zeros();
        let mut origin = [0.0; 3];
        for r in 0..3 {
            for c in 0..3 {
                m[(r, c)] = f32_at(280 + 16 * r + 4 * c);
            }
            origin[r] = f32_at(280 + 16 * r + 12);
        }
        let spacing = [m.column(0).norm(), m.column(1).norm(), m.column(2).norm()];
        GridGeometry::new(dims, spacing, origin, m)?
    } else if qform_code > 0 {
        let (b, c, d) = (f32_at(256), f32_at(260), f32_at(264));
        let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
        let mut rot = Matrix3::new(
            a * a + b * b - c * c - d * d,
            2.0 * (b * c - a * d),
            2.0 * (b * d + a * c),
            2.0 * (b * c + a * d),
            a * a + c * c - b * b - d * d,
            2.0 * (c * d - a * b),
            2.0 * (b * d - a * c),
            2.0 * (c * d + a * b),
            a * a + d * d - c * c - b * b,
        );
        let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..3 {
            rot[(r, 2)] *= qfac;
        }
        let spacing = [pixdim[1].abs(), pixdim[2].abs(), pixdim[3].abs()];
        GridGeometry::new(dims, spacing, [f32_at(268), f32_at(272), f32_at(276)], rot)?
    } else {
        let spacing = [pixdim[1].abs(), pixdim[2].abs(), pixdim[3].abs()];
        GridGeometry::axis_aligned(dims, spacing, [0.0; 3])?
    };

    Ok(Header {
        dims,
        datatype,
        vox_offset: vox_offset as usize,
        slope,
        inter,
        geometry,
        big_endian,
    })
}

fn decode_values(bytes: &[u8], header: &Header) -> Result<Vec<f64>> {
    let n: usize = header.dims.iter().product();
    let width = match header.datatype {
        DT_UINT8 | DT_INT8 => 1,
        DT_INT16 | DT_UINT16 => 2,
        DT_INT32 | DT_UINT32 | DT_FLOAT32 => 4,
        DT_FLOAT64 => 8,
        other => return Err(Error::Format(format!("unsupported datatype {other}"))),
    };
    let start = header.vox_offset;
    let end = start + n * width;
    if bytes.len() < end {
        return Err(Error::Format(format!(
            "truncated data: need {end} bytes, have {}",
            bytes.len()
        )));
    }
    let mut rdr = Cursor::new(&bytes[start..end]);
    let raw: std::io::Result<Vec<f64>> = (0..n)
        .map(|_| {
            if header.big_endian {
                read_one::<BigEndian>(&mut rdr, header.datatype)
            } else {
                read_one::<LittleEndian>(&mut rdr, header.datatype)
            }
        })
        .collect();
    let mut raw = raw.map_err(|e| Error::Format(e.to_string()))?;
    if header.slope != 0.0 && (header.slope != 1.0 || header.inter != 0.0) {
        for v in &mut raw {
            *v = *v * header.slope + header.inter;
        }
    }
    Ok(raw)
}

fn read_one<B: ByteOrder>(rdr: &mut Cursor<&[u8]>, datatype: i16) -> std::io::Result<f64> {
    Ok(match datatype {
        DT_UINT8 => f64::from(rdr.read_u8()?),
        DT_INT8 => f64::from(rdr.read_i8()?),
        DT_INT16 => f64::from(rdr.read_i16::<B>()?),
        DT_UINT16 => f64::from(rdr.read_u16::<B>()?),
        DT_INT32 => f64::from(rdr.read_i32::<B>()?),
        DT_UINT32 => f64::from(rdr.read_u32::<B>()?),
        DT_FLOAT32 => f64::from(rdr.read_f32::<B>()?),
        DT_FLOAT64 => rdr.read_f64::<B>()?,
        _ => unreachable!("datatype checked by caller"),
    })
}

/// Loads a 3D scalar volume. Values are returned as stored (after the
/// header's scl_slope/scl_inter), with no intensity normalisation.
pub fn load_volume(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let header = parse_header(&bytes)?;
    let values = decode_values(&bytes, &header)?;
    VoxelGrid::new(header.geometry, values.into_iter().map(|v| v as f32).collect())
}

/// Loads a label mask; values are rounded and must lie in {0, 1, 2}.
pub fn load_mask(path: impl AsRef<Path>) -> Result<LabelMask> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let header = parse_header(&bytes)?;
    let values = decode_values(&bytes, &header)?;
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        if !v.is_finite() {
            return Err(Error::Format("non-finite mask value".into()));
        }
        let r = v.round();
        if !(0.0..=f64::from(labels::GTVN)).contains(&r) {
            return Err(Error::Label(r as i64));
        }
        out.push(r as u8);
    }
    LabelMask::new(header.geometry, out)
}

pub fn save_volume(grid: &VoxelGrid, path: impl AsRef<Path>) -> Result<()> {
    save_volume_as(grid, path, StorageType::Float32)
}

/// Writes a scalar volume with an explicit storage type. Integer types
/// round (and saturate) the values.
pub fn save_volume_as(grid: &VoxelGrid, path: impl AsRef<Path>, storage: StorageType) -> Result<()> {
    let values: Vec<f64> = grid.values().iter().map(|&v| f64::from(v)).collect();
    write_nifti(path.as_ref(), grid.geometry(), &values, storage)
}

pub fn save_mask(mask: &LabelMask, path: impl AsRef<Path>) -> Result<()> {
    let values: Vec<f64> = mask.labels().iter().map(|&l| f64::from(l)).collect();
    write_nifti(path.as_ref(), mask.geometry(), &values, StorageType::UInt8)
}

/// Unit quaternion (b, c, d) and qfac for a direction matrix.
fn quaternion(direction: &Matrix3<f64>) -> ([f64; 3], f64) {
    let mut r = *direction;
    let qfac = if r.determinant() < 0.0 {
        for row in 0..3 {
            r[(row, 2)] = -r[(row, 2)];
        }
        -1.0
    } else {
        1.0
    };
    let (r11, r12, r13) = (r[(0, 0)], r[(0, 1)], r[(0, 2)]);
    let (r21, r22, r23) = (r[(1, 0)], r[(1, 1)], r[(1, 2)]);
    let (r31, r32, r33) = (r[(2, 0)], r[(2, 1)], r[(2, 2)]);
    let trace = r11 + r22 + r33 + 1.0;
    let (mut a, mut b, mut c, mut d);
    if trace > 0.5 {
        a = 0.5 * trace.sqrt();
        b = 0.25 * (r32 - r23) / a;
        c = 0.25 * (r13 - r31) / a;
        d = 0.25 * (r21 - r12) / a;
    } else {
        let xd = 1.0 + r11 - (r22 + r33);
        let yd = 1.0 + r22 - (r11 + r33);
        let zd = 1.0 + r33 - (r11 + r22);
        if xd > 1.0 {
            b = 0.5 * xd.sqrt();
            c = 0.25 * (r12 + r21) / b;
            d = 0.25 * (r13 + r31) / b;
            a = 0.25 * (r32 - r23) / b;
        } else if yd > 1.0 {
            c = 0.5 * yd.sqrt();
            b = 0.25 * (r12 + r21) / c;
            d = 0.25 * (r23 + r32) / c;
            a = 0.25 * (r13 - r31) / c;
        } else {
            d = 0.5 * zd.sqrt();
            b = 0.25 * (r13 + r31) / d;
            c = 0.25 * (r23 + r32) / d;
            a = 0.25 * (r21 - r12) / d;
        }
        if a < 0.0 {
            a = -a;
            b = -b;
            c = -c;
            d = -d;
        }
    }
    let _ = a;
    ([b, c, d], qfac)
}

fn write_nifti(path: &Path, geometry: &GridGeometry, values: &[f64], storage: StorageType) -> Result<()> {
    let mut buf: Vec<u8> = Vec::with_capacity(DATA_OFFSET + values.len() * 4);
    let dims = geometry.dims();
    let spacing = geometry.spacing();
    let affine = geometry.affine();
    let ([qb, qc, qd], qfac) = quaternion(geometry.direction());
    let origin = geometry.origin();

    let w = &mut buf;
    let io = |e: std::io::Error| Error::io(path, e);
    w.write_i32::<LittleEndian>(HEADER_SIZE as i32).map_err(io)?;
    w.extend_from_slice(&[0u8; 36]); // data_type .. dim_info
    let dim = [3i16, dims[0] as i16, dims[1] as i16, dims[2] as i16, 1, 1, 1, 1];
    if dims.iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::Format(format!("dims {dims:?} exceed NIfTI-1 limits")));
    }
    for d in dim {
        w.write_i16::<LittleEndian>(d).map_err(io)?;
    }
    for _ in 0..3 {
        w.write_f32::<LittleEndian>(0.0).map_err(io)?; // intent_p1..p3
    }
    w.write_i16::<LittleEndian>(0).map_err(io)?; // intent_code
    w.write_i16::<LittleEndian>(storage.code()).map_err(io)?;
    w.write_i16::<LittleEndian>(storage.bits()).map_err(io)?;
    w.write_i16::<LittleEndian>(0).map_err(io)?; // slice_start
    let pixdim = [qfac, spacing[0], spacing[1], spacing[2], 0.0, 0.0, 0.0, 0.0];
    for p in pixdim {
        w.write_f32::<LittleEndian>(p as f32).map_err(io)?;
    }
    w.write_f32::<LittleEndian>(DATA_OFFSET as f32).map_err(io)?;
    w.write_f32::<LittleEndian>(1.0).map_err(io)?; // scl_slope
    w.write_f32::<LittleEndian>(0.0).map_err(io)?; // scl_inter
    w.write_i16::<LittleEndian>(0).map_err(io)?; // slice_end
    w.write_u8(0).map_err(io)?; // slice_code
    w.write_u8(2).map_err(io)?; // xyzt_units: mm
    w.extend_from_slice(&[0u8; 16]); // cal_max, cal_min, slice_duration, toffset
    w.extend_from_slice(&[0u8; 8]); // glmax, glmin
    let mut descrip = [0u8; 80];
    let text = b"hn-radiomics";
    descrip[..text.len()].copy_from_slice(text);
    w.extend_from_slice(&descrip);
    w.extend_from_slice(&[0u8; 24]); // aux_file
    w.write_i16::<LittleEndian>(1).map_err(io)?; // qform_code
    w.write_i16::<LittleEndian>(1).map_err(io)?; // sform_code
    for q in [qb, qc, qd, origin[0], origin[1], origin[2]] {
        w.write_f32::<LittleEndian>(q as f32).map_err(io)?;
    }
    for row in affine.iter().take(3) {
        for v in row {
            w.write_f32::<LittleEndian>(*v as f32).map_err(io)?;
        }
    }
    w.extend_from_slice(&[0u8; 16]); // intent_name
    w.extend_from_slice(b"n+1\0");
    debug_assert_eq!(w.len(), HEADER_SIZE);
    w.extend_from_slice(&[0u8; 4]); // no extensions

    for &v in values {
        match storage {
            StorageType::UInt8 => w.write_u8(v.round().clamp(0.0, 255.0) as u8),
            StorageType::Int16 => {
                w.write_i16::<LittleEndian>(v.round().clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16)
            }
            StorageType::Float32 => w.write_f32::<LittleEndian>(v as f32),
            StorageType::Float64 => w.write_f64::<LittleEndian>(v),
        }
        .map_err(io)?;
    }

    let file = File::create(path).map_err(io)?;
    if is_gz(path) {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::fast());
        enc.write_all(&buf).map_err(io)?;
        enc.finish().map_err(io)?.flush().map_err(io)?;
    } else {
        let mut out = BufWriter::new(file);
        out.write_all(&buf).map_err(io)?;
        out.flush().map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tmp(name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        (dir, p)
    }

    #[test]
    fn round_trip_small_volume() {
        let g = GridGeometry::axis_aligned([2, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
        let grid = VoxelGrid::new(g, (0..8).map(|v| v as f32).collect()).unwrap();
        let (_d, p) = tmp("v.nii");
        save_volume(&grid, &p).unwrap();
        let back = load_volume(&p).unwrap();
        assert_eq!(back.values(), grid.values());
        assert!(back.geometry().approx_eq(grid.geometry(), 1e-5));
    }

    #[test]
    fn round_trip_random_gz_with_oblique_geometry() {
        let angle: f64 = 0.4;
        let rot = Matrix3::new(
            angle.cos(),
            0.0,
            angle.sin(),
            0.0,
            1.0,
            0.0,
            -angle.sin(),
            0.0,
            angle.cos(),
        );
        let g = GridGeometry::new([8, 8, 8], [0.75, 1.5, 2.0], [-90.5, 12.25, -60.0], rot).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = VoxelGrid::from_fn(g, |_| rng.random_range(-1000.0..1000.0));
        let (_d, p) = tmp("v.nii.gz");
        save_volume(&grid, &p).unwrap();
        let back = load_volume(&p).unwrap();
        assert_eq!(back.values(), grid.values());
        assert!(back.geometry().approx_eq(grid.geometry(), 1e-5));
    }

    #[test]
    fn qform_only_geometry_matches_sform() {
        let flip = Matrix3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        let g = GridGeometry::new([3, 4, 5], [1.0, 2.0, 3.0], [10.0, 20.0, -5.0], flip).unwrap();
        let grid = VoxelGrid::filled(g, 1.0);
        let (_d, p) = tmp("q.nii");
        save_volume(&grid, &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[254..256].copy_from_slice(&0i16.to_le_bytes()); // drop sform
        std::fs::write(&p, &bytes).unwrap();
        let back = load_volume(&p).unwrap();
        assert!(back.geometry().approx_eq(grid.geometry(), 1e-5));

        let improper = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        let g = GridGeometry::new([3, 4, 5], [1.0; 3], [0.0; 3], improper).unwrap();
        let grid = VoxelGrid::filled(g, 1.0);
        save_volume(&grid, &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[254..256].copy_from_slice(&0i16.to_le_bytes());
        std::fs::write(&p, &bytes).unwrap();
        assert!(load_volume(&p).unwrap().geometry().approx_eq(grid.geometry(), 1e-5));
    }

    #[test]
    fn int16_ct_range_is_exact() {
        let g = GridGeometry::axis_aligned([4, 1, 1], [1.0; 3], [0.0; 3]).unwrap();
        let grid = VoxelGrid::new(g, vec![-1024.0, 0.0, 40.0, 3071.0]).unwrap();
        let (_d, p) = tmp("ct.nii.gz");
        save_volume_as(&grid, &p, StorageType::Int16).unwrap();
        let back = load_volume(&p).unwrap();
        assert_eq!(back.min_max(), (-1024.0, 3071.0));
        assert_eq!(back.values(), grid.values());
    }

    #[test]
    fn mask_round_trip_and_label_error() {
        let g = GridGeometry::axis_aligned([3, 1, 1], [1.0; 3], [0.0; 3]).unwrap();
        let m = LabelMask::new(g.clone(), vec![0, 1, 2]).unwrap();
        let (_d, p) = tmp("m.nii");
        save_mask(&m, &p).unwrap();
        assert_eq!(load_mask(&p).unwrap().labels(), m.labels());

        let bad = VoxelGrid::new(g, vec![0.0, 3.0, 1.0]).unwrap();
        save_volume(&bad, &p).unwrap();
        assert!(matches!(load_mask(&p), Err(Error::Label(3))));
    }

    #[test]
    fn rejects_4d_and_garbage() {
        let g = GridGeometry::axis_aligned([2, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
        let grid = VoxelGrid::filled(g, 0.0);
        let (_d, p) = tmp("x.nii");
        save_volume(&grid, &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[40..42].copy_from_slice(&4i16.to_le_bytes());
        bytes[48..50].copy_from_slice(&3i16.to_le_bytes());
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_volume(&p), Err(Error::Dimensionality(4))));

        let mut bytes2 = std::fs::read(&p).unwrap();
        bytes2[40..42].copy_from_slice(&2i16.to_le_bytes());
        std::fs::write(&p, &bytes2).unwrap();
        assert!(matches!(load_volume(&p), Err(Error::Dimensionality(2))));

        std::fs::write(&p, b"not a nifti file").unwrap();
        assert!(matches!(load_volume(&p), Err(Error::Format(_))));
    }
}
