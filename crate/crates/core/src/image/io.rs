//! 8-bit RGB PNG reading and writing. Decoding divides by 255 into (0,1);
//! encoding remaps to (0,1), scales by 255 and rounds to nearest.

use std::path::Path;

use super::{ImageBuffer, ImageError, RangeTag, CHANNELS};

pub fn load_png(path: &Path) -> Result<ImageBuffer, ImageError> {
    let decoded = ::image::open(path).map_err(|source| ImageError::Decode {
        path: path.display().to_string(),
        source,
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let data = rgb.as_raw().iter().map(|&b| b as f32 / 255.0).collect();
    Ok(ImageBuffer::from_data(h, w, RangeTag::Unit, data))
}

pub fn save_png(img: &ImageBuffer, path: &Path) -> Result<(), ImageError> {
    let unit = img.rescale_range(RangeTag::Unit);
    let bytes: Vec<u8> = unit
        .data
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    debug_assert_eq!(bytes.len(), unit.height * unit.width * CHANNELS);
    let rgb: ::image::RgbImage =
        ::image::ImageBuffer::from_raw(unit.width as u32, unit.height as u32, bytes)
            .expect("byte length matches extents");
    rgb.save(path).map_err(|source| ImageError::Decode {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_exact_on_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let mut img = ImageBuffer::new(5, 7, RangeTag::Unit);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = ((i * 13) % 256) as f32 / 255.0;
        }
        save_png(&img, &path).unwrap();
        let back = load_png(&path).unwrap();
        assert_eq!((back.height, back.width), (5, 7));
        for (a, b) in back.data.iter().zip(&img.data) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn symmetric_range_images_are_remapped_on_save() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.png");
        let mut img = ImageBuffer::new(2, 2, RangeTag::Symmetric);
        img.data.fill(0.0); // midpoint of (-1,1) = 0.5 in (0,1) = 127.5 -> 128
        save_png(&img, &path).unwrap();
        let back = load_png(&path).unwrap();
        assert!((back.data[0] - 128.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn missing_file_is_a_decode_error() {
        let err = load_png(Path::new("/nonexistent/x.png")).unwrap_err();
        assert!(matches!(err, ImageError::Decode { .. }));
    }
}
