use crate::geometry::BBox;
use crate::imageio::Image;

pub const DEFAULT_PATCH_SIDE: usize = 64;

/// Bilinear resample of the box content to a `side x side` luma patch.
/// Output pixel `u` samples `x_min + (u + 0.5) * width / side - 0.5`, so a
/// box covering the whole image at its native size is reproduced exactly.
pub fn extract_patch(img: &Image, b: &BBox, side: usize) -> Image {
    let converted;
    let luma = if img.channels() == 1 {
        img
    } else {
        converted = img.to_luma();
        &converted
    };
    let sx = b.width() / side as f64;
    let sy = b.height() / side as f64;
    Image::from_fn(side, side, |u, v| {
        let x = b.x_min + (u as f64 + 0.5) * sx - 0.5;
        let y = b.y_min + (v as f64 + 0.5) * sy - 0.5;
        luma.sample(x, y, 0)
    })
    .expect("positive patch side")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whole_image_at_native_size_is_identity() {
        let img = Image::from_fn(32, 32, |x, y| ((x * 13 + y * 7) % 17) as f64 / 16.0).unwrap();
        let b = BBox::new(0.0, 0.0, 32.0, 32.0).unwrap();
        assert_eq!(extract_patch(&img, &b, 32), img);
    }

    #[test]
    fn constant_image_gives_constant_patch() {
        let img = Image::filled(40, 30, 3, 0.25).unwrap();
        let p = extract_patch(&img, &BBox::new(3.0, 4.5, 27.0, 22.0).unwrap(), 16);
        assert!(p.data().iter().all(|&v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn checkerboard_downscale_averages_to_half() {
        let img = Image::from_fn(32, 32, |x, y| ((x + y) % 2) as f64).unwrap();
        let p = extract_patch(&img, &BBox::new(0.0, 0.0, 32.0, 32.0).unwrap(), 16);
        assert!(p.data().iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }
}
