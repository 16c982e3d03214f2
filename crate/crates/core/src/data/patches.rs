use super::image::GrayImage;
use crate::nn::{Shape, Tensor};
use crate::{Error, Result};

/// Where a patch came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchOrigin {
    pub image: usize,
    pub top: usize,
    pub left: usize,
    /// Dihedral code applied after cropping; 0 is none.
    pub augmentation: u8,
}

/// Square patches stacked as an `(N, 1, s, s)` tensor.
#[derive(Clone, Debug)]
pub struct PatchSet {
    pub patches: Tensor,
    pub provenance: Vec<PatchOrigin>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    pub fn size(&self) -> usize {
        self.patches.shape().h
    }

    pub fn patch(&self, i: usize) -> &[f32] {
        self.patches.sample(i)
    }

    /// Patches of every image in `images`, in image order.
    pub fn from_images(images: &[GrayImage], size: usize, stride: usize) -> Result<PatchSet> {
        if images.is_empty() {
            return Err(Error::Empty("corpus has no images".into()));
        }
        let mut data = Vec::new();
        let mut provenance = Vec::new();
        for (id, img) in images.iter().enumerate() {
            crop_all(img, id, size, stride, &mut data, &mut provenance)?;
        }
        let shape = Shape::new(provenance.len(), 1, size, size)?;
        Ok(PatchSet {
            patches: Tensor::from_vec(shape, data)?,
            provenance,
        })
    }
}

pub fn patch_count(h: usize, w: usize, size: usize, stride: usize) -> usize {
    ((h - size) / stride + 1) * ((w - size) / stride + 1)
}

/// `size x size` crops with top-left corners on the grid `{0, t, 2t, ...}`,
/// kept only when fully inside the image. Row-major order.
pub fn extract_patches(img: &GrayImage, size: usize, stride: usize) -> Result<PatchSet> {
    PatchSet::from_images(std::slice::from_ref(img), size, stride)
}

fn crop_all(
    img: &GrayImage,
    id: usize,
    size: usize,
    stride: usize,
    data: &mut Vec<f32>,
    provenance: &mut Vec<PatchOrigin>,
) -> Result<()> {
    if size == 0 || stride == 0 {
        return Err(Error::InvalidArgument(format!("patch size {size} and stride {stride} must be >= 1")));
    }
    let (h, w) = (img.height(), img.width());
    if size > h || size > w {
        return Err(Error::InvalidArgument(format!(
            "patch size {size} exceeds image {id} ({w}x{h})"
        )));
    }
    for top in (0..=h - size).step_by(stride) {
        for left in (0..=w - size).step_by(stride) {
            for y in top..top + size {
                data.extend_from_slice(&img.pixels()[y * w + left..y * w + left + size]);
            }
            provenance.push(PatchOrigin {
                image: id,
                top,
                left,
                augmentation: 0,
            });
        }
    }
    Ok(())
}

/// One of the 8 symmetries of the square: `code & 3` quarter turns
/// counter-clockwise, preceded by a horizontal flip when `code & 4` is set.
pub fn augment(patch: &[f32], size: usize, code: u8) -> Result<Vec<f32>> {
    if code > 7 {
        return Err(Error::InvalidArgument(format!("augmentation code {code} not in 0..=7")));
    }
    if patch.len() != size * size {
        return Err(Error::shape(format!("{} values is not a {size}x{size} patch", patch.len())));
    }
    let mut out = vec![0.0; patch.len()];
    augment_into(patch, size, code, &mut out);
    Ok(out)
}

pub(crate) fn augment_into(patch: &[f32], s: usize, code: u8, out: &mut [f32]) {
    let flip = code & 4 != 0;
    let turns = code & 3;
    for y in 0..s {
        for x in 0..s {
            // Source coordinates of output pixel (x, y): undo the rotation,
            // then the flip.
            let (sx, sy) = match turns {
                0 => (x, y),
                1 => (s - 1 - y, x),
                2 => (s - 1 - x, s - 1 - y),
                _ => (y, s - 1 - x),
            };
            let sx = if flip { s - 1 - sx } else { sx };
            out[y * s + x] = patch[sy * s + sx];
        }
    }
}
