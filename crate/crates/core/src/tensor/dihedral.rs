use super::{Shape, Tensor};

/// One of the 8 symmetries of the square: an optional horizontal mirror
/// followed by `rotations` quarter turns counter-clockwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dihedral {
    pub flip: bool,
    pub rotations: u8,
}

impl Dihedral {
    pub const IDENTITY: Dihedral = Dihedral { flip: false, rotations: 0 };

    pub fn all() -> [Dihedral; 8] {
        let mut out = [Dihedral::IDENTITY; 8];
        for (i, d) in out.iter_mut().enumerate() {
            *d = Dihedral::from_index(i);
        }
        out
    }

    /// Index in `0..8`; bit 2 selects the mirror.
    pub fn from_index(i: usize) -> Dihedral {
        Dihedral { flip: i & 4 != 0, rotations: (i % 4) as u8 }
    }

    pub fn apply(&self, t: &Tensor) -> Tensor {
        let mut out = if self.flip { flip_horizontal(t) } else { t.clone() };
        for _ in 0..self.rotations % 4 {
            out = rotate_ccw(&out);
        }
        out
    }

    pub fn invert(&self, t: &Tensor) -> Tensor {
        let mut out = t.clone();
        for _ in 0..(4 - self.rotations % 4) % 4 {
            out = rotate_ccw(&out);
        }
        if self.flip {
            out = flip_horizontal(&out);
        }
        out
    }

    /// Spatial size after applying the transform to a `height x width` grid.
    pub fn transformed_size(&self, height: usize, width: usize) -> (usize, usize) {
        if self.rotations % 2 == 1 {
            (width, height)
        } else {
            (height, width)
        }
    }
}

fn flip_horizontal(t: &Tensor) -> Tensor {
    let w = t.shape().width;
    Tensor::from_fn(t.shape(), |n, c, y, x| t.at(n, c, y, w - 1 - x))
}

fn rotate_ccw(t: &Tensor) -> Tensor {
    let s = t.shape();
    let out = Shape::new(s.batch, s.channels, s.width, s.height);
    Tensor::from_fn(out, |n, c, y, x| t.at(n, c, x, s.width - 1 - y))
}
