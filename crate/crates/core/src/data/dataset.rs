use std::fmt;
use std::str::FromStr;

use crate::error::{DataError, Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const NUM_CLASSES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DatasetName {
    Mnist,
    FashionMnist,
    Cifar10,
}

impl DatasetName {
    pub const ALL: [DatasetName; 3] = [DatasetName::Mnist, DatasetName::FashionMnist, DatasetName::Cifar10];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::FashionMnist => "fashion_mnist",
            DatasetName::Cifar10 => "cifar10",
        }
    }

    /// Native `[c, h, w]` image shape.
    pub fn image_shape(self) -> [usize; 3] {
        match self {
            DatasetName::Mnist | DatasetName::FashionMnist => [1, 28, 28],
            DatasetName::Cifar10 => [3, 32, 32],
        }
    }

    /// Number of images in the official split.
    pub fn official_len(self, split: Split) -> usize {
        match (self, split) {
            (DatasetName::Cifar10, Split::Train) => 50_000,
            (_, Split::Train) => 60_000,
            (_, Split::Test) => 10_000,
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, DataError> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "mnist" => Ok(DatasetName::Mnist),
            "fashion_mnist" | "fmnist" => Ok(DatasetName::FashionMnist),
            "cifar10" | "cifar_10" => Ok(DatasetName::Cifar10),
            _ => Err(DataError::UnknownDataset(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Maps a raw byte to `[-1, 1]` via `x / 127.5 - 1`.
#[inline]
pub fn normalize_pixel<T: Scalar>(byte: u8) -> T {
    T::lit(byte as f64 / 127.5 - 1.0)
}

/// Labelled images held as raw bytes; normalisation happens when tensors
/// are materialised, so a loaded dataset costs one byte per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    name: DatasetName,
    split: Split,
    shape: [usize; 3],
    pixels: Vec<u8>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(name: DatasetName, split: Split, shape: [usize; 3], pixels: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        let per = shape.iter().product::<usize>();
        if per == 0 || pixels.len() != labels.len() * per {
            return Err(DataError::DimensionMismatch(format!(
                "{} pixel bytes for {} images of shape {shape:?}",
                pixels.len(),
                labels.len()
            ))
            .into());
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= NUM_CLASSES) {
            return Err(DataError::InvalidLabel { label, index }.into());
        }
        Ok(Self {
            name,
            split,
            shape,
            pixels,
            labels,
        })
    }

    pub fn name(&self) -> DatasetName {
        self.name
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn image_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn label_histogram(&self) -> [usize; NUM_CLASSES] {
        let mut h = [0; NUM_CLASSES];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }

    /// Whether the size and image shape match the official split.
    pub fn is_official_split(&self) -> bool {
        self.len() == self.name.official_len(self.split) && self.shape == self.name.image_shape()
    }

    /// All images in `[-1, 1]`, shaped `[n, c, h, w]` or `[n, c*h*w]`.
    pub fn normalize_and_flatten<T: Scalar>(&self, flatten: bool) -> Result<Tensor<T>> {
        let indices: Vec<usize> = (0..self.len()).collect();
        Ok(self.batch(&indices, flatten)?.0)
    }

    /// Normalised images and labels for the given indices.
    pub fn batch<T: Scalar>(&self, indices: &[usize], flatten: bool) -> Result<(Tensor<T>, Vec<usize>)> {
        let per = self.image_len();
        let mut data = Vec::with_capacity(indices.len() * per);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidShape {
                    shape: vec![self.len()],
                    reason: format!("image index {i} out of range"),
                });
            }
            data.extend(self.image(i).iter().map(|&b| normalize_pixel::<T>(b)));
            labels.push(self.labels[i] as usize);
        }
        let shape = if flatten {
            vec![indices.len(), per]
        } else {
            let [c, h, w] = self.shape;
            vec![indices.len(), c, h, w]
        };
        Ok((Tensor::new(shape, data)?, labels))
    }

    /// Seeded sample of `n` images without replacement, kept in original order.
    pub fn subset(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n > self.len() {
            return Err(DataError::SubsetTooLarge {
                requested: n,
                available: self.len(),
            }
            .into());
        }
        let mut rng = Rng::new(seed);
        let mut chosen = rng.permutation(self.len());
        chosen.truncate(n);
        chosen.sort_unstable();
        Ok(self.select(&chosen))
    }

    fn select(&self, indices: &[usize]) -> Dataset {
        let mut pixels = Vec::with_capacity(indices.len() * self.image_len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            name: self.name,
            split: self.split,
            shape: self.shape,
            pixels,
            labels,
        }
    }

    /// Nearest-neighbour resize; output pixel `(y, x)` samples source pixel
    /// `(floor((y + 0.5) * H / h), floor((x + 0.5) * W / w))`, i.e. the source
    /// pixel under the output pixel's centre.
    pub fn resize(&self, height: usize, width: usize) -> Result<Dataset> {
        let [c, h, w] = self.shape;
        if height == 0 || width == 0 {
            return Err(Error::InvalidShape {
                shape: vec![c, height, width],
                reason: "resize target must be positive".into(),
            });
        }
        if (height, width) == (h, w) {
            return Ok(self.clone());
        }
        let src_y: Vec<usize> = (0..height).map(|y| ((2 * y + 1) * h) / (2 * height)).collect();
        let src_x: Vec<usize> = (0..width).map(|x| ((2 * x + 1) * w) / (2 * width)).collect();
        let mut pixels = Vec::with_capacity(self.len() * c * height * width);
        for i in 0..self.len() {
            let img = self.image(i);
            for ch in 0..c {
                for &sy in &src_y {
                    for &sx in &src_x {
                        pixels.push(img[(ch * h + sy) * w + sx]);
                    }
                }
            }
        }
        Dataset::new(self.name, self.split, [c, height, width], pixels, self.labels.clone())
    }

    /// Index batches over one epoch, shuffled when a generator is given.
    pub fn batches(&self, batch_size: usize, rng: Option<&mut Rng>) -> BatchOrder {
        let mut order: Vec<usize> = (0..self.len()).collect();
        if let Some(rng) = rng {
            rng.shuffle(&mut order);
        }
        BatchOrder {
            order,
            batch_size: batch_size.max(1),
            cursor: 0,
        }
    }
}

/// Iterator over index batches; every index appears exactly once per epoch.
#[derive(Clone, Debug)]
pub struct BatchOrder {
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

impl Iterator for BatchOrder {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        Some(batch)
    }
}
