use alloc::vec::Vec;
use core::ops::Deref;

use crate::error::{shape_err, Result};

/// Dense row-major `f32` tensor (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(shape_err!(
                "shape {:?} holds {} values, got {}",
                shape,
                expected,
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: alloc::vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_parts(self) -> (Vec<usize>, Vec<f32>) {
        (self.shape, self.data)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Index of the first NaN or infinite value, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    /// Bit-level equality, so that `NaN` payloads and signed zeros compare exactly.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.shape == other.shape
            && self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// `(channels, height, width)` for a rank-3 tensor.
    pub fn chw(&self) -> Result<(usize, usize, usize)> {
        match *self.shape.as_slice() {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(shape_err!(
                "expected a rank-3 tensor, got shape {:?}",
                self.shape
            )),
        }
    }
}

/// A `(channels × height × width)` stack of spatial maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Stack {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 {
            return Err(shape_err!("stack must hold at least one channel"));
        }
        if height == 0 || width == 0 {
            return Err(shape_err!(
                "stack planes must be nonempty, got {height}x{width}"
            ));
        }
        if data.len() != channels * height * width {
            return Err(shape_err!(
                "stack {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                data.len()
            ));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_tensor(tensor: &Tensor) -> Result<Self> {
        let (c, h, w) = tensor.chw()?;
        Self::new(c, h, w, tensor.data().to_vec())
    }

    pub fn from_planes<P: AsRef<[f32]>>(height: usize, width: usize, planes: &[P]) -> Result<Self> {
        let mut data = Vec::with_capacity(planes.len() * height * width);
        for plane in planes {
            data.extend_from_slice(plane.as_ref());
        }
        Self::new(planes.len(), height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn spatial_dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, k: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn planes(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.plane_len())
    }

    pub fn same_shape(&self, other: &Stack) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor {
            shape: alloc::vec![self.channels, self.height, self.width],
            data: self.data.clone(),
        }
    }

    /// Scales every element, returning a new stack.
    pub fn scaled(&self, factor: f32) -> Self {
        Self {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

macro_rules! stack_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Stack);

        impl $name {
            pub fn new(stack: Stack) -> Self {
                Self(stack)
            }

            pub fn from_tensor(tensor: &Tensor) -> Result<Self> {
                Stack::from_tensor(tensor).map(Self)
            }

            pub fn into_inner(self) -> Stack {
                self.0
            }
        }

        impl Deref for $name {
            type Target = Stack;

            fn deref(&self) -> &Stack {
                &self.0
            }
        }

        impl From<Stack> for $name {
            fn from(stack: Stack) -> Self {
                Self(stack)
            }
        }
    };
}

stack_newtype!(
    /// Activations of the K channels at the explained layer.
    FeatureStack
);
stack_newtype!(
    /// Derivatives of the target class score with respect to each activation.
    GradientStack
);
