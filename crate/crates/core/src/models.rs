//! The introductory GAN (dense, grayscale) and DCGAN (convolutional, RGB)
//! architectures.

use albumgan_tensor::Activation;
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::nn::{InitScheme, LayerSpec, Sequential};

/// Which of the two DCGAN initialization setups to use: the tutorial default
/// (N(0,0.02) everywhere) or the modified He + normalized-Xavier scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcganInit {
    Default,
    Custom,
}

/// Dense generator: latent -> 256 -> 512 -> 1024 -> pixels, sigmoid output
/// in [0,1], reshaped to the image. Uses the Keras default glorot-uniform
/// initializer (normalized Xavier).
pub fn intro_generator<R: Rng>(
    latent_dim: usize,
    image: (usize, usize, usize),
    leaky: f32,
    rng: &mut R,
) -> Result<Sequential> {
    let (c, h, w) = image;
    let pixels = c * h * w;
    let init = InitScheme::XavierNormalized;
    let leaky = Activation::LeakyRelu(leaky);
    Sequential::build(
        &[
            LayerSpec::Dense {
                fan_in: latent_dim,
                fan_out: 256,
                init,
                activation: Some(leaky),
            },
            LayerSpec::Dense {
                fan_in: 256,
                fan_out: 512,
                init,
                activation: Some(leaky),
            },
            LayerSpec::Dense {
                fan_in: 512,
                fan_out: 1024,
                init,
                activation: Some(leaky),
            },
            LayerSpec::Dense {
                fan_in: 1024,
                fan_out: pixels,
                init,
                activation: Some(Activation::Sigmoid),
            },
            LayerSpec::Reshape {
                dims: vec![c, h, w],
            },
        ],
        rng,
    )
}

/// Dense discriminator: pixels -> 1024 -> 512 -> 256 -> 1 with dropout
/// between the hidden layers and a sigmoid head.
pub fn intro_discriminator<R: Rng>(
    image: (usize, usize, usize),
    leaky: f32,
    dropout: f32,
    rng: &mut R,
) -> Result<Sequential> {
    let (c, h, w) = image;
    let pixels = c * h * w;
    let init = InitScheme::XavierNormalized;
    let leaky = Activation::LeakyRelu(leaky);
    let mut specs = vec![LayerSpec::Flatten];
    for (fan_in, fan_out) in [(pixels, 1024), (1024, 512), (512, 256)] {
        specs.push(LayerSpec::Dense {
            fan_in,
            fan_out,
            init,
            activation: Some(leaky),
        });
        if dropout > 0.0 {
            specs.push(LayerSpec::Dropout { rate: dropout });
        }
    }
    specs.push(LayerSpec::Dense {
        fan_in: 256,
        fan_out: 1,
        init,
        activation: Some(Activation::Sigmoid),
    });
    Sequential::build(&specs, rng)
}

fn dcgan_scheme(init: DcganInit, last_layer: bool) -> InitScheme {
    match (init, last_layer) {
        (DcganInit::Default, _) => InitScheme::DefaultDcgan,
        // He for rectifier layers, normalized Xavier for the tanh/sigmoid head
        (DcganInit::Custom, false) => InitScheme::He,
        (DcganInit::Custom, true) => InitScheme::XavierNormalized,
    }
}

/// Convolutional-transpose generator for 64x64 RGB output: latent (as
/// [N,latent,1,1]) through four upsampling blocks with batch norm and ReLU,
/// tanh head. `ngf` scales feature-map width (64 in the source model).
pub fn dcgan_generator<R: Rng>(
    latent_dim: usize,
    ngf: usize,
    out_c: usize,
    init: DcganInit,
    rng: &mut R,
) -> Result<Sequential> {
    if ngf < 2 {
        return Err(CoreError::InvalidConfig("ngf must be >= 2".into()));
    }
    let bn_init = match init {
        DcganInit::Default => InitScheme::DefaultDcgan,
        DcganInit::Custom => InitScheme::He, // scale is set to constant 1 for non-default schemes
    };
    let specs = vec![
        LayerSpec::ConvTranspose {
            in_c: latent_dim,
            out_c: ngf * 8,
            kernel: 4,
            stride: 1,
            padding: 0,
            init: dcgan_scheme(init, false),
            activation: None,
        },
        LayerSpec::BatchNorm {
            features: ngf * 8,
            init: bn_init,
        },
        LayerSpec::Activation(Activation::Relu),
        LayerSpec::ConvTranspose {
            in_c: ngf * 8,
            out_c: ngf * 4,
            kernel: 4,
            stride: 2,
            padding: 1,
            init: dcgan_scheme(init, false),
            activation: None,
        },
        LayerSpec::BatchNorm {
            features: ngf * 4,
            init: bn_init,
        },
        LayerSpec::Activation(Activation::Relu),
        LayerSpec::ConvTranspose {
            in_c: ngf * 4,
            out_c: ngf * 2,
            kernel: 4,
            stride: 2,
            padding: 1,
            init: dcgan_scheme(init, false),
            activation: None,
        },
        LayerSpec::BatchNorm {
            features: ngf * 2,
            init: bn_init,
        },
        LayerSpec::Activation(Activation::Relu),
        LayerSpec::ConvTranspose {
            in_c: ngf * 2,
            out_c: ngf,
            kernel: 4,
            stride: 2,
            padding: 1,
            init: dcgan_scheme(init, false),
            activation: None,
        },
        LayerSpec::BatchNorm {
            features: ngf,
            init: bn_init,
        },
        LayerSpec::Activation(Activation::Relu),
        LayerSpec::ConvTranspose {
            in_c: ngf,
            out_c,
            kernel: 4,
            stride: 2,
            padding: 1,
            init: dcgan_scheme(init, true),
            activation: Some(Activation::Tanh),
        },
    ];
    Sequential::build(&specs, rng)
}

/// Convolutional discriminator for 64x64 RGB input, sigmoid probability
/// head flattened to [N,1].
pub fn dcgan_discriminator<R: Rng>(
    in_c: usize,
    ndf: usize,
    leaky: f32,
    init: DcganInit,
    rng: &mut R,
) -> Result<Sequential> {
    if ndf < 2 {
        return Err(CoreError::InvalidConfig("ndf must be >= 2".into()));
    }
    let lrelu = Activation::LeakyRelu(leaky);
    let bn_init = match init {
        DcganInit::Default => InitScheme::DefaultDcgan,
        DcganInit::Custom => InitScheme::He,
    };
    let specs = vec![
        LayerSpec::Conv {
            in_c,
            out_c: ndf,
            kernel: 4,
            stride: 2,
            padding: 1,
            init: dcgan_scheme(init, false),
            activation: Some(lrelu),
        },
        LayerSpec::Conv {
            in_c: ndf,
            out_c: ndf * 2,
            kernel: 4,
            stride: 2,
            padding: 1,
            init: dcgan_scheme(init, false),
            activation: None,
        },
        LayerSpec::BatchNorm {
            features: ndf * 2,
            init: bn_init,
        },
        LayerSpec::Activation(lrelu),
        LayerSpec::Conv {
            in_c: ndf * 2,
            out_c: ndf * 4,
            kernel: 4,
            stride: 2,
            padding: 1,
            init: dcgan_scheme(init, false),
            activation: None,
        },
        LayerSpec::BatchNorm {
            features: ndf * 4,
            init: bn_init,
        },
        LayerSpec::Activation(lrelu),
        LayerSpec::Conv {
            in_c: ndf * 4,
            out_c: ndf * 8,
            kernel: 4,
            stride: 2,
            padding: 1,
            init: dcgan_scheme(init, false),
            activation: None,
        },
        LayerSpec::BatchNorm {
            features: ndf * 8,
            init: bn_init,
        },
        LayerSpec::Activation(lrelu),
        LayerSpec::Conv {
            in_c: ndf * 8,
            out_c: 1,
            kernel: 4,
            stride: 1,
            padding: 0,
            init: dcgan_scheme(init, true),
            activation: Some(Activation::Sigmoid),
        },
        LayerSpec::Flatten,
    ];
    Sequential::build(&specs, rng)
}
