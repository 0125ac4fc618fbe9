#pragma once

#include "comir/image.hpp"

namespace comir {

/// Separable Gaussian blur per channel, mirrored borders. sigma <= 0 is a no-op.
Image gaussian_blur(const Image& img, double sigma);

/// Central-difference gradient magnitude per channel (one-sided at borders).
Image gradient_magnitude(const Image& img);

/// Keeps every `factor`-th pixel in both directions, starting at 0.
Image subsample(const Image& img, int factor);

/// Mirror padding without repeating the edge pixel (numpy "reflect").
Image reflect_pad(const Image& img, int top, int bottom, int left, int right);

/// Per-channel affine rescale of [min, max] to [0, 1]; constant channels map to 0.
Image normalize_minmax(const Image& img);

/// Projects all channels onto their first principal component, rescaled to [0, 1].
Image principal_component(const Image& img);

/// Arithmetic mean over channels.
Image channel_mean(const Image& img);

}  // namespace comir
