#pragma once

#include "comir/image.hpp"

#include <cstdint>

namespace comir {

/// Single-channel procedural texture in [0, 1]: multi-scale smoothed noise
/// overlaid with random ellipses and bars, so it carries both smooth large
/// structures and corner-like keypoints.
Image synthetic_texture(int height, int width, std::uint64_t seed);

/// Second modality of the synthetic fixture: 1 - img plus Gaussian noise,
/// clamped to [0, 1].
Image synthetic_inverted(const Image& img, double noise_sigma, std::uint64_t seed);

}  // namespace comir
