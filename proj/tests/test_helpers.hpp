#pragma once

#include "comir/image.hpp"

#include <random>

namespace comir::test {

inline Image random_image(int channels, int height, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(channels, height, width);
  for (Eigen::Index i = 0; i < img.pixels().size(); ++i) img.pixels().data()[i] = u(rng);
  return img;
}

inline Image ramp_image(int height, int width) {
  Image img(1, height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) img.at(0, y, x) = float(y * width + x) / float(height * width);
  }
  return img;
}

inline RigidTransform2D random_transform(std::mt19937_64& rng, double box = 1000.0) {
  std::uniform_real_distribution<double> a(-3.0, 3.0), t(-box, box);
  RigidTransform2D out;
  out.angle = a(rng);
  out.translation = {t(rng), t(rng)};
  out.center = {t(rng), t(rng)};
  return out;
}

}  // namespace comir::test
