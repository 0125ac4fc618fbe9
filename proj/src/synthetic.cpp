#include "comir/synthetic.hpp"

#include "comir/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace comir {

Image synthetic_texture(int height, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Image acc(1, height, width);
  for (double sigma : {3.0, 6.0, 12.0, 24.0}) {
    Image noise(1, height, width);
    for (Eigen::Index i = 0; i < noise.pixels().size(); ++i) noise.pixels()(0, i) = gauss(rng);
    acc.pixels() += normalize_minmax(gaussian_blur(noise, sigma)).pixels();
  }
  Image img = normalize_minmax(acc);

  const int shapes = std::max(8, height * width / 6000);
  for (int s = 0; s < shapes; ++s) {
    const double cx = unit(rng) * width;
    const double cy = unit(rng) * height;
    const double a = 4.0 + unit(rng) * 0.06 * std::min(height, width);
    const double b = 4.0 + unit(rng) * 0.06 * std::min(height, width);
    const double phi = unit(rng) * std::numbers::pi;
    const float value = static_cast<float>(unit(rng));
    const bool bar = unit(rng) < 0.35;
    const double cp = std::cos(phi);
    const double sp = std::sin(phi);
    const int r = int(std::ceil(std::max(a, b))) + 1;
    for (int y = std::max(0, int(cy) - r); y < std::min(height, int(cy) + r + 1); ++y) {
      for (int x = std::max(0, int(cx) - r); x < std::min(width, int(cx) + r + 1); ++x) {
        const double u = (x - cx) * cp + (y - cy) * sp;
        const double v = -(x - cx) * sp + (y - cy) * cp;
        const bool inside = bar ? (std::abs(u) <= a && std::abs(v) <= 0.25 * b)
                                : (u * u / (a * a) + v * v / (b * b) <= 1.0);
        if (inside) img.at(0, y, x) = 0.3f * img.at(0, y, x) + 0.7f * value;
      }
    }
  }
  img = normalize_minmax(gaussian_blur(img, 1.0));
  return img;
}

Image synthetic_inverted(const Image& img, double noise_sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> gauss(0.0f, float(noise_sigma));
  Image out = img;
  for (Eigen::Index i = 0; i < out.pixels().size(); ++i) {
    float& v = out.pixels().data()[i];
    v = std::clamp(1.0f - v + (noise_sigma > 0 ? gauss(rng) : 0.0f), 0.0f, 1.0f);
  }
  return out;
}

}  // namespace comir
