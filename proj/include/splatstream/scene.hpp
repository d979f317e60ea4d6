#pragma once

#include <splatstream/gaussians.hpp>

#include <cmath>
#include <cstdint>
#include <random>

namespace splatstream {

struct SyntheticSceneParams {
  std::size_t count = 5000;
  std::uint64_t seed = 7;
  // Gaussians fill a box in front of the default camera (origin, facing +z).
  double half_width = 4.0;
  double half_height = 2.5;
  double near_z = 4.0;
  double far_z = 10.0;
  double min_scale = 0.02;
  double max_scale = 0.15;
};

/// Random but reproducible test scene: colored, anisotropic, randomly
/// rotated Gaussians with mostly high opacity and a few SH bands filled in.
inline GaussianPrimitiveSet make_synthetic_scene(const SyntheticSceneParams& p = {}) {
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  GaussianPrimitiveSet set;
  set.resize(p.count);
  const double log_min = std::log(p.min_scale), log_max = std::log(p.max_scale);
  for (std::size_t i = 0; i < p.count; ++i) {
    set.means[i * 3 + 0] = static_cast<float>(uniform(-p.half_width, p.half_width));
    set.means[i * 3 + 1] = static_cast<float>(uniform(-p.half_height, p.half_height));
    set.means[i * 3 + 2] = static_cast<float>(uniform(p.near_z, p.far_z));
    for (int k = 0; k < 3; ++k) set.log_scales[i * 3 + k] = static_cast<float>(uniform(log_min, log_max));

    double q[4], norm = 0.0;
    for (double& c : q) {
      c = uniform(-1.0, 1.0);
      norm += c * c;
    }
    norm = std::sqrt(norm);
    for (int k = 0; k < 4; ++k) set.quaternions[i * 4 + k] = static_cast<float>(q[k] / norm);

    set.opacity_logits[i] = static_cast<float>(uniform(-0.5, 4.0));
    for (std::size_t c = 0; c < 3; ++c) {
      // DC spans roughly the full [0, 1] color range after activation
      set.sh(i, 0, c) = static_cast<float>(uniform(-1.7, 1.7));
      for (std::size_t k = 1; k < 4; ++k) set.sh(i, k, c) = static_cast<float>(uniform(-0.2, 0.2));
    }
  }
  return set;
}

}  // namespace splatstream
