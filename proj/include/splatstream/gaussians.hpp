#pragma once

#include <splatstream/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace splatstream {

/// Number of SH coefficients per channel stored for every Gaussian (degree 3).
inline constexpr std::size_t kShCoeffs = 16;

/// DC band of the real spherical harmonics basis, 1 / (2 sqrt(pi)).
inline constexpr double kShC0 = 0.28209479177387814;

/// Raw per-Gaussian attributes exactly as stored in a 3DGS PLY file.
///
/// Flat row-major storage:
///   means          [N, 3]
///   log_scales     [N, 3]
///   quaternions    [N, 4]  (w, x, y, z)
///   opacity_logits [N]
///   sh_coeffs      [N, 16, 3]  slot 0 is the DC term
struct GaussianPrimitiveSet {
  std::size_t count = 0;
  std::vector<float> means;
  std::vector<float> log_scales;
  std::vector<float> quaternions;
  std::vector<float> opacity_logits;
  std::vector<float> sh_coeffs;

  void resize(std::size_t n) {
    count = n;
    means.assign(n * 3, 0.0f);
    log_scales.assign(n * 3, 0.0f);
    quaternions.assign(n * 4, 0.0f);
    opacity_logits.assign(n, 0.0f);
    sh_coeffs.assign(n * kShCoeffs * 3, 0.0f);
  }

  float& sh(std::size_t i, std::size_t k, std::size_t c) { return sh_coeffs[(i * kShCoeffs + k) * 3 + c]; }
  float sh(std::size_t i, std::size_t k, std::size_t c) const { return sh_coeffs[(i * kShCoeffs + k) * 3 + c]; }

  bool consistent() const {
    return means.size() == count * 3 && log_scales.size() == count * 3 &&
           quaternions.size() == count * 4 && opacity_logits.size() == count &&
           sh_coeffs.size() == count * kShCoeffs * 3;
  }
};

/// Render-ready attributes. Immutable once built; shared between renders.
struct ActivatedPrimitives {
  std::size_t count = 0;
  std::vector<float> means;      // [N, 3]
  std::vector<float> scales;     // [N, 3], > 0
  std::vector<float> rotations;  // [N, 4], unit (w, x, y, z)
  std::vector<float> opacities;  // [N], in [0, 1]
  std::vector<float> colors_dc;  // [N, 3], in [0, 1]
  std::vector<float> sh_coeffs;  // [N, 16, 3]
};

namespace detail {

inline bool all_finite(const std::vector<float>& v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

inline double sigmoid(double x) {
  // split keeps exp() from overflowing for large |x|
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// Applies the 3DGS activations: exp on log-scales, sigmoid on opacity
/// logits, quaternion normalization and the degree-0 SH to RGB mapping.
inline ActivatedPrimitives activate(const GaussianPrimitiveSet& set) {
  if (!set.consistent()) {
    throw Error(ErrorKind::InvalidArgument, "primitive arrays disagree on N");
  }
  const std::size_t n = set.count;
  ActivatedPrimitives out;
  out.count = n;
  out.means = set.means;
  out.sh_coeffs = set.sh_coeffs;
  out.scales.resize(n * 3);
  out.rotations.resize(n * 4);
  out.opacities.resize(n);
  out.colors_dc.resize(n * 3);

  for (std::size_t i = 0; i < n * 3; ++i) {
    out.scales[i] = static_cast<float>(std::exp(static_cast<double>(set.log_scales[i])));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const float* q = &set.quaternions[i * 4];
    const double norm = std::sqrt(double(q[0]) * q[0] + double(q[1]) * q[1] +
                                  double(q[2]) * q[2] + double(q[3]) * q[3]);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw Error(ErrorKind::NonFiniteAttribute,
                  "quaternion " + std::to_string(i) + " cannot be normalized");
    }
    for (int k = 0; k < 4; ++k) out.rotations[i * 4 + k] = static_cast<float>(q[k] / norm);

    out.opacities[i] = static_cast<float>(detail::sigmoid(set.opacity_logits[i]));
    for (std::size_t c = 0; c < 3; ++c) {
      const double rgb = kShC0 * set.sh(i, 0, c) + 0.5;
      out.colors_dc[i * 3 + c] = static_cast<float>(std::clamp(rgb, 0.0, 1.0));
    }
  }

  if (!detail::all_finite(out.means) || !detail::all_finite(out.scales) ||
      !detail::all_finite(out.opacities) || !detail::all_finite(out.colors_dc) ||
      !detail::all_finite(out.sh_coeffs)) {
    throw Error(ErrorKind::NonFiniteAttribute, "activation produced NaN or Inf");
  }
  // exp() can underflow to zero for very negative log-scales
  if (std::any_of(out.scales.begin(), out.scales.end(), [](float s) { return !(s > 0.0f); })) {
    throw Error(ErrorKind::NonFiniteAttribute, "scale underflowed to zero");
  }
  return out;
}

}  // namespace splatstream
