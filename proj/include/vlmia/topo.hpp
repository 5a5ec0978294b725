// topo.hpp
//
// Topographic regularization of 2-D activation sheets ("cortical maps").
//
// The regularizer rewards spatial smoothness: each map C is compared with
// its Gaussian-blurred counterpart C' and the penalty is the negated mean
// cosine over the batch,
//
//   r = -(1/N) * sum_i  (C_i . C'_i) / (||C_i|| ||C'_i||),   C'_i = B C_i
//
// so r is -1 when every map is already smooth (blur changes nothing) and
// grows toward 0/positive as maps become high-frequency. The combined
// training objective is j_cap + tau * r.
//
// Blur details: the kernel is a sampled 2-D Gaussian truncated at radius
// ceil(3*sigma) and renormalized to sum 1; boundaries use edge-repeating
// reflection (index -1 -> 0, n -> n-1), which preserves each map's mean
// exactly for symmetric kernels. Radius 0 is the identity kernel.
//
// The gradient treats the blur as a fixed linear operator B and flows
// through both branches of the cosine (no stop-gradient):
//
//   d cos/dC = (BC + B^T C)/(ab) - cos * ( C/a^2 + (B^T B C)/b^2 )
//   with a = ||C||, b = ||BC||
//
// implemented with an explicit adjoint (scatter form of the same padded
// convolution), so the check against finite differences is exact up to
// floating-point noise. Maps whose norm (raw or blurred) falls below the
// epsilon guard contribute 0 to the sum and receive zero gradient.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vlmia/errors.hpp"

namespace vlmia {

struct CorticalMap {
  int height = 0;
  int width = 0;
  std::vector<double> activations;  // row-major, height*width

  CorticalMap() = default;
  CorticalMap(int h, int w, double fill = 0.0)
      : height(h), width(w), activations(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int r, int c) { return activations[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return activations[static_cast<std::size_t>(r) * width + c]; }
};

struct TopoConfig {
  double tau = 0.0;       // regularization weight; 0 = baseline
  double sigma = 1.0;     // blur width in grid cells
  double epsilon = 1e-12; // norm guard for dead sheets
};

struct BlurKernel {
  double sigma = 0.0;
  int radius = 0;
  std::vector<double> weights;  // (2*radius+1)^2, sums to 1

  double weight(int dr, int dc) const {
    const int side = 2 * radius + 1;
    return weights[static_cast<std::size_t>(dr + radius) * side + (dc + radius)];
  }

  static BlurKernel identity() { return {0.0, 0, {1.0}}; }

  // radius < 0 selects the default ceil(3*sigma)
  static BlurKernel gaussian(double sigma, int radius = -1) {
    if (sigma <= 0.0) throw ConfigError("blur sigma must be positive");
    if (radius < 0) radius = static_cast<int>(std::ceil(3.0 * sigma));
    const int side = 2 * radius + 1;
    BlurKernel k{sigma, radius, std::vector<double>(static_cast<std::size_t>(side) * side)};
    double sum = 0.0;
    for (int dr = -radius; dr <= radius; ++dr) {
      for (int dc = -radius; dc <= radius; ++dc) {
        const double w = std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
        k.weights[static_cast<std::size_t>(dr + radius) * side + (dc + radius)] = w;
        sum += w;
      }
    }
    for (double& w : k.weights) w /= sum;
    return k;
  }
};

namespace detail {

// Edge-repeating reflection onto [0, n); folds as often as needed.
inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

inline void check_same_shape(const std::vector<CorticalMap>& maps, const char* who) {
  if (maps.empty()) throw DataError(std::string(who) + ": empty map batch");
  for (const auto& m : maps) {
    if (m.height <= 0 || m.width <= 0 ||
        m.activations.size() != static_cast<std::size_t>(m.height) * m.width) {
      throw DataError(std::string(who) + ": malformed map");
    }
    if (m.height != maps.front().height || m.width != maps.front().width) {
      throw DataError(std::string(who) + ": maps differ in shape");
    }
  }
}

}  // namespace detail

inline CorticalMap gaussian_blur(const CorticalMap& map, const BlurKernel& kernel) {
  CorticalMap out(map.height, map.width);
  for (int r = 0; r < map.height; ++r) {
    for (int c = 0; c < map.width; ++c) {
      double acc = 0.0;
      for (int dr = -kernel.radius; dr <= kernel.radius; ++dr) {
        const int rr = detail::reflect_index(r + dr, map.height);
        for (int dc = -kernel.radius; dc <= kernel.radius; ++dc) {
          const int cc = detail::reflect_index(c + dc, map.width);
          acc += kernel.weight(dr, dc) * map.at(rr, cc);
        }
      }
      out.at(r, c) = acc;
    }
  }
  return out;
}

// Exact transpose of gaussian_blur as a linear map: gather becomes scatter.
inline CorticalMap blur_adjoint(const CorticalMap& grad, const BlurKernel& kernel) {
  CorticalMap out(grad.height, grad.width);
  for (int r = 0; r < grad.height; ++r) {
    for (int c = 0; c < grad.width; ++c) {
      const double g = grad.at(r, c);
      for (int dr = -kernel.radius; dr <= kernel.radius; ++dr) {
        const int rr = detail::reflect_index(r + dr, grad.height);
        for (int dc = -kernel.radius; dc <= kernel.radius; ++dc) {
          const int cc = detail::reflect_index(c + dc, grad.width);
          out.at(rr, cc) += kernel.weight(dr, dc) * g;
        }
      }
    }
  }
  return out;
}

namespace detail {

inline double dot(const CorticalMap& a, const CorticalMap& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.activations.size(); ++i) {
    s += a.activations[i] * b.activations[i];
  }
  return s;
}

}  // namespace detail

inline double r_topo(const std::vector<CorticalMap>& maps, const BlurKernel& kernel,
                     double epsilon = 1e-12) {
  detail::check_same_shape(maps, "r_topo");
  double sum = 0.0;
  for (const auto& m : maps) {
    const CorticalMap blurred = gaussian_blur(m, kernel);
    const double a = std::sqrt(detail::dot(m, m));
    const double b = std::sqrt(detail::dot(blurred, blurred));
    if (a < epsilon || b < epsilon) continue;  // dead sheet contributes 0
    sum += detail::dot(m, blurred) / (a * b);
  }
  return -sum / static_cast<double>(maps.size());
}

inline double r_topo(const std::vector<CorticalMap>& maps, const TopoConfig& config) {
  return r_topo(maps, BlurKernel::gaussian(config.sigma), config.epsilon);
}

inline std::vector<CorticalMap> r_topo_grad(const std::vector<CorticalMap>& maps,
                                            const BlurKernel& kernel,
                                            double epsilon = 1e-12) {
  detail::check_same_shape(maps, "r_topo_grad");
  const double inv_n = 1.0 / static_cast<double>(maps.size());
  std::vector<CorticalMap> grads;
  grads.reserve(maps.size());
  for (const auto& m : maps) {
    CorticalMap grad(m.height, m.width);
    const CorticalMap blurred = gaussian_blur(m, kernel);
    const double a = std::sqrt(detail::dot(m, m));
    const double b = std::sqrt(detail::dot(blurred, blurred));
    if (a >= epsilon && b >= epsilon) {
      const double s = detail::dot(m, blurred);
      const CorticalMap adj_raw = blur_adjoint(m, kernel);        // B^T C
      const CorticalMap adj_blur = blur_adjoint(blurred, kernel); // B^T B C
      const double c1 = 1.0 / (a * b);
      const double c2 = s / (a * a * a * b);
      const double c3 = s / (a * b * b * b);
      for (std::size_t i = 0; i < grad.activations.size(); ++i) {
        const double dcos = c1 * (blurred.activations[i] + adj_raw.activations[i]) -
                            c2 * m.activations[i] - c3 * adj_blur.activations[i];
        grad.activations[i] = -inv_n * dcos;
      }
    }
    grads.push_back(std::move(grad));
  }
  return grads;
}

inline std::vector<CorticalMap> r_topo_grad(const std::vector<CorticalMap>& maps,
                                            const TopoConfig& config) {
  return r_topo_grad(maps, BlurKernel::gaussian(config.sigma), config.epsilon);
}

inline double total_loss(double j_cap, double r, double tau) {
  return j_cap + tau * r;
}

}  // namespace vlmia
