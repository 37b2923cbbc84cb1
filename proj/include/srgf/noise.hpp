#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "srgf/matrix.hpp"
#include "srgf/random.hpp"

namespace srgf {

/// Source of the stochastic inputs of a forward pass: logistic noise for the
/// Gumbel-Softmax relaxation and dropout masks.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;

  /// log(delta) - log(1 - delta) with delta ~ Uniform(0, 1), elementwise.
  virtual Matrix logistic_noise(std::size_t rows, std::size_t cols) = 0;
  /// Inverted-dropout mask: 0 with probability p, otherwise 1 / (1 - p).
  virtual Matrix dropout_mask(std::size_t rows, std::size_t cols, double p) = 0;
  /// False when dropout should be skipped entirely.
  virtual bool training() const = 0;
};

/// Evaluation pass: delta fixed at 0.5 (zero noise) and no dropout.
class ExpectedNoise final : public NoiseSource {
 public:
  Matrix logistic_noise(std::size_t rows, std::size_t cols) override { return Matrix(rows, cols); }
  Matrix dropout_mask(std::size_t rows, std::size_t cols, double) override { return Matrix(rows, cols, 1.0); }
  bool training() const override { return false; }
};

/// Training pass drawing from a seeded generator. Two instances built from
/// the same seed replay the same draws, which is how noise is frozen for
/// gradient checks.
class SampledNoise final : public NoiseSource {
 public:
  explicit SampledNoise(std::uint64_t seed) : rng_(seed) {}

  Matrix logistic_noise(std::size_t rows, std::size_t cols) override {
    Matrix m(rows, cols);
    for (double& v : m.values()) {
      const double delta = rng_.uniform_open();
      v = std::log(delta) - std::log1p(-delta);
    }
    return m;
  }

  Matrix dropout_mask(std::size_t rows, std::size_t cols, double p) override {
    Matrix m(rows, cols, 1.0);
    if (p <= 0.0) return m;
    const double keep_scale = 1.0 / (1.0 - p);
    for (double& v : m.values()) v = rng_.uniform() < p ? 0.0 : keep_scale;
    return m;
  }

  bool training() const override { return true; }

 private:
  Rng rng_;
};

}  // namespace srgf
