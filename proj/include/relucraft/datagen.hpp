#pragma once

// Synthetic regression datasets. Inputs are i.i.d. uniform on a box; the
// same (generator, parameters, seed) always gives the same bytes.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace relucraft::datagen {

struct Dataset {
  int dim = 0;
  std::vector<double> x;  // row-major, size() * dim
  std::vector<double> y;
  std::optional<std::vector<double>> y_clean;  // noiseless targets when noise was added
  nlohmann::json meta;                         // generator, parameters, seed, domain

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, static_cast<std::size_t>(dim)}; }
  // Throws InvalidInput if sizes disagree.
  void check() const;
};

// sum_{j<=10} x_j^2 on [-100,100]^10.
Dataset gen_square_feature(std::size_t m, std::uint64_t seed);

// sum_{j<=k} x_j^2 + sum_{j>k} x_j on [-100,100]^10, 2 <= k <= 9.
Dataset gen_partial_radial(std::size_t m, int k, std::uint64_t seed);

// sin(t)/t with t = |x|^2 (1 at t = 0) on [-1,1]^2, plus N(0, sigma2) noise.
Dataset gen_radial_noisy(std::size_t m, double sigma2, std::uint64_t seed);
double radial_clean(double x1, double x2);

enum class LogBase { kNatural, kTen };
struct Range {
  double lo = 0.0, hi = 1.0;
};
// exp(1.2655 + 0.2089 M - 0.0011 d - 0.2451 log(d + 2.1502 M)); inputs (M, d).
double mmi(double magnitude, double distance, LogBase base = LogBase::kNatural);
Dataset gen_mmi(std::size_t m, std::uint64_t seed, Range magnitude = {4.0, 8.0}, Range distance = {1.0, 200.0},
                LogBase base = LogBase::kNatural);

// Named generator with JSON parameters: square_feature, partial_radial {k},
// radial_noisy {sigma2}, mmi {magnitude:[lo,hi], distance:[lo,hi], log:"e"|"10"}.
Dataset generate(const std::string& name, std::size_t m, std::uint64_t seed, const nlohmann::json& params = {});

// Header x1..xd,y[,y_clean]; doubles at full round-trip precision.
void write_csv(std::ostream& os, const Dataset& d);
// Reads the same layout back (meta is left empty).
Dataset read_csv(std::istream& is);

}  // namespace relucraft::datagen
