#include "relucraft/datagen.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "relucraft/error.hpp"

namespace relucraft::datagen {

void Dataset::check() const {
  if (dim < 1) throw InvalidInput("dataset dimension must be positive");
  if (x.size() != y.size() * static_cast<std::size_t>(dim)) throw InvalidInput("dataset inputs and targets disagree");
  if (y_clean && y_clean->size() != y.size()) throw InvalidInput("clean targets have the wrong length");
}

namespace {

Dataset uniform_box(std::size_t m, int dim, double lo, double hi, std::mt19937_64& rng) {
  if (m < 1) throw InvalidInput("dataset needs at least one sample");
  Dataset d;
  d.dim = dim;
  d.x.resize(m * static_cast<std::size_t>(dim));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : d.x) v = u(rng);
  d.y.resize(m);
  d.meta["domain"] = {lo, hi};
  return d;
}

}  // namespace

Dataset gen_square_feature(std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d = uniform_box(m, 10, -100.0, 100.0, rng);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (double v : d.row(i)) s += v * v;
    d.y[i] = s;
  }
  d.meta["generator"] = "square_feature";
  d.meta["seed"] = seed;
  return d;
}

Dataset gen_partial_radial(std::size_t m, int k, std::uint64_t seed) {
  if (k < 2 || k > 9) throw InvalidInput("partial radial order k must lie in 2..9");
  std::mt19937_64 rng(seed);
  Dataset d = uniform_box(m, 10, -100.0, 100.0, rng);
  for (std::size_t i = 0; i < m; ++i) {
    const auto x = d.row(i);
    double s = 0.0;
    for (int j = 0; j < 10; ++j) s += j < k ? x[j] * x[j] : x[j];
    d.y[i] = s;
  }
  d.meta["generator"] = "partial_radial";
  d.meta["k"] = k;
  d.meta["seed"] = seed;
  return d;
}

double radial_clean(double x1, double x2) {
  const double t = x1 * x1 + x2 * x2;
  return t == 0.0 ? 1.0 : std::sin(t) / t;
}

Dataset gen_radial_noisy(std::size_t m, double sigma2, std::uint64_t seed) {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw InvalidInput("noise variance must be non-negative");
  std::mt19937_64 rng(seed);
  Dataset d = uniform_box(m, 2, -1.0, 1.0, rng);
  std::normal_distribution<double> noise(0.0, std::sqrt(sigma2));
  std::vector<double> clean(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto x = d.row(i);
    clean[i] = radial_clean(x[0], x[1]);
    d.y[i] = clean[i] + (sigma2 > 0.0 ? noise(rng) : 0.0);
  }
  d.y_clean = std::move(clean);
  d.meta["generator"] = "radial_noisy";
  d.meta["sigma2"] = sigma2;
  d.meta["seed"] = seed;
  return d;
}

double mmi(double magnitude, double distance, LogBase base) {
  const double arg = distance + 2.1502 * magnitude;
  if (!(arg > 0.0)) throw InvalidInput("MMI log argument must be positive");
  const double lg = base == LogBase::kNatural ? std::log(arg) : std::log10(arg);
  return std::exp(1.2655 + 0.2089 * magnitude - 0.0011 * distance - 0.2451 * lg);
}

Dataset gen_mmi(std::size_t m, std::uint64_t seed, Range magnitude, Range distance, LogBase base) {
  for (const Range& r : {magnitude, distance})
    if (!(r.lo > 0.0 && r.hi > r.lo)) throw InvalidInput("MMI ranges must be positive and increasing");
  if (m < 1) throw InvalidInput("dataset needs at least one sample");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> um(magnitude.lo, magnitude.hi), ud(distance.lo, distance.hi);
  Dataset d;
  d.dim = 2;
  d.x.resize(2 * m);
  d.y.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    d.x[2 * i] = um(rng);
    d.x[2 * i + 1] = ud(rng);
    d.y[i] = mmi(d.x[2 * i], d.x[2 * i + 1], base);
  }
  d.meta["generator"] = "mmi";
  d.meta["magnitude"] = {magnitude.lo, magnitude.hi};
  d.meta["distance"] = {distance.lo, distance.hi};
  d.meta["log"] = base == LogBase::kNatural ? "e" : "10";
  d.meta["seed"] = seed;
  return d;
}

Dataset generate(const std::string& name, std::size_t m, std::uint64_t seed, const nlohmann::json& params) {
  try {
    if (name == "square_feature") return gen_square_feature(m, seed);
    if (name == "partial_radial") return gen_partial_radial(m, params.value("k", 2), seed);
    if (name == "radial_noisy") return gen_radial_noisy(m, params.value("sigma2", 0.1), seed);
    if (name == "mmi") {
      Range mag{4.0, 8.0}, dist{1.0, 200.0};
      if (params.contains("magnitude")) mag = {params["magnitude"].at(0).get<double>(), params["magnitude"].at(1).get<double>()};
      if (params.contains("distance")) dist = {params["distance"].at(0).get<double>(), params["distance"].at(1).get<double>()};
      const std::string lg = params.value("log", std::string("e"));
      if (lg != "e" && lg != "10") throw InvalidInput("MMI log base must be \"e\" or \"10\"");
      return gen_mmi(m, seed, mag, dist, lg == "e" ? LogBase::kNatural : LogBase::kTen);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("generator parameters: ") + e.what());
  }
  throw InvalidInput("unknown generator '" + name + "'");
}

void write_csv(std::ostream& os, const Dataset& d) {
  d.check();
  for (int k = 0; k < d.dim; ++k) os << 'x' << k + 1 << ',';
  os << 'y';
  if (d.y_clean) os << ",y_clean";
  os << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (double v : d.row(i)) os << v << ',';
    os << d.y[i];
    if (d.y_clean) os << ',' << (*d.y_clean)[i];
    os << '\n';
  }
}

Dataset read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("empty dataset file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  Dataset d;
  const bool clean = !header.empty() && header.back() == "y_clean";
  d.dim = static_cast<int>(header.size()) - (clean ? 2 : 1);
  if (d.dim < 1 || header[static_cast<std::size_t>(d.dim)] != "y") throw InvalidInput("dataset header must be x1..xd,y[,y_clean]");
  if (clean) d.y_clean.emplace();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw InvalidInput("bad number in dataset: '" + cell + "'");
      }
    }
    if (row.size() != header.size()) throw InvalidInput("dataset row has the wrong number of fields");
    d.x.insert(d.x.end(), row.begin(), row.begin() + d.dim);
    d.y.push_back(row[static_cast<std::size_t>(d.dim)]);
    if (clean) d.y_clean->push_back(row.back());
  }
  d.check();
  return d;
}

}  // namespace relucraft::datagen
