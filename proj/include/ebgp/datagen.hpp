#pragma once

// Synthetic manifold regression data (Swiss roll, Swiss roll + curve union,
// embedded circle), the additive Gaussian noise model, and a loader for
// rotation image sets stored as 8-bit grayscale PGM files.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ebgp/dataset.hpp"
#include "ebgp/error.hpp"
#include "ebgp/rng.hpp"

namespace ebgp {

inline constexpr double kPi = std::numbers::pi;

// Y = f* + sigma z, z iid N(0, 1) from Rng(seed).
inline Vector add_noise(const Eigen::Ref<const Vector>& f_star, double sigma, std::uint64_t seed) {
  detail::require(sigma >= 0.0, "noise level must be nonnegative");
  Vector Y = f_star;
  if (sigma == 0.0) return Y;
  Rng rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  for (Eigen::Index i = 0; i < Y.size(); ++i) Y(i) += sigma * z(rng);
  return Y;
}

// ---------------------------------------------------------------------------
// Swiss roll: X(u, v) = (u cos u, v, u sin u), u ~ U(pi, 9pi/2), v ~ U(0, 15).

inline double f_swiss(double u, double v) {
  const double a = (u - 3.5 * kPi) / (1.5 * kPi);
  return 4.0 * a * a + kPi / 45.0 * v;
}

// f_swiss evaluated at (sqrt(x1^2 + x3^2), x2) in pre-rescale coordinates.
inline double f_swiss_bar(double x1, double x2, double x3) { return f_swiss(std::hypot(x1, x3), x2); }

inline Eigen::Vector3d swiss_roll_point(double u, double v) {
  return {u * std::cos(u), v, u * std::sin(u)};
}

// (X1 + 15)/30, X2/15, (X3 + 15)/30
inline Eigen::Vector3d swiss_roll_rescale(const Eigen::Vector3d& x) {
  return {(x(0) + 15.0) / 30.0, x(1) / 15.0, (x(2) + 15.0) / 30.0};
}

inline Dataset gen_swiss_roll(std::size_t n, double sigma, std::uint64_t seed) {
  detail::require(n >= 1, "n must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> du(kPi, 4.5 * kPi), dv(0.0, 15.0);
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(n), 3);
  d.f_star.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double u = du(rng);
    const double v = dv(rng);
    const auto r = static_cast<Eigen::Index>(i);
    d.X.row(r) = swiss_roll_rescale(swiss_roll_point(u, v)).transpose();
    d.f_star(r) = f_swiss(u, v);
  }
  d.sigma = sigma;
  d.Y = add_noise(d.f_star, sigma, derive_seed(seed, 1));
  d.meta = {"swiss-roll", {{"sigma", sigma}, {"n", static_cast<double>(n)}}, seed, {}, ""};
  return d;
}

// ---------------------------------------------------------------------------
// Swiss roll union 1-D curve
// X(tau) = (7pi/2) (cos(pi tau) cos(4 pi tau), 1 + cos(pi tau) sin(4 pi tau), sin(pi tau)),
// tau ~ U(-1, 1); f* on the curve is f_swiss_bar.

inline Eigen::Vector3d mixed_curve_point(double tau) {
  const double c = 3.5 * kPi;
  return {c * std::cos(kPi * tau) * std::cos(4.0 * kPi * tau), c * (1.0 + std::cos(kPi * tau) * std::sin(4.0 * kPi * tau)),
          c * std::sin(kPi * tau)};
}

// The curve's second coordinate reaches 7pi, so X2 is divided by 7pi (for both
// components) instead of 15 to stay inside the unit cube.
inline Eigen::Vector3d mixed_union_rescale(const Eigen::Vector3d& x) {
  return {(x(0) + 15.0) / 30.0, x(1) / (7.0 * kPi), (x(2) + 15.0) / 30.0};
}

inline Dataset gen_mixed_union(std::size_t n, double sigma, std::uint64_t seed) {
  detail::require(n >= 2, "n must be at least 2");
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> du(kPi, 4.5 * kPi), dv(0.0, 15.0), dtau(-1.0, 1.0);
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(n), 3);
  d.f_star.resize(static_cast<Eigen::Index>(n));
  d.meta.component.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    Eigen::Vector3d x;
    if (coin(rng)) {
      const double u = du(rng);
      const double v = dv(rng);
      x = swiss_roll_point(u, v);
      d.f_star(r) = f_swiss(u, v);
      d.meta.component[i] = 2;
    } else {
      x = mixed_curve_point(dtau(rng));
      d.f_star(r) = f_swiss_bar(x(0), x(1), x(2));
      d.meta.component[i] = 1;
    }
    d.X.row(r) = mixed_union_rescale(x).transpose();
  }
  d.sigma = sigma;
  d.Y = add_noise(d.f_star, sigma, derive_seed(seed, 1));
  d.meta.generator = "mixed-union";
  d.meta.params = {{"sigma", sigma}, {"n", static_cast<double>(n)}};
  d.meta.seed = seed;
  d.meta.note =
      "component 2 = swiss roll surface, 1 = curve; the components intersect; X2 rescaled by 1/(7 pi)";
  return d;
}

// ---------------------------------------------------------------------------
// Circle of the given radius in the first two coordinates, centred at
// (0.5, ..., 0.5) in [0,1]^D.

struct CircleOptions {
  bool equispaced = false;  // theta_i = 2 pi i / n instead of uniform draws
  std::function<double(double)> f_star = [](double theta) { return std::cos(theta); };
};

inline double circle_circumference(double radius) { return 2.0 * kPi * radius; }

inline Dataset gen_circle(std::size_t n, double radius, std::size_t D, double sigma, std::uint64_t seed,
                          const CircleOptions& opt = {}) {
  detail::require(n >= 1, "n must be positive");
  detail::require(D >= 2, "circle needs ambient dimension D >= 2");
  detail::require(radius > 0.0, "radius must be positive");
  detail::require(radius <= 0.5, "radius too large for the unit cube");
  Rng rng(seed);
  std::uniform_real_distribution<double> dtheta(0.0, 2.0 * kPi);
  Dataset d;
  d.X = Matrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(D), 0.5);
  d.f_star.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double th = opt.equispaced ? 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n) : dtheta(rng);
    const auto r = static_cast<Eigen::Index>(i);
    d.X(r, 0) = 0.5 + radius * std::cos(th);
    d.X(r, 1) = 0.5 + radius * std::sin(th);
    d.f_star(r) = opt.f_star(th);
  }
  d.sigma = sigma;
  d.Y = add_noise(d.f_star, sigma, derive_seed(seed, 1));
  d.meta = {"circle",
            {{"sigma", sigma}, {"radius", radius}, {"D", static_cast<double>(D)}, {"n", static_cast<double>(n)},
             {"density", 1.0 / circle_circumference(radius)}},
            seed,
            {},
            ""};
  return d;
}

// ---------------------------------------------------------------------------
// Rotation image sets

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;  // row-major, scaled to [0, 1]
};

// Binary (P5) or ASCII (P2) PGM with maxval <= 255.
inline GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  detail::require<InvalidInput>(in.good(), ("cannot open image " + path.string()).c_str());
  auto token = [&in]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  const std::string magic = token();
  detail::require<InvalidInput>(magic == "P5" || magic == "P2", ("not a grayscale PGM: " + path.string()).c_str());
  GrayImage img;
  std::size_t maxval = 0;
  try {
    img.width = std::stoul(token());
    img.height = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::logic_error&) {
    throw InvalidInput("malformed PGM header: " + path.string());
  }
  detail::require<InvalidInput>(img.width > 0 && img.height > 0 && maxval > 0 && maxval <= 255,
                                ("unsupported PGM (need 8-bit): " + path.string()).c_str());
  const std::size_t count = img.width * img.height;
  img.pixels.resize(count);
  if (magic == "P5") {
    std::vector<unsigned char> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    detail::require<InvalidInput>(static_cast<std::size_t>(in.gcount()) == count, ("truncated PGM: " + path.string()).c_str());
    for (std::size_t i = 0; i < count; ++i) img.pixels[i] = raw[i] / static_cast<double>(maxval);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const std::string tok = token();
      detail::require<InvalidInput>(!tok.empty(), ("truncated PGM: " + path.string()).c_str());
      img.pixels[i] = std::stod(tok) / static_cast<double>(maxval);
    }
  }
  return img;
}

struct ImageResponseSpec {
  double sigma = 0.1;
  std::uint64_t seed = 0;
  // Without a manifest, files named <index>.pgm get theta = 2 pi index / count.
  bool angles_from_index = false;
};

// Directory layout: manifest.csv with header "filename,theta_radians" and one
// 8-bit grayscale PGM per row. Each image becomes a row of pixel values in
// [0,1]; f* = cos(theta).
inline Dataset load_image_manifold(const std::filesystem::path& dir, const ImageResponseSpec& spec = {}) {
  namespace fs = std::filesystem;
  detail::require<InvalidInput>(fs::is_directory(dir), ("not a directory: " + dir.string()).c_str());
  std::vector<std::pair<fs::path, double>> entries;
  const fs::path manifest = dir / "manifest.csv";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (first && line.rfind("filename", 0) == 0) {
        first = false;
        continue;
      }
      first = false;
      const auto comma = line.find(',');
      detail::require<InvalidInput>(comma != std::string::npos, "manifest row missing theta_radians");
      const std::string theta = line.substr(comma + 1);
      detail::require<InvalidInput>(!theta.empty(), "manifest row missing theta_radians");
      try {
        entries.emplace_back(dir / line.substr(0, comma), std::stod(theta));
      } catch (const std::logic_error&) {
        throw InvalidInput("manifest theta is not numeric: " + line);
      }
    }
  } else {
    detail::require<InvalidInput>(spec.angles_from_index, "image directory has no manifest.csv with angles");
    std::vector<std::pair<long, fs::path>> indexed;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() != ".pgm") continue;
      const std::string stem = e.path().stem().string();
      detail::require<InvalidInput>(!stem.empty() && std::all_of(stem.begin(), stem.end(), ::isdigit),
                                    "image names must be integer indices when no manifest is present");
      indexed.emplace_back(std::stol(stem), e.path());
    }
    std::sort(indexed.begin(), indexed.end());
    for (const auto& [idx, p] : indexed)
      entries.emplace_back(p, 2.0 * kPi * static_cast<double>(idx) / static_cast<double>(indexed.size()));
  }
  detail::require<InvalidInput>(!entries.empty(), "image set is empty");
  Dataset d;
  d.f_star.resize(static_cast<Eigen::Index>(entries.size()));
  std::size_t width = 0, height = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const GrayImage img = read_pgm(entries[i].first);
    if (i == 0) {
      width = img.width;
      height = img.height;
      d.X.resize(static_cast<Eigen::Index>(entries.size()), static_cast<Eigen::Index>(width * height));
    }
    detail::require<InvalidInput>(img.width == width && img.height == height, "images differ in size");
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t p = 0; p < img.pixels.size(); ++p) d.X(r, static_cast<Eigen::Index>(p)) = img.pixels[p];
    d.f_star(r) = std::cos(entries[i].second);
  }
  d.sigma = spec.sigma;
  d.Y = add_noise(d.f_star, spec.sigma, derive_seed(spec.seed, 1));
  d.meta = {"image-manifold",
            {{"sigma", spec.sigma}, {"width", static_cast<double>(width)}, {"height", static_cast<double>(height)}},
            spec.seed,
            {},
            "pixels scaled to [0,1] by 1/maxval"};
  return d;
}

}  // namespace ebgp
