#include "spikemusic/signal_model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "spikemusic/rng.hpp"

namespace spikemusic {

namespace {

constexpr double kPi = std::numbers::pi;

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw std::invalid_argument("ArrayConfig." + field + ": " + what);
}

void require_steering_args(int num_sensors, double steering_scale,
                           double phi) {
  if (num_sensors < 1) {
    throw std::invalid_argument("steering_vector: need at least one sensor");
  }
  if (!(steering_scale > 0.0)) {
    throw std::invalid_argument("steering_vector: steering scale must be > 0");
  }
  if (!(phi >= 0.0) || !(phi <= kPi / steering_scale)) {
    std::ostringstream os;
    os << "steering_vector: phi = " << phi << " outside [0, pi/D] = [0, "
       << kPi / steering_scale << "]";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

void ArrayConfig::validate() const {
  if (num_sensors < 1) invalid("num_sensors", "must be >= 1");
  if (num_snapshots < num_sensors) {
    invalid("num_snapshots", "must be >= num_sensors");
  }
  if (!(steering_scale > 0.0) || !std::isfinite(steering_scale)) {
    invalid("steering_scale", "must be positive and finite");
  }
  if (angles.size() != powers.size()) {
    invalid("powers", "must have one entry per angle");
  }
  if (num_sources() > num_sensors) {
    invalid("angles", "more sources than sensors");
  }
  const double domain = kPi / steering_scale;
  std::set<double> seen;
  for (double phi : angles) {
    if (!(phi > 0.0) || !(phi < domain)) {
      invalid("angles", "must lie strictly inside (0, pi/D)");
    }
    if (!seen.insert(phi).second) invalid("angles", "must be distinct");
  }
  for (std::size_t k = 0; k < powers.size(); ++k) {
    if (!(powers[k] > 0.0) || !std::isfinite(powers[k])) {
      invalid("powers", "must be positive and finite");
    }
    if (k > 0 && powers[k] > powers[k - 1]) {
      invalid("powers", "must be sorted non-increasing");
    }
  }
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    invalid("noise_scale", "must be >= 0 and finite");
  }
}

Eigen::VectorXcd steering_vector(int num_sensors, double steering_scale,
                                 double phi) {
  require_steering_args(num_sensors, steering_scale, phi);
  Eigen::VectorXcd b(num_sensors);
  const double scale = 1.0 / std::sqrt(static_cast<double>(num_sensors));
  for (int l = 0; l < num_sensors; ++l) {
    b[l] = std::polar(scale, -steering_scale * l * phi);
  }
  return b;
}

Eigen::VectorXcd steering_derivative(int num_sensors, double steering_scale,
                                     double phi) {
  Eigen::VectorXcd b = steering_vector(num_sensors, steering_scale, phi);
  for (int l = 0; l < num_sensors; ++l) {
    b[l] *= std::complex<double>(0.0, -steering_scale * l);
  }
  return b;
}

Eigen::VectorXcd steering_second_derivative(int num_sensors,
                                            double steering_scale,
                                            double phi) {
  Eigen::VectorXcd b = steering_vector(num_sensors, steering_scale, phi);
  for (int l = 0; l < num_sensors; ++l) {
    const double dl = steering_scale * l;
    b[l] *= -dl * dl;
  }
  return b;
}

std::complex<double> dirichlet_kernel(int length, double t) {
  if (length < 1) {
    throw std::invalid_argument("dirichlet_kernel: need length >= 1");
  }
  if (!(t >= -0.5) || !(t <= 0.5)) {
    throw std::invalid_argument("dirichlet_kernel: t outside [-1/2, 1/2]");
  }
  if (std::abs(t) * length < 1e-8) {
    // Closed form is 0/0 at t = 0; the sum is short-circuited here and exact.
    std::complex<double> acc(0.0, 0.0);
    for (int k = 0; k < length; ++k) {
      acc += std::polar(1.0, -2.0 * kPi * k * t);
    }
    return acc / static_cast<double>(length);
  }
  const double ratio =
      std::sin(length * kPi * t) / (length * std::sin(kPi * t));
  return std::polar(ratio, -kPi * (length - 1) * t);
}

Eigen::MatrixXcd steering_matrix(const ArrayConfig& config) {
  config.validate();
  Eigen::MatrixXcd b(config.num_sensors, config.num_sources());
  for (int k = 0; k < config.num_sources(); ++k) {
    b.col(k) = steering_vector(config.num_sensors, config.steering_scale,
                               config.angles[k]);
  }
  return b;
}

Eigen::MatrixXcd build_signal_matrix(const ArrayConfig& config) {
  config.validate();
  const int n = config.num_snapshots;
  const int r = config.num_sources();
  Eigen::MatrixXcd s(n, r);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < r; ++k) {
    const double omega = std::sqrt(config.powers[k]);
    for (int j = 0; j < n; ++j) {
      s(j, k) = std::polar(omega * scale, -2.0 * kPi * j * k / n);
    }
  }
  return s;
}

Eigen::MatrixXcd generate_noise(int num_sensors, int num_snapshots,
                                std::uint64_t seed) {
  if (num_sensors < 1 || num_snapshots < 1) {
    throw std::invalid_argument("generate_noise: dimensions must be >= 1");
  }
  GaussianSampler sampler(seed);
  const double sd = 1.0 / std::sqrt(2.0 * num_snapshots);
  Eigen::MatrixXcd x(num_sensors, num_snapshots);
  for (int i = 0; i < num_sensors; ++i) {
    for (int j = 0; j < num_snapshots; ++j) {
      const double re = sampler.next();
      const double im = sampler.next();
      x(i, j) = std::complex<double>(sd * re, sd * im);
    }
  }
  return x;
}

Observation assemble_observation(const ArrayConfig& config,
                                 std::uint64_t seed) {
  config.validate();
  Observation obs;
  obs.seed = seed;
  if (config.num_sources() > 0) {
    obs.signal = steering_matrix(config) * build_signal_matrix(config).adjoint();
  } else {
    obs.signal =
        Eigen::MatrixXcd::Zero(config.num_sensors, config.num_snapshots);
  }
  obs.noise = config.noise_scale *
              generate_noise(config.num_sensors, config.num_snapshots, seed);
  obs.sigma = obs.noise + obs.signal;
  return obs;
}

std::vector<std::string> dump_observation(const Observation& observation,
                                          const std::string& stem) {
  if constexpr (std::endian::native != std::endian::little) {
    throw std::runtime_error(
        "dump_observation: the dump format is little-endian only");
  }
  const auto write_matrix = [](const Eigen::MatrixXcd& m,
                               const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    std::vector<double> row(2 * m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        row[2 * j] = m(i, j).real();
        row[2 * j + 1] = m(i, j).imag();
      }
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
  };

  std::vector<std::string> paths = {stem + "_sigma.bin", stem + "_signal.bin",
                                    stem + "_noise.bin", stem + "_meta.json"};
  write_matrix(observation.sigma, paths[0]);
  write_matrix(observation.signal, paths[1]);
  write_matrix(observation.noise, paths[2]);

  nlohmann::ordered_json meta;
  meta["format"] =
      "row-major, little-endian float64, interleaved re/im per entry";
  meta["num_sensors"] = observation.sigma.rows();
  meta["num_snapshots"] = observation.sigma.cols();
  meta["seed"] = observation.seed;
  meta["matrices"] = {{"sigma", paths[0]},
                      {"signal", paths[1]},
                      {"noise", paths[2]}};
  std::ofstream meta_out(paths[3], std::ios::trunc);
  if (!meta_out) throw std::runtime_error("cannot write " + paths[3]);
  meta_out << meta.dump(2) << '\n';
  if (!meta_out) throw std::runtime_error("write failed: " + paths[3]);
  return paths;
}

}  // namespace spikemusic
