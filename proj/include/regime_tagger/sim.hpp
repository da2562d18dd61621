#pragma once

// Fixed-step integrators and the built-in test systems (stochastic Hopf
// normal form with drifting parameter, Lorenz-63).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "regime_tagger/error.hpp"
#include "regime_tagger/rng.hpp"

namespace regime_tagger::sim {

/// Right-hand side of an autonomous or time-dependent ODE. Parameters are
/// bound into the callable.
struct VectorField {
  using Eval = std::function<void(std::span<const double> state, double t, std::span<double> out)>;

  std::size_t dim = 0;
  Eval eval;

  [[nodiscard]] std::vector<double> operator()(std::span<const double> state, double t) const {
    std::vector<double> out(dim);
    eval(state, t, out);
    return out;
  }
};

/// Additive-noise SDE dx = f(x, t) dt + diag(noise) dW.
struct SdeSpec {
  VectorField drift;
  std::vector<double> noise_intensity;
};

/// Uniformly sampled orbit. States are stored row-major, one row per sample.
class Trajectory {
 public:
  Trajectory(std::size_t dim, double t0, double step, std::vector<double> data,
             std::optional<std::uint64_t> seed = std::nullopt)
      : dim_(dim), t0_(t0), step_(step), data_(std::move(data)), seed_(seed) {
    if (dim_ == 0 || data_.size() % dim_ != 0) throw ConfigError("trajectory: bad state buffer");
    if (size() < 2) throw ConfigError("trajectory: needs at least 2 samples");
  }

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size() / dim_; }
  [[nodiscard]] double step() const noexcept { return step_; }
  [[nodiscard]] double time(std::size_t i) const noexcept { return t0_ + static_cast<double>(i) * step_; }
  [[nodiscard]] std::span<const double> state(std::size_t i) const noexcept {
    return {data_.data() + i * dim_, dim_};
  }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
  [[nodiscard]] std::optional<std::uint64_t> seed() const noexcept { return seed_; }

  [[nodiscard]] std::vector<double> times() const {
    std::vector<double> t(size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = time(i);
    return t;
  }

  /// Drops every sample with time < t_cut.
  [[nodiscard]] Trajectory drop_before(double t_cut) const {
    std::size_t first = 0;
    while (first < size() && time(first) < t_cut) ++first;
    std::vector<double> rest(data_.begin() + static_cast<std::ptrdiff_t>(first * dim_), data_.end());
    return Trajectory(dim_, time(first), step_, std::move(rest), seed_);
  }

 private:
  std::size_t dim_;
  double t0_;
  double step_;
  std::vector<double> data_;
  std::optional<std::uint64_t> seed_;
};

namespace detail {

inline std::size_t step_count(double t0, double t1, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("integrator: dt must be positive");
  if (!(t1 > t0)) throw ConfigError("integrator: t1 must exceed t0");
  const double ratio = (t1 - t0) / dt;
  // Absorb representation error so that (1, 1e-3) gives 1000 steps, not 1001.
  return static_cast<std::size_t>(std::ceil(ratio - 1e-9 * ratio));
}

inline void check_finite(std::span<const double> x, std::size_t step) {
  for (double v : x) {
    if (!std::isfinite(v)) throw DivergenceError(step, "non-finite state");
  }
}

inline void check_inputs(const VectorField& field, std::span<const double> x0, std::size_t record_every) {
  if (field.dim == 0 || !field.eval) throw ConfigError("integrator: empty vector field");
  if (x0.size() != field.dim) throw ConfigError("integrator: initial state has wrong dimension");
  if (record_every == 0) throw ConfigError("integrator: record_every must be >= 1");
  check_finite(x0, 0);
}

}  // namespace detail

/// Classical fourth-order Runge-Kutta with fixed step dt. Every
/// `record_every`-th state is kept, so the returned trajectory has sampling
/// interval dt * record_every.
inline Trajectory rk4_integrate(const VectorField& field, std::span<const double> x0, double t0, double t1,
                                double dt, std::size_t record_every = 1) {
  detail::check_inputs(field, x0, record_every);
  const std::size_t steps = detail::step_count(t0, t1, dt);
  const std::size_t n = field.dim;

  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  std::vector<double> out;
  out.reserve((steps / record_every + 1) * n);
  out.insert(out.end(), x.begin(), x.end());

  const double half = 0.5 * dt;
  const double sixth = dt / 6.0;
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = t0 + static_cast<double>(s) * dt;
    field.eval(x, t, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + half * k1[i];
    field.eval(tmp, t + half, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + half * k2[i];
    field.eval(tmp, t + half, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
    field.eval(tmp, t + dt, k4);
    for (std::size_t i = 0; i < n; ++i) x[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    detail::check_finite(x, s + 1);
    if ((s + 1) % record_every == 0) out.insert(out.end(), x.begin(), x.end());
  }
  return Trajectory(n, t0, dt * static_cast<double>(record_every), std::move(out));
}

/// Euler-Maruyama for additive noise: x += f dt + sigma sqrt(dt) xi with one
/// standard normal xi per coordinate per step, drawn in coordinate order.
inline Trajectory euler_maruyama(const SdeSpec& spec, std::span<const double> x0, double t0, double t1, double dt,
                                 std::uint64_t seed, std::size_t record_every = 1) {
  detail::check_inputs(spec.drift, x0, record_every);
  const std::size_t n = spec.drift.dim;
  if (spec.noise_intensity.size() != n) throw ConfigError("euler_maruyama: noise has wrong dimension");
  for (double s : spec.noise_intensity) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("euler_maruyama: noise intensity must be >= 0");
  }
  const std::size_t steps = detail::step_count(t0, t1, dt);

  Rng rng(seed);
  const double sqrt_dt = std::sqrt(dt);
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> f(n);
  std::vector<double> out;
  out.reserve((steps / record_every + 1) * n);
  out.insert(out.end(), x.begin(), x.end());

  for (std::size_t s = 0; s < steps; ++s) {
    const double t = t0 + static_cast<double>(s) * dt;
    spec.drift.eval(x, t, f);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += f[i] * dt;
      if (spec.noise_intensity[i] != 0.0) x[i] += spec.noise_intensity[i] * sqrt_dt * rng.normal();
    }
    detail::check_finite(x, s + 1);
    if ((s + 1) % record_every == 0) out.insert(out.end(), x.begin(), x.end());
  }
  return Trajectory(n, t0, dt * static_cast<double>(record_every), std::move(out), seed);
}

/// Hopf oscillator with drifting parameter lambda(t) = lambda0 + epsilon t:
///   x' = lambda x - y - x y^2
///   y' = x + lambda y - y^3
inline VectorField hopf_field(double lambda0, double epsilon) {
  return {2, [lambda0, epsilon](std::span<const double> s, double t, std::span<double> out) {
            const double lambda = lambda0 + epsilon * t;
            const double x = s[0];
            const double y = s[1];
            out[0] = lambda * x - y - x * y * y;
            out[1] = x + lambda * y - y * y * y;
          }};
}

/// Lorenz-63. Writes sigma (y - x), x (rho - z) - y, x y - beta z.
inline VectorField lorenz_field(double sigma = 10.0, double rho = 28.0, double beta = 8.0 / 3.0) {
  return {3, [sigma, rho, beta](std::span<const double> s, double, std::span<double> out) {
            const double x = s[0];
            const double y = s[1];
            const double z = s[2];
            out[0] = sigma * (y - x);
            out[1] = x * (rho - z) - y;
            out[2] = x * y - beta * z;
          }};
}

/// Nontrivial Lorenz equilibria C+ and C- (exist for rho > 1).
inline std::pair<std::vector<double>, std::vector<double>> lorenz_equilibria(double rho, double beta = 8.0 / 3.0) {
  if (!(rho > 1.0)) throw ConfigError("lorenz_equilibria: requires rho > 1");
  const double a = std::sqrt(beta * (rho - 1.0));
  return {{a, a, rho - 1.0}, {-a, -a, rho - 1.0}};
}

}  // namespace regime_tagger::sim
