#ifndef SPDE_TUMOR_ENSEMBLE_HPP
#define SPDE_TUMOR_ENSEMBLE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "spde_tumor/assembly.hpp"
#include "spde_tumor/mesh.hpp"
#include "spde_tumor/noise.hpp"
#include "spde_tumor/postproc.hpp"
#include "spde_tumor/stepper.hpp"

namespace spde_tumor {

/// Tumor volume, nutrient volume and the length of the phi = 1/2 contour.
inline std::vector<QoI> default_qois(const Grid& grid) {
  auto mass = std::make_shared<SparseMatrix>(assemble_mass(grid));
  return {
      {"tumor_volume", [grid, mass](const State& s) { return field_integral(grid, *mass, s.phi); }},
      {"nutrient_volume", [grid, mass](const State& s) { return field_integral(grid, *mass, s.sigma); }},
      {"tumor_perimeter", [grid](const State& s) { return contour_perimeter(grid, s.phi, 0.5); }},
  };
}

class EnsembleError : public std::runtime_error {
 public:
  EnsembleError(const std::string& what, std::size_t sample, std::size_t step)
      : std::runtime_error("sample " + std::to_string(sample) + ", step " + std::to_string(step) + ": " + what),
        sample_(sample),
        step_(step) {}
  std::size_t sample() const { return sample_; }
  std::size_t step() const { return step_; }

 private:
  std::size_t sample_, step_;
};

struct EnsembleResult {
  std::vector<double> times;
  std::vector<std::string> qoi_names;
  std::vector<std::uint64_t> seeds;
  // samples[s][t][q]
  std::vector<std::vector<std::vector<double>>> samples;
  // mean[t][q], std[t][q]
  std::vector<std::vector<double>> mean, std;

  std::size_t num_samples() const { return samples.size(); }

  double sample(std::size_t s, std::size_t t, std::size_t q) const { return samples[s][t][q]; }

  std::size_t qoi_index(const std::string& name) const {
    const auto it = std::find(qoi_names.begin(), qoi_names.end(), name);
    if (it == qoi_names.end()) throw std::out_of_range("EnsembleResult: unknown QoI " + name);
    return static_cast<std::size_t>(it - qoi_names.begin());
  }
};

/// Mean and unbiased (n-1) standard deviation, accumulated in sample order.
/// Deviations are taken from the first sample so equal samples give std 0.
inline void compute_statistics(EnsembleResult& r) {
  const std::size_t ns = r.samples.size();
  if (ns < 2) throw std::invalid_argument("compute_statistics: need at least two samples");
  const std::size_t nt = r.times.size();
  const std::size_t nq = r.qoi_names.size();
  r.mean.assign(nt, std::vector<double>(nq, 0.0));
  r.std.assign(nt, std::vector<double>(nq, 0.0));
  const double count = static_cast<double>(ns);
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t q = 0; q < nq; ++q) {
      const double x0 = r.samples[0][t][q];
      double shift = 0.0;
      for (std::size_t s = 0; s < ns; ++s) shift += r.samples[s][t][q] - x0;
      shift /= count;
      double ss = 0.0;
      for (std::size_t s = 0; s < ns; ++s) {
        const double d = r.samples[s][t][q] - x0 - shift;
        ss += d * d;
      }
      r.mean[t][q] = x0 + shift;
      r.std[t][q] = std::sqrt(ss / (count - 1.0));
    }
}

struct EnsembleOptions {
  std::size_t threads = 0;  // 0: hardware concurrency
  std::size_t qoi_every = 1;
  bool force_same_seed = false;  // debug: every sample uses derive_sample_seed(base, 0)
  /// Optional per-sample QoI factory; defaults to default_qois.
  std::function<std::vector<QoI>(const Grid&)> qois;
};

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs `count` independent jobs on a pool; job i writes only its own slot.
/// The first failure (lowest index) is rethrown after all workers join.
inline void parallel_for_samples(std::size_t count, std::size_t threads,
                                 const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t nthreads = std::min(resolve_threads(threads), std::max<std::size_t>(count, 1));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline EnsembleResult run_ensemble(const Grid& grid, const ModelParams& params, std::size_t n_samples,
                                   std::uint64_t base_seed, const EnsembleOptions& options = {}) {
  if (n_samples < 2) throw std::invalid_argument("run_ensemble: n_samples must be at least 2");
  params.validate();
  EnsembleResult r;
  r.seeds.resize(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s)
    r.seeds[s] = derive_sample_seed(base_seed, options.force_same_seed ? 0 : s);

  std::vector<Trajectory> runs(n_samples);
  parallel_for_samples(n_samples, options.threads, [&](std::size_t s) {
    RunOptions ro;
    ro.qois = options.qois ? options.qois(grid) : default_qois(grid);
    ro.qoi_every = options.qoi_every;
    try {
      runs[s] = run_simulation(grid, params, r.seeds[s], ro);
    } catch (const StepError& e) {
      throw EnsembleError(e.what(), s, e.step());
    } catch (const NonConvergence& e) {
      throw EnsembleError(e.what(), s, 0);  // initial chemical potential solve
    }
  });

  r.times = runs.front().times;
  r.qoi_names = runs.front().qoi_names;
  r.samples.resize(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) r.samples[s] = std::move(runs[s].values);
  compute_statistics(r);
  return r;
}

/// FNV-1a over the raw bits of a sequence of doubles.
class BitHash {
 public:
  void add(std::span<const double> v) {
    for (double d : v) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h_ ^= (bits >> (8 * b)) & 0xFFu;
        h_ *= 0x100000001B3ULL;
      }
    }
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

struct SweepMember {
  double nu = 0.0;
  Trajectory trajectory;
  std::uint64_t noise_hash = 0;  // hash of the raw N(0, dt) increments consumed
  std::vector<State> snapshots;
  std::vector<double> snapshot_times;
};

struct SweepOptions {
  std::size_t threads = 0;
  std::size_t qoi_every = 1;
  std::vector<double> snapshot_times;
  /// Called per member and step with the raw increments (e.g. CSV dump).
  std::function<void(std::size_t member, std::size_t step, const StepNoise&)> on_noise;
};

/// Same seed for every noise level: the Gaussian draws are identical across
/// members, only the amplitude nu changes.
inline std::vector<SweepMember> run_seed_sweep(const Grid& grid, const ModelParams& base,
                                               const std::vector<double>& nu_list, std::uint64_t seed,
                                               const SweepOptions& options = {}) {
  if (nu_list.empty()) throw std::invalid_argument("run_seed_sweep: nu_list must not be empty");
  std::vector<SweepMember> out(nu_list.size());
  parallel_for_samples(nu_list.size(), options.threads, [&](std::size_t i) {
    ModelParams p = base;
    p.noise.nu = nu_list[i];
    SweepMember& m = out[i];
    m.nu = nu_list[i];
    BitHash hash;
    std::vector<std::size_t> snap_steps;
    for (double t : options.snapshot_times) snap_steps.push_back(static_cast<std::size_t>(std::llround(t / p.dt)));
    Observers obs;
    obs.on_noise = [&](std::size_t step, const StepNoise& w) {
      hash.add(w.xi_phi);
      hash.add(w.xi_sigma);
      if (options.on_noise) options.on_noise(i, step, w);
    };
    obs.on_state = [&](std::size_t step, const State& s) {
      if (std::find(snap_steps.begin(), snap_steps.end(), step) != snap_steps.end()) {
        m.snapshots.push_back(s);
        m.snapshot_times.push_back(s.t);
      }
    };
    RunOptions ro;
    ro.qois = default_qois(grid);
    ro.qoi_every = options.qoi_every;
    m.trajectory = run_simulation(grid, p, seed, ro, obs);
    m.noise_hash = hash.value();
  });
  return out;
}

}  // namespace spde_tumor

#endif  // SPDE_TUMOR_ENSEMBLE_HPP
