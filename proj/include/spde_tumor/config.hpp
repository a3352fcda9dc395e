#ifndef SPDE_TUMOR_CONFIG_HPP
#define SPDE_TUMOR_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spde_tumor/stepper.hpp"

namespace spde_tumor {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class RunMode { Run, Ensemble, Sweep, Verify };

/// Everything that determines a run's outputs, plus two execution settings
/// (threads, out_dir) that are deliberately left out of the echo.
struct RunConfig {
  ModelParams params;
  std::size_t nx = 100, ny = 100;
  double lx = 1.0, ly = 1.0;
  std::size_t samples = 50;
  std::uint64_t seed = 2024;
  std::string run_name;  // empty: named after the mode
  std::vector<double> snapshot_times;  // empty: final time only
  std::size_t qoi_every = 1;
  RunMode mode = RunMode::Run;
  std::vector<double> sweep_nu = {0.0, 0.5, 1.0, 2.5};

  std::size_t threads = 0;
  std::string out_dir;

  Grid grid() const { return Grid(nx, ny, lx, ly); }
};

inline std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::Run: return "run";
    case RunMode::Ensemble: return "ensemble";
    case RunMode::Sweep: return "sweep";
    case RunMode::Verify: return "verify";
  }
  return "run";
}

inline std::string resolved_run_name(const RunConfig& c) {
  return c.run_name.empty() ? to_string(c.mode) : c.run_name;
}

namespace detail {

using json = nlohmann::json;

template <class E>
using EnumNames = std::vector<std::pair<E, const char*>>;

template <class E>
E enum_from(const json& v, const EnumNames<E>& names, const std::string& key) {
  if (!v.is_string()) throw ConfigError("key '" + key + "': expected a string");
  const auto s = v.get<std::string>();
  std::string allowed;
  for (const auto& [e, n] : names) {
    if (s == n) return e;
    allowed += (allowed.empty() ? "" : ", ") + std::string(n);
  }
  throw ConfigError("key '" + key + "': unknown value '" + s + "' (allowed: " + allowed + ")");
}

template <class E>
std::string enum_name(E e, const EnumNames<E>& names) {
  for (const auto& [v, n] : names)
    if (v == e) return n;
  return names.front().second;
}

inline const EnumNames<MobilityKind> kMobilityNames = {{MobilityKind::Constant, "constant"},
                                                       {MobilityKind::QuarticInterface, "quartic_interface"}};
inline const EnumNames<GrowthKind> kGrowthNames = {{GrowthKind::Logistic, "logistic"},
                                                   {GrowthKind::Gompertz, "gompertz"}};
inline const EnumNames<SigmaBoundary> kBoundaryNames = {{SigmaBoundary::DirichletConstant, "dirichlet"},
                                                        {SigmaBoundary::NeumannZero, "neumann"}};
inline const EnumNames<NoiseModes> kModeNames = {{NoiseModes::Nodal, "nodal"}, {NoiseModes::Cosine, "cosine"}};
inline const EnumNames<PotentialTreatment> kPotentialNames = {{PotentialTreatment::ConvexSplit, "convex_split"},
                                                              {PotentialTreatment::FullyExplicit, "explicit"}};
inline const EnumNames<NutrientCrossWeight> kCrossNames = {
    {NutrientCrossWeight::TumorMobility, "tumor_mobility"}, {NutrientCrossWeight::NutrientMobility, "nutrient_mobility"}};
inline const EnumNames<Coupling> kCouplingNames = {{Coupling::Monolithic, "monolithic"},
                                                   {Coupling::Decoupled, "decoupled"}};
inline const EnumNames<SolverKind> kSolverNames = {
    {SolverKind::SparseLU, "sparse_lu"}, {SolverKind::Gmres, "gmres"}, {SolverKind::DenseLU, "dense_lu"}};
inline const EnumNames<RunMode> kRunModeNames = {
    {RunMode::Run, "run"}, {RunMode::Ensemble, "ensemble"}, {RunMode::Sweep, "sweep"}, {RunMode::Verify, "verify"}};

inline double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("key '" + key + "': expected a number");
  return v.get<double>();
}

inline std::uint64_t as_count(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError("key '" + key + "': expected a nonnegative integer");
}

inline bool as_flag(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("key '" + key + "': expected true or false");
  return v.get<bool>();
}

inline std::vector<double> as_reals(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("key '" + key + "': expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(as_real(x, key));
  return out;
}

struct Field {
  std::function<void(RunConfig&, const json&, const std::string&)> set;
  std::function<json(const RunConfig&)> get;  // empty: not echoed
};

template <class E>
Field enum_field(E ModelParams::*member, const EnumNames<E>& names) {
  return {[member, &names](RunConfig& c, const json& v, const std::string& k) { c.params.*member = enum_from(v, names, k); },
          [member, &names](const RunConfig& c) { return json(enum_name(c.params.*member, names)); }};
}

inline Field real_field(double ModelParams::*member) {
  return {[member](RunConfig& c, const json& v, const std::string& k) { c.params.*member = as_real(v, k); },
          [member](const RunConfig& c) { return json(c.params.*member); }};
}

inline const std::map<std::string, Field>& config_fields() {
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
    f["epsilon"] = real_field(&ModelParams::epsilon);
    f["chi"] = real_field(&ModelParams::chi);
    f["alpha"] = real_field(&ModelParams::alpha);
    f["beta"] = real_field(&ModelParams::beta);
    f["delta"] = real_field(&ModelParams::delta);
    f["dt"] = real_field(&ModelParams::dt);
    f["t_end"] = real_field(&ModelParams::t_end);
    for (auto [name, member] : {std::pair{"m1", &ModelParams::m1}, std::pair{"m2", &ModelParams::m2}}) {
      f[std::string(name) + ".kind"] = {
          [member](RunConfig& c, const json& v, const std::string& k) { (c.params.*member).kind = enum_from(v, kMobilityNames, k); },
          [member](const RunConfig& c) { return json(enum_name((c.params.*member).kind, kMobilityNames)); }};
      f[std::string(name) + ".value"] = {
          [member](RunConfig& c, const json& v, const std::string& k) { (c.params.*member).value = as_real(v, k); },
          [member](const RunConfig& c) { return json((c.params.*member).value); }};
    }
    f["f.kind"] = {[](RunConfig& c, const json& v, const std::string& k) { c.params.f.kind = enum_from(v, kGrowthNames, k); },
                   [](const RunConfig& c) { return json(enum_name(c.params.f.kind, kGrowthNames)); }};
    f["potential.c_psi"] = {[](RunConfig& c, const json& v, const std::string& k) { c.params.potential.c_psi = as_real(v, k); },
                            [](const RunConfig& c) { return json(c.params.potential.c_psi); }};
    f["noise.nu"] = {[](RunConfig& c, const json& v, const std::string& k) { c.params.noise.nu = as_real(v, k); },
                     [](const RunConfig& c) { return json(c.params.noise.nu); }};
    f["noise.sigma_amp"] = {[](RunConfig& c, const json& v, const std::string& k) { c.params.noise.sigma_amp = as_real(v, k); },
                            [](const RunConfig& c) { return json(c.params.noise.sigma_amp); }};
    f["noise.q"] = {[](RunConfig& c, const json& v, const std::string& k) { c.params.noise.q = as_reals(v, k); },
                    [](const RunConfig& c) { return json(c.params.noise.q); }};
    f["noise.mass_project"] = {
        [](RunConfig& c, const json& v, const std::string& k) { c.params.noise.mass_project = as_flag(v, k); },
        [](const RunConfig& c) { return json(c.params.noise.mass_project); }};
    f["noise.modes"] = {[](RunConfig& c, const json& v, const std::string& k) { c.params.noise.modes = enum_from(v, kModeNames, k); },
                        [](const RunConfig& c) { return json(enum_name(c.params.noise.modes, kModeNames)); }};
    f["noise.cosine_decay"] = {
        [](RunConfig& c, const json& v, const std::string& k) { c.params.noise.cosine_decay = as_real(v, k); },
        [](const RunConfig& c) { return json(c.params.noise.cosine_decay); }};
    f["sigma_bc.kind"] = enum_field(&ModelParams::sigma_bc, kBoundaryNames);
    f["sigma_bc.value"] = real_field(&ModelParams::sigma_boundary_value);
    f["scheme.potential"] = enum_field(&ModelParams::potential_treatment, kPotentialNames);
    f["scheme.cross_weight"] = enum_field(&ModelParams::nutrient_cross_weight, kCrossNames);
    f["scheme.coupling"] = enum_field(&ModelParams::coupling, kCouplingNames);
    f["scheme.decoupling_tol"] = real_field(&ModelParams::decoupling_tol);
    f["scheme.decoupling_max_iter"] = {
        [](RunConfig& c, const json& v, const std::string& k) { c.params.decoupling_max_iter = as_count(v, k); },
        [](const RunConfig& c) { return json(c.params.decoupling_max_iter); }};
    f["scheme.lumped_mass"] = {[](RunConfig& c, const json& v, const std::string& k) { c.params.lumped_mass = as_flag(v, k); },
                               [](const RunConfig& c) { return json(c.params.lumped_mass); }};
    f["solver.kind"] = enum_field(&ModelParams::solver, kSolverNames);
    f["solver.tol"] = real_field(&ModelParams::solver_tol);
    f["solver.max_iter"] = {[](RunConfig& c, const json& v, const std::string& k) { c.params.solver_max_iter = as_count(v, k); },
                            [](const RunConfig& c) { return json(c.params.solver_max_iter); }};

    f["grid.nx"] = {[](RunConfig& c, const json& v, const std::string& k) { c.nx = as_count(v, k); },
                    [](const RunConfig& c) { return json(c.nx); }};
    f["grid.ny"] = {[](RunConfig& c, const json& v, const std::string& k) { c.ny = as_count(v, k); },
                    [](const RunConfig& c) { return json(c.ny); }};
    f["grid.lx"] = {[](RunConfig& c, const json& v, const std::string& k) { c.lx = as_real(v, k); },
                    [](const RunConfig& c) { return json(c.lx); }};
    f["grid.ly"] = {[](RunConfig& c, const json& v, const std::string& k) { c.ly = as_real(v, k); },
                    [](const RunConfig& c) { return json(c.ly); }};
    f["samples"] = {[](RunConfig& c, const json& v, const std::string& k) { c.samples = as_count(v, k); },
                    [](const RunConfig& c) { return json(c.samples); }};
    f["seed"] = {[](RunConfig& c, const json& v, const std::string& k) { c.seed = as_count(v, k); },
                 [](const RunConfig& c) { return json(c.seed); }};
    f["run_name"] = {[](RunConfig& c, const json& v, const std::string& k) {
                       if (!v.is_string()) throw ConfigError("key '" + k + "': expected a string");
                       c.run_name = v.get<std::string>();
                     },
                     [](const RunConfig& c) { return json(resolved_run_name(c)); }};
    f["snapshot_times"] = {[](RunConfig& c, const json& v, const std::string& k) { c.snapshot_times = as_reals(v, k); },
                           [](const RunConfig& c) { return json(c.snapshot_times); }};
    f["qoi_every"] = {[](RunConfig& c, const json& v, const std::string& k) { c.qoi_every = as_count(v, k); },
                      [](const RunConfig& c) { return json(c.qoi_every); }};
    f["mode"] = {[](RunConfig& c, const json& v, const std::string& k) { c.mode = enum_from(v, kRunModeNames, k); },
                 [](const RunConfig& c) { return json(to_string(c.mode)); }};
    f["sweep.nu"] = {[](RunConfig& c, const json& v, const std::string& k) { c.sweep_nu = as_reals(v, k); },
                     [](const RunConfig& c) { return json(c.sweep_nu); }};
    f["threads"] = {[](RunConfig& c, const json& v, const std::string& k) { c.threads = as_count(v, k); }, {}};
    f["out"] = {[](RunConfig& c, const json& v, const std::string& k) {
                  if (!v.is_string()) throw ConfigError("key '" + k + "': expected a string");
                  c.out_dir = v.get<std::string>();
                },
                {}};
    return f;
  }();
  return fields;
}

/// Nested objects are accepted and read as dotted keys.
inline void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      flatten(*it, key, out);
    else
      out.emplace_back(key, *it);
  }
}

}  // namespace detail

/// Applies the keys of a JSON object on top of `base`. Unknown keys throw.
inline RunConfig apply_config(RunConfig base, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  std::vector<std::pair<std::string, nlohmann::json>> flat;
  detail::flatten(j, "", flat);
  const auto& fields = detail::config_fields();
  for (const auto& [key, value] : flat) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second.set(base, value, key);
  }
  return base;
}

inline RunConfig parse_config_text(const std::string& text, RunConfig base = {}, const std::string& source = "config") {
  nlohmann::json j;
  try {
    j = text.find_first_not_of(" \t\r\n") == std::string::npos ? nlohmann::json::object()
                                                                 : nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // The library message carries line and column.
    throw ConfigError(source + ": " + e.what());
  }
  try {
    return apply_config(std::move(base), j);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

inline RunConfig parse_config_file(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(base), path.string());
}

/// Validation beyond ModelParams: grid, sampling and output cadence.
inline void validate(const RunConfig& c) {
  try {
    c.params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.nx == 0 || c.ny == 0) throw ConfigError("grid.nx and grid.ny must be positive");
  if (!(c.lx > 0.0) || !(c.ly > 0.0)) throw ConfigError("grid.lx and grid.ly must be positive");
  if (c.qoi_every == 0) throw ConfigError("qoi_every must be positive");
  if (c.mode == RunMode::Ensemble && c.samples < 2) throw ConfigError("samples must be at least 2");
  if (c.mode == RunMode::Sweep && c.sweep_nu.empty()) throw ConfigError("sweep.nu must not be empty");
  for (double nu : c.sweep_nu)
    if (!(nu >= 0.0)) throw ConfigError("sweep.nu entries must be nonnegative");
  for (double t : c.snapshot_times)
    if (!(t >= 0.0) || t > c.params.t_end + 0.5 * c.params.dt)
      throw ConfigError("snapshot time " + std::to_string(t) + " outside [0, t_end]");
  if (!c.params.noise.q.empty() && c.params.noise.q.size() != (c.nx + 1) * (c.ny + 1))
    throw ConfigError("noise.q must have one entry per node");
  if (c.run_name.find('/') != std::string::npos || c.run_name == "." || c.run_name == "..")
    throw ConfigError("run_name must be a plain directory name");
}

/// Canonical serialisation: sorted dotted keys, one per line. Parsing the
/// echo yields the same configuration (threads and out excepted).
inline std::string config_echo(const RunConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, field] : detail::config_fields())
    if (field.get) j[key] = field.get(c);
  return j.dump(2) + "\n";
}

}  // namespace spde_tumor

#endif  // SPDE_TUMOR_CONFIG_HPP
