#include "latentalpha/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "latentalpha/error.hpp"

namespace latentalpha {

namespace {

using nlohmann::json;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "model", "time_unit", "horizon", "dt", "F0", "sigma", "kappa", "mu", "tick", "theta", "prior", "generator",
      "a", "beta", "phi", "alpha", "initial_inventory", "true_state", "latent_switch_times", "latent_states",
      "paths", "seed", "time_slices", "value_bins", "histogram_bins", "sample_paths", "jump_sampling", "states",
      "em_tolerance", "em_max_iterations", "synth_prior", "synth_transition", "synth_mu", "synth_kappa",
      "synth_theta", "synth_days", "synth_steps", "synth_start_price"};
  return keys;
}

Vector to_vector(const json& j, const std::string& key) {
  if (!j.is_array()) throw Error(ErrorKind::Config, key + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Matrix to_matrix(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::Config, key + " must be a non-empty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw Error(ErrorKind::Config, key + " rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

std::size_t to_count(const json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw Error(ErrorKind::Config, key + " must be a non-negative integer");
  return j.get<std::size_t>();
}

void apply_document(RunConfig& cfg, const json& doc) {
  for (const auto& item : doc.items())
    if (!known_keys().count(item.key())) throw Error(ErrorKind::Config, "unknown key '" + item.key() + "'");

  const auto has = [&](const char* key) { return doc.contains(key); };
  const auto num = [&](const char* key, double fallback) { return has(key) ? doc.at(key).get<double>() : fallback; };

  const std::string unit = has("time_unit") ? doc.at("time_unit").get<std::string>() : "hour";
  double per_hour = 1.0;  // time units per hour
  if (unit == "second") {
    per_hour = 3600.0;
  } else if (unit != "hour") {
    throw Error(ErrorKind::Config, "time_unit must be 'hour' or 'second'");
  }

  cfg.paths = has("paths") ? to_count(doc.at("paths"), "paths") : cfg.paths;
  if (has("seed")) {
    if (!doc.at("seed").is_number_unsigned()) throw Error(ErrorKind::Config, "seed must be a non-negative integer");
    cfg.seed = doc.at("seed").get<std::uint64_t>();
  }
  cfg.tick = num("tick", cfg.tick);
  if (has("states")) {
    const json& s = doc.at("states");
    if (s.is_string()) {
      parse_state_range(s.get<std::string>(), cfg.states_lo, cfg.states_hi);
    } else {
      cfg.states_lo = cfg.states_hi = to_count(s, "states");
    }
  }
  cfg.em.relative_tolerance = num("em_tolerance", cfg.em.relative_tolerance);
  if (has("em_max_iterations")) cfg.em.max_iterations = static_cast<int>(to_count(doc.at("em_max_iterations"), "em_max_iterations"));

  StudyConfig& st = cfg.study;
  if (has("time_slices")) st.time_slices = to_count(doc.at("time_slices"), "time_slices");
  if (has("value_bins")) st.value_bins = to_count(doc.at("value_bins"), "value_bins");
  if (has("histogram_bins")) st.histogram_bins = to_count(doc.at("histogram_bins"), "histogram_bins");
  if (has("sample_paths")) st.sample_paths = to_count(doc.at("sample_paths"), "sample_paths");
  if (has("jump_sampling")) {
    const std::string mode = doc.at("jump_sampling").get<std::string>();
    if (mode == "auto") st.sampling = JumpSampling::Auto;
    else if (mode == "bernoulli") st.sampling = JumpSampling::Bernoulli;
    else if (mode == "exact") st.sampling = JumpSampling::Exact;
    else throw Error(ErrorKind::Config, "jump_sampling must be auto, bernoulli or exact");
  }

  if (has("synth_mu")) {
    SyntheticSpec syn;
    const Vector mu = to_vector(doc.at("synth_mu"), "synth_mu");
    const Vector kappa = has("synth_kappa") ? to_vector(doc.at("synth_kappa"), "synth_kappa") : Vector::Zero(mu.size());
    const Vector theta = has("synth_theta") ? to_vector(doc.at("synth_theta"), "synth_theta") : Vector::Zero(mu.size());
    if (kappa.size() != mu.size() || theta.size() != mu.size())
      throw Error(ErrorKind::Config, "synth_mu, synth_kappa and synth_theta must have equal length");
    for (Eigen::Index j = 0; j < mu.size(); ++j) syn.psi.push_back({mu(j), kappa(j), theta(j)});
    const auto n = mu.size();
    syn.prior = has("synth_prior") ? to_vector(doc.at("synth_prior"), "synth_prior")
                                   : Vector::Constant(n, 1.0 / static_cast<double>(n));
    syn.transition = has("synth_transition") ? to_matrix(doc.at("synth_transition"), "synth_transition")
                                             : Matrix::Identity(n, n);
    if (has("synth_days")) syn.days = to_count(doc.at("synth_days"), "synth_days");
    if (has("synth_steps")) syn.steps = to_count(doc.at("synth_steps"), "synth_steps");
    syn.start_price = num("synth_start_price", 0.0);
    EMParams check{syn.prior, syn.transition, syn.psi};
    try {
      check.validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, std::string("synthetic parameters: ") + e.what());
    }
    cfg.synthetic = std::move(syn);
  }

  if (!has("model")) {
    for (const char* key : {"theta", "sigma", "kappa", "mu", "generator", "prior"})
      if (has(key)) throw Error(ErrorKind::Config, std::string("'") + key + "' requires 'model'");
    return;
  }
  cfg.has_model = true;

  ModelSpec& m = st.model;
  const std::string model = doc.at("model").get<std::string>();
  if (model == "ou") {
    m.dynamics = OuModel{num("kappa", 0.0) * per_hour, num("sigma", 0.0) * std::sqrt(per_hour)};
  } else if (model == "jump") {
    m.dynamics = JumpModel{num("mu", 0.0) * per_hour, num("kappa", 0.0) * per_hour};
  } else {
    throw Error(ErrorKind::Config, "model must be 'ou' or 'jump'");
  }
  if (!has("theta")) throw Error(ErrorKind::Config, "'theta' is required");
  m.chain.theta = to_vector(doc.at("theta"), "theta");
  const auto j = m.chain.theta.size();
  m.chain.prior = has("prior") ? to_vector(doc.at("prior"), "prior") : Vector::Constant(j, 1.0 / static_cast<double>(j));
  m.chain.generator = has("generator") ? Matrix(to_matrix(doc.at("generator"), "generator") * per_hour) : Matrix::Zero(j, j);
  m.F0 = num("F0", 0.0);

  CostParams& c = m.cost;
  c.T = num("horizon", per_hour) / per_hour;
  if (has("a")) c.a = doc.at("a").get<double>() / per_hour;
  c.b = cfg.tick;
  c.beta = num("beta", 0.0);
  c.phi = num("phi", 0.0) * per_hour;
  c.N_init = num("initial_inventory", 0.0);
  if (has("alpha")) {
    const json& a = doc.at("alpha");
    if (a.is_string()) {
      if (a.get<std::string>() != "inf") throw Error(ErrorKind::Config, "alpha must be a number or \"inf\"");
      c.alpha_infinite = true;
    } else {
      c.alpha_infinite = false;
      c.alpha = a.get<double>();
    }
  }
  st.dt = num("dt", per_hour / 3600.0) / per_hour;

  if (has("true_state") && (has("latent_switch_times") || has("latent_states")))
    throw Error(ErrorKind::Config, "use either true_state or latent_switch_times/latent_states");
  if (has("true_state")) {
    const std::size_t s = to_count(doc.at("true_state"), "true_state");
    if (s < 1 || s > static_cast<std::size_t>(j)) throw Error(ErrorKind::Config, "true_state must be in 1..J");
    st.latent_path = fixed_chain_path(c.T, {}, {static_cast<int>(s) - 1});
  } else if (has("latent_states")) {
    std::vector<double> times;
    if (has("latent_switch_times"))
      for (const auto& v : doc.at("latent_switch_times")) times.push_back(v.get<double>() / per_hour);
    std::vector<int> states;
    for (const auto& v : doc.at("latent_states")) {
      const std::size_t s = to_count(v, "latent_states");
      if (s < 1 || s > static_cast<std::size_t>(j)) throw Error(ErrorKind::Config, "latent_states entries must be in 1..J");
      states.push_back(static_cast<int>(s) - 1);
    }
    st.latent_path = fixed_chain_path(c.T, std::move(times), std::move(states));
  } else if (has("latent_switch_times")) {
    throw Error(ErrorKind::Config, "latent_switch_times requires latent_states");
  }

  m.validate();
  grid_steps(c.T, st.dt);
}

}  // namespace

void parse_state_range(const std::string& text, std::size_t& lo, std::size_t& hi) {
  const auto dots = text.find("..");
  try {
    std::size_t used = 0;
    if (dots == std::string::npos) {
      lo = hi = std::stoul(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } else {
      const std::string left = text.substr(0, dots);
      const std::string right = text.substr(dots + 2);
      lo = std::stoul(left, &used);
      if (used != left.size()) throw std::invalid_argument(text);
      hi = std::stoul(right, &used);
      if (used != right.size()) throw std::invalid_argument(text);
    }
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Config, "states must be N or LO..HI, got '" + text + "'");
  }
  if (lo < 1 || hi < lo) throw Error(ErrorKind::Config, "states range must satisfy 1 <= LO <= HI");
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
  try {
    apply_document(cfg, doc);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("bad value type: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    throw Error(ErrorKind::Config, e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace latentalpha
